//! Model definition, document parsing and the associated killed random walk.
//!
//! A model assigns to every color `i` a leakiness `m_i >= 1` and a finite
//! family of weighted toppling targets `(offset, i -> j, weight)`. A site
//! `(x, i)` holding mass above `m_i * row_sum(i)` topples: it sheds that
//! threshold, sends `weight` of sand to each target, and leaks the rest.
//! Normalizing the weights by the threshold turns one toppling into one step
//! of a sub-stochastic walk on `Z^d x {colors}`; the per-color kill
//! probability is `1 - 1/m_i`.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{pack, unpack, MAX_DIM};

#[derive(Debug, Clone, PartialEq)]
pub struct ToppleEntry {
    pub offset: Vec<i32>,
    /// 0-based source color.
    pub from: usize,
    /// 0-based target color.
    pub to: usize,
    pub weight: f64,
}

/// A validated toppling rule.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub d: usize,
    pub p: usize,
    /// Per-color leakiness, each `>= 1`, at least one `> 1`.
    pub leakiness: Vec<f64>,
    pub entries: Vec<ToppleEntry>,
    row_sums: Vec<f64>,
}

impl ModelSpec {
    pub fn new(d: usize, p: usize, leakiness: Vec<f64>, entries: Vec<ToppleEntry>) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::Validation(format!(
                "dimension must be in 1..={MAX_DIM}, got {d}"
            )));
        }
        if p == 0 || p > 255 {
            return Err(Error::Validation(format!(
                "color count must be in 1..=255, got {p}"
            )));
        }
        if leakiness.len() != p {
            return Err(Error::Validation(format!(
                "expected {p} leakiness values, got {}",
                leakiness.len()
            )));
        }
        for (i, &m) in leakiness.iter().enumerate() {
            if !m.is_finite() || m < 1.0 {
                return Err(Error::Validation(format!(
                    "leakiness of color {} is {m}, must be a real >= 1",
                    i + 1
                )));
            }
        }
        if !leakiness.iter().any(|&m| m > 1.0) {
            return Err(Error::Validation(
                "at least one color must be leaky (m > 1)".into(),
            ));
        }
        let mut row_sums = vec![0.0; p];
        for e in &entries {
            if e.offset.len() != d {
                return Err(Error::Validation(format!(
                    "offset {:?} has dimension {}, expected {d}",
                    e.offset,
                    e.offset.len()
                )));
            }
            if e.from >= p || e.to >= p {
                return Err(Error::Validation(format!(
                    "color index out of range in entry {:?} -> {}..{}",
                    e.offset,
                    e.from + 1,
                    e.to + 1
                )));
            }
            if !e.weight.is_finite() || e.weight < 0.0 {
                return Err(Error::Validation(format!(
                    "weight {} must be a non-negative real",
                    e.weight
                )));
            }
            row_sums[e.from] += e.weight;
        }
        for (i, &s) in row_sums.iter().enumerate() {
            if s <= 0.0 {
                return Err(Error::Validation(format!(
                    "empty toppling row: color {} sends no mass",
                    i + 1
                )));
            }
        }
        Ok(ModelSpec {
            d,
            p,
            leakiness,
            entries,
            row_sums,
        })
    }

    pub fn row_sum(&self, color: usize) -> f64 {
        self.row_sums[color]
    }

    /// Toppling threshold `M_i = m_i * row_sum(i)`.
    pub fn threshold(&self, color: usize) -> f64 {
        self.leakiness[color] * self.row_sums[color]
    }

    pub fn max_threshold(&self) -> f64 {
        (0..self.p).map(|i| self.threshold(i)).fold(0.0, f64::max)
    }

    pub fn min_threshold(&self) -> f64 {
        (0..self.p)
            .map(|i| self.threshold(i))
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest 1-norm among toppling offsets.
    pub fn max_offset_norm1(&self) -> i64 {
        self.entries
            .iter()
            .map(|e| e.offset.iter().map(|&c| c.abs() as i64).sum())
            .max()
            .unwrap_or(0)
    }

    /// Same rule with every color's leakiness replaced by `m`. Used by the
    /// regime sweeps where all colors scale together.
    pub fn with_uniform_leakiness(&self, m: f64) -> Result<ModelSpec> {
        ModelSpec::new(self.d, self.p, vec![m; self.p], self.entries.clone())
    }

    /// Serializes back to the document format; weights survive bit-exactly.
    pub fn to_document(&self) -> String {
        let doc = ModelDoc {
            dimension: self.d as u32,
            colors: self.p as u32,
            leakiness: self.leakiness.clone(),
            entries: self
                .entries
                .iter()
                .map(|e| EntryDoc {
                    offset: e.offset.iter().map(|&c| c as i64).collect(),
                    from: e.from as u32 + 1,
                    to: e.to as u32 + 1,
                    weight: e.weight,
                })
                .collect(),
        };
        toml::to_string(&doc).expect("model document serialization")
    }
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    dimension: u32,
    colors: u32,
    leakiness: Vec<f64>,
    entries: Vec<EntryDoc>,
}

#[derive(Serialize, Deserialize)]
struct EntryDoc {
    offset: Vec<i64>,
    from: u32,
    to: u32,
    weight: f64,
}

/// Parses and validates a model document (TOML, colors 1-based).
pub fn load_model_spec(text: &str) -> Result<ModelSpec> {
    let doc: ModelDoc = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let mut seen = HashSet::new();
    for e in &doc.entries {
        if e.from == 0 || e.to == 0 {
            return Err(Error::Parse(format!(
                "colors are 1-based, got from={} to={}",
                e.from, e.to
            )));
        }
        if e.offset.iter().any(|&c| c.abs() > i32::MAX as i64 / 4) {
            return Err(Error::Parse(format!("offset {:?} out of range", e.offset)));
        }
        if e.weight <= 0.0 {
            return Err(Error::Parse(format!(
                "entry weight must be > 0, got {}",
                e.weight
            )));
        }
        if !seen.insert((e.offset.clone(), e.from, e.to)) {
            return Err(Error::Parse(format!(
                "duplicate entry key (offset {:?}, from {}, to {})",
                e.offset, e.from, e.to
            )));
        }
    }
    ModelSpec::new(
        doc.dimension as usize,
        doc.colors as usize,
        doc.leakiness,
        doc.entries
            .iter()
            .map(|e| ToppleEntry {
                offset: e.offset.iter().map(|&c| c as i32).collect(),
                from: e.from as usize - 1,
                to: e.to as usize - 1,
                weight: e.weight,
            })
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpEntry {
    pub offset: Vec<i32>,
    pub from: usize,
    pub to: usize,
    pub prob: f64,
}

/// The sub-stochastic jump measure of the killed random walk:
/// `mu_{i,j}(x) = c(x,i,j) / (m_i * row_sum(i))`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpKernel {
    pub d: usize,
    pub p: usize,
    pub entries: Vec<JumpEntry>,
    /// `1 - 1/m_i` per color.
    pub kill_prob: Vec<f64>,
    /// Entry indices grouped by source color.
    by_from: Vec<Vec<usize>>,
}

impl JumpKernel {
    pub fn entries_from(&self, color: usize) -> impl Iterator<Item = &JumpEntry> {
        self.by_from[color].iter().map(|&k| &self.entries[k])
    }

    pub fn row_mass(&self, color: usize) -> f64 {
        self.entries_from(color).map(|e| e.prob).sum()
    }

    pub fn max_offset_norm1(&self) -> i64 {
        self.entries
            .iter()
            .map(|e| e.offset.iter().map(|&c| c.abs() as i64).sum())
            .max()
            .unwrap_or(0)
    }

    /// Survival probability of one step, maximized over colors.
    pub fn max_survival(&self) -> f64 {
        (0..self.p).map(|i| self.row_mass(i)).fold(0.0, f64::max)
    }

    pub(crate) fn from_entries(
        d: usize,
        p: usize,
        entries: Vec<JumpEntry>,
        kill_prob: Vec<f64>,
    ) -> Self {
        let mut by_from = vec![Vec::new(); p];
        for (k, e) in entries.iter().enumerate() {
            by_from[e.from].push(k);
        }
        JumpKernel {
            d,
            p,
            entries,
            kill_prob,
            by_from,
        }
    }
}

/// Builds the killed-random-walk kernel of a validated model.
pub fn krw_measure(spec: &ModelSpec) -> JumpKernel {
    let entries: Vec<JumpEntry> = spec
        .entries
        .iter()
        .filter(|e| e.weight > 0.0)
        .map(|e| JumpEntry {
            offset: e.offset.clone(),
            from: e.from,
            to: e.to,
            prob: e.weight / (spec.leakiness[e.from] * spec.row_sum(e.from)),
        })
        .collect();
    let kill_prob = spec.leakiness.iter().map(|&m| 1.0 - 1.0 / m).collect();
    JumpKernel::from_entries(spec.d, spec.p, entries, kill_prob)
}

/// The non-killed analogue of the walk: each row renormalized to a
/// probability measure, `mu~_{i,j}(x) = c(x,i,j) / row_sum(i)`. This is the
/// jump law whose energy matrix drives the vanishing-leak regime.
pub fn non_killed_kernel(spec: &ModelSpec) -> JumpKernel {
    let entries: Vec<JumpEntry> = spec
        .entries
        .iter()
        .filter(|e| e.weight > 0.0)
        .map(|e| JumpEntry {
            offset: e.offset.clone(),
            from: e.from,
            to: e.to,
            prob: e.weight / spec.row_sum(e.from),
        })
        .collect();
    JumpKernel::from_entries(spec.d, spec.p, entries, vec![0.0; spec.p])
}

/// Outcome of a bounded check: confirmed within the horizon, or not decided.
#[derive(Debug, Clone, PartialEq)]
pub enum Check {
    Holds,
    Undetermined(String),
}

impl Check {
    pub fn holds(&self) -> bool {
        matches!(self, Check::Holds)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        match self {
            Check::Holds => write!(f, "holds"),
            Check::Undetermined(why) => write!(f, "undetermined ({why})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AssumptionReport {
    pub horizon: usize,
    /// Some color leaks: `m_i > 1`.
    pub killed_somewhere: bool,
    pub irreducible: Check,
    pub aperiodic: Check,
    /// Always true for a parsed model; the format cannot express infinite support.
    pub finite_support: bool,
}

impl AssumptionReport {
    pub fn all_hold(&self) -> bool {
        self.killed_somewhere
            && self.finite_support
            && self.irreducible.holds()
            && self.aperiodic.holds()
    }
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        writeln!(f, "horizon: {}", self.horizon)?;
        writeln!(
            f,
            "killed on some color: {}",
            if self.killed_somewhere { "holds" } else { "FAILS" }
        )?;
        writeln!(f, "irreducible: {}", self.irreducible)?;
        writeln!(f, "aperiodic: {}", self.aperiodic)?;
        write!(
            f,
            "finite support: {}",
            if self.finite_support { "holds" } else { "FAILS" }
        )
    }
}

/// Default horizon for the bounded reachability checks.
pub fn default_horizon(kernel: &JumpKernel) -> usize {
    2 * kernel.p * (kernel.max_offset_norm1() as usize + 1)
}

/// Bounded verification of the standing walk assumptions.
///
/// Reachability is explored breadth-first up to `horizon` steps. The checks
/// are sound: a `Holds` is a certificate, while a failure to certify within
/// the horizon is reported as undetermined rather than false.
pub fn validate_assumptions(kernel: &JumpKernel, horizon: usize) -> AssumptionReport {
    let killed_somewhere = kernel.kill_prob.iter().any(|&k| k > 1e-15);
    let d = kernel.d;

    // reached[c] = set of (displacement, color) seen from (0, c).
    let mut reached: Vec<HashMap<u128, usize>> = Vec::with_capacity(kernel.p);
    // return_lengths[c] = lengths of walks (0,c) -> (0,c).
    let mut return_lengths: Vec<HashSet<usize>> = vec![HashSet::new(); kernel.p];
    // Per start color, displacements of same-color returns (any endpoint x).
    let mut return_displacements: Vec<Vec<Vec<i32>>> = vec![Vec::new(); kernel.p];

    for start in 0..kernel.p {
        let origin = vec![0i32; d];
        let mut seen: HashMap<u128, usize> = HashMap::new();
        let mut queue = VecDeque::new();
        let key0 = pack(&origin, start);
        seen.insert(key0, 0);
        queue.push_back((origin, start, 0usize));
        while let Some((x, c, steps)) = queue.pop_front() {
            if steps == horizon {
                continue;
            }
            for e in kernel.entries_from(c) {
                if e.prob <= 0.0 {
                    continue;
                }
                let y: Vec<i32> = x.iter().zip(&e.offset).map(|(a, b)| a + b).collect();
                if e.to == start {
                    return_displacements[start].push(y.clone());
                    if y.iter().all(|&v| v == 0) {
                        return_lengths[start].insert(steps + 1);
                    }
                }
                let key = pack(&y, e.to);
                if !seen.contains_key(&key) {
                    seen.insert(key, steps + 1);
                    queue.push_back((y, e.to, steps + 1));
                }
            }
        }
        reached.push(seen);
    }

    // Irreducibility: every color pair reachable, the reachable return
    // displacements generate Z^d as a group, and the +-basis displacements
    // are themselves realized (so the generated *semigroup* is all of Z^d).
    let mut irreducible = Check::Holds;
    'irr: for start in 0..kernel.p {
        let mut colors_seen = vec![false; kernel.p];
        for (&key, _) in reached[start].iter() {
            let (_, c) = unpack(key, d);
            colors_seen[c] = true;
        }
        if let Some(missing) = colors_seen.iter().position(|&b| !b) {
            irreducible = Check::Undetermined(format!(
                "color {} not reached from color {} within horizon",
                missing + 1,
                start + 1
            ));
            break 'irr;
        }
        if !lattice_spans(&return_displacements[start], d) {
            irreducible = Check::Undetermined(format!(
                "return displacements of color {} do not span Z^{d} within horizon",
                start + 1
            ));
            break 'irr;
        }
        let set: HashSet<Vec<i32>> = return_displacements[start].iter().cloned().collect();
        for axis in 0..d {
            for sign in [-1i32, 1] {
                let mut e = vec![0i32; d];
                e[axis] = sign;
                if !set.contains(&e) {
                    irreducible = Check::Undetermined(format!(
                        "unit displacement {e:?} not realized as a color-{} return within horizon",
                        start + 1
                    ));
                    break 'irr;
                }
            }
        }
    }

    let mut aperiodic = Check::Holds;
    for c in 0..kernel.p {
        let lengths: Vec<usize> = return_lengths[c].iter().copied().collect();
        if lengths.is_empty() {
            aperiodic = Check::Undetermined(format!(
                "no return to (0, color {}) observed within horizon",
                c + 1
            ));
            break;
        }
        let g = lengths.iter().fold(0usize, |acc, &l| gcd(acc, l));
        if g != 1 {
            aperiodic = Check::Undetermined(format!(
                "observed return lengths at color {} have gcd {g}",
                c + 1
            ));
            break;
        }
    }

    AssumptionReport {
        horizon,
        killed_somewhere,
        irreducible,
        aperiodic,
        finite_support: true,
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if a == 0 {
        b
    } else {
        gcd(b % a, a)
    }
}

/// Does the integer lattice generated by `vectors` equal `Z^d`?
/// Column-style Hermite reduction over the integers.
fn lattice_spans(vectors: &[Vec<i32>], d: usize) -> bool {
    let mut basis: Vec<Vec<i64>> = Vec::new();
    for v in vectors {
        let mut w: Vec<i64> = v.iter().map(|&c| c as i64).collect();
        // Reduce w against the triangular basis.
        'reduce: loop {
            let lead = match w.iter().position(|&c| c != 0) {
                Some(k) => k,
                None => break 'reduce,
            };
            match basis.iter().position(|b| leading(b) == Some(lead)) {
                Some(bi) => {
                    let b_lead = basis[bi][lead];
                    let q = w[lead].div_euclid(b_lead);
                    for k in 0..d {
                        w[k] -= q * basis[bi][k];
                    }
                    if w[lead] != 0 {
                        // Swap to keep the smaller leading entry in the basis.
                        std::mem::swap(&mut basis[bi], &mut w);
                    }
                }
                None => {
                    if w[lead] < 0 {
                        for c in w.iter_mut() {
                            *c = -*c;
                        }
                    }
                    basis.push(w);
                    break 'reduce;
                }
            }
        }
    }
    if basis.len() < d {
        return false;
    }
    basis.sort_by_key(|b| leading(b));
    let mut det: i64 = 1;
    for (k, b) in basis.iter().enumerate() {
        if leading(b) != Some(k) {
            return false;
        }
        det = det.saturating_mul(b[k]);
    }
    det.abs() == 1
}

fn leading(v: &[i64]) -> Option<usize> {
    v.iter().position(|&c| c != 0)
}

/// The spec document for the four-color test model: color 1 feeds colors
/// 2..4 in place, and each of those returns mass to color 1 along one axis.
pub fn four_color_example() -> ModelSpec {
    let mut entries = Vec::new();
    for to in 1..4usize {
        entries.push(ToppleEntry {
            offset: vec![0, 0, 0],
            from: 0,
            to,
            weight: 1.0,
        });
    }
    // Color 2 moves along the third axis, color 3 the second, color 4 the first.
    for (color, axis) in [(1usize, 2usize), (2, 1), (3, 0)] {
        for sign in [-1i32, 1] {
            let mut off = vec![0, 0, 0];
            off[axis] = sign;
            entries.push(ToppleEntry {
                offset: off,
                from: color,
                to: 0,
                weight: 1.0,
            });
        }
    }
    ModelSpec::new(3, 4, vec![4.0 / 3.0, 2.0, 2.0, 2.0], entries).unwrap()
}

/// Uniform nearest-neighbor model on `Z^d` with a single color.
pub fn uniform_model(d: usize, m: f64) -> ModelSpec {
    let mut entries = Vec::new();
    for axis in 0..d {
        for sign in [-1i32, 1] {
            let mut off = vec![0; d];
            off[axis] = sign;
            entries.push(ToppleEntry {
                offset: off,
                from: 0,
                to: 0,
                weight: 1.0,
            });
        }
    }
    ModelSpec::new(d, 1, vec![m], entries).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_color_thresholds() {
        let spec = four_color_example();
        assert!((spec.threshold(0) - 4.0).abs() < 1e-15);
        for c in 1..4 {
            assert!((spec.threshold(c) - 4.0).abs() < 1e-15);
        }
        assert_eq!(spec.max_offset_norm1(), 1);
    }

    #[test]
    fn uniform_threshold() {
        let spec = uniform_model(2, 2.0);
        assert!((spec.threshold(0) - 8.0).abs() < 1e-15);
    }

    #[test]
    fn document_round_trip() {
        let spec = four_color_example();
        let doc = spec.to_document();
        let reloaded = load_model_spec(&doc).unwrap();
        assert_eq!(reloaded, spec);
    }

    #[test]
    fn rejects_empty_row() {
        // Color 2 exists but never sends mass.
        let err = ModelSpec::new(
            1,
            2,
            vec![2.0, 2.0],
            vec![ToppleEntry {
                offset: vec![1],
                from: 0,
                to: 1,
                weight: 1.0,
            }],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation(msg) if msg.contains("empty toppling row")));
    }

    #[test]
    fn rejects_small_leakiness() {
        let err = ModelSpec::new(
            1,
            1,
            vec![0.5],
            vec![ToppleEntry {
                offset: vec![1],
                from: 0,
                to: 0,
                weight: 1.0,
            }],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn rejects_all_massless() {
        let err = uniform_model(2, 2.0)
            .with_uniform_leakiness(1.0)
            .unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let text = "dimension = 2\ncolors = 1\nleakiness = [2.0]\n\n[[entries]]\noffset = [1]\nfrom = 1\nto = 1\nweight = 1.0\n";
        assert!(matches!(
            load_model_spec(text),
            Err(Error::Validation(msg)) if msg.contains("dimension")
        ));
    }

    #[test]
    fn rejects_duplicate_key() {
        let text = "dimension = 1\ncolors = 1\nleakiness = [2.0]\n\n[[entries]]\noffset = [1]\nfrom = 1\nto = 1\nweight = 1.0\n\n[[entries]]\noffset = [1]\nfrom = 1\nto = 1\nweight = 0.5\n";
        assert!(matches!(
            load_model_spec(text),
            Err(Error::Parse(msg)) if msg.contains("duplicate")
        ));
    }

    #[test]
    fn krw_four_color() {
        let kernel = krw_measure(&four_color_example());
        for e in kernel.entries_from(0) {
            assert!((e.prob - 0.25).abs() < 1e-15);
        }
        assert!((kernel.kill_prob[0] - 0.25).abs() < 1e-15);
        assert!((kernel.kill_prob[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn krw_uniform() {
        let kernel = krw_measure(&uniform_model(2, 2.0));
        for e in kernel.entries_from(0) {
            assert!((e.prob - 0.125).abs() < 1e-15);
        }
        assert!((kernel.kill_prob[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn krw_single_entry_row() {
        let eps = 1e-3;
        let spec = ModelSpec::new(
            1,
            1,
            vec![1.0 + eps],
            vec![ToppleEntry {
                offset: vec![1],
                from: 0,
                to: 0,
                weight: 3.0,
            }],
        )
        .unwrap();
        let kernel = krw_measure(&spec);
        let e = kernel.entries_from(0).next().unwrap();
        assert!((e.prob - 1.0 / (1.0 + eps)).abs() < 1e-15);
        assert!((kernel.kill_prob[0] - eps / (1.0 + eps)).abs() < 1e-15);
    }

    #[test]
    fn row_mass_matches_survival() {
        for spec in [four_color_example(), uniform_model(3, 1.5)] {
            let kernel = krw_measure(&spec);
            for c in 0..spec.p {
                assert!((kernel.row_mass(c) - 1.0 / spec.leakiness[c]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn assumptions_four_color() {
        let kernel = krw_measure(&four_color_example());
        let report = validate_assumptions(&kernel, 8);
        assert!(report.killed_somewhere);
        assert!(report.irreducible.holds());
        // The color graph is bipartite (color 1 vs the rest), so every return
        // walk has even length; aperiodicity cannot be certified.
        assert!(matches!(report.aperiodic, Check::Undetermined(ref why) if why.contains("gcd 2")));
    }

    #[test]
    fn assumptions_parity_obstruction() {
        let kernel = krw_measure(&uniform_model(1, 2.0));
        let report = validate_assumptions(&kernel, 8);
        assert!(report.irreducible.holds());
        assert!(matches!(report.aperiodic, Check::Undetermined(ref why) if why.contains("gcd 2")));
    }

    #[test]
    fn assumptions_one_sided_support() {
        let spec = ModelSpec::new(
            2,
            1,
            vec![2.0],
            vec![ToppleEntry {
                offset: vec![1, 0],
                from: 0,
                to: 0,
                weight: 1.0,
            }],
        )
        .unwrap();
        let report = validate_assumptions(&krw_measure(&spec), 8);
        assert!(!report.irreducible.holds());
    }

    #[test]
    fn assumptions_aperiodic_with_self_loop() {
        let mut entries = uniform_model(2, 2.0).entries;
        entries.push(ToppleEntry {
            offset: vec![0, 0],
            from: 0,
            to: 0,
            weight: 0.5,
        });
        let spec = ModelSpec::new(2, 1, vec![2.0], entries).unwrap();
        let report = validate_assumptions(&krw_measure(&spec), 8);
        assert!(report.irreducible.holds());
        assert!(report.aperiodic.holds());
        assert!(report.all_hold());
    }

    #[test]
    fn assumptions_monotone_in_horizon() {
        let kernel = krw_measure(&four_color_example());
        let mut prev_irr = false;
        for h in [1, 2, 4, 8, 16] {
            let r = validate_assumptions(&kernel, h);
            if prev_irr {
                assert!(r.irreducible.holds());
            }
            prev_irr = r.irreducible.holds();
        }
        assert!(prev_irr);
    }

    #[test]
    fn lattice_span_checks() {
        assert!(lattice_spans(&[vec![1, 0], vec![0, 1]], 2));
        assert!(lattice_spans(&[vec![2, 1], vec![1, 1]], 2));
        assert!(!lattice_spans(&[vec![2, 0], vec![0, 2]], 2));
        assert!(!lattice_spans(&[vec![1, 0]], 2));
    }
}
