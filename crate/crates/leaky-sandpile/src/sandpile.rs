//! Stabilization of sandpile configurations, the odometer, and shape
//! measurements.
//!
//! The stabilizer drains a FIFO queue of unstable sites and topples each one
//! in bulk: a site holding `mass` against threshold `M` fires
//! `max(0, ceil(mass/M) - 1)` times at once, so the work is proportional to
//! the number of visited sites rather than to the toppling count. Incoming
//! sand is accumulated with Kahan compensation because a single run mixes
//! magnitudes from `N` down to the threshold scale.

use std::collections::{HashMap, HashSet, VecDeque};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lattice::{dot, norm_i32, pack, unpack, Field};
use crate::model::ModelSpec;

/// Number of single topplings compressed into one bulk move:
/// the smallest `k` with `mass - k * threshold <= threshold`.
/// Mass exactly at the threshold is stable.
pub fn topple_count(mass: f64, threshold: f64) -> f64 {
    assert!(threshold > 0.0);
    let k = (mass / threshold).ceil() - 1.0;
    k.max(0.0)
}

#[derive(Debug, Clone, Copy, Default)]
struct Pile {
    mass: f64,
    /// Kahan compensation for `mass`.
    comp: f64,
}

impl Pile {
    #[inline]
    fn add(&mut self, value: f64) {
        let y = value - self.comp;
        let t = self.mass + y;
        self.comp = (t - self.mass) - y;
        self.mass = t;
    }
}

/// A sparse non-negative configuration on `Z^d x {colors}`.
#[derive(Debug, Clone)]
pub struct SandpileState {
    pub d: usize,
    pub p: usize,
    piles: HashMap<u128, Pile>,
    pub leaked_total: f64,
    /// Bulk toppling operations performed to reach this state.
    pub topple_events: u64,
}

impl SandpileState {
    pub fn empty(d: usize, p: usize) -> Self {
        SandpileState {
            d,
            p,
            piles: HashMap::new(),
            leaked_total: 0.0,
            topple_events: 0,
        }
    }

    /// `N` grains at a single site.
    pub fn point_mass(d: usize, p: usize, n: f64, x: &[i32], color: usize) -> Self {
        let mut s = Self::empty(d, p);
        s.add_mass(x, color, n);
        s
    }

    pub fn add_mass(&mut self, x: &[i32], color: usize, value: f64) {
        self.piles.entry(pack(x, color)).or_default().add(value);
    }

    pub fn mass(&self, x: &[i32], color: usize) -> f64 {
        self.piles
            .get(&pack(x, color))
            .map(|p| p.mass)
            .unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        let mut sum = 0.0;
        let mut comp = 0.0;
        for p in self.piles.values() {
            let y = p.mass - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        sum
    }

    pub fn site_count(&self) -> usize {
        self.piles.len()
    }

    /// `(point, color, mass)` triples in deterministic order.
    pub fn sorted_entries(&self) -> Vec<(Vec<i32>, usize, f64)> {
        let mut out: Vec<_> = self
            .piles
            .iter()
            .filter(|(_, p)| p.mass != 0.0)
            .map(|(&k, p)| {
                let (x, c) = unpack(k, self.d);
                (x, c, p.mass)
            })
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
        out
    }

    pub fn as_field(&self) -> Field {
        let mut f = Field::new(self.d);
        for (&k, p) in &self.piles {
            if p.mass != 0.0 {
                f.map.insert(k, p.mass);
            }
        }
        f
    }
}

/// Emitted mass per site, stored as bulk-toppling counts so that the
/// emitted total is an exact multiple of the site threshold.
#[derive(Debug, Clone)]
pub struct Odometer {
    pub d: usize,
    pub p: usize,
    counts: HashMap<u128, f64>,
    thresholds: Vec<f64>,
}

impl Odometer {
    fn new(spec: &ModelSpec) -> Self {
        Odometer {
            d: spec.d,
            p: spec.p,
            counts: HashMap::new(),
            thresholds: (0..spec.p).map(|c| spec.threshold(c)).collect(),
        }
    }

    pub fn topples(&self, x: &[i32], color: usize) -> f64 {
        self.counts.get(&pack(x, color)).copied().unwrap_or(0.0)
    }

    /// Total mass emitted from the site, `topples * M_color`.
    pub fn emitted(&self, x: &[i32], color: usize) -> f64 {
        self.topples(x, color) * self.thresholds[color]
    }

    pub fn support_len(&self) -> usize {
        self.counts.values().filter(|&&c| c > 0.0).count()
    }

    pub fn as_field(&self) -> Field {
        let mut f = Field::new(self.d);
        for (&k, &c) in &self.counts {
            if c > 0.0 {
                let (_, color) = unpack(k, self.d);
                f.map.insert(k, c * self.thresholds[color]);
            }
        }
        f
    }

    pub fn sorted_entries(&self) -> Vec<(Vec<i32>, usize, f64)> {
        self.as_field().sorted_entries()
    }
}

/// Stabilizes a configuration, returning the final state and the odometer.
///
/// The result does not depend on `order_seed` (the toppling order is
/// irrelevant to the stable state); the seed only shuffles queue insertion
/// so that determinism can be tested rather than assumed.
pub fn stabilize(
    spec: &ModelSpec,
    initial: &SandpileState,
    order_seed: u64,
) -> Result<(SandpileState, Odometer)> {
    let initial_total = initial.total_mass();
    let cap = toppling_cap(spec, initial_total);
    stabilize_with_cap(spec, initial, order_seed, cap)
}

/// Default guard: ten times the a-priori bound on the number of single
/// topplings when every color leaks, otherwise a generous fallback.
fn toppling_cap(spec: &ModelSpec, initial_total: f64) -> u64 {
    let min_leak = spec
        .leakiness
        .iter()
        .enumerate()
        .map(|(i, &m)| (m - 1.0) * spec.row_sum(i))
        .fold(f64::INFINITY, f64::min);
    if min_leak > 0.0 {
        let bound = 10.0 * initial_total / min_leak;
        bound.min(1e18) as u64 + 1_000
    } else {
        100_000_000
    }
}

pub fn stabilize_with_cap(
    spec: &ModelSpec,
    initial: &SandpileState,
    order_seed: u64,
    cap: u64,
) -> Result<(SandpileState, Odometer)> {
    if initial.d != spec.d || initial.p != spec.p {
        return Err(Error::Validation(
            "initial configuration does not match the model dimensions".into(),
        ));
    }
    let mut state = initial.clone();
    state.topple_events = 0;
    let mut odo = Odometer::new(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(order_seed);

    let thresholds: Vec<f64> = (0..spec.p).map(|c| spec.threshold(c)).collect();
    let row_sums: Vec<f64> = (0..spec.p).map(|c| spec.row_sum(c)).collect();
    let by_from: Vec<Vec<&crate::model::ToppleEntry>> = (0..spec.p)
        .map(|c| spec.entries.iter().filter(|e| e.from == c).collect())
        .collect();

    let mut queue: VecDeque<u128> = VecDeque::new();
    let mut queued: HashSet<u128> = HashSet::new();
    let mut seeds: Vec<u128> = state
        .piles
        .iter()
        .filter(|(&k, p)| {
            let (_, c) = unpack(k, spec.d);
            p.mass > thresholds[c]
        })
        .map(|(&k, _)| k)
        .collect();
    seeds.sort_unstable();
    seeds.shuffle(&mut rng);
    for k in seeds {
        queued.insert(k);
        queue.push_back(k);
    }

    let mut leaked = 0.0f64;
    let mut leaked_comp = 0.0f64;
    let mut receivers: Vec<u128> = Vec::new();

    while let Some(key) = queue.pop_front() {
        queued.remove(&key);
        let (x, color) = unpack(key, spec.d);
        let mass = state.piles.get(&key).map(|p| p.mass).unwrap_or(0.0);
        let threshold = thresholds[color];
        let k = topple_count(mass, threshold);
        if k == 0.0 {
            continue;
        }
        state.topple_events += 1;
        if state.topple_events > cap {
            return Err(Error::Numerical(format!(
                "toppling guard tripped after {} bulk events (cap {cap}); \
                 the configuration may not stabilize",
                state.topple_events
            )));
        }
        let removed = k * threshold;
        state.piles.get_mut(&key).unwrap().add(-removed);
        *odo.counts.entry(key).or_insert(0.0) += k;

        // Leak: k single topplings each lose (m-1) * row_sum.
        let leak = k * (threshold - row_sums[color]);
        let y = leak - leaked_comp;
        let t = leaked + y;
        leaked_comp = (t - leaked) - y;
        leaked = t;

        receivers.clear();
        for e in &by_from[color] {
            let target: Vec<i32> = x.iter().zip(&e.offset).map(|(a, b)| a + b).collect();
            let tk = pack(&target, e.to);
            state.piles.entry(tk).or_default().add(k * e.weight);
            receivers.push(tk);
        }
        receivers.shuffle(&mut rng);
        for &tk in &receivers {
            let (_, tc) = unpack(tk, spec.d);
            if state.piles[&tk].mass > thresholds[tc] && !queued.contains(&tk) {
                queued.insert(tk);
                queue.push_back(tk);
            }
        }
        // The toppled site keeps at most one threshold of residue, but float
        // cancellation can leave it marginally above; requeue if needed.
        if state.piles[&key].mass > threshold && !queued.contains(&key) {
            queued.insert(key);
            queue.push_back(key);
        }
    }

    state.leaked_total = initial.leaked_total + leaked;
    Ok((state, odo))
}

/// Is every site at or below its threshold (within absolute slack)?
pub fn is_stable(spec: &ModelSpec, state: &SandpileState) -> bool {
    state.piles.iter().all(|(&k, p)| {
        let (_, c) = unpack(k, spec.d);
        p.mass <= spec.threshold(c) + 1e-9
    })
}

/// The visited region: sites with positive odometer, plus the projection
/// of the per-color shape onto the lattice.
#[derive(Debug, Clone)]
pub struct Shape {
    pub d: usize,
    /// Sites `(x, color)` that emitted mass, sorted.
    pub sites: Vec<(Vec<i32>, usize)>,
    /// Color-union projection to `Z^d`, sorted and deduplicated.
    pub union: Vec<Vec<i32>>,
}

pub fn shape(odo: &Odometer) -> Shape {
    let mut sites: Vec<(Vec<i32>, usize)> = odo
        .counts
        .iter()
        .filter(|(_, &c)| c > 0.0)
        .map(|(&k, _)| {
            let (x, c) = unpack(k, odo.d);
            (x, c)
        })
        .collect();
    sites.sort();
    let mut union: Vec<Vec<i32>> = sites.iter().map(|(x, _)| x.clone()).collect();
    union.sort();
    union.dedup();
    Shape {
        d: odo.d,
        sites,
        union,
    }
}

/// The shape together with every site that received sand from it. The
/// receive-only fringe sits within one kernel radius of the strict shape.
pub fn receive_closure(spec: &ModelSpec, odo: &Odometer) -> Shape {
    let strict = shape(odo);
    let mut sites: HashSet<(Vec<i32>, usize)> = strict.sites.iter().cloned().collect();
    for (x, color) in &strict.sites {
        for e in spec.entries.iter().filter(|e| e.from == *color) {
            let target: Vec<i32> = x.iter().zip(&e.offset).map(|(a, b)| a + b).collect();
            sites.insert((target, e.to));
        }
    }
    let mut sites: Vec<_> = sites.into_iter().collect();
    sites.sort();
    let mut union: Vec<Vec<i32>> = sites.iter().map(|(x, _)| x.clone()).collect();
    union.sort();
    union.dedup();
    Shape {
        d: odo.d,
        sites,
        union,
    }
}

/// The massive-Laplacian action on a finitely supported field:
/// `(Tv)(x,i) = sum_{(y,j)} P((y,j) -> (x,i)) v(y,j) - v(x,i)`.
pub fn apply_t(spec: &ModelSpec, field: &Field) -> Field {
    let mut out = Field::new(spec.d);
    for (&key, &value) in &field.map {
        let (y, j) = unpack(key, spec.d);
        if value == 0.0 {
            continue;
        }
        for e in spec.entries.iter().filter(|e| e.from == j) {
            let prob = e.weight / (spec.leakiness[j] * spec.row_sum(j));
            let x: Vec<i32> = y.iter().zip(&e.offset).map(|(a, b)| a + b).collect();
            out.add(&x, e.to, prob * value);
        }
        out.add(&y, j, -value);
    }
    out
}

/// Inner and outer radii of a point set inside the cone of half-angle
/// `tol_angle` around each direction. `None` marks an empty cone.
///
/// `outer` is the farthest point in the cone; `inner` is the largest radius
/// within which the cone contains no missing lattice point.
pub fn radial_extents(
    sites: &[Vec<i32>],
    directions: &[Vec<f64>],
    tol_angle: f64,
) -> Vec<Option<(f64, f64)>> {
    let set: HashSet<&[i32]> = sites.iter().map(|v| v.as_slice()).collect();
    let d = directions.first().map(|u| u.len()).unwrap_or(0);
    let cos_tol = tol_angle.cos();
    directions
        .iter()
        .map(|u| {
            let mut outer: Option<f64> = None;
            for x in sites {
                let r = norm_i32(x);
                if r == 0.0 {
                    outer = Some(outer.unwrap_or(0.0).max(0.0));
                    continue;
                }
                let xf: Vec<f64> = x.iter().map(|&c| c as f64).collect();
                if dot(&xf, u) / r >= cos_tol {
                    outer = Some(outer.unwrap_or(0.0).max(r));
                }
            }
            let outer = outer?;
            // March outward; the inner radius is the first radius at which a
            // cone lattice point is missing from the set.
            let mut inner = outer;
            let max_r = outer.ceil() as i64 + 1;
            let mut coords = vec![0i64; d];
            let mut missing_at = f64::INFINITY;
            enumerate_box(&mut coords, 0, max_r, &mut |pt: &[i64]| {
                let r2: f64 = pt.iter().map(|&c| (c * c) as f64).sum();
                if r2 == 0.0 {
                    return;
                }
                let r = r2.sqrt();
                if r > outer {
                    return;
                }
                let pf: Vec<f64> = pt.iter().map(|&c| c as f64).collect();
                if dot(&pf, u) / r < cos_tol {
                    return;
                }
                let pi: Vec<i32> = pt.iter().map(|&c| c as i32).collect();
                if !set.contains(pi.as_slice()) {
                    missing_at = missing_at.min(r);
                }
            });
            if missing_at.is_finite() {
                inner = inner.min(missing_at - 1e-9);
            }
            Some((inner.max(0.0), outer))
        })
        .collect()
}

fn enumerate_box(coords: &mut Vec<i64>, axis: usize, max_r: i64, f: &mut impl FnMut(&[i64])) {
    if axis == coords.len() {
        f(coords);
        return;
    }
    for c in -max_r..=max_r {
        coords[axis] = c;
        enumerate_box(coords, axis + 1, max_r, f);
    }
}
