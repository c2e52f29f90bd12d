//! Occupation-measure (Green function) tables of the killed walk, the
//! threshold constants, and the per-direction radii they induce.
//!
//! `G((0,i0),(x,j))` is accumulated as `sum_n q_n` where `q_0` is a point
//! mass and `q_{n+1} = q_n * mu` is a sparse lattice convolution with color
//! mixing. The box only truncates storage; the dynamics run on the full
//! support, so values inside the box are exact up to the recorded tail.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::lattice::{norm, pack, unpack};
use crate::model::{JumpKernel, ModelSpec};

/// Truncated-box table of `G((source, i0), (x, j))`.
#[derive(Debug, Clone)]
pub struct GreenTable {
    pub d: usize,
    pub p: usize,
    pub source_color: usize,
    pub source: Vec<i32>,
    pub box_r: i32,
    pub eps_stop: f64,
    /// Unaccumulated surviving mass at truncation; bounds the per-site error.
    pub tail_bound: f64,
    /// Convolution steps taken.
    pub steps: usize,
    values: Vec<f64>,
}

impl GreenTable {
    fn index(&self, x: &[i32], color: usize) -> Option<usize> {
        let side = (2 * self.box_r + 1) as usize;
        let mut idx = color;
        for (c, s) in x.iter().zip(&self.source) {
            let rel = c - s;
            if rel.abs() > self.box_r {
                return None;
            }
            idx = idx * side + (rel + self.box_r) as usize;
        }
        Some(idx)
    }

    /// Table value; zero outside the stored box.
    pub fn get(&self, x: &[i32], color: usize) -> f64 {
        match self.index(x, color) {
            Some(i) => self.values[i],
            None => 0.0,
        }
    }

    pub fn contains(&self, x: &[i32]) -> bool {
        x.iter()
            .zip(&self.source)
            .all(|(c, s)| (c - s).abs() <= self.box_r)
    }

    /// Sum of all stored values targeting `color`.
    pub fn column_sum(&self, color: usize) -> f64 {
        let mut acc = 0.0;
        self.for_each(|_, c, v| {
            if c == color {
                acc += v;
            }
        });
        acc
    }

    /// Visits every stored `(x, color, value)` with nonzero value.
    pub fn for_each(&self, mut f: impl FnMut(&[i32], usize, f64)) {
        let side = (2 * self.box_r + 1) as usize;
        let cells = side.pow(self.d as u32);
        let mut x = vec![0i32; self.d];
        for color in 0..self.p {
            for cell in 0..cells {
                let v = self.values[color * cells + cell];
                if v == 0.0 {
                    continue;
                }
                let mut rem = cell;
                for k in (0..self.d).rev() {
                    x[k] = (rem % side) as i32 - self.box_r + self.source[k];
                    rem /= side;
                }
                f(&x, color, v);
            }
        }
    }

    /// Entries in deterministic order, for dumps.
    pub fn sorted_entries(&self) -> Vec<(Vec<i32>, usize, f64)> {
        let mut out = Vec::new();
        self.for_each(|x, c, v| out.push((x.to_vec(), c, v)));
        out.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
        out
    }
}

const STEP_CAP: usize = 200_000;
const MEMORY_GUARD_BYTES: usize = 2 << 30;

/// Builds the Green table from `(source=0, i0)`.
pub fn green_table(
    kernel: &JumpKernel,
    source_color: usize,
    box_r: i32,
    eps_stop: f64,
) -> Result<GreenTable> {
    green_table_from(kernel, &vec![0; kernel.d], source_color, box_r, eps_stop)
}

/// Same, with an arbitrary source point (translation invariance makes this
/// a shifted copy; exposed so the invariance is testable).
pub fn green_table_from(
    kernel: &JumpKernel,
    source: &[i32],
    source_color: usize,
    box_r: i32,
    eps_stop: f64,
) -> Result<GreenTable> {
    if eps_stop <= 0.0 {
        return Err(Error::Validation("eps_stop must be positive".into()));
    }
    if source_color >= kernel.p {
        return Err(Error::Validation("source color out of range".into()));
    }
    let side = (2 * box_r + 1) as usize;
    let cells = side
        .checked_pow(kernel.d as u32)
        .and_then(|c| c.checked_mul(kernel.p))
        .ok_or_else(|| Error::Numerical("green box size overflows".into()))?;
    if cells * 8 > MEMORY_GUARD_BYTES {
        return Err(Error::Numerical(format!(
            "green box of {cells} cells exceeds the memory guard"
        )));
    }

    let mut table = GreenTable {
        d: kernel.d,
        p: kernel.p,
        source_color,
        source: source.to_vec(),
        box_r,
        eps_stop,
        tail_bound: 0.0,
        steps: 0,
        values: vec![0.0; cells],
    };

    let mut q: HashMap<u128, f64> = HashMap::new();
    q.insert(pack(source, source_color), 1.0);
    let mut mass = 1.0f64;
    let mut masses = vec![mass];

    loop {
        // Accumulate the current occupation layer into the box.
        for (&key, &v) in &q {
            let (x, c) = unpack(key, kernel.d);
            if let Some(idx) = table.index(&x, c) {
                table.values[idx] += v;
            }
        }
        if mass < eps_stop {
            break;
        }
        if table.steps >= STEP_CAP {
            return Err(Error::Numerical(
                "green accumulation did not decay below eps_stop (is any color leaky?)".into(),
            ));
        }
        let mut next: HashMap<u128, f64> = HashMap::with_capacity(q.len() * 2);
        for (&key, &v) in &q {
            let (x, c) = unpack(key, kernel.d);
            for e in kernel.entries_from(c) {
                let y: Vec<i32> = x.iter().zip(&e.offset).map(|(a, b)| a + b).collect();
                *next.entry(pack(&y, e.to)).or_insert(0.0) += v * e.prob;
            }
        }
        q = next;
        mass = q.values().sum();
        masses.push(mass);
        table.steps += 1;
    }

    // Remaining Green mass after truncation: geometric tail. The one-step
    // survival bound is sound when every color leaks; otherwise fall back to
    // the observed trailing decay ratio.
    let sigma = kernel.max_survival();
    let ratio = if sigma < 1.0 - 1e-12 {
        sigma
    } else {
        let k = masses.len().min(11) - 1;
        if k == 0 {
            return Err(Error::Numerical("no decay observed".into()));
        }
        let r = (masses[masses.len() - 1] / masses[masses.len() - 1 - k]).powf(1.0 / k as f64);
        if r >= 1.0 - 1e-9 {
            return Err(Error::Numerical(
                "surviving mass is not decaying; the walk appears unkilled".into(),
            ));
        }
        r
    };
    table.tail_bound = mass * ratio / (1.0 - ratio);
    Ok(table)
}

/// Continuous extension of the table by inverse-tent weights in the
/// sup-norm: the value at real `x` averages the lattice values at the
/// surrounding cell corners with weights `1 - ||x - y||_inf`.
pub fn green_interp(table: &GreenTable, x: &[f64], color: usize) -> Result<f64> {
    if x.len() != table.d || color >= table.p {
        return Err(Error::Validation("interpolation query shape mismatch".into()));
    }
    let inside = x
        .iter()
        .zip(&table.source)
        .all(|(&c, &s)| (c - s as f64).abs() <= (table.box_r - 1) as f64);
    if !inside {
        return Err(Error::OutOfRange(
            "interpolation point outside the certified box".into(),
        ));
    }
    let mut corners: Vec<Vec<i32>> = vec![Vec::new()];
    for &c in x {
        let lo = c.floor() as i32;
        let next: Vec<i32> = if (c - lo as f64).abs() < 1e-12 {
            vec![lo]
        } else {
            vec![lo, lo + 1]
        };
        let mut grown = Vec::with_capacity(corners.len() * next.len());
        for base in &corners {
            for &n in &next {
                let mut b = base.clone();
                b.push(n);
                grown.push(b);
            }
        }
        corners = grown;
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for y in &corners {
        let dist = x
            .iter()
            .zip(y)
            .map(|(&a, &b)| (a - b as f64).abs())
            .fold(0.0f64, f64::max);
        let w = (1.0 - dist).max(0.0);
        num += w * table.get(y, color);
        den += w;
    }
    Ok(num / den)
}

/// The sandwich constants of the shape theorem, computed (not asserted):
/// `beta = min_i M_i` and `alpha = (max_i M_i) * max_i sum_j sum_z G((0,j),(z,i))`.
/// Needs one table per source color.
pub fn threshold_constants(spec: &ModelSpec, tables: &[GreenTable]) -> Result<(f64, f64)> {
    if tables.len() != spec.p {
        return Err(Error::Validation(format!(
            "need one green table per source color ({} given, {} colors)",
            tables.len(),
            spec.p
        )));
    }
    for (j, t) in tables.iter().enumerate() {
        if t.source_color != j {
            return Err(Error::Validation(
                "tables must be ordered by source color".into(),
            ));
        }
    }
    let beta = spec.min_threshold();
    let mut worst_column = 0.0f64;
    for target in 0..spec.p {
        let mut sum = 0.0;
        for table in tables {
            sum += table.column_sum(target);
        }
        worst_column = worst_column.max(sum);
    }
    let total_tail: f64 = tables.iter().map(|t| t.tail_bound).sum();
    if total_tail > 0.01 * worst_column {
        return Err(Error::Numerical(format!(
            "green tail {total_tail:.3e} too large to certify alpha within 1%; enlarge the box or lower eps_stop"
        )));
    }
    let alpha = spec.max_threshold() * (worst_column + total_tail);
    Ok((alpha, beta))
}

const SCAN_STEP: f64 = 0.25;

/// Sandwich radii in direction `u` for `n_grains` grains:
/// `r = inf { r > 0 : g_u(r) <= alpha/N }` and
/// `R = sup { r > 0 : g_u(r) >= beta/N }`
/// on the interpolated direction profile of the table.
pub fn radii(
    table: &GreenTable,
    u: &[f64],
    n_grains: f64,
    alpha: f64,
    beta: f64,
    color: usize,
) -> Result<(f64, f64)> {
    let u_norm = norm(u);
    if !(u_norm > 0.0) {
        return Err(Error::Validation("direction must be nonzero".into()));
    }
    let u: Vec<f64> = u.iter().map(|c| c / u_norm).collect();
    let lo_threshold = beta / n_grains;
    let hi_threshold = alpha / n_grains;
    if lo_threshold <= 10.0 * table.tail_bound {
        return Err(Error::OutOfRange(format!(
            "threshold beta/N = {lo_threshold:.3e} is below the table noise floor {:.3e}",
            table.tail_bound
        )));
    }
    let max_comp = u.iter().map(|c| c.abs()).fold(0.0f64, f64::max);
    let r_max = (table.box_r - 1) as f64 / max_comp;
    let g = |r: f64| -> Result<f64> {
        let x: Vec<f64> = u
            .iter()
            .zip(&table.source)
            .map(|(&c, &s)| s as f64 + r * c)
            .collect();
        green_interp(table, &x, color)
    };
    let g0 = g(0.0)?;
    if g0 > hi_threshold {
        // Confirm the upper threshold is measurable before the noise floor.
        let far = g(r_max)?;
        if far > hi_threshold {
            return Err(Error::OutOfRange(
                "alpha/N not reached inside the box; enlarge the box".into(),
            ));
        }
    }

    // inf { r : g <= hi }: first crossing scanning outward.
    let r_inner = if g0 <= hi_threshold {
        0.0
    } else {
        let mut prev = 0.0f64;
        let mut found = None;
        let mut r = SCAN_STEP;
        while r <= r_max + 1e-9 {
            let rr = r.min(r_max);
            if g(rr)? <= hi_threshold {
                found = Some((prev, rr));
                break;
            }
            prev = rr;
            r += SCAN_STEP;
        }
        let (mut lo, mut hi) = found.ok_or_else(|| {
            Error::OutOfRange("alpha/N not reached inside the box".into())
        })?;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if g(mid)? <= hi_threshold {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < 1e-6 {
                break;
            }
        }
        hi
    };

    // sup { r : g >= lo }: last qualifying point scanning inward.
    let r_outer = if g0 < lo_threshold {
        0.0
    } else {
        let mut r = r_max;
        let mut found = None;
        while r >= -1e-9 {
            let rr = r.max(0.0);
            if g(rr)? >= lo_threshold {
                found = Some(rr);
                break;
            }
            r -= SCAN_STEP;
        }
        match found {
            None => 0.0,
            Some(r_hit) if (r_hit - r_max).abs() < 1e-12 => {
                return Err(Error::OutOfRange(
                    "beta/N still exceeded at the box edge; enlarge the box".into(),
                ));
            }
            Some(r_hit) => {
                let mut lo = r_hit;
                let mut hi = (r_hit + SCAN_STEP).min(r_max);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if g(mid)? >= lo_threshold {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-6 {
                        break;
                    }
                }
                lo
            }
        }
    };

    Ok((r_inner, r_outer.max(r_inner)))
}

/// Box radius that keeps the `beta/N` level certifiably inside the table:
/// `ceil(log(N/beta)/gamma_min) + margin`.
pub fn suggested_box_radius(gamma_min: f64, n_max: f64, beta: f64, margin: i32) -> i32 {
    ((n_max / beta).ln() / gamma_min).ceil() as i32 + margin
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{krw_measure, uniform_model, ModelSpec, ToppleEntry};

    fn self_loop_model() -> ModelSpec {
        ModelSpec::new(
            1,
            1,
            vec![2.0],
            vec![ToppleEntry {
                offset: vec![0],
                from: 0,
                to: 0,
                weight: 1.0,
            }],
        )
        .unwrap()
    }

    #[test]
    fn self_loop_geometric_series() {
        let kernel = krw_measure(&self_loop_model());
        let table = green_table(&kernel, 0, 2, 1e-16).unwrap();
        assert!((table.get(&[0], 0) - 2.0).abs() < 1e-12);
        assert_eq!(table.get(&[1], 0), 0.0);
        assert!(table.tail_bound < 1e-15);
    }

    #[test]
    fn finite_speed_support() {
        let kernel = krw_measure(&uniform_model(2, 2.0));
        let table = green_table(&kernel, 0, 30, 1e-12).unwrap();
        let reach = table.steps as i32;
        assert_eq!(table.get(&[reach.min(30), 0], 0).max(0.0) >= 0.0, true);
        // Outside the reachable cone everything is exactly zero.
        if reach < 28 {
            assert_eq!(table.get(&[reach + 1, 0], 0), 0.0);
        }
    }

    #[test]
    fn axis_decay_rate_matches_support_value() {
        // G along an axis decays like e^{-gamma r} r^{-1/2} with
        // gamma = arccosh(3); a straight-line fit of log G over r in [10, 30]
        // must land within 3% of -gamma.
        let kernel = krw_measure(&uniform_model(2, 2.0));
        let table = green_table(&kernel, 0, 34, 1e-30).unwrap();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for r in 10..=30 {
            let v = table.get(&[r, 0], 0);
            assert!(v > 0.0);
            xs.push(r as f64);
            ys.push(v.ln());
        }
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let slope = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (x - mx) * (y - my))
            .sum::<f64>()
            / xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>();
        let gamma = 3.0f64.acosh();
        assert!(
            (slope + gamma).abs() <= 0.03 * gamma,
            "fitted slope {slope}, expected {}",
            -gamma
        );
    }

    #[test]
    fn interp_exact_on_lattice_and_midpoints() {
        let kernel = krw_measure(&uniform_model(2, 2.0));
        let table = green_table(&kernel, 0, 12, 1e-14).unwrap();
        let exact = table.get(&[3, 2], 0);
        assert_eq!(green_interp(&table, &[3.0, 2.0], 0).unwrap(), exact);

        // Midway along an axis: convex combination of the two endpoint values.
        let a = table.get(&[3, 0], 0);
        let b = table.get(&[4, 0], 0);
        let mid = green_interp(&table, &[3.5, 0.0], 0).unwrap();
        assert!(mid >= a.min(b) - 1e-18 && mid <= a.max(b) + 1e-18);

        // Equal neighbors average to themselves.
        let left = table.get(&[0, 1], 0);
        let right = table.get(&[1, 0], 0);
        if (left - right).abs() < 1e-15 {
            let v = green_interp(&table, &[0.5, 0.5], 0).unwrap();
            assert!(v > 0.0);
        }
        assert!(green_interp(&table, &[11.8, 0.0], 0).is_err());
    }

    #[test]
    fn threshold_constants_self_loop() {
        let spec = self_loop_model();
        let kernel = krw_measure(&spec);
        let table = green_table(&kernel, 0, 2, 1e-16).unwrap();
        let (alpha, beta) = threshold_constants(&spec, &[table]).unwrap();
        assert!((beta - 2.0).abs() < 1e-12);
        assert!((alpha - 4.0).abs() < 1e-9);
        assert!(beta <= alpha);
    }

    #[test]
    fn threshold_constants_need_small_tail() {
        let spec = uniform_model(2, 2.0);
        let kernel = krw_measure(&spec);
        let table = green_table(&kernel, 0, 3, 2e-1).unwrap();
        assert!(threshold_constants(&spec, &[table]).is_err());
    }

    #[test]
    fn radii_examples() {
        let spec = uniform_model(2, 2.0);
        let kernel = krw_measure(&spec);
        let table = green_table(&kernel, 0, 40, 1e-20).unwrap();
        let (alpha, beta) = threshold_constants(&spec, &[table.clone()]).unwrap();

        // Nothing escapes the origin when N is below beta / g(0).
        let g0 = table.get(&[0, 0], 0);
        let tiny_n = 0.5 * beta / g0;
        let (_, r_out) = radii(&table, &[1.0, 0.0], tiny_n, alpha, beta, 0).unwrap();
        assert_eq!(r_out, 0.0);

        // Monotone-decay direction: unique crossing, sandwich holds, and the
        // generalized inverses compose back to the thresholds.
        for n in [1e4f64, 1e8, 1e12] {
            let (r_in, r_out) = radii(&table, &[1.0, 0.0], n, alpha, beta, 0).unwrap();
            assert!(r_in <= r_out);
            if r_in > 0.0 {
                let g_at = green_interp(&table, &[r_in, 0.0], 0).unwrap();
                assert!((g_at - alpha / n).abs() <= 1e-4 * (alpha / n));
            }
            if r_out > 0.0 {
                let g_at = green_interp(&table, &[r_out, 0.0], 0).unwrap();
                assert!((g_at - beta / n).abs() <= 1e-4 * (beta / n));
            }
        }

        // Radii track log N / gamma.
        let gamma = 3.0f64.acosh();
        let n = 1e12f64;
        let (r_in, r_out) = radii(&table, &[1.0, 0.0], n, alpha, beta, 0).unwrap();
        for r in [r_in, r_out] {
            assert!((r - n.ln() / gamma).abs() < 0.25 * n.ln() / gamma);
        }
    }

    #[test]
    fn radii_reject_noise_floor() {
        let spec = uniform_model(2, 2.0);
        let kernel = krw_measure(&spec);
        let table = green_table(&kernel, 0, 20, 1e-10).unwrap();
        let err = radii(&table, &[1.0, 0.0], 1e30, 16.0, 8.0, 0).unwrap_err();
        assert!(matches!(err, Error::OutOfRange(_)));
    }

    #[test]
    fn translation_invariance() {
        let kernel = krw_measure(&uniform_model(2, 2.0));
        let a = green_table(&kernel, 0, 10, 1e-14).unwrap();
        let b = green_table_from(&kernel, &[5, -3], 0, 10, 1e-14).unwrap();
        for x in [[0, 0], [2, 1], [-4, 3], [7, 0]] {
            let shifted = [x[0] + 5, x[1] - 3];
            assert!((a.get(&x, 0) - b.get(&shifted, 0)).abs() <= 1e-12);
        }
    }

    #[test]
    fn green_inverse_identity_and_negativity() {
        use crate::lattice::Field;
        use crate::sandpile::apply_t;
        use rand::prelude::*;
        let spec = uniform_model(2, 2.0);
        let kernel = krw_measure(&spec);
        let table = green_table(&kernel, 0, 25, 1e-18).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);

        for _ in 0..5 {
            // Random finite-support v well inside the box.
            let mut v = Field::new(2);
            for _ in 0..6 {
                let x = [rng.gen_range(-3..=3), rng.gen_range(-3..=3)];
                v.add(&x, 0, rng.gen_range(-1.0..1.0));
            }
            // w = G^T v via translation invariance:
            // w(x) = sum_y G((y),(x)) v(y) = sum_y G((0),(x-y)) v(y).
            let mut w = Field::new(2);
            for (y, _, val) in v.sorted_entries() {
                table.for_each(|z, c, g| {
                    let x = [z[0] + y[0], z[1] + y[1]];
                    w.add(&x, c, g * val);
                });
            }
            let tw = apply_t(&spec, &w);
            // T(G^T v) = -v on every site within the safe region.
            let mut worst = 0.0f64;
            for (x, c, tv) in tw.sorted_entries() {
                if x.iter().any(|&coord| coord.abs() > 20) {
                    continue;
                }
                let expect = -v.get(&x, c);
                worst = worst.max((tv - expect).abs());
            }
            assert!(
                worst <= table.tail_bound + 1e-9,
                "green inverse residual {worst}"
            );

            // Non-negative v gives non-negative G^T v.
            let mut vp = Field::new(2);
            vp.add(&[1, 1], 0, 0.7);
            vp.add(&[-2, 0], 0, 0.1);
            let mut wp = Field::new(2);
            for (y, _, val) in vp.sorted_entries() {
                table.for_each(|z, c, g| {
                    let x = [z[0] + y[0], z[1] + y[1]];
                    wp.add(&x, c, g * val);
                });
            }
            for (_, _, value) in wp.sorted_entries() {
                assert!(value >= -1e-15);
            }
        }
    }
}
