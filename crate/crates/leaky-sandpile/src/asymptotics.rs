//! Predicted limiting objects: the limit-shape curve, the large-leakiness
//! polytope, first-passage sets, the vanishing-leak ellipsoid, and the
//! refined radius expansion through the Lambert W function.

use std::collections::HashSet;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Ellipsoid, StarBody};
use crate::lattice::{norm, pack, unpack};
use crate::linalg::Mat;
use crate::model::JumpKernel;
use crate::spectral::{hessian_at, rho_at, support_value};

/// The predicted limit shape sampled over directions: radius `1/h(u)` where
/// `h(u)` is the support value of the spectral sublevel body, together with
/// the decay rates `gamma_u = h(u)`.
#[derive(Debug, Clone)]
pub struct ShapeCurve {
    pub directions: Vec<Vec<f64>>,
    pub radii: Vec<f64>,
    pub gammas: Vec<f64>,
    /// Boundary parameters `t_u`, kept so the curve can be dualized back.
    pub boundary_points: Vec<Vec<f64>>,
}

impl ShapeCurve {
    pub fn as_star_body(&self) -> Result<StarBody> {
        StarBody::new(self.directions.clone(), self.radii.clone())
    }

    /// The level-set boundary `t_u` as a star body carrying its outward
    /// normals (the queried directions), ready for polar dualization.
    pub fn level_set_star(&self) -> Result<StarBody> {
        let mut radii = Vec::with_capacity(self.boundary_points.len());
        let mut dirs = Vec::with_capacity(self.boundary_points.len());
        for t in &self.boundary_points {
            let r = norm(t);
            if !(r > 0.0) {
                return Err(Error::Numerical("level set through the origin".into()));
            }
            radii.push(r);
            dirs.push(t.iter().map(|c| c / r).collect());
        }
        let mut body = StarBody::new(dirs, radii)?;
        body.normals = Some(self.directions.clone());
        Ok(body)
    }
}

/// Samples the limit shape `r(u) = 1 / (Gamma^{-1}(u) . u)`.
pub fn limit_shape(kernel: &JumpKernel, directions: &[Vec<f64>]) -> Result<ShapeCurve> {
    let points = directions
        .par_iter()
        .map(|u| support_value(kernel, u))
        .collect::<Result<Vec<_>>>()?;
    let mut radii = Vec::with_capacity(points.len());
    let mut gammas = Vec::with_capacity(points.len());
    let mut boundary = Vec::with_capacity(points.len());
    for bp in &points {
        gammas.push(bp.h);
        radii.push(1.0 / bp.h);
        boundary.push(bp.t.clone());
    }
    Ok(ShapeCurve {
        directions: directions.to_vec(),
        radii,
        gammas,
        boundary_points: boundary,
    })
}

/// Averaged displacements of color cycles, the vertex generators of the
/// large-leakiness limit polytope.
#[derive(Debug, Clone)]
pub struct CyclePointSet {
    pub points: Vec<Vec<f64>>,
    /// `(cycle length, color sequence)` per point, parallel to `points`.
    pub cycles: Vec<(usize, Vec<usize>)>,
}

/// Enumerates all color cycles `i1 -> ... -> iq -> i1` with `q <= p` over
/// every choice of steps from the supports and averages the displacements.
pub fn cycle_points(kernel: &JumpKernel, cap: usize) -> Result<CyclePointSet> {
    let p = kernel.p;
    let d = kernel.d;
    let mut seen: HashSet<(Vec<i64>, usize)> = HashSet::new();
    let mut points = Vec::new();
    let mut cycles = Vec::new();

    // Depth-first over color paths with concrete displacement sums.
    fn descend(
        kernel: &JumpKernel,
        start: usize,
        current: usize,
        depth: usize,
        max_depth: usize,
        displacement: &mut Vec<i64>,
        colors: &mut Vec<usize>,
        seen: &mut HashSet<(Vec<i64>, usize)>,
        points: &mut Vec<Vec<f64>>,
        cycles: &mut Vec<(usize, Vec<usize>)>,
        cap: usize,
    ) -> Result<()> {
        if depth > 0 && current == start {
            let key = (displacement.clone(), depth);
            if !seen.contains(&key) {
                seen.insert(key);
                if points.len() >= cap {
                    return Err(Error::Numerical(format!(
                        "cycle enumeration exceeded the cap of {cap} points"
                    )));
                }
                points.push(
                    displacement
                        .iter()
                        .map(|&c| c as f64 / depth as f64)
                        .collect(),
                );
                cycles.push((depth, colors.clone()));
            }
        }
        if depth == max_depth {
            return Ok(());
        }
        for e in kernel.entries_from(current) {
            for (k, &o) in e.offset.iter().enumerate() {
                displacement[k] += o as i64;
            }
            colors.push(e.to);
            descend(
                kernel, start, e.to, depth + 1, max_depth, displacement, colors, seen, points,
                cycles, cap,
            )?;
            colors.pop();
            for (k, &o) in e.offset.iter().enumerate() {
                displacement[k] -= o as i64;
            }
        }
        Ok(())
    }

    for start in 0..p {
        let mut displacement = vec![0i64; d];
        let mut colors = vec![start];
        descend(
            kernel,
            start,
            start,
            0,
            p,
            &mut displacement,
            &mut colors,
            &mut seen,
            &mut points,
            &mut cycles,
            cap,
        )?;
    }

    // Deduplicate averaged points across cycle lengths.
    let mut dedup: Vec<(Vec<f64>, (usize, Vec<usize>))> = Vec::new();
    'outer: for (pt, cy) in points.into_iter().zip(cycles) {
        for (existing, _) in &dedup {
            if existing
                .iter()
                .zip(&pt)
                .all(|(a, b)| (a - b).abs() < 1e-12)
            {
                continue 'outer;
            }
        }
        dedup.push((pt, cy));
    }
    let (points, cycles) = dedup.into_iter().unzip();
    Ok(CyclePointSet { points, cycles })
}

/// Sites reachable from `(0, color 1)` in at most `n` kernel steps, plus the
/// spatial projection scaled by `1/n` for polytope comparisons.
#[derive(Debug, Clone)]
pub struct FirstPassage {
    pub n: usize,
    pub sites: Vec<(Vec<i32>, usize)>,
    pub scaled: Vec<Vec<f64>>,
}

pub fn first_passage_set(kernel: &JumpKernel, n: usize) -> Result<FirstPassage> {
    let d = kernel.d;
    let mut frontier: HashSet<u128> = HashSet::new();
    let mut reached: HashSet<u128> = HashSet::new();
    let origin = pack(&vec![0; d], 0);
    frontier.insert(origin);
    reached.insert(origin);
    const GUARD: usize = 20_000_000;
    for _ in 0..n {
        let mut next = HashSet::new();
        for &key in &frontier {
            let (x, c) = unpack(key, d);
            for e in kernel.entries_from(c) {
                let y: Vec<i32> = x.iter().zip(&e.offset).map(|(a, b)| a + b).collect();
                let k = pack(&y, e.to);
                if reached.insert(k) {
                    next.insert(k);
                }
            }
        }
        if reached.len() > GUARD {
            return Err(Error::Numerical(
                "first-passage set exceeded the memory guard".into(),
            ));
        }
        frontier = next;
    }
    let mut sites: Vec<(Vec<i32>, usize)> = reached
        .iter()
        .map(|&k| {
            let (x, c) = unpack(k, d);
            (x, c)
        })
        .collect();
    sites.sort();
    let mut scaled: Vec<Vec<f64>> = sites
        .iter()
        .map(|(x, _)| x.iter().map(|&c| c as f64 / n.max(1) as f64).collect())
        .collect();
    scaled.sort_by(|a, b| a.partial_cmp(b).unwrap());
    scaled.dedup();
    Ok(FirstPassage { n, sites, scaled })
}

/// The vanishing-leak limiting ellipsoid `{ s : 2 s^T sigma^{-1} s <= 1 }`
/// where `sigma` is the Hessian at the origin of the non-killed spectral
/// radius. Requires zero drift.
pub fn zero_leak_ellipsoid(kernel_tilde: &JumpKernel) -> Result<Ellipsoid> {
    let origin = vec![0.0; kernel_tilde.d];
    let point = rho_at(kernel_tilde, &origin)?;
    if (point.rho - 1.0).abs() > 1e-10 {
        return Err(Error::Validation(
            "kernel is killed; the ellipsoid regime needs the non-killed analogue".into(),
        ));
    }
    let drift = norm(&point.grad);
    if drift > 1e-8 {
        return Err(Error::Validation(format!(
            "non-zero drift {:?}; the centered expansion does not apply",
            point.grad
        )));
    }
    let sigma = hessian_at(kernel_tilde, &origin)?;
    let inv = sigma.inverse()?;
    let mut a = Mat::zeros(kernel_tilde.d);
    for i in 0..kernel_tilde.d {
        for j in 0..kernel_tilde.d {
            // Symmetrize against finite-difference noise.
            a[(i, j)] = inv[(i, j)] + inv[(j, i)];
        }
    }
    Ellipsoid::new(a)
}

/// Principal branch of the Lambert W function, `w e^w = y` for `y >= -1/e`.
/// Halley iteration from a logarithmic seed.
pub fn lambert_w(y: f64) -> Result<f64> {
    if !y.is_finite() {
        return Err(Error::Validation("lambert_w of a non-finite value".into()));
    }
    let floor = -(-1.0f64).exp(); // -1/e
    if y < floor - 1e-15 {
        return Err(Error::Validation(format!(
            "lambert_w defined on [-1/e, inf), got {y}"
        )));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let mut w = if y > std::f64::consts::E {
        let l = y.ln();
        l - l.ln()
    } else if y > 0.0 {
        y / (1.0 + y)
    } else {
        // Series seed near the branch point.
        let p = (2.0 * (std::f64::consts::E * y + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0
    };
    for _ in 0..100 {
        let ew = w.exp();
        let f = w * ew - y;
        if f.abs() <= 1e-12 * y.abs().max(1.0) {
            return Ok(w);
        }
        let denom = ew * (w + 1.0) - (w + 2.0) * f / (2.0 * w + 2.0);
        if denom == 0.0 || !denom.is_finite() {
            break;
        }
        w -= f / denom;
        if w < -1.0 {
            w = -1.0 + 1e-12;
        }
    }
    let check = w * w.exp() - y;
    if check.abs() <= 1e-11 * y.abs().max(1.0) {
        Ok(w)
    } else {
        Err(Error::Numerical(format!(
            "lambert_w iteration stalled at residual {check:.3e}"
        )))
    }
}

/// Three-term radius expansion
/// `r = log(N)/gamma - (d-1)/(2 gamma) log log N + c0`,
/// with the constant supplied by the caller (fitted, not derived).
pub fn predicted_radius(gamma_u: f64, d: usize, n_grains: f64, c0: f64) -> Result<f64> {
    if !(gamma_u > 0.0) {
        return Err(Error::Validation("decay rate must be positive".into()));
    }
    if n_grains <= std::f64::consts::E {
        return Err(Error::Validation(
            "N must exceed e for the log log term".into(),
        ));
    }
    let log_n = n_grains.ln();
    Ok(log_n / gamma_u - (d as f64 - 1.0) / (2.0 * gamma_u) * log_n.ln() + c0)
}
