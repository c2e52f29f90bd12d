//! The Laplace-transform matrix of the walk, its Perron root, and the
//! geometry of the level set `{rho = 1}`.
//!
//! For `t` in `R^d` the matrix `L(t)` has entries `sum_x e^{t.x} mu_{i,j}(x)`.
//! Its spectral radius `rho(t)` is log-convex and norm-coercive with
//! `rho(0) < 1`, so the sublevel set `{rho <= 1}` is a compact convex body
//! with `0` in its interior. The outward normal map of its boundary is a
//! homeomorphism onto the sphere; inverting it gives, for each direction
//! `u`, the boundary point `t_u` maximizing `t.u` and the support value
//! `h(u) = t_u . u`, which is the exponential decay rate of the Green
//! function in direction `u` and the reciprocal of the limit-shape radius.

use crate::error::{Error, Result};
use crate::lattice::{dot, norm, normalized};
use crate::linalg::Mat;
use crate::model::{JumpEntry, JumpKernel};

/// `||t||_inf` beyond which `e^{t.x}` may overflow doubles.
pub fn overflow_limit(kernel: &JumpKernel) -> f64 {
    700.0 / kernel.max_offset_norm1().max(1) as f64
}

fn guard_t(kernel: &JumpKernel, t: &[f64]) -> Result<()> {
    if t.len() != kernel.d {
        return Err(Error::Validation(format!(
            "parameter has dimension {}, kernel expects {}",
            t.len(),
            kernel.d
        )));
    }
    let limit = overflow_limit(kernel);
    if t.iter().any(|&c| !c.is_finite() || c.abs() > limit) {
        return Err(Error::Numerical(format!(
            "|t|_inf exceeds overflow guard {limit:.3}"
        )));
    }
    Ok(())
}

/// Entrywise Laplace transform `L(t)_{i,j} = sum_x e^{t.x} mu_{i,j}(x)`.
pub fn laplace_matrix(kernel: &JumpKernel, t: &[f64]) -> Result<Mat> {
    guard_t(kernel, t)?;
    let mut m = Mat::zeros(kernel.p);
    for e in &kernel.entries {
        let arg: f64 = e.offset.iter().zip(t).map(|(&x, &tc)| x as f64 * tc).sum();
        m[(e.from, e.to)] += arg.exp() * e.prob;
    }
    Ok(m)
}

/// `d/dt_k` of the Laplace matrix: entries `sum_x x_k e^{t.x} mu_{i,j}(x)`.
fn laplace_matrix_deriv(kernel: &JumpKernel, t: &[f64], k: usize) -> Mat {
    let mut m = Mat::zeros(kernel.p);
    for e in &kernel.entries {
        let arg: f64 = e.offset.iter().zip(t).map(|(&x, &tc)| x as f64 * tc).sum();
        m[(e.from, e.to)] += e.offset[k] as f64 * arg.exp() * e.prob;
    }
    m
}

#[derive(Debug, Clone)]
pub struct PerronPair {
    pub rho: f64,
    /// Right eigenvector, positive, normalized to unit 1-norm.
    pub right: Vec<f64>,
    /// Left eigenvector, positive, normalized to unit 1-norm.
    pub left: Vec<f64>,
}

const POWER_TOL: f64 = 1e-13;
const POWER_CAP: usize = 100_000;

/// Perron root and positive eigenvectors of a non-negative primitive matrix.
///
/// Power iteration runs on `A + I`: the shift leaves the Perron pair intact
/// while separating it from any eigenvalue of equal modulus, so bipartite
/// color graphs converge too.
pub fn spectral_radius(matrix: &Mat) -> Result<PerronPair> {
    let right = power_iteration(matrix, false)?;
    let left = power_iteration(matrix, true)?;
    let rho = 0.5 * (right.0 + left.0);
    Ok(PerronPair {
        rho,
        right: right.1,
        left: left.1,
    })
}

fn power_iteration(matrix: &Mat, transpose: bool) -> Result<(f64, Vec<f64>)> {
    let n = matrix.n;
    let m = if transpose {
        matrix.transpose()
    } else {
        matrix.clone()
    };
    if m.a.iter().any(|&v| v < 0.0) {
        return Err(Error::Validation("matrix has negative entries".into()));
    }
    let mut v = vec![1.0 / n as f64; n];
    let mut lambda = 0.0;
    for _ in 0..POWER_CAP {
        let mut w = m.mul_vec(&v);
        for (wi, vi) in w.iter_mut().zip(&v) {
            *wi += vi; // the +I shift
        }
        let s: f64 = w.iter().sum();
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Numerical(
                "power iteration produced a non-positive iterate".into(),
            ));
        }
        for wi in w.iter_mut() {
            *wi /= s;
        }
        // Rayleigh quotient of the shifted matrix with respect to w.
        let mw = m.mul_vec(&w);
        let num: f64 = w.iter().zip(&mw).map(|(a, b)| a * (b + a)).sum();
        let den: f64 = w.iter().map(|a| a * a).sum();
        let next = num / den;
        let residual = mw
            .iter()
            .zip(&w)
            .map(|(a, b)| (a + b - next * b).abs())
            .fold(0.0f64, f64::max);
        v = w;
        if residual <= POWER_TOL * next.max(1.0) {
            return Ok((next - 1.0, v));
        }
        lambda = next;
    }
    Err(Error::Numerical(format!(
        "Perron iteration did not converge (last estimate {lambda}); input may not be primitive"
    )))
}

/// The spectral radius at `t` with eigenvectors and exact gradient.
#[derive(Debug, Clone)]
pub struct SpectralPoint {
    pub t: Vec<f64>,
    pub rho: f64,
    pub right: Vec<f64>,
    pub left: Vec<f64>,
    /// `grad rho(t)`, via eigenvalue perturbation:
    /// `d rho/d t_k = psi^T (dL/dt_k) phi / (psi^T phi)`.
    pub grad: Vec<f64>,
}

pub fn rho_at(kernel: &JumpKernel, t: &[f64]) -> Result<SpectralPoint> {
    let l = laplace_matrix(kernel, t)?;
    let pair = spectral_radius(&l)?;
    let denom = dot(&pair.left, &pair.right);
    let mut grad = Vec::with_capacity(kernel.d);
    for k in 0..kernel.d {
        let dl = laplace_matrix_deriv(kernel, t, k);
        let num = dot(&pair.left, &dl.mul_vec(&pair.right));
        grad.push(num / denom);
    }
    Ok(SpectralPoint {
        t: t.to_vec(),
        rho: pair.rho,
        right: pair.right,
        left: pair.left,
        grad,
    })
}

pub fn rho_value(kernel: &JumpKernel, t: &[f64]) -> Result<f64> {
    Ok(spectral_radius(&laplace_matrix(kernel, t)?)?.rho)
}

const BOUNDARY_TOL: f64 = 1e-10;

/// Radius `r* > 0` with `rho(r* v) = 1` along the unit vector `v`.
///
/// Doubles a bracket until the level is crossed, bisects, then polishes with
/// Newton steps along the ray using the directional derivative.
pub fn boundary_ray(kernel: &JumpKernel, v: &[f64]) -> Result<f64> {
    let v = normalized(v);
    let rho0 = rho_value(kernel, &vec![0.0; kernel.d])?;
    if rho0 >= 1.0 {
        return Err(Error::Validation(format!(
            "rho(0) = {rho0} >= 1; the walk is not killed"
        )));
    }
    let limit = overflow_limit(kernel);
    let at = |r: f64| -> Result<f64> {
        let t: Vec<f64> = v.iter().map(|c| c * r).collect();
        rho_value(kernel, &t)
    };
    let mut hi = 1.0f64.min(limit * 0.5);
    let mut lo = 0.0;
    let mut iters = 0;
    while at(hi)? < 1.0 {
        lo = hi;
        hi *= 2.0;
        iters += 1;
        if hi > limit || iters > 60 {
            return Err(Error::Numerical(
                "no level crossing found inside the overflow guard".into(),
            ));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if at(mid)? < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-9 * (1.0 + hi) {
            break;
        }
    }
    // Newton polish on r -> rho(rv) - 1.
    let mut r = 0.5 * (lo + hi);
    for _ in 0..60 {
        let t: Vec<f64> = v.iter().map(|c| c * r).collect();
        let point = rho_at(kernel, &t)?;
        let f = point.rho - 1.0;
        if f.abs() <= BOUNDARY_TOL {
            return Ok(r);
        }
        let df = dot(&point.grad, &v);
        if df <= 0.0 {
            break;
        }
        r -= f / df;
    }
    let t: Vec<f64> = v.iter().map(|c| c * r).collect();
    if (rho_value(kernel, &t)? - 1.0).abs() <= BOUNDARY_TOL {
        Ok(r)
    } else {
        Err(Error::Numerical("boundary polish did not converge".into()))
    }
}

/// A boundary point of `{rho = 1}` realizing the support value in
/// direction `u`.
#[derive(Debug, Clone)]
pub struct BoundaryPoint {
    pub u: Vec<f64>,
    pub t: Vec<f64>,
    /// `h(u) = t . u`, the support value (decay rate `gamma_u`).
    pub h: f64,
    /// `min_lambda ||grad rho(t) - lambda u||`, the stationarity residual.
    pub kkt_residual: f64,
}

const KKT_TOL: f64 = 1e-8;

/// Maximizes `t . u` over the convex body `{rho(t) <= 1}`.
///
/// Starts from the boundary ray in direction `u` and ascends along the
/// boundary: step along the tangential component of `u`, re-project onto the
/// level set by a one-dimensional Newton search along the gradient, and stop
/// once the gradient is parallel to `u`. A final Newton solve on the
/// stationarity system sharpens the point to the requested residual.
pub fn support_value(kernel: &JumpKernel, u: &[f64]) -> Result<BoundaryPoint> {
    let u = normalized(u);
    let d = kernel.d;
    let r0 = boundary_ray(kernel, &u)?;
    let mut t: Vec<f64> = u.iter().map(|c| c * r0).collect();
    let mut point = rho_at(kernel, &t)?;
    let mut step = 0.5 * (1.0 + norm(&t));
    let mut best = residual_of(&point, &u);

    for _ in 0..300 {
        if best.1 <= KKT_TOL * 0.1 {
            break;
        }
        let n_hat = normalized(&point.grad);
        let tangent: Vec<f64> = u
            .iter()
            .zip(&n_hat)
            .map(|(&uc, &nc)| uc - dot(&u, &n_hat) * nc)
            .collect();
        let tnorm = norm(&tangent);
        if tnorm < 1e-16 {
            break;
        }
        let mut advanced = false;
        while step > 1e-14 {
            let trial: Vec<f64> = (0..d).map(|k| t[k] + step * tangent[k] / tnorm).collect();
            match reproject(kernel, &trial) {
                Ok(proj) => {
                    let trial_point = rho_at(kernel, &proj)?;
                    if dot(&proj, &u) > dot(&t, &u) {
                        t = proj;
                        point = trial_point;
                        let res = residual_of(&point, &u);
                        if res.1 < best.1 {
                            best = res;
                        }
                        advanced = true;
                        break;
                    }
                }
                Err(_) => {}
            }
            step *= 0.5;
        }
        if !advanced {
            break;
        }
        step *= 1.5;
    }

    // Newton on F(t, lambda) = (grad rho(t) - lambda u, rho(t) - 1).
    let mut lambda = dot(&point.grad, &u).max(1e-12);
    for _ in 0..40 {
        let res = residual_of(&point, &u);
        if res.1 <= KKT_TOL * 1e-3 && (point.rho - 1.0).abs() <= BOUNDARY_TOL * 1e-2 {
            break;
        }
        let hess = hessian_raw(kernel, &t)?;
        let mut sys = Mat::zeros(d + 1);
        for i in 0..d {
            for j in 0..d {
                sys[(i, j)] = hess[(i, j)];
            }
            sys[(i, d)] = -u[i];
            sys[(d, i)] = point.grad[i];
        }
        let mut rhs = vec![0.0; d + 1];
        for i in 0..d {
            rhs[i] = -(point.grad[i] - lambda * u[i]);
        }
        rhs[d] = -(point.rho - 1.0);
        let delta = match sys.solve(&rhs) {
            Ok(x) => x,
            Err(_) => break,
        };
        let scale = delta[..d]
            .iter()
            .map(|c| c.abs())
            .fold(0.0f64, f64::max)
            .max(delta[d].abs());
        if !scale.is_finite() || scale > 0.5 * (1.0 + norm(&t)) {
            break;
        }
        for k in 0..d {
            t[k] += delta[k];
        }
        lambda += delta[d];
        point = rho_at(kernel, &t)?;
    }

    let t = reproject(kernel, &t)?;
    let point = rho_at(kernel, &t)?;
    let (lambda, kkt) = residual_of(&point, &u);
    if kkt > KKT_TOL || lambda <= 0.0 {
        return Err(Error::Numerical(format!(
            "support maximization stalled: KKT residual {kkt:.3e}"
        )));
    }
    if (point.rho - 1.0).abs() > BOUNDARY_TOL {
        return Err(Error::Numerical(
            "support maximizer left the level set".into(),
        ));
    }
    let h = dot(&t, &u);
    if h <= 0.0 {
        return Err(Error::Numerical("non-positive support value".into()));
    }
    Ok(BoundaryPoint {
        u,
        t,
        h,
        kkt_residual: kkt,
    })
}

/// Best multiplier and residual for `grad rho = lambda u` (unit `u`).
fn residual_of(point: &SpectralPoint, u: &[f64]) -> (f64, f64) {
    let lambda = dot(&point.grad, u);
    let res = point
        .grad
        .iter()
        .zip(u)
        .map(|(g, uc)| (g - lambda * uc) * (g - lambda * uc))
        .sum::<f64>()
        .sqrt();
    (lambda, res)
}

/// Pulls `t` back onto `{rho = 1}` by Newton along the gradient direction.
fn reproject(kernel: &JumpKernel, t: &[f64]) -> Result<Vec<f64>> {
    let mut t = t.to_vec();
    for _ in 0..60 {
        let point = rho_at(kernel, &t)?;
        let f = point.rho - 1.0;
        if f.abs() <= BOUNDARY_TOL {
            return Ok(t);
        }
        let g2 = dot(&point.grad, &point.grad);
        if g2 <= 0.0 {
            return Err(Error::Numerical("vanishing gradient on level set".into()));
        }
        let scale = f / g2;
        for k in 0..t.len() {
            t[k] -= scale * point.grad[k];
        }
    }
    Err(Error::Numerical("level-set projection stalled".into()))
}

/// Doob transform at a boundary parameter: the twisted kernel
/// `(mu_t)_{i,j}(x) = (phi_j / phi_i) e^{t.x} mu_{i,j}(x)`,
/// a genuine (non-killed) jump law.
pub fn doob_kernel(kernel: &JumpKernel, t: &[f64]) -> Result<JumpKernel> {
    let point = rho_at(kernel, t)?;
    if (point.rho - 1.0).abs() > BOUNDARY_TOL {
        return Err(Error::Validation(format!(
            "t is not on the level set: rho(t) = {}",
            point.rho
        )));
    }
    let phi = &point.right;
    let entries: Vec<JumpEntry> = kernel
        .entries
        .iter()
        .map(|e| {
            let arg: f64 = e.offset.iter().zip(t).map(|(&x, &tc)| x as f64 * tc).sum();
            JumpEntry {
                offset: e.offset.clone(),
                from: e.from,
                to: e.to,
                prob: phi[e.to] / phi[e.from] * arg.exp() * e.prob,
            }
        })
        .collect();
    Ok(JumpKernel::from_entries(
        kernel.d,
        kernel.p,
        entries,
        vec![0.0; kernel.p],
    ))
}

fn hessian_raw(kernel: &JumpKernel, t: &[f64]) -> Result<Mat> {
    let d = kernel.d;
    let step = 1e-4 * (1.0 + norm(t));
    let mut h = Mat::zeros(d);
    let shift = |t: &[f64], k: usize, s: f64| -> Vec<f64> {
        let mut out = t.to_vec();
        out[k] += s;
        out
    };
    for i in 0..d {
        for j in i..d {
            let v = if i == j {
                let fp = rho_value(kernel, &shift(t, i, step))?;
                let fm = rho_value(kernel, &shift(t, i, -step))?;
                let f0 = rho_value(kernel, t)?;
                (fp - 2.0 * f0 + fm) / (step * step)
            } else {
                let pp = rho_value(kernel, &shift(&shift(t, i, step), j, step))?;
                let pm = rho_value(kernel, &shift(&shift(t, i, step), j, -step))?;
                let mp = rho_value(kernel, &shift(&shift(t, i, -step), j, step))?;
                let mm = rho_value(kernel, &shift(&shift(t, i, -step), j, -step))?;
                (pp - pm - mp + mm) / (4.0 * step * step)
            };
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    Ok(h)
}

/// Central-difference Hessian of `rho` at `t`, symmetrized.
///
/// Positive-definiteness is verified when `t` sits on the level set or at
/// the origin, where the theory guarantees it.
pub fn hessian_at(kernel: &JumpKernel, t: &[f64]) -> Result<Mat> {
    guard_t(kernel, t)?;
    let h = hessian_raw(kernel, t)?;
    let on_boundary = (rho_value(kernel, t)? - 1.0).abs() <= 1e-8;
    let at_origin = t.iter().all(|&c| c == 0.0);
    if (on_boundary || at_origin) && !h.is_positive_definite() {
        return Err(Error::Numerical(
            "Hessian of rho is not positive definite; check the finite-difference step".into(),
        ));
    }
    Ok(h)
}

/// Support values swept over a direction grid.
#[derive(Debug, Clone)]
pub struct BoundarySample {
    pub points: Vec<BoundaryPoint>,
}

impl BoundarySample {
    pub fn sweep(kernel: &JumpKernel, directions: &[Vec<f64>]) -> Result<BoundarySample> {
        use rayon::prelude::*;
        let points = directions
            .par_iter()
            .map(|u| support_value(kernel, u))
            .collect::<Result<Vec<_>>>()?;
        Ok(BoundarySample { points })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{four_color_example, krw_measure, non_killed_kernel, uniform_model};

    fn fig_kernel() -> JumpKernel {
        krw_measure(&four_color_example())
    }

    fn uniform_kernel(d: usize, m: f64) -> JumpKernel {
        krw_measure(&uniform_model(d, m))
    }

    /// Independent Perron-root oracle: the characteristic polynomial
    /// `det(lambda I - A)` of a primitive non-negative matrix changes sign at
    /// the (simple) Perron root, which is its largest real zero. Bisection
    /// between the min and max row sums brackets it.
    fn perron_oracle(m: &Mat) -> f64 {
        let n = m.n;
        let row_sum = |i: usize| -> f64 { (0..n).map(|j| m[(i, j)]).sum() };
        let mut lo = (0..n).map(row_sum).fold(f64::INFINITY, f64::min);
        let mut hi = (0..n).map(row_sum).fold(0.0f64, f64::max) + 1e-12;
        let char_poly = |lambda: f64| -> f64 {
            let mut a = Mat::zeros(n);
            for i in 0..n {
                for j in 0..n {
                    a[(i, j)] = if i == j { lambda } else { 0.0 } - m[(i, j)];
                }
            }
            a.det()
        };
        if char_poly(lo).abs() < 1e-300 {
            return lo;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if char_poly(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn laplace_at_zero_has_survival_row_sums() {
        let kernel = fig_kernel();
        let l = laplace_matrix(&kernel, &[0.0, 0.0, 0.0]).unwrap();
        let sums: Vec<f64> = (0..4).map(|i| (0..4).map(|j| l[(i, j)]).sum()).collect();
        assert!((sums[0] - 0.75).abs() < 1e-15);
        for c in 1..4 {
            assert!((sums[c] - 0.5).abs() < 1e-15);
        }
        // Row 1 feeds the other colors in place; rows 2..4 feed color 1.
        for j in 1..4 {
            assert!((l[(0, j)] - 0.25).abs() < 1e-15);
            assert!((l[(j, 0)] - 0.5).abs() < 1e-15);
            assert!(l[(j, j)].abs() < 1e-15);
        }
    }

    #[test]
    fn laplace_uniform_closed_form() {
        let kernel = uniform_kernel(2, 2.0);
        for t in [[0.3, -0.7], [1.5, 0.2]] {
            let l = laplace_matrix(&kernel, &t).unwrap();
            let expect = (t[0].cosh() + t[1].cosh()) / 4.0;
            assert!((l[(0, 0)] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn laplace_overflow_guard() {
        let kernel = uniform_kernel(2, 2.0);
        assert!(matches!(
            laplace_matrix(&kernel, &[800.0, 0.0]),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn perron_scaled_identity() {
        let m = Mat::from_rows(&[vec![0.5, 0.0], vec![0.0, 0.5]]);
        let pair = spectral_radius(&m).unwrap();
        assert!((pair.rho - 0.5).abs() < 1e-12);
        assert!((pair.right[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn perron_one_by_one() {
        let m = Mat::from_rows(&[vec![0.37]]);
        assert!((spectral_radius(&m).unwrap().rho - 0.37).abs() < 1e-13);
    }

    #[test]
    fn perron_four_color_at_zero() {
        // Characteristic polynomial of L(0) is lambda^2 (lambda^2 - 3/8):
        // the root is sqrt(3/8), cross-checked by the determinant oracle.
        let l = laplace_matrix(&fig_kernel(), &[0.0; 3]).unwrap();
        let pair = spectral_radius(&l).unwrap();
        let expect = (3.0f64 / 8.0).sqrt();
        assert!((pair.rho - expect).abs() < 1e-12);
        assert!((perron_oracle(&l) - expect).abs() < 1e-10);
        assert!((pair.rho - perron_oracle(&l)).abs() < 1e-10);
    }

    #[test]
    fn perron_matches_oracle_on_random_points() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for kernel in [fig_kernel(), uniform_kernel(2, 2.0), uniform_kernel(3, 1.2)] {
            for _ in 0..20 {
                let t: Vec<f64> = (0..kernel.d).map(|_| rng.gen_range(-1.5..1.5)).collect();
                let l = laplace_matrix(&kernel, &t).unwrap();
                let pair = spectral_radius(&l).unwrap();
                assert!(
                    (pair.rho - perron_oracle(&l)).abs() <= 1e-9 * pair.rho.max(1.0),
                    "power iteration disagrees with char-poly oracle"
                );
                // Eigenvector residuals.
                let lv = l.mul_vec(&pair.right);
                for i in 0..kernel.p {
                    assert!((lv[i] - pair.rho * pair.right[i]).abs() < 1e-10);
                    assert!(pair.right[i] > 0.0 && pair.left[i] > 0.0);
                }
            }
        }
    }

    #[test]
    fn gradient_closed_form_1d() {
        let kernel = uniform_kernel(1, 2.0);
        for t in [-1.0, 0.0, 0.4, 1.2] {
            let point = rho_at(&kernel, &[t]).unwrap();
            assert!((point.rho - t.cosh() / 2.0).abs() < 1e-12);
            assert!((point.grad[0] - t.sinh() / 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn gradient_zero_at_origin_symmetric() {
        let point = rho_at(&uniform_kernel(2, 2.0), &[0.0, 0.0]).unwrap();
        assert!((point.rho - 0.5).abs() < 1e-13);
        assert!(point.grad[0].abs() < 1e-12 && point.grad[1].abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for kernel in [fig_kernel(), uniform_kernel(2, 2.0)] {
            for _ in 0..50 {
                let t: Vec<f64> = (0..kernel.d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let point = rho_at(&kernel, &t).unwrap();
                let step = 1e-5 * (1.0 + norm(&t));
                for k in 0..kernel.d {
                    let mut tp = t.clone();
                    tp[k] += step;
                    let mut tm = t.clone();
                    tm[k] -= step;
                    let fd = (rho_value(&kernel, &tp).unwrap()
                        - rho_value(&kernel, &tm).unwrap())
                        / (2.0 * step);
                    assert!(
                        (point.grad[k] - fd).abs() <= 1e-6 * (1.0 + point.grad[k].abs()),
                        "perturbation gradient {} vs finite difference {fd}",
                        point.grad[k]
                    );
                }
            }
        }
    }

    #[test]
    fn rho_at_origin_below_one() {
        for kernel in [fig_kernel(), uniform_kernel(1, 2.0), uniform_kernel(3, 1.01)] {
            let rho0 = rho_value(&kernel, &vec![0.0; kernel.d]).unwrap();
            assert!(rho0 < 1.0);
        }
    }

    #[test]
    fn log_convexity_sampled() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let kernel = fig_kernel();
        for _ in 0..40 {
            let a: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let b: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let ra = rho_value(&kernel, &a).unwrap().ln();
            let rb = rho_value(&kernel, &b).unwrap().ln();
            for lam in [0.25, 0.5, 0.75] {
                let mix: Vec<f64> = a
                    .iter()
                    .zip(&b)
                    .map(|(&x, &y)| lam * x + (1.0 - lam) * y)
                    .collect();
                let rm = rho_value(&kernel, &mix).unwrap().ln();
                assert!(rm <= lam * ra + (1.0 - lam) * rb + 1e-9);
            }
        }
    }

    #[test]
    fn boundary_ray_closed_forms() {
        // cosh(r)/m = 1 along the 1d axis.
        let r = boundary_ray(&uniform_kernel(1, 2.0), &[1.0]).unwrap();
        assert!((r - 2.0f64.acosh()).abs() < 1e-9, "{r}");
        assert!((r - 1.3169578969).abs() < 1e-9);
        // cosh(r) + 1 = 2m on the two-dimensional axis.
        let r2 = boundary_ray(&uniform_kernel(2, 2.0), &[1.0, 0.0]).unwrap();
        assert!((r2 - 3.0f64.acosh()).abs() < 1e-9, "{r2}");
        // Symmetry r*(v) = r*(-v).
        let rm = boundary_ray(&uniform_kernel(2, 2.0), &[-1.0, 0.0]).unwrap();
        assert!((r2 - rm).abs() < 1e-10);
    }

    #[test]
    fn boundary_ray_four_color_axis() {
        // rho(t)^2 = (cosh t1 + cosh t2 + cosh t3)/8, so cosh r = 6 on an axis.
        let r = boundary_ray(&fig_kernel(), &[1.0, 0.0, 0.0]).unwrap();
        assert!((r - 6.0f64.acosh()).abs() < 1e-9);
    }

    #[test]
    fn support_value_axis_and_dense_oracle() {
        let kernel = uniform_kernel(2, 2.0);
        let bp = support_value(&kernel, &[1.0, 0.0]).unwrap();
        assert!((bp.h - 3.0f64.acosh()).abs() < 1e-8, "h = {}", bp.h);
        assert!((bp.t[0] - 3.0f64.acosh()).abs() < 1e-7);
        assert!(bp.t[1].abs() < 1e-7);

        // Dense boundary-sampling oracle: max of t.u over many ray points.
        let mut best = 0.0f64;
        for k in 0..2000 {
            let ang = k as f64 / 2000.0 * std::f64::consts::TAU;
            let v = [ang.cos(), ang.sin()];
            let r = boundary_ray(&kernel, &v).unwrap();
            best = best.max(r * v[0]);
        }
        assert!((bp.h - best).abs() < 1e-4);
        assert!(bp.h >= best - 1e-9, "support value must dominate all rays");
    }

    #[test]
    fn support_value_1d_closed_form() {
        for m in [1.5, 2.0, 4.0] {
            let bp = support_value(&uniform_kernel(1, m), &[1.0]).unwrap();
            assert!((bp.h - m.acosh()).abs() < 1e-9);
        }
    }

    #[test]
    fn support_value_lattice_symmetry() {
        let kernel = uniform_kernel(2, 2.0);
        let h1 = support_value(&kernel, &[1.0, 0.0]).unwrap().h;
        let h2 = support_value(&kernel, &[0.0, 1.0]).unwrap().h;
        assert!((h1 - h2).abs() < 1e-8);
    }

    #[test]
    fn support_dominates_rays() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let kernel = fig_kernel();
        for _ in 0..15 {
            let mut u: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0f64)).collect();
            if norm(&u) < 1e-3 {
                u[0] = 1.0;
            }
            let u = normalized(&u);
            let bp = support_value(&kernel, &u).unwrap();
            let ray = boundary_ray(&kernel, &u).unwrap();
            assert!(bp.h >= ray - 1e-8);
        }
    }

    #[test]
    fn gamma_round_trip() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(19);
        let kernel = fig_kernel();
        for _ in 0..15 {
            let mut u: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0f64)).collect();
            if norm(&u) < 1e-3 {
                u[2] = 1.0;
            }
            let u = normalized(&u);
            let bp = support_value(&kernel, &u).unwrap();
            let point = rho_at(&kernel, &bp.t).unwrap();
            let n_hat = normalized(&point.grad);
            let err = norm(
                &n_hat
                    .iter()
                    .zip(&u)
                    .map(|(a, b)| a - b)
                    .collect::<Vec<f64>>(),
            );
            assert!(err <= 1e-6, "normal map round trip off by {err}");
        }
    }

    #[test]
    fn doob_rows_are_probabilities() {
        // Closed form in one dimension: mu_t(+-1) = e^{+-t}/4 at t = arccosh 2.
        let kernel = uniform_kernel(1, 2.0);
        let t = 2.0f64.acosh();
        let doob = doob_kernel(&kernel, &[t]).unwrap();
        for e in &doob.entries {
            let expect = (t * e.offset[0] as f64).exp() / 4.0;
            assert!((e.prob - expect).abs() < 1e-10);
        }
        assert!((doob.row_mass(0) - 1.0).abs() < 1e-10);

        // Every row sums to one on the four-color model at an axis point.
        let kernel = fig_kernel();
        let t = vec![6.0f64.acosh(), 0.0, 0.0];
        let doob = doob_kernel(&kernel, &t).unwrap();
        for c in 0..4 {
            assert!((doob.row_mass(c) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn doob_rejects_interior_points() {
        let kernel = uniform_kernel(1, 2.0);
        assert!(doob_kernel(&kernel, &[0.1]).is_err());
    }

    #[test]
    fn hessian_energy_matrix() {
        // Non-killed uniform walk on Z^2: second moments diag(1/2, 1/2).
        let tilde = non_killed_kernel(&uniform_model(2, 2.0));
        let h = hessian_at(&tilde, &[0.0, 0.0]).unwrap();
        assert!((h[(0, 0)] - 0.5).abs() < 1e-6);
        assert!((h[(1, 1)] - 0.5).abs() < 1e-6);
        assert!(h[(0, 1)].abs() < 1e-8);

        let tilde1 = non_killed_kernel(&uniform_model(1, 2.0));
        let h1 = hessian_at(&tilde1, &[0.0]).unwrap();
        assert!((h1[(0, 0)] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn hessian_symmetric() {
        let kernel = fig_kernel();
        let h = hessian_at(&kernel, &[0.3, -0.2, 0.5]).unwrap();
        assert!(h.max_abs_asymmetry() < 1e-8);
    }
}
