//! Small dense matrices. Everything here is `p x p` with `p <= ~16` or
//! `d x d` with `d <= ~8`, so no external linear-algebra crate is pulled in.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub n: usize,
    pub a: Vec<f64>,
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        Mat {
            n,
            a: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut m = Mat::zeros(n);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), n);
            m.a[i * n..(i + 1) * n].copy_from_slice(r);
        }
        m
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += self.a[i * n + j] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn transpose(&self) -> Mat {
        let n = self.n;
        let mut t = Mat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                t[(j, i)] = self.a[i * n + j];
            }
        }
        t
    }

    pub fn max_abs_asymmetry(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.a[i * n + j] - self.a[j * n + i]).abs());
            }
        }
        worst
    }

    /// Solves `A x = b` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        let mut a = self.a.clone();
        let mut x = b.to_vec();
        for col in 0..n {
            let mut piv = col;
            for r in (col + 1)..n {
                if a[r * n + col].abs() > a[piv * n + col].abs() {
                    piv = r;
                }
            }
            if a[piv * n + col].abs() < 1e-300 {
                return Err(Error::Numerical("singular linear system".into()));
            }
            if piv != col {
                for j in 0..n {
                    a.swap(col * n + j, piv * n + j);
                }
                x.swap(col, piv);
            }
            let inv = 1.0 / a[col * n + col];
            for r in (col + 1)..n {
                let f = a[r * n + col] * inv;
                if f == 0.0 {
                    continue;
                }
                for j in col..n {
                    a[r * n + j] -= f * a[col * n + j];
                }
                x[r] -= f * x[col];
            }
        }
        for col in (0..n).rev() {
            let mut acc = x[col];
            for j in (col + 1)..n {
                acc -= a[col * n + j] * x[j];
            }
            x[col] = acc / a[col * n + col];
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<Mat> {
        let n = self.n;
        let mut inv = Mat::zeros(n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = self.solve(&e)?;
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        Ok(inv)
    }

    /// Cholesky-style positive-definiteness test (symmetric input assumed).
    pub fn is_positive_definite(&self) -> bool {
        let n = self.n;
        let mut a = self.a.clone();
        for k in 0..n {
            let mut pivot = a[k * n + k];
            for j in 0..k {
                pivot -= a[k * n + j] * a[k * n + j];
            }
            if pivot <= 0.0 {
                return false;
            }
            let root = pivot.sqrt();
            a[k * n + k] = root;
            for i in (k + 1)..n {
                let mut v = a[i * n + k];
                for j in 0..k {
                    v -= a[i * n + j] * a[k * n + j];
                }
                a[i * n + k] = v / root;
            }
        }
        true
    }

    /// Determinant via LU with partial pivoting.
    pub fn det(&self) -> f64 {
        let n = self.n;
        let mut a = self.a.clone();
        let mut sign = 1.0;
        let mut det = 1.0;
        for col in 0..n {
            let mut piv = col;
            for r in (col + 1)..n {
                if a[r * n + col].abs() > a[piv * n + col].abs() {
                    piv = r;
                }
            }
            if a[piv * n + col] == 0.0 {
                return 0.0;
            }
            if piv != col {
                for j in 0..n {
                    a.swap(col * n + j, piv * n + j);
                }
                sign = -sign;
            }
            det *= a[col * n + col];
            let inv = 1.0 / a[col * n + col];
            for r in (col + 1)..n {
                let f = a[r * n + col] * inv;
                for j in col..n {
                    a[r * n + j] -= f * a[col * n + j];
                }
            }
        }
        sign * det
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.a[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.a[i * self.n + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_and_inverse() {
        let m = Mat::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
        let x = m.solve(&[3.0, 4.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        let inv = m.inverse().unwrap();
        let id = Mat::from_rows(&[
            vec![
                inv[(0, 0)] * 2.0 + inv[(0, 1)] * 1.0,
                inv[(0, 0)] * 1.0 + inv[(0, 1)] * 3.0,
            ],
            vec![
                inv[(1, 0)] * 2.0 + inv[(1, 1)] * 1.0,
                inv[(1, 0)] * 1.0 + inv[(1, 1)] * 3.0,
            ],
        ]);
        assert!((id[(0, 0)] - 1.0).abs() < 1e-12);
        assert!(id[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn definiteness() {
        assert!(Mat::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).is_positive_definite());
        assert!(!Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).is_positive_definite());
    }

    #[test]
    fn determinant() {
        let m = Mat::from_rows(&[vec![0.0, 1.0], vec![2.0, 3.0]]);
        assert!((m.det() + 2.0).abs() < 1e-12);
    }
}
