use super::DenseMatrix;
use crate::error::{Error, Result};

/// LU factorization with partial pivoting, `P·M = L·U`.
#[derive(Debug, Clone)]
pub struct Lu {
    factors: DenseMatrix,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    /// Factor `m`. Fails with [`Error::Singular`] when a pivot falls below
    /// `n · ε · max|m|`.
    pub fn new(m: &DenseMatrix, context: &'static str) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!(
                "LU of non-square {}x{} matrix",
                m.rows(),
                m.cols()
            )));
        }
        let n = m.rows();
        let mut a = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let tiny = (n.max(1) as f64) * f64::EPSILON * m.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, a[(i, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot <= tiny {
                return Err(Error::Singular(context));
            }
            if p != k {
                for j in 0..n {
                    let t = a[(k, j)];
                    a[(k, j)] = a[(p, j)];
                    a[(p, j)] = t;
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let d = a[(k, k)];
            for i in (k + 1)..n {
                let f = a[(i, k)] / d;
                a[(i, k)] = f;
                if f != 0.0 {
                    for j in (k + 1)..n {
                        a[(i, j)] -= f * a[(k, j)];
                    }
                }
            }
        }
        Ok(Self {
            factors: a,
            perm,
            sign,
        })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let a = &self.factors;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= a[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= a[(i, j)] * x[j];
            }
            x[i] = s / a[(i, i)];
        }
        x
    }

    pub fn determinant(&self) -> f64 {
        self.factors.diagonal().iter().product::<f64>() * self.sign
    }

    pub fn inverse(&self) -> DenseMatrix {
        let n = self.dim();
        let mut inv = DenseMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

impl DenseMatrix {
    pub fn inverse(&self) -> Result<DenseMatrix> {
        Ok(Lu::new(self, "matrix inverse")?.inverse())
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        Ok(Lu::new(self, "linear solve")?.solve(b))
    }
}

/// Numerical rank by Gaussian elimination with complete pivoting.
pub fn rank(m: &DenseMatrix, rel_tol: f64) -> usize {
    let (r, c) = m.shape();
    let mut a = m.clone();
    let scale = m.max_abs();
    if scale == 0.0 {
        return 0;
    }
    let tol = rel_tol * scale;
    let mut rank = 0;
    for k in 0..r.min(c) {
        let mut best = (k, k, 0.0);
        for i in k..r {
            for j in k..c {
                if a[(i, j)].abs() > best.2 {
                    best = (i, j, a[(i, j)].abs());
                }
            }
        }
        if best.2 <= tol {
            break;
        }
        let (p, q, _) = best;
        for j in 0..c {
            let t = a[(k, j)];
            a[(k, j)] = a[(p, j)];
            a[(p, j)] = t;
        }
        for i in 0..r {
            let t = a[(i, k)];
            a[(i, k)] = a[(i, q)];
            a[(i, q)] = t;
        }
        let d = a[(k, k)];
        for i in (k + 1)..r {
            let f = a[(i, k)] / d;
            for j in k..c {
                a[(i, j)] -= f * a[(k, j)];
            }
        }
        rank += 1;
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_and_inverts() {
        let m = DenseMatrix::from_rows(&[&[0.0, 2.0, 1.0], &[1.0, 1.0, 0.0], &[3.0, 0.0, 1.0]]).unwrap();
        let lu = Lu::new(&m, "test").unwrap();
        let x = lu.solve(&[3.0, 2.0, 4.0]);
        let back = m.matvec(&x);
        for (a, b) in back.iter().zip([3.0, 2.0, 4.0]) {
            assert!((a - b).abs() < 1e-14);
        }
        let prod = &m * &lu.inverse();
        assert!(prod.max_abs_diff(&DenseMatrix::identity(3)) < 1e-14);
        assert!((lu.determinant() - (-5.0)).abs() < 1e-12);
    }

    #[test]
    fn singular_is_reported() {
        let m = DenseMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]).unwrap();
        assert!(matches!(Lu::new(&m, "x"), Err(Error::Singular("x"))));
        assert_eq!(rank(&m, 1e-12), 1);
    }
}
