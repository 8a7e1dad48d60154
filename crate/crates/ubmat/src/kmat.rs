//! Small dense kernels on K x K coordinate matrices (row-major slices).
//!
//! These back the coordinate algebra only. The verification oracle in
//! [`crate::dense`] has its own independent implementations so that a bug
//! here cannot validate itself.

use crate::error::{Error, Result};

/// Relative pivot tolerance for the K x K solves.
pub(crate) const PIVOT_RTOL: f64 = 1e-12;

/// C = A * B for n x n row-major matrices.
pub(crate) fn mul(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for l in 0..n {
            let ail = a[i * n + l];
            if ail == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i * n + j] += ail * b[l * n + j];
            }
        }
    }
    c
}

/// Scales row i of `m` by d[i] (left multiplication by diag(d)).
pub(crate) fn scale_rows(n: usize, d: &[f64], m: &[f64]) -> Vec<f64> {
    let mut out = m.to_vec();
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] *= d[i];
        }
    }
    out
}

/// Scales column j of `m` by d[j] (right multiplication by diag(d)).
pub(crate) fn scale_cols(n: usize, m: &[f64], d: &[f64]) -> Vec<f64> {
    let mut out = m.to_vec();
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] *= d[j];
        }
    }
    out
}

pub(crate) fn max_abs(m: &[f64]) -> f64 {
    m.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()))
}

/// LU factorization with partial pivoting of a K x K matrix.
pub(crate) struct Lu {
    n: usize,
    /// Combined L (unit lower, below diagonal) and U (upper).
    lu: Vec<f64>,
    /// Row permutation: pivot[i] is the source row of factored row i.
    pivot: Vec<usize>,
}

impl Lu {
    /// Factors `m`, failing if any pivot falls below `PIVOT_RTOL * max|entry|`.
    /// `factor` names the matrix in error messages.
    pub(crate) fn factor(n: usize, m: &[f64], factor: &'static str) -> Result<Self> {
        Self::factor_with(n, m, factor, PIVOT_RTOL)
    }

    /// Like [`Lu::factor`] with an explicit relative pivot tolerance.
    pub(crate) fn factor_with(
        n: usize,
        m: &[f64],
        factor: &'static str,
        pivot_rtol: f64,
    ) -> Result<Self> {
        let tolerance = pivot_rtol * max_abs(m).max(f64::MIN_POSITIVE);
        let mut lu = m.to_vec();
        let mut pivot: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let mut best = col;
            let mut best_val = lu[col * n + col].abs();
            for row in col + 1..n {
                let v = lu[row * n + col].abs();
                if v > best_val {
                    best = row;
                    best_val = v;
                }
            }
            if best_val <= tolerance {
                return Err(Error::Singular {
                    factor,
                    pivot: best_val,
                    tolerance,
                });
            }
            if best != col {
                for j in 0..n {
                    lu.swap(col * n + j, best * n + j);
                }
                pivot.swap(col, best);
            }
            let inv_p = 1.0 / lu[col * n + col];
            for row in col + 1..n {
                let factor = lu[row * n + col] * inv_p;
                lu[row * n + col] = factor;
                for j in col + 1..n {
                    lu[row * n + j] -= factor * lu[col * n + j];
                }
            }
        }
        Ok(Self { n, lu, pivot })
    }

    /// Solves M x = rhs.
    pub(crate) fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = (0..n).map(|i| rhs[self.pivot[i]]).collect();
        for i in 1..n {
            for j in 0..i {
                x[i] -= self.lu[i * n + j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[i * n + j] * x[j];
            }
            x[i] /= self.lu[i * n + i];
        }
        x
    }
}

/// Eigendecomposition of a symmetric K x K matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in decreasing order and the matching orthonormal
/// eigenvectors as columns of a row-major K x K matrix.
pub(crate) fn sym_eigen(n: usize, m: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut a = m.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    if n > 1 {
        let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let threshold = 1e-14 * scale.max(f64::MIN_POSITIVE);
        for _sweep in 0..64 {
            let mut off = 0.0;
            for i in 0..n {
                for j in i + 1..n {
                    off += a[i * n + j] * a[i * n + j];
                }
            }
            if (2.0 * off).sqrt() <= threshold {
                break;
            }
            for p in 0..n - 1 {
                for q in p + 1..n {
                    let apq = a[p * n + q];
                    if apq.abs() <= threshold / (n * n) as f64 {
                        continue;
                    }
                    let app = a[p * n + p];
                    let aqq = a[q * n + q];
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = c * vkp - s * vkq;
                        v[k * n + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[j * n + j]
            .partial_cmp(&a[i * n + i])
            .expect("eigenvalues are finite")
    });
    let values: Vec<f64> = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (dst, &src) in order.iter().enumerate() {
        for row in 0..n {
            vectors[row * n + dst] = v[row * n + src];
        }
    }
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_linear_systems() {
        let m = vec![2.0, 0.6, 0.4, 2.9];
        let lu = Lu::factor(2, &m, "test").unwrap();
        let x = lu.solve(&[1.0, -0.5]);
        assert!((2.0 * x[0] + 0.6 * x[1] - 1.0).abs() < 1e-14);
        assert!((0.4 * x[0] + 2.9 * x[1] + 0.5).abs() < 1e-14);
        // A system that needs pivoting.
        let m = vec![0.0, 1.0, 1.0, 0.0];
        let lu = Lu::factor(2, &m, "test").unwrap();
        assert_eq!(lu.solve(&[3.0, 7.0]), vec![7.0, 3.0]);
    }

    #[test]
    fn lu_rejects_singular() {
        let m = vec![1.0, 2.0, 2.0, 4.0];
        assert!(Lu::factor(2, &m, "test").is_err());
    }

    #[test]
    fn jacobi_diagonalizes() {
        let m = vec![2.0, 1.0, 1.0, 2.0];
        let (vals, vecs) = sym_eigen(2, &m);
        assert!((vals[0] - 3.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
        // First eigenvector proportional to (1,1)/sqrt(2).
        assert!((vecs[0].abs() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((vecs[0] - vecs[2]).abs() < 1e-12);
    }
}
