//! Naive dense linear algebra used as an independent verification oracle.
//!
//! Everything here is a textbook algorithm on row-major storage: triple-loop
//! multiplication, partial-pivoting LU, cyclic Jacobi, unblocked Cholesky.
//! Performance is deliberately sacrificed; the benchmark surface uses the
//! contrast against the coordinate path. Nothing in this module may call
//! into the coordinate algebra, so a bug there cannot validate itself.

use crate::error::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "dense matrix entries",
                expected: rows * cols,
                actual: entries.len(),
            });
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// Largest absolute entry-wise difference; matrices must match in shape.
    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        self.entries
            .iter()
            .zip(&other.entries)
            .fold(0.0f64, |m, (&a, &b)| m.max((a - b).abs()))
    }

    /// Largest |m_ij - m_ji|, zero for a perfectly symmetric matrix.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in i + 1..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Textbook O(n^3) product.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                what: "matrix product inner dimension",
                expected: self.cols,
                actual: other.rows,
            });
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self[(i, l)];
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(l, j)];
                }
            }
        }
        Ok(out)
    }

    /// Matrix-vector product.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.cols != x.len() {
            return Err(Error::DimensionMismatch {
                what: "matrix-vector product",
                expected: self.cols,
                actual: x.len(),
            });
        }
        let mut y = vec![0.0; self.rows];
        for i in 0..self.rows {
            let mut acc = 0.0;
            for j in 0..self.cols {
                acc += self[(i, j)] * x[j];
            }
            y[i] = acc;
        }
        Ok(y)
    }

    /// Partial-pivoting LU factorization.
    pub fn lu(&self) -> Result<DenseLu> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch {
                what: "LU of non-square matrix",
                expected: self.rows,
                actual: self.cols,
            });
        }
        DenseLu::factor(self)
    }

    pub fn determinant(&self) -> Result<f64> {
        Ok(self.lu()?.determinant())
    }

    pub fn inverse(&self) -> Result<DenseMatrix> {
        Ok(self.lu()?.inverse())
    }

    /// Symmetric eigendecomposition by cyclic Jacobi rotations.
    ///
    /// Eigenvalues come back sorted in decreasing order with eigenvectors as
    /// the matching columns of an orthogonal matrix. The input must be
    /// symmetric to within 1e-10 of its magnitude.
    pub fn symmetric_eigen(&self) -> Result<(Vec<f64>, DenseMatrix)> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch {
                what: "eigendecomposition of non-square matrix",
                expected: self.rows,
                actual: self.cols,
            });
        }
        let asym = self.max_asymmetry();
        if asym > 1e-10 * self.max_abs().max(1.0) {
            return Err(Error::NotSymmetric {
                max_asymmetry: asym,
            });
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut v = DenseMatrix::identity(n);
        let frob: f64 = a.entries.iter().map(|x| x * x).sum::<f64>().sqrt();
        let target = 1e-12 * frob.max(1.0);
        for _sweep in 0..100 {
            let mut off = 0.0;
            for i in 0..n {
                for j in i + 1..n {
                    off += 2.0 * a[(i, j)] * a[(i, j)];
                }
            }
            if off.sqrt() < target {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    if apq == 0.0 {
                        continue;
                    }
                    // 2x2 rotation zeroing (p,q); standard stable formulas.
                    let tau = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                    let t = if tau >= 0.0 {
                        1.0 / (tau + (1.0 + tau * tau).sqrt())
                    } else {
                        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap());
        let values: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
        let mut vectors = DenseMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            for row in 0..n {
                vectors[(row, dst)] = v[(row, src)];
            }
        }
        Ok((values, vectors))
    }

    /// Unblocked Cholesky. Returns the lower factor, or `None` as the
    /// not-positive-definite signal (pivot at or below tolerance).
    pub fn cholesky(&self) -> Option<DenseMatrix> {
        if !self.is_square() {
            return None;
        }
        let n = self.rows;
        let tol = 1e-12 * self.max_abs().max(1.0);
        let mut l = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d <= tol {
                return None;
            }
            let dj = d.sqrt();
            l[(j, j)] = dj;
            for i in j + 1..n {
                let mut v = self[(i, j)];
                for k in 0..j {
                    v -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = v / dj;
            }
        }
        Some(l)
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.entries[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.entries[i * self.cols + j]
    }
}

/// LU factors of a square dense matrix.
pub struct DenseLu {
    n: usize,
    lower_upper: DenseMatrix,
    permutation: Vec<usize>,
    sign: f64,
}

impl DenseLu {
    fn factor(m: &DenseMatrix) -> Result<Self> {
        let n = m.rows;
        let tol = 1e-12 * m.max_abs().max(f64::MIN_POSITIVE);
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for col in 0..n {
            let mut pivot_row = col;
            let mut pivot_val = lu[(col, col)].abs();
            for row in col + 1..n {
                if lu[(row, col)].abs() > pivot_val {
                    pivot_row = row;
                    pivot_val = lu[(row, col)].abs();
                }
            }
            if pivot_val < tol {
                return Err(Error::Singular {
                    factor: "dense matrix",
                    pivot: pivot_val,
                    tolerance: tol,
                });
            }
            if pivot_row != col {
                for j in 0..n {
                    let tmp = lu[(col, j)];
                    lu[(col, j)] = lu[(pivot_row, j)];
                    lu[(pivot_row, j)] = tmp;
                }
                perm.swap(col, pivot_row);
                sign = -sign;
            }
            for row in col + 1..n {
                let f = lu[(row, col)] / lu[(col, col)];
                lu[(row, col)] = f;
                for j in col + 1..n {
                    let delta = f * lu[(col, j)];
                    lu[(row, j)] -= delta;
                }
            }
        }
        Ok(Self {
            n,
            lower_upper: lu,
            permutation: perm,
            sign,
        })
    }

    pub fn determinant(&self) -> f64 {
        let mut det = self.sign;
        for i in 0..self.n {
            det *= self.lower_upper[(i, i)];
        }
        det
    }

    pub fn sign_log_determinant(&self) -> (f64, f64) {
        let mut sign = self.sign;
        let mut log = 0.0;
        for i in 0..self.n {
            let d = self.lower_upper[(i, i)];
            sign *= d.signum();
            log += d.abs().ln();
        }
        (sign, log)
    }

    /// Forward then back substitution.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = (0..n).map(|i| rhs[self.permutation[i]]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.lower_upper[(i, j)] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lower_upper[(i, j)] * x[j];
            }
            x[i] /= self.lower_upper[(i, i)];
        }
        x
    }

    /// Inverse column by column.
    pub fn inverse(&self) -> DenseMatrix {
        let n = self.n;
        let mut inv = DenseMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for col in 0..n {
            e[col] = 1.0;
            let x = self.solve(&e);
            e[col] = 0.0;
            for row in 0..n {
                inv[(row, col)] = x[row];
            }
        }
        inv
    }

    /// Row permutation applied during factorization.
    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// Reconstructs P*A = L*U for verification.
    pub fn reconstruct(&self) -> DenseMatrix {
        let n = self.n;
        let mut l = DenseMatrix::identity(n);
        let mut u = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if j < i {
                    l[(i, j)] = self.lower_upper[(i, j)];
                } else {
                    u[(i, j)] = self.lower_upper[(i, j)];
                }
            }
        }
        l.matmul(&u).expect("square factors")
    }
}
