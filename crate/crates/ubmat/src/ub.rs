//! Uniform-block matrices and their coordinate algebra.
//!
//! A symmetric p x p matrix partitioned by block sizes `(p_1, ..., p_K)` has
//! uniform-block structure when every diagonal block is `a_kk*I + b_kk*J`
//! and every off-diagonal block is the constant matrix `b_kk'*1`. Such a
//! matrix is determined uniquely by the K-vector `a`, the symmetric K x K
//! matrix `b`, and the partition — its coordinates. All algebra here (sums,
//! products, powers, eigenvalues, determinants, inverses, the orthogonal
//! canonical form, precision and correlation transforms) runs on the K x K
//! coordinates without ever materializing the p x p matrix.
//!
//! The key derived quantity is `Delta = A + B*P` with `P = diag(p_1..p_K)`:
//! it carries the K non-trivial eigenvalues, the determinant factor and the
//! inverse correction. `Delta` is similar to the symmetric matrix
//! `P^{1/2} (A P^{-1} + B) P^{1/2}`, so its eigenvalues are real and can be
//! found with a plain symmetric eigensolver.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::kmat;
use crate::partition::Partition;

/// Numerical tolerances threaded through structure checks and solves.
///
/// All values are relative: `uniformity` to the magnitude of each block,
/// `pivot` to the largest entry of the factored matrix, `positive_definite`
/// and `symmetry` to the scale of what they inspect.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Allowed relative deviation of a block from uniformity in `compress`.
    pub uniformity: f64,
    /// Relative pivot threshold below which a solve reports singularity.
    pub pivot: f64,
    /// Threshold for the positive-definiteness criterion.
    pub positive_definite: f64,
    /// Relative asymmetry allowed before a product is flagged non-symmetric.
    pub symmetry: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            uniformity: 1e-8,
            pivot: 1e-12,
            positive_definite: 1e-10,
            symmetry: 1e-9,
        }
    }
}

/// A symmetric uniform-block matrix stored by its coordinates `(a, b, p)`.
///
/// `a` holds the diagonal of the K x K matrix A, `b` the full K x K
/// symmetric matrix B (kept exactly symmetric), and `p` the partition.
///
/// ```
/// use ubmat::{Partition, UbMatrix};
///
/// let p = Partition::new(vec![2, 3]).unwrap();
/// let x = UbMatrix::new(
///     vec![1.0, 2.0],
///     vec![0.5, 0.2, 0.2, 0.3],
///     p,
/// ).unwrap();
/// assert!((x.determinant() - 22.24).abs() < 1e-12);
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct UbMatrix {
    a: Vec<f64>,
    /// Row-major K x K, exactly symmetric.
    b: Vec<f64>,
    partition: Partition,
}

/// `Delta = A + B*P`, the K x K matrix driving eigenvalues, determinant and
/// inverse of a uniform-block matrix.
#[derive(Debug, Clone)]
pub struct DeltaMatrix {
    k: usize,
    entries: Vec<f64>,
    /// `P^{1/2} (A P^{-1} + B) P^{1/2}`, the symmetric matrix similar to
    /// Delta; its (i,j) entry is `a_i d_ij + b_ij sqrt(p_i p_j)`.
    symmetrized: Vec<f64>,
    sizes: Vec<f64>,
}

impl DeltaMatrix {
    /// Row-major K x K entries of Delta itself.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn order(&self) -> usize {
        self.k
    }

    /// Eigenvalues of Delta in decreasing order. Real by similarity to a
    /// symmetric matrix.
    pub fn eigenvalues(&self) -> Vec<f64> {
        kmat::sym_eigen(self.k, &self.symmetrized).0
    }

    /// Eigenvalues (decreasing) with unit-norm-in-P eigenvectors of Delta:
    /// row k of the returned matrix is the eigenvector for the k-th value,
    /// scaled so that `xi^T P xi = 1`. Rows built this way are mutually
    /// P-orthonormal, which is exactly what the canonical form needs.
    pub(crate) fn eigen_xi(&self) -> (Vec<f64>, Vec<f64>) {
        let k = self.k;
        let (values, vectors) = kmat::sym_eigen(k, &self.symmetrized);
        let mut xi = vec![0.0; k * k];
        for col in 0..k {
            for row in 0..k {
                xi[col * k + row] = vectors[row * k + col] / self.sizes[row].sqrt();
            }
        }
        (values, xi)
    }
}

/// Result of multiplying two uniform-block matrices.
///
/// The product of two symmetric uniform-block matrices always has
/// uniform-block shape, but its B coordinate is symmetric only when the
/// factors commute. A non-symmetric result is kept intact and flagged;
/// symmetric-only operations refuse it.
#[derive(Debug, Clone)]
pub struct UbProduct {
    a: Vec<f64>,
    b: Vec<f64>,
    partition: Partition,
    max_asymmetry: f64,
    symmetric: bool,
}

impl UbProduct {
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Worst |b_kl - b_lk| observed before symmetrization.
    pub fn max_asymmetry(&self) -> f64 {
        self.max_asymmetry
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    /// Converts into a symmetric [`UbMatrix`], failing when the factors did
    /// not commute.
    pub fn into_symmetric(self) -> Result<UbMatrix> {
        if !self.symmetric {
            return Err(Error::NotSymmetric {
                max_asymmetry: self.max_asymmetry,
            });
        }
        let k = self.partition.block_count();
        let mut b = self.b;
        symmetrize_lower(k, &mut b);
        Ok(UbMatrix {
            a: self.a,
            b,
            partition: self.partition,
        })
    }

    /// Dense expansion (valid for non-symmetric B as well).
    pub fn expand(&self) -> DenseMatrix {
        expand_coords(&self.a, &self.b, &self.partition)
    }
}

/// Orthogonal diagonalization of a uniform-block matrix.
///
/// `gamma * N * gamma^T = diag(diagonal)`. Within each block, the first
/// `p_k - 1` rows of `gamma` are the Helmert submatrix rows of that block
/// (they carry eigenvalue `a_kk`), and the block's last row spreads the
/// matching Delta eigenvector across all blocks (it carries one Delta
/// eigenvalue; those appear in decreasing order across blocks).
#[derive(Debug, Clone)]
pub struct CanonicalForm {
    /// Diagonal of `gamma * N * gamma^T` in canonical layout.
    pub diagonal: Vec<f64>,
    /// (eigenvalue, multiplicity) pairs in the same layout; multiplicities
    /// sum to p.
    pub pairs: Vec<(f64, usize)>,
    /// The p x p orthogonal matrix.
    pub gamma: DenseMatrix,
    /// Set when Delta has (numerically) repeated eigenvalues, in which case
    /// the eigenvector basis is whatever the eigensolver produced.
    pub delta_ties: bool,
}

impl UbMatrix {
    /// Builds a uniform-block matrix from coordinates. `b` must be the full
    /// row-major K x K matrix and exactly symmetric; a single triangle is
    /// authoritative, so mirror your data before calling if needed.
    pub fn new(a: Vec<f64>, b: Vec<f64>, partition: Partition) -> Result<Self> {
        let k = partition.block_count();
        if a.len() != k {
            return Err(Error::DimensionMismatch {
                what: "coordinate vector a",
                expected: k,
                actual: a.len(),
            });
        }
        if b.len() != k * k {
            return Err(Error::DimensionMismatch {
                what: "coordinate matrix b",
                expected: k * k,
                actual: b.len(),
            });
        }
        let mut asym = 0.0f64;
        for i in 0..k {
            for j in i + 1..k {
                asym = asym.max((b[i * k + j] - b[j * k + i]).abs());
            }
        }
        if asym > 0.0 {
            return Err(Error::NotSymmetric {
                max_asymmetry: asym,
            });
        }
        Ok(Self { a, b, partition })
    }

    /// The identity matrix I_p in coordinates.
    pub fn identity(partition: Partition) -> Self {
        let k = partition.block_count();
        Self {
            a: vec![1.0; k],
            b: vec![0.0; k * k],
            partition,
        }
    }

    /// The zero matrix in coordinates.
    pub fn zeros(partition: Partition) -> Self {
        let k = partition.block_count();
        Self {
            a: vec![0.0; k],
            b: vec![0.0; k * k],
            partition,
        }
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    /// Full row-major K x K matrix B.
    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn b_at(&self, k: usize, l: usize) -> f64 {
        self.b[k * self.partition.block_count() + l]
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn block_count(&self) -> usize {
        self.partition.block_count()
    }

    pub fn dim(&self) -> usize {
        self.partition.total()
    }

    /// `Delta = A + B*P`.
    pub fn delta_matrix(&self) -> DeltaMatrix {
        let k = self.block_count();
        let sizes = self.partition.sizes_f64();
        let mut entries = vec![0.0; k * k];
        let mut symmetrized = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                entries[i * k + j] = self.b[i * k + j] * sizes[j];
                symmetrized[i * k + j] = self.b[i * k + j] * (sizes[i] * sizes[j]).sqrt();
            }
            entries[i * k + i] += self.a[i];
            symmetrized[i * k + i] += self.a[i];
        }
        DeltaMatrix {
            k,
            entries,
            symmetrized,
            sizes,
        }
    }

    /// Coordinate-wise sum; partitions must match.
    pub fn add(&self, other: &UbMatrix) -> Result<UbMatrix> {
        self.combine(other, 1.0)
    }

    /// Coordinate-wise difference; partitions must match.
    pub fn sub(&self, other: &UbMatrix) -> Result<UbMatrix> {
        self.combine(other, -1.0)
    }

    fn combine(&self, other: &UbMatrix, sign: f64) -> Result<UbMatrix> {
        self.partition.ensure_same(&other.partition)?;
        let a = self
            .a
            .iter()
            .zip(&other.a)
            .map(|(&x, &y)| x + sign * y)
            .collect();
        let b = self
            .b
            .iter()
            .zip(&other.b)
            .map(|(&x, &y)| x + sign * y)
            .collect();
        Ok(UbMatrix {
            a,
            b,
            partition: self.partition.clone(),
        })
    }

    /// Multiplies by a scalar.
    pub fn scale(&self, c: f64) -> UbMatrix {
        UbMatrix {
            a: self.a.iter().map(|&x| c * x).collect(),
            b: self.b.iter().map(|&x| c * x).collect(),
            partition: self.partition.clone(),
        }
    }

    /// Coordinate product `A* = A1 A2`, `B* = A1 B2 + B1 A2 + B1 P B2`.
    ///
    /// The result is flagged symmetric exactly when the factors commute
    /// (equivalently, when `B*` comes out symmetric within tolerance).
    pub fn multiply(&self, other: &UbMatrix) -> Result<UbProduct> {
        self.multiply_with(other, &Tolerances::default())
    }

    pub fn multiply_with(&self, other: &UbMatrix, tol: &Tolerances) -> Result<UbProduct> {
        self.partition.ensure_same(&other.partition)?;
        let k = self.block_count();
        let sizes = self.partition.sizes_f64();
        let a: Vec<f64> = self.a.iter().zip(&other.a).map(|(&x, &y)| x * y).collect();
        // A1*B2 scales rows of B2; B1*A2 scales columns of B1.
        let mut b = kmat::scale_rows(k, &self.a, &other.b);
        let b1a2 = kmat::scale_cols(k, &self.b, &other.a);
        let b1p = kmat::scale_cols(k, &self.b, &sizes);
        let b1pb2 = kmat::mul(k, &b1p, &other.b);
        for i in 0..k * k {
            b[i] += b1a2[i] + b1pb2[i];
        }
        let mut asym = 0.0f64;
        for i in 0..k {
            for j in i + 1..k {
                asym = asym.max((b[i * k + j] - b[j * k + i]).abs());
            }
        }
        let scale = kmat::max_abs(&b).max(1.0);
        let symmetric = asym <= tol.symmetry * scale;
        Ok(UbProduct {
            a,
            b,
            partition: self.partition.clone(),
            max_asymmetry: asym,
            symmetric,
        })
    }

    /// The square `N * N`, always a symmetric uniform-block matrix.
    pub fn square(&self) -> UbMatrix {
        self.pow(2).expect("exponent 2 is valid")
    }

    /// Integer power `N^m` for m >= 1, iterating the coordinate recursion
    /// `A^(m) = A^(m-1) A`, `B^(m) = A^(m-1) B + B^(m-1) A + B^(m-1) P B`.
    pub fn pow(&self, m: u32) -> Result<UbMatrix> {
        if m < 1 {
            return Err(Error::InvalidParameter(
                "power requires exponent m >= 1".into(),
            ));
        }
        let k = self.block_count();
        let sizes = self.partition.sizes_f64();
        let mut acc_a = self.a.clone();
        let mut acc_b = self.b.clone();
        for _ in 2..=m {
            let next_a: Vec<f64> = acc_a.iter().zip(&self.a).map(|(&x, &y)| x * y).collect();
            let mut next_b = kmat::scale_rows(k, &acc_a, &self.b);
            let ba = kmat::scale_cols(k, &acc_b, &self.a);
            let bp = kmat::scale_cols(k, &acc_b, &sizes);
            let bpb = kmat::mul(k, &bp, &self.b);
            for i in 0..k * k {
                next_b[i] += ba[i] + bpb[i];
            }
            // Exact-arithmetic symmetry is guaranteed for powers of a
            // symmetric matrix; re-mirror to stop rounding drift.
            symmetrize_lower(k, &mut next_b);
            acc_a = next_a;
            acc_b = next_b;
        }
        Ok(UbMatrix {
            a: acc_a,
            b: acc_b,
            partition: self.partition.clone(),
        })
    }

    /// All p eigenvalues with multiplicities: `(a_kk, p_k - 1)` for each
    /// block, then the K eigenvalues of Delta (decreasing) with
    /// multiplicity 1. Multiplicities always sum to p.
    pub fn eigenvalues(&self) -> Vec<(f64, usize)> {
        let mut out: Vec<(f64, usize)> = self
            .a
            .iter()
            .zip(self.partition.sizes())
            .map(|(&a, &pk)| (a, pk - 1))
            .collect();
        for lambda in self.delta_matrix().eigenvalues() {
            out.push((lambda, 1));
        }
        out
    }

    /// `det(N) = (prod_k a_kk^(p_k - 1)) * det(Delta)`.
    pub fn determinant(&self) -> f64 {
        let mut det = 1.0;
        for (&a, &pk) in self.a.iter().zip(self.partition.sizes()) {
            det *= a.powi(pk as i32 - 1);
        }
        let delta = self.delta_matrix();
        det * det_unguarded(delta.order(), delta.entries())
    }

    /// `(sign, log|det|)` for scales where the determinant itself would
    /// overflow; sign is -1, 0 or +1 and log|det| is -inf for singular input.
    pub fn sign_log_determinant(&self) -> (f64, f64) {
        let mut sign = 1.0f64;
        let mut log = 0.0f64;
        for (&a, &pk) in self.a.iter().zip(self.partition.sizes()) {
            let e = (pk - 1) as f64;
            if a == 0.0 {
                return (0.0, f64::NEG_INFINITY);
            }
            sign *= if a < 0.0 && (pk - 1) % 2 == 1 { -1.0 } else { 1.0 };
            log += e * a.abs().ln();
        }
        let delta = self.delta_matrix();
        let d = det_unguarded(delta.order(), delta.entries());
        if d == 0.0 {
            return (0.0, f64::NEG_INFINITY);
        }
        (sign * d.signum(), log + d.abs().ln())
    }

    /// Coordinate inverse `A* = A^{-1}`, `B* = -Delta^{-1} B A^{-1}`.
    pub fn inverse(&self) -> Result<UbMatrix> {
        self.inverse_with(&Tolerances::default())
    }

    pub fn inverse_with(&self, tol: &Tolerances) -> Result<UbMatrix> {
        let k = self.block_count();
        let a_tol = tol.pivot * kmat::max_abs(&self.a).max(f64::MIN_POSITIVE);
        if let Some(&worst) = self
            .a
            .iter()
            .min_by(|x, y| x.abs().partial_cmp(&y.abs()).unwrap())
        {
            if worst.abs() <= a_tol {
                return Err(Error::Singular {
                    factor: "A",
                    pivot: worst.abs(),
                    tolerance: a_tol,
                });
            }
        }
        let inv_a: Vec<f64> = self.a.iter().map(|&x| 1.0 / x).collect();
        let delta = self.delta_matrix();
        let lu = kmat::Lu::factor_with(k, delta.entries(), "Delta", tol.pivot)?;
        // Columns of B A^{-1} solved against Delta, then negated.
        let ba_inv = kmat::scale_cols(k, &self.b, &inv_a);
        let mut b = vec![0.0; k * k];
        let mut col = vec![0.0; k];
        for j in 0..k {
            for i in 0..k {
                col[i] = ba_inv[i * k + j];
            }
            let x = lu.solve(&col);
            for i in 0..k {
                b[i * k + j] = -x[i];
            }
        }
        // Symmetric in exact arithmetic; one triangle is authoritative.
        symmetrize_lower(k, &mut b);
        Ok(UbMatrix {
            a: inv_a,
            b,
            partition: self.partition.clone(),
        })
    }

    /// Positive definite iff every `a_kk` is positive and the symmetrized
    /// Delta has only positive eigenvalues.
    pub fn is_positive_definite(&self) -> bool {
        self.is_positive_definite_with(&Tolerances::default())
    }

    pub fn is_positive_definite_with(&self, tol: &Tolerances) -> bool {
        self.pd_margins(tol).is_ok()
    }

    /// (min a_kk, min eigenvalue of symmetrized Delta) or an error carrying
    /// them when either fails the threshold.
    pub(crate) fn pd_margins(&self, tol: &Tolerances) -> std::result::Result<(f64, f64), (f64, f64)> {
        let min_a = self.a.iter().copied().fold(f64::INFINITY, f64::min);
        let delta = self.delta_matrix();
        let eigs = delta.eigenvalues();
        let min_eig = eigs.iter().copied().fold(f64::INFINITY, f64::min);
        let scale = kmat::max_abs(&delta.symmetrized)
            .max(kmat::max_abs(&self.a))
            .max(1.0);
        let threshold = tol.positive_definite * scale;
        if min_a > threshold && min_eig > threshold {
            Ok((min_a, min_eig))
        } else {
            Err((min_a, min_eig))
        }
    }

    /// Orthogonal canonical form built from Helmert submatrices and the
    /// P-orthonormal eigenvectors of Delta.
    pub fn canonical_form(&self) -> CanonicalForm {
        let k = self.block_count();
        let p = self.dim();
        let offsets = self.partition.offsets();
        let delta = self.delta_matrix();
        let (lambdas, xi) = delta.eigen_xi();

        let scale = lambdas.iter().fold(1.0f64, |m, &v| m.max(v.abs()));
        let delta_ties = lambdas
            .windows(2)
            .any(|w| (w[0] - w[1]).abs() <= 1e-9 * scale);

        let mut gamma = DenseMatrix::zeros(p, p);
        let mut diagonal = Vec::with_capacity(p);
        let mut pairs = Vec::with_capacity(2 * k);
        for block in 0..k {
            let off = offsets[block];
            let pk = self.partition.size(block);
            // Helmert submatrix rows: row j has j-1 entries 1/sqrt(j(j-1)),
            // then -(j-1)/sqrt(j(j-1)), then zeros (j = 2..=p_k).
            for j in 2..=pk {
                let row = off + j - 2;
                let denom = ((j * (j - 1)) as f64).sqrt();
                for c in 0..j - 1 {
                    gamma[(row, off + c)] = 1.0 / denom;
                }
                gamma[(row, off + j - 1)] = -((j - 1) as f64) / denom;
            }
            // Block's last row spreads the Delta eigenvector.
            let row = off + pk - 1;
            for other in 0..k {
                let coeff = xi[block * k + other];
                for c in self.partition.block_range(other) {
                    gamma[(row, c)] = coeff;
                }
            }
            for _ in 0..pk - 1 {
                diagonal.push(self.a[block]);
            }
            diagonal.push(lambdas[block]);
            pairs.push((self.a[block], pk - 1));
            pairs.push((lambdas[block], 1));
        }
        CanonicalForm {
            diagonal,
            pairs,
            gamma,
            delta_ties,
        }
    }

    /// Coordinates of the precision matrix `Sigma^{-1}`; requires a
    /// positive definite covariance.
    pub fn precision_coordinates(&self) -> Result<UbMatrix> {
        self.precision_coordinates_with(&Tolerances::default())
    }

    pub fn precision_coordinates_with(&self, tol: &Tolerances) -> Result<UbMatrix> {
        match self.pd_margins(tol) {
            Ok(_) => self.inverse_with(tol),
            Err((min_a, min_delta_eig)) => Err(Error::NotPositiveDefinite {
                min_a,
                min_delta_eig,
            }),
        }
    }

    /// Coordinates of the correlation matrix: `A` and `B` congruent with
    /// `C^{-1/2}`, where `C = diag(a_kk + b_kk)` holds the variances.
    pub fn correlation_coordinates(&self) -> Result<UbMatrix> {
        let k = self.block_count();
        let mut variances = vec![0.0; k];
        for i in 0..k {
            let c = self.a[i] + self.b[i * k + i];
            if c <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "nonpositive variance in block {}: a + b = {c:.6e}",
                    i + 1
                )));
            }
            variances[i] = c;
        }
        // Diagonal blocks: round b/c once, then rebuild the pair through
        // 1 - x twice. Both subtractions are exact (Sterbenz) for any
        // correlation in (-1, 1), so the expanded diagonal a + b is exactly
        // 1 and re-applying the transform is a bitwise fixed point.
        let mut a = vec![0.0; k];
        let mut b = vec![0.0; k * k];
        for i in 0..k {
            let scaled = self.b[i * k + i] / variances[i];
            let a_i = 1.0 - scaled;
            a[i] = a_i;
            b[i * k + i] = 1.0 - a_i;
            for j in i + 1..k {
                let v = self.b[i * k + j] / (variances[i] * variances[j]).sqrt();
                b[i * k + j] = v;
                b[j * k + i] = v;
            }
        }
        Ok(UbMatrix {
            a,
            b,
            partition: self.partition.clone(),
        })
    }

    /// Materializes the full p x p matrix.
    pub fn expand(&self) -> DenseMatrix {
        expand_coords(&self.a, &self.b, &self.partition)
    }

    /// Reads coordinates back from a dense matrix, verifying symmetry and
    /// block uniformity.
    pub fn compress(m: &DenseMatrix, partition: &Partition) -> Result<UbMatrix> {
        Self::compress_with(m, partition, &Tolerances::default())
    }

    pub fn compress_with(
        m: &DenseMatrix,
        partition: &Partition,
        tol: &Tolerances,
    ) -> Result<UbMatrix> {
        let p = partition.total();
        if m.rows() != p || m.cols() != p {
            return Err(Error::DimensionMismatch {
                what: "dense matrix for compression",
                expected: p,
                actual: m.rows(),
            });
        }
        let asym = m.max_asymmetry();
        if asym > 1e-12 * m.max_abs().max(1.0) {
            return Err(Error::NotSymmetric {
                max_asymmetry: asym,
            });
        }
        let k = partition.block_count();
        let mut a = vec![0.0; k];
        let mut b = vec![0.0; k * k];
        let mut worst: Option<(usize, usize, f64, f64)> = None;
        let mut note = |br: usize, bc: usize, dev: f64, allowed: f64| {
            if dev > allowed {
                let is_worse = match worst {
                    Some((_, _, d, al)) => dev - allowed > d - al,
                    None => true,
                };
                if is_worse {
                    worst = Some((br, bc, dev, allowed));
                }
            }
        };
        for br in 0..k {
            let rows = partition.block_range(br);
            for bc in 0..k {
                let cols = partition.block_range(bc);
                // Coordinates come from single representative entries so
                // that expand-compress round-trips bitwise; means would
                // reintroduce rounding.
                let mut block_scale = 0.0f64;
                for i in rows.clone() {
                    for j in cols.clone() {
                        block_scale = block_scale.max(m[(i, j)].abs());
                    }
                }
                let allowed = tol.uniformity * block_scale;
                if br == bc {
                    let o = rows.start;
                    let diag_ref = m[(o, o)];
                    let off_ref = m[(o, o + 1)];
                    let mut dev = 0.0f64;
                    for i in rows.clone() {
                        for j in cols.clone() {
                            let expected = if i == j { diag_ref } else { off_ref };
                            dev = dev.max((m[(i, j)] - expected).abs());
                        }
                    }
                    note(br, bc, dev, allowed);
                    b[br * k + br] = off_ref;
                    a[br] = diag_ref - off_ref;
                } else {
                    let reference = if br < bc {
                        m[(rows.start, cols.start)]
                    } else {
                        m[(cols.start, rows.start)]
                    };
                    let mut dev = 0.0f64;
                    for i in rows.clone() {
                        for j in cols.clone() {
                            dev = dev.max((m[(i, j)] - reference).abs());
                        }
                    }
                    note(br, bc, dev, allowed);
                    b[br * k + bc] = reference;
                }
            }
        }
        if let Some((block_row, block_col, deviation, tolerance)) = worst {
            return Err(Error::StructureViolation {
                block_row,
                block_col,
                deviation,
                tolerance,
            });
        }
        Ok(UbMatrix {
            a,
            b,
            partition: partition.clone(),
        })
    }

    /// Quadratic form `x^T N x` in O(p + K^2): block sums feed the B part,
    /// block sums of squares the A part.
    pub fn quad_form(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "quadratic form vector",
                expected: self.dim(),
                actual: x.len(),
            });
        }
        let k = self.block_count();
        let mut sums = vec![0.0; k];
        let mut total = 0.0;
        for (block, slice) in self.partition.blocks(x).enumerate() {
            let mut s = 0.0;
            let mut sq = 0.0;
            for &v in slice {
                s += v;
                sq += v * v;
            }
            sums[block] = s;
            total += self.a[block] * sq;
        }
        for i in 0..k {
            for j in 0..k {
                total += self.b[i * k + j] * sums[i] * sums[j];
            }
        }
        Ok(total)
    }

    /// Matrix-vector product `N x` in O(p + K^2).
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "matrix-vector product",
                expected: self.dim(),
                actual: x.len(),
            });
        }
        let k = self.block_count();
        let sums: Vec<f64> = self.partition.blocks(x).map(|s| s.iter().sum()).collect();
        let mut y = vec![0.0; self.dim()];
        for block in 0..k {
            let mut shift = 0.0;
            for j in 0..k {
                shift += self.b[block * k + j] * sums[j];
            }
            let a = self.a[block];
            for i in self.partition.block_range(block) {
                y[i] = a * x[i] + shift;
            }
        }
        Ok(y)
    }
}

/// `m[i][j] = m[j][i]` for i < j: copies the lower triangle up.
fn symmetrize_lower(k: usize, m: &mut [f64]) {
    for i in 0..k {
        for j in i + 1..k {
            m[i * k + j] = m[j * k + i];
        }
    }
}

/// Determinant by unguarded partial-pivot elimination: an exact zero pivot
/// short-circuits to 0 instead of erroring, since zero is a valid result.
fn det_unguarded(n: usize, m: &[f64]) -> f64 {
    let mut lu = m.to_vec();
    let mut det = 1.0;
    for col in 0..n {
        let mut best = col;
        for row in col + 1..n {
            if lu[row * n + col].abs() > lu[best * n + col].abs() {
                best = row;
            }
        }
        let pivot = lu[best * n + col];
        if pivot == 0.0 {
            return 0.0;
        }
        if best != col {
            for j in 0..n {
                lu.swap(col * n + j, best * n + j);
            }
            det = -det;
        }
        det *= lu[col * n + col];
        for row in col + 1..n {
            let f = lu[row * n + col] / lu[col * n + col];
            for j in col + 1..n {
                lu[row * n + j] -= f * lu[col * n + j];
            }
        }
    }
    det
}

fn expand_coords(a: &[f64], b: &[f64], partition: &Partition) -> DenseMatrix {
    let p = partition.total();
    let k = partition.block_count();
    let mut m = DenseMatrix::zeros(p, p);
    for br in 0..k {
        for bc in 0..k {
            let v = b[br * k + bc];
            for i in partition.block_range(br) {
                for j in partition.block_range(bc) {
                    m[(i, j)] = v;
                }
            }
        }
    }
    for block in 0..k {
        let add = a[block];
        for i in partition.block_range(block) {
            m[(i, i)] += add;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The worked 5x5 instance used throughout the test suite:
    /// p = (2,3), A = diag(1,2), B = ((0.5,0.2),(0.2,0.3)).
    pub(crate) fn worked_instance() -> UbMatrix {
        let p = Partition::new(vec![2, 3]).unwrap();
        UbMatrix::new(vec![1.0, 2.0], vec![0.5, 0.2, 0.2, 0.3], p).unwrap()
    }

    #[test]
    fn addition_of_diagonal_coordinates() {
        let p = Partition::new(vec![2, 3]).unwrap();
        let x = UbMatrix::new(vec![1.0, 2.0], vec![0.0; 4], p.clone()).unwrap();
        let y = UbMatrix::new(vec![1.0, 1.0], vec![0.0; 4], p).unwrap();
        let s = x.add(&y).unwrap();
        assert_eq!(s.a(), &[2.0, 3.0]);
        assert_eq!(s.b(), &[0.0; 4]);
    }

    #[test]
    fn additive_inverse_gives_zero_coordinates() {
        let x = worked_instance();
        let z = x.sub(&x).unwrap();
        assert_eq!(z.a(), &[0.0, 0.0]);
        assert_eq!(z.b(), &[0.0; 4]);
    }

    #[test]
    fn addition_rejects_partition_mismatch() {
        let x = worked_instance();
        let q = Partition::new(vec![3, 2]).unwrap();
        let y = UbMatrix::identity(q);
        assert!(matches!(x.add(&y), Err(Error::PartitionMismatch { .. })));
    }

    #[test]
    fn product_with_identity() {
        let x = worked_instance();
        let id = UbMatrix::identity(x.partition().clone());
        let prod = x.multiply(&id).unwrap();
        assert!(prod.is_symmetric());
        let y = prod.into_symmetric().unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn square_matches_multiply() {
        let x = worked_instance();
        let via_mul = x.multiply(&x).unwrap().into_symmetric().unwrap();
        let via_square = x.square();
        assert_eq!(via_mul.a(), via_square.a());
        for (u, v) in via_mul.b().iter().zip(via_square.b()) {
            assert!((u - v).abs() <= 1e-15 * u.abs().max(1.0));
        }
    }

    #[test]
    fn power_one_is_identity_operation() {
        let x = worked_instance();
        assert_eq!(x.pow(1).unwrap(), x);
        assert!(x.pow(0).is_err());
    }

    #[test]
    fn eigenvalues_of_scalar_matrix() {
        let p = Partition::new(vec![4]).unwrap();
        let x = UbMatrix::new(vec![2.5], vec![0.0], p).unwrap();
        let eigs = x.eigenvalues();
        assert_eq!(eigs, vec![(2.5, 3), (2.5, 1)]);
        let total: usize = eigs.iter().map(|&(_, m)| m).sum();
        assert_eq!(total, 4);
    }

    #[test]
    fn worked_instance_spectrum() {
        let x = worked_instance();
        let delta = x.delta_matrix();
        for (got, want) in delta.entries().iter().zip([2.0, 0.6, 0.4, 2.9]) {
            assert!((got - want).abs() < 1e-15);
        }
        let eigs = x.eigenvalues();
        assert_eq!(eigs[0], (1.0, 1));
        assert_eq!(eigs[1], (2.0, 2));
        assert!((eigs[2].0 - 3.115206734782526).abs() < 1e-12);
        assert!((eigs[3].0 - 1.784793265217474).abs() < 1e-12);
    }

    #[test]
    fn determinant_of_identity_and_worked_instance() {
        let p = Partition::new(vec![3, 2]).unwrap();
        assert_eq!(UbMatrix::identity(p).determinant(), 1.0);
        let x = worked_instance();
        assert!((x.determinant() - 22.24).abs() < 1e-12);
        let (sign, log) = x.sign_log_determinant();
        assert_eq!(sign, 1.0);
        assert!((log - 22.24f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_a_forces_zero_determinant() {
        let p = Partition::new(vec![2, 2]).unwrap();
        let x = UbMatrix::new(vec![0.0, 1.5], vec![0.1, 0.0, 0.0, 0.2], p).unwrap();
        assert_eq!(x.determinant(), 0.0);
        let (sign, log) = x.sign_log_determinant();
        assert_eq!(sign, 0.0);
        assert!(log.is_infinite() && log < 0.0);
    }

    #[test]
    fn inverse_of_block_diagonal() {
        let p = Partition::new(vec![2, 2]).unwrap();
        let x = UbMatrix::new(vec![2.0, 4.0], vec![0.0; 4], p).unwrap();
        let inv = x.inverse().unwrap();
        assert_eq!(inv.a(), &[0.5, 0.25]);
        assert_eq!(inv.b(), &[0.0; 4]);
    }

    #[test]
    fn inverse_of_worked_instance() {
        let x = worked_instance();
        let inv = x.inverse().unwrap();
        assert_eq!(inv.a(), &[1.0, 0.5]);
        let expected = [
            -1.33 / 5.56,
            -0.2 / 5.56,
            -0.2 / 5.56,
            -0.26 / 5.56,
        ];
        for (got, want) in inv.b().iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        // Product with the original expands to the identity.
        let prod = x.multiply(&inv).unwrap();
        let dense = prod.expand();
        assert!(dense.max_abs_diff(&DenseMatrix::identity(5)) < 1e-12);
    }

    #[test]
    fn inverse_rejects_singular_a() {
        let p = Partition::new(vec![2, 2]).unwrap();
        let x = UbMatrix::new(vec![0.0, 1.0], vec![0.0; 4], p).unwrap();
        assert!(matches!(
            x.inverse(),
            Err(Error::Singular { factor: "A", .. })
        ));
    }

    #[test]
    fn positive_definiteness_criterion() {
        let p = Partition::new(vec![2, 2]).unwrap();
        assert!(UbMatrix::identity(p.clone()).is_positive_definite());
        // Delta = ((-0.2, 0), (0, 1)) has a negative eigenvalue.
        let x = UbMatrix::new(vec![1.0, 1.0], vec![-0.6, 0.0, 0.0, 0.0], p.clone()).unwrap();
        assert!(!x.is_positive_definite());
        let y = UbMatrix::new(vec![-1.0, 1.0], vec![0.0; 4], p).unwrap();
        assert!(!y.is_positive_definite());
    }

    #[test]
    fn canonical_form_single_block_is_helmert() {
        let p = Partition::new(vec![4]).unwrap();
        let x = UbMatrix::new(vec![3.0], vec![0.0], p).unwrap();
        let canon = x.canonical_form();
        assert_eq!(canon.diagonal, vec![3.0; 4]);
        let gg = canon
            .gamma
            .matmul(&canon.gamma.transpose())
            .unwrap();
        assert!(gg.max_abs_diff(&DenseMatrix::identity(4)) < 1e-12);
        // Last row is the normalized constant vector; the rows above are the
        // Helmert submatrix.
        for c in 0..4 {
            assert!((canon.gamma[(3, c)] - 0.5).abs() < 1e-12);
        }
        assert!((canon.gamma[(0, 0)] - 1.0 / 2.0f64.sqrt()).abs() < 1e-12);
        assert!((canon.gamma[(0, 1)] + 1.0 / 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn canonical_form_diagonalizes_worked_instance() {
        let x = worked_instance();
        let canon = x.canonical_form();
        let gg = canon.gamma.matmul(&canon.gamma.transpose()).unwrap();
        assert!(gg.max_abs_diff(&DenseMatrix::identity(5)) < 1e-10);
        let gxg = canon
            .gamma
            .matmul(&x.expand())
            .unwrap()
            .matmul(&canon.gamma.transpose())
            .unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j { canon.diagonal[i] } else { 0.0 };
                assert!((gxg[(i, j)] - want).abs() < 1e-10);
            }
        }
        // Delta eigenvalues sit at positions p1-1 and p1+p2-1, decreasing.
        assert!(canon.diagonal[1] > canon.diagonal[4]);
        let total: usize = canon.pairs.iter().map(|&(_, m)| m).sum();
        assert_eq!(total, 5);
    }

    #[test]
    fn correlation_coordinates_worked_case() {
        let p = Partition::new(vec![2, 2]).unwrap();
        let x = UbMatrix::new(vec![3.0, 1.0], vec![1.0, 0.5, 0.5, 1.0], p).unwrap();
        let corr = x.correlation_coordinates().unwrap();
        assert_eq!(corr.a(), &[0.75, 0.5]);
        let expected = [0.25, 0.5 / 8.0f64.sqrt(), 0.5 / 8.0f64.sqrt(), 0.5];
        for (got, want) in corr.b().iter().zip(expected) {
            assert!((got - want).abs() < 1e-15);
        }
        // Expanded correlation matrix has unit diagonal exactly.
        let dense = corr.expand();
        for i in 0..4 {
            assert_eq!(dense[(i, i)], 1.0);
        }
        // A matrix that is already a correlation matrix is unchanged.
        let again = corr.correlation_coordinates().unwrap();
        assert_eq!(again, corr);
    }

    #[test]
    fn correlation_rejects_nonpositive_variance() {
        let p = Partition::new(vec![2, 2]).unwrap();
        let x = UbMatrix::new(vec![1.0, 1.0], vec![-1.0, 0.0, 0.0, 0.0], p).unwrap();
        assert!(x.correlation_coordinates().is_err());
    }

    #[test]
    fn expand_matches_block_layout() {
        let x = worked_instance();
        let m = x.expand();
        // Diagonal block 1: 1.5 on the diagonal, 0.5 off it.
        assert_eq!(m[(0, 0)], 1.5);
        assert_eq!(m[(0, 1)], 0.5);
        // Off-diagonal block: constant 0.2.
        assert_eq!(m[(0, 2)], 0.2);
        assert_eq!(m[(4, 1)], 0.2);
        // Diagonal block 2: 2.3 diagonal, 0.3 off.
        assert_eq!(m[(2, 2)], 2.3);
        assert_eq!(m[(3, 4)], 0.3);
        assert_eq!(m.max_asymmetry(), 0.0);

        let p = Partition::new(vec![2, 3]).unwrap();
        let id = UbMatrix::identity(p);
        assert_eq!(id.expand(), DenseMatrix::identity(5));
    }

    #[test]
    fn compress_detects_perturbation() {
        let x = worked_instance();
        let mut m = x.expand();
        let back = UbMatrix::compress(&m, x.partition()).unwrap();
        assert_eq!(back.b(), x.b());
        // Nudging one entry of the 2x3 off-diagonal block (symmetrically,
        // to pass the symmetry gate) breaks uniformity.
        m[(0, 2)] += 1e-3;
        m[(2, 0)] += 1e-3;
        let err = UbMatrix::compress(&m, x.partition());
        match err {
            Err(Error::StructureViolation {
                deviation,
                tolerance,
                ..
            }) => {
                assert!((deviation - 1e-3).abs() < 1e-12);
                assert!(tolerance < 1e-6);
            }
            other => panic!("expected structure violation, got {other:?}"),
        }
    }

    #[test]
    fn quad_form_and_apply_agree_with_dense() {
        let x = worked_instance();
        let v = [0.3, -1.2, 0.8, 2.0, -0.5];
        let dense = x.expand();
        let dense_apply = dense.matvec(&v).unwrap();
        let fast_apply = x.apply(&v).unwrap();
        for (a, b) in dense_apply.iter().zip(&fast_apply) {
            assert!((a - b).abs() < 1e-12);
        }
        let dense_quad: f64 = v
            .iter()
            .zip(&dense_apply)
            .map(|(&vi, &mi)| vi * mi)
            .sum();
        assert!((x.quad_form(&v).unwrap() - dense_quad).abs() < 1e-12);
    }

    #[test]
    fn noncommuting_product_is_flagged() {
        let p = Partition::new(vec![2, 2]).unwrap();
        let x = UbMatrix::new(vec![1.0, 2.0], vec![0.4, 0.1, 0.1, 0.2], p.clone()).unwrap();
        let y = UbMatrix::new(vec![2.0, 1.0], vec![0.0, 0.3, 0.3, 0.1], p).unwrap();
        let prod = x.multiply(&y).unwrap();
        assert!(!prod.is_symmetric());
        assert!(prod.clone().into_symmetric().is_err());
        // The raw coordinates still expand to the true dense product.
        let dense = x.expand().matmul(&y.expand()).unwrap();
        assert!(prod.expand().max_abs_diff(&dense) < 1e-12);
    }

    #[test]
    fn commuting_product_expands_correctly() {
        let x = worked_instance();
        let x2 = x.square();
        let prod = x.multiply(&x2).unwrap();
        assert!(prod.is_symmetric());
        let dense = x.expand().matmul(&x2.expand()).unwrap();
        assert!(prod.expand().max_abs_diff(&dense) < 1e-10);
    }
}
