//! Sample moments and the closed-form best unbiased coordinate estimators.
//!
//! Given i.i.d. rows with a uniform-block covariance, the coordinates are
//! estimated by block averages of the (pooled) unbiased sample covariance:
//!
//! ```text
//! a_hat_kk  = (p_k tr(S_kk) - sum(S_kk)) / (p_k (p_k - 1))
//! b_hat_kk  = (sum(S_kk) - tr(S_kk)) / (p_k (p_k - 1))
//! b_hat_kk' = sum(S_kk') / (p_k p_k')            for k != k'
//! ```
//!
//! With grouped data the covariance is pooled: each observation is centered
//! on its own group mean and the divisor is n - M.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::ub::{Tolerances, UbMatrix};

/// An n x p data matrix (rows are observations) with its block partition and
/// optional group labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    data: Vec<f64>,
    n: usize,
    p: usize,
    partition: Partition,
    groups: Option<Groups>,
}

/// Group labels for multi-sample data: consecutive ids `0..group_count`.
#[derive(Debug, Clone)]
pub struct Groups {
    labels: Vec<usize>,
    sizes: Vec<usize>,
}

impl Groups {
    /// Validates labels: ids must cover `0..M` with every group nonempty.
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        let m = match labels.iter().max() {
            Some(&max) => max + 1,
            None => return Err(Error::InvalidGrouping("no labels".into())),
        };
        let mut sizes = vec![0usize; m];
        for &g in &labels {
            sizes[g] += 1;
        }
        if let Some(empty) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidGrouping(format!(
                "group {empty} has no observations"
            )));
        }
        Ok(Self { labels, sizes })
    }

    pub fn group_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }
}

impl Dataset {
    /// Wraps row-major data; the length must be a multiple of the partition
    /// total and hold at least two rows.
    pub fn new(data: Vec<f64>, partition: Partition) -> Result<Self> {
        let p = partition.total();
        if p == 0 || data.len() % p != 0 {
            return Err(Error::DimensionMismatch {
                what: "dataset entries",
                expected: p,
                actual: data.len(),
            });
        }
        let n = data.len() / p;
        if n < 2 {
            return Err(Error::InsufficientSample { n, required: 1 });
        }
        Ok(Self {
            data,
            n,
            p,
            partition,
            groups: None,
        })
    }

    /// Attaches group labels (one per row).
    pub fn with_groups(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::InvalidGrouping(format!(
                "{} labels for {} rows",
                labels.len(),
                self.n
            )));
        }
        self.groups = Some(Groups::new(labels)?);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n).map(move |i| self.row(i))
    }

    pub fn groups(&self) -> Option<&Groups> {
        self.groups.as_ref()
    }
}

/// Sample mean(s) and the unbiased (pooled) covariance matrix.
#[derive(Debug, Clone)]
pub struct SampleMoments {
    /// Grand mean (weighted by group sizes when grouped).
    pub mean: Vec<f64>,
    /// Per-group means, present for grouped data.
    pub group_means: Option<Vec<Vec<f64>>>,
    pub group_sizes: Option<Vec<usize>>,
    /// Unbiased covariance: divisor n-1, or n-M with within-group centering.
    pub cov: DenseMatrix,
    /// The divisor used (n-1 or n-M).
    pub df: usize,
    pub n: usize,
}

/// Two-pass mean-then-center moments. Ungrouped data needs n >= 2, grouped
/// data n > M.
pub fn sample_moments(d: &Dataset) -> Result<SampleMoments> {
    let n = d.n();
    let p = d.p();
    match d.groups() {
        None => {
            let mean = column_means(d.rows(), n, p);
            let mut cov = DenseMatrix::zeros(p, p);
            for row in d.rows() {
                accumulate_centered(&mut cov, row, &mean);
            }
            finish_cov(&mut cov, n - 1);
            Ok(SampleMoments {
                mean,
                group_means: None,
                group_sizes: None,
                cov,
                df: n - 1,
                n,
            })
        }
        Some(groups) => {
            let m = groups.group_count();
            if n <= m {
                return Err(Error::InsufficientSample { n, required: m });
            }
            let mut group_means = vec![vec![0.0; p]; m];
            for (row, &g) in d.rows().zip(groups.labels()) {
                for (acc, &v) in group_means[g].iter_mut().zip(row) {
                    *acc += v;
                }
            }
            for (mean, &size) in group_means.iter_mut().zip(groups.sizes()) {
                for v in mean.iter_mut() {
                    *v /= size as f64;
                }
            }
            // Grand mean as the size-weighted combination of group means.
            let mut mean = vec![0.0; p];
            for (gm, &size) in group_means.iter().zip(groups.sizes()) {
                for (acc, &v) in mean.iter_mut().zip(gm) {
                    *acc += size as f64 * v;
                }
            }
            for v in mean.iter_mut() {
                *v /= n as f64;
            }
            let mut cov = DenseMatrix::zeros(p, p);
            for (row, &g) in d.rows().zip(groups.labels()) {
                accumulate_centered(&mut cov, row, &group_means[g]);
            }
            finish_cov(&mut cov, n - m);
            Ok(SampleMoments {
                mean,
                group_means: Some(group_means),
                group_sizes: Some(groups.sizes().to_vec()),
                cov,
                df: n - m,
                n,
            })
        }
    }
}

fn column_means<'a>(rows: impl Iterator<Item = &'a [f64]>, n: usize, p: usize) -> Vec<f64> {
    let mut mean = vec![0.0; p];
    for row in rows {
        for (acc, &v) in mean.iter_mut().zip(row) {
            *acc += v;
        }
    }
    for v in mean.iter_mut() {
        *v /= n as f64;
    }
    mean
}

/// Adds the upper triangle of (row-center)(row-center)^T.
fn accumulate_centered(cov: &mut DenseMatrix, row: &[f64], center: &[f64]) {
    let p = row.len();
    for i in 0..p {
        let di = row[i] - center[i];
        for j in i..p {
            cov[(i, j)] += di * (row[j] - center[j]);
        }
    }
}

/// Divides the upper triangle by `df` and mirrors it down, so the stored
/// covariance is exactly symmetric.
fn finish_cov(cov: &mut DenseMatrix, df: usize) {
    let p = cov.rows();
    let inv = 1.0 / df as f64;
    for i in 0..p {
        for j in i..p {
            let v = cov[(i, j)] * inv;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
}

/// Number of free covariance parameters: K diagonal plus K(K+1)/2 in B.
pub fn parameter_count(partition: &Partition) -> usize {
    let k = partition.block_count();
    k + (k + 1) * k / 2
}

/// Best unbiased coordinate estimators from sample moments, enforcing the
/// sample-size condition `n > K + (K+1)K/2`.
pub fn estimate_coordinates(s: &SampleMoments, partition: &Partition) -> Result<UbMatrix> {
    let required = parameter_count(partition);
    if s.n <= required {
        return Err(Error::InsufficientSample {
            n: s.n,
            required,
        });
    }
    coordinates_from_cov(&s.cov, partition)
}

/// Escape hatch: the block-average formulas are well defined for any sample
/// that yields a covariance, even below the recommended size.
pub fn estimate_coordinates_allow_small_n(
    s: &SampleMoments,
    partition: &Partition,
) -> Result<UbMatrix> {
    coordinates_from_cov(&s.cov, partition)
}

/// Block-average projection of an arbitrary covariance matrix onto
/// uniform-block coordinates. Linear in its input.
pub fn coordinates_from_cov(cov: &DenseMatrix, partition: &Partition) -> Result<UbMatrix> {
    let p = partition.total();
    if cov.rows() != p || cov.cols() != p {
        return Err(Error::DimensionMismatch {
            what: "covariance matrix",
            expected: p,
            actual: cov.rows(),
        });
    }
    let k = partition.block_count();
    let mut a = vec![0.0; k];
    let mut b = vec![0.0; k * k];
    for br in 0..k {
        let rows = partition.block_range(br);
        let pk = partition.size(br) as f64;
        let mut trace = 0.0;
        let mut total = 0.0;
        for i in rows.clone() {
            trace += cov[(i, i)];
            for j in rows.clone() {
                total += cov[(i, j)];
            }
        }
        let denom = pk * (pk - 1.0);
        a[br] = (pk * trace - total) / denom;
        b[br * k + br] = (total - trace) / denom;
        for bc in br + 1..k {
            let cols = partition.block_range(bc);
            let mut sum = 0.0;
            for i in rows.clone() {
                for j in cols.clone() {
                    sum += cov[(i, j)];
                }
            }
            let v = sum / (pk * partition.size(bc) as f64);
            b[br * k + bc] = v;
            b[bc * k + br] = v;
        }
    }
    UbMatrix::new(a, b, partition.clone())
}

/// Plug-in precision coordinates from estimated covariance coordinates,
/// validating positive definiteness first.
pub fn estimate_precision(est: &UbMatrix) -> Result<UbMatrix> {
    estimate_precision_with(est, &Tolerances::default())
}

pub fn estimate_precision_with(est: &UbMatrix, tol: &Tolerances) -> Result<UbMatrix> {
    match est.pd_margins(tol) {
        Ok(_) => est.inverse_with(tol),
        Err((min_a, min_delta_eig)) => Err(Error::EstimateNotPositiveDefinite {
            min_a,
            min_delta_eig,
        }),
    }
}
