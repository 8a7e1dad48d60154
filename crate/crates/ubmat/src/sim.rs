//! Multivariate normal sampling with uniform-block covariance, plus the
//! Monte Carlo harnesses for type-I error and power studies.
//!
//! Sampling uses the canonical form as the square-root device: with
//! `Gamma N Gamma^T = diag(lambda)`, the factor `N^{1/2} = Gamma^T
//! diag(sqrt(lambda)) Gamma` splits into within-block centering pieces
//! scaled by `sqrt(a_kk)` and a K-dimensional rotation through the Delta
//! eigenvectors, so one draw costs O(p + K^2) and no p x p factor ever
//! exists.
//!
//! Determinism: replicate `r` of a study always consumes the stream
//! `(seed, domain, r)`, and aggregation is pure counting, so results are
//! bit-identical across runs and thread counts.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimate::Dataset;
use crate::infer::{
    m_sample_null_law, m_sample_statistic, noncentrality_parameters, one_sample_noncentral_law,
    one_sample_null_law, one_sample_statistic, LawSample,
};
use crate::rng::{Draws, DOMAIN_DATA, DOMAIN_DATASET, DOMAIN_PREDICTION};
use crate::ub::UbMatrix;

/// The O(p + K^2) square-root factor of an SPD uniform-block matrix.
pub struct UbSqrtFactor {
    sigma: UbMatrix,
    sqrt_a: Vec<f64>,
    /// Row k is the Delta eigenvector xi_k (P-orthonormal scaling).
    xi: Vec<f64>,
    sqrt_lambda: Vec<f64>,
}

impl UbSqrtFactor {
    pub fn new(sigma: &UbMatrix) -> Result<Self> {
        if let Err((min_a, min_delta_eig)) = sigma.pd_margins(&Default::default()) {
            return Err(Error::NotPositiveDefinite {
                min_a,
                min_delta_eig,
            });
        }
        let (lambdas, xi) = sigma.delta_matrix().eigen_xi();
        Ok(Self {
            sigma: sigma.clone(),
            sqrt_a: sigma.a().iter().map(|&a| a.sqrt()).collect(),
            xi,
            sqrt_lambda: lambdas.iter().map(|&l| l.sqrt()).collect(),
        })
    }

    /// Applies `N^{1/2}` to `z` in place: center each block, scale by
    /// sqrt(a_kk), then add back the rotated block-sum component.
    pub fn apply_in_place(&self, z: &mut [f64]) {
        let partition = self.sigma.partition();
        let k = partition.block_count();
        let mut sums = vec![0.0; k];
        for (block, slice) in partition.blocks(z).enumerate() {
            sums[block] = slice.iter().sum();
        }
        // t = Xi * s, then c = Xi^T diag(sqrt(lambda)) t.
        let mut shift = vec![0.0; k];
        for row in 0..k {
            let mut t = 0.0;
            for col in 0..k {
                t += self.xi[row * k + col] * sums[col];
            }
            let scaled = self.sqrt_lambda[row] * t;
            for col in 0..k {
                shift[col] += scaled * self.xi[row * k + col];
            }
        }
        for block in 0..k {
            let mean = sums[block] / partition.size(block) as f64;
            let sa = self.sqrt_a[block];
            let c = shift[block];
            for i in partition.block_range(block) {
                z[i] = sa * (z[i] - mean) + c;
            }
        }
    }
}

/// Draws `n` i.i.d. rows from `N(mu, sigma)` on the stream
/// `(seed, dataset domain, 0)`.
pub fn sample_ub_normal(
    sigma: &UbMatrix,
    mu: &[f64],
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    let p = sigma.dim();
    if mu.len() != p {
        return Err(Error::DimensionMismatch {
            what: "mean vector",
            expected: p,
            actual: mu.len(),
        });
    }
    let factor = UbSqrtFactor::new(sigma)?;
    let mut draws = Draws::new(seed, DOMAIN_DATASET, 0);
    let mut data = vec![0.0; n * p];
    for row in data.chunks_exact_mut(p) {
        draws.fill_normal(row);
        factor.apply_in_place(row);
        for (v, &m) in row.iter_mut().zip(mu) {
            *v += m;
        }
    }
    Dataset::new(data, sigma.partition().clone())
}

/// Mean configuration of a simulation plan.
#[derive(Debug, Clone)]
pub enum MeanSpec {
    OneSample { mu: Vec<f64>, n: usize },
    MultiSample { means: Vec<Vec<f64>>, sizes: Vec<usize> },
}

/// A reproducible Monte Carlo study configuration.
#[derive(Debug, Clone)]
pub struct SimulationPlan {
    pub sigma: UbMatrix,
    pub mean: MeanSpec,
    /// Hypothesized one-sample mean; defaults to `mu` (a null plan).
    pub mu0: Option<Vec<f64>>,
    pub alpha: f64,
    /// Data replicates.
    pub replicates: usize,
    /// Draws used for the null-law critical value (and power prediction).
    pub law_replicates: usize,
    pub seed: u64,
}

impl SimulationPlan {
    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be in (0,1), got {}",
                self.alpha
            )));
        }
        if self.replicates == 0 || self.law_replicates == 0 {
            return Err(Error::InvalidParameter(
                "replicates and law_replicates must be >= 1".into(),
            ));
        }
        let p = self.sigma.dim();
        match &self.mean {
            MeanSpec::OneSample { mu, n } => {
                if mu.len() != p {
                    return Err(Error::DimensionMismatch {
                        what: "plan mu",
                        expected: p,
                        actual: mu.len(),
                    });
                }
                if *n < 2 {
                    return Err(Error::InsufficientSample { n: *n, required: 1 });
                }
                if let Some(mu0) = &self.mu0 {
                    if mu0.len() != p {
                        return Err(Error::DimensionMismatch {
                            what: "plan mu0",
                            expected: p,
                            actual: mu0.len(),
                        });
                    }
                }
            }
            MeanSpec::MultiSample { means, sizes } => {
                if means.len() != sizes.len() || means.len() < 2 {
                    return Err(Error::InvalidGrouping(format!(
                        "{} group means for {} group sizes",
                        means.len(),
                        sizes.len()
                    )));
                }
                for mu in means {
                    if mu.len() != p {
                        return Err(Error::DimensionMismatch {
                            what: "plan group mean",
                            expected: p,
                            actual: mu.len(),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Outcome of a type-I error study.
#[derive(Debug, Clone, Serialize)]
pub struct Type1Study {
    pub rejection_rate: f64,
    /// Binomial standard error of the rate.
    pub standard_error: f64,
    /// rate +- 1.96 standard errors.
    pub confidence_interval: (f64, f64),
    pub rejections: usize,
    pub replicates: usize,
    pub critical_value: f64,
    pub alpha: f64,
    pub law_replicates: usize,
    pub seed: u64,
    /// Per-replicate statistics (not serialized; written as CSV on demand).
    #[serde(skip)]
    pub statistics: Vec<f64>,
}

/// Outcome of a power study with its noncentral-mixture prediction.
#[derive(Debug, Clone, Serialize)]
pub struct PowerStudy {
    pub empirical_power: f64,
    pub empirical_se: f64,
    pub predicted_power: f64,
    pub predicted_se: f64,
    pub critical_value: f64,
    /// The K+1 noncentrality parameters behind the prediction.
    pub noncentrality: Vec<f64>,
    pub replicates: usize,
    pub law_replicates: usize,
    pub alpha: f64,
    pub seed: u64,
    #[serde(skip)]
    pub statistics: Vec<f64>,
}

/// Empirical rejection rate under the null at the Monte Carlo critical
/// value. The plan must actually be a null plan: `mu == mu0`, or all group
/// means equal.
pub fn run_type1_study(plan: &SimulationPlan) -> Result<Type1Study> {
    plan.validate()?;
    let statistics = match &plan.mean {
        MeanSpec::OneSample { mu, n } => {
            if let Some(mu0) = &plan.mu0 {
                if mu0 != mu {
                    return Err(Error::InvalidParameter(
                        "type-1 study requires mu == mu0".into(),
                    ));
                }
            }
            one_sample_statistics(plan, mu, mu, *n)?
        }
        MeanSpec::MultiSample { means, sizes } => {
            if means.windows(2).any(|w| w[0] != w[1]) {
                return Err(Error::InvalidParameter(
                    "type-1 study requires equal group means".into(),
                ));
            }
            m_sample_statistics(plan, means, sizes)?
        }
    };
    let critical_value = null_critical_value(plan)?;
    let rejections = statistics.iter().filter(|&&s| s > critical_value).count();
    let rate = rejections as f64 / plan.replicates as f64;
    let se = (rate * (1.0 - rate) / plan.replicates as f64).sqrt();
    Ok(Type1Study {
        rejection_rate: rate,
        standard_error: se,
        confidence_interval: (rate - 1.96 * se, rate + 1.96 * se),
        rejections,
        replicates: plan.replicates,
        critical_value,
        alpha: plan.alpha,
        law_replicates: plan.law_replicates,
        seed: plan.seed,
        statistics,
    })
}

/// Empirical power under a mean shift, with the independent prediction from
/// sampling the noncentral mixture built from the true noncentralities.
/// One-sample plans only.
pub fn run_power_study(plan: &SimulationPlan) -> Result<PowerStudy> {
    plan.validate()?;
    let (mu, n) = match &plan.mean {
        MeanSpec::OneSample { mu, n } => (mu, *n),
        MeanSpec::MultiSample { .. } => {
            return Err(Error::InvalidParameter(
                "power studies are defined for one-sample plans".into(),
            ))
        }
    };
    let mu0 = plan.mu0.clone().unwrap_or_else(|| mu.clone());
    let critical_value = null_critical_value(plan)?;
    let statistics = one_sample_statistics(plan, mu, &mu0, n)?;
    let rejections = statistics.iter().filter(|&&s| s > critical_value).count();
    let empirical_power = rejections as f64 / plan.replicates as f64;
    let empirical_se =
        (empirical_power * (1.0 - empirical_power) / plan.replicates as f64).sqrt();

    let noncentrality = noncentrality_parameters(mu, &mu0, &plan.sigma, n)?;
    let noncentral_law =
        one_sample_noncentral_law(plan.sigma.partition(), n, &noncentrality)?;
    let prediction = LawSample::collect_domain(
        &noncentral_law,
        plan.law_replicates,
        plan.seed,
        DOMAIN_PREDICTION,
    )?;
    let exceed = prediction
        .values()
        .iter()
        .filter(|&&v| v > critical_value)
        .count();
    let predicted_power = exceed as f64 / plan.law_replicates as f64;
    let predicted_se =
        (predicted_power * (1.0 - predicted_power) / plan.law_replicates as f64).sqrt();
    Ok(PowerStudy {
        empirical_power,
        empirical_se,
        predicted_power,
        predicted_se,
        critical_value,
        noncentrality,
        replicates: plan.replicates,
        law_replicates: plan.law_replicates,
        alpha: plan.alpha,
        seed: plan.seed,
        statistics,
    })
}

fn null_critical_value(plan: &SimulationPlan) -> Result<f64> {
    let partition = plan.sigma.partition();
    let quantile = match &plan.mean {
        MeanSpec::OneSample { n, .. } => {
            let law = one_sample_null_law(partition, *n)?;
            LawSample::collect(&law, plan.law_replicates, plan.seed)?
                .upper_quantile(plan.alpha)?
        }
        MeanSpec::MultiSample { sizes, .. } => {
            let law = m_sample_null_law(partition, sizes)?;
            LawSample::collect(&law, plan.law_replicates, plan.seed)?
                .upper_quantile(plan.alpha)?
        }
    };
    Ok(quantile.value)
}

/// Per-replicate one-sample statistics; replicate r draws its data from the
/// stream `(seed, data domain, r)`.
fn one_sample_statistics(
    plan: &SimulationPlan,
    mu: &[f64],
    mu0: &[f64],
    n: usize,
) -> Result<Vec<f64>> {
    let sigma = &plan.sigma;
    let factor = UbSqrtFactor::new(sigma)?;
    let p = sigma.dim();
    (0..plan.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut draws = Draws::new(plan.seed, DOMAIN_DATA, r);
            let mut data = vec![0.0; n * p];
            for row in data.chunks_exact_mut(p) {
                draws.fill_normal(row);
                factor.apply_in_place(row);
                for (v, &m) in row.iter_mut().zip(mu) {
                    *v += m;
                }
            }
            let d = Dataset::new(data, sigma.partition().clone())?;
            Ok(one_sample_statistic(&d, mu0)?.statistic)
        })
        .collect()
}

fn m_sample_statistics(
    plan: &SimulationPlan,
    means: &[Vec<f64>],
    sizes: &[usize],
) -> Result<Vec<f64>> {
    let sigma = &plan.sigma;
    let factor = UbSqrtFactor::new(sigma)?;
    let p = sigma.dim();
    let total: usize = sizes.iter().sum();
    let labels: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(g, &s)| std::iter::repeat(g).take(s))
        .collect();
    (0..plan.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut draws = Draws::new(plan.seed, DOMAIN_DATA, r);
            let mut data = vec![0.0; total * p];
            for (row, &g) in data.chunks_exact_mut(p).zip(&labels) {
                draws.fill_normal(row);
                factor.apply_in_place(row);
                for (v, &m) in row.iter_mut().zip(&means[g]) {
                    *v += m;
                }
            }
            let d = Dataset::new(data, sigma.partition().clone())?
                .with_groups(labels.clone())?;
            Ok(m_sample_statistic(&d)?.statistic)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::Partition;

    fn spd_sigma() -> UbMatrix {
        let p = Partition::new(vec![2, 3]).unwrap();
        UbMatrix::new(vec![1.0, 2.0], vec![0.5, 0.2, 0.2, 0.3], p).unwrap()
    }

    #[test]
    fn sqrt_factor_squares_back_to_sigma() {
        let sigma = spd_sigma();
        let factor = UbSqrtFactor::new(&sigma).unwrap();
        // Apply the factor to unit vectors to materialize N^{1/2}, then
        // square it densely.
        let p = sigma.dim();
        let mut half = crate::dense::DenseMatrix::zeros(p, p);
        for col in 0..p {
            let mut e = vec![0.0; p];
            e[col] = 1.0;
            factor.apply_in_place(&mut e);
            for row in 0..p {
                half[(row, col)] = e[row];
            }
        }
        let squared = half.matmul(&half).unwrap();
        assert!(squared.max_abs_diff(&sigma.expand()) < 1e-12);
    }

    #[test]
    fn sqrt_factor_rejects_indefinite() {
        let p = Partition::new(vec![2, 2]).unwrap();
        let bad = UbMatrix::new(vec![1.0, 1.0], vec![-0.6, 0.0, 0.0, 0.0], p).unwrap();
        assert!(UbSqrtFactor::new(&bad).is_err());
    }

    #[test]
    fn identity_sigma_draws_standard_normals() {
        let p = Partition::new(vec![2, 2]).unwrap();
        let sigma = UbMatrix::identity(p);
        let d = sample_ub_normal(&sigma, &[0.0; 4], 50_000, 9).unwrap();
        let s = crate::estimate::sample_moments(&d).unwrap();
        for v in &s.mean {
            assert!(v.abs() < 0.02, "mean {v}");
        }
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((s.cov[(i, j)] - want).abs() < 0.03);
            }
        }
    }

    #[test]
    fn degenerate_single_replicate_rate_is_zero_or_one() {
        let sigma = spd_sigma();
        let plan = SimulationPlan {
            sigma: sigma.clone(),
            mean: MeanSpec::OneSample {
                mu: vec![0.0; 5],
                n: 20,
            },
            mu0: None,
            alpha: 0.05,
            replicates: 1,
            law_replicates: 2_000,
            seed: 3,
        };
        let study = run_type1_study(&plan).unwrap();
        assert!(study.rejection_rate == 0.0 || study.rejection_rate == 1.0);
    }

    #[test]
    fn type1_study_is_thread_count_invariant() {
        let sigma = spd_sigma();
        let plan = SimulationPlan {
            sigma,
            mean: MeanSpec::OneSample {
                mu: vec![0.1; 5],
                n: 25,
            },
            mu0: Some(vec![0.1; 5]),
            alpha: 0.05,
            replicates: 400,
            law_replicates: 5_000,
            seed: 17,
        };
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_type1_study(&plan))
            .unwrap();
        let multi = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| run_type1_study(&plan))
            .unwrap();
        assert_eq!(single.rejection_rate, multi.rejection_rate);
        assert_eq!(single.critical_value, multi.critical_value);
        assert_eq!(single.statistics, multi.statistics);
    }

    #[test]
    fn power_with_equal_means_reduces_to_alpha() {
        let sigma = spd_sigma();
        let plan = SimulationPlan {
            sigma,
            mean: MeanSpec::OneSample {
                mu: vec![0.0; 5],
                n: 30,
            },
            mu0: Some(vec![0.0; 5]),
            alpha: 0.05,
            replicates: 2_000,
            law_replicates: 50_000,
            seed: 23,
        };
        let study = run_power_study(&plan).unwrap();
        assert!(study.noncentrality.iter().all(|&d| d == 0.0));
        assert!((study.empirical_power - 0.05).abs() < 0.02);
        assert!((study.predicted_power - 0.05).abs() < 0.01);
    }
}
