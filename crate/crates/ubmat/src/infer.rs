//! Geisser's information statistics for uniform-block covariances.
//!
//! The one-sample statistic is the quadratic form of the mean deviation in
//! the plug-in precision matrix,
//! `U = n (xbar - mu0)^T Theta_hat (xbar - mu0)`, and its exact null law is
//! a linear combination of K+1 mutually independent F-variates: one per
//! block from the within-block centered part, plus a Hotelling T^2 term on
//! the block averages. The M-sample statistic sums the same form over group
//! mean deviations; its null law trades the T^2 term for a Hotelling-Lawley
//! trace, which has no closed-form law and is evaluated by Monte Carlo on
//! the reduced K-dimensional problem.
//!
//! Everything is computed in coordinates. The decomposition into components
//! rests on the identity `(A P)^{-1} - Delta^{-1} B A^{-1} = (P Delta)^{-1}`,
//! which splits the precision matrix into within-block centering pieces and
//! a block-average piece.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{estimate_coordinates, estimate_precision, sample_moments, Dataset};
use crate::kmat;
use crate::partition::Partition;
use crate::rng::{Draws, DOMAIN_LAW};
use crate::special::{f_cdf, f_quantile};
use crate::ub::UbMatrix;

/// One scaled F-variate in a mixture: `coefficient * F(df1, df2, lambda)`.
///
/// `noncentrality` is the conventional lambda (the numerator chi-square has
/// mean df1 + lambda and arises from a Poisson(lambda/2) mixture).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FTerm {
    pub coefficient: f64,
    pub df1: f64,
    pub df2: f64,
    pub noncentrality: f64,
}

impl FTerm {
    fn mean(&self) -> f64 {
        if self.df2 <= 2.0 {
            return f64::INFINITY;
        }
        self.coefficient * (self.df2 / (self.df2 - 2.0)) * (self.df1 + self.noncentrality)
            / self.df1
    }

    fn variance(&self) -> f64 {
        if self.df2 <= 4.0 {
            return f64::INFINITY;
        }
        let (d1, d2, l) = (self.df1, self.df2, self.noncentrality);
        let num = 2.0 * ((d1 + l) * (d1 + l) + (d1 + 2.0 * l) * (d2 - 2.0));
        let scale = (d2 / d1) * (d2 / d1);
        self.coefficient * self.coefficient * scale * num
            / ((d2 - 2.0) * (d2 - 2.0) * (d2 - 4.0))
    }
}

/// A finite mixture (linear combination) of independent F-variates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FMixture {
    pub terms: Vec<FTerm>,
}

impl FMixture {
    pub fn new(terms: Vec<FTerm>) -> Result<Self> {
        for t in &terms {
            if !(t.df1 > 0.0 && t.df2 > 0.0) || t.noncentrality < 0.0 || !t.coefficient.is_finite()
            {
                return Err(Error::InvalidParameter(format!(
                    "invalid mixture term {t:?}"
                )));
            }
        }
        Ok(Self { terms })
    }

    /// Analytic mean: sum of `coef * df2/(df2-2) * (df1+lambda)/df1`.
    pub fn mean(&self) -> f64 {
        self.terms.iter().map(FTerm::mean).sum()
    }

    /// Analytic variance; infinite unless every df2 > 4.
    pub fn variance(&self) -> f64 {
        self.terms.iter().map(FTerm::variance).sum()
    }

    /// Total numerator degrees of freedom; equals p for the one-sample law.
    pub fn total_df1(&self) -> f64 {
        self.terms.iter().map(|t| t.df1).sum()
    }
}

/// Anything we can draw a scalar law value from.
pub trait LawSampler: Sync {
    fn draw(&self, draws: &mut Draws) -> f64;
}

impl LawSampler for FMixture {
    fn draw(&self, draws: &mut Draws) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coefficient * draws.f_variate(t.df1, t.df2, t.noncentrality))
            .sum()
    }
}

/// Monte Carlo draws of a law, one deterministic stream per replicate, so
/// the result is identical for any thread count.
pub fn sample_law<L: LawSampler>(law: &L, replicates: usize, seed: u64) -> Vec<f64> {
    sample_law_domain(law, replicates, seed, DOMAIN_LAW)
}

pub(crate) fn sample_law_domain<L: LawSampler>(
    law: &L,
    replicates: usize,
    seed: u64,
    domain: u64,
) -> Vec<f64> {
    (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut draws = Draws::new(seed, domain, r);
            law.draw(&mut draws)
        })
        .collect()
}

/// An upper quantile estimated from Monte Carlo draws, with an order-statistic
/// bracket from the binomial count fluctuation (roughly two standard errors).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuantileEstimate {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

/// A sorted Monte Carlo sample of a law, reusable for quantiles and
/// p-values.
#[derive(Debug, Clone)]
pub struct LawSample {
    sorted: Vec<f64>,
}

impl LawSample {
    pub fn collect<L: LawSampler>(law: &L, replicates: usize, seed: u64) -> Result<Self> {
        Self::collect_domain(law, replicates, seed, DOMAIN_LAW)
    }

    pub(crate) fn collect_domain<L: LawSampler>(
        law: &L,
        replicates: usize,
        seed: u64,
        domain: u64,
    ) -> Result<Self> {
        if replicates == 0 {
            return Err(Error::InvalidParameter("replicates must be >= 1".into()));
        }
        let mut sorted = sample_law_domain(law, replicates, seed, domain);
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("law draws are finite"));
        Ok(Self { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.sorted.len() as f64
    }

    /// Upper-alpha quantile: the order statistic at index
    /// `ceil((1 - alpha) * R)` (1-based).
    pub fn upper_quantile(&self, alpha: f64) -> Result<QuantileEstimate> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be in (0,1), got {alpha}"
            )));
        }
        let r = self.sorted.len();
        let rank = ((1.0 - alpha) * r as f64).ceil() as usize;
        let idx = rank.clamp(1, r) - 1;
        let spread = 2.0 * (r as f64 * alpha * (1.0 - alpha)).sqrt();
        let lo = idx.saturating_sub(spread.ceil() as usize);
        let hi = (idx + spread.ceil() as usize).min(r - 1);
        Ok(QuantileEstimate {
            value: self.sorted[idx],
            lower: self.sorted[lo],
            upper: self.sorted[hi],
        })
    }

    /// Tail fraction with add-one smoothing: `(#draws >= observed + 1)/(R + 1)`,
    /// strictly positive by construction.
    pub fn p_value(&self, observed: f64) -> Result<f64> {
        if !(observed >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "observed statistic must be nonnegative, got {observed}"
            )));
        }
        let below = self.sorted.partition_point(|&v| v < observed);
        let exceed = self.sorted.len() - below;
        Ok((exceed as f64 + 1.0) / (self.sorted.len() as f64 + 1.0))
    }
}

/// Draws from the law (spec surface; `LawSample` is the reusable form).
pub fn mixture_sample(law: &FMixture, replicates: usize, seed: u64) -> Vec<f64> {
    sample_law(law, replicates, seed)
}

/// Upper-alpha Monte Carlo quantile of a mixture.
pub fn mixture_quantile(
    law: &FMixture,
    alpha: f64,
    replicates: usize,
    seed: u64,
) -> Result<QuantileEstimate> {
    LawSample::collect(law, replicates, seed)?.upper_quantile(alpha)
}

/// Monte Carlo p-value for an observed statistic under a mixture law.
pub fn p_value(law: &FMixture, observed: f64, replicates: usize, seed: u64) -> Result<f64> {
    LawSample::collect(law, replicates, seed)?.p_value(observed)
}

/// Exact null law of the one-sample statistic:
/// `sum_k (p_k - 1) F_{(p_k-1), (p_k-1)(n-1)}` plus the Hotelling term
/// `K(n-1)/(n-K) F_{K, n-K}`.
pub fn one_sample_null_law(partition: &Partition, n: usize) -> Result<FMixture> {
    one_sample_law_with_noncentrality(partition, n, None)
}

/// Non-null law: same mixture with noncentral numerators. `deltas` are the
/// K+1 noncentrality parameters as returned by
/// [`noncentrality_parameters`] (Poisson-rate convention, so each lambda is
/// `2 * delta`).
pub fn one_sample_noncentral_law(
    partition: &Partition,
    n: usize,
    deltas: &[f64],
) -> Result<FMixture> {
    let k = partition.block_count();
    if deltas.len() != k + 1 {
        return Err(Error::DimensionMismatch {
            what: "noncentrality parameters",
            expected: k + 1,
            actual: deltas.len(),
        });
    }
    one_sample_law_with_noncentrality(partition, n, Some(deltas))
}

fn one_sample_law_with_noncentrality(
    partition: &Partition,
    n: usize,
    deltas: Option<&[f64]>,
) -> Result<FMixture> {
    let k = partition.block_count();
    if n < 2 || n <= k {
        return Err(Error::InsufficientSample {
            n,
            required: k.max(1),
        });
    }
    let nf = n as f64;
    let mut terms = Vec::with_capacity(k + 1);
    for (idx, &pk) in partition.sizes().iter().enumerate() {
        let d1 = (pk - 1) as f64;
        terms.push(FTerm {
            coefficient: d1,
            df1: d1,
            df2: d1 * (nf - 1.0),
            noncentrality: deltas.map_or(0.0, |d| 2.0 * d[idx]),
        });
    }
    let kf = k as f64;
    terms.push(FTerm {
        coefficient: kf * (nf - 1.0) / (nf - kf),
        df1: kf,
        df2: nf - kf,
        noncentrality: deltas.map_or(0.0, |d| 2.0 * d[k]),
    });
    FMixture::new(terms)
}

/// Specification of the Hotelling-Lawley trace component of the M-sample
/// law: the trace statistic on the K block averages with M groups and
/// pooled error degrees of freedom n - M. Its exact null law is intractable;
/// it is drawn by Monte Carlo (Bartlett-decomposed Wishart against M - 1
/// standard normal contrasts).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HotellingT0Spec {
    pub dimension: usize,
    pub groups: usize,
    pub error_df: usize,
}

impl HotellingT0Spec {
    /// One Monte Carlo draw of T0^2 = error_df * sum_j ||T^{-1} z_j||^2.
    pub fn draw(&self, draws: &mut Draws) -> f64 {
        let k = self.dimension;
        let nu = self.error_df as f64;
        // Bartlett factor of Wishart_K(error_df, I): lower triangular T with
        // chi_{nu - i} diagonal and standard normal subdiagonal.
        let mut t = vec![0.0; k * k];
        for i in 0..k {
            t[i * k + i] = draws.chi_square(nu - i as f64).sqrt();
            for j in 0..i {
                t[i * k + j] = draws.normal();
            }
        }
        let mut acc = 0.0;
        let mut z = vec![0.0; k];
        for _ in 0..self.groups - 1 {
            draws.fill_normal(&mut z);
            // Forward substitution T y = z.
            for i in 0..k {
                let mut v = z[i];
                for j in 0..i {
                    v -= t[i * k + j] * z[j];
                }
                z[i] = v / t[i * k + i];
            }
            acc += z.iter().map(|y| y * y).sum::<f64>();
        }
        nu * acc
    }

    /// For M = 2 the trace is an ordinary two-sample Hotelling T^2 with the
    /// exact law `K(n-2)/(n-K-1) F_{K, n-K-1}`; returned here as a
    /// single-term mixture for cross-checking the Monte Carlo path.
    pub fn two_sample_closed_form(&self) -> Option<FMixture> {
        if self.groups != 2 {
            return None;
        }
        let k = self.dimension as f64;
        let nu = self.error_df as f64;
        Some(FMixture {
            terms: vec![FTerm {
                coefficient: k * nu / (nu - k + 1.0),
                df1: k,
                df2: nu - k + 1.0,
                noncentrality: 0.0,
            }],
        })
    }
}

/// Null law of the M-sample statistic: K scaled F-terms plus the
/// Hotelling-Lawley component.
#[derive(Debug, Clone, Serialize)]
pub struct MSampleNullLaw {
    pub f_terms: FMixture,
    pub t0: HotellingT0Spec,
}

impl LawSampler for MSampleNullLaw {
    fn draw(&self, draws: &mut Draws) -> f64 {
        self.f_terms.draw(draws) + self.t0.draw(draws)
    }
}

/// Builds the M-sample null law from the partition and group sizes.
pub fn m_sample_null_law(partition: &Partition, group_sizes: &[usize]) -> Result<MSampleNullLaw> {
    let m = group_sizes.len();
    if m < 2 {
        return Err(Error::InvalidGrouping(format!(
            "M-sample law needs at least 2 groups, got {m}"
        )));
    }
    if let Some(empty) = group_sizes.iter().position(|&s| s == 0) {
        return Err(Error::InvalidGrouping(format!(
            "group {empty} has no observations"
        )));
    }
    let n: usize = group_sizes.iter().sum();
    let k = partition.block_count();
    // The Wishart factor of the trace component needs n - M >= K.
    if n < m + k {
        return Err(Error::InsufficientSample {
            n,
            required: m + k - 1,
        });
    }
    let (nf, mf) = (n as f64, m as f64);
    let mut terms = Vec::with_capacity(k);
    for &pk in partition.sizes() {
        let pkf = (pk - 1) as f64;
        terms.push(FTerm {
            coefficient: (mf - 1.0) * pkf,
            df1: (mf - 1.0) * pkf,
            df2: (nf - mf) * pkf,
            noncentrality: 0.0,
        });
    }
    Ok(MSampleNullLaw {
        f_terms: FMixture::new(terms)?,
        t0: HotellingT0Spec {
            dimension: k,
            groups: m,
            error_df: n - m,
        },
    })
}

/// Noncentrality parameters of the one-sample law under a mean shift, in
/// the half convention of the chi-square lemma (the Poisson mixture rate):
///
/// ```text
/// delta_k    = n/2 (mu - mu0)^(k)T (a_kk^{-1} I - a_kk^{-1} p_k^{-1} J) (mu - mu0)^(k)
/// delta_K+1  = n/2 (mu_y - nu_0)^T Sigma_y^{-1} (mu_y - nu_0)
/// ```
///
/// with `mu_y`, `nu_0` the block averages and `Sigma_y = A P^{-1} + B`.
pub fn noncentrality_parameters(
    mu: &[f64],
    mu0: &[f64],
    sigma: &UbMatrix,
    n: usize,
) -> Result<Vec<f64>> {
    let partition = sigma.partition();
    let p = partition.total();
    if mu.len() != p || mu0.len() != p {
        return Err(Error::DimensionMismatch {
            what: "mean vectors",
            expected: p,
            actual: mu.len().min(mu0.len()),
        });
    }
    if let Err((min_a, min_delta_eig)) = sigma.pd_margins(&Default::default()) {
        return Err(Error::NotPositiveDefinite {
            min_a,
            min_delta_eig,
        });
    }
    let diff: Vec<f64> = mu.iter().zip(mu0).map(|(&a, &b)| a - b).collect();
    let nf = n as f64;
    let k = partition.block_count();
    let mut deltas = Vec::with_capacity(k + 1);
    for (block, slice) in partition.blocks(&diff).enumerate() {
        let pk = slice.len() as f64;
        let sum: f64 = slice.iter().sum();
        let sumsq: f64 = slice.iter().map(|v| v * v).sum();
        // The centered quadratic form is nonnegative; clamp the rounding
        // dust that appears when the shift is constant within a block.
        deltas.push((0.5 * nf * (sumsq - sum * sum / pk) / sigma.a()[block]).max(0.0));
    }
    deltas.push((0.5 * nf * block_average_quad_form(sigma, &diff)?).max(0.0));
    Ok(deltas)
}

/// `d_y^T Sigma_y^{-1} d_y` where `d_y` are the block averages of `diff` and
/// `Sigma_y^{-1} = P Delta^{-1}`.
fn block_average_quad_form(sigma: &UbMatrix, diff: &[f64]) -> Result<f64> {
    let partition = sigma.partition();
    let k = partition.block_count();
    let d_y = partition.block_means(diff);
    let delta = sigma.delta_matrix();
    let lu = kmat::Lu::factor(k, delta.entries(), "Delta")?;
    let w = lu.solve(&d_y);
    Ok(d_y
        .iter()
        .zip(&w)
        .zip(partition.sizes())
        .map(|((&d, &w), &pk)| d * pk as f64 * w)
        .sum())
}

/// A computed statistic with its component decomposition and the coordinate
/// estimates behind it.
#[derive(Debug, Clone)]
pub struct StatisticParts {
    /// U (one-sample) or U_M (M-sample).
    pub statistic: f64,
    /// The K within-block components followed by the block-average
    /// (Hotelling) component; they sum to the statistic.
    pub components: Vec<f64>,
    /// Estimated covariance coordinates.
    pub covariance: UbMatrix,
    /// Plug-in precision coordinates.
    pub precision: UbMatrix,
    /// Sample grand mean.
    pub mean: Vec<f64>,
    pub n: usize,
}

/// One-sample statistic and components, computed entirely in coordinates.
pub fn one_sample_statistic(d: &Dataset, mu0: &[f64]) -> Result<StatisticParts> {
    if d.groups().is_some() {
        return Err(Error::InvalidGrouping(
            "one-sample statistic expects ungrouped data".into(),
        ));
    }
    if mu0.len() != d.p() {
        return Err(Error::DimensionMismatch {
            what: "mu0",
            expected: d.p(),
            actual: mu0.len(),
        });
    }
    let moments = sample_moments(d)?;
    let covariance = estimate_coordinates(&moments, d.partition())?;
    let precision = estimate_precision(&covariance)?;
    let nf = d.n() as f64;
    let diff: Vec<f64> = moments.mean.iter().zip(mu0).map(|(&a, &b)| a - b).collect();
    let statistic = nf * precision.quad_form(&diff)?;
    let mut components = within_block_components(&covariance, &diff, nf);
    components.push(nf * block_average_quad_form(&covariance, &diff)?);
    Ok(StatisticParts {
        statistic,
        components,
        covariance,
        precision,
        mean: moments.mean,
        n: d.n(),
    })
}

/// M-sample statistic `U_M = sum_m n_m (xbar_m - xbar)^T Theta_hat (...)`
/// with its decomposition.
pub fn m_sample_statistic(d: &Dataset) -> Result<StatisticParts> {
    let groups = d.groups().ok_or_else(|| {
        Error::InvalidGrouping("M-sample statistic requires group labels".into())
    })?;
    if groups.group_count() < 2 {
        return Err(Error::InvalidGrouping(
            "M-sample statistic needs at least 2 groups".into(),
        ));
    }
    let moments = sample_moments(d)?;
    let covariance = estimate_coordinates(&moments, d.partition())?;
    let precision = estimate_precision(&covariance)?;
    let group_means = moments.group_means.as_ref().expect("grouped moments");
    let group_sizes = moments.group_sizes.as_ref().expect("grouped moments");
    let k = d.partition().block_count();
    let mut statistic = 0.0;
    let mut components = vec![0.0; k + 1];
    for (gm, &size) in group_means.iter().zip(group_sizes) {
        let w = size as f64;
        let diff: Vec<f64> = gm.iter().zip(&moments.mean).map(|(&a, &b)| a - b).collect();
        statistic += w * precision.quad_form(&diff)?;
        for (c, v) in components
            .iter_mut()
            .zip(within_block_components(&covariance, &diff, w))
        {
            *c += v;
        }
        components[k] += w * block_average_quad_form(&covariance, &diff)?;
    }
    Ok(StatisticParts {
        statistic,
        components,
        covariance,
        precision,
        mean: moments.mean,
        n: d.n(),
    })
}

/// The K within-block quadratic forms
/// `w * a_kk^{-1} (||d^(k)||^2 - (sum d^(k))^2 / p_k)`.
fn within_block_components(covariance: &UbMatrix, diff: &[f64], weight: f64) -> Vec<f64> {
    covariance
        .partition()
        .blocks(diff)
        .enumerate()
        .map(|(block, slice)| {
            let pk = slice.len() as f64;
            let sum: f64 = slice.iter().sum();
            let sumsq: f64 = slice.iter().map(|v| v * v).sum();
            weight * (sumsq - sum * sum / pk) / covariance.a()[block]
        })
        .collect()
}

/// The Morrison two-moment approximation `C1 * F(p, C2)` to a central
/// mixture: C1 and C2 match the mixture's mean and variance.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MorrisonF {
    /// Scale C1.
    pub scale: f64,
    /// Numerator degrees of freedom (the total dimension p).
    pub df1: f64,
    /// Fitted denominator degrees of freedom C2.
    pub df2: f64,
}

impl MorrisonF {
    pub fn mean(&self) -> f64 {
        self.scale * self.df2 / (self.df2 - 2.0)
    }

    pub fn variance(&self) -> f64 {
        let term = FTerm {
            coefficient: self.scale,
            df1: self.df1,
            df2: self.df2,
            noncentrality: 0.0,
        };
        term.variance()
    }

    /// Upper-alpha quantile through the incomplete-beta F quantile.
    pub fn upper_quantile(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be in (0,1), got {alpha}"
            )));
        }
        Ok(self.scale * f_quantile(1.0 - alpha, self.df1, self.df2))
    }

    pub fn p_value(&self, observed: f64) -> f64 {
        1.0 - f_cdf(observed / self.scale, self.df1, self.df2)
    }
}

/// Fits the Morrison approximation by matching the first two moments.
/// Requires a central mixture whose every term has df2 > 4.
pub fn morrison_approximation(law: &FMixture) -> Result<MorrisonF> {
    for t in &law.terms {
        if t.df2 <= 4.0 {
            return Err(Error::MorrisonUnavailable { df2: t.df2 });
        }
        if t.noncentrality != 0.0 {
            return Err(Error::InvalidParameter(
                "Morrison approximation is defined for the central (null) mixture".into(),
            ));
        }
    }
    let p = law.total_df1();
    let mean = law.mean();
    let variance = law.variance();
    let ratio_p = variance / (mean * mean) * p;
    if ratio_p <= 2.0 {
        return Err(Error::InvalidParameter(format!(
            "moment matching has no solution with df2 > 4 (v/m^2 * p = {ratio_p:.3e})"
        )));
    }
    let df2 = (4.0 * ratio_p + 2.0 * p - 4.0) / (ratio_p - 2.0);
    let scale = mean * (df2 - 2.0) / df2;
    Ok(MorrisonF {
        scale,
        df1: p,
        df2,
    })
}

/// How the null distribution is evaluated in a test report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MonteCarlo,
    MorrisonApprox,
}

/// Full outcome of a hypothesis test, serializable as the JSON interface.
#[derive(Debug, Clone, Serialize)]
pub struct TestReport {
    pub test: &'static str,
    pub statistic: f64,
    pub components: Vec<f64>,
    pub p_value: f64,
    pub critical_value: f64,
    pub alpha: f64,
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub law: Vec<FTerm>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hotelling_t0: Option<HotellingT0Spec>,
    pub reject: bool,
}

/// End-to-end one-sample test: estimate, statistic, null law, p-value and
/// critical value by the chosen method.
pub fn one_sample_test(
    d: &Dataset,
    mu0: &[f64],
    alpha: f64,
    method: Method,
    replicates: usize,
    seed: u64,
) -> Result<TestReport> {
    check_alpha(alpha)?;
    let parts = one_sample_statistic(d, mu0)?;
    let law = one_sample_null_law(d.partition(), d.n())?;
    let (p_val, critical_value, mc) = match method {
        Method::MonteCarlo => {
            let sample = LawSample::collect(&law, replicates, seed)?;
            (
                sample.p_value(parts.statistic.max(0.0))?,
                sample.upper_quantile(alpha)?.value,
                true,
            )
        }
        Method::MorrisonApprox => {
            let approx = morrison_approximation(&law)?;
            (
                approx.p_value(parts.statistic),
                approx.upper_quantile(alpha)?,
                false,
            )
        }
    };
    Ok(TestReport {
        test: "one_sample",
        statistic: parts.statistic,
        components: parts.components,
        p_value: p_val,
        critical_value,
        alpha,
        method,
        replicates: mc.then_some(replicates),
        seed: mc.then_some(seed),
        law: law.terms,
        hotelling_t0: None,
        reject: parts.statistic > critical_value,
    })
}

/// End-to-end M-sample test. The Hotelling-Lawley component forces the
/// Monte Carlo method.
pub fn m_sample_test(
    d: &Dataset,
    alpha: f64,
    replicates: usize,
    seed: u64,
) -> Result<TestReport> {
    check_alpha(alpha)?;
    let groups = d
        .groups()
        .ok_or_else(|| Error::InvalidGrouping("M-sample test requires group labels".into()))?;
    let parts = m_sample_statistic(d)?;
    let law = m_sample_null_law(d.partition(), groups.sizes())?;
    let sample = LawSample::collect(&law, replicates, seed)?;
    let critical_value = sample.upper_quantile(alpha)?.value;
    let p_val = sample.p_value(parts.statistic.max(0.0))?;
    Ok(TestReport {
        test: "m_sample",
        statistic: parts.statistic,
        components: parts.components,
        p_value: p_val,
        critical_value,
        alpha,
        method: Method::MonteCarlo,
        replicates: Some(replicates),
        seed: Some(seed),
        law: law.f_terms.terms.clone(),
        hotelling_t0: Some(law.t0),
        reject: parts.statistic > critical_value,
    })
}

/// Simultaneous confidence interval for `a^T mu`:
/// `a^T xbar +- sqrt(U(alpha) * a^T Sigma_hat a / n)`, with the quadratic
/// form evaluated in coordinates and `U(alpha)` the Monte Carlo critical
/// value of the null law.
pub fn simultaneous_ci(
    d: &Dataset,
    direction: &[f64],
    alpha: f64,
    replicates: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    if direction.len() != d.p() {
        return Err(Error::DimensionMismatch {
            what: "direction vector",
            expected: d.p(),
            actual: direction.len(),
        });
    }
    let moments = sample_moments(d)?;
    let covariance = estimate_coordinates(&moments, d.partition())?;
    // The interval is only calibrated when the estimate is a valid
    // covariance; surface the same diagnostics as the test path.
    estimate_precision(&covariance)?;
    let law = one_sample_null_law(d.partition(), d.n())?;
    let crit = LawSample::collect(&law, replicates, seed)?
        .upper_quantile(alpha)?
        .value;
    let center: f64 = direction
        .iter()
        .zip(&moments.mean)
        .map(|(&a, &m)| a * m)
        .sum();
    let half_width = (crit * covariance.quad_form(direction)? / d.n() as f64).sqrt();
    Ok((center - half_width, center + half_width))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "alpha must be in (0,1), got {alpha}"
        )))
    }
}
