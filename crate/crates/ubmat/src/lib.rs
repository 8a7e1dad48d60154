//! Coordinate algebra for uniform-block matrices, with exact mean tests
//! built on top of it.
//!
//! A uniform-block matrix is a symmetric matrix partitioned into blocks that
//! are each uniform: diagonal blocks are `a*I + b*J`, off-diagonal blocks
//! are constant. Such a p x p matrix is determined by a K-vector `a`, a
//! symmetric K x K matrix `b`, and the block sizes — its coordinates — and
//! all of its algebra (products, powers, eigenvalues, determinants,
//! inverses, the orthogonal canonical form) reduces to K x K computations.
//! Block covariance patterns of this kind show up in gene expression,
//! proteomics and imaging data, where K is small and p is not.
//!
//! The crate has three layers:
//!
//! - [`ub`]: the coordinate algebra itself, with [`dense`] as a deliberately
//!   naive, fully independent oracle for validating it.
//! - [`estimate`] and [`infer`]: best unbiased coordinate estimators from
//!   data, and Geisser's one-sample / M-sample information statistics whose
//!   exact null laws are mixtures of independent F-variates.
//! - [`sim`]: O(p + K^2) Gaussian sampling through the canonical form and
//!   the reproducible Monte Carlo studies that calibrate the tests.
//!
//! ```
//! use ubmat::{Partition, UbMatrix};
//!
//! let partition = Partition::new(vec![2, 3])?;
//! let sigma = UbMatrix::new(
//!     vec![1.0, 2.0],                // diagonal of A
//!     vec![0.5, 0.2, 0.2, 0.3],      // full K x K symmetric B
//!     partition,
//! )?;
//! assert!((sigma.determinant() - 22.24).abs() < 1e-12);
//! let precision = sigma.precision_coordinates()?;
//! assert_eq!(precision.a(), &[1.0, 0.5]);
//! # Ok::<(), ubmat::Error>(())
//! ```
//!
//! The `book/` directory of the repository walks through the concepts; its
//! code snippets compile and run as part of this crate's doctests.

pub mod dense;
pub mod error;
pub mod estimate;
pub mod infer;
pub mod io;
mod kmat;
pub mod partition;
pub mod rng;
pub mod sim;
pub mod special;
pub mod ub;

pub use dense::DenseMatrix;
pub use error::{Error, Result};
pub use estimate::{
    coordinates_from_cov, estimate_coordinates, estimate_coordinates_allow_small_n,
    estimate_precision, sample_moments, Dataset, Groups, SampleMoments,
};
pub use infer::{
    m_sample_null_law, m_sample_statistic, m_sample_test, mixture_quantile, mixture_sample,
    morrison_approximation, noncentrality_parameters, one_sample_noncentral_law,
    one_sample_null_law, one_sample_statistic, one_sample_test, p_value, sample_law,
    simultaneous_ci, FMixture, FTerm, HotellingT0Spec, LawSample, LawSampler, MSampleNullLaw,
    Method, MorrisonF, QuantileEstimate, StatisticParts, TestReport,
};
pub use partition::Partition;
pub use sim::{
    run_power_study, run_type1_study, sample_ub_normal, MeanSpec, PowerStudy, SimulationPlan,
    Type1Study, UbSqrtFactor,
};
pub use ub::{CanonicalForm, DeltaMatrix, Tolerances, UbMatrix, UbProduct};
