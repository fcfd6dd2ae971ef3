//! Dependence measurement and testing via distance covariance, for
//! independent samples and stationary time series.
//!
//! The crate is generic over the floating scalar through [`scalar::Scalar`];
//! the type aliases at the root fix `f64`, which is what the command-line
//! tools and the simulation harness use.

pub mod distance;
pub mod edf;
pub mod error;
pub mod fastdcov;
pub mod kernels;
pub mod linalg;
pub mod portmanteau;
pub mod resampling;
pub mod sample;
pub mod scalar;
pub mod simulation;
pub mod special;
pub mod timeseries;
pub mod var;

pub use error::{Error, Result};

/// `f64` sample of row vectors.
pub type Sample = sample::Sample<f64>;
/// `f64` univariate series.
pub type Series = sample::Series<f64>;
/// `f64` multivariate series.
pub type MultiSeries = sample::MultiSeries<f64>;
/// `f64` dense matrix.
pub type Mat = linalg::Mat<f64>;
/// `f64` metric specification.
pub type MetricSpec = distance::MetricSpec<f64>;
