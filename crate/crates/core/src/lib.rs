//! Distance multivariance and total distance multivariance for `n` random
//! vectors, with independence tests and reference oracles.
//!
//! The estimators work on doubly centered distance matrices built from a
//! [`BlockSample`] and one [`CndfSpec`] per block:
//!
//! ```
//! use multivariance::{estimate, experiments::bernstein_sample, CndfSpec};
//!
//! let sample = bernstein_sample(2000, 7);
//! let specs = vec![CndfSpec::euclidean(1).unwrap(); 3];
//! let est = estimate(&sample, &specs).unwrap();
//! assert!((est.m().value - 0.3536).abs() < 0.05);
//! ```

pub mod centering;
pub mod cli;
pub mod cndf;
pub mod error;
pub mod experiments;
pub mod inference;
mod numeric;
pub mod oracle;
pub mod rng;
pub mod sample;
pub mod multivariance;

pub use centering::{center_blocks, double_center, distance_matrix, CenteredDistanceMatrix, SquareMatrix};
pub use cndf::{stable_constant, suggest_gamma, CndfKind, CndfSpec};
pub use error::{Error, Result};
pub use multivariance::{
    estimate, estimates, multicorrelation, normalized_multivariance, normalized_total_multivariance,
    sample_multivariance, sample_total_multivariance, subset_multivariance, MultivarianceEstimates,
    StatisticKind,
};
pub use sample::BlockSample;
