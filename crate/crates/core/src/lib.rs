//! Linear autoencoders over complex and real data: covariance assembly,
//! closed-form layer solvers, the critical-point landscape, alternating
//! training schedules and post-training evaluators.

pub mod cli;
pub mod covariance;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod landscape;
pub mod linalg;
pub mod solvers;
pub mod training;

pub use covariance::{compute_covariances, CovarianceSet, Dataset};
pub use error::{LaeError, Result};
pub use solvers::AutoencoderParams;
