//! Voxel-wise certainty of activation from replicated fMRI p-value maps.
//!
//! Each voxel's replicated p-values are modelled as a mixture of the uniform
//! null and the p-value distribution of a non-central t statistic. The fitted
//! mixture yields an optimal per-voxel threshold and the posterior certainty
//! that declared activations and inactivations are correct.

pub mod certainty;
pub mod error;
pub mod exec;
pub mod mle;
pub mod model;
pub mod optim;
pub mod quadrature;
pub mod simulation;
pub mod special;
pub mod thresholding;
pub mod volume;

pub use error::{Error, Result};
pub use exec::Execution;
