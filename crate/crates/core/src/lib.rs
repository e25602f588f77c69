//! Randomized coordinate methods that exploit curvature in the sampled
//! block: stochastic dual Newton ascent (SDNA), minibatch SDCA, PCDM, and
//! the smooth Methods 1-3, together with exact calculators for their linear
//! convergence rates.

pub mod composite;
pub mod data;
pub mod erm;
pub mod error;
pub mod fixtures;
pub mod ihs;
pub mod linalg;
pub mod loss;
pub mod rates;
pub mod sampling;
pub mod smooth;

pub use error::{Error, Result};
pub use linalg::{Subset, SymmetricMatrix};
pub use loss::LossKind;
pub use sampling::{EsoStrategy, PseudoinverseMode, SamplingSpec, SamplingStats};
