//! Aggregated binary activated networks: exact and sampled dynamic programs
//! over hidden representations, their compact form, gradients, PAC-Bayesian
//! training, and the supporting data, oracle and benchmark utilities.

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arch;
pub mod bench;
pub mod compact;
pub mod data;
pub mod dataset;
mod engine;
pub mod error;
pub mod exact;
pub mod gradients;
pub mod math;
pub mod oracle;
pub mod pacbayes;
pub mod repr;
pub mod stochastic;
pub mod train;

pub use arch::{Architecture, Matrix, WeightStack};
pub use dataset::LabeledDataset;
pub use engine::{DpNetwork, ForwardCache, RepSet, TransitionMatrix, DEFAULT_MEMORY_BUDGET};
pub use error::{Error, Result};
