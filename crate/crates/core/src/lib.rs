//! Pairwise stochastic optimization with data-adaptive pair sampling, plus
//! the verification stack around it: U-statistic risk estimation,
//! algorithmic-stability probes on neighboring datasets, sub-exponential
//! tail checks, and an explicit-constant PAC-Bayes bound calculator.

pub mod analysis;
pub mod data;
pub mod error;
pub mod losses;
pub mod optim;
pub mod report;
pub mod rng;
pub mod sampling;

pub use error::{Error, Result};
