//! Kolmogorov-Arnold networks for accelerated failure time (AFT) regression on
//! right-censored survival data.
//!
//! The log event time is modelled as `log T = KAN(z) + noise`, where every edge of
//! the network carries a learnable B-spline activation. Three censoring strategies
//! are provided (Buckley-James imputation, inverse probability of censoring
//! weighting, and the Fan-Gijbels time transform), together with Kaplan-Meier
//! machinery, evaluation metrics, synthetic generators, and extraction of closed-form
//! formulas from the trained edges.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bspline;
pub mod cli;
pub mod data;
pub mod diagram;
pub mod error;
pub mod kan;
pub mod metrics;
pub mod optim;
pub mod survival;
pub mod symbolic;
pub mod trainers;

pub use data::SurvivalDataset;
pub use error::{KanAftError, Result};
pub use kan::{init_network, KanNetwork, RegConfig};
pub use trainers::{FitConfig, Strategy, TrainedModel};

/// Version string embedded in every output artifact.
pub const VERSION: &str = concat!("kan-aft ", env!("CARGO_PKG_VERSION"));
