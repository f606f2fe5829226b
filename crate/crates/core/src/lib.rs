//! Bayesian nonparametric quasi-likelihood regression with additive
//! decision-tree ensembles.

pub mod backfit;
pub mod data;
pub mod error;
pub mod experiments;
pub mod dispersion;
pub mod family;
pub mod forest;
pub mod leaf_prior;
pub mod parametric;
pub mod random;
pub mod slice;
pub mod special;
pub mod summaries;
pub mod synth;

pub use data::Dataset;
pub use error::{Error, FamilyKind, Result};
pub use family::QuasiFamily;
pub use leaf_prior::LeafPrior;
