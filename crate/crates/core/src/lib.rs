//! Month-by-month creditworthiness modelling after loan origination.
//!
//! The crate builds twelve monthly snapshots of a borrower cohort, derives
//! financial, repayment-history and social-network features, selects and
//! tunes gradient boosted trees per month and feature set, and reports how
//! discrimination and feature-group importance evolve.

pub mod boost;
pub mod cli;
pub mod error;
pub mod eval;
pub mod features;
pub mod graph;
pub mod hash;
pub mod io;
pub mod panel;
pub mod select;
pub mod shap;
pub mod study;
pub mod synth;

pub use error::{Error, Result};
