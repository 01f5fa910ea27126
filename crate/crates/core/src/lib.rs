//! Running-maximum representation processes on finite scenario trees.
//!
//! The crate computes the process `L̂` that represents an optional process `Y`
//! as `Y_τ = E[Σ_{τ≤t<T} f(t, sup_{τ≤s≤t} L_s) dt | F_τ]`, derives optimal
//! stopping times, singular controls and consumption plans from it, and solves
//! mean-field fixed points built on top of these optimizers.

pub mod error;
pub mod numeric;
pub mod prob_tree;
pub mod metrics_order;
pub mod representation;
pub mod optimizers;
pub mod meanfield;
pub mod mfg_apps;
pub mod stability;
pub mod fixtures;
pub mod cli;
pub mod guide;

pub use error::{Error, Result};
