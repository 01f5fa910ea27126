//! Stability of the running maximum under perturbations of `(Y, f)`.
//!
//! * [`counterexample_i`], [`counterexample_ii`]: deterministic ramps where `L`
//!   fails to converge pointwise, with and without convergence of `L̂`;
//! * [`stability_sweep`]: `P[d_L(L̂^n, L̂) ≥ ε]`, `E[d_L]` and `E[d_LP]` along a
//!   [`PerturbationFamily`] against its budget `e_n`;
//! * [`hitting_time_convergence`]: convergence in probability of the smallest
//!   optimal stopping times at levels outside the exceptional set.

mod counterexample;
mod family;

pub use counterexample::{counterexample, counterexample_i, counterexample_ii, ramp_samples, CounterexampleRecord, RampFamily};
pub use family::{
    default_index, hitting_time_convergence, spearman, stability_sweep, Datum, HittingReport, HittingRow,
    PerturbationFamily, SweepReport, SweepRow, DEFAULT_EPSILON,
};
