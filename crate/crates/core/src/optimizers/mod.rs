//! Optimizers read off the running maximum `L̂`.
//!
//! * optimal stopping: hitting times of `L̂` at a level;
//! * singular control: `Θ* = θ ∨ (L̂ ∧ Θ̄)`, the clamp of `L̂` between floor and cap;
//! * consumption: satisfaction `e^{−βt}(η ∨ −1/L̂)` and the consumption it implies.
//!
//! Each comes with an objective evaluator and a brute-force check.

mod consumption;
mod singular;
mod stopping;

pub use consumption::{
    consumption_budget, consumption_from_lhat, consumption_generator, consumption_utility, deflator_y,
    satisfaction_from_increments, ConsumptionPlan, ConsumptionSpec,
};
pub use singular::{singular_cost, singular_grid_minimum, singular_optimizer, SingularControlSpec};
pub use stopping::{
    certify_stopping, hitting_time_tilted, hitting_times, is_exceptional_level, level_objective, StoppingCertificate,
};
