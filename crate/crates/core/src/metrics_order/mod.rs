//! Metrics and orders on path space and on finite-support measures.
//!
//! * [`levy_distance`]: the Lévy metric on nondecreasing left-continuous step paths;
//! * [`levy_prokhorov`]: the coupling form of the Lévy–Prokhorov metric;
//! * [`stochastic_order_leq`]: `≤_p`, decided through monotone couplings;
//! * [`RandomMeasure`] and [`conditional_law`]: per-atom laws of path functionals.
//!
//! Paths enter `≤_p` through their values on the shared time grid, so the
//! order is checked on a finite-dimensional projection. On such a projection
//! the test-function definition and the coupling criterion coincide (finite
//! Strassen theorem).

mod levy;
mod maxflow;
mod measure;
mod order;
mod prokhorov;

pub use levy::{levy_distance, levy_distance_truncated, VPlusPath};
pub use maxflow::{bipartite_flow, FlowNetwork};
pub use measure::{conditional_law, AtomLaw, Outcome, RandomMeasure, Weighted, NORM_TOL};
pub use order::{leq_componentwise, stochastic_order_leq, ORDER_TOL};
pub use prokhorov::levy_prokhorov;

use crate::error::Result;
use crate::prob_tree::{AdaptedProcess, PathRecord, ScenarioTree};

/// `L̂` along a path as an element of path space: `v_k = L̂(node at time k)`.
pub fn lhat_vplus(tree: &ScenarioTree, lhat: &AdaptedProcess, path: &PathRecord) -> Result<VPlusPath> {
    VPlusPath::new(tree.grid().times(), path.nodes[1..].iter().map(|&n| lhat.values[n]).collect())
}
