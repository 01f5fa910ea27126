//! The stochastic order `≤_p` on finite supports, via monotone couplings.
//!
//! On a finite support in `ℝ^d`, `μ ≤_p ν` (every bounded increasing test
//! function has a smaller integral under `μ`) holds exactly when some coupling
//! is concentrated on `{x ≤ y componentwise}`. The coupling question is a
//! bipartite transportation problem decided by maximum flow.

use super::maxflow::bipartite_flow;
use crate::error::{invalid, Error, Result};

/// Saturation tolerance of the coupling flow.
pub const ORDER_TOL: f64 = 1e-12;

/// Componentwise `x ≤ y`, with `−∞` below everything.
pub fn leq_componentwise(x: &[f64], y: &[f64]) -> bool {
    x.iter().zip(y).all(|(a, b)| a <= b)
}

/// Decide `μ ≤_p ν` for weighted point sets in `ℝ^d`.
pub fn stochastic_order_leq(mu: &[(f64, Vec<f64>)], nu: &[(f64, Vec<f64>)]) -> Result<bool> {
    if mu.is_empty() || nu.is_empty() {
        return invalid("empty support");
    }
    let d = mu[0].1.len();
    if mu.iter().chain(nu).any(|(_, x)| x.len() != d) {
        return Err(Error::Mismatch("support points have different dimensions".into()));
    }
    let a: Vec<f64> = mu.iter().map(|(w, _)| *w).collect();
    let b: Vec<f64> = nu.iter().map(|(w, _)| *w).collect();
    let total: f64 = a.iter().sum();
    let flow = bipartite_flow(&a, &b, |i, j| leq_componentwise(&mu[i].1, &nu[j].1));
    Ok(flow >= total - ORDER_TOL)
}
