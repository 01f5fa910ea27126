//! Snell envelopes by backward induction with the smallest optimal stopping rule.

use crate::error::{invalid, Result};
use crate::prob_tree::{AdaptedProcess, NodeId, ScenarioTree, StoppingTime};

/// Indifference tolerance: stop when the payoff is within this of continuation.
pub const STOP_TOL: f64 = 1e-12;

/// Envelope `Z` and stop flags for payoff `Y` and running reward `r`:
/// `Z_n = max(Y_n, r_n dt + Σ p_c Z_c)`, stop at `n` when `Y_n ≥ cont − STOP_TOL`.
pub(crate) fn snell_core(
    tree: &ScenarioTree,
    payoff: &[f64],
    running: impl Fn(NodeId) -> f64,
) -> (Vec<f64>, Vec<bool>) {
    let dt = tree.dt();
    let mut z = vec![0.0; tree.len()];
    let mut stop = vec![false; tree.len()];
    for id in tree.backward_order() {
        let children = tree.children(id);
        if children.is_empty() {
            z[id] = payoff[id];
            continue;
        }
        let cont = running(id) * dt + children.iter().map(|b| b.p * z[b.id]).sum::<f64>();
        if payoff[id] >= cont - STOP_TOL {
            z[id] = payoff[id].max(cont);
            stop[id] = true;
        } else {
            z[id] = cont;
        }
    }
    (z, stop)
}

/// Snell envelope of `Y_τ + Σ_{s<τ} running_s dt` and its smallest optimal stopping time.
pub fn snell_smallest_optimal(
    tree: &ScenarioTree,
    payoff: &AdaptedProcess,
    running: &AdaptedProcess,
) -> Result<(AdaptedProcess, StoppingTime)> {
    payoff.check(tree, "payoff")?;
    running.check(tree, "running reward")?;
    if payoff.values.iter().any(|v| !v.is_finite()) {
        return invalid("payoff must be finite");
    }
    running.check_finite("running reward")?;
    let (z, stop) = snell_core(tree, &payoff.values, |n| running.values[n]);
    Ok((AdaptedProcess::new(z), StoppingTime { stop_region: stop }))
}

/// `E[Y_τ + Σ_{s<τ} running_s dt]` from the root.
pub fn stopping_objective(
    tree: &ScenarioTree,
    payoff: &AdaptedProcess,
    running: &AdaptedProcess,
    tau: &StoppingTime,
) -> f64 {
    let dt = tree.dt();
    tree.paths()
        .iter()
        .map(|p| {
            let k = tau.stop_index(tree, p);
            let run: f64 = p.nodes[..k].iter().map(|&n| running.values[n] * dt).sum();
            p.prob * (payoff.values[p.nodes[k]] + run)
        })
        .sum()
}
