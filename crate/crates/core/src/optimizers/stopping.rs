//! Hitting times of the running maximum and their exhaustive certification.

use crate::error::Result;
use crate::prob_tree::{enumerate_stopping_times, AdaptedProcess, ScenarioTree, StoppingTime};
use crate::representation::{stopping_objective, GeneratorSpec, LhatResult};
use serde::{Deserialize, Serialize};

/// Running maximum including the current index, `max_{j≤k} L_j`, read from the
/// children of each node (`−∞` on leaves).
fn level_through(tree: &ScenarioTree, lhat: &AdaptedProcess, n: usize) -> f64 {
    tree.children(n).first().map_or(f64::NEG_INFINITY, |b| lhat.values[b.id])
}

fn region(tree: &ScenarioTree, pred: impl Fn(usize) -> bool) -> StoppingTime {
    StoppingTime { stop_region: (0..tree.len()).map(|n| !tree.is_terminal(n) && pred(n)).collect() }
}

/// `τ_ℓ`: first time `max_{j≤k} L_j ≥ ℓ`; `τ′_ℓ`: first time it is `> ℓ`.
///
/// `τ_ℓ` is the smallest optimal stopping time of `Y_τ + Σ_{s<τ} f(s, ℓ) dt`;
/// `τ′_ℓ` is the largest.
pub fn hitting_times(tree: &ScenarioTree, lhat: &LhatResult, level: f64) -> (StoppingTime, StoppingTime) {
    let m = |n| level_through(tree, &lhat.lhat, n);
    (region(tree, |n| m(n) >= level), region(tree, |n| m(n) > level))
}

/// Tilted hitting time: first time `max_{j≤k} L_j + δ t_k ≥ ℓ`.
pub fn hitting_time_tilted(tree: &ScenarioTree, lhat: &LhatResult, level: f64, delta: f64) -> StoppingTime {
    region(tree, |n| level_through(tree, &lhat.lhat, n) + delta * tree.time_of(n) >= level)
}

/// True when `τ_ℓ ≠ τ′_ℓ` on some path.
pub fn is_exceptional_level(tree: &ScenarioTree, lhat: &LhatResult, level: f64) -> bool {
    let (a, b) = hitting_times(tree, lhat, level);
    a.signature(tree) != b.signature(tree)
}

/// `E[Y_τ + Σ_{s<τ} f(s, ℓ) dt]`.
pub fn level_objective(tree: &ScenarioTree, y: &AdaptedProcess, f: &GeneratorSpec, level: f64, tau: &StoppingTime) -> f64 {
    let running = AdaptedProcess::from_fn(tree, |n| f.eval(tree, n.id, level));
    stopping_objective(tree, y, &running, tau)
}

/// Exhaustive comparison of a stopping time against every stopping time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingCertificate {
    pub achieved: f64,
    pub best: f64,
    /// `best − achieved`, never negative.
    pub gap: f64,
    /// Number of distinct stopping times (as random variables) within `tol` of `best`.
    pub maximizers: usize,
    pub enumerated: usize,
}

/// Compare `tau` with the exhaustive maximum of the level-`ℓ` objective.
pub fn certify_stopping(
    tree: &ScenarioTree,
    y: &AdaptedProcess,
    f: &GeneratorSpec,
    level: f64,
    tau: &StoppingTime,
    max_paths: usize,
    tol: f64,
) -> Result<StoppingCertificate> {
    let running = AdaptedProcess::from_fn(tree, |n| f.eval(tree, n.id, level));
    let all = enumerate_stopping_times(tree, max_paths)?;
    let values: Vec<f64> = all.iter().map(|s| stopping_objective(tree, y, &running, s)).collect();
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let achieved = stopping_objective(tree, y, &running, tau);
    let mut sigs: Vec<Vec<usize>> = all
        .iter()
        .zip(&values)
        .filter(|(_, &v)| v >= best - tol)
        .map(|(s, _)| s.signature(tree))
        .collect();
    sigs.sort();
    sigs.dedup();
    Ok(StoppingCertificate { achieved, best, gap: (best - achieved).max(0.0), maximizers: sigs.len(), enumerated: all.len() })
}
