//! Monotone-follower control: clamp optimizer, cost functional and grid oracle.
//!
//! Controls are predictable: the value stored on a node at time `k` is `Θ_k`,
//! fixed one step ahead, and the root carries the floor `θ`. On a step from a
//! node `n` the agent pays `c(n, Θ_{k+1}) dt + k_n (Θ_{k+1} − Θ_k)`, with
//! `c(n, x) = ∫_θ^x c′(n, ℓ) dℓ`.

use crate::error::{invalid, Result};
use crate::prob_tree::{AdaptedProcess, ScenarioTree};
use crate::representation::{GeneratorSpec, LhatResult};
use serde::{Deserialize, Serialize};

const TOL: f64 = 1e-12;

/// Floor, cap, marginal running cost and proportional control cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularControlSpec {
    pub floor: f64,
    /// Predictable, nondecreasing cap `Θ̄ ≥ θ`.
    pub cap: AdaptedProcess,
    /// `c′(n, ℓ)`, strictly increasing in `ℓ`.
    pub c_prime: GeneratorSpec,
    /// Proportional cost `k`, zero at the horizon.
    pub k: AdaptedProcess,
}

impl SingularControlSpec {
    pub fn validate(&self, tree: &ScenarioTree) -> Result<()> {
        if !self.floor.is_finite() {
            return invalid("floor must be finite");
        }
        self.cap.check(tree, "cap")?;
        self.k.check(tree, "control cost")?;
        self.cap.check_finite("cap")?;
        self.k.check_finite("control cost")?;
        self.c_prime.validate(tree)?;
        for n in tree.nodes() {
            if self.cap.values[n.id] < self.floor - TOL {
                return invalid(format!("cap below the floor at node {}", n.id));
            }
            if let Some(p) = n.parent {
                if self.cap.values[n.id] < self.cap.values[p] - TOL {
                    return invalid(format!("cap decreases into node {}", n.id));
                }
            }
            if n.children.is_empty() && self.k.values[n.id].abs() > TOL {
                return invalid(format!("control cost is not zero at terminal node {}", n.id));
            }
        }
        if !tree.is_predictable(&self.cap, TOL) {
            return invalid("cap must be predictable (equal on siblings)");
        }
        Ok(())
    }

    /// `Y = −k`, the process represented with generator `c′`.
    pub fn representation_target(&self) -> AdaptedProcess {
        self.k.map(|v| -v)
    }

    /// Running cost `c(n, x)` in the gauge `c(n, θ) = 0`.
    pub fn running_cost(&self, tree: &ScenarioTree, n: usize, x: f64) -> f64 {
        self.c_prime.integral(tree, n, self.floor, x)
    }
}

/// `Θ*_n = θ ∨ (L̂_n ∧ Θ̄_n)`, with `Θ*_root = θ`.
pub fn singular_optimizer(tree: &ScenarioTree, lhat: &LhatResult, spec: &SingularControlSpec) -> Result<AdaptedProcess> {
    spec.validate(tree)?;
    lhat.lhat.check(tree, "L̂")?;
    Ok(AdaptedProcess::from_fn(tree, |n| {
        let l = lhat.lhat.values[n.id];
        spec.floor.max(l.min(spec.cap.values[n.id]))
    }))
}

/// `J(Θ) = E[Σ_{k<N} c(k, Θ_{k+1}) dt + k_k (Θ_{k+1} − Θ_k)]`.
pub fn singular_cost(tree: &ScenarioTree, spec: &SingularControlSpec, control: &AdaptedProcess) -> Result<f64> {
    spec.validate(tree)?;
    control.check(tree, "control")?;
    control.check_finite("control")?;
    for n in tree.nodes() {
        if let Some(p) = n.parent {
            if control.values[n.id] < control.values[p] - TOL {
                return invalid(format!("control decreases into node {}", n.id));
            }
        }
    }
    if !tree.is_predictable(control, TOL) {
        return invalid("control must be predictable (equal on siblings)");
    }
    let dt = tree.dt();
    let mut j = 0.0;
    for n in tree.nodes() {
        if let Some(b) = n.children.first() {
            let next = control.values[b.id];
            j += tree.node_prob(n.id)
                * (spec.running_cost(tree, n.id, next) * dt + spec.k.values[n.id] * (next - control.values[n.id]));
        }
    }
    Ok(j)
}

/// Minimum of `J` over predictable monotone controls with values on `points`
/// uniform levels in `[θ, max Θ̄]` (respecting the cap), by dynamic programming.
/// Returns the minimum and a minimizing control.
pub fn singular_grid_minimum(tree: &ScenarioTree, spec: &SingularControlSpec, points: usize) -> Result<(f64, AdaptedProcess)> {
    spec.validate(tree)?;
    if points < 2 {
        return invalid("control grid needs at least two points");
    }
    let top = spec.cap.values.iter().copied().fold(spec.floor, f64::max);
    let grid: Vec<f64> = (0..points).map(|i| spec.floor + (top - spec.floor) * i as f64 / (points - 1) as f64).collect();
    let dt = tree.dt();
    let m = grid.len();
    // value[n][i]: optimal cost-to-go from node n when Θ_n = grid[i].
    let mut value = vec![vec![0.0; m]; tree.len()];
    let mut choice = vec![vec![0usize; m]; tree.len()];
    for id in tree.backward_order() {
        let children = tree.children(id);
        if children.is_empty() {
            continue;
        }
        let cap = spec.cap.values[children[0].id];
        for i in 0..m {
            let mut best = f64::INFINITY;
            let mut arg = i;
            for j in i..m {
                if grid[j] > cap + TOL && j != i {
                    break;
                }
                let step = spec.running_cost(tree, id, grid[j]) * dt + spec.k.values[id] * (grid[j] - grid[i]);
                let cont: f64 = children.iter().map(|b| b.p * value[b.id][j]).sum();
                if step + cont < best {
                    best = step + cont;
                    arg = j;
                }
            }
            value[id][i] = best;
            choice[id][i] = arg;
        }
    }
    let mut control = vec![spec.floor; tree.len()];
    let mut idx = vec![0usize; tree.len()];
    for t in 0..tree.grid().steps {
        for &n in tree.nodes_at(t) {
            let j = choice[n][idx[n]];
            for b in tree.children(n) {
                idx[b.id] = j;
                control[b.id] = grid[j];
            }
        }
    }
    Ok((value[tree.root()][0], AdaptedProcess::new(control)))
}
