//! Consumption plans from the running maximum of the deflator representation.
//!
//! The infinite horizon is truncated at `T`: the deflator
//! `Y_k = −λ e^{−β t_k} D_k` with `D_k = exp(−Σ_{j<k} r_j dt)` is used before
//! the horizon and set to zero on leaves. Satisfaction follows the left-Riemann
//! recursion `S_0 = η + β ΔC_0`, `S_k = e^{−β dt} S_{k−1} + β ΔC_k`.

use crate::error::{invalid, Error, Result};
use crate::prob_tree::{AdaptedProcess, ScenarioTree};
use crate::representation::{GeneratorSpec, LhatResult, MarginalUtility};
use serde::{Deserialize, Serialize};

/// Interest rate, discount, initial satisfaction, multiplier and utility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsumptionSpec {
    pub rate: AdaptedProcess,
    pub beta: f64,
    pub eta: f64,
    pub lambda: f64,
    pub utility: MarginalUtility,
}

impl ConsumptionSpec {
    pub fn validate(&self, tree: &ScenarioTree) -> Result<()> {
        self.rate.check(tree, "interest rate")?;
        self.rate.check_finite("interest rate")?;
        for (name, v) in [("beta", self.beta), ("eta", self.eta), ("lambda", self.lambda)] {
            if !(v.is_finite() && v > 0.0) {
                return invalid(format!("{name} must be positive, got {v}"));
            }
        }
        self.utility.validate(tree)
    }

    /// Discount factors `D_k = exp(−Σ_{j<k} r_j dt)`.
    pub fn discount(&self, tree: &ScenarioTree) -> AdaptedProcess {
        let dt = tree.dt();
        let mut d = vec![1.0; tree.len()];
        for t in 0..tree.grid().steps {
            for &n in tree.nodes_at(t) {
                for b in tree.children(n) {
                    d[b.id] = d[n] * (-self.rate.values[n] * dt).exp();
                }
            }
        }
        AdaptedProcess::new(d)
    }
}

/// The generator `f(ℓ) = −β e^{−βt} u′(t, −e^{−βt}/ℓ)` for `ℓ < 0`, `ℓ` otherwise.
pub fn consumption_generator(spec: &ConsumptionSpec) -> GeneratorSpec {
    GeneratorSpec::Consumption { beta: spec.beta, utility: spec.utility.clone() }
}

/// Deflator `−λ e^{−βt} D` before the horizon, zero on leaves.
pub fn deflator_y(tree: &ScenarioTree, spec: &ConsumptionSpec) -> AdaptedProcess {
    let d = spec.discount(tree);
    AdaptedProcess::from_fn(tree, |n| {
        if n.children.is_empty() {
            0.0
        } else {
            -spec.lambda * (-spec.beta * tree.grid().time(n.t)).exp() * d.values[n.id]
        }
    })
}

/// Optimal plan read off `L̂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsumptionPlan {
    /// Satisfaction `Y^C`.
    pub satisfaction: AdaptedProcess,
    /// Consumption increments `ΔC_k` stored at the node of time `k`.
    pub increments: AdaptedProcess,
    /// Cumulative consumption.
    pub cumulative: AdaptedProcess,
    /// `E[Σ D_k ΔC_k]`.
    pub budget: f64,
    /// `E[Σ_{k<N} u(t_k, S_k) dt]`.
    pub utility: f64,
    /// Bound on the discarded tail `e^{−βT}/β · sup u′` at the satisfaction floor.
    pub tail_bound: f64,
}

/// Satisfaction `S_k = e^{−βt_k} (η ∨ −1/M_k)` with `M_k = max_{j≤k} L_j`,
/// and the increments and budget it implies.
pub fn consumption_from_lhat(tree: &ScenarioTree, lhat: &LhatResult, spec: &ConsumptionSpec) -> Result<ConsumptionPlan> {
    spec.validate(tree)?;
    lhat.lhat.check(tree, "L̂")?;
    let grid = tree.grid();
    let mut s = vec![0.0; tree.len()];
    for n in tree.nodes() {
        let disc = (-spec.beta * grid.time(n.t)).exp();
        match n.children.first() {
            Some(b) => {
                let m = lhat.lhat.values[b.id];
                if !(m < 0.0) {
                    return Err(Error::Refused(format!(
                        "running maximum {m} at node {} is not negative; the deflator representation is invalid",
                        n.id
                    )));
                }
                s[n.id] = disc * spec.eta.max(-1.0 / m);
            }
            None => s[n.id] = f64::NAN,
        }
    }
    let decay = (-spec.beta * tree.dt()).exp();
    for n in tree.nodes() {
        if n.children.is_empty() {
            s[n.id] = decay * s[n.parent.expect("leaves have parents")];
        }
    }
    let mut dc = vec![0.0; tree.len()];
    for n in tree.nodes() {
        dc[n.id] = match n.parent {
            None => (s[n.id] - spec.eta) / spec.beta,
            Some(p) => (s[n.id] - decay * s[p]) / spec.beta,
        };
        if dc[n.id].abs() < 1e-15 * (1.0 + s[n.id].abs()) {
            dc[n.id] = dc[n.id].max(0.0);
        }
    }
    let increments = AdaptedProcess::new(dc);
    let budget = consumption_budget(tree, spec, &increments)?;
    let utility = consumption_utility(tree, spec, &increments)?;
    let cumulative = cumulate(tree, &increments);
    let floor_marginal = tree
        .nodes()
        .iter()
        .map(|n| spec.utility.marginal(n.id, spec.eta * (-spec.beta * grid.time(n.t)).exp()))
        .fold(0.0, f64::max);
    let tail_bound = (-spec.beta * grid.horizon).exp() / spec.beta * floor_marginal;
    Ok(ConsumptionPlan { satisfaction: AdaptedProcess::new(s), increments, cumulative, budget, utility, tail_bound })
}

fn cumulate(tree: &ScenarioTree, dc: &AdaptedProcess) -> AdaptedProcess {
    let mut c = dc.values.clone();
    for t in 0..tree.grid().steps {
        for &n in tree.nodes_at(t) {
            for b in tree.children(n) {
                c[b.id] = c[n] + dc.values[b.id];
            }
        }
    }
    AdaptedProcess::new(c)
}

fn check_increments(tree: &ScenarioTree, dc: &AdaptedProcess) -> Result<()> {
    dc.check(tree, "consumption increments")?;
    dc.check_finite("consumption increments")?;
    if let Some(i) = dc.values.iter().position(|&v| v < -1e-12) {
        return invalid(format!("consumption decreases at node {i}"));
    }
    Ok(())
}

/// Satisfaction from increments by the left-Riemann recursion.
pub fn satisfaction_from_increments(tree: &ScenarioTree, spec: &ConsumptionSpec, dc: &AdaptedProcess) -> Result<AdaptedProcess> {
    spec.validate(tree)?;
    check_increments(tree, dc)?;
    let decay = (-spec.beta * tree.dt()).exp();
    let mut s = vec![0.0; tree.len()];
    s[tree.root()] = spec.eta + spec.beta * dc.values[tree.root()];
    for t in 0..tree.grid().steps {
        for &n in tree.nodes_at(t) {
            for b in tree.children(n) {
                s[b.id] = decay * s[n] + spec.beta * dc.values[b.id];
            }
        }
    }
    Ok(AdaptedProcess::new(s))
}

/// `U(C) = E[Σ_{k<N} u(t_k, S_k) dt]`.
pub fn consumption_utility(tree: &ScenarioTree, spec: &ConsumptionSpec, dc: &AdaptedProcess) -> Result<f64> {
    let s = satisfaction_from_increments(tree, spec, dc)?;
    let dt = tree.dt();
    Ok(tree
        .nodes()
        .iter()
        .filter(|n| !n.children.is_empty())
        .map(|n| tree.node_prob(n.id) * spec.utility.utility(n.id, s.values[n.id]) * dt)
        .sum())
}

/// `b = E[Σ_k D_k ΔC_k]`.
pub fn consumption_budget(tree: &ScenarioTree, spec: &ConsumptionSpec, dc: &AdaptedProcess) -> Result<f64> {
    spec.validate(tree)?;
    check_increments(tree, dc)?;
    let d = spec.discount(tree);
    Ok(tree.nodes().iter().map(|n| tree.node_prob(n.id) * d.values[n.id] * dc.values[n.id]).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob_tree::TimeGrid;
    use crate::representation::{lhat_from_l, solve_snell_bisection, Method};

    fn spec(tree: &ScenarioTree, r: f64) -> ConsumptionSpec {
        ConsumptionSpec {
            rate: AdaptedProcess::constant(tree, r),
            beta: 0.5,
            eta: 1.0,
            lambda: 0.8,
            utility: MarginalUtility::Crra { gamma: 2.0, scale: AdaptedProcess::constant(tree, 1.0) },
        }
    }

    fn with_lhat(tree: &ScenarioTree, lhat: Vec<f64>) -> LhatResult {
        LhatResult {
            method: Method::Exact,
            lhat: AdaptedProcess::new(lhat),
            l: AdaptedProcess::zeros(tree),
            levels: vec![],
            stop_times: vec![],
            cell: 0.0,
            residual: 0.0,
        }
    }

    #[test]
    fn floor_level_means_no_consumption() {
        let tree = ScenarioTree::chain(TimeGrid::new(1.0, 3).unwrap()).unwrap();
        let sp = spec(&tree, 0.1);
        let r = with_lhat(&tree, vec![f64::NEG_INFINITY, -1.0, -1.0, -1.0]);
        let plan = consumption_from_lhat(&tree, &r, &sp).unwrap();
        assert!(plan.increments.values.iter().all(|&v| v.abs() < 1e-15));
        for n in 0..3 {
            let t = tree.time_of(n);
            assert!((plan.satisfaction.values[n] - (-0.5 * t).exp()).abs() < 1e-15);
        }
        assert_eq!(plan.budget, 0.0);
    }

    #[test]
    fn rising_level_doubles_satisfaction() {
        let tree = ScenarioTree::chain(TimeGrid::new(1.0, 3).unwrap()).unwrap();
        let sp = spec(&tree, 0.0);
        // L̂ from −2/η to −1/(2η): −1/L̂ rises from 0.5 to 2.
        let r = with_lhat(&tree, vec![f64::NEG_INFINITY, -2.0, -2.0, -0.5]);
        let plan = consumption_from_lhat(&tree, &r, &sp).unwrap();
        let decay = (-0.5f64 / 3.0).exp();
        assert!(plan.increments.values[0].abs() < 1e-15);
        assert!(plan.increments.values[1].abs() < 1e-15);
        assert!(plan.increments.values[2] > 0.0);
        assert!((plan.satisfaction.values[2] / (decay * plan.satisfaction.values[1]) - 2.0).abs() < 1e-12);
        let recomputed = consumption_budget(&tree, &sp, &plan.increments).unwrap();
        assert!((recomputed - plan.budget).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonnegative_level() {
        let tree = ScenarioTree::chain(TimeGrid::new(1.0, 2).unwrap()).unwrap();
        let r = with_lhat(&tree, vec![f64::NEG_INFINITY, 0.0, 0.1]);
        assert!(matches!(consumption_from_lhat(&tree, &r, &spec(&tree, 0.0)), Err(Error::Refused(_))));
    }

    #[test]
    fn utility_examples() {
        let tree = ScenarioTree::chain(TimeGrid::new(1.0, 2).unwrap()).unwrap();
        let sp = spec(&tree, 0.0);
        let zero = AdaptedProcess::zeros(&tree);
        let u0 = consumption_utility(&tree, &sp, &zero).unwrap();
        // u(x) = −1/x at floor satisfaction e^{−βt}: −(1 + e^{0.25})·0.5.
        assert!((u0 + 0.5 * (1.0 + 0.25f64.exp())).abs() < 1e-12);
        let c = AdaptedProcess::new(vec![0.1, 0.2, 0.0]);
        let c2 = c.map(|v| 2.0 * v);
        assert!(consumption_utility(&tree, &sp, &c2).unwrap() > consumption_utility(&tree, &sp, &c).unwrap());
        // Hand sum: S_0 = 1.05, S_1 = e^{−0.25}·1.05 + 0.1.
        let s1 = (-0.25f64).exp() * 1.05 + 0.1;
        assert!((consumption_utility(&tree, &sp, &c).unwrap() - 0.5 * (-1.0 / 1.05 - 1.0 / s1)).abs() < 1e-12);
    }

    #[test]
    fn optimal_plan_beats_budget_grid() {
        let tree = ScenarioTree::chain(TimeGrid::new(1.0, 2).unwrap()).unwrap();
        let sp = ConsumptionSpec { lambda: 0.3, ..spec(&tree, 0.2) };
        let y = deflator_y(&tree, &sp);
        let f = consumption_generator(&sp);
        let r = solve_snell_bisection(&tree, &y, &f).unwrap();
        let plan = consumption_from_lhat(&tree, &r, &sp).unwrap();
        assert!(plan.budget > 0.0);
        let d = sp.discount(&tree);
        let mut best = f64::NEG_INFINITY;
        let steps = 20000;
        for i in 0..=steps {
            let c0 = plan.budget / d.values[0] * i as f64 / steps as f64;
            let c1 = (plan.budget - d.values[0] * c0) / d.values[1];
            let dc = AdaptedProcess::new(vec![c0, c1.max(0.0), 0.0]);
            best = best.max(consumption_utility(&tree, &sp, &dc).unwrap());
        }
        assert!(plan.utility >= best - 1e-6, "{} < {best}", plan.utility);
        assert_eq!(lhat_from_l(&tree, &r.l), r.lhat);
    }
}
