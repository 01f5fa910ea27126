//! Mean-field game of optimal consumption with satisfaction.
//!
//! In the general mode the marginal utility scale depends on the population
//! through `u′^m = u′ · exp(κ s(m))` and `Ψ = (r, ψ₂(ψ₁(L̂)))`, where `ψ₁` clamps
//! levels to `[−1/η, −1/η̄]` and `ψ₂(ℓ) = −e^{−βt}/ℓ` turns them into
//! satisfaction. In the reduction mode the interaction shifts the generator by
//! `y_t = E[φ(max(−1/η, L_t + y_t))]`, solved exactly per time.

use super::{run_engine, Engine, EngineRun, EquilibriumCertificate, GameAdapter};
use crate::error::{invalid, Error, Result};
use crate::meanfield::{dimension_reduction_solve, interaction_stat, Adapter, Coefficients, LTable, Phi, ReductionReport, ReprMethod};
use crate::metrics_order::{Outcome, RandomMeasure};
use crate::optimizers::{consumption_from_lhat, consumption_generator, deflator_y, ConsumptionPlan, ConsumptionSpec};
use crate::prob_tree::{AdaptedProcess, PathRecord, ScenarioTree};
use crate::representation::{lhat_from_l, GeneratorSpec, LhatResult};
use serde::{Deserialize, Serialize};

/// Residual bound for the scalar fixed points.
const REDUCTION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConsumptionMode {
    General,
    DimensionReduction { phi: Phi },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsumptionGame {
    pub spec: ConsumptionSpec,
    /// Strength of the utility-scale interaction in the general mode.
    pub kappa: f64,
    /// Upper satisfaction bound `η̄ > η` of the clamp `ψ₁`.
    pub eta_bar: f64,
    pub mode: ConsumptionMode,
}

impl ConsumptionGame {
    fn validate(&self, tree: &ScenarioTree) -> Result<()> {
        self.spec.validate(tree)?;
        if !(self.eta_bar.is_finite() && self.eta_bar > self.spec.eta) {
            return invalid("satisfaction cap must exceed the initial satisfaction");
        }
        if !self.kappa.is_finite() {
            return invalid("interaction strength must be finite");
        }
        Ok(())
    }

    fn spec_at(&self, s: &[f64]) -> ConsumptionSpec {
        if self.kappa == 0.0 {
            return self.spec.clone();
        }
        let factor = AdaptedProcess::new(s.iter().map(|s| (self.kappa * s).exp()).collect());
        ConsumptionSpec { utility: self.spec.utility.rescaled(&factor), ..self.spec.clone() }
    }

    /// `ψ₂(ψ₁(ℓ))` at time `t`.
    fn satisfaction(&self, t: f64, l: f64) -> f64 {
        let l = l.clamp(-1.0 / self.spec.eta, -1.0 / self.eta_bar);
        -(-self.spec.beta * t).exp() / l
    }
}

struct ConsumptionAdapter {
    game: ConsumptionGame,
}

fn stats(tree: &ScenarioTree, m: &RandomMeasure) -> Result<Vec<f64>> {
    (0..tree.len()).map(|n| interaction_stat(tree, m, n)).collect()
}

impl Adapter for ConsumptionAdapter {
    fn coefficients(&self, tree: &ScenarioTree, m: &RandomMeasure) -> Result<Coefficients> {
        let spec = self.game.spec_at(&stats(tree, m)?);
        Ok(Coefficients { x: spec.rate.clone(), y: deflator_y(tree, &spec), f: consumption_generator(&spec) })
    }

    /// Interest rates at times `0, …, N−1` followed by clamped satisfaction.
    fn psi(&self, tree: &ScenarioTree, path: &PathRecord, c: &Coefficients, lhat: &LhatResult) -> Result<Outcome> {
        let grid = tree.grid();
        let mut v: Vec<f64> = path.nodes[..grid.steps].iter().map(|&n| c.x.values[n]).collect();
        v.extend((0..grid.steps).map(|k| self.game.satisfaction(grid.time(k), lhat.lhat.values[path.nodes[k + 1]])));
        Ok(Outcome::Vector(v))
    }
}

impl GameAdapter for ConsumptionAdapter {
    fn constant_outcome(&self, tree: &ScenarioTree, c: f64) -> Result<Outcome> {
        Ok(Outcome::Vector(vec![c; 2 * tree.grid().steps]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsumptionEquilibrium {
    pub run: Option<EngineRun>,
    pub reduction: Option<ReductionReport>,
    pub lhat: LhatResult,
    pub plan: ConsumptionPlan,
    pub budget: f64,
    pub certificate: EquilibriumCertificate,
}

/// Solve the consumption game in the configured mode.
pub fn consumption_mfg_equilibrium(
    tree: &ScenarioTree,
    game: &ConsumptionGame,
    engine: &Engine,
    method: ReprMethod,
) -> Result<ConsumptionEquilibrium> {
    game.validate(tree)?;
    match &game.mode {
        ConsumptionMode::General => {
            let (problem, run) = run_engine(tree, ConsumptionAdapter { game: game.clone() }, method, engine)?;
            let eval = problem.evaluate(&run.report.m_star)?;
            let spec = game.spec_at(&stats(tree, &run.report.m_star)?);
            let plan = consumption_from_lhat(tree, &eval.lhat, &spec)?;
            let certificate =
                EquilibriumCertificate::new(run.report.residual_consistency, engine.tolerance(), vec![], f64::INFINITY);
            Ok(ConsumptionEquilibrium { budget: plan.budget, run: Some(run), reduction: None, lhat: eval.lhat, plan, certificate })
        }
        ConsumptionMode::DimensionReduction { phi } => reduce(tree, game, phi, &method),
    }
}

fn reduce(tree: &ScenarioTree, game: &ConsumptionGame, phi: &Phi, method: &ReprMethod) -> Result<ConsumptionEquilibrium> {
    let spec = &game.spec;
    let y = deflator_y(tree, spec);
    let f = consumption_generator(spec);
    let base = method.solve(tree, &y, &f)?;
    let table = LTable::from_tree(tree, &base.l)
        .and_then(|t| dimension_reduction_ready(&t).map(|_| t))
        .map_err(|e| Error::Refused(format!("the reduction needs levels that are finite and nondecreasing along paths ({e})")))?;
    let floored = Phi::Floored { inner: Box::new(phi.clone()), floor: -1.0 / spec.eta };
    let red = dimension_reduction_solve(&table, &floored, REDUCTION_TOL)?;
    let lhat = if red.y.iter().all(|&v| v == 0.0) {
        base.clone()
    } else {
        let shift = AdaptedProcess::from_fn(tree, |n| if n.children.is_empty() { 0.0 } else { red.y[n.t] });
        let shifted = GeneratorSpec::Shifted { base: Box::new(f.clone()), shift };
        method.solve(tree, &y, &shifted)?
    };
    // With nondecreasing L and y*, the shifted problem is solved by L + y*.
    let expected = lhat_from_l(
        tree,
        &AdaptedProcess::from_fn(tree, |n| {
            if n.children.is_empty() {
                f64::NEG_INFINITY
            } else {
                base.l.values[n.id] + red.y[n.t]
            }
        }),
    );
    let gap = lhat
        .lhat
        .values
        .iter()
        .zip(&expected.values)
        .filter(|(a, b)| a.is_finite() || b.is_finite())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let plan = consumption_from_lhat(tree, &lhat, spec)?;
    let tol = method.tolerance(&lhat, tree, &f).max(REDUCTION_TOL);
    let certificate = EquilibriumCertificate::new(gap.max(red.max_residual), tol, vec![], f64::INFINITY);
    Ok(ConsumptionEquilibrium { budget: plan.budget, run: None, reduction: Some(red), lhat, plan, certificate })
}

fn dimension_reduction_ready(t: &LTable) -> Result<()> {
    if t.paths.iter().flatten().any(|v| !v.is_finite()) || t.paths.iter().any(|p| p.windows(2).any(|w| w[1] < w[0])) {
        return invalid("levels are not finite and nondecreasing");
    }
    Ok(())
}
