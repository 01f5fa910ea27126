//! Mean-field game of monotone-follower control.
//!
//! Populations share the cost data `(c′, k)` and differ in floor and cap. With
//! `Y^m = −k` and `f^m = c′(·, m, ·)`, every population's optimizer is a clamp of
//! the same `L̂^m`, and `Ψ` collects the clamped paths of all populations.

use super::{run_engine, Engine, EngineRun, EquilibriumCertificate, GameAdapter, PopulationGap};
use crate::error::{invalid, Result};
use crate::meanfield::{interaction_stat, Adapter, Coefficients, ReprMethod};
use crate::metrics_order::{Outcome, RandomMeasure};
use crate::optimizers::{singular_cost, singular_grid_minimum, singular_optimizer, SingularControlSpec};
use crate::prob_tree::{AdaptedProcess, PathRecord, ScenarioTree};
use crate::representation::{GeneratorSpec, LhatResult};
use serde::{Deserialize, Serialize};

const SLACK: f64 = 1e-9;

/// Populations and the interaction strength `κ` in `c′^m = c′ − κ s(m)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularGame {
    pub populations: Vec<SingularControlSpec>,
    pub kappa: f64,
    /// Grid points per node for the control-grid comparison (0 disables it).
    pub grid_points: usize,
}

impl SingularGame {
    fn validate(&self, tree: &ScenarioTree) -> Result<()> {
        let first = self.populations.first().ok_or_else(|| crate::Error::Invalid("need at least one population".into()))?;
        for (i, p) in self.populations.iter().enumerate() {
            p.validate(tree)?;
            if p.c_prime != first.c_prime || p.k != first.k {
                return invalid(format!("population {i} does not share the running and control costs"));
            }
        }
        if !self.kappa.is_finite() {
            return invalid("interaction strength must be finite");
        }
        Ok(())
    }

    /// `c′(·, m, ·)` for interaction statistic `s`.
    pub fn marginal_cost(&self, s: &[f64]) -> GeneratorSpec {
        let base = &self.populations[0].c_prime;
        if self.kappa == 0.0 {
            return base.clone();
        }
        GeneratorSpec::Offset {
            base: Box::new(base.clone()),
            offset: AdaptedProcess::new(s.iter().map(|s| -self.kappa * s).collect()),
        }
    }

    fn population_at(&self, i: usize, s: &[f64]) -> SingularControlSpec {
        SingularControlSpec { c_prime: self.marginal_cost(s), ..self.populations[i].clone() }
    }
}

struct SingularAdapter {
    game: SingularGame,
}

fn stats(tree: &ScenarioTree, m: &RandomMeasure) -> Result<Vec<f64>> {
    (0..tree.len()).map(|n| interaction_stat(tree, m, n)).collect()
}

impl Adapter for SingularAdapter {
    fn coefficients(&self, tree: &ScenarioTree, m: &RandomMeasure) -> Result<Coefficients> {
        let s = stats(tree, m)?;
        Ok(Coefficients {
            x: AdaptedProcess::zeros(tree),
            y: self.game.populations[0].representation_target(),
            f: self.game.marginal_cost(&s),
        })
    }

    /// Clamps `θ_i ∨ (L̂ ∧ Θ̄^i)` at times `1, …, N`, population after population.
    fn psi(&self, tree: &ScenarioTree, path: &PathRecord, _: &Coefficients, lhat: &LhatResult) -> Result<Outcome> {
        let mut v = Vec::with_capacity(self.game.populations.len() * tree.grid().steps);
        for p in &self.game.populations {
            for &n in &path.nodes[1..] {
                v.push(p.floor.max(lhat.lhat.values[n].min(p.cap.values[n])));
            }
        }
        Ok(Outcome::Vector(v))
    }
}

impl GameAdapter for SingularAdapter {
    fn constant_outcome(&self, tree: &ScenarioTree, c: f64) -> Result<Outcome> {
        Ok(Outcome::Vector(vec![c; self.game.populations.len() * tree.grid().steps]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularEquilibrium {
    pub run: EngineRun,
    pub lhat: LhatResult,
    /// Optimal control of each population.
    pub controls: Vec<AdaptedProcess>,
    pub certificate: EquilibriumCertificate,
}

/// Solve the game and compare each population's clamp with the control-grid minimum.
pub fn singular_mfg_equilibrium(
    tree: &ScenarioTree,
    game: &SingularGame,
    engine: &Engine,
    method: ReprMethod,
) -> Result<SingularEquilibrium> {
    game.validate(tree)?;
    let (problem, run) = run_engine(tree, SingularAdapter { game: game.clone() }, method, engine)?;
    let eval = problem.evaluate(&run.report.m_star)?;
    let s = stats(tree, &run.report.m_star)?;
    let mut controls = Vec::new();
    let mut gaps = Vec::new();
    for i in 0..game.populations.len() {
        let spec = game.population_at(i, &s);
        let control = singular_optimizer(tree, &eval.lhat, &spec)?;
        let achieved = singular_cost(tree, &spec, &control)?;
        let (best, enumerated_best) = if game.grid_points >= 2 {
            let (g, _) = singular_grid_minimum(tree, &spec, game.grid_points)?;
            (g.min(achieved), Some(g))
        } else {
            (achieved, None)
        };
        gaps.push(PopulationGap { label: format!("population {i}"), achieved, best, enumerated_best, gap: (achieved - best).max(0.0) });
        controls.push(control);
    }
    let slack = eval.tolerance + SLACK;
    let certificate = EquilibriumCertificate::new(run.report.residual_consistency, engine.tolerance(), gaps, slack);
    Ok(SingularEquilibrium { run, lhat: eval.lhat, controls, certificate })
}
