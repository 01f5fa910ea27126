//! Mean-field game of timing with a continuum of populations indexed by level.
//!
//! Population `ℓ` maximizes `E[G^m_τ + Σ_{s<τ} g_ℓ(s, m) dt]`. With
//! `Y^m = G^m` (normalized to vanish at the horizon) and `f^m(·, ℓ) = g_ℓ(·, m)`,
//! every population stops at a hitting time of the same `L̂^m`, so the
//! equilibrium is carried by `Ψ = L̂^m + δ t`, the linearly tilted running maximum.

use super::{interpolate_populations, run_engine, Engine, EngineRun, EquilibriumCertificate, GameAdapter, PopulationGap};
use crate::error::{invalid, Result};
use crate::meanfield::{interaction_stat, Adapter, Coefficients, ReprMethod};
use crate::metrics_order::{Outcome, RandomMeasure, VPlusPath};
use crate::optimizers::{certify_stopping, hitting_time_tilted};
use crate::prob_tree::{normalize_terminal, AdaptedProcess, PathRecord, ScenarioTree, StoppingTime};
use crate::representation::{snell_smallest_optimal, stopping_objective, GeneratorSpec, LhatResult};
use serde::{Deserialize, Serialize};

/// Largest tree on which every stopping time is enumerated.
const ENUMERATION_PATHS: usize = 16;
const SLACK: f64 = 1e-9;

/// Rewards `g_i`, terminal reward `G`, interaction strengths and tolerance.
///
/// `g_i^m = g_i − κ s(m)` and `G^m = G + κ_G s(m) (T − t)` with `s` the
/// interaction statistic; `κ, κ_G ≥ 0` give a monotone game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingGame {
    pub rewards: Vec<AdaptedProcess>,
    pub terminal: AdaptedProcess,
    pub kappa: f64,
    pub kappa_g: f64,
    pub epsilon: f64,
    /// Tilt `δ`; estimated from the generator when absent.
    pub delta: Option<f64>,
    /// Population levels whose stopping times are reported and certified.
    pub levels: Vec<f64>,
}

impl TimingGame {
    fn validate(&self, tree: &ScenarioTree) -> Result<()> {
        self.terminal.check(tree, "terminal reward")?;
        self.terminal.check_finite("terminal reward")?;
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return invalid("epsilon must be finite and nonnegative");
        }
        if !(self.kappa.is_finite() && self.kappa_g.is_finite()) {
            return invalid("interaction strengths must be finite");
        }
        if let Some(d) = self.delta {
            if !(d.is_finite() && d >= 0.0) {
                return invalid("tilt must be finite and nonnegative");
            }
        }
        if self.levels.is_empty() || self.levels.iter().any(|l| !l.is_finite()) {
            return invalid("need at least one finite query level");
        }
        interpolate_populations(tree, &self.rewards).map(|_| ())
    }

    /// `G^m`.
    pub fn reward(&self, tree: &ScenarioTree, s: &[f64]) -> AdaptedProcess {
        let horizon = tree.grid().horizon;
        AdaptedProcess::from_fn(tree, |n| self.terminal.values[n.id] + self.kappa_g * s[n.id] * (horizon - tree.grid().time(n.t)))
    }

    /// `g_ℓ(·, m)`.
    pub fn generator(&self, tree: &ScenarioTree, s: &[f64]) -> Result<GeneratorSpec> {
        let shifted: Vec<AdaptedProcess> = self
            .rewards
            .iter()
            .map(|g| AdaptedProcess::new(g.values.iter().zip(s).map(|(v, s)| v - self.kappa * s).collect()))
            .collect();
        interpolate_populations(tree, &shifted)
    }
}

/// Tilt `δ = ε / (3 T Lip)` from the Lipschitz constant of `ℓ ↦ g_ℓ`.
///
/// Uses the generator's global constant when it has one and otherwise the
/// largest sampled difference quotient over `[lo, hi]` at every node. The
/// second flag is `true` in the sampled (heuristic) case.
pub fn estimate_delta(tree: &ScenarioTree, f: &GeneratorSpec, epsilon: f64, lo: f64, hi: f64) -> (f64, bool) {
    let horizon = tree.grid().horizon;
    if let Some(lip) = f.lipschitz() {
        return (epsilon / (3.0 * horizon * lip), false);
    }
    let samples = 200;
    let mut lip: f64 = 0.0;
    for n in (0..tree.len()).filter(|&n| !tree.is_terminal(n)) {
        for i in 0..samples {
            let a = lo + (hi - lo) * i as f64 / samples as f64;
            let b = lo + (hi - lo) * (i + 1) as f64 / samples as f64;
            lip = lip.max((f.eval(tree, n, b) - f.eval(tree, n, a)) / (b - a));
        }
    }
    (epsilon / (3.0 * horizon * lip.max(f64::MIN_POSITIVE)), true)
}

struct TimingAdapter {
    game: TimingGame,
    delta: f64,
}

fn stats(tree: &ScenarioTree, m: &RandomMeasure) -> Result<Vec<f64>> {
    (0..tree.len()).map(|n| interaction_stat(tree, m, n)).collect()
}

impl Adapter for TimingAdapter {
    fn coefficients(&self, tree: &ScenarioTree, m: &RandomMeasure) -> Result<Coefficients> {
        let s = stats(tree, m)?;
        let (y, _) = normalize_terminal(tree, &self.game.reward(tree, &s))?;
        Ok(Coefficients { x: AdaptedProcess::zeros(tree), y, f: self.game.generator(tree, &s)? })
    }

    fn psi(&self, tree: &ScenarioTree, path: &PathRecord, _: &Coefficients, lhat: &LhatResult) -> Result<Outcome> {
        tilted_path(tree, path, lhat, self.delta).map(Outcome::Path)
    }
}

impl GameAdapter for TimingAdapter {
    fn constant_outcome(&self, tree: &ScenarioTree, c: f64) -> Result<Outcome> {
        let grid = tree.grid();
        Ok(Outcome::Path(VPlusPath::new(grid.times(), vec![c; grid.steps])?))
    }
}

/// `v_k = L̂_k + δ t_{k−1}` for `k = 1, …, N`: the population at level `ℓ` stops
/// at time `k − 1` once `v_k ≥ ℓ`.
fn tilted_path(tree: &ScenarioTree, path: &PathRecord, lhat: &LhatResult, delta: f64) -> Result<VPlusPath> {
    let grid = tree.grid();
    let values = (1..=grid.steps).map(|k| lhat.lhat.values[path.nodes[k]] + delta * grid.time(k - 1)).collect();
    VPlusPath::new(grid.times(), values)
}

/// Stopping time of one population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStop {
    pub level: f64,
    pub stop_nodes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingEquilibrium {
    pub run: EngineRun,
    pub delta: f64,
    pub delta_heuristic: bool,
    pub lhat: LhatResult,
    pub stopping: Vec<LevelStop>,
    pub certificate: EquilibriumCertificate,
}

/// Solve the game with `engine` and certify the tilted hitting times at every query level.
pub fn timing_equilibrium(tree: &ScenarioTree, game: &TimingGame, engine: &Engine, method: ReprMethod) -> Result<TimingEquilibrium> {
    game.validate(tree)?;
    let (delta, delta_heuristic) = match game.delta {
        Some(d) => (d, false),
        None => {
            let f = game.generator(tree, &vec![0.0; tree.len()])?;
            let lo = game.levels.iter().copied().fold(f64::INFINITY, f64::min) - 1.0;
            let hi = game.levels.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.0;
            estimate_delta(tree, &f, game.epsilon, lo, hi)
        }
    };
    let adapter = TimingAdapter { game: game.clone(), delta };
    let (problem, run) = run_engine(tree, adapter, method, engine)?;
    let eval = problem.evaluate(&run.report.m_star)?;
    let s = stats(tree, &run.report.m_star)?;
    let reward = game.reward(tree, &s);
    let f = &eval.coefficients.f;
    let mut stopping = Vec::new();
    let mut gaps = Vec::new();
    for &level in &game.levels {
        let tau = hitting_time_tilted(tree, &eval.lhat, level, delta);
        gaps.push(level_gap(tree, &reward, f, level, &tau)?);
        stopping.push(LevelStop { level, stop_nodes: tau.stop_nodes(tree) });
    }
    let slack = eval.tolerance + SLACK;
    let certificate =
        EquilibriumCertificate::new(run.report.residual_consistency, engine.tolerance(), gaps, game.epsilon + slack);
    Ok(TimingEquilibrium { run, delta, delta_heuristic, lhat: eval.lhat, stopping, certificate })
}

fn level_gap(
    tree: &ScenarioTree,
    reward: &AdaptedProcess,
    f: &GeneratorSpec,
    level: f64,
    tau: &StoppingTime,
) -> Result<PopulationGap> {
    let running = AdaptedProcess::from_fn(tree, |n| f.eval(tree, n.id, level));
    let achieved = stopping_objective(tree, reward, &running, tau);
    let (z, _) = snell_smallest_optimal(tree, reward, &running)?;
    let mut best = z.values[tree.root()];
    let enumerated_best = if tree.paths().len() <= ENUMERATION_PATHS {
        let c = certify_stopping(tree, reward, f, level, tau, ENUMERATION_PATHS, SLACK)?;
        best = best.max(c.best);
        Some(c.best)
    } else {
        None
    };
    let gap = (best - achieved).max(0.0);
    Ok(PopulationGap { label: format!("level {level}"), achieved, best, enumerated_best, gap })
}
