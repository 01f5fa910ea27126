//! Mean-field games of timing, singular control and consumption.
//!
//! Each game is turned into an [`Adapter`] whose coefficients depend on the
//! candidate measure through [`interaction_stat`](crate::meanfield::interaction_stat),
//! solved by one of the fixed-point engines, and checked by an
//! [`EquilibriumCertificate`] computed from independent optimizers.

mod consumption;
mod singular;
mod timing;

pub use consumption::{consumption_mfg_equilibrium, ConsumptionEquilibrium, ConsumptionGame, ConsumptionMode};
pub use singular::{singular_mfg_equilibrium, SingularEquilibrium, SingularGame};
pub use timing::{estimate_delta, timing_equilibrium, TimingEquilibrium, TimingGame};

use crate::error::{invalid, Result};
use crate::meanfield::{
    picard_solve, tarski_bracket, Adapter, FixedPointReport, InteractionAdapter, MeanFieldProblem, PicardConfig, PsiSpec,
    ReprMethod,
};
use crate::metrics_order::{Outcome, VPlusPath};
use crate::prob_tree::{AdaptedProcess, ScenarioTree};
use crate::representation::GeneratorSpec;
use serde::{Deserialize, Serialize};

// ── Engines ───────────────────────────────────────────────────────────

/// Fixed-point engine and its knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Engine {
    Picard { damping: f64, tol: f64, max_iter: usize },
    /// Monotone iteration on `cells` uniform levels of `[lower, upper]`, which serve
    /// both as the representation grid and as the outcome quantization.
    Tarski { lower: f64, upper: f64, cells: usize, max_iter: usize },
}

impl Default for Engine {
    fn default() -> Self {
        let c = PicardConfig::default();
        Engine::Picard { damping: c.damping, tol: c.tol, max_iter: c.max_iter }
    }
}

impl Engine {
    /// Consistency tolerance the engine promises on success.
    pub fn tolerance(&self) -> f64 {
        match self {
            Engine::Picard { tol, .. } => *tol,
            Engine::Tarski { .. } => 0.0,
        }
    }

    fn levels(&self) -> Result<Vec<f64>> {
        match *self {
            Engine::Tarski { lower, upper, cells, .. } => {
                if !(lower.is_finite() && upper.is_finite() && lower < upper) || cells < 2 {
                    return invalid("monotone engine needs finite bounds lower < upper and at least two cells");
                }
                Ok((0..cells).map(|i| lower + (upper - lower) * i as f64 / (cells - 1) as f64).collect())
            }
            Engine::Picard { .. } => Ok(vec![]),
        }
    }
}

/// An adapter that can build constant outcomes of its own shape (lattice extremes,
/// starting measures).
pub trait GameAdapter: Adapter {
    fn constant_outcome(&self, tree: &ScenarioTree, c: f64) -> Result<Outcome>;
}

/// Result of running an engine; `greatest` and `coincide` come from the top-started monotone run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineRun {
    pub report: FixedPointReport,
    pub greatest: Option<FixedPointReport>,
    pub coincide: Option<bool>,
}

/// Build the problem for `engine` and run it. Picard starts from the constant outcome 0.
pub fn run_engine<A: GameAdapter>(
    tree: &ScenarioTree,
    adapter: A,
    method: ReprMethod,
    engine: &Engine,
) -> Result<(MeanFieldProblem<A>, EngineRun)> {
    match *engine {
        Engine::Picard { damping, tol, max_iter } => {
            let problem = MeanFieldProblem::new(tree.clone(), adapter, method);
            let m0 = problem.dirac(problem.adapter.constant_outcome(tree, 0.0)?);
            let report = picard_solve(&problem, &m0, &PicardConfig { damping, tol, max_iter })?;
            Ok((problem, EngineRun { report, greatest: None, coincide: None }))
        }
        Engine::Tarski { lower, upper, max_iter, .. } => {
            let levels = engine.levels()?;
            let problem =
                MeanFieldProblem::new(tree.clone(), adapter, ReprMethod::FixedLevels { levels: levels.clone() })
                    .with_quantization(levels)?;
            let bottom = problem.dirac(problem.adapter.constant_outcome(tree, lower)?);
            let top = problem.dirac(problem.adapter.constant_outcome(tree, upper)?);
            let b = tarski_bracket(&problem, &bottom, &top, max_iter)?;
            Ok((problem, EngineRun { report: b.least, greatest: Some(b.greatest), coincide: Some(b.coincide) }))
        }
    }
}

impl GameAdapter for InteractionAdapter {
    fn constant_outcome(&self, tree: &ScenarioTree, c: f64) -> Result<Outcome> {
        let grid = tree.grid();
        let path = VPlusPath::new(grid.times(), vec![c; grid.steps])?;
        Ok(match self.psi {
            PsiSpec::WithState => Outcome::Composite { path, vector: vec![c; grid.steps + 1] },
            _ => Outcome::Path(path),
        })
    }
}

// ── Certificates ──────────────────────────────────────────────────────

/// Optimality gap of one population (or query level).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationGap {
    pub label: String,
    pub achieved: f64,
    /// Best value from an exact optimizer (Snell envelope or control DP).
    pub best: f64,
    /// Best value over an exhaustive enumeration, when it ran.
    pub enumerated_best: Option<f64>,
    /// `best − achieved` for maximization, `achieved − best` for minimization, never negative.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumCertificate {
    /// `d_LP(m*, Φ(m*))`.
    pub consistency_gap: f64,
    pub consistency_tol: f64,
    pub populations: Vec<PopulationGap>,
    pub max_gap: f64,
    /// Declared bound on optimality gaps.
    pub gap_tol: f64,
    pub passed: bool,
}

impl EquilibriumCertificate {
    pub fn new(consistency_gap: f64, consistency_tol: f64, populations: Vec<PopulationGap>, gap_tol: f64) -> Self {
        let max_gap = populations.iter().map(|p| p.gap).fold(0.0, f64::max);
        let passed = consistency_gap <= consistency_tol && max_gap <= gap_tol;
        EquilibriumCertificate { consistency_gap, consistency_tol, populations, max_gap, gap_tol, passed }
    }
}

// ── Interpolation ─────────────────────────────────────────────────────

/// Family `g_ℓ` from `g_1, …, g_n`: `g_i` at integer `ℓ = i`, linear in between, and
/// extended with slope 1 (`g_1 + (ℓ − 1)` below 1, `g_n + (ℓ − n)` above `n`).
pub fn interpolate_populations(tree: &ScenarioTree, g: &[AdaptedProcess]) -> Result<GeneratorSpec> {
    if g.is_empty() {
        return invalid("need at least one population reward");
    }
    for (i, gi) in g.iter().enumerate() {
        gi.check(tree, &format!("population reward {}", i + 1))?;
        gi.check_finite(&format!("population reward {}", i + 1))?;
    }
    if g.len() == 1 {
        return Ok(GeneratorSpec::Affine { a: g[0].map(|v| v - 1.0), b: 1.0 });
    }
    for n in 0..tree.len() {
        if let Some(i) = (0..g.len() - 1).find(|&i| g[i + 1].values[n] <= g[i].values[n]) {
            return invalid(format!(
                "population rewards are not strictly increasing at node {n} between populations {} and {}",
                i + 1,
                i + 2
            ));
        }
    }
    let spec = GeneratorSpec::Table {
        knots: (1..=g.len()).map(|i| i as f64).collect(),
        values: (0..tree.len()).map(|n| g.iter().map(|gi| gi.values[n]).collect()).collect(),
        b_ext: 1.0,
    };
    spec.validate(tree)?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob_tree::TimeGrid;

    #[test]
    fn interpolation_examples() {
        let tree = ScenarioTree::chain(TimeGrid::new(1.0, 2).unwrap()).unwrap();
        let g1 = AdaptedProcess::constant(&tree, 0.0);
        let g2 = AdaptedProcess::constant(&tree, 2.0);
        let f = interpolate_populations(&tree, &[g1.clone(), g2.clone()]).unwrap();
        assert_eq!(f.eval(&tree, 0, 1.0), 0.0);
        assert_eq!(f.eval(&tree, 0, 2.0), 2.0);
        assert_eq!(f.eval(&tree, 1, 1.5), 1.0);
        assert_eq!(f.eval(&tree, 1, 0.0), -1.0);
        assert_eq!(f.eval(&tree, 1, 4.0), 4.0);
        let single = interpolate_populations(&tree, &[g2.clone()]).unwrap();
        for l in [-3.0, 0.5, 1.0, 7.0] {
            assert_eq!(single.eval(&tree, 0, l), 2.0 + (l - 1.0));
        }
        assert!(interpolate_populations(&tree, &[g2, g1]).is_err());
    }
}
