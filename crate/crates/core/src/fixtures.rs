//! Seeded instance generators shared by the command line, tests and guide.

use crate::error::{invalid, Result};
use crate::meanfield::{InteractionAdapter, LTable, PsiSpec};
use crate::mfg_apps::{ConsumptionGame, ConsumptionMode, SingularGame, TimingGame};
use crate::optimizers::{ConsumptionSpec, SingularControlSpec};
use crate::prob_tree::{AdaptedProcess, ScenarioTree, TimeGrid};
use crate::representation::{GeneratorSpec, MarginalUtility};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type FixtureRng = ChaCha8Rng;

pub fn rng(seed: u64) -> FixtureRng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ── Trees and processes ───────────────────────────────────────────────

/// Shape of a scenario tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TreeShape {
    Chain { horizon: f64, steps: usize },
    Uniform { horizon: f64, steps: usize, branching: usize },
    /// Random branching in `1..=max_branch` with `atoms` common-noise atoms.
    Random { horizon: f64, steps: usize, max_branch: usize, atoms: usize },
    Inline { tree: ScenarioTree },
}

impl TreeShape {
    pub fn is_random(&self) -> bool {
        matches!(self, TreeShape::Random { .. })
    }

    pub fn build(&self, rng: &mut FixtureRng) -> Result<ScenarioTree> {
        match self {
            TreeShape::Chain { horizon, steps } => ScenarioTree::chain(TimeGrid::new(*horizon, *steps)?),
            TreeShape::Uniform { horizon, steps, branching } => {
                ScenarioTree::uniform(TimeGrid::new(*horizon, *steps)?, *branching)
            }
            TreeShape::Random { horizon, steps, max_branch, atoms } => {
                ScenarioTree::random(rng, TimeGrid::new(*horizon, *steps)?, *max_branch, *atoms)
            }
            TreeShape::Inline { tree } => Ok(tree.clone()),
        }
    }
}

/// Uniform draws in `[lo, hi)` on non-terminal nodes, `0` on leaves.
pub fn terminal_zero(tree: &ScenarioTree, rng: &mut FixtureRng, lo: f64, hi: f64) -> AdaptedProcess {
    let v = AdaptedProcess::random(tree, rng, lo, hi);
    AdaptedProcess::from_fn(tree, |n| if n.children.is_empty() { 0.0 } else { v.values[n.id] })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Affine,
    /// Strictly increasing piecewise-linear rows on knots `−2, …, 2`.
    Table,
}

pub fn random_generator(tree: &ScenarioTree, rng: &mut FixtureRng, kind: GeneratorKind) -> GeneratorSpec {
    match kind {
        GeneratorKind::Affine => {
            GeneratorSpec::Affine { a: AdaptedProcess::random(tree, rng, -1.0, 1.0), b: rng.random_range(0.5..2.0) }
        }
        GeneratorKind::Table => {
            let knots = vec![-2.0, -1.0, 0.0, 1.0, 2.0];
            let values = (0..tree.len())
                .map(|_| {
                    let mut v = rng.random_range(-1.0..1.0) - 2.0;
                    knots
                        .iter()
                        .map(|_| {
                            v += rng.random_range(0.2..2.0);
                            v
                        })
                        .collect()
                })
                .collect();
            GeneratorSpec::Table { knots, values, b_ext: rng.random_range(0.5..1.5) }
        }
    }
}

// ── Games ─────────────────────────────────────────────────────────────

/// Two-population timing game: `g_2 = g_1 + gap`, random terminal reward.
pub fn timing_game(tree: &ScenarioTree, rng: &mut FixtureRng, kappa: f64, epsilon: f64) -> TimingGame {
    let g1 = AdaptedProcess::random(tree, rng, -1.0, 0.0);
    let g2 = g1.map(|v| v + 1.5);
    TimingGame {
        rewards: vec![g1, g2],
        terminal: AdaptedProcess::random(tree, rng, -0.5, 0.5),
        kappa,
        kappa_g: 0.5 * kappa,
        epsilon,
        delta: None,
        levels: vec![0.5, 1.0, 1.5, 2.0, 2.5],
    }
}

/// Populations with shared affine `c′` and proportional cost, floor 0 and constant caps.
pub fn singular_game(tree: &ScenarioTree, rng: &mut FixtureRng, kappa: f64, caps: &[f64]) -> SingularGame {
    let k = terminal_zero(tree, rng, 0.0, 1.0);
    let c_prime = GeneratorSpec::Affine { a: AdaptedProcess::random(tree, rng, -1.0, 1.0), b: 1.0 };
    SingularGame {
        populations: caps
            .iter()
            .map(|&c| SingularControlSpec { floor: 0.0, cap: AdaptedProcess::constant(tree, c), c_prime: c_prime.clone(), k: k.clone() })
            .collect(),
        kappa,
        grid_points: 21,
    }
}

/// CRRA consumption game with constant rate.
pub fn consumption_game(tree: &ScenarioTree, rate: f64, beta: f64, kappa: f64, mode: ConsumptionMode) -> ConsumptionGame {
    ConsumptionGame {
        spec: ConsumptionSpec {
            rate: AdaptedProcess::constant(tree, rate),
            beta,
            eta: 1.0,
            lambda: 0.2,
            utility: MarginalUtility::Crra { gamma: 2.0, scale: AdaptedProcess::constant(tree, 1.0) },
        },
        kappa,
        eta_bar: 1e6,
        mode,
    }
}

/// Reference adapter with random terminal-zero `Y` and `f(ℓ) = ℓ`.
pub fn interaction_problem(tree: &ScenarioTree, rng: &mut FixtureRng, h_y: f64, kappa: f64, psi: PsiSpec) -> InteractionAdapter {
    let y = terminal_zero(tree, rng, -1.0, 1.0);
    InteractionAdapter { psi, ..InteractionAdapter::new(y, GeneratorSpec::identity(tree), h_y, kappa) }
}

/// Random table of nondecreasing `L` paths over `steps` times.
pub fn monotone_l_table(rng: &mut FixtureRng, paths: usize, steps: usize) -> Result<LTable> {
    if paths == 0 || steps == 0 {
        return invalid("need at least one path and one step");
    }
    let mut probs: Vec<f64> = (0..paths).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    let table = (0..paths)
        .map(|_| {
            let mut v = rng.random_range(-2.0..0.0);
            (0..steps)
                .map(|_| {
                    v += rng.random_range(0.0..0.5);
                    v
                })
                .collect()
        })
        .collect();
    Ok(LTable { probs, paths: table })
}
