//! Fixed points of the mean-field representation `m = law(Ψ(X^m, L̂^m) | G)`.
//!
//! An [`Adapter`] maps a candidate random measure `m` to coefficients
//! `(X^m, Y^m, f^m)` and evaluates the functional `Ψ` on each path. One
//! application of the map `Φ` solves the representation problem for those
//! coefficients and returns the conditional law of `Ψ` given the common-noise
//! partition. Three engines look for `m = Φ(m)`:
//!
//! * [`picard_solve`]: damped mixture iteration, with no convergence guarantee;
//! * [`tarski_solve`]: monotone iteration from a lattice extreme on a quantized
//!   outcome grid, certified as a `≤_p`-chain;
//! * [`dimension_reduction_solve`]: the exact scalar reduction `y = E[φ(L_t + y)]`.

mod audit;
mod picard;
mod reduction;
mod tarski;

pub use audit::{monotonicity_audit, shift_outcome, AuditReport, AuditWitness};
pub use picard::{picard_solve, PicardConfig};
pub use reduction::{dimension_reduction_solve, dimension_reduction_with_brackets, LTable, Phi, ReductionReport};
pub use tarski::{tarski_bracket, tarski_solve, Direction, TarskiBracket};

use crate::error::{invalid, Error, Result};
use crate::metrics_order::{lhat_vplus, conditional_law, Outcome, RandomMeasure};
use crate::prob_tree::{AdaptedProcess, NodeId, PathRecord, ScenarioTree};
use crate::representation::{
    default_levels, grid_tolerance, solve_essinf_bruteforce, solve_level_grid, solve_snell_bisection, GeneratorSpec,
    LhatResult,
};
use serde::{Deserialize, Serialize};

/// Tolerance on `Y^m_T = 0`.
const TERMINAL_TOL: f64 = 1e-12;

/// Representation tolerance advertised for exact solvers.
pub const EXACT_TOL: f64 = 1e-9;

// ── Problem ───────────────────────────────────────────────────────────

/// Coefficients `(X^m, Y^m, f^m)` for one candidate measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub x: AdaptedProcess,
    /// `Y^m`, zero on leaves.
    pub y: AdaptedProcess,
    pub f: GeneratorSpec,
}

/// The measure-dependent part of a mean-field problem.
pub trait Adapter: Send + Sync {
    fn coefficients(&self, tree: &ScenarioTree, m: &RandomMeasure) -> Result<Coefficients>;
    fn psi(&self, tree: &ScenarioTree, path: &PathRecord, coeffs: &Coefficients, lhat: &LhatResult) -> Result<Outcome>;
}

/// How each `Φ` application solves the representation problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReprMethod {
    /// Exact node-wise bisection on the Snell envelope.
    Exact,
    /// Brute-force essential infimum over stopping times.
    Oracle,
    /// `count` uniform levels spanning the one-step roots of the current coefficients.
    LevelGrid { count: usize },
    /// A level grid that does not move with `m`.
    FixedLevels { levels: Vec<f64> },
}

impl ReprMethod {
    pub fn solve(&self, tree: &ScenarioTree, y: &AdaptedProcess, f: &GeneratorSpec) -> Result<LhatResult> {
        match self {
            ReprMethod::Exact => solve_snell_bisection(tree, y, f),
            ReprMethod::Oracle => solve_essinf_bruteforce(tree, y, f),
            ReprMethod::LevelGrid { count } => solve_level_grid(tree, y, f, &default_levels(tree, y, f, *count)?),
            ReprMethod::FixedLevels { levels } => solve_level_grid(tree, y, f, levels),
        }
    }

    /// Advertised residual bound for a result of this method.
    pub fn tolerance(&self, result: &LhatResult, tree: &ScenarioTree, f: &GeneratorSpec) -> f64 {
        match self {
            ReprMethod::Exact | ReprMethod::Oracle => EXACT_TOL,
            _ => grid_tolerance(result, tree, f).max(EXACT_TOL),
        }
    }
}

/// Tree, adapter, representation method and optional outcome quantization.
#[derive(Debug, Clone)]
pub struct MeanFieldProblem<A> {
    pub tree: ScenarioTree,
    pub adapter: A,
    pub method: ReprMethod,
    /// Increasing value grid; outcome coordinates are snapped down onto it.
    pub quantization: Option<Vec<f64>>,
}

/// One application of `Φ`.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub law: RandomMeasure,
    pub coefficients: Coefficients,
    pub lhat: LhatResult,
    pub residual: f64,
    pub tolerance: f64,
}

impl<A: Adapter> MeanFieldProblem<A> {
    pub fn new(tree: ScenarioTree, adapter: A, method: ReprMethod) -> Self {
        MeanFieldProblem { tree, adapter, method, quantization: None }
    }

    pub fn with_quantization(mut self, grid: Vec<f64>) -> Result<Self> {
        if grid.is_empty() || grid.iter().any(|v| !v.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("quantization grid must be finite and strictly increasing");
        }
        self.quantization = Some(grid);
        Ok(self)
    }

    /// Coefficients for `m`, checked for a zero terminal value and a valid generator.
    pub fn coefficients(&self, m: &RandomMeasure) -> Result<Coefficients> {
        let c = self.adapter.coefficients(&self.tree, m)?;
        c.x.check(&self.tree, "X")?;
        c.y.check(&self.tree, "Y")?;
        c.y.check_finite("Y")?;
        if let Some(n) = (0..self.tree.len()).find(|&n| self.tree.is_terminal(n) && c.y.values[n].abs() > TERMINAL_TOL) {
            return invalid(format!("adapter returned Y = {} at leaf {n}; Y must vanish at the horizon", c.y.values[n]));
        }
        c.f.validate(&self.tree)?;
        Ok(c)
    }

    /// `Φ(m)` with the coefficients and representation it was built from.
    pub fn evaluate(&self, m: &RandomMeasure) -> Result<Evaluation> {
        m.validate()?;
        let coefficients = self.coefficients(m)?;
        let lhat = self.method.solve(&self.tree, &coefficients.y, &coefficients.f)?;
        let law = conditional_law(&self.tree, |p| {
            let o = self.adapter.psi(&self.tree, p, &coefficients, &lhat)?;
            self.quantize(&o)
        })?;
        let tolerance = self.method.tolerance(&lhat, &self.tree, &coefficients.f);
        Ok(Evaluation { law, residual: lhat.residual, coefficients, lhat, tolerance })
    }

    pub fn phi(&self, m: &RandomMeasure) -> Result<RandomMeasure> {
        Ok(self.evaluate(m)?.law)
    }

    /// Snap every coordinate down onto the quantization grid (identity without one).
    pub fn quantize(&self, o: &Outcome) -> Result<Outcome> {
        match &self.quantization {
            None => Ok(o.clone()),
            Some(g) => o.map_coords(|v| snap_down(g, v)),
        }
    }

    /// Apply [`Self::quantize`] to every support point of `m`.
    pub fn quantize_measure(&self, m: &RandomMeasure) -> Result<RandomMeasure> {
        let mut out = m.clone();
        for a in &mut out.atoms {
            for s in &mut a.support {
                s.outcome = self.quantize(&s.outcome)?;
            }
        }
        Ok(out.canonical())
    }

    /// Constant path `c` on the tree's time grid.
    pub fn constant_path(&self, c: f64) -> Result<Outcome> {
        let grid = self.tree.grid();
        Ok(Outcome::Path(crate::metrics_order::VPlusPath::new(grid.times(), vec![c; grid.steps])?))
    }

    /// Same outcome on every atom of the tree.
    pub fn dirac(&self, outcome: Outcome) -> RandomMeasure {
        let atoms: Vec<(usize, f64)> = self.tree.atoms().into_iter().map(|a| (a, self.tree.atom_mass(a))).collect();
        RandomMeasure::dirac(&atoms, outcome)
    }
}

/// Largest grid value `≤ v`, clamped into the grid range.
fn snap_down(grid: &[f64], v: f64) -> f64 {
    let i = grid.partition_point(|&g| g <= v);
    grid[i.saturating_sub(1)]
}

// ── Reports ───────────────────────────────────────────────────────────

/// Termination state of a fixed-point engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// Consistency residual below the requested tolerance.
    Converged,
    /// Exact stationarity of a quantized iteration.
    Stationary,
    /// Iteration budget exhausted.
    NotConverged,
}

/// Outcome of a fixed-point run with its residual trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub engine: String,
    pub status: Status,
    pub m_star: RandomMeasure,
    pub lhat_star: LhatResult,
    /// `d_LP(m_star, Φ(m_star))`.
    pub residual_consistency: f64,
    /// Representation residual at `m_star`.
    pub residual_representation: f64,
    /// Tolerance advertised by the representation method at `m_star`.
    pub representation_tolerance: f64,
    pub iterations: usize,
    /// Per-iteration residuals, one per iteration.
    pub trace: Vec<f64>,
}

impl FixedPointReport {
    pub fn converged(&self) -> bool {
        self.status != Status::NotConverged
    }

    /// `Err(NotConverged)` unless the run converged.
    pub fn require_converged(&self) -> Result<()> {
        if self.converged() {
            Ok(())
        } else {
            Err(Error::NotConverged(format!(
                "{} stopped after {} iterations with residual {:e}",
                self.engine, self.iterations, self.residual_consistency
            )))
        }
    }
}

// ── Interaction statistic and a reference adapter ─────────────────────

/// `s(n, m) = Σ_a P(a | F_n) ∫ tanh(mean of outcome coordinates) m_a(dx)`.
///
/// Nondecreasing in `m` for `≤_p` and a martingale in `n`.
pub fn interaction_stat(tree: &ScenarioTree, m: &RandomMeasure, node: NodeId) -> Result<f64> {
    let mut s = 0.0;
    for (atom, p) in tree.atom_posterior(node) {
        let law = m
            .atom(atom)
            .ok_or_else(|| Error::Mismatch(format!("measure has no law on atom {atom}")))?;
        s += p * law.support.iter().map(|w| w.w * tanh_mean(&w.outcome.coords())).sum::<f64>();
    }
    Ok(s)
}

fn tanh_mean(c: &[f64]) -> f64 {
    if c.is_empty() {
        return 0.0;
    }
    (c.iter().sum::<f64>() / c.len() as f64).tanh()
}

/// Functional `Ψ` of the reference adapter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PsiSpec {
    /// The path of `L̂`.
    Lhat,
    /// `L̂` clamped to `[lower, upper]`.
    Clamp { lower: f64, upper: f64 },
    /// `L̂` together with `X` along the path.
    WithState,
}

impl PsiSpec {
    pub fn eval(&self, tree: &ScenarioTree, path: &PathRecord, x: &AdaptedProcess, lhat: &LhatResult) -> Result<Outcome> {
        let p = lhat_vplus(tree, &lhat.lhat, path).map_err(|e| {
            Error::Refused(format!("running maximum is not finite after time 0 on a path ({e}); widen the level grid"))
        })?;
        match self {
            PsiSpec::Lhat => Ok(Outcome::Path(p)),
            PsiSpec::Clamp { lower, upper } => Outcome::Path(p).map_coords(|v| v.clamp(*lower, *upper)),
            PsiSpec::WithState => Ok(Outcome::Composite { path: p, vector: x.along(path) }),
        }
    }
}

/// `X^m = X + h_x s`, `Y^m_n = Y_n + h_y s_n (T − t_n)`, `f^m(ℓ) = f(ℓ − κ s)`
/// with `s` the [`interaction_stat`].
///
/// For `h_x, h_y, κ ≥ 0` the coefficients satisfy the monotone comparison
/// conditions: `m¹ ≤_p m²` gives `X^{m¹} ≤ X^{m²}`, `f^{m¹} ≥ f^{m²}` and a
/// submartingale `Y^{m¹} − Y^{m²}`, so `Φ` is nondecreasing for monotone `Ψ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionAdapter {
    pub x: AdaptedProcess,
    pub y: AdaptedProcess,
    pub f: GeneratorSpec,
    pub h_x: f64,
    pub h_y: f64,
    pub kappa: f64,
    pub psi: PsiSpec,
}

impl InteractionAdapter {
    /// No state, `h_x = 0`, `Ψ = L̂`.
    pub fn new(y: AdaptedProcess, f: GeneratorSpec, h_y: f64, kappa: f64) -> Self {
        let x = AdaptedProcess::new(vec![0.0; y.len()]);
        InteractionAdapter { x, y, f, h_x: 0.0, h_y, kappa, psi: PsiSpec::Lhat }
    }
}

impl Adapter for InteractionAdapter {
    fn coefficients(&self, tree: &ScenarioTree, m: &RandomMeasure) -> Result<Coefficients> {
        let s = (0..tree.len()).map(|n| interaction_stat(tree, m, n)).collect::<Result<Vec<f64>>>()?;
        let horizon = tree.grid().horizon;
        let x = AdaptedProcess::new(self.x.values.iter().zip(&s).map(|(x, s)| x + self.h_x * s).collect());
        let y = AdaptedProcess::from_fn(tree, |n| {
            if n.children.is_empty() {
                self.y.values[n.id]
            } else {
                self.y.values[n.id] + self.h_y * s[n.id] * (horizon - tree.grid().time(n.t))
            }
        });
        let f = if self.kappa == 0.0 {
            self.f.clone()
        } else {
            GeneratorSpec::Shifted {
                base: Box::new(self.f.clone()),
                shift: AdaptedProcess::new(s.iter().map(|s| self.kappa * s).collect()),
            }
        };
        Ok(Coefficients { x, y, f })
    }

    fn psi(&self, tree: &ScenarioTree, path: &PathRecord, coeffs: &Coefficients, lhat: &LhatResult) -> Result<Outcome> {
        self.psi.eval(tree, path, &coeffs.x, lhat)
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::prob_tree::TimeGrid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Depth-2 binary tree with two atoms and a random terminal-zero `Y`.
    pub fn depth2(seed: u64) -> (ScenarioTree, AdaptedProcess) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = ScenarioTree::random(&mut rng, TimeGrid::new(1.0, 2).unwrap(), 2, 2).unwrap();
        let y = AdaptedProcess::random(&tree, &mut rng, -1.0, 1.0);
        let y = AdaptedProcess::from_fn(&tree, |n| if n.children.is_empty() { 0.0 } else { y.values[n.id] });
        (tree, y)
    }

    pub fn problem(seed: u64, h_y: f64, kappa: f64, method: ReprMethod) -> MeanFieldProblem<InteractionAdapter> {
        let (tree, y) = depth2(seed);
        let f = GeneratorSpec::identity(&tree);
        MeanFieldProblem::new(tree, InteractionAdapter::new(y, f, h_y, kappa), method)
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use crate::metrics_order::VPlusPath;

    #[test]
    fn snapping_is_monotone_and_clamped() {
        let g = [-1.0, 0.0, 1.0];
        assert_eq!(snap_down(&g, -5.0), -1.0);
        assert_eq!(snap_down(&g, -0.5), -1.0);
        assert_eq!(snap_down(&g, 0.0), 0.0);
        assert_eq!(snap_down(&g, 7.0), 1.0);
    }

    #[test]
    fn no_interaction_gives_the_pushforward() {
        let p = problem(3, 0.0, 0.0, ReprMethod::Exact);
        let m0 = p.dirac(Outcome::Path(VPlusPath::new(p.tree.grid().times(), vec![0.0, 0.0]).unwrap()));
        let e = p.evaluate(&m0).unwrap();
        let m1 = p.dirac(Outcome::Path(VPlusPath::new(p.tree.grid().times(), vec![5.0, 5.0]).unwrap()));
        assert!(p.phi(&m1).unwrap().same_as(&e.law));
        assert!(e.residual <= e.tolerance);
    }

    #[test]
    fn stat_is_a_martingale() {
        let p = problem(5, 1.0, 1.0, ReprMethod::Exact);
        let e = p.evaluate(&p.dirac(p.constant_path(0.3).unwrap())).unwrap();
        let s = AdaptedProcess::new((0..p.tree.len()).map(|n| interaction_stat(&p.tree, &e.law, n).unwrap()).collect());
        let next = p.tree.expect_next(&s);
        for n in 0..p.tree.len() {
            if !p.tree.is_terminal(n) {
                assert!((next[n] - s.values[n]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_nonzero_terminal_value() {
        let (tree, _) = depth2(1);
        let y = AdaptedProcess::constant(&tree, 1.0);
        let p = MeanFieldProblem::new(tree.clone(), InteractionAdapter::new(y, GeneratorSpec::identity(&tree), 0.0, 0.0), ReprMethod::Exact);
        let m = p.dirac(p.constant_path(0.0).unwrap());
        assert!(matches!(p.evaluate(&m), Err(Error::Invalid(_))));
    }
}
