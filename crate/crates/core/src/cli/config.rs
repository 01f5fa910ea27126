//! Versioned JSON run configuration.

use crate::fixtures::{GeneratorKind, TreeShape};
use crate::meanfield::{PsiSpec, ReprMethod};
use crate::metrics_order::VPlusPath;
use crate::mfg_apps::{ConsumptionGame, ConsumptionMode, Engine, SingularGame, TimingGame};
use crate::prob_tree::{AdaptedProcess, ScenarioTree};
use crate::representation::GeneratorSpec;
use serde::{Deserialize, Serialize};
use std::fmt;

pub const SCHEMA_VERSION: u32 = 1;

/// Parse or validation failure with the location of the offending value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub location: String,
    pub message: String,
}

impl ConfigError {
    fn at(location: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { location: location.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

impl std::error::Error for ConfigError {}

// ── Schema ────────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Mandatory when the task draws random data.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Output directory, used when neither `--out` nor `MFREP_OUT` is given.
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub knobs: Knobs,
    pub task: Task,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    Picard,
    Tarski,
}

/// Uniform value grid `[lower, upper]` with `cells` points for the monotone engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Quantization {
    pub lower: f64,
    pub upper: f64,
    pub cells: usize,
}

/// Solver knobs shared by every command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Knobs {
    /// Level count of the grid solver; the exact solver runs when absent.
    pub level_grid: Option<usize>,
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub engine: EngineKind,
    pub quantization: Option<Quantization>,
    /// Terms `M` of the truncated Lévy distance on `[0, ∞)`.
    pub truncation: usize,
}

impl Default for Knobs {
    fn default() -> Self {
        Knobs {
            level_grid: None,
            tol: 1e-8,
            max_iter: 100,
            damping: 1.0,
            engine: EngineKind::Picard,
            quantization: None,
            truncation: 8,
        }
    }
}

impl Knobs {
    pub fn method(&self) -> ReprMethod {
        match self.level_grid {
            Some(count) => ReprMethod::LevelGrid { count },
            None => ReprMethod::Exact,
        }
    }

    pub fn engine(&self) -> Engine {
        match (self.engine, &self.quantization) {
            (EngineKind::Tarski, Some(q)) => {
                Engine::Tarski { lower: q.lower, upper: q.upper, cells: q.cells, max_iter: self.max_iter }
            }
            _ => Engine::Picard { damping: self.damping, tol: self.tol, max_iter: self.max_iter },
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if let Some(c) = self.level_grid {
            if !(2..=100_000).contains(&c) {
                return Err(ConfigError::at("knobs.level_grid", "must lie in [2, 100000]"));
            }
        }
        if !(self.tol > 0.0 && self.tol <= 1.0) {
            return Err(ConfigError::at("knobs.tol", "must lie in (0, 1]"));
        }
        if !(1..=100_000).contains(&self.max_iter) {
            return Err(ConfigError::at("knobs.max_iter", "must lie in [1, 100000]"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(ConfigError::at("knobs.damping", "must lie in (0, 1]"));
        }
        if !(1..=64).contains(&self.truncation) {
            return Err(ConfigError::at("knobs.truncation", "must lie in [1, 64]"));
        }
        if let Some(q) = &self.quantization {
            if !(q.lower.is_finite() && q.upper.is_finite() && q.lower < q.upper) {
                return Err(ConfigError::at("knobs.quantization", "needs finite lower < upper"));
            }
            if !(2..=100_000).contains(&q.cells) {
                return Err(ConfigError::at("knobs.quantization.cells", "must lie in [2, 100000]"));
            }
        }
        if self.engine == EngineKind::Tarski && self.quantization.is_none() {
            return Err(ConfigError::at("knobs.quantization", "the tarski engine needs a quantization grid"));
        }
        Ok(())
    }
}

/// The command and its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Task {
    Represent {
        fixture: RepresentFixture,
    },
    MfgTiming {
        tree: TreeShape,
        game: TimingSource,
    },
    MfgSingular {
        tree: TreeShape,
        game: SingularSource,
    },
    MfgConsumption {
        tree: TreeShape,
        game: ConsumptionSource,
    },
    FixedPoint {
        tree: TreeShape,
        h_y: f64,
        kappa: f64,
        #[serde(default = "psi_default")]
        psi: PsiSpec,
        /// Ordered pairs for the monotonicity audit (0 skips it).
        #[serde(default)]
        audit_pairs: usize,
    },
    Stability {
        family: FamilySource,
        #[serde(default = "epsilon_default")]
        epsilon: f64,
        /// Level for the hitting-time check (skipped when absent).
        #[serde(default)]
        level: Option<f64>,
        /// Truncation horizon `N` of the hitting times; defaults to `T`.
        #[serde(default)]
        horizon: Option<f64>,
    },
    Metrics {
        #[serde(default)]
        levy: Vec<LevyQuery>,
        #[serde(default)]
        prokhorov: Vec<ProkhorovQuery>,
        #[serde(default)]
        order: Vec<OrderQuery>,
    },
}

fn psi_default() -> PsiSpec {
    PsiSpec::Lhat
}

fn epsilon_default() -> f64 {
    crate::stability::DEFAULT_EPSILON
}

impl Task {
    pub fn command(&self) -> &'static str {
        match self {
            Task::Represent { .. } => "represent",
            Task::MfgTiming { .. } => "mfg-timing",
            Task::MfgSingular { .. } => "mfg-singular",
            Task::MfgConsumption { .. } => "mfg-consumption",
            Task::FixedPoint { .. } => "fixed-point",
            Task::Stability { .. } => "stability",
            Task::Metrics { .. } => "metrics",
        }
    }

    /// True when the task draws random data and so needs a seed.
    pub fn is_random(&self) -> bool {
        match self {
            Task::Represent { fixture } => match fixture {
                RepresentFixture::Random { .. } => true,
                RepresentFixture::Zero { tree } => tree.is_random(),
                _ => false,
            },
            Task::MfgTiming { tree, game } => tree.is_random() || matches!(game, TimingSource::Preset { .. }),
            Task::MfgSingular { tree, game } => tree.is_random() || matches!(game, SingularSource::Preset { .. }),
            Task::MfgConsumption { tree, .. } => tree.is_random(),
            Task::FixedPoint { .. } => true,
            Task::Stability { family, .. } => match family {
                FamilySource::RandomAdditive { .. } => true,
                FamilySource::Zero { tree, .. } => tree.is_random(),
                _ => false,
            },
            Task::Metrics { .. } => false,
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let positive = |v: f64, at: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::at(format!("task.{at}"), "must be finite and positive"))
            }
        };
        let finite = |v: f64, at: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::at(format!("task.{at}"), "must be finite"))
            }
        };
        match self {
            Task::Represent { fixture } => {
                if let RepresentFixture::CounterexampleI { n, steps } | RepresentFixture::CounterexampleIi { n, steps } = fixture {
                    if *n == 0 || *steps == 0 || steps % (2 * n) != 0 {
                        return Err(ConfigError::at("task.fixture.steps", "must be a positive multiple of 2n"));
                    }
                }
            }
            Task::FixedPoint { h_y, kappa, .. } => {
                finite(*h_y, "h_y")?;
                finite(*kappa, "kappa")?;
            }
            Task::Stability { family, epsilon, level, horizon } => {
                if !(*epsilon > 0.0 && *epsilon < 1.0) {
                    return Err(ConfigError::at("task.epsilon", "must lie in (0, 1)"));
                }
                if let Some(l) = level {
                    finite(*l, "level")?;
                }
                if let Some(h) = horizon {
                    positive(*h, "horizon")?;
                }
                match family {
                    FamilySource::UniformRamp { index, steps } | FamilySource::SteepRamp { index, steps } => {
                        if index.is_empty() {
                            return Err(ConfigError::at("task.family.index", "must not be empty"));
                        }
                        if let Some(n) = index.iter().find(|&&n| n == 0 || steps % (2 * n) != 0) {
                            return Err(ConfigError::at("task.family.steps", format!("must be a multiple of 2n for n = {n}")));
                        }
                    }
                    FamilySource::Zero { count, .. } | FamilySource::RandomAdditive { count, .. } => {
                        if !(1..=60).contains(count) {
                            return Err(ConfigError::at("task.family.count", "must lie in [1, 60]"));
                        }
                    }
                }
            }
            Task::Metrics { levy, prokhorov, order } => {
                if levy.is_empty() && prokhorov.is_empty() && order.is_empty() {
                    return Err(ConfigError::at("task", "metrics needs at least one query"));
                }
            }
            Task::MfgTiming { .. } | Task::MfgSingular { .. } | Task::MfgConsumption { .. } => {}
        }
        Ok(())
    }
}

/// Input of `represent`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RepresentFixture {
    /// `Y = 0`, `f(ℓ) = ℓ`.
    Zero { tree: TreeShape },
    /// Uniform ramp on `[0, 1]` with `steps` grid steps.
    #[serde(rename = "counterexample_i")]
    CounterexampleI { n: usize, steps: usize },
    /// Steep ramp on `[0, 1]` with `steps` grid steps.
    #[serde(rename = "counterexample_ii")]
    CounterexampleIi { n: usize, steps: usize },
    /// Random terminal-zero `Y` and a random generator.
    Random { tree: TreeShape, generator: GeneratorKind },
    Inline { tree: ScenarioTree, y: AdaptedProcess, f: GeneratorSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimingSource {
    /// Two interpolated populations with random rewards.
    Preset { kappa: f64, epsilon: f64 },
    Inline { game: TimingGame },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SingularSource {
    /// Random shared costs, floor 0 and one population per cap.
    Preset { kappa: f64, caps: Vec<f64> },
    Inline { game: SingularGame },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConsumptionSource {
    /// CRRA utility with `γ = 2`, constant `rate` and discount `beta`.
    Preset { rate: f64, beta: f64, kappa: f64, mode: ConsumptionMode },
    Inline { game: ConsumptionGame },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySource {
    UniformRamp { index: Vec<usize>, steps: usize },
    SteepRamp { index: Vec<usize>, steps: usize },
    Zero { tree: TreeShape, count: usize },
    /// `Y + 2^{−n} M`, `f + 2^{−n} g` for `n = 1, …, count` on a random tree.
    RandomAdditive { steps: usize, max_branch: usize, count: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevyQuery {
    pub a: VPlusPath,
    pub b: VPlusPath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProkhorovQuery {
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    pub dist: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedPoint {
    pub w: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderQuery {
    pub mu: Vec<WeightedPoint>,
    pub nu: Vec<WeightedPoint>,
}

// ── Parsing ───────────────────────────────────────────────────────────

/// Parse, check the schema version and validate knob ranges.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        ConfigError::at(format!("line {}, column {} (at `{path}`)", inner.line(), inner.column()), inner.to_string())
    })?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(ConfigError::at(
            "schema_version",
            format!("unsupported schema version {}, expected {SCHEMA_VERSION}", cfg.schema_version),
        ));
    }
    cfg.knobs.validate()?;
    cfg.task.validate()?;
    Ok(cfg)
}

impl RunConfig {
    /// Require a seed for randomized tasks.
    pub fn require_seed(&self) -> Result<u64, ConfigError> {
        match self.seed {
            Some(s) => Ok(s),
            None if self.task.is_random() => {
                Err(ConfigError::at("seed", "a seed is required for randomized runs (config `seed` or `--seed`)"))
            }
            None => Ok(0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ZERO: &str = r#"{"schema_version": 1, "task": {"command": "represent",
        "fixture": {"kind": "zero", "tree": {"kind": "uniform", "horizon": 1.0, "steps": 2, "branching": 2}}}}"#;

    #[test]
    fn parses_a_minimal_config() {
        let c = parse_config(ZERO).unwrap();
        assert_eq!(c.task.command(), "represent");
        assert_eq!(c.knobs, Knobs::default());
        assert_eq!(c.require_seed().unwrap(), 0);
    }

    #[test]
    fn round_trips() {
        let c = parse_config(ZERO).unwrap();
        let again = parse_config(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn errors_carry_locations() {
        let e = parse_config(r#"{"schema_version": 1, "task": {"command": "represent", "fixture": {"kind": "zero", "tree": {"kind": "chain", "horizon": "x", "steps": 2}}}}"#).unwrap_err();
        assert!(e.location.starts_with("line 1, column 139 (at `task"), "{e}");
        let e = parse_config(r#"{"schema_version": 2, "task": {"command": "metrics", "levy": []}}"#).unwrap_err();
        assert_eq!(e.location, "schema_version");
        let e = parse_config(r#"{"schema_version": 1, "knobs": {"tol": 0}, "task": {"command": "metrics"}}"#).unwrap_err();
        assert_eq!(e.location, "knobs.tol");
        assert!(parse_config(r#"{"schema_version": 1, "bogus": 1, "task": {"command": "metrics"}}"#).is_err());
    }

    #[test]
    fn random_tasks_need_seeds() {
        let c = parse_config(r#"{"schema_version": 1, "task": {"command": "stability",
            "family": {"kind": "random_additive", "steps": 2, "max_branch": 2, "count": 3}}}"#)
        .unwrap();
        assert!(c.require_seed().is_err());
    }
}
