//! Perturbation families, stability sweeps and hitting-time convergence.

use super::counterexample::{ramp_samples, RampFamily};
use crate::error::{invalid, Error, Result};
use crate::meanfield::ReprMethod;
use crate::metrics_order::{conditional_law, lhat_vplus, Outcome};
use crate::optimizers::{hitting_times, is_exceptional_level};
use crate::prob_tree::{AdaptedProcess, ScenarioTree, TimeGrid};
use crate::representation::{
    running_max_strict, solve_deterministic_convex_envelope, starts_every_time, verify_representation, GeneratorSpec,
    LhatResult, Method,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const DEFAULT_EPSILON: f64 = 0.05;

/// Slack when checking that a curve is nonincreasing.
const MONOTONE_SLACK: f64 = 1e-9;

// ── Families ──────────────────────────────────────────────────────────

/// One `(Y, f)` pair of a family: `f = base + f_offset` with a level-independent offset.
#[derive(Debug, Clone, PartialEq)]
pub struct Datum {
    pub y: AdaptedProcess,
    /// Left limits of `Y` at grid times, for deterministic data on a chain. When
    /// present the representation is computed from the convex envelope.
    pub y_left: Option<AdaptedProcess>,
    pub f_offset: Option<AdaptedProcess>,
}

impl Datum {
    pub fn new(y: AdaptedProcess) -> Self {
        Datum { y, y_left: None, f_offset: None }
    }

    fn left(&self) -> &AdaptedProcess {
        self.y_left.as_ref().unwrap_or(&self.y)
    }

    fn generator(&self, base: &GeneratorSpec) -> GeneratorSpec {
        match &self.f_offset {
            None => base.clone(),
            Some(o) => GeneratorSpec::Offset { base: Box::new(base.clone()), offset: o.clone() },
        }
    }
}

/// Base data `(Y, f)` and perturbations `(Y^n, f_n)` indexed by `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationFamily {
    pub label: String,
    pub tree: ScenarioTree,
    pub f: GeneratorSpec,
    pub base: Datum,
    pub index: Vec<usize>,
    pub members: Vec<Datum>,
}

impl PerturbationFamily {
    pub fn validate(&self) -> Result<()> {
        self.f.validate(&self.tree)?;
        if self.index.len() != self.members.len() {
            return Err(Error::Mismatch("one index per family member is required".into()));
        }
        for (i, d) in std::iter::once(&self.base).chain(&self.members).enumerate() {
            let what = if i == 0 { "base".to_string() } else { format!("member {}", self.index[i - 1]) };
            d.y.check(&self.tree, &what)?;
            d.y.check_finite(&what)?;
            if let Some(l) = &d.y_left {
                l.check(&self.tree, &what)?;
                l.check_finite(&what)?;
                if self.tree.paths().len() != 1 || d.f_offset.is_some() || self.f != GeneratorSpec::identity(&self.tree) {
                    return invalid(format!("{what}: left limits need a chain with f(ℓ) = ℓ"));
                }
            }
            if let Some(o) = &d.f_offset {
                o.check(&self.tree, &what)?;
                o.check_finite(&what)?;
            }
        }
        Ok(())
    }

    /// `e_n = E[Σ_k |f_n − f| dt + sup_t |Y^n_t − Y_t|]`, exact because the offsets do not depend on `ℓ`.
    pub fn budget(&self, member: &Datum) -> f64 {
        let dt = self.tree.dt();
        self.tree
            .paths()
            .iter()
            .map(|p| {
                let off = |d: &Datum, n: usize| d.f_offset.as_ref().map_or(0.0, |o| o.values[n]);
                let running: f64 = p.nodes[..p.nodes.len() - 1]
                    .iter()
                    .map(|&n| (off(member, n) - off(&self.base, n)).abs() * dt)
                    .sum();
                let sup = p
                    .nodes
                    .iter()
                    .map(|&n| {
                        let d = (member.y.values[n] - self.base.y.values[n]).abs();
                        d.max((member.left().values[n] - self.base.left().values[n]).abs())
                    })
                    .fold(0.0, f64::max);
                p.prob * (running + sup)
            })
            .sum()
    }

    /// Representation of one datum with its advertised tolerance.
    pub fn solve(&self, d: &Datum, method: &ReprMethod) -> Result<(LhatResult, f64)> {
        match &d.y_left {
            Some(left) => Ok((envelope_result(&self.tree, &self.f, &d.y, left)?, 0.0)),
            None => {
                let f = d.generator(&self.f);
                let r = method.solve(&self.tree, &d.y, &f)?;
                let tol = method.tolerance(&r, &self.tree, &f);
                Ok((r, tol))
            }
        }
    }

    /// `Y^n = Y^0 = 0`, `f_n = f`.
    pub fn zero(tree: ScenarioTree, index: Vec<usize>) -> Self {
        let base = Datum::new(AdaptedProcess::zeros(&tree));
        let members = index.iter().map(|_| base.clone()).collect();
        PerturbationFamily { label: "zero".into(), f: GeneratorSpec::identity(&tree), tree, base, index, members }
    }

    /// Ramp family on one chain whose step count resolves every ramp.
    pub fn ramp(family: RampFamily, index: Vec<usize>, steps: usize) -> Result<Self> {
        let tree = ScenarioTree::chain(TimeGrid::new(1.0, steps)?)?;
        let nodes = tree.paths()[0].nodes.clone();
        let on_chain = |v: &[f64]| {
            let mut out = vec![0.0; tree.len()];
            for (k, &n) in nodes.iter().enumerate() {
                out[n] = v[k];
            }
            AdaptedProcess::new(out)
        };
        let mut members = Vec::with_capacity(index.len());
        for &n in &index {
            let (y, left) = ramp_samples(family, n, steps)?;
            members.push(Datum { y: on_chain(&y), y_left: Some(on_chain(&left)), f_offset: None });
        }
        let zero = AdaptedProcess::zeros(&tree);
        let label = match family {
            RampFamily::Uniform => "uniform_ramp",
            RampFamily::Steep => "steep_ramp",
        };
        Ok(PerturbationFamily {
            label: label.into(),
            f: GeneratorSpec::identity(&tree),
            base: Datum { y: zero.clone(), y_left: Some(zero), f_offset: None },
            tree,
            index,
            members,
        })
    }

    /// `Y^n = Y + 2^{−n} M` and `f_n = f + 2^{−n} g` on a seeded random tree, with
    /// terminal-zero `Y`, `M` and an affine `f`.
    pub fn random_additive(seed: u64, steps: usize, max_branch: usize, index: Vec<usize>) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = ScenarioTree::random(&mut rng, TimeGrid::new(1.0, steps)?, max_branch, 2)?;
        let terminal_zero = |rng: &mut ChaCha8Rng| {
            let v = AdaptedProcess::random(&tree, rng, -1.0, 1.0);
            AdaptedProcess::from_fn(&tree, |n| if n.children.is_empty() { 0.0 } else { v.values[n.id] })
        };
        let y = terminal_zero(&mut rng);
        let m = terminal_zero(&mut rng);
        let g = AdaptedProcess::random(&tree, &mut rng, -1.0, 1.0);
        let f = GeneratorSpec::Affine { a: AdaptedProcess::random(&tree, &mut rng, -0.5, 0.5), b: rng.random_range(0.5..2.0) };
        let members = index
            .iter()
            .map(|&n| {
                let c = 0.5f64.powi(n as i32);
                Datum { y: y.zip_with(&m, |a, b| a + c * b), y_left: None, f_offset: Some(g.map(|v| c * v)) }
            })
            .collect();
        Ok(PerturbationFamily { label: format!("random_additive_{seed}"), tree, f, base: Datum::new(y), index, members })
    }
}

/// Representation from the convex envelope with left limits on a chain.
fn envelope_result(tree: &ScenarioTree, f: &GeneratorSpec, y: &AdaptedProcess, left: &AdaptedProcess) -> Result<LhatResult> {
    if tree.paths().len() != 1 {
        return invalid("the envelope solver needs a chain");
    }
    let path = &tree.paths()[0];
    let l = solve_deterministic_convex_envelope(&y.along(path), Some(&left.along(path)), tree.dt())?;
    let lh = running_max_strict(&l);
    let mut lv = vec![f64::NEG_INFINITY; tree.len()];
    let mut hv = vec![f64::NEG_INFINITY; tree.len()];
    for (k, &n) in path.nodes.iter().enumerate() {
        lv[n] = l[k];
        hv[n] = lh[k];
    }
    let mut r = LhatResult {
        method: Method::Envelope,
        lhat: AdaptedProcess::new(hv),
        l: AdaptedProcess::new(lv),
        levels: vec![],
        stop_times: vec![],
        cell: 0.0,
        residual: 0.0,
    };
    // Measured against the grid samples, which do not see the left limits.
    r.residual = verify_representation(tree, y, f, &r, &starts_every_time(tree))?;
    Ok(r)
}

// ── Sweep ─────────────────────────────────────────────────────────────

/// Distances of one family member to the base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub e_n: f64,
    /// `P[d_L(L̂^n, L̂) ≥ ε]`.
    pub p_exceed: f64,
    pub mean_levy: f64,
    pub max_levy: f64,
    /// `E[d_LP(law(L̂^n | G), law(L̂ | G))]`.
    pub mean_lp: f64,
    /// Half-width of the solver noise on each distance.
    pub error_bar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub label: String,
    pub epsilon: f64,
    pub rows: Vec<SweepRow>,
    /// Rank correlations of `e_n` with `E[d_L]` and `E[d_LP]`; `None` when either column is constant.
    pub spearman_levy: Option<f64>,
    pub spearman_lp: Option<f64>,
    /// Both distance columns are nonincreasing within their error bars.
    pub nonincreasing: bool,
    /// The last row has `P[d_L ≥ ε] = 0` and `E[d_LP] < ε`.
    pub vanishing: bool,
    /// The last budget is below `ε`.
    pub budget_vanishing: bool,
    pub passed: bool,
}

/// Spearman rank correlation with average ranks for ties; `None` for constant inputs.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            for &k in &idx[i..=j] {
                r[k] = (i + j) as f64 / 2.0;
            }
            i = j + 1;
        }
        r
    }
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let mean = (a.len() - 1) as f64 / 2.0;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - mean) * (y - mean)).sum();
    let va: f64 = ra.iter().map(|x| (x - mean).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mean).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    Some(cov / (va * vb).sqrt())
}

fn nonincreasing(v: &[f64], bars: &[f64]) -> bool {
    v.windows(2).zip(bars.windows(2)).all(|(w, b)| w[1] <= w[0] + b[0] + b[1] + MONOTONE_SLACK)
}

fn law(tree: &ScenarioTree, lhat: &LhatResult) -> Result<crate::metrics_order::RandomMeasure> {
    conditional_law(tree, |p| Ok(Outcome::Path(lhat_vplus(tree, &lhat.lhat, p)?)))
}

/// Curve of `(e_n, P[d_L ≥ ε], E[d_L], E[d_LP])` along the family.
pub fn stability_sweep(family: &PerturbationFamily, method: &ReprMethod, epsilon: f64) -> Result<SweepReport> {
    family.validate()?;
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return invalid("ε must be positive");
    }
    let tree = &family.tree;
    let (base, base_tol) = family.solve(&family.base, method)?;
    let base_paths: Vec<_> = tree.paths().iter().map(|p| lhat_vplus(tree, &base.lhat, p)).collect::<Result<_>>()?;
    let base_law = law(tree, &base)?;
    let rows: Vec<SweepRow> = family
        .members
        .par_iter()
        .zip(&family.index)
        .map(|(d, &n)| {
            let (r, tol) = family.solve(d, method)?;
            let mut p_exceed = 0.0;
            let mut mean_levy = 0.0;
            let mut max_levy: f64 = 0.0;
            for (p, b) in tree.paths().iter().zip(&base_paths) {
                let dl = crate::metrics_order::levy_distance(&lhat_vplus(tree, &r.lhat, p)?, b, tree.grid().horizon)?;
                if dl >= epsilon {
                    p_exceed += p.prob;
                }
                mean_levy += p.prob * dl;
                max_levy = max_levy.max(dl);
            }
            let mean_lp = law(tree, &r)?.distance(&base_law)?;
            Ok(SweepRow { n, e_n: family.budget(d), p_exceed, mean_levy, max_levy, mean_lp, error_bar: tol + base_tol })
        })
        .collect::<Result<_>>()?;
    let e: Vec<f64> = rows.iter().map(|r| r.e_n).collect();
    let dl: Vec<f64> = rows.iter().map(|r| r.mean_levy).collect();
    let dlp: Vec<f64> = rows.iter().map(|r| r.mean_lp).collect();
    let bars: Vec<f64> = rows.iter().map(|r| r.error_bar).collect();
    let spearman_levy = spearman(&e, &dl);
    let spearman_lp = spearman(&e, &dlp);
    let mono = nonincreasing(&dl, &bars) && nonincreasing(&dlp, &bars);
    let vanishing = rows.last().is_none_or(|r| r.p_exceed == 0.0 && r.mean_lp < epsilon);
    let budget_vanishing = rows.last().is_none_or(|r| r.e_n < epsilon);
    let rank_ok = |s: Option<f64>| s.is_none_or(|s| s >= 0.9);
    let passed = vanishing && mono && rank_ok(spearman_levy) && rank_ok(spearman_lp);
    Ok(SweepReport {
        label: family.label.clone(),
        epsilon,
        rows,
        spearman_levy,
        spearman_lp,
        nonincreasing: mono,
        vanishing,
        budget_vanishing,
        passed,
    })
}

// ── Hitting times ─────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingRow {
    pub n: usize,
    pub e_n: f64,
    /// `P[|τ^n_ℓ ∧ N − τ_ℓ ∧ N| > ε]`.
    pub prob: f64,
    /// `τ^n_ℓ ≠ τ′^n_ℓ` somewhere for this member.
    pub member_exceptional: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingReport {
    pub label: String,
    pub level: f64,
    pub epsilon: f64,
    pub horizon: f64,
    /// Empty when the level is exceptional for the base.
    pub rows: Vec<HittingRow>,
    /// Reason the check was skipped.
    pub skipped: Option<String>,
    pub nonincreasing: bool,
    pub vanishing: bool,
}

/// Per-member `P[|τ^n_ℓ ∧ N − τ_ℓ ∧ N| > ε]` for a level outside the exceptional set of the base.
pub fn hitting_time_convergence(
    family: &PerturbationFamily,
    method: &ReprMethod,
    level: f64,
    horizon: Option<f64>,
    epsilon: f64,
) -> Result<HittingReport> {
    family.validate()?;
    if !(level.is_finite() && epsilon.is_finite() && epsilon > 0.0) {
        return invalid("level must be finite and ε positive");
    }
    let tree = &family.tree;
    let horizon = horizon.unwrap_or(tree.grid().horizon);
    if !(horizon.is_finite() && horizon > 0.0) {
        return invalid("truncation horizon must be positive");
    }
    let mut report = HittingReport {
        label: family.label.clone(),
        level,
        epsilon,
        horizon,
        rows: vec![],
        skipped: None,
        nonincreasing: true,
        vanishing: true,
    };
    let (base, _) = family.solve(&family.base, method)?;
    if is_exceptional_level(tree, &base, level) {
        report.skipped = Some(format!("level {level} is exceptional: τ_ℓ and τ′_ℓ differ on some path"));
        return Ok(report);
    }
    let times = |r: &LhatResult| -> Vec<f64> {
        let (tau, _) = hitting_times(tree, r, level);
        tree.paths().iter().map(|p| tree.grid().time(tau.stop_index(tree, p)).min(horizon)).collect()
    };
    let base_times = times(&base);
    report.rows = family
        .members
        .par_iter()
        .zip(&family.index)
        .map(|(d, &n)| {
            let (r, _) = family.solve(d, method)?;
            let prob = tree
                .paths()
                .iter()
                .zip(times(&r).iter().zip(&base_times))
                .filter(|(_, (a, b))| (*a - *b).abs() > epsilon)
                .map(|(p, _)| p.prob)
                .sum();
            Ok(HittingRow { n, e_n: family.budget(d), prob, member_exceptional: is_exceptional_level(tree, &r, level) })
        })
        .collect::<Result<_>>()?;
    let probs: Vec<f64> = report.rows.iter().map(|r| r.prob).collect();
    report.nonincreasing = nonincreasing(&probs, &vec![0.0; probs.len()]);
    report.vanishing = probs.last().is_none_or(|&p| p == 0.0);
    Ok(report)
}

/// Index set `1..=count`.
pub fn default_index(count: usize) -> Vec<usize> {
    (1..=count).collect()
}
