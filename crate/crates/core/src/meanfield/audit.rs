//! Randomized check of the monotone comparison conditions on an adapter.

use super::{Adapter, MeanFieldProblem};
use crate::error::Result;
use crate::metrics_order::{Outcome, RandomMeasure};
use crate::representation::default_levels;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const AUDIT_TOL: f64 = 1e-10;
const AUDIT_LEVELS: usize = 33;

/// Failing pair and the violated condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditWitness {
    pub pair: usize,
    pub reason: String,
    pub lower: RandomMeasure,
    pub upper: RandomMeasure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub passed: bool,
    pub pairs_checked: usize,
    pub witness: Option<AuditWitness>,
}

/// Add `c` to every coordinate of an outcome.
pub fn shift_outcome(o: &Outcome, c: f64) -> Result<Outcome> {
    o.map_coords(|v| v + c)
}

/// Random reweighting and upward shifts of `template`, giving `lower ≤_p upper`
/// through the coupling that pairs each support point with its own shift.
fn ordered_pair(template: &RandomMeasure, rng: &mut ChaCha8Rng) -> Result<(RandomMeasure, RandomMeasure)> {
    let mut lower = template.clone();
    let mut upper = template.clone();
    for (a, b) in lower.atoms.iter_mut().zip(upper.atoms.iter_mut()) {
        let weights: Vec<f64> = a.support.iter().map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = weights.iter().sum();
        for ((s, t), w) in a.support.iter_mut().zip(b.support.iter_mut()).zip(&weights) {
            let base = rng.random_range(-1.0..1.0);
            let up = rng.random_range(0.0..1.0);
            s.w = w / total;
            t.w = w / total;
            s.outcome = shift_outcome(&s.outcome, base)?;
            t.outcome = shift_outcome(&t.outcome, base + up)?;
        }
    }
    Ok((lower.canonical(), upper.canonical()))
}

/// Draw `sample_pairs` ordered pairs `m¹ ≤_p m²` from `template` and check
/// `X^{m¹} ≤ X^{m²}`, `f^{m¹} ≥ f^{m²}` on a level grid and that
/// `Y^{m¹} − Y^{m²}` is a submartingale, all node-wise within `1e−10`.
pub fn monotonicity_audit<A: Adapter>(
    problem: &MeanFieldProblem<A>,
    template: &RandomMeasure,
    sample_pairs: usize,
    seed: u64,
) -> Result<AuditReport> {
    template.validate()?;
    let tree = &problem.tree;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for pair in 0..sample_pairs {
        let (lower, upper) = ordered_pair(template, &mut rng)?;
        let c1 = problem.coefficients(&lower)?;
        let c2 = problem.coefficients(&upper)?;
        let fail = |reason: String| {
            Ok(AuditReport {
                passed: false,
                pairs_checked: pair + 1,
                witness: Some(AuditWitness { pair, reason, lower: lower.clone(), upper: upper.clone() }),
            })
        };
        if let Some(n) = (0..tree.len()).find(|&n| c1.x.values[n] > c2.x.values[n] + AUDIT_TOL) {
            return fail(format!("X decreases at node {n}"));
        }
        let levels = default_levels(tree, &c1.y, &c1.f, AUDIT_LEVELS)?;
        for n in (0..tree.len()).filter(|&n| !tree.is_terminal(n)) {
            for &l in &levels {
                let (a, b) = (c1.f.eval(tree, n, l), c2.f.eval(tree, n, l));
                if a < b - AUDIT_TOL {
                    return fail(format!("f increases with the measure at node {n}, level {l}: {a} < {b}"));
                }
            }
        }
        let d = c1.y.zip_with(&c2.y, |a, b| a - b);
        let next = tree.expect_next(&d);
        if let Some(n) = (0..tree.len()).find(|&n| !tree.is_terminal(n) && next[n] < d.values[n] - AUDIT_TOL) {
            return fail(format!("Y¹ − Y² is not a submartingale at node {n}"));
        }
    }
    Ok(AuditReport { passed: true, pairs_checked: sample_pairs, witness: None })
}
