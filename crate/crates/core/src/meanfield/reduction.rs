//! Scalar reduction of the mean-field fixed point: `y_t = E[φ(L_t + y_t)]`.
//!
//! When the interaction enters only through `m_t(φ)` and `Ψ` returns the level
//! path, the fixed point is `L^m = L + y*` with `y*_t` the unique root of
//! `y = E[φ(L_t + y)]` for each `t`, provided `0 ≤ φ′ < 1`.

use crate::error::{invalid, Error, Result};
use crate::numeric::bisect_bracket;
use crate::prob_tree::{AdaptedProcess, ScenarioTree};
use serde::{Deserialize, Serialize};

/// Largest admissible derivative bound.
pub const MAX_SLOPE: f64 = 1.0 - 1e-6;
const DERIVATIVE_SAMPLES: usize = 10_000;
const MONOTONE_TOL: f64 = 1e-12;

/// Bounded nondecreasing interaction map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Phi {
    Constant { c: f64 },
    /// `amp · (1 + tanh(slope · x + offset))`.
    Tanh { amp: f64, slope: f64, offset: f64 },
    /// `inner(max(floor, x))`.
    Floored { inner: Box<Phi>, floor: f64 },
}

impl Phi {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Phi::Constant { c } => *c,
            Phi::Tanh { amp, slope, offset } => amp * (1.0 + (slope * x + offset).tanh()),
            Phi::Floored { inner, floor } => inner.eval(x.max(*floor)),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Phi::Constant { .. } => 0.0,
            Phi::Tanh { amp, slope, offset } => {
                let c = (slope * x + offset).cosh();
                amp * slope / (c * c)
            }
            Phi::Floored { inner, floor } => {
                if x < *floor {
                    0.0
                } else {
                    inner.derivative(x)
                }
            }
        }
    }

    /// `sup |φ′|` in closed form.
    pub fn slope_bound(&self) -> f64 {
        match self {
            Phi::Constant { .. } => 0.0,
            Phi::Tanh { amp, slope, .. } => (amp * slope).abs(),
            Phi::Floored { inner, .. } => inner.slope_bound(),
        }
    }

    /// Interval containing the range of `φ`.
    pub fn range(&self) -> (f64, f64) {
        match self {
            Phi::Constant { c } => (*c, *c),
            Phi::Tanh { amp, .. } => (amp.min(0.0) * 2.0, amp.max(0.0) * 2.0),
            Phi::Floored { inner, .. } => inner.range(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Phi::Constant { c } => c.is_finite(),
            Phi::Tanh { amp, slope, offset } => amp.is_finite() && slope.is_finite() && offset.is_finite(),
            Phi::Floored { inner, floor } => {
                inner.validate()?;
                floor.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            invalid("interaction map parameters must be finite")
        }
    }
}

/// Finite family of level paths `L_0, …, L_{N−1}` with probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LTable {
    pub probs: Vec<f64>,
    pub paths: Vec<Vec<f64>>,
}

impl LTable {
    /// A single deterministic path.
    pub fn deterministic(values: Vec<f64>) -> Self {
        LTable { probs: vec![1.0], paths: vec![values] }
    }

    /// `L` at the non-terminal nodes of each scenario.
    pub fn from_tree(tree: &ScenarioTree, l: &AdaptedProcess) -> Result<Self> {
        l.check(tree, "L")?;
        let steps = tree.grid().steps;
        Ok(LTable {
            probs: tree.paths().iter().map(|p| p.prob).collect(),
            paths: tree.paths().iter().map(|p| p.nodes[..steps].iter().map(|&n| l.values[n]).collect()).collect(),
        })
    }

    pub fn steps(&self) -> usize {
        self.paths.first().map_or(0, |p| p.len())
    }

    fn validate(&self) -> Result<()> {
        if self.paths.is_empty() || self.probs.len() != self.paths.len() {
            return invalid("level table needs one probability per path");
        }
        let n = self.steps();
        if n == 0 || self.paths.iter().any(|p| p.len() != n) {
            return invalid("level paths must share a positive length");
        }
        if self.probs.iter().any(|&p| !(p >= 0.0)) || (self.probs.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return invalid("path probabilities must be nonnegative and sum to 1");
        }
        if self.paths.iter().flatten().any(|v| !v.is_finite()) {
            return invalid("levels must be finite");
        }
        if let Some(i) = self.paths.iter().position(|p| p.windows(2).any(|w| w[1] < w[0])) {
            return invalid(format!("level path {i} is not nondecreasing"));
        }
        Ok(())
    }

    fn bounds(&self) -> (f64, f64) {
        let it = self.paths.iter().flatten();
        (it.clone().copied().fold(f64::INFINITY, f64::min), it.copied().fold(f64::NEG_INFINITY, f64::max))
    }

    fn expect(&self, k: usize, g: impl Fn(f64) -> f64) -> f64 {
        self.probs.iter().zip(&self.paths).map(|(p, path)| p * g(path[k])).sum()
    }
}

/// Per-time fixed points and the law they induce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    /// `y*_k` for `k = 0, …, N−1`.
    pub y: Vec<f64>,
    /// `|y*_k − E[φ(L_k + y*_k)]|`.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    /// Certified `sup φ′` over the relevant range.
    pub derivative_bound: f64,
    /// Support of the induced law: `L + y*` path by path, with the table's probabilities.
    pub shifted: LTable,
}

/// Closed-form and sampled derivative bound over `[min L + inf φ, max L + sup φ]`.
fn certify_derivative(table: &LTable, phi: &Phi) -> Result<f64> {
    let (lmin, lmax) = table.bounds();
    let (pmin, pmax) = phi.range();
    let (lo, hi) = (lmin + pmin - 1.0, lmax + pmax + 1.0);
    let mut sampled: f64 = 0.0;
    for i in 0..DERIVATIVE_SAMPLES {
        let x = lo + (hi - lo) * i as f64 / (DERIVATIVE_SAMPLES - 1) as f64;
        let d = phi.derivative(x);
        if d < -MONOTONE_TOL {
            return Err(Error::Refused(format!("interaction map decreases at {x} (φ′ = {d})")));
        }
        sampled = sampled.max(d);
    }
    let bound = sampled.max(phi.slope_bound());
    if bound > MAX_SLOPE {
        return Err(Error::Refused(format!("interaction map slope {bound} is not below 1; the reduction is not a contraction")));
    }
    Ok(bound)
}

fn solve_time(table: &LTable, phi: &Phi, k: usize, mut lo: f64, mut hi: f64) -> Result<f64> {
    let g = |y: f64| y - table.expect(k, |l| phi.eval(l + y));
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }
    let mut width = (hi - lo).max(1e-3);
    for _ in 0..1100 {
        if g(lo) <= 0.0 && g(hi) >= 0.0 {
            return bisect_bracket(g, lo, hi);
        }
        if g(lo) > 0.0 {
            lo -= width;
        }
        if g(hi) < 0.0 {
            hi += width;
        }
        width *= 2.0;
    }
    Err(Error::NotConverged(format!("no bracket found for the fixed point at time index {k}")))
}

fn finish(table: &LTable, phi: &Phi, y: Vec<f64>, derivative_bound: f64, tol: f64) -> Result<ReductionReport> {
    let residuals: Vec<f64> = (0..y.len()).map(|k| (y[k] - table.expect(k, |l| phi.eval(l + y[k]))).abs()).collect();
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    if max_residual > tol {
        return Err(Error::NotConverged(format!("scalar fixed-point residual {max_residual:e} above {tol:e}")));
    }
    if let Some(k) = (1..y.len()).find(|&k| y[k] < y[k - 1] - MONOTONE_TOL) {
        return Err(Error::OrderViolation(format!("fixed points decrease between time indices {} and {k}", k - 1)));
    }
    let shifted = LTable {
        probs: table.probs.clone(),
        paths: table.paths.iter().map(|p| p.iter().zip(&y).map(|(l, s)| l + s).collect()).collect(),
    };
    Ok(ReductionReport { y, residuals, max_residual, derivative_bound, shifted })
}

/// Solve `y_k = E[φ(L_k + y_k)]` for every time index by bisection.
///
/// Refuses maps whose slope is not certified below `1 − 1e−6` and level
/// tables with a decreasing path.
pub fn dimension_reduction_solve(table: &LTable, phi: &Phi, tol: f64) -> Result<ReductionReport> {
    table.validate()?;
    phi.validate()?;
    let bound = certify_derivative(table, phi)?;
    let (pmin, pmax) = phi.range();
    let y = (0..table.steps())
        .map(|k| solve_time(table, phi, k, pmin - 1.0, pmax + 1.0))
        .collect::<Result<Vec<f64>>>()?;
    finish(table, phi, y, bound, tol)
}

/// Re-solve from each supplied starting bracket (grown until it brackets a root).
pub fn dimension_reduction_with_brackets(
    table: &LTable,
    phi: &Phi,
    tol: f64,
    brackets: &[(f64, f64)],
) -> Result<Vec<ReductionReport>> {
    table.validate()?;
    phi.validate()?;
    let bound = certify_derivative(table, phi)?;
    brackets
        .iter()
        .map(|&(lo, hi)| {
            let y = (0..table.steps()).map(|k| solve_time(table, phi, k, lo, hi)).collect::<Result<Vec<f64>>>()?;
            finish(table, phi, y, bound, tol)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn half_tanh() -> Phi {
        Phi::Tanh { amp: 0.5, slope: 1.0, offset: 0.0 }
    }

    #[test]
    fn zero_and_constant_maps() {
        let t = LTable::deterministic(vec![-1.0, 0.0, 2.0]);
        let r = dimension_reduction_solve(&t, &Phi::Constant { c: 0.0 }, 1e-12).unwrap();
        assert_eq!(r.y, vec![0.0; 3]);
        let r = dimension_reduction_solve(&t, &Phi::Constant { c: 0.7 }, 1e-12).unwrap();
        assert!(r.y.iter().all(|&y| (y - 0.7).abs() < 1e-15));
    }

    #[test]
    fn half_tanh_at_zero_level() {
        let t = LTable::deterministic(vec![0.0]);
        let r = dimension_reduction_solve(&t, &half_tanh(), 1e-12).unwrap();
        // Oracle: damped functional iteration y ← ½(y + φ(y)).
        let mut y = 0.0f64;
        for _ in 0..2000 {
            y = 0.5 * (y + 0.5 * (1.0 + y.tanh()));
        }
        assert!((r.y[0] - y).abs() < 1e-12);
        assert!((r.y[0] - 0.5 * (1.0 + r.y[0].tanh())).abs() < 1e-12);
        // Frozen oracle value.
        assert!((r.y[0] - 0.843_946_999_414_236_8).abs() < 1e-12, "{}", r.y[0]);
    }

    #[test]
    fn fixed_points_rise_with_levels_and_bracket_choice_is_irrelevant() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let paths: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                let mut v = rng.random_range(-2.0..0.0);
                (0..5)
                    .map(|_| {
                        v += rng.random_range(0.0..0.8);
                        v
                    })
                    .collect()
            })
            .collect();
        let t = LTable { probs: vec![0.1, 0.2, 0.3, 0.4], paths };
        let phi = Phi::Tanh { amp: 0.45, slope: 2.0, offset: 0.3 };
        let r = dimension_reduction_solve(&t, &phi, 1e-10).unwrap();
        assert!(r.y.windows(2).all(|w| w[1] >= w[0]));
        let brackets: Vec<(f64, f64)> = (0..10).map(|_| (rng.random_range(-50.0..5.0), rng.random_range(-5.0..50.0))).collect();
        for other in dimension_reduction_with_brackets(&t, &phi, 1e-10, &brackets).unwrap() {
            for (a, b) in other.y.iter().zip(&r.y) {
                assert!((a - b).abs() < 1e-10);
            }
        }
        for (p, q) in r.shifted.paths.iter().zip(&t.paths) {
            for k in 0..5 {
                assert_eq!(p[k], q[k] + r.y[k]);
            }
        }
    }

    #[test]
    fn refusals() {
        let t = LTable::deterministic(vec![0.0, 1.0]);
        let steep = Phi::Tanh { amp: 0.5, slope: 2.5, offset: 0.0 };
        assert!(matches!(dimension_reduction_solve(&t, &steep, 1e-10), Err(Error::Refused(_))));
        let decreasing = Phi::Tanh { amp: 0.5, slope: -1.0, offset: 0.0 };
        assert!(matches!(dimension_reduction_solve(&t, &decreasing, 1e-10), Err(Error::Refused(_))));
        let down = LTable::deterministic(vec![1.0, 0.0]);
        assert!(matches!(dimension_reduction_solve(&down, &half_tanh(), 1e-10), Err(Error::Invalid(_))));
    }
}
