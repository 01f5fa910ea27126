//! Strictly increasing generators `ℓ ↦ f(t, ω, ℓ)`.

use crate::error::{invalid, Result};
use crate::prob_tree::{AdaptedProcess, NodeId, ScenarioTree};
use serde::{Deserialize, Serialize};

/// Positive, strictly decreasing marginal utility `x ↦ u′(t, ω, x)` on `(0, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarginalUtility {
    /// `u′(x) = s(t, ω) · x^{−γ}`, `u(x) = s · x^{1−γ}/(1−γ)` (or `s · ln x` when `γ = 1`).
    Crra { gamma: f64, scale: AdaptedProcess },
}

impl MarginalUtility {
    pub fn validate(&self, tree: &ScenarioTree) -> Result<()> {
        match self {
            MarginalUtility::Crra { gamma, scale } => {
                if !(gamma.is_finite() && *gamma > 0.0) {
                    return invalid(format!("CRRA exponent must be positive, got {gamma}"));
                }
                scale.check(tree, "utility scale")?;
                if scale.values.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
                    return invalid("utility scale must be finite and positive");
                }
                Ok(())
            }
        }
    }

    /// `u′(node, x)` for `x > 0`.
    pub fn marginal(&self, node: NodeId, x: f64) -> f64 {
        match self {
            MarginalUtility::Crra { gamma, scale } => scale.values[node] * x.powf(-gamma),
        }
    }

    /// `u(node, x)` for `x > 0`.
    pub fn utility(&self, node: NodeId, x: f64) -> f64 {
        match self {
            MarginalUtility::Crra { gamma, scale } => {
                let s = scale.values[node];
                if (*gamma - 1.0).abs() < 1e-15 {
                    s * x.ln()
                } else {
                    s * x.powf(1.0 - gamma) / (1.0 - gamma)
                }
            }
        }
    }

    /// Same utility with the scale process multiplied node-wise by `factor`.
    pub fn rescaled(&self, factor: &AdaptedProcess) -> Self {
        match self {
            MarginalUtility::Crra { gamma, scale } => MarginalUtility::Crra {
                gamma: *gamma,
                scale: scale.zip_with(factor, |a, b| a * b),
            },
        }
    }
}

/// Generator of the representation problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorSpec {
    /// `f(n, ℓ) = a_n + b ℓ` with `b > 0`.
    Affine { a: AdaptedProcess, b: f64 },
    /// Piecewise-linear interpolation of per-node rows on increasing knots,
    /// extended affinely with slope `b_ext` outside the knot range.
    Table { knots: Vec<f64>, values: Vec<Vec<f64>>, b_ext: f64 },
    /// `f(n, ℓ) = −β e^{−βt} u′(t, −e^{−βt}/ℓ)` for `ℓ < 0` and `ℓ` for `ℓ ≥ 0`.
    Consumption { beta: f64, utility: MarginalUtility },
    /// `f(n, ℓ) = base(n, ℓ − shift_n)`.
    Shifted { base: Box<GeneratorSpec>, shift: AdaptedProcess },
    /// `f(n, ℓ) = base(n, ℓ) + offset_n`.
    Offset { base: Box<GeneratorSpec>, offset: AdaptedProcess },
}

impl GeneratorSpec {
    /// `f(n, ℓ) = ℓ`.
    pub fn identity(tree: &ScenarioTree) -> Self {
        GeneratorSpec::Affine { a: AdaptedProcess::zeros(tree), b: 1.0 }
    }

    pub fn validate(&self, tree: &ScenarioTree) -> Result<()> {
        match self {
            GeneratorSpec::Affine { a, b } => {
                a.check(tree, "generator intercept")?;
                a.check_finite("generator intercept")?;
                if !(b.is_finite() && *b > 0.0) {
                    return invalid(format!("affine slope must be positive, got {b}"));
                }
            }
            GeneratorSpec::Table { knots, values, b_ext } => {
                if knots.is_empty() {
                    return invalid("table generator needs at least one knot");
                }
                if !(b_ext.is_finite() && *b_ext > 0.0) {
                    return invalid(format!("extension slope must be positive, got {b_ext}"));
                }
                if knots.iter().any(|k| !k.is_finite()) || knots.windows(2).any(|w| w[1] <= w[0]) {
                    return invalid("table knots must be finite and strictly increasing");
                }
                if values.len() != tree.len() {
                    return invalid(format!("table has {} rows for {} nodes", values.len(), tree.len()));
                }
                let gap = 1e-12 * b_ext;
                for (n, row) in values.iter().enumerate() {
                    if row.len() != knots.len() {
                        return invalid(format!("table row {n} has {} values for {} knots", row.len(), knots.len()));
                    }
                    if row.iter().any(|v| !v.is_finite()) {
                        return invalid(format!("table row {n} is not finite"));
                    }
                    if let Some(k) = row.windows(2).position(|w| w[1] - w[0] < gap) {
                        return invalid(format!("table row {n} is not strictly increasing between knots {k} and {}", k + 1));
                    }
                }
            }
            GeneratorSpec::Consumption { beta, utility } => {
                if !(beta.is_finite() && *beta > 0.0) {
                    return invalid(format!("discount rate must be positive, got {beta}"));
                }
                utility.validate(tree)?;
            }
            GeneratorSpec::Shifted { base, shift } => {
                shift.check(tree, "generator shift")?;
                shift.check_finite("generator shift")?;
                base.validate(tree)?;
            }
            GeneratorSpec::Offset { base, offset } => {
                offset.check(tree, "generator offset")?;
                offset.check_finite("generator offset")?;
                base.validate(tree)?;
            }
        }
        Ok(())
    }

    /// `f(node, ℓ)`.
    pub fn eval(&self, tree: &ScenarioTree, node: NodeId, l: f64) -> f64 {
        match self {
            GeneratorSpec::Affine { a, b } => a.values[node] + b * l,
            GeneratorSpec::Table { knots, values, b_ext } => table_eval(knots, &values[node], *b_ext, l),
            GeneratorSpec::Consumption { beta, utility } => {
                if l >= 0.0 {
                    l
                } else {
                    let disc = (-beta * tree.time_of(node)).exp();
                    -beta * disc * utility.marginal(node, -disc / l)
                }
            }
            GeneratorSpec::Shifted { base, shift } => base.eval(tree, node, l - shift.values[node]),
            GeneratorSpec::Offset { base, offset } => base.eval(tree, node, l) + offset.values[node],
        }
    }

    /// Positive lower bound on the slope where one is known, used to size brackets.
    pub fn slope_floor(&self) -> f64 {
        match self {
            GeneratorSpec::Affine { b, .. } => *b,
            GeneratorSpec::Table { knots, values, b_ext } => {
                let mut m = *b_ext;
                for row in values {
                    for (w, k) in row.windows(2).zip(knots.windows(2)) {
                        m = m.min((w[1] - w[0]) / (k[1] - k[0]));
                    }
                }
                m
            }
            GeneratorSpec::Consumption { .. } => 1.0,
            GeneratorSpec::Shifted { base, .. } | GeneratorSpec::Offset { base, .. } => base.slope_floor(),
        }
    }

    /// Global Lipschitz constant in `ℓ`, when finite.
    pub fn lipschitz(&self) -> Option<f64> {
        match self {
            GeneratorSpec::Affine { b, .. } => Some(*b),
            GeneratorSpec::Table { knots, values, b_ext } => {
                let mut m = *b_ext;
                for row in values {
                    for (w, k) in row.windows(2).zip(knots.windows(2)) {
                        m = m.max((w[1] - w[0]) / (k[1] - k[0]));
                    }
                }
                Some(m)
            }
            GeneratorSpec::Consumption { .. } => None,
            GeneratorSpec::Shifted { base, .. } | GeneratorSpec::Offset { base, .. } => base.lipschitz(),
        }
    }

    pub fn is_affine(&self) -> bool {
        matches!(self, GeneratorSpec::Affine { .. })
    }

    /// `∫_{from}^{to} f(node, ℓ) dℓ`: exact for affine and table generators,
    /// composite Simpson with 256 panels otherwise.
    pub fn integral(&self, tree: &ScenarioTree, node: NodeId, from: f64, to: f64) -> f64 {
        if from == to {
            return 0.0;
        }
        match self {
            GeneratorSpec::Affine { a, b } => a.values[node] * (to - from) + 0.5 * b * (to * to - from * from),
            GeneratorSpec::Table { knots, values, b_ext } => {
                let (lo, hi, sign) = if from < to { (from, to, 1.0) } else { (to, from, -1.0) };
                let row = &values[node];
                let mut pts = vec![lo];
                pts.extend(knots.iter().copied().filter(|&k| k > lo && k < hi));
                pts.push(hi);
                let s: f64 = pts
                    .windows(2)
                    .map(|w| 0.5 * (w[1] - w[0]) * (table_eval(knots, row, *b_ext, w[0]) + table_eval(knots, row, *b_ext, w[1])))
                    .sum();
                sign * s
            }
            GeneratorSpec::Offset { base, offset } => base.integral(tree, node, from, to) + offset.values[node] * (to - from),
            _ => {
                let panels = 256;
                let h = (to - from) / panels as f64;
                let mut s = self.eval(tree, node, from) + self.eval(tree, node, to);
                for i in 1..panels {
                    let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                    s += w * self.eval(tree, node, from + h * i as f64);
                }
                s * h / 3.0
            }
        }
    }

    /// Node-wise root of `f(node, ℓ) = target`.
    pub fn inverse(&self, tree: &ScenarioTree, node: NodeId, target: f64) -> Result<f64> {
        if let GeneratorSpec::Affine { a, b } = self {
            return Ok((target - a.values[node]) / b);
        }
        if let GeneratorSpec::Offset { base, offset } = self {
            return base.inverse(tree, node, target - offset.values[node]);
        }
        let b0 = 1.0 + target.abs() / self.slope_floor();
        crate::numeric::bisect_increasing(|l| self.eval(tree, node, l) - target, b0)
    }
}

fn table_eval(knots: &[f64], row: &[f64], b_ext: f64, l: f64) -> f64 {
    let last = knots.len() - 1;
    if l <= knots[0] {
        return row[0] + b_ext * (l - knots[0]);
    }
    if l >= knots[last] {
        return row[last] + b_ext * (l - knots[last]);
    }
    let i = knots.partition_point(|&k| k <= l) - 1;
    let w = (l - knots[i]) / (knots[i + 1] - knots[i]);
    row[i] + w * (row[i + 1] - row[i])
}
