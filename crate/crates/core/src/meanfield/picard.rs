//! Damped Picard iteration on mixtures of finite-support measures.

use super::{Adapter, FixedPointReport, MeanFieldProblem, Status};
use crate::error::{invalid, Result};
use crate::metrics_order::RandomMeasure;
use serde::{Deserialize, Serialize};

/// Outcomes closer than this in their own metric are merged after each step.
const MERGE_TOL: f64 = 1e-9;
/// Support weights below this are dropped after each step.
const DROP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardConfig {
    /// Mixture weight of `Φ(m)` in `(0, 1]`.
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig { damping: 1.0, tol: 1e-8, max_iter: 100 }
    }
}

/// Iterate `m_{k+1} = (1 − θ) m_k + θ Φ(m_k)`.
///
/// Iteration `k` records `r_k = d_LP(m_k, Φ(m_k))` and stops with `m_star = m_k`
/// once `r_k < tol`. Exhausting `max_iter` is reported as [`Status::NotConverged`]
/// with the full trace, not as an error.
pub fn picard_solve<A: Adapter>(problem: &MeanFieldProblem<A>, m0: &RandomMeasure, cfg: &PicardConfig) -> Result<FixedPointReport> {
    if !(cfg.damping > 0.0 && cfg.damping <= 1.0) {
        return invalid(format!("damping must lie in (0, 1], got {}", cfg.damping));
    }
    if !(cfg.tol > 0.0) || cfg.max_iter == 0 {
        return invalid("tolerance must be positive and max_iter at least 1");
    }
    let mut m = problem.quantize_measure(m0)?;
    let mut eval = problem.evaluate(&m)?;
    let mut trace = Vec::new();
    let mut status = Status::NotConverged;
    let mut residual = f64::INFINITY;
    for _ in 0..cfg.max_iter {
        let mut next = m.mix(&eval.law, cfg.damping)?;
        next.prune(MERGE_TOL, DROP_TOL)?;
        m = next;
        eval = problem.evaluate(&m)?;
        residual = m.distance(&eval.law)?;
        trace.push(residual);
        if residual < cfg.tol {
            status = Status::Converged;
            break;
        }
    }
    Ok(FixedPointReport {
        engine: "picard".into(),
        status,
        m_star: m,
        residual_consistency: residual,
        residual_representation: eval.residual,
        representation_tolerance: eval.tolerance,
        lhat_star: eval.lhat,
        iterations: trace.len(),
        trace,
    })
}
