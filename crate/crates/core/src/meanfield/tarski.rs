//! Monotone iteration from a lattice extreme on a quantized outcome grid.

use super::{Adapter, FixedPointReport, MeanFieldProblem, Status};
use crate::error::{invalid, Error, Result};
use crate::metrics_order::RandomMeasure;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    FromBottom,
    FromTop,
}

/// Iterate `m ← Φ(m)` from `bottom` or `top`.
///
/// Every consecutive pair is certified by [`RandomMeasure::leq`] (increasing from
/// the bottom, decreasing from the top) and the iterates are checked to stay
/// within `[bottom, top]`. The run stops at exact equality of canonical forms.
/// An out-of-order pair aborts with [`Error::OrderViolation`].
pub fn tarski_solve<A: Adapter>(
    problem: &MeanFieldProblem<A>,
    bottom: &RandomMeasure,
    top: &RandomMeasure,
    direction: Direction,
    max_iter: usize,
) -> Result<FixedPointReport> {
    if problem.quantization.is_none() {
        return invalid("the monotone engine needs a quantization grid");
    }
    let bottom = problem.quantize_measure(bottom)?;
    let top = problem.quantize_measure(top)?;
    if !bottom.leq(&top)? {
        return Err(Error::OrderViolation("lattice bottom is not below lattice top".into()));
    }
    let mut m = match direction {
        Direction::FromBottom => bottom.clone(),
        Direction::FromTop => top.clone(),
    };
    let mut trace = Vec::new();
    let mut status = Status::NotConverged;
    let mut eval = problem.evaluate(&m)?;
    for k in 0..max_iter {
        let next = eval.law.clone().canonical();
        let ordered = match direction {
            Direction::FromBottom => m.leq(&next)?,
            Direction::FromTop => next.leq(&m)?,
        };
        if !ordered {
            return Err(Error::OrderViolation(format!(
                "iterate {} and {} are not ordered; the adapter is not monotone",
                k,
                k + 1
            )));
        }
        if !(bottom.leq(&next)? && next.leq(&top)?) {
            return Err(Error::OrderViolation(format!("iterate {} left the lattice [bottom, top]", k + 1)));
        }
        trace.push(m.distance(&next)?);
        if next.same_as(&m) {
            status = Status::Stationary;
            break;
        }
        m = next;
        eval = problem.evaluate(&m)?;
    }
    let residual = if status == Status::Stationary { 0.0 } else { m.distance(&eval.law)? };
    Ok(FixedPointReport {
        engine: match direction {
            Direction::FromBottom => "tarski_from_bottom".into(),
            Direction::FromTop => "tarski_from_top".into(),
        },
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

/// Least and greatest fixed points of the quantized system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TarskiBracket {
    pub least: FixedPointReport,
    pub greatest: FixedPointReport,
    /// Both runs stopped at the same measure, which is then the unique fixed point in the lattice.
    pub coincide: bool,
}

pub fn tarski_bracket<A: Adapter>(
    problem: &MeanFieldProblem<A>,
    bottom: &RandomMeasure,
    top: &RandomMeasure,
    max_iter: usize,
) -> Result<TarskiBracket> {
    let least = tarski_solve(problem, bottom, top, Direction::FromBottom, max_iter)?;
    let greatest = tarski_solve(problem, bottom, top, Direction::FromTop, max_iter)?;
    if least.converged() && greatest.converged() && !least.m_star.leq(&greatest.m_star)? {
        return Err(Error::OrderViolation("least fixed point is not below the greatest".into()));
    }
    let coincide = least.converged() && greatest.converged() && least.m_star.same_as(&greatest.m_star);
    Ok(TarskiBracket { least, greatest, coincide })
}
