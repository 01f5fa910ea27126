//! The running-maximum representation of an optional process.
//!
//! For `Y` with terminal value normalised away and a strictly increasing
//! generator `f`, the discrete identity solved here is
//!
//! ```text
//! Y_τ − E[Y_T | F_τ] = E[ Σ_{k=τ}^{N−1} f(k, max_{τ≤j≤k} L_j) dt | F_τ ]   for every stopping time τ.
//! ```
//!
//! The maximum includes the current index, so on the node at time `k` the
//! level is the running maximum `L̂_{k+1} = max_{j≤k} L_j`. `L̂` is stored on
//! nodes: the root carries `−∞`, and a child carries `max(L̂_parent, L_parent)`.
//! `L` itself is only defined before the horizon and is `−∞` on leaves.
//!
//! Solvers:
//! * [`solve_essinf_bruteforce`]: `L_n = min_σ ℓ_{n,σ}` over every stopping time after `n`;
//! * [`solve_snell_bisection`]: `L_n` as the root of the one-node optimal stopping value in `ℓ`;
//! * [`solve_level_grid`]: smallest optimal stopping times `τ_ℓ` on a level grid;
//! * [`solve_deterministic_convex_envelope`]: chord slopes for deterministic `Y` and `f(ℓ) = ℓ`.

mod envelope;
mod generator;
mod grid;
mod oracle;
mod snell;
mod verify;

pub use envelope::{running_max_strict, solve_deterministic_convex_envelope};
pub use generator::{GeneratorSpec, MarginalUtility};
pub use grid::{default_levels, grid_tolerance, one_step_roots, solve_level_grid, DEFAULT_LEVELS};
pub use oracle::{ell_root, lhat_from_l, solve_essinf_bruteforce, solve_essinf_bruteforce_with, solve_snell_bisection};
pub use snell::{snell_smallest_optimal, stopping_objective, STOP_TOL};
pub use verify::{node_residuals, starts_every_time, verify_representation};

use crate::error::{Error, Result};
use crate::numeric::ExtReal;
use crate::prob_tree::{AdaptedProcess, NodeId, ScenarioTree, StoppingTime};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Which solver produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Oracle,
    Exact,
    LevelGrid,
    Envelope,
}

/// Output of a representation solver.
#[derive(Debug, Clone, PartialEq)]
pub struct LhatResult {
    pub method: Method,
    /// Running maximum `L̂`, `−∞` at the root.
    pub lhat: AdaptedProcess,
    /// `L` values: exact for oracle and exact solvers, the largest level whose
    /// stop region contains the node for level-grid results. `−∞` on leaves.
    pub l: AdaptedProcess,
    /// Level grid (empty for exact solvers).
    pub levels: Vec<f64>,
    /// Smallest optimal stopping times `τ_ℓ`, parallel to `levels`.
    pub stop_times: Vec<StoppingTime>,
    /// Largest gap of the level grid (0 for exact solvers).
    pub cell: f64,
    /// Representation residual over starts at every deterministic time.
    pub residual: f64,
}

impl LhatResult {
    /// `L̂` along a path, indexed by time.
    pub fn lhat_path(&self, path: &crate::prob_tree::PathRecord) -> Vec<f64> {
        self.lhat.along(path)
    }

    /// Largest absolute difference of two `L̂` processes on non-root nodes.
    pub fn sup_distance(&self, other: &LhatResult) -> f64 {
        self.lhat
            .values
            .iter()
            .zip(&other.lhat.values)
            .filter(|(a, b)| a.is_finite() || b.is_finite())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Serialized form of [`LhatResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LhatDoc {
    pub method: Method,
    pub levels: Vec<f64>,
    pub lhat: BTreeMap<NodeId, ExtReal>,
    pub l: BTreeMap<NodeId, ExtReal>,
    pub cell: f64,
    pub residual: f64,
    pub stop_times: BTreeMap<String, Vec<NodeId>>,
}

impl From<&LhatResult> for LhatDoc {
    fn from(r: &LhatResult) -> Self {
        let map = |p: &AdaptedProcess| p.values.iter().enumerate().map(|(i, &v)| (i, ExtReal(v))).collect();
        LhatDoc {
            method: r.method,
            levels: r.levels.clone(),
            lhat: map(&r.lhat),
            l: map(&r.l),
            cell: r.cell,
            residual: r.residual,
            stop_times: r.levels.iter().zip(&r.stop_times).map(|(lv, st)| (format!("{lv}"), st.flagged())).collect(),
        }
    }
}

impl TryFrom<LhatDoc> for LhatResult {
    type Error = Error;
    fn try_from(doc: LhatDoc) -> Result<Self> {
        let n = doc.lhat.len();
        let unmap = |m: &BTreeMap<NodeId, ExtReal>| -> Result<AdaptedProcess> {
            if m.len() != n || m.keys().enumerate().any(|(i, &k)| i != k) {
                return Err(Error::Invalid("node maps must cover 0..n".into()));
            }
            Ok(AdaptedProcess::new(m.values().map(|x| x.0).collect()))
        };
        let lhat = unmap(&doc.lhat)?;
        let l = unmap(&doc.l)?;
        let mut stop_times = Vec::with_capacity(doc.levels.len());
        for lv in &doc.levels {
            let nodes = doc
                .stop_times
                .get(&format!("{lv}"))
                .ok_or_else(|| Error::Invalid(format!("no stopping time stored for level {lv}")))?;
            let mut region = vec![false; n];
            for &id in nodes {
                *region.get_mut(id).ok_or_else(|| Error::Invalid(format!("stop node {id} out of range")))? = true;
            }
            stop_times.push(StoppingTime { stop_region: region });
        }
        Ok(LhatResult {
            method: doc.method,
            lhat,
            l,
            levels: doc.levels,
            stop_times,
            cell: doc.cell,
            residual: doc.residual,
        })
    }
}

impl Serialize for LhatResult {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        LhatDoc::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for LhatResult {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = LhatDoc::deserialize(d)?;
        LhatResult::try_from(doc).map_err(serde::de::Error::custom)
    }
}

/// Validate the shared inputs of every tree solver.
pub(crate) fn check_inputs(tree: &ScenarioTree, y: &AdaptedProcess, f: &GeneratorSpec) -> Result<()> {
    y.check(tree, "Y")?;
    y.check_finite("Y")?;
    f.validate(tree)
}
