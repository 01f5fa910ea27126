//! Lévy–Prokhorov distance between finite-support measures.

use super::maxflow::bipartite_flow;
use crate::error::{invalid, Result};

/// `inf{ε : ∃ coupling with P(d(X, Y) > ε) ≤ ε}` for weights `mu`, `nu` and
/// pairwise distances `dist[i][j]`, capped at 1.
///
/// With `F(ε)` the largest mass a coupling can put on pairs at distance `≤ ε`,
/// `F` is a right-continuous step function jumping only at the distinct
/// distances `d_1 < d_2 < …`, so the answer is `min_k max(d_k, 1 − F(d_k))`.
/// The two terms cross once; a binary search over `k` finds the crossing.
pub fn levy_prokhorov(mu: &[f64], nu: &[f64], dist: &[Vec<f64>]) -> Result<f64> {
    if mu.is_empty() || nu.is_empty() {
        return invalid("empty support");
    }
    if dist.len() != mu.len() || dist.iter().any(|row| row.len() != nu.len()) {
        return invalid("distance matrix does not match the supports");
    }
    if dist.iter().flatten().any(|d| !(d.is_finite() && *d >= 0.0)) {
        return invalid("distances must be finite and nonnegative");
    }
    let mut ds: Vec<f64> = dist.iter().flatten().copied().filter(|&d| d < 1.0).collect();
    ds.sort_by(f64::total_cmp);
    ds.dedup();
    if ds.is_empty() {
        return Ok(1.0);
    }
    let mass = |eps: f64| bipartite_flow(mu, nu, |i, j| dist[i][j] <= eps);
    let value = |k: usize| ds[k].max(1.0 - mass(ds[k]));
    // First k with d_k ≥ 1 − F(d_k).
    let (mut lo, mut hi) = (0usize, ds.len());
    while lo < hi {
        let mid = (lo + hi) / 2;
        if ds[mid] >= 1.0 - mass(ds[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let mut best: f64 = 1.0;
    if lo < ds.len() {
        best = best.min(value(lo));
    }
    if lo > 0 {
        best = best.min(value(lo - 1));
    }
    Ok(best.clamp(0.0, 1.0))
}
