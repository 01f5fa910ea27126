//! Deterministic solver for `f(t, ℓ) = ℓ`: slopes of the lower convex envelope of `−Y`.

use crate::error::{invalid, Result};

/// `L_k = min_{s>k} (Y_k − Ȳ_s) / ((s − k) dt)` for `k < N`, `L_N = −∞`.
///
/// `Ȳ_s = max(Y_s, Y_{s−})` when left limits are supplied, so a jump just
/// before a grid time is seen by stopping an instant earlier. Each `L_k` is
/// the initial slope of the lower convex envelope of `s ↦ −Ȳ_s` on `[t_k, T]`.
pub fn solve_deterministic_convex_envelope(y: &[f64], y_left: Option<&[f64]>, dt: f64) -> Result<Vec<f64>> {
    if y.len() < 2 {
        return invalid("need at least two samples");
    }
    if !(dt.is_finite() && dt > 0.0) {
        return invalid(format!("step must be positive, got {dt}"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return invalid("samples must be finite");
    }
    let bar: Vec<f64> = match y_left {
        None => y.to_vec(),
        Some(left) => {
            if left.len() != y.len() {
                return invalid("left limits must have one entry per sample");
            }
            if left.iter().any(|v| !v.is_finite()) {
                return invalid("left limits must be finite");
            }
            y.iter().zip(left).map(|(a, b)| a.max(*b)).collect()
        }
    };
    let n = y.len() - 1;
    let mut l = vec![f64::NEG_INFINITY; n + 1];
    for k in 0..n {
        l[k] = (k + 1..=n)
            .map(|s| (y[k] - bar[s]) / ((s - k) as f64 * dt))
            .fold(f64::INFINITY, f64::min);
    }
    Ok(l)
}

/// `L̂_k = max_{j<k} L_j`, `L̂_0 = −∞`.
pub fn running_max_strict(l: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(l.len());
    let mut m = f64::NEG_INFINITY;
    for &v in l {
        out.push(m);
        m = m.max(v);
    }
    out
}
