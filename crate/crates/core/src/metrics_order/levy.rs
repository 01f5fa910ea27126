//! Left-continuous nondecreasing step paths and the Lévy metric.

use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};

/// Nondecreasing left-continuous step path on `[0, T)` with `v(0) = −∞`:
/// `v(t) = values[k−1]` for `t ∈ (times[k−1], times[k]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VPlusDoc", into = "VPlusDoc")]
pub struct VPlusPath {
    times: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct VPlusDoc {
    times: Vec<f64>,
    values: Vec<f64>,
    #[serde(default = "neg_inf")]
    v0: String,
}

fn neg_inf() -> String {
    "-inf".into()
}

impl TryFrom<VPlusDoc> for VPlusPath {
    type Error = Error;
    fn try_from(d: VPlusDoc) -> Result<Self> {
        if d.v0 != "-inf" {
            return invalid("v0 must be \"-inf\"");
        }
        VPlusPath::new(d.times, d.values)
    }
}

impl From<VPlusPath> for VPlusDoc {
    fn from(p: VPlusPath) -> Self {
        VPlusDoc { times: p.times, values: p.values, v0: "-inf".into() }
    }
}

impl VPlusPath {
    /// `times = t_0 < … < t_N` with `t_0 = 0`, `values = v_1 ≤ … ≤ v_N`, all finite.
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() < 2 || values.len() + 1 != times.len() {
            return invalid(format!("need N+1 times and N values, got {} and {}", times.len(), values.len()));
        }
        if times[0] != 0.0 {
            return invalid("paths start at time 0");
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("times must be finite and strictly increasing");
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("path values must be finite on (0, T)");
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return invalid("path values must be nondecreasing");
        }
        Ok(Self { times, values })
    }

    /// Constant path `c` on `(0, T]`.
    pub fn constant(horizon: f64, c: f64) -> Result<Self> {
        Self::new(vec![0.0, horizon], vec![c])
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    /// `v(t)`: `−∞` for `t ≤ 0`, the last value for `t > T`.
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let k = self.times.partition_point(|&s| s < t);
        if k >= self.times.len() {
            return *self.values.last().expect("non-empty");
        }
        self.values[k - 1]
    }

    /// Restriction to `[0, h)`, extended by its last value when `h > T`.
    pub fn restrict(&self, h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return invalid("restriction horizon must be positive");
        }
        let mut times = vec![0.0];
        let mut values = Vec::new();
        for k in 1..self.times.len() {
            if self.times[k] < h {
                times.push(self.times[k]);
                values.push(self.values[k - 1]);
            } else {
                break;
            }
        }
        times.push(h);
        values.push(self.eval(h));
        Self::new(times, values)
    }
}

fn sup_gap(v1: &VPlusPath, v2: &VPlusPath, pts: &[f64]) -> f64 {
    pts.windows(2)
        .map(|w| {
            let m = 0.5 * (w[0] + w[1]);
            (v1.eval(m) - v2.eval(m)).abs()
        })
        .fold(0.0, f64::max)
}

/// Breakpoints of both constraint families for shift `eps`, on `[eps, T]`.
fn breakpoints(v1: &VPlusPath, v2: &VPlusPath, eps: f64, horizon: f64) -> Vec<f64> {
    let mut pts: Vec<f64> = v1
        .times
        .iter()
        .chain(&v2.times)
        .flat_map(|&t| [t, t + eps])
        .chain([eps, horizon])
        .filter(|&t| t >= eps && t <= horizon)
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// `a((t−ε)∨0) − ε ≤ b(t)` on every open piece between breakpoints.
fn one_sided(a: &VPlusPath, b: &VPlusPath, eps: f64, pts: &[f64]) -> bool {
    pts.windows(2).all(|w| {
        let m = 0.5 * (w[0] + w[1]);
        if m <= w[0] || m >= w[1] {
            return true;
        }
        a.eval(m - eps) - eps <= b.eval(m)
    })
}

fn feasible(v1: &VPlusPath, v2: &VPlusPath, eps: f64, horizon: f64) -> bool {
    if eps >= horizon {
        return true;
    }
    let pts = breakpoints(v1, v2, eps, horizon);
    one_sided(v1, v2, eps, &pts) && one_sided(v2, v1, eps, &pts)
}

/// Lévy distance `inf{ε ≥ 0 : v1((t−ε)∨0) − ε ≤ v2(t), v2((t−ε)∨0) − ε ≤ v1(t), ∀t ∈ (0,T)}`.
///
/// Feasibility of a shift is decided exactly on the pieces between shifted
/// breakpoints; the infimum is bracketed by 64 bisection steps and the
/// feasible upper endpoint is returned.
pub fn levy_distance(v1: &VPlusPath, v2: &VPlusPath, horizon: f64) -> Result<f64> {
    let tol = 1e-12 * horizon.max(1.0);
    if (v1.horizon() - horizon).abs() > tol || (v2.horizon() - horizon).abs() > tol {
        return Err(Error::Mismatch(format!(
            "paths end at {} and {}, expected {horizon}",
            v1.horizon(),
            v2.horizon()
        )));
    }
    if feasible(v1, v2, 0.0, horizon) {
        return Ok(0.0);
    }
    let pts = breakpoints(v1, v2, 0.0, horizon);
    let mut hi = horizon.min(sup_gap(v1, v2, &pts));
    let mut lo = 0.0;
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if feasible(v1, v2, mid, horizon) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `Σ_{n=1}^{M} 2^{−n} (d_L(v1|[0,n), v2|[0,n)) ∧ 1)` and the tail bound `2^{−M}`.
pub fn levy_distance_truncated(v1: &VPlusPath, v2: &VPlusPath, terms: usize) -> Result<(f64, f64)> {
    if terms == 0 {
        return invalid("need at least one term");
    }
    let mut total = 0.0;
    for n in 1..=terms {
        let h = n as f64;
        let d = levy_distance(&v1.restrict(h)?, &v2.restrict(h)?, h)?;
        total += 0.5f64.powi(n as i32) * d.min(1.0);
    }
    Ok((total, 0.5f64.powi(terms as i32)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(s: f64, h: f64, horizon: f64) -> VPlusPath {
        VPlusPath::new(vec![0.0, s, horizon], vec![0.0, h]).unwrap()
    }

    #[test]
    fn identical_and_constant() {
        let p = step(0.3, 1.0, 1.0);
        assert_eq!(levy_distance(&p, &p, 1.0).unwrap(), 0.0);
        let a = VPlusPath::constant(1.0, 0.2).unwrap();
        let b = VPlusPath::constant(1.0, 0.7).unwrap();
        assert!((levy_distance(&a, &b, 1.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn shifted_steps_match_grid_search() {
        for &(s, d) in &[(0.3, 0.1), (0.2, 0.35), (0.5, 0.05)] {
            let a = step(s, 1.0, 1.0);
            let b = step(s + d, 1.0, 1.0);
            let got = levy_distance(&a, &b, 1.0).unwrap();
            assert!((got - d).abs() < 1e-10, "{got} vs {d}");
            // Independent dense scan over ε and t.
            let ok = |e: f64| {
                (1..4000).all(|i| {
                    let t = i as f64 / 4000.0;
                    a.eval((t - e).max(0.0)) - e <= b.eval(t) && b.eval((t - e).max(0.0)) - e <= a.eval(t)
                })
            };
            let scan = (0..=1000).map(|i| i as f64 / 1000.0).find(|&e| ok(e)).unwrap();
            assert!((scan - d).abs() <= 1e-3 + 1e-12);
        }
    }

    #[test]
    fn symmetric_exactly() {
        let a = VPlusPath::new(vec![0.0, 0.2, 0.5, 1.0], vec![-1.0, 0.3, 0.4]).unwrap();
        let b = VPlusPath::new(vec![0.0, 0.4, 1.0], vec![-0.2, 0.9]).unwrap();
        assert_eq!(levy_distance(&a, &b, 1.0).unwrap(), levy_distance(&b, &a, 1.0).unwrap());
    }

    #[test]
    fn horizon_mismatch() {
        let a = VPlusPath::constant(1.0, 0.0).unwrap();
        let b = VPlusPath::constant(2.0, 0.0).unwrap();
        assert!(levy_distance(&a, &b, 1.0).is_err());
    }

    #[test]
    fn truncation_is_blind_past_the_terms() {
        let a = VPlusPath::new(vec![0.0, 3.0, 5.0], vec![0.0, 0.0]).unwrap();
        let b = VPlusPath::new(vec![0.0, 3.0, 5.0], vec![0.0, 2.0]).unwrap();
        let (v, tail) = levy_distance_truncated(&a, &b, 2).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(tail, 0.25);
        let (v4, _) = levy_distance_truncated(&a, &b, 4).unwrap();
        assert!(v4 > 0.0);
        assert_eq!(levy_distance_truncated(&a, &a, 6).unwrap().0, 0.0);
    }
}
