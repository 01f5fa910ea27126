//! Deterministic ramp perturbations of `Y = 0` with `f(t, ℓ) = ℓ` on `[0, 1]`.
//!
//! `Y^n_t = c_n (t − ½) 1_{[½, ½+1/n)}(t)` with `c_n = 1` (uniform ramp) or
//! `c_n = n` (steep ramp). The uniform ramp converges to `0` in sup-norm, the steep
//! ramp only pointwise.

use crate::error::{invalid, Result};
use crate::metrics_order::{levy_distance, VPlusPath};
use crate::representation::{running_max_strict, solve_deterministic_convex_envelope};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RampFamily {
    /// `c_n = 1`: `sup|Y^n| = 1/n → 0`.
    Uniform,
    /// `c_n = n`: `sup|Y^n| = 1` for every `n`.
    Steep,
}

impl RampFamily {
    pub fn scale(self, n: usize) -> f64 {
        match self {
            RampFamily::Uniform => 1.0,
            RampFamily::Steep => n as f64,
        }
    }

    /// `Y^n_t` (right-continuous version).
    pub fn y(self, n: usize, t: f64) -> f64 {
        let end = 0.5 + 1.0 / n as f64;
        if (0.5..end).contains(&t) {
            self.scale(n) * (t - 0.5)
        } else {
            0.0
        }
    }

    /// `Y^n_{t−}`, which differs from `Y^n_t` only at `t = ½ + 1/n`.
    pub fn y_left(self, n: usize, t: f64) -> f64 {
        let end = 0.5 + 1.0 / n as f64;
        if t > 0.5 && t <= end {
            self.scale(n) * (t - 0.5)
        } else {
            0.0
        }
    }

    /// Exact `L^n_t`: `−2c/(2 + n(1 − 2t))` on `[0, ½]`, `−c` inside the ramp, `0` after it.
    pub fn l(self, n: usize, t: f64) -> f64 {
        let c = self.scale(n);
        let end = 0.5 + 1.0 / n as f64;
        if t <= 0.5 {
            -2.0 * c / (2.0 + n as f64 * (1.0 - 2.0 * t))
        } else if t < end {
            -c
        } else {
            0.0
        }
    }

    /// `L̂^n_t` for `t ∈ (0, ½ + 1/n]`: the value of `L^n` at time 0.
    pub fn lhat_plateau(self, n: usize) -> f64 {
        -2.0 * self.scale(n) / (n as f64 + 2.0)
    }

    /// `d_L(L̂^n, 0)` on `[0, 1)`: the smaller of the value gap and the plateau length.
    pub fn levy_to_limit(self, n: usize) -> f64 {
        (-self.lhat_plateau(n)).min(0.5 + 1.0 / n as f64)
    }

    /// `sup_t |Y^n_t − Y_t|`, attained by the left limit at the end of the ramp.
    pub fn sup_gap(self, n: usize) -> f64 {
        self.scale(n) / n as f64
    }
}

/// Grid samples `(Y^n_{t_k}, Y^n_{t_k−})` on `steps` uniform steps of `[0, 1]`.
pub fn ramp_samples(family: RampFamily, n: usize, steps: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    check_grid(n, steps)?;
    let t = |k: usize| k as f64 / steps as f64;
    Ok(((0..=steps).map(|k| family.y(n, t(k))).collect(), (0..=steps).map(|k| family.y_left(n, t(k))).collect()))
}

fn check_grid(n: usize, steps: usize) -> Result<()> {
    if n < 1 {
        return invalid("ramp index must be at least 1");
    }
    if steps == 0 || steps % (2 * n) != 0 {
        return invalid(format!("insufficient grid: {steps} steps do not resolve ½ and ½ + 1/{n}"));
    }
    Ok(())
}

/// Solver output for one ramp compared with the closed forms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleRecord {
    pub family: RampFamily,
    pub n: usize,
    pub steps: usize,
    pub dt: f64,
    /// `L^n` at `t_0, …, t_{N−1}`.
    pub l: Vec<f64>,
    /// `L̂^n` at `t_1, …, t_N`.
    pub lhat: Vec<f64>,
    /// `max_k |L_k − L^n(t_k)|` over `k < N`.
    pub max_formula_error: f64,
    /// Computed `L^n_{1/2}` and its limit value `L_{1/2} = 0`.
    pub l_half: f64,
    pub lhat_half: f64,
    pub lhat_half_expected: f64,
    /// `d_L(L̂^n, L̂)` against the limit `L̂ = 0`.
    pub levy_distance: f64,
    pub levy_expected: f64,
    pub sup_y_gap: f64,
}

/// Solve the ramp `n` on `steps` grid steps and compare with the closed forms.
pub fn counterexample(family: RampFamily, n: usize, steps: usize) -> Result<CounterexampleRecord> {
    let (y, y_left) = ramp_samples(family, n, steps)?;
    let dt = 1.0 / steps as f64;
    let l = solve_deterministic_convex_envelope(&y, Some(&y_left), dt)?;
    let lhat = running_max_strict(&l);
    let max_formula_error =
        (0..steps).map(|k| (l[k] - family.l(n, k as f64 * dt)).abs()).fold(0.0, f64::max);
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    let path = VPlusPath::new(times.clone(), lhat[1..].to_vec())?;
    let limit = VPlusPath::new(times, vec![0.0; steps])?;
    let half = steps / 2;
    Ok(CounterexampleRecord {
        family,
        n,
        steps,
        dt,
        l: l[..steps].to_vec(),
        lhat: lhat[1..].to_vec(),
        max_formula_error,
        l_half: l[half],
        lhat_half: lhat[half],
        lhat_half_expected: family.lhat_plateau(n),
        levy_distance: levy_distance(&path, &limit, 1.0)?,
        levy_expected: family.levy_to_limit(n),
        sup_y_gap: y.iter().chain(&y_left).map(|v| v.abs()).fold(0.0, f64::max),
    })
}

/// Uniform ramp `Y^n_t = (t − ½) 1_{[½, ½+1/n)}(t)`.
pub fn counterexample_i(n: usize, steps: usize) -> Result<CounterexampleRecord> {
    counterexample(RampFamily::Uniform, n, steps)
}

/// Steep ramp `Y^n_t = n (t − ½) 1_{[½, ½+1/n)}(t)`.
pub fn counterexample_ii(n: usize, steps: usize) -> Result<CounterexampleRecord> {
    counterexample(RampFamily::Steep, n, steps)
}
