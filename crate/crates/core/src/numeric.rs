//! Small numerical helpers: extended reals for serialization and monotone root finding.

use crate::error::{Error, Result};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;

// ── Extended reals ────────────────────────────────────────────────────

/// A real in `ℝ ∪ {±∞}` that serializes infinities as `"-inf"` / `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ExtReal(pub f64);

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v = self.0;
        if v.is_finite() {
            s.serialize_f64(v)
        } else if v == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else if v == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            Err(serde::ser::Error::custom("NaN cannot be serialized"))
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = ExtReal;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number, \"-inf\" or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<ExtReal, E> {
                Ok(ExtReal(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<ExtReal, E> {
                Ok(ExtReal(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<ExtReal, E> {
                Ok(ExtReal(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<ExtReal, E> {
                match v {
                    "-inf" => Ok(ExtReal(f64::NEG_INFINITY)),
                    "inf" => Ok(ExtReal(f64::INFINITY)),
                    other => Err(E::custom(format!("unexpected string {other:?}"))),
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// Serde adapter for `Vec<f64>` fields that may hold infinities.
pub mod ext_vec {
    use super::ExtReal;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|&x| ExtReal(x)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<ExtReal>::deserialize(d)?.into_iter().map(|x| x.0).collect())
    }
}

// ── Root finding ──────────────────────────────────────────────────────

/// Root of a nondecreasing function `g` with a sign change somewhere in `ℝ`.
///
/// Starts from `[-b0, b0]`, doubles the bracket until the sign changes, then
/// bisects until the bracket collapses to adjacent floats.
pub fn bisect_increasing(g: impl Fn(f64) -> f64, b0: f64) -> Result<f64> {
    let mut b = if b0.is_finite() && b0 > 0.0 { b0 } else { 1.0 };
    let mut lo = -b;
    let mut hi = b;
    let mut doublings = 0;
    while g(lo) > 0.0 || g(hi) < 0.0 {
        doublings += 1;
        if doublings > 1100 || !b.is_finite() {
            return Err(Error::NotConverged("no sign change found while growing the bracket".into()));
        }
        b *= 2.0;
        lo = -b;
        hi = b;
    }
    bisect_bracket(g, lo, hi)
}

/// Bisection on a bracket `[lo, hi]` with `g(lo) ≤ 0 ≤ g(hi)`.
pub fn bisect_bracket(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> Result<f64> {
    for _ in 0..2200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = g(mid);
        if v == 0.0 {
            return Ok(mid);
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (glo, ghi) = (g(lo).abs(), g(hi).abs());
    Ok(if glo <= ghi { lo } else { hi })
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let n = x.len();
    if n < 2 || n != y.len() {
        return f64::NAN;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let mx = rx.iter().sum::<f64>() / n as f64;
    let my = ry.iter().sum::<f64>() / n as f64;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx).powi(2);
        syy += (ry[i] - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return f64::NAN;
    }
    sxy / (sxx * syy).sqrt()
}
