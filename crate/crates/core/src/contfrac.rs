//! Continued fractions, convergents, and the Brjuno sum.

use serde::{Deserialize, Serialize};

use crate::error::{QcError, Result};

/// An irrational frequency, either exactly tagged (so that continued
/// fractions can be produced to arbitrary depth) or a plain double.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Irrational {
    /// (sqrt 5 - 1)/2, partial quotients all 1.
    Golden,
    /// sqrt 2 - 1, partial quotients all 2.
    Sqrt2M1,
    /// Untagged value; continued fractions limited by double precision.
    Value(f64),
}

impl Irrational {
    pub fn value(self) -> f64 {
        match self {
            Irrational::Golden => (5f64.sqrt() - 1.0) / 2.0,
            Irrational::Sqrt2M1 => std::f64::consts::SQRT_2 - 1.0,
            Irrational::Value(v) => v,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Irrational::Golden => "golden",
            Irrational::Sqrt2M1 => "sqrt2m1",
            Irrational::Value(_) => "value",
        }
    }

    /// Parses "golden", "sqrt2m1", or a numeric literal. Numeric values that
    /// look rational at working precision are rejected.
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "golden" => Ok(Irrational::Golden),
            "sqrt2m1" => Ok(Irrational::Sqrt2M1),
            _ => {
                let v: f64 = text
                    .parse()
                    .map_err(|_| QcError::InvalidInput(format!("cannot parse alpha '{text}'")))?;
                let a = Irrational::Value(v);
                if !(0.0..1.0).contains(&v) {
                    return Err(QcError::InvalidInput(format!(
                        "alpha must lie in (0, 1), got {v}"
                    )));
                }
                if a.looks_rational() {
                    return Err(QcError::InvalidInput(format!(
                        "alpha = {v} is rational at working precision"
                    )));
                }
                Ok(a)
            }
        }
    }

    /// A value whose continued fraction terminates with a small denominator.
    pub fn looks_rational(self) -> bool {
        match self {
            Irrational::Value(_) => match continued_fraction(self, 25) {
                Ok(cf) => cf.exhausted && cf.denominators().last().is_some_and(|&q| q < 1e6),
                Err(_) => true,
            },
            _ => false,
        }
    }
}

impl Serialize for Irrational {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Wire<'a> {
            tag: &'a str,
            value: f64,
        }
        Wire {
            tag: self.tag(),
            value: self.value(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Irrational {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            tag: String,
            value: f64,
        }
        let w = Wire::deserialize(de)?;
        match w.tag.as_str() {
            "golden" => Ok(Irrational::Golden),
            "sqrt2m1" => Ok(Irrational::Sqrt2M1),
            "value" => Ok(Irrational::Value(w.value)),
            other => Err(serde::de::Error::custom(format!("unknown alpha tag '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ContinuedFraction {
    pub partial_quotients: Vec<u64>,
    /// Convergents (p_k, q_k), exact while they fit in 128 bits.
    pub convergents: Vec<(u128, u128)>,
    /// True when the expansion stopped early because the remainder hit
    /// machine epsilon (untagged values only).
    pub exhausted: bool,
}

impl ContinuedFraction {
    pub fn denominators(&self) -> Vec<f64> {
        self.convergents.iter().map(|&(_, q)| q as f64).collect()
    }
}

/// Continued fraction of `alpha` in (0,1) to depth `K`. Tagged values use
/// their exact partial quotients; untagged values run the Gauss map and stop
/// (flagged) when the remainder is no longer trustworthy.
pub fn continued_fraction(alpha: Irrational, depth: usize) -> Result<ContinuedFraction> {
    let quotients: Vec<u64> = match alpha {
        Irrational::Golden => vec![1; depth],
        Irrational::Sqrt2M1 => vec![2; depth],
        Irrational::Value(v) => {
            let mut out = Vec::with_capacity(depth);
            let mut x = v.rem_euclid(1.0);
            for _ in 0..depth {
                if x < 1e-14 {
                    break;
                }
                let inv = 1.0 / x;
                let a = inv.floor();
                if !a.is_finite() || a < 1.0 {
                    break;
                }
                out.push(a as u64);
                x = inv - a;
            }
            if out.is_empty() {
                return Err(QcError::PrecisionExhausted { depth: 0 });
            }
            out
        }
    };
    let exhausted = quotients.len() < depth;
    // q_{-1} = 0, q_0 = 1; p_{-1} = 1, p_0 = 0 convention for alpha in (0,1):
    // convergent k uses quotients a_1..a_k.
    let mut convergents = Vec::with_capacity(quotients.len() + 1);
    let (mut p_prev, mut q_prev): (u128, u128) = (1, 0);
    let (mut p_cur, mut q_cur): (u128, u128) = (0, 1);
    convergents.push((p_cur, q_cur));
    for &a in &quotients {
        let a = a as u128;
        let p_next = match a.checked_mul(p_cur).and_then(|v| v.checked_add(p_prev)) {
            Some(p) => p,
            None => break,
        };
        let q_next = match a.checked_mul(q_cur).and_then(|v| v.checked_add(q_prev)) {
            Some(q) => q,
            None => break,
        };
        p_prev = p_cur;
        q_prev = q_cur;
        p_cur = p_next;
        q_cur = q_next;
        convergents.push((p_cur, q_cur));
    }
    Ok(ContinuedFraction {
        partial_quotients: quotients,
        convergents,
        exhausted,
    })
}

/// Partial Brjuno sum `sum_{k<K} (log q_{k+1}) / q_k` together with the max
/// of `(log q_{k+1}) / q_k` over the tail window (an empirical probe of
/// whether beta(alpha) = 0).
pub fn brjuno_sum(alpha: Irrational, depth: usize) -> Result<(f64, f64)> {
    let cf = continued_fraction(alpha, depth + 1)?;
    // Track denominators in floating point so the sum can outlive u128.
    let quotients = &cf.partial_quotients;
    let mut q: Vec<f64> = Vec::with_capacity(quotients.len() + 1);
    let (mut q_prev, mut q_cur) = (0.0f64, 1.0f64);
    q.push(q_cur);
    for &a in quotients {
        let q_next = a as f64 * q_cur + q_prev;
        q_prev = q_cur;
        q_cur = q_next;
        q.push(q_cur);
    }
    let terms: Vec<f64> = (0..q.len().saturating_sub(1).min(depth))
        .map(|k| q[k + 1].ln() / q[k])
        .collect();
    let sum = terms.iter().sum();
    let window = terms.len().min(10);
    let beta_estimate = terms[terms.len() - window..]
        .iter()
        .copied()
        .fold(0.0, f64::max);
    Ok((sum, beta_estimate))
}
