//! Power-family modulus `φ(x) = c·x^p` linking the second moment of an excess
//! loss to its mean, with closed forms for `φ⁻¹`, the convex conjugate `φ*`
//! and the two rate quantities derived from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `φ(x) = c·x^p` on `[0, ∞)` with `c > 0` and `p ≥ 2`.
///
/// `p ≥ 2` makes `φ` convex with `φ(0) = 0` and `φ(x)/x²` nondecreasing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModulus", into = "RawModulus")]
pub struct PowerModulus {
    c: f64,
    p: f64,
}

#[derive(Serialize, Deserialize)]
struct RawModulus {
    c: f64,
    p: f64,
}

impl TryFrom<RawModulus> for PowerModulus {
    type Error = Error;

    fn try_from(raw: RawModulus) -> Result<Self> {
        PowerModulus::new(raw.c, raw.p)
    }
}

impl From<PowerModulus> for RawModulus {
    fn from(m: PowerModulus) -> Self {
        RawModulus { c: m.c, p: m.p }
    }
}

/// `δ_n = φ*(n^{-1/2})` and `δ̃_n`, the nonzero root of `φ(δ) = δ·n^{-1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateQuantities {
    pub n: u64,
    pub delta_n: f64,
    pub delta_tilde_n: f64,
}

fn check_nonneg(what: &'static str, v: f64) -> Result<()> {
    if v.is_nan() || v < 0.0 {
        Err(Error::domain(what, v, "must be nonnegative"))
    } else {
        Ok(())
    }
}

impl PowerModulus {
    pub fn new(c: f64, p: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::domain(
                "c",
                c,
                "coefficient must be positive and finite",
            ));
        }
        if !(p.is_finite() && p >= 2.0) {
            return Err(Error::domain(
                "p",
                p,
                "exponent must be finite and at least 2",
            ));
        }
        Ok(Self { c, p })
    }

    /// Massart-margin instantiation `φ(x) = h·x²`.
    pub fn massart(h: f64) -> Result<Self> {
        Self::new(h, 2.0)
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        check_nonneg("x", x)?;
        Ok(self.c * x.powf(self.p))
    }

    pub fn inverse(&self, y: f64) -> Result<f64> {
        check_nonneg("y", y)?;
        Ok((y / self.c).powf(1.0 / self.p))
    }

    /// `φ*(y) = sup_{x ≥ 0} (x·y − c·x^p)
    ///        = (p−1)·p^{−p/(p−1)}·c^{−1/(p−1)}·y^{p/(p−1)}`.
    pub fn conjugate(&self, y: f64) -> Result<f64> {
        check_nonneg("y", y)?;
        let q = self.p / (self.p - 1.0);
        Ok((self.p - 1.0) * self.p.powf(-q) * self.c.powf(-1.0 / (self.p - 1.0)) * y.powf(q))
    }

    /// Point attaining the supremum in [`conjugate`](Self::conjugate).
    pub fn conjugate_maximizer(&self, y: f64) -> Result<f64> {
        check_nonneg("y", y)?;
        Ok((y / (self.c * self.p)).powf(1.0 / (self.p - 1.0)))
    }

    pub fn rate_quantities(&self, n: u64) -> Result<RateQuantities> {
        if n == 0 {
            return Err(Error::domain("n", 0.0, "sample count must be positive"));
        }
        let root_n = (n as f64).sqrt();
        let delta_n = self.conjugate(1.0 / root_n)?;
        let delta_tilde_n = (self.c * root_n).powf(-1.0 / (self.p - 1.0));
        Ok(RateQuantities {
            n,
            delta_n,
            delta_tilde_n,
        })
    }

    /// `δ_n = φ*(n^{-1/2})`.
    pub fn delta_n(&self, n: u64) -> Result<f64> {
        Ok(self.rate_quantities(n)?.delta_n)
    }
}
