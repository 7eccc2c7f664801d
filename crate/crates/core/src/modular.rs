//! Closed-form modular-variable mathematics.
//!
//! Units are canonical throughout the crate: ħ = 1, so Planck's constant is
//! `h = 2π` and the momentum partition belonging to a position scale `ell`
//! is `2π / ell`.
//!
//! Modular parts live in the half-open interval `[-s/2, s/2)`, where `s` is
//! the partition of the selected axis. A value sitting exactly on the upper
//! boundary is therefore reported as `-s/2` with the integer part bumped by one.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planck's constant in canonical units (ħ = 1).
pub const PLANCK: f64 = 2.0 * PI;

/// Partition length of the integer/modular split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ModularScale(f64);

impl ModularScale {
    pub fn new(ell: f64) -> Result<Self> {
        if !ell.is_finite() {
            return Err(Error::NonFinite("modular scale"));
        }
        if ell <= 0.0 {
            return Err(Error::invalid(format!("modular scale must be positive, got {ell}")));
        }
        Ok(Self(ell))
    }

    /// Position partition `ell`.
    pub fn ell(self) -> f64 {
        self.0
    }

    /// Momentum partition `h / ell`.
    pub fn momentum_period(self) -> f64 {
        PLANCK / self.0
    }

    pub fn period(self, axis: Axis) -> f64 {
        match axis {
            Axis::Position => self.ell(),
            Axis::Momentum => self.momentum_period(),
        }
    }

    /// The same physical split after rescaling lengths by `factor`.
    pub fn rescaled(self, factor: f64) -> Result<Self> {
        Self::new(self.0 * factor)
    }
}

impl TryFrom<f64> for ModularScale {
    type Error = Error;
    fn try_from(ell: f64) -> Result<Self> {
        Self::new(ell)
    }
}

impl From<ModularScale> for f64 {
    fn from(s: ModularScale) -> f64 {
        s.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Position,
    Momentum,
}

/// Integer and modular parts of a position or momentum value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModularValue {
    pub integer_part: i64,
    pub modular_part: f64,
}

impl ModularValue {
    pub fn reconstruct(self, scale: ModularScale, axis: Axis) -> f64 {
        self.integer_part as f64 * scale.period(axis) + self.modular_part
    }
}

/// Split `value` into `integer_part * period + modular_part` with the modular
/// part in `[-period/2, period/2)`.
pub fn modular_decompose(value: f64, scale: ModularScale, axis: Axis) -> Result<ModularValue> {
    if !value.is_finite() {
        return Err(Error::NonFinite("value to decompose"));
    }
    let period = scale.period(axis);
    let q = ((value + 0.5 * period) / period).floor();
    if q.abs() > 2f64.powi(53) {
        return Err(Error::invalid(format!(
            "value {value} is too large relative to the period {period}"
        )));
    }
    let mut n = q as i64;
    let mut rem = value - n as f64 * period;
    // floor() on the rounded quotient can land one bin off near the edges.
    if rem >= 0.5 * period {
        n += 1;
        rem -= period;
    } else if rem < -0.5 * period {
        n -= 1;
        rem += period;
    }
    Ok(ModularValue { integer_part: n, modular_part: rem })
}

fn check_rank(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::invalid("superposition rank N must be at least 1"))
    } else {
        Ok(())
    }
}

/// N-slit fringe pattern `F_N(x) = 1 + (2/N) Σ_{j=1}^{N-1} (N-j) cos(2πjx)`.
pub fn fringe_function(n: usize, x: f64) -> Result<f64> {
    check_rank(n)?;
    if !x.is_finite() {
        return Err(Error::NonFinite("fringe argument"));
    }
    // Reduce the argument first; cos(2πjx) loses digits for large x otherwise.
    let x = x - x.round();
    let nf = n as f64;
    let sum: f64 = (1..n).rev().map(|j| (nf - j as f64) * (2.0 * PI * j as f64 * x).cos()).sum();
    Ok((1.0 + 2.0 * sum / nf).max(0.0))
}

/// Single-particle squeezing function S1(N).
pub fn squeezing_s1(n: usize) -> Result<f64> {
    check_rank(n)?;
    if n == 1 {
        return Ok(0.0);
    }
    let nf = n as f64;
    let sum: f64 = (1..n)
        .rev()
        .map(|j| {
            let jf = j as f64;
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * (nf - jf) / (nf * jf * jf)
        })
        .sum();
    Ok(-12.0 / (PI * PI) * sum)
}

/// Two-particle (relative coordinate) squeezing function S2(N).
pub fn squeezing_s2(n: usize) -> Result<f64> {
    check_rank(n)?;
    if n == 1 {
        return Ok(0.0);
    }
    let nf = n as f64;
    let sum: f64 = (1..n)
        .rev()
        .map(|j| {
            let jf = j as f64;
            (nf - jf) / (nf * jf * jf)
        })
        .sum();
    Ok(6.0 / (PI * PI) * sum)
}

/// Modular position variance of the squeezed modular position state (fringe phase zero).
pub fn smp_modular_position_variance(n: usize, scale: ModularScale) -> Result<f64> {
    let ell = scale.ell();
    Ok(ell * ell / 12.0 * (1.0 - squeezing_s1(n)?))
}

/// Variance of the modular relative position `x̄₁ − x̄₂` in the entangled state.
pub fn mpe_modular_relative_variance(n: usize, scale: ModularScale) -> Result<f64> {
    let ell = scale.ell();
    Ok(ell * ell / 6.0 * (1.0 - squeezing_s2(n)?))
}

/// Integer momentum variance `(N² − 1)/12` of the squeezed modular position state.
pub fn smp_integer_momentum_variance(n: usize) -> Result<f64> {
    check_rank(n)?;
    let nf = n as f64;
    Ok((nf * nf - 1.0) / 12.0)
}

/// `|⟨[x̄, N_p]⟩|` on the squeezed modular position state with fringe phase zero.
pub fn smp_commutator_expectation(n: usize, scale: ModularScale) -> Result<f64> {
    check_rank(n)?;
    // (1 + (-1)^{N+1}) / 2N is 1/N for odd N and 0 for even N.
    let correction = if n % 2 == 1 { 1.0 / n as f64 } else { 0.0 };
    Ok(scale.ell() / (2.0 * PI) * (1.0 - correction))
}
