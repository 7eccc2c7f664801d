use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Real single-slit (or single-packet) shape φ, normalized to ∫|φ|² = 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnvelopeSpec", into = "EnvelopeSpec")]
pub enum Envelope {
    /// `(2πσ²)^{-1/4} exp(-x²/4σ²)`; `sigma` is the standard deviation of |φ|².
    Gaussian { sigma: f64 },
    /// `sinc(πx/d)/√d`, the shape prepared by a momentum slit of width h/d.
    Sinc { d: f64 },
    Tabulated(Tabulated),
}

/// Piecewise-linear envelope through real samples on strictly increasing abscissae.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    xs: Vec<f64>,
    values: Vec<f64>,
}

/// Serialized form of [`Envelope`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EnvelopeSpec {
    Gaussian { sigma: f64 },
    Sinc { d: f64 },
    Tabulated { x: Vec<f64>, values: Vec<f64> },
}

impl TryFrom<EnvelopeSpec> for Envelope {
    type Error = Error;
    fn try_from(spec: EnvelopeSpec) -> Result<Self> {
        match spec {
            EnvelopeSpec::Gaussian { sigma } => Envelope::gaussian(sigma),
            EnvelopeSpec::Sinc { d } => Envelope::sinc(d),
            EnvelopeSpec::Tabulated { x, values } => Envelope::tabulated(x, values),
        }
    }
}

impl From<Envelope> for EnvelopeSpec {
    fn from(e: Envelope) -> Self {
        match e {
            Envelope::Gaussian { sigma } => EnvelopeSpec::Gaussian { sigma },
            Envelope::Sinc { d } => EnvelopeSpec::Sinc { d },
            Envelope::Tabulated(t) => EnvelopeSpec::Tabulated { x: t.xs, values: t.values },
        }
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if !v.is_finite() {
        return Err(Error::NonFinite("envelope width"));
    }
    if v <= 0.0 {
        return Err(Error::invalid(format!("{name} must be positive, got {v}")));
    }
    Ok(v)
}

impl Envelope {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        Ok(Envelope::Gaussian { sigma: positive("gaussian sigma", sigma)? })
    }

    pub fn sinc(d: f64) -> Result<Self> {
        Ok(Envelope::Sinc { d: positive("sinc width d", d)? })
    }

    /// Builds a tabulated envelope and rescales it to unit norm.
    pub fn tabulated(xs: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if xs.len() != values.len() || xs.len() < 2 {
            return Err(Error::invalid("tabulated envelope needs ≥ 2 matching samples"));
        }
        if xs.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tabulated envelope sample"));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("tabulated abscissae must be strictly increasing"));
        }
        // exact ∫ of the squared linear interpolant
        let norm2: f64 = xs
            .windows(2)
            .zip(values.windows(2))
            .map(|(x, v)| (x[1] - x[0]) / 3.0 * (v[0] * v[0] + v[0] * v[1] + v[1] * v[1]))
            .sum();
        if norm2 <= 0.0 {
            return Err(Error::invalid("tabulated envelope has zero norm"));
        }
        let s = norm2.sqrt();
        let values = values.into_iter().map(|v| v / s).collect();
        Ok(Envelope::Tabulated(Tabulated { xs, values }))
    }

    pub fn amplitude(&self, x: f64) -> f64 {
        match self {
            Envelope::Gaussian { sigma } => {
                (2.0 * PI * sigma * sigma).powf(-0.25) * (-x * x / (4.0 * sigma * sigma)).exp()
            }
            Envelope::Sinc { d } => {
                let y = PI * x / d;
                let s = if y.abs() < 1e-8 { 1.0 - y * y / 6.0 } else { y.sin() / y };
                s / d.sqrt()
            }
            Envelope::Tabulated(t) => t.eval(x),
        }
    }

    /// Momentum amplitude `(2π)^{-1/2} ∫ φ(x) e^{-iqx} dx`.
    pub fn momentum_amplitude(&self, q: f64) -> Complex64 {
        match self {
            Envelope::Gaussian { sigma } => {
                let s2 = sigma * sigma;
                Complex64::new((2.0 * s2 / PI).powf(0.25) * (-s2 * q * q).exp(), 0.0)
            }
            Envelope::Sinc { d } => {
                if q.abs() < PI / d {
                    Complex64::new((d / (2.0 * PI)).sqrt(), 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            Envelope::Tabulated(t) => t.fourier(q),
        }
    }

    /// Characteristic spatial width compared against slit spacing or wavelength.
    pub fn width(&self) -> f64 {
        match self {
            Envelope::Gaussian { sigma } => *sigma,
            Envelope::Sinc { d } => *d,
            Envelope::Tabulated(t) => t.rms_width(),
        }
    }

    /// Half-width around the center outside of which the probability mass is
    /// below `tail`. `None` when the decay is too slow for any sane grid.
    pub fn support_halfwidth(&self, tail: f64) -> Option<f64> {
        match self {
            Envelope::Gaussian { sigma } => {
                // two-sided Gaussian tail ≈ exp(-k²/2); solve loosely and pad
                let k = (-2.0 * tail.max(1e-300).ln()).sqrt().max(8.0);
                Some(k * sigma)
            }
            Envelope::Sinc { d } => {
                let h = d / (PI * PI * tail);
                (h < 1e6 * d).then_some(h)
            }
            Envelope::Tabulated(t) => {
                Some(t.xs[0].abs().max(t.xs[t.xs.len() - 1].abs()))
            }
        }
    }

    /// Momentum beyond which |φ̃|² carries negligible weight.
    pub fn bandwidth(&self) -> f64 {
        match self {
            Envelope::Gaussian { sigma } => 4.0 / sigma,
            Envelope::Sinc { d } => PI / d,
            Envelope::Tabulated(t) => {
                let min_dx = t.xs.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
                PI / min_dx
            }
        }
    }
}

impl Tabulated {
    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn eval(&self, x: f64) -> f64 {
        let xs = &self.xs;
        if x < xs[0] || x > xs[xs.len() - 1] {
            return 0.0;
        }
        let k = xs.partition_point(|&v| v <= x).clamp(1, xs.len() - 1);
        let (x0, x1) = (xs[k - 1], xs[k]);
        let t = (x - x0) / (x1 - x0);
        self.values[k - 1] * (1.0 - t) + self.values[k] * t
    }

    fn rms_width(&self) -> f64 {
        let (mut m1, mut m2) = (0.0, 0.0);
        for (x, v) in self.xs.windows(2).zip(self.values.windows(2)) {
            let h = x[1] - x[0];
            let mid = 0.5 * (x[0] + x[1]);
            let w = h / 3.0 * (v[0] * v[0] + v[0] * v[1] + v[1] * v[1]);
            m1 += w * mid;
            m2 += w * mid * mid;
        }
        (m2 - m1 * m1).max(0.0).sqrt()
    }

    /// Exact Fourier integral of the piecewise-linear interpolant.
    fn fourier(&self, q: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (x, v) in self.xs.windows(2).zip(self.values.windows(2)) {
            let h = x[1] - x[0];
            let (fa, fb) = (v[0], v[1]);
            let ea = Complex64::from_polar(1.0, -q * x[0]);
            if (q * h).abs() < 1e-4 {
                // second-order expansion around the segment midpoint
                let em = Complex64::from_polar(1.0, -q * 0.5 * (x[0] + x[1]));
                let mean = 0.5 * (fa + fb);
                let slope_term = Complex64::new(0.0, -q * h * h / 12.0 * (fb - fa));
                acc += em * (mean * h + slope_term);
                continue;
            }
            let eb = Complex64::from_polar(1.0, -q * x[1]);
            let miq = Complex64::new(0.0, -q);
            let i0 = (eb - ea) / miq;
            let i1 = eb * h / miq - (eb - ea) / (miq * miq);
            acc += i0 * fa + i1 * ((fb - fa) / h);
        }
        acc / (2.0 * PI).sqrt()
    }
}
