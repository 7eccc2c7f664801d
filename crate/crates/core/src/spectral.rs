//! The constant c: smallest eigenvalue of `A = N_p² + x̄²/ℓ²`.
//!
//! Within one momentum fiber the eigenproblem reduces to a Weber equation on
//! `u = x̄/ℓ ∈ [−½, ½)`; its even solution is `e^{−πu²} M(¼ − πμ/2, ½, 2πu²)`
//! and periodicity forces a vanishing derivative at `u = ½`. The brute-force
//! oracle diagonalizes the same operator on a grid instead.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{fourier::fft_in_place, GridSpec, GridWave};
use crate::modular::{modular_decompose, Axis, ModularScale};

const KUMMER_TERM_CAP: usize = 4096;
const SPECTRUM_SCAN_MAX: f64 = 12.0;
const SPECTRUM_SCAN_STEP: f64 = 0.05;
const SPECTRUM_HEAD: usize = 5;
/// Tolerance of the cached constant returned by [`criterion_constant`].
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    KummerShoot,
    BruteForce,
    Perturbative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSolveReport {
    pub c: f64,
    /// Lowest eigenvalues the method resolves (even parity for the shooting solve).
    pub mu_spectrum_head: Vec<f64>,
    pub method: Method,
    pub residual: f64,
}

fn kummer_series(a: f64, b: f64, x: f64, cap: usize) -> Result<f64> {
    if b <= 0.0 && b.fract() == 0.0 {
        return Err(Error::invalid(format!("Kummer M undefined for b = {b}")));
    }
    if !(a.is_finite() && b.is_finite() && x.is_finite()) {
        return Err(Error::NonFinite("Kummer argument"));
    }
    let (mut term, mut sum) = (1.0, 1.0);
    for k in 0..cap {
        let kf = k as f64;
        term *= (a + kf) * x / ((b + kf) * (kf + 1.0));
        sum += term;
        // terms only shrink monotonically once k has passed |a| and x
        let settled = kf + 1.0 > a.abs() + x;
        if term == 0.0 || (settled && term.abs() <= 1e-17 * sum.abs()) {
            return Ok(sum);
        }
    }
    Err(Error::NoConvergence(cap))
}

/// Confluent hypergeometric function `M(a, b; x) = Σ (a)_k x^k / ((b)_k k!)`.
pub fn kummer_m(a: f64, b: f64, x: f64) -> Result<f64> {
    kummer_series(a, b, x, KUMMER_TERM_CAP)
}

/// `dψ/du` at `u = ½`, with ψ the even shooting solution for eigenvalue μ.
fn mismatch_dimensionless(mu: f64, cap: usize) -> Result<f64> {
    if !mu.is_finite() {
        return Err(Error::NonFinite("mu"));
    }
    let a = 0.25 - PI * mu / 2.0;
    let z = PI / 2.0;
    let m0 = kummer_series(a, 0.5, z, cap)?;
    // d/dz M(a, ½, z) = 2a M(a+1, 3/2, z); chain rule with z = 2πu² at u = ½
    let m1 = kummer_series(a + 1.0, 1.5, z, cap)?;
    Ok((-PI / 4.0).exp() * (-PI * m0 + 4.0 * PI * a * m1))
}

/// Derivative with respect to x̄ of the shooting solution at `x̄ = ℓ/2`.
pub fn boundary_mismatch(mu: f64, scale: ModularScale) -> Result<f64> {
    Ok(mismatch_dimensionless(mu, KUMMER_TERM_CAP)? / scale.ell())
}

fn bisect(mut lo: f64, mut hi: f64, tol: f64, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let mut flo = f(lo)?;
    let fhi = f(hi)?;
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::BracketFailure(format!("no sign change on [{lo}, {hi}]")));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Roots of the shooting function below [`SPECTRUM_SCAN_MAX`], ascending.
///
/// The even Kummer solution only reaches states symmetric under x̄ → −x̄, so
/// these are the even-parity eigenvalues; odd states interleave between them.
pub fn shooting_spectrum(tolerance: f64, count: usize) -> Result<Vec<f64>> {
    let f = |mu| mismatch_dimensionless(mu, KUMMER_TERM_CAP);
    let mut roots = Vec::new();
    let mut lo = 0.0;
    let mut flo = f(lo)?;
    while lo < SPECTRUM_SCAN_MAX && roots.len() < count {
        let hi = lo + SPECTRUM_SCAN_STEP;
        let fhi = f(hi)?;
        if flo.signum() != fhi.signum() || fhi == 0.0 {
            roots.push(bisect(lo, hi, tolerance, f)?);
        }
        lo = hi;
        flo = fhi;
    }
    Ok(roots)
}

/// Smallest root of the shooting function by bisection on a bracket seeded
/// around the perturbative value.
pub fn solve_c(tolerance: f64) -> Result<EigenSolveReport> {
    if !(tolerance >= 1e-12) {
        return Err(Error::invalid(format!("tolerance must be at least 1e-12, got {tolerance}")));
    }
    let seed = perturbative_c();
    let f = |mu| mismatch_dimensionless(mu, KUMMER_TERM_CAP);
    let c = bisect(seed - 0.02, seed + 0.02, tolerance, f)?;
    let mut head = shooting_spectrum(tolerance, SPECTRUM_HEAD)?;
    if head.first().is_none_or(|r| (r - c).abs() > 10.0 * tolerance.max(1e-12)) {
        return Err(Error::BracketFailure(format!(
            "bracketed root {c} is not the lowest shooting root {head:?}"
        )));
    }
    head[0] = c;
    Ok(EigenSolveReport { c, mu_spectrum_head: head, method: Method::KummerShoot, residual: f(c)?.abs() })
}

/// The constant at [`DEFAULT_TOLERANCE`], computed once per process.
pub fn criterion_constant() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| solve_c(DEFAULT_TOLERANCE).expect("shooting solve brackets its root").c)
}

/// Second-order perturbative estimate `(1/12)(1 − 1/15) = 7/90`.
pub fn perturbative_c() -> f64 {
    7.0 / 90.0
}

/// Matrix-free `A` on a periodic grid of unit modular scale.
struct GridOperator {
    position: Vec<f64>,
    momentum: Vec<f64>,
    preconditioner: Vec<f64>,
}

impl GridOperator {
    fn new(spec: &GridSpec, scale: ModularScale) -> Result<Self> {
        let m = spec.periods(scale)? as i64;
        let position = spec
            .xs()
            .map(|x| Ok(modular_decompose(x, scale, Axis::Position)?.modular_part.powi(2)))
            .collect::<Result<Vec<_>>>()?;
        let momentum: Vec<f64> = (0..spec.points())
            .map(|k| {
                let np = (2 * spec.momentum_index(k) + m).div_euclid(2 * m) as f64;
                np * np
            })
            .collect();
        let preconditioner = momentum.iter().map(|n2| 1.0 / (n2 + 1.0 / 12.0)).collect();
        Ok(Self { position, momentum, preconditioner })
    }

    fn momentum_multiply(v: &[Complex64], diag: &[f64]) -> Vec<Complex64> {
        let mut buf = v.to_vec();
        fft_in_place(&mut buf, true);
        let inv = 1.0 / v.len() as f64;
        buf.iter_mut().zip(diag).for_each(|(b, d)| *b *= d * inv);
        fft_in_place(&mut buf, false);
        buf
    }

    fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = Self::momentum_multiply(v, &self.momentum);
        out.iter_mut().zip(v).zip(&self.position).for_each(|((o, a), x2)| *o += a * x2);
        out
    }

    /// Preconditioned conjugate gradients for `A y = b`.
    fn solve(&self, b: &[Complex64], tol: f64, cap: usize) -> Result<Vec<Complex64>> {
        let dot = |a: &[Complex64], c: &[Complex64]| -> Complex64 {
            a.iter().zip(c).map(|(u, v)| u.conj() * v).sum()
        };
        let bnorm = dot(b, b).re.sqrt();
        let mut y = vec![Complex64::default(); b.len()];
        let mut r = b.to_vec();
        let mut z = Self::momentum_multiply(&r, &self.preconditioner);
        let mut p = z.clone();
        let mut rz = dot(&r, &z).re;
        for _ in 0..cap {
            let ap = self.apply(&p);
            let alpha = rz / dot(&p, &ap).re;
            y.iter_mut().zip(&p).for_each(|(yi, pi)| *yi += pi * alpha);
            r.iter_mut().zip(&ap).for_each(|(ri, ai)| *ri -= ai * alpha);
            if dot(&r, &r).re.sqrt() <= tol * bnorm {
                return Ok(y);
            }
            z = Self::momentum_multiply(&r, &self.preconditioner);
            let rz_new = dot(&r, &z).re;
            let beta = rz_new / rz;
            rz = rz_new;
            p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + *pi * beta);
        }
        Err(Error::NoConvergence(cap))
    }
}

const INVERSE_ITERATION_CAP: usize = 200;

/// Brute-force ground state of `A` on a grid of `periods` modular cells with
/// `points_per_period` nodes each (both powers of two), by inverse power
/// iteration with a Fourier-diagonal preconditioned CG inner solve.
pub fn brute_force_ground_state(periods: usize, points_per_period: usize) -> Result<(EigenSolveReport, GridWave)> {
    if periods < 8 || points_per_period < 32 {
        return Err(Error::invalid(format!(
            "brute force needs at least 8 periods and 32 points per period, got {periods} × {points_per_period}"
        )));
    }
    let points = periods
        .checked_mul(points_per_period)
        .filter(|p| p.is_power_of_two())
        .ok_or_else(|| Error::invalid("periods × points per period must be a power of two"))?;
    let scale = ModularScale::new(1.0)?;
    let dx = 1.0 / points_per_period as f64;
    let min = -((periods / 2) as f64) + 0.5 * dx;
    let spec = GridSpec::new(points, min, min + periods as f64)?;
    let op = GridOperator::new(&spec, scale)?;

    let mut v: Vec<Complex64> = vec![Complex64::new(1.0, 0.0); points];
    let normalize = |v: &mut Vec<Complex64>| {
        let n = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= n);
    };
    normalize(&mut v);
    let mut mu = f64::INFINITY;
    for _ in 0..INVERSE_ITERATION_CAP {
        let mut w = op.solve(&v, 1e-13, 1000)?;
        normalize(&mut w);
        let aw = op.apply(&w);
        let rayleigh: f64 = w.iter().zip(&aw).map(|(a, b)| (a.conj() * b).re).sum();
        let residual = aw
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - b * rayleigh).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let settled = (rayleigh - mu).abs() <= 1e-15 && residual <= 1e-10;
        mu = rayleigh;
        v = w;
        if settled {
            let scale_amp = 1.0 / dx.sqrt();
            let wave = GridWave::new(spec, v.iter().map(|a| a * scale_amp).collect())?;
            let report = EigenSolveReport {
                c: mu,
                // the ground level is degenerate across all momentum fibers, so
                // deflation would return the same value; report it once
                mu_spectrum_head: vec![mu],
                method: Method::BruteForce,
                residual,
            };
            return Ok((report, wave));
        }
    }
    Err(Error::NoConvergence(INVERSE_ITERATION_CAP))
}

pub fn brute_force_c(periods: usize, points_per_period: usize) -> Result<EigenSolveReport> {
    Ok(brute_force_ground_state(periods, points_per_period)?.0)
}
