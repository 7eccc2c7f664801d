use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::GridSpec;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if forward {
            p.plan_fft_forward(len)
        } else {
            p.plan_fft_inverse(len)
        }
    })
}

/// Raw in-place DFT without normalization.
pub(crate) fn fft_in_place(buf: &mut [Complex64], forward: bool) {
    plan(buf.len(), forward).process(buf);
}

/// Momentum amplitudes `ψ̃(p_j)` in FFT index order, normalized so that
/// `Σ |ψ̃|² dp = Σ |ψ|² dx`.
pub fn to_momentum(spec: &GridSpec, amps: &[Complex64]) -> Vec<Complex64> {
    let mut buf = amps.to_vec();
    fft_in_place(&mut buf, true);
    let scale = spec.dx() / (2.0 * PI).sqrt();
    let min = spec.min();
    for (k, v) in buf.iter_mut().enumerate() {
        *v *= Complex64::from_polar(scale, -spec.momentum(k) * min);
    }
    buf
}

/// Inverse of [`to_momentum`].
pub fn to_position(spec: &GridSpec, momentum: &[Complex64]) -> Vec<Complex64> {
    let scale = (2.0 * PI).sqrt() / (spec.points() as f64 * spec.dx());
    let min = spec.min();
    let mut buf: Vec<Complex64> = momentum
        .iter()
        .enumerate()
        .map(|(k, v)| v * Complex64::from_polar(scale, spec.momentum(k) * min))
        .collect();
    fft_in_place(&mut buf, false);
    buf
}

/// Applies a momentum-diagonal multiplier to a position-space vector.
pub(crate) fn apply_momentum_diagonal(amps: &[Complex64], diag: &[f64]) -> Vec<Complex64> {
    let n = amps.len();
    let mut buf = amps.to_vec();
    fft_in_place(&mut buf, true);
    let inv = 1.0 / n as f64;
    for (v, d) in buf.iter_mut().zip(diag) {
        *v *= d * inv;
    }
    fft_in_place(&mut buf, false);
    buf
}

/// Applies a complex momentum-space phase (free evolution and similar).
pub(crate) fn apply_momentum_phase(amps: &[Complex64], phase: &[Complex64]) -> Vec<Complex64> {
    let n = amps.len();
    let mut buf = amps.to_vec();
    fft_in_place(&mut buf, true);
    let inv = 1.0 / n as f64;
    for (v, d) in buf.iter_mut().zip(phase) {
        *v *= d * inv;
    }
    fft_in_place(&mut buf, false);
    buf
}
