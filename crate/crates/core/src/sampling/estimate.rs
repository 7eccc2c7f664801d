use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rng::CounterRng;
use super::{MeasurementKind, SampleSet};
use crate::error::{Error, Result};
use crate::modular::{modular_decompose, Axis, ModularScale};
use crate::spectral::criterion_constant;

pub const BOOTSTRAP_RESAMPLES: usize = 1000;
const MIN_BOOTSTRAP_SAMPLES: usize = 100;
const BOOTSTRAP_TAG: u64 = 0x626f_6f74;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Violated,
    NotViolated,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub var_mod_rel_hat: f64,
    #[serde(rename = "var_N_tot_hat")]
    pub var_n_tot_hat: f64,
    pub lhs_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub ci_halfwidth: f64,
    pub n_position: usize,
    pub n_momentum: usize,
    pub bound: f64,
    pub verdict: Verdict,
    /// Set if any variance estimate had to be clamped at zero.
    pub clamped: bool,
    pub resamples: usize,
}

fn relative_modular_positions(set: &SampleSet, scale: ModularScale) -> Result<Vec<f64>> {
    set.records
        .iter()
        .map(|&(a, b)| {
            Ok(modular_decompose(a, scale, Axis::Position)?.modular_part
                - modular_decompose(b, scale, Axis::Position)?.modular_part)
        })
        .collect()
}

fn total_integer_momenta(set: &SampleSet, scale: ModularScale) -> Result<Vec<f64>> {
    set.records
        .iter()
        .map(|&(a, b)| {
            Ok((modular_decompose(a, scale, Axis::Momentum)?.integer_part
                + modular_decompose(b, scale, Axis::Momentum)?.integer_part) as f64)
        })
        .collect()
}

/// Two-pass plug-in variance (divides by n); returns `(variance, clamped)`.
fn plug_in_variance(values: &[f64]) -> (f64, bool) {
    if values.iter().all(|&v| v == values[0]) {
        return (0.0, false);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let v = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    if v < 0.0 {
        (0.0, true)
    } else {
        (v, false)
    }
}

fn checked_inputs(position: &SampleSet, momentum: &SampleSet, scale: ModularScale) -> Result<(Vec<f64>, Vec<f64>)> {
    if position.kind != MeasurementKind::Position || momentum.kind != MeasurementKind::Momentum {
        return Err(Error::invalid("need one position and one momentum sample set"));
    }
    if position.is_empty() || momentum.is_empty() {
        return Err(Error::invalid("sample sets must not be empty"));
    }
    Ok((relative_modular_positions(position, scale)?, total_integer_momenta(momentum, scale)?))
}

/// Plug-in `(var_mod_rel, var_N_tot, lhs)` without a confidence interval.
pub fn plug_in_estimate(position: &SampleSet, momentum: &SampleSet, scale: ModularScale) -> Result<(f64, f64, f64)> {
    let (rel, tot) = checked_inputs(position, momentum, scale)?;
    let (vm, _) = plug_in_variance(&rel);
    let (vn, _) = plug_in_variance(&tot);
    Ok((vm, vn, vn + vm / scale.ell().powi(2)))
}

/// Variance of a bootstrap resample drawn with the given stream offset.
fn resample_variance(values: &[f64], rng: &CounterRng, offset: u64) -> f64 {
    let n = values.len();
    let (mut s1, mut s2) = (0.0, 0.0);
    for i in 0..n as u64 {
        let x = values[rng.below_at(offset + i, n as u64) as usize];
        s1 += x;
        s2 += x * x;
    }
    let mean = s1 / n as f64;
    (s2 / n as f64 - mean * mean).max(0.0)
}

fn bootstrap_variances(values: &[f64], rng: CounterRng) -> Vec<f64> {
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        return vec![0.0; BOOTSTRAP_RESAMPLES];
    }
    // centering first keeps the one-pass resample variance accurate
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let stride = values.len() as u64;
    (0..BOOTSTRAP_RESAMPLES)
        .into_par_iter()
        .map(|b| resample_variance(&centered, &rng, b as u64 * stride))
        .collect()
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, f) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - f) + sorted[i + 1] * f
    } else {
        sorted[i]
    }
}

/// Plug-in criterion estimate with a 95% percentile bootstrap interval.
/// Position and momentum records are resampled independently, with the
/// bootstrap stream derived from the position set's seed.
pub fn estimate_criterion(position: &SampleSet, momentum: &SampleSet, scale: ModularScale) -> Result<EstimateReport> {
    let n_min = position.len().min(momentum.len());
    if n_min < MIN_BOOTSTRAP_SAMPLES {
        return Err(Error::invalid(format!(
            "bootstrap needs at least {MIN_BOOTSTRAP_SAMPLES} records per kind, got {n_min}"
        )));
    }
    let (rel, tot) = checked_inputs(position, momentum, scale)?;
    let (vm, cm) = plug_in_variance(&rel);
    let (vn, cn) = plug_in_variance(&tot);
    let ell2 = scale.ell().powi(2);
    let lhs = vn + vm / ell2;

    let rng = CounterRng::new(position.seed).derive(BOOTSTRAP_TAG);
    let boot_m = bootstrap_variances(&rel, rng.derive(1));
    let boot_n = bootstrap_variances(&tot, rng.derive(2));
    let mut boot: Vec<f64> = boot_m.iter().zip(&boot_n).map(|(m, n)| n + m / ell2).collect();
    boot.sort_by(f64::total_cmp);
    let (lo, hi) = (percentile(&boot, 0.025), percentile(&boot, 0.975));
    let bound = 2.0 * criterion_constant();
    let verdict = if hi < bound {
        Verdict::Violated
    } else if lo > bound {
        Verdict::NotViolated
    } else {
        Verdict::Inconclusive
    };
    Ok(EstimateReport {
        var_mod_rel_hat: vm,
        var_n_tot_hat: vn,
        lhs_hat: lhs,
        ci_low: lo,
        ci_high: hi,
        ci_halfwidth: 0.5 * (hi - lo),
        n_position: position.len(),
        n_momentum: momentum.len(),
        bound,
        verdict,
        clamped: cm || cn,
        resamples: BOOTSTRAP_RESAMPLES,
    })
}
