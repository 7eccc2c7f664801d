//! Free propagation, the far-field momentum map, and a kinematic model of
//! visibility loss when the components of an MPE state are emitted at
//! staggered times.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::fourier::{apply_momentum_phase, fft_in_place};
use crate::grid::{GridDense, GridPair, GridSpec, GridState, GridWave, PairTerm};
use crate::states::{Envelope, EnvelopeSpec};

/// Momentum tail mass ignored when locating the fastest phase.
const MOMENTUM_TAIL: f64 = 1e-12;
/// Fraction of the box at either edge that must stay (almost) empty.
const EDGE_FRACTION: f64 = 1.0 / 64.0;
const EDGE_MASS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationParams {
    pub mass: f64,
    pub time: f64,
}

impl PropagationParams {
    pub fn new(mass: f64, time: f64) -> Result<Self> {
        if !(mass.is_finite() && time.is_finite()) {
            return Err(Error::NonFinite("propagation parameter"));
        }
        if mass <= 0.0 {
            return Err(Error::invalid(format!("mass must be positive, got {mass}")));
        }
        if time < 0.0 {
            return Err(Error::invalid(format!("time must be non-negative, got {time}")));
        }
        Ok(Self { mass, time })
    }
}

fn kinetic_phase(spec: &GridSpec, params: PropagationParams) -> Vec<Complex64> {
    (0..spec.points())
        .map(|k| {
            let p = spec.momentum(k);
            Complex64::from_polar(1.0, -p * p * params.time / (2.0 * params.mass))
        })
        .collect()
}

/// Smallest |p| outside which the momentum distribution carries less than
/// [`MOMENTUM_TAIL`] of the mass.
fn momentum_reach(spec: &GridSpec, amps: &[Complex64]) -> f64 {
    let mut buf = amps.to_vec();
    fft_in_place(&mut buf, true);
    let mut by_p: Vec<(f64, f64)> =
        buf.iter().enumerate().map(|(k, a)| (spec.momentum(k).abs(), a.norm_sqr())).collect();
    let total: f64 = by_p.iter().map(|(_, w)| w).sum();
    by_p.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut tail = 0.0;
    for (p, w) in by_p {
        tail += w;
        if tail > MOMENTUM_TAIL * total {
            return p;
        }
    }
    0.0
}

fn check_resolution(spec: &GridSpec, amps: &[Complex64]) -> Result<()> {
    let p_max = momentum_reach(spec, amps);
    let limit = 2.0 * PI / (4.0 * p_max);
    if p_max > 0.0 && spec.dx() >= limit {
        return Err(Error::Aliasing(format!(
            "spacing {} does not resolve momenta up to {p_max} (needs < {limit})",
            spec.dx()
        )));
    }
    Ok(())
}

fn check_edges(spec: &GridSpec, amps: &[Complex64]) -> Result<()> {
    let n = spec.points();
    let band = ((n as f64 * EDGE_FRACTION) as usize).max(1);
    let total: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    let edge: f64 = amps[..band].iter().chain(&amps[n - band..]).map(|a| a.norm_sqr()).sum();
    if edge > EDGE_MASS * total {
        return Err(Error::Aliasing(format!(
            "{:.2e} of the probability reached the box edges; enlarge the domain",
            edge / total
        )));
    }
    Ok(())
}

fn propagate_vector(spec: &GridSpec, amps: &[Complex64], params: PropagationParams) -> Result<Vec<Complex64>> {
    check_resolution(spec, amps)?;
    if params.time == 0.0 {
        return Ok(amps.to_vec());
    }
    let out = apply_momentum_phase(amps, &kinetic_phase(spec, params));
    check_edges(spec, &out)?;
    Ok(out)
}

/// Exact free evolution `ψ̃(p) → e^{−ip²t/2m} ψ̃(p)` of any grid state.
pub fn free_propagate(state: &GridState, params: PropagationParams) -> Result<GridState> {
    match state {
        GridState::Single(w) => Ok(GridState::Single(
            w.with_amplitudes(propagate_vector(w.spec(), w.amplitudes(), params)?),
        )),
        GridState::Pair(p) => {
            let [s1, s2] = *p.specs();
            let terms = p
                .terms()
                .iter()
                .map(|t| {
                    Ok(PairTerm {
                        coeff: t.coeff,
                        first: propagate_vector(&s1, &t.first, params)?,
                        second: propagate_vector(&s2, &t.second, params)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(GridState::Pair(GridPair::new(*p.specs(), terms)?))
        }
        GridState::Dense(d) => {
            let [s1, s2] = *d.specs();
            let (n1, n2) = (s1.points(), s2.points());
            let mut amps = d.amplitudes().to_vec();
            for row in amps.chunks_mut(n2) {
                let out = propagate_vector(&s2, row, params)?;
                row.copy_from_slice(&out);
            }
            let mut col = vec![Complex64::default(); n1];
            for j in 0..n2 {
                for i in 0..n1 {
                    col[i] = amps[i * n2 + j];
                }
                for (i, v) in propagate_vector(&s1, &col, params)?.into_iter().enumerate() {
                    amps[i * n2 + j] = v;
                }
            }
            Ok(GridState::Dense(GridDense::new(*d.specs(), amps)?))
        }
    }
}

/// Propagates a wave in `steps` equal slices, reporting `(done, steps)` after
/// each slice.
pub fn propagate_in_steps(
    wave: &GridWave,
    params: PropagationParams,
    steps: usize,
    mut progress: impl FnMut(usize, usize),
) -> Result<GridWave> {
    if steps == 0 {
        return Err(Error::invalid("step count must be positive"));
    }
    let slice = PropagationParams::new(params.mass, params.time / steps as f64)?;
    let phase = kinetic_phase(wave.spec(), slice);
    check_resolution(wave.spec(), wave.amplitudes())?;
    let mut amps = wave.amplitudes().to_vec();
    for k in 0..steps {
        amps = apply_momentum_phase(&amps, &phase);
        progress(k + 1, steps);
    }
    check_edges(wave.spec(), &amps)?;
    Ok(wave.with_amplitudes(amps))
}

/// `p = m(x − ⟨x⟩)/t`.
pub fn far_field_map(x: f64, mean_x: f64, params: PropagationParams) -> Result<f64> {
    if params.time <= 0.0 {
        return Err(Error::invalid("far-field map needs t > 0"));
    }
    Ok(params.mass * (x - mean_x) / params.time)
}

/// Propagates `wave` and pushes its position density through the far-field
/// map, returning `(p, density in p)` at every node.
pub fn far_field_momentum_density(wave: &GridWave, params: PropagationParams) -> Result<Vec<(f64, f64)>> {
    let mean = wave.mean_position();
    let GridState::Single(out) = free_propagate(&GridState::Single(wave.clone()), params)? else {
        unreachable!("single states propagate to single states")
    };
    let n2 = out.norm2();
    let jacobian = params.time / params.mass;
    out.spec()
        .xs()
        .zip(out.position_density())
        .map(|(x, d)| Ok((far_field_map(x, mean, params)?, d / n2 * jacobian)))
        .collect()
}

/// Staggered-emission model of the MPE-generating protocol. Component `n`
/// is emitted at `emission_times[n]` and disperses freely until the common
/// meeting time; all components share centers and envelope shape at emission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSpec {
    #[serde(rename = "N")]
    pub n: usize,
    pub emission_times: Vec<f64>,
    pub lambda: f64,
    pub envelope: EnvelopeSpec,
    pub mass: f64,
}

impl ProtocolSpec {
    /// Emission at `0, stagger, 2·stagger, …`.
    pub fn uniform(n: usize, stagger: f64, lambda: f64, envelope: Envelope, mass: f64) -> Self {
        Self {
            n,
            emission_times: (0..n).map(|k| k as f64 * stagger).collect(),
            lambda,
            envelope: envelope.into(),
            mass,
        }
    }

    fn validate(&self, meeting_time: f64) -> Result<Envelope> {
        if self.n == 0 || self.emission_times.len() != self.n {
            return Err(Error::invalid("need N ≥ 1 emission times, one per component"));
        }
        if self.emission_times.iter().any(|t| !t.is_finite()) || !meeting_time.is_finite() {
            return Err(Error::NonFinite("emission time"));
        }
        if self.emission_times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("emission times overlap: they must be non-decreasing"));
        }
        if meeting_time < self.emission_times[self.n - 1] {
            return Err(Error::invalid("meeting time precedes the last emission"));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::invalid("lambda must be positive"));
        }
        PropagationParams::new(self.mass, 0.0)?;
        self.envelope.clone().try_into()
    }
}

const POINTS_PER_LAMBDA: usize = 32;
const MAX_PROTOCOL_POINTS: usize = 1 << 22;

/// Relative-coordinate fringe visibility at `meeting_time`.
///
/// The relative density is `Σ_nm e^{i(p_n−p_m)r} C_nm(r)/N` with `C_nm` the
/// correlation of `φ_n φ_m*` with itself; dividing by the incoherent part
/// and projecting onto the first N−1 harmonics over whole periods around the
/// envelope peak gives a least-squares fit of `a·F_N((r−φ)/λ) + b`.
pub fn protocol_visibility(spec: &ProtocolSpec, meeting_time: f64) -> Result<f64> {
    let envelope = spec.validate(meeting_time)?;
    let n = spec.n;
    if n == 1 {
        return Ok(0.0);
    }
    let taus: Vec<f64> = spec.emission_times.iter().map(|t| meeting_time - t).collect();
    let sigma = envelope.width();
    let spread = |tau: f64| sigma * (1.0 + (tau / (2.0 * spec.mass * sigma * sigma)).powi(2)).sqrt();
    let widest = taus.iter().map(|&t| spread(t)).fold(0.0, f64::max);
    let reach = envelope.support_halfwidth(1e-12).unwrap_or(12.0 * sigma).max(12.0 * widest);
    // correlations need twice the reach; pad again against circular wrap
    let dx = spec.lambda / POINTS_PER_LAMBDA as f64;
    let points = ((4.0 * reach / dx).ceil() as usize).next_power_of_two().max(1 << 10);
    if points > MAX_PROTOCOL_POINTS {
        return Err(Error::GridTooSmall(format!(
            "protocol grid would need {points} points; reduce the dispersion or the width/lambda ratio"
        )));
    }
    let half = points / 2;
    let grid = GridSpec::new(points, -(half as f64) * dx, half as f64 * dx)?;
    let base = GridWave::sample(grid, |x| Complex64::new(envelope.amplitude(x), 0.0));
    let shapes = taus
        .iter()
        .map(|&tau| {
            let params = PropagationParams::new(spec.mass, tau)?;
            match free_propagate(&GridState::Single(base.clone()), params)? {
                GridState::Single(w) => Ok(w.amplitudes().to_vec()),
                _ => unreachable!("single states propagate to single states"),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    // C_nm(r) = ∫ g(s + r) g(s) ds with g = φ_n φ_m*, index 0 ↔ r = 0
    let correlation = |g: &[Complex64]| -> Vec<Complex64> {
        let mut fg = g.to_vec();
        fft_in_place(&mut fg, true);
        let mut prod: Vec<Complex64> = (0..points).map(|k| fg[k] * fg[(points - k) % points]).collect();
        fft_in_place(&mut prod, false);
        prod.iter().map(|v| v * (dx / points as f64)).collect()
    };

    let periods = ((sigma / spec.lambda).floor() as usize).clamp(1, 64);
    let window = periods * POINTS_PER_LAMBDA;
    let offset = |i: usize| -> usize { (i + points - window / 2) % points };
    let r_of = |i: usize| -> f64 { i as f64 * dx - (window / 2) as f64 * dx };
    let mut coherent = vec![Complex64::default(); window];
    let mut incoherent = vec![0.0; window];
    for a in 0..n {
        for b in 0..n {
            let g: Vec<Complex64> = shapes[a].iter().zip(&shapes[b]).map(|(u, v)| u * v.conj()).collect();
            let c = correlation(&g);
            let dp = (a as f64 - b as f64) * 2.0 * PI / spec.lambda;
            for i in 0..window {
                let v = c[offset(i)];
                coherent[i] += v * Complex64::from_polar(1.0, dp * r_of(i));
                if a == b {
                    incoherent[i] += v.re;
                }
            }
        }
    }
    let fringe: Vec<f64> = coherent.iter().zip(&incoherent).map(|(c, d)| c.re / d).collect();
    let harmonic = |j: usize| -> Complex64 {
        fringe
            .iter()
            .enumerate()
            .map(|(i, f)| f * Complex64::from_polar(1.0, -2.0 * PI * j as f64 * r_of(i) / spec.lambda))
            .sum::<Complex64>()
            / window as f64
    };
    let a0 = harmonic(0).re;
    let a1 = harmonic(1);
    let shift = -a1.arg() * spec.lambda / (2.0 * PI);
    let (mut num, mut den) = (0.0, 0.0);
    for j in 1..n {
        let w = (n - j) as f64 / n as f64;
        let aj = harmonic(j) * Complex64::from_polar(1.0, 2.0 * PI * j as f64 * shift / spec.lambda);
        num += w * aj.re;
        den += w * w;
    }
    let amp = (num / den).max(0.0);
    let offset_level = (a0 - amp).max(0.0);
    let nf = n as f64;
    if amp == 0.0 {
        return Ok(0.0);
    }
    Ok((amp * nf / (amp * nf + 2.0 * offset_level)).clamp(0.0, 1.0))
}
