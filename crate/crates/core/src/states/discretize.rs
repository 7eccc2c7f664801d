use num_complex::Complex64;

use super::{Envelope, MixtureState, SuperposedState, TwoParticleState, WavePacket};
use crate::error::{Error, Result};
use crate::grid::{GridMixture, GridPair, GridSpec, GridState, GridWave, PairTerm};
use crate::modular::ModularScale;

/// Points per particle axis used when the caller does not choose.
pub const DEFAULT_GRID_POINTS: usize = 1 << 12;
/// Default domain half-width around the packet centers, in envelope widths.
pub const DEFAULT_HALFWIDTH_SIGMAS: f64 = 8.0;
/// Largest probability mass allowed outside the grid domain.
const TAIL_MASS: f64 = 1e-8;

fn envelope_reach(env: &Envelope, sigmas: f64) -> f64 {
    match env {
        Envelope::Gaussian { sigma } => sigmas * sigma,
        Envelope::Tabulated(_) => env.support_halfwidth(TAIL_MASS).unwrap_or(0.0),
        Envelope::Sinc { .. } => {
            env.support_halfwidth(TAIL_MASS).unwrap_or(sigmas * env.width())
        }
    }
}

fn spec_for<'a>(
    packets: impl Iterator<Item = &'a WavePacket>,
    points: usize,
    sigmas: f64,
    scale: Option<ModularScale>,
) -> Result<GridSpec> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in packets {
        let reach = envelope_reach(&p.envelope, sigmas);
        lo = lo.min(p.x0 - reach);
        hi = hi.max(p.x0 + reach);
    }
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::invalid("state has no packets"));
    }
    let (center, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    match scale {
        Some(s) => GridSpec::commensurate(center, half, s, points),
        None => GridSpec::new(points, center - half, center + half),
    }
}

/// Grid covering a single-particle state; commensurate with `scale` if given.
pub fn single_grid_spec(
    state: &SuperposedState,
    points: usize,
    halfwidth_sigmas: f64,
    scale: Option<ModularScale>,
) -> Result<GridSpec> {
    spec_for(state.terms().iter().map(|(_, p)| p), points, halfwidth_sigmas, scale)
}

/// One grid per particle covering every component of the mixture.
pub fn pair_grid_specs(
    state: &MixtureState,
    points: usize,
    halfwidth_sigmas: f64,
    scale: Option<ModularScale>,
) -> Result<[GridSpec; 2]> {
    let terms = || state.components().iter().flat_map(|(_, s)| s.terms().iter());
    Ok([
        spec_for(terms().map(|t| &t.1), points, halfwidth_sigmas, scale)?,
        spec_for(terms().map(|t| &t.2), points, halfwidth_sigmas, scale)?,
    ])
}

fn check_resolution<'a>(packets: impl Iterator<Item = &'a WavePacket>, spec: &GridSpec) -> Result<()> {
    let nyquist = std::f64::consts::PI / spec.dx();
    for p in packets {
        let k = p.p0.abs() + p.envelope.bandwidth();
        if k >= nyquist {
            return Err(Error::GridTooCoarse(format!(
                "momentum content up to {k:.4} exceeds the grid Nyquist limit {nyquist:.4}"
            )));
        }
    }
    Ok(())
}

fn check_spacing(spec: &GridSpec, scale: Option<ModularScale>) -> Result<()> {
    if let Some(s) = scale {
        if spec.dx() > s.ell() / 8.0 * (1.0 + 1e-12) {
            return Err(Error::GridTooCoarse(format!(
                "spacing {} is coarser than lambda/8 = {}",
                spec.dx(),
                s.ell() / 8.0
            )));
        }
    }
    Ok(())
}

fn check_tail(norm2: f64) -> Result<()> {
    if (1.0 - norm2).abs() > TAIL_MASS {
        return Err(Error::GridTooSmall(format!(
            "grid captures probability {norm2:.12}; more than {TAIL_MASS:e} lies outside"
        )));
    }
    Ok(())
}

fn sample(packet: &WavePacket, spec: &GridSpec) -> Vec<Complex64> {
    spec.xs().map(|x| packet.amplitude(x)).collect()
}

/// Samples a single-particle state on `spec` and normalizes it.
pub fn discretize_single(
    state: &SuperposedState,
    spec: GridSpec,
    scale: Option<ModularScale>,
) -> Result<GridWave> {
    check_spacing(&spec, scale)?;
    check_resolution(state.terms().iter().map(|(_, p)| p), &spec)?;
    let mut amps = vec![Complex64::new(0.0, 0.0); spec.points()];
    for (a, p) in state.terms() {
        for (o, v) in amps.iter_mut().zip(sample(p, &spec)) {
            *o += a * v;
        }
    }
    let wave = GridWave::new(spec, amps)?;
    check_tail(wave.norm2())?;
    wave.normalized()
}

/// Samples a pure two-particle state as product terms on one grid per particle.
pub fn discretize_pair(
    state: &TwoParticleState,
    specs: [GridSpec; 2],
    scale: Option<ModularScale>,
) -> Result<GridPair> {
    for (k, spec) in specs.iter().enumerate() {
        check_spacing(spec, scale)?;
        check_resolution(state.terms().iter().map(|t| if k == 0 { &t.1 } else { &t.2 }), spec)?;
    }
    let terms = state
        .terms()
        .iter()
        .map(|(a, p, q)| PairTerm { coeff: *a, first: sample(p, &specs[0]), second: sample(q, &specs[1]) })
        .collect();
    let pair = GridPair::new(specs, terms)?;
    check_tail(pair.norm2())?;
    pair.normalized()
}

pub fn discretize_mixture(
    state: &MixtureState,
    specs: [GridSpec; 2],
    scale: Option<ModularScale>,
) -> Result<GridMixture> {
    let components = state
        .components()
        .iter()
        .map(|(w, s)| Ok((*w, GridState::Pair(discretize_pair(s, specs, scale)?))))
        .collect::<Result<Vec<_>>>()?;
    GridMixture::new(components)
}
