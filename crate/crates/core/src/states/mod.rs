//! Analytic single- and two-particle states built from displaced, boosted
//! copies of one envelope: multislit states, squeezed modular position (SMP)
//! states, modular position entangled (MPE) states and their classically
//! correlated counterparts.

mod descriptor;
mod discretize;
mod envelope;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modular::{modular_decompose, Axis, ModularScale, PLANCK};

pub use descriptor::{BuiltState, StateDescriptor, StateKind};
pub use discretize::{
    discretize_mixture, discretize_pair, discretize_single, pair_grid_specs, single_grid_spec,
    DEFAULT_GRID_POINTS, DEFAULT_HALFWIDTH_SIGMAS,
};
pub use envelope::{Envelope, EnvelopeSpec, Tabulated};

/// `⟨x|ψ⟩ = φ(x − x0) exp[i p0 (x − phase_ref)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavePacket {
    pub envelope: Envelope,
    pub x0: f64,
    pub p0: f64,
    pub phase_ref: f64,
}

impl WavePacket {
    pub fn new(envelope: Envelope, x0: f64, p0: f64, phase_ref: f64) -> Result<Self> {
        if !(x0.is_finite() && p0.is_finite() && phase_ref.is_finite()) {
            return Err(Error::NonFinite("wave packet parameter"));
        }
        Ok(Self { envelope, x0, p0, phase_ref })
    }

    pub fn amplitude(&self, x: f64) -> Complex64 {
        Complex64::from_polar(self.envelope.amplitude(x - self.x0), self.p0 * (x - self.phase_ref))
    }

    pub fn momentum_amplitude(&self, p: f64) -> Complex64 {
        let phase = -self.p0 * self.phase_ref - (p - self.p0) * self.x0;
        Complex64::from_polar(1.0, phase) * self.envelope.momentum_amplitude(p - self.p0)
    }
}

/// `⟨a|b⟩` for two packets.
pub fn overlap(a: &WavePacket, b: &WavePacket) -> Complex64 {
    match (&a.envelope, &b.envelope) {
        (Envelope::Gaussian { sigma: sa }, Envelope::Gaussian { sigma: sb }) => {
            let (wa, wb) = (0.25 / (sa * sa), 0.25 / (sb * sb));
            let alpha = wa + wb;
            let xc = (a.x0 * wa + b.x0 * wb) / alpha;
            let dx = a.x0 - b.x0;
            let decay = dx * dx / (4.0 * (sa * sa + sb * sb));
            let q = b.p0 - a.p0;
            let pref = (2.0 * PI * sa * sa).powf(-0.25)
                * (2.0 * PI * sb * sb).powf(-0.25)
                * (PI / alpha).sqrt();
            let mag = pref * (-decay - q * q / (4.0 * alpha)).exp();
            let phase = q * xc + a.p0 * a.phase_ref - b.p0 * b.phase_ref;
            Complex64::from_polar(mag, phase)
        }
        (Envelope::Sinc { d: da }, Envelope::Sinc { d: db }) => {
            let lo = (a.p0 - PI / da).max(b.p0 - PI / db);
            let hi = (a.p0 + PI / da).min(b.p0 + PI / db);
            if lo >= hi {
                return Complex64::new(0.0, 0.0);
            }
            let amp = (da * db).sqrt() / (2.0 * PI);
            let phase = a.p0 * a.phase_ref - a.p0 * a.x0 - b.p0 * b.phase_ref + b.p0 * b.x0;
            let delta = a.x0 - b.x0;
            let integral = if (delta * (hi - lo)).abs() < 1e-12 {
                Complex64::new(hi - lo, 0.0)
            } else {
                (Complex64::from_polar(1.0, hi * delta) - Complex64::from_polar(1.0, lo * delta))
                    / Complex64::new(0.0, delta)
            };
            Complex64::from_polar(amp, phase) * integral
        }
        (Envelope::Tabulated(_), _) | (_, Envelope::Tabulated(_)) => position_overlap(a, b),
        _ => momentum_overlap(a, b),
    }
}

fn simpson(lo: f64, hi: f64, min_steps: usize, f: impl Fn(f64) -> Complex64) -> Complex64 {
    let n = (min_steps.max(2) + 1) & !1;
    let h = (hi - lo) / n as f64;
    let mut acc = f(lo) + f(hi);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += f(lo + k as f64 * h) * w;
    }
    acc * (h / 3.0)
}

fn position_overlap(a: &WavePacket, b: &WavePacket) -> Complex64 {
    let support = |p: &WavePacket| match &p.envelope {
        Envelope::Tabulated(t) => Some((p.x0 + t.xs()[0], p.x0 + t.xs()[t.xs().len() - 1])),
        _ => None,
    };
    let (lo, hi) = match (support(a), support(b)) {
        (Some(sa), Some(sb)) => (sa.0.max(sb.0), sa.1.min(sb.1)),
        (Some(s), None) | (None, Some(s)) => s,
        (None, None) => unreachable!("position quadrature needs a tabulated envelope"),
    };
    if lo >= hi {
        return Complex64::new(0.0, 0.0);
    }
    let band = a.envelope.bandwidth().max(b.envelope.bandwidth()) + (a.p0 - b.p0).abs();
    let step = (2.0 * PI / band) / 32.0;
    let steps = ((hi - lo) / step).ceil() as usize;
    simpson(lo, hi, steps.clamp(2_000, 2_000_000), |x| a.amplitude(x).conj() * b.amplitude(x))
}

fn momentum_overlap(a: &WavePacket, b: &WavePacket) -> Complex64 {
    // one of the two is a sinc envelope with compact momentum support
    let (lo, hi) = match (&a.envelope, &b.envelope) {
        (Envelope::Sinc { d }, _) => (a.p0 - PI / d, a.p0 + PI / d),
        (_, Envelope::Sinc { d }) => (b.p0 - PI / d, b.p0 + PI / d),
        _ => unreachable!("momentum quadrature needs a sinc envelope"),
    };
    let osc = (a.x0 - b.x0).abs() * (hi - lo) / (2.0 * PI);
    let steps = (64.0 * osc) as usize;
    simpson(lo, hi, steps.clamp(4_000, 2_000_000), |p| {
        a.momentum_amplitude(p).conj() * b.momentum_amplitude(p)
    })
}

/// Coherent superposition of packets, normalized including their overlaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperposedState {
    terms: Vec<(Complex64, WavePacket)>,
}

impl SuperposedState {
    pub fn new(terms: Vec<(Complex64, WavePacket)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::invalid("a superposition needs at least one term"));
        }
        let mut norm2 = 0.0;
        for (ai, pi) in &terms {
            for (aj, pj) in &terms {
                norm2 += (ai.conj() * aj * overlap(pi, pj)).re;
            }
        }
        if !(norm2 > 0.0) {
            return Err(Error::invalid("superposition has zero norm"));
        }
        let s = norm2.sqrt();
        Ok(Self { terms: terms.into_iter().map(|(a, p)| (a / s, p)).collect() })
    }

    pub fn terms(&self) -> &[(Complex64, WavePacket)] {
        &self.terms
    }

    pub fn amplitude(&self, x: f64) -> Complex64 {
        self.terms.iter().map(|(a, p)| a * p.amplitude(x)).sum()
    }

    pub fn momentum_amplitude(&self, p: f64) -> Complex64 {
        self.terms.iter().map(|(a, w)| a * w.momentum_amplitude(p)).sum()
    }

    pub fn position_density(&self, x: f64) -> f64 {
        self.amplitude(x).norm_sqr()
    }

    pub fn momentum_density(&self, p: f64) -> f64 {
        self.momentum_amplitude(p).norm_sqr()
    }
}

/// Pure two-particle state `Σ_t a_t |ψ_t⟩₁|χ_t⟩₂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoParticleState {
    terms: Vec<(Complex64, WavePacket, WavePacket)>,
}

impl TwoParticleState {
    pub fn new(terms: Vec<(Complex64, WavePacket, WavePacket)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::invalid("a two-particle state needs at least one term"));
        }
        let mut norm2 = 0.0;
        for (ai, p1, p2) in &terms {
            for (aj, q1, q2) in &terms {
                norm2 += (ai.conj() * aj * overlap(p1, q1) * overlap(p2, q2)).re;
            }
        }
        if !(norm2 > 0.0) {
            return Err(Error::invalid("two-particle state has zero norm"));
        }
        let s = norm2.sqrt();
        Ok(Self { terms: terms.into_iter().map(|(a, p, q)| (a / s, p, q)).collect() })
    }

    /// Product state `|ψ⟩₁ ⊗ |χ⟩₂` of two single-particle superpositions.
    pub fn product(first: &SuperposedState, second: &SuperposedState) -> Result<Self> {
        let mut terms = Vec::with_capacity(first.terms.len() * second.terms.len());
        for (a, p) in &first.terms {
            for (b, q) in &second.terms {
                terms.push((a * b, p.clone(), q.clone()));
            }
        }
        Self::new(terms)
    }

    pub fn terms(&self) -> &[(Complex64, WavePacket, WavePacket)] {
        &self.terms
    }

    pub fn joint_amplitude(&self, x1: f64, x2: f64) -> Complex64 {
        self.terms.iter().map(|(a, p, q)| a * p.amplitude(x1) * q.amplitude(x2)).sum()
    }

    pub fn joint_position_density(&self, x1: f64, x2: f64) -> f64 {
        self.joint_amplitude(x1, x2).norm_sqr()
    }

    pub fn joint_momentum_density(&self, p1: f64, p2: f64) -> f64 {
        self.terms
            .iter()
            .map(|(a, p, q)| a * p.momentum_amplitude(p1) * q.momentum_amplitude(p2))
            .sum::<Complex64>()
            .norm_sqr()
    }

    /// Reduced position density of `particle` (0 or 1) after tracing out the partner.
    pub fn marginal_position_density(&self, particle: usize, x: f64) -> f64 {
        fn pick(t: &(Complex64, WavePacket, WavePacket), particle: usize, x: f64) -> (Complex64, &WavePacket) {
            if particle == 0 {
                (t.1.amplitude(x), &t.2)
            } else {
                (t.2.amplitude(x), &t.1)
            }
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for ti in &self.terms {
            let (ui, pi) = pick(ti, particle, x);
            for tj in &self.terms {
                let (uj, pj) = pick(tj, particle, x);
                acc += ti.0.conj() * tj.0 * ui.conj() * uj * overlap(pi, pj);
            }
        }
        acc.re.max(0.0)
    }
}

/// Ensemble `Σ_i w_i |Ψ_i⟩⟨Ψ_i|` of pure two-particle states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureState {
    components: Vec<(f64, TwoParticleState)>,
}

impl MixtureState {
    pub fn components(&self) -> &[(f64, TwoParticleState)] {
        &self.components
    }

    pub fn joint_position_density(&self, x1: f64, x2: f64) -> f64 {
        self.components.iter().map(|(w, s)| w * s.joint_position_density(x1, x2)).sum()
    }

    pub fn joint_momentum_density(&self, p1: f64, p2: f64) -> f64 {
        self.components.iter().map(|(w, s)| w * s.joint_momentum_density(p1, p2)).sum()
    }

    pub fn marginal_position_density(&self, particle: usize, x: f64) -> f64 {
        self.components.iter().map(|(w, s)| w * s.marginal_position_density(particle, x)).sum()
    }

    /// Weighted union of mixtures, flattened and renormalized.
    pub fn combine(parts: Vec<(f64, MixtureState)>) -> Result<Self> {
        let flat = parts
            .into_iter()
            .flat_map(|(w, m)| m.components.into_iter().map(move |(v, s)| (w * v, s)))
            .collect();
        mix(flat)
    }
}

impl From<TwoParticleState> for MixtureState {
    fn from(s: TwoParticleState) -> Self {
        Self { components: vec![(1.0, s)] }
    }
}

/// Normalizes weights; zero-weight components are dropped.
pub fn mix(components: Vec<(f64, TwoParticleState)>) -> Result<MixtureState> {
    if components.is_empty() {
        return Err(Error::invalid("mixture needs at least one component"));
    }
    if components.iter().any(|(w, _)| !w.is_finite() || *w < 0.0) {
        return Err(Error::invalid("mixture weights must be finite and non-negative"));
    }
    let total: f64 = components.iter().map(|(w, _)| w).sum();
    if total <= 0.0 {
        return Err(Error::invalid("mixture weights are all zero"));
    }
    let components = components
        .into_iter()
        .filter(|(w, _)| *w > 0.0)
        .map(|(w, s)| (w / total, s))
        .collect();
    Ok(MixtureState { components })
}

/// Parameters shared by the SMP, MPE and classically correlated builders.
#[derive(Debug, Clone, PartialEq)]
pub struct ModularStateParams {
    pub n: usize,
    pub x0: f64,
    pub n0: i64,
    pub lambda: f64,
    pub envelope: Envelope,
    /// Fringe phase x̄₀; defaults to the modular part of `x0` at scale `lambda`.
    pub phase_ref: Option<f64>,
}

impl ModularStateParams {
    pub fn new(n: usize, x0: f64, n0: i64, lambda: f64, envelope: Envelope) -> Self {
        Self { n, x0, n0, lambda, envelope, phase_ref: None }
    }

    fn validate(&self) -> Result<ModularScale> {
        if self.n == 0 {
            return Err(Error::invalid("superposition rank N must be at least 1"));
        }
        if !self.x0.is_finite() {
            return Err(Error::NonFinite("x0"));
        }
        ModularScale::new(self.lambda)
    }

    pub fn phase_ref(&self) -> Result<f64> {
        let scale = self.validate()?;
        match self.phase_ref {
            Some(r) => Ok(r),
            None => Ok(modular_decompose(self.x0, scale, Axis::Position)?.modular_part),
        }
    }

    fn momentum(&self, k: usize) -> f64 {
        (self.n0 + k as i64) as f64 * PLANCK / self.lambda
    }

    /// Warning text when the packets are not well separated in momentum.
    pub fn distinctness_warning(&self) -> Option<String> {
        let ratio = self.envelope.width() / self.lambda;
        (ratio < 5.0).then(|| {
            format!("envelope width / lambda = {ratio:.3} < 5: momentum components overlap")
        })
    }
}

/// Multislit state: N copies of the envelope at positions −nL.
pub fn build_multislit(n: usize, slit_spacing: f64, envelope: Envelope) -> Result<SuperposedState> {
    if n == 0 {
        return Err(Error::invalid("number of slits N must be at least 1"));
    }
    if !(slit_spacing.is_finite() && slit_spacing > 0.0) {
        return Err(Error::invalid(format!("slit spacing must be positive, got {slit_spacing}")));
    }
    let terms = (0..n)
        .map(|k| {
            let packet = WavePacket::new(envelope.clone(), -(k as f64) * slit_spacing, 0.0, 0.0)?;
            Ok((Complex64::new(1.0, 0.0), packet))
        })
        .collect::<Result<Vec<_>>>()?;
    SuperposedState::new(terms)
}

/// Warning text when the slit width is not small against the spacing.
pub fn multislit_warning(slit_spacing: f64, envelope: &Envelope) -> Option<String> {
    let ratio = envelope.width() / slit_spacing;
    (ratio > 0.2).then(|| format!("envelope width / L = {ratio:.3} > 0.2: slits overlap"))
}

/// Squeezed modular position state: N packets at x0 with momenta (N0+n)h/λ.
pub fn build_smp(params: &ModularStateParams) -> Result<SuperposedState> {
    let phase_ref = params.phase_ref()?;
    let terms = (0..params.n)
        .map(|k| {
            let packet =
                WavePacket::new(params.envelope.clone(), params.x0, params.momentum(k), phase_ref)?;
            Ok((Complex64::new(1.0, 0.0), packet))
        })
        .collect::<Result<Vec<_>>>()?;
    SuperposedState::new(terms)
}

fn mpe_pair(params: &ModularStateParams, k: usize, phase_ref: f64) -> Result<(WavePacket, WavePacket)> {
    let p = params.momentum(k);
    Ok((
        WavePacket::new(params.envelope.clone(), params.x0, p, phase_ref)?,
        WavePacket::new(params.envelope.clone(), -params.x0, -p, phase_ref)?,
    ))
}

/// Modular position entangled state: correlated counterpropagating packet pairs.
pub fn build_mpe(params: &ModularStateParams) -> Result<TwoParticleState> {
    let phase_ref = params.phase_ref()?;
    let terms = (0..params.n)
        .map(|k| {
            let (a, b) = mpe_pair(params, k, phase_ref)?;
            Ok((Complex64::new(1.0, 0.0), a, b))
        })
        .collect::<Result<Vec<_>>>()?;
    TwoParticleState::new(terms)
}

/// Uniform incoherent mixture of the MPE product components.
pub fn build_classical_correlated(params: &ModularStateParams) -> Result<MixtureState> {
    let phase_ref = params.phase_ref()?;
    let w = 1.0 / params.n as f64;
    let components = (0..params.n)
        .map(|k| {
            let (a, b) = mpe_pair(params, k, phase_ref)?;
            Ok((w, TwoParticleState::new(vec![(Complex64::new(1.0, 0.0), a, b)])?))
        })
        .collect::<Result<Vec<_>>>()?;
    mix(components)
}

/// `(1−ε)·MPE + ε·classical`.
pub fn build_admixture(params: &ModularStateParams, epsilon: f64) -> Result<MixtureState> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::invalid(format!("admixture weight must lie in [0,1], got {epsilon}")));
    }
    MixtureState::combine(vec![
        (1.0 - epsilon, build_mpe(params)?.into()),
        (epsilon, build_classical_correlated(params)?),
    ])
}
