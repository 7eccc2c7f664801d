use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fourier::{apply_momentum_diagonal, fft_in_place};
use super::{inner, GridDense, GridMixture, GridPair, GridSpec, GridState, GridWave, PairTerm};
use crate::error::{Error, Result};
use crate::modular::{modular_decompose, Axis, ModularScale};

/// Observables available on grid states. The last four act on pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    X,
    P,
    Nx,
    Np,
    XMod,
    PMod,
    /// `x̄₁ − x̄₂`
    XModRel,
    /// `N_p,1 + N_p,2`
    NpTot,
    /// `N_x,1 + N_x,2`
    NxTot,
    /// `p̄₁ − p̄₂`
    PModRel,
}

impl Observable {
    pub const ALL: [Observable; 10] = [
        Observable::X,
        Observable::P,
        Observable::Nx,
        Observable::Np,
        Observable::XMod,
        Observable::PMod,
        Observable::XModRel,
        Observable::NpTot,
        Observable::NxTot,
        Observable::PModRel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Observable::X => "x",
            Observable::P => "p",
            Observable::Nx => "n_x",
            Observable::Np => "n_p",
            Observable::XMod => "x_mod",
            Observable::PMod => "p_mod",
            Observable::XModRel => "x_mod_rel",
            Observable::NpTot => "n_p_tot",
            Observable::NxTot => "n_x_tot",
            Observable::PModRel => "p_mod_rel",
        }
    }

    pub fn arity(self) -> usize {
        if self.pair_parts().is_some() {
            2
        } else {
            1
        }
    }

    /// Single-particle factor and the sign of the second particle's term.
    fn pair_parts(self) -> Option<(Observable, f64)> {
        match self {
            Observable::XModRel => Some((Observable::XMod, -1.0)),
            Observable::NpTot => Some((Observable::Np, 1.0)),
            Observable::NxTot => Some((Observable::Nx, 1.0)),
            Observable::PModRel => Some((Observable::PMod, -1.0)),
            _ => None,
        }
    }

    fn arity_error(self, arity: usize) -> Error {
        Error::Arity { observable: self.name(), arity }
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Observable::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown observable '{s}'")))
    }
}

/// Diagonal representation of a single-particle observable.
enum Diagonal {
    Position(Vec<f64>),
    /// Indexed by FFT bin.
    Momentum(Vec<f64>),
}

impl Diagonal {
    fn values(&self) -> &[f64] {
        match self {
            Diagonal::Position(v) | Diagonal::Momentum(v) => v,
        }
    }

    fn is_momentum(&self) -> bool {
        matches!(self, Diagonal::Momentum(_))
    }
}

fn floor_div(a: i64, b: i64) -> i64 {
    a.div_euclid(b)
}

fn diagonal(obs: Observable, spec: &GridSpec, scale: ModularScale) -> Result<Diagonal> {
    let n = spec.points();
    let position = |f: &dyn Fn(f64) -> Result<f64>| -> Result<Diagonal> {
        Ok(Diagonal::Position(spec.xs().map(f).collect::<Result<_>>()?))
    };
    match obs {
        Observable::X => position(&|x| Ok(x)),
        Observable::Nx => {
            position(&|x| Ok(modular_decompose(x, scale, Axis::Position)?.integer_part as f64))
        }
        Observable::XMod => position(&|x| Ok(modular_decompose(x, scale, Axis::Position)?.modular_part)),
        Observable::P => Ok(Diagonal::Momentum((0..n).map(|k| spec.momentum(k)).collect())),
        Observable::Np | Observable::PMod => {
            // Each integer bin holds exactly M lattice momenta; the split is
            // done in integers so bin edges follow the half-open convention.
            let m = spec.periods(scale)? as i64;
            let unit = scale.momentum_period() / m as f64;
            let values = (0..n)
                .map(|k| {
                    let j = spec.momentum_index(k);
                    let np = floor_div(2 * j + m, 2 * m);
                    if obs == Observable::Np {
                        np as f64
                    } else {
                        (j - np * m) as f64 * unit
                    }
                })
                .collect();
            Ok(Diagonal::Momentum(values))
        }
        other => Err(other.arity_error(1)),
    }
}

fn apply_diagonal(amps: &[Complex64], diag: &Diagonal) -> Vec<Complex64> {
    match diag {
        Diagonal::Position(f) => amps.iter().zip(f).map(|(a, v)| a * v).collect(),
        Diagonal::Momentum(f) => apply_momentum_diagonal(amps, f),
    }
}

/// Applies a single-particle observable to a wave, or a pair observable
/// `A⊗1 ± 1⊗A` to a two-particle state. Position-diagonal observables act
/// pointwise, momentum-diagonal ones pointwise in the Fourier domain.
pub fn apply_modular_operator(state: &GridState, obs: Observable, scale: ModularScale) -> Result<GridState> {
    match (state, obs.pair_parts()) {
        (GridState::Single(w), None) => {
            let d = diagonal(obs, w.spec(), scale)?;
            Ok(GridState::Single(w.with_amplitudes(apply_diagonal(w.amplitudes(), &d))))
        }
        (GridState::Pair(p), Some((base, sign))) => {
            let d1 = diagonal(base, &p.specs()[0], scale)?;
            let d2 = diagonal(base, &p.specs()[1], scale)?;
            let mut terms = Vec::with_capacity(2 * p.terms().len());
            for t in p.terms() {
                terms.push(PairTerm {
                    coeff: t.coeff,
                    first: apply_diagonal(&t.first, &d1),
                    second: t.second.clone(),
                });
                terms.push(PairTerm {
                    coeff: t.coeff * sign,
                    first: t.first.clone(),
                    second: apply_diagonal(&t.second, &d2),
                });
            }
            Ok(GridState::Pair(GridPair::new(*p.specs(), terms)?))
        }
        (GridState::Dense(d), Some((base, sign))) => {
            let [s1, s2] = *d.specs();
            let (n1, n2) = (s1.points(), s2.points());
            let d1 = diagonal(base, &s1, scale)?;
            let d2 = diagonal(base, &s2, scale)?;
            let amps = d.amplitudes();
            let mut out = vec![Complex64::new(0.0, 0.0); n1 * n2];
            // rows: particle 2 operator
            for i in 0..n1 {
                let row = apply_diagonal(&amps[i * n2..(i + 1) * n2], &d2);
                for (o, r) in out[i * n2..(i + 1) * n2].iter_mut().zip(row) {
                    *o += r * sign;
                }
            }
            // columns: particle 1 operator
            let mut col = vec![Complex64::new(0.0, 0.0); n1];
            for j in 0..n2 {
                for i in 0..n1 {
                    col[i] = amps[i * n2 + j];
                }
                for (i, c) in apply_diagonal(&col, &d1).into_iter().enumerate() {
                    out[i * n2 + j] += c;
                }
            }
            Ok(GridState::Dense(GridDense::new(*d.specs(), out)?))
        }
        (s, _) => Err(obs.arity_error(s.arity())),
    }
}

/// First and second moments of an observable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub second: f64,
}

impl Moments {
    /// Tiny negative round-off is clamped to zero.
    pub fn variance(&self) -> f64 {
        (self.second - self.mean * self.mean).max(0.0)
    }
}

/// States on which observable moments can be evaluated.
pub trait Measurable {
    fn moments(&self, obs: Observable, scale: ModularScale) -> Result<Moments>;
}

pub fn observable_variance<S: Measurable + ?Sized>(
    state: &S,
    obs: Observable,
    scale: ModularScale,
) -> Result<f64> {
    Ok(state.moments(obs, scale)?.variance())
}

/// Vector expressed in the observable's eigenbasis, plus the quadrature weight.
fn in_basis(amps: &[Complex64], momentum: bool) -> Vec<Complex64> {
    let mut buf = amps.to_vec();
    if momentum {
        fft_in_place(&mut buf, true);
    }
    buf
}

fn weighted_moments(density: impl Iterator<Item = (f64, f64)>) -> Result<Moments> {
    let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for (rho, f) in density {
        z += rho;
        m1 += rho * f;
        m2 += rho * f * f;
    }
    if !(z > 0.0) {
        return Err(Error::invalid("state has zero norm"));
    }
    Ok(Moments { mean: m1 / z, second: m2 / z })
}

impl Measurable for GridWave {
    fn moments(&self, obs: Observable, scale: ModularScale) -> Result<Moments> {
        let d = diagonal(obs, self.spec(), scale)?;
        let v = in_basis(self.amplitudes(), d.is_momentum());
        weighted_moments(v.iter().zip(d.values()).map(|(a, f)| (a.norm_sqr(), *f)))
    }
}

type Matrix = Vec<Vec<Complex64>>;

/// Gram, first- and second-moment matrices of one side of a pair state.
fn side_matrices(vectors: &[Vec<Complex64>], d: &Diagonal) -> (Matrix, Matrix, Matrix) {
    let basis: Vec<Vec<Complex64>> = vectors.iter().map(|v| in_basis(v, d.is_momentum())).collect();
    let f = d.values();
    let weighted: Vec<Vec<Complex64>> =
        basis.iter().map(|v| v.iter().zip(f).map(|(a, x)| a * x).collect()).collect();
    let t = vectors.len();
    let mut g = vec![vec![Complex64::new(0.0, 0.0); t]; t];
    let mut a = g.clone();
    let mut a2 = g.clone();
    for i in 0..t {
        for j in 0..t {
            g[i][j] = inner(&basis[i], &basis[j]);
            a[i][j] = inner(&basis[i], &weighted[j]);
            a2[i][j] = inner(&weighted[i], &weighted[j]);
        }
    }
    (g, a, a2)
}

impl Measurable for GridPair {
    fn moments(&self, obs: Observable, scale: ModularScale) -> Result<Moments> {
        let (base, sign) = obs.pair_parts().ok_or_else(|| obs.arity_error(2))?;
        let d1 = diagonal(base, &self.specs()[0], scale)?;
        let d2 = diagonal(base, &self.specs()[1], scale)?;
        let firsts: Vec<_> = self.terms().iter().map(|t| t.first.clone()).collect();
        let seconds: Vec<_> = self.terms().iter().map(|t| t.second.clone()).collect();
        let (g1, a1, q1) = side_matrices(&firsts, &d1);
        let (g2, a2, q2) = side_matrices(&seconds, &d2);
        let (mut z, mut m1, mut m2) = (Complex64::default(), Complex64::default(), Complex64::default());
        for (i, ti) in self.terms().iter().enumerate() {
            for (j, tj) in self.terms().iter().enumerate() {
                let c = ti.coeff.conj() * tj.coeff;
                z += c * g1[i][j] * g2[i][j];
                m1 += c * (a1[i][j] * g2[i][j] + g1[i][j] * a2[i][j] * sign);
                m2 += c * (q1[i][j] * g2[i][j] + a1[i][j] * a2[i][j] * (2.0 * sign) + g1[i][j] * q2[i][j]);
            }
        }
        if !(z.re > 0.0) {
            return Err(Error::invalid("state has zero norm"));
        }
        Ok(Moments { mean: m1.re / z.re, second: m2.re / z.re })
    }
}

impl Measurable for GridDense {
    fn moments(&self, obs: Observable, scale: ModularScale) -> Result<Moments> {
        let (base, sign) = obs.pair_parts().ok_or_else(|| obs.arity_error(2))?;
        let [s1, s2] = *self.specs();
        let (n1, n2) = (s1.points(), s2.points());
        let d1 = diagonal(base, &s1, scale)?;
        let d2 = diagonal(base, &s2, scale)?;
        let mut amps = self.amplitudes().to_vec();
        if d2.is_momentum() {
            for row in amps.chunks_mut(n2) {
                fft_in_place(row, true);
            }
        }
        if d1.is_momentum() {
            let mut col = vec![Complex64::default(); n1];
            for j in 0..n2 {
                for i in 0..n1 {
                    col[i] = amps[i * n2 + j];
                }
                fft_in_place(&mut col, true);
                for i in 0..n1 {
                    amps[i * n2 + j] = col[i];
                }
            }
        }
        let (f1, f2) = (d1.values(), d2.values());
        weighted_moments(
            amps.iter().enumerate().map(|(k, a)| (a.norm_sqr(), f1[k / n2] + sign * f2[k % n2])),
        )
    }
}

impl Measurable for GridState {
    fn moments(&self, obs: Observable, scale: ModularScale) -> Result<Moments> {
        match self {
            GridState::Single(w) => w.moments(obs, scale),
            GridState::Pair(p) => p.moments(obs, scale),
            GridState::Dense(d) => d.moments(obs, scale),
        }
    }
}

impl Measurable for GridMixture {
    /// Law of total variance: within-component variance plus the spread of
    /// component means, both weight-averaged.
    fn moments(&self, obs: Observable, scale: ModularScale) -> Result<Moments> {
        let parts = self
            .components()
            .iter()
            .map(|(w, s)| Ok((*w, s.moments(obs, scale)?)))
            .collect::<Result<Vec<_>>>()?;
        let mean: f64 = parts.iter().map(|(w, m)| w * m.mean).sum();
        let within: f64 = parts.iter().map(|(w, m)| w * m.variance()).sum();
        let between: f64 = parts.iter().map(|(w, m)| w * (m.mean - mean).powi(2)).sum();
        Ok(Moments { mean, second: within + between + mean * mean })
    }
}

/// Operator pairs whose commutators carry the boundary projector terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommutatorPair {
    /// `[N_x, p̄]`
    NxPMod,
    /// `[x̄, N_p]`
    XModNp,
}

/// `⟨AB⟩ − ⟨BA⟩`, applying the grid operators in both orders.
pub fn commutator_expectation(wave: &GridWave, pair: CommutatorPair, scale: ModularScale) -> Result<Complex64> {
    let (a, b) = match pair {
        CommutatorPair::NxPMod => (Observable::Nx, Observable::PMod),
        CommutatorPair::XModNp => (Observable::XMod, Observable::Np),
    };
    let da = diagonal(a, wave.spec(), scale)?;
    let db = diagonal(b, wave.spec(), scale)?;
    let psi = wave.amplitudes();
    let ab = apply_diagonal(&apply_diagonal(psi, &db), &da);
    let ba = apply_diagonal(&apply_diagonal(psi, &da), &db);
    let norm = inner(psi, psi);
    Ok((inner(psi, &ab) - inner(psi, &ba)) / norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn unit() -> ModularScale {
        ModularScale::new(1.0).unwrap()
    }

    fn spec() -> GridSpec {
        GridSpec::commensurate(0.0, 8.0, unit(), 512).unwrap()
    }

    #[test]
    fn plane_wave_is_integer_momentum_eigenstate() {
        let s = spec();
        // lattice momentum j = 3M + 1 lies in integer bin 3
        let m = s.periods(unit()).unwrap() as i64;
        let p = (3 * m + 1) as f64 * s.dp();
        let w = GridWave::sample(s, |x| Complex64::from_polar(1.0, p * x));
        let out = apply_modular_operator(&w.clone().into(), Observable::Np, unit()).unwrap();
        let GridState::Single(out) = out else { unreachable!() };
        for (a, b) in out.amplitudes().iter().zip(w.amplitudes()) {
            assert!((a - b * 3.0).norm() < 1e-9);
        }
        let mo = w.moments(Observable::Np, unit()).unwrap();
        assert_abs_diff_eq!(mo.mean, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mo.variance(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn momentum_bin_edges_are_half_open() {
        let s = spec();
        let m = s.periods(unit()).unwrap();
        let Diagonal::Momentum(np) = diagonal(Observable::Np, &s, unit()).unwrap() else {
            unreachable!()
        };
        let Diagonal::Momentum(pm) = diagonal(Observable::PMod, &s, unit()).unwrap() else {
            unreachable!()
        };
        // j = M/2 is the lower edge of bin 1 (p̄ = −π/ℓ)
        assert_eq!(np[m / 2], 1.0);
        assert_abs_diff_eq!(pm[m / 2], -PI, epsilon = 1e-12);
        assert_eq!(np[m / 2 - 1], 0.0);
        for k in 0..s.points() {
            assert_abs_diff_eq!(np[k] * 2.0 * PI + pm[k], s.momentum(k), epsilon = 1e-9);
        }
    }

    #[test]
    fn applying_twice_equals_square() {
        let s = spec();
        let w = GridWave::sample(s, |x| Complex64::from_polar((-x * x / 8.0).exp(), 0.3 * x));
        let st: GridState = w.clone().into();
        let once = apply_modular_operator(&st, Observable::XMod, unit()).unwrap();
        let GridState::Single(twice) = apply_modular_operator(&once, Observable::XMod, unit()).unwrap() else {
            unreachable!()
        };
        for (k, (a, b)) in twice.amplitudes().iter().zip(w.amplitudes()).enumerate() {
            let xm = modular_decompose(s.x(k), unit(), Axis::Position).unwrap().modular_part;
            assert!((a - b * xm * xm).norm() < 1e-14);
        }
    }

    #[test]
    fn arity_is_enforced() {
        let w: GridState = GridWave::sample(spec(), |_| Complex64::new(1.0, 0.0)).into();
        assert!(matches!(w.moments(Observable::NpTot, unit()), Err(Error::Arity { .. })));
        assert!(matches!(
            apply_modular_operator(&w, Observable::XModRel, unit()),
            Err(Error::Arity { .. })
        ));
        assert_eq!("n_p_tot".parse::<Observable>().unwrap(), Observable::NpTot);
    }

    #[test]
    fn pair_moments_match_dense() {
        let s = GridSpec::commensurate(0.0, 4.0, unit(), 128).unwrap();
        let g = |c: f64, p: f64| -> Vec<Complex64> {
            s.xs().map(|x| Complex64::from_polar((-(x - c) * (x - c) / 2.0).exp(), p * x)).collect()
        };
        let pair = GridPair::new(
            [s, s],
            vec![
                PairTerm { coeff: Complex64::new(1.0, 0.0), first: g(0.3, 0.0), second: g(-0.3, 0.0) },
                PairTerm { coeff: Complex64::new(0.5, 0.5), first: g(0.3, 2.0 * PI), second: g(-0.3, -2.0 * PI) },
            ],
        )
        .unwrap()
        .normalized()
        .unwrap();
        let dense = pair.to_dense().unwrap();
        for obs in [Observable::XModRel, Observable::NpTot, Observable::NxTot, Observable::PModRel] {
            let a = pair.moments(obs, unit()).unwrap();
            let b = dense.moments(obs, unit()).unwrap();
            assert_abs_diff_eq!(a.mean, b.mean, epsilon = 1e-10);
            assert_abs_diff_eq!(a.second, b.second, epsilon = 1e-10);
            // moments of the applied operator agree with the structured formula
            let applied = apply_modular_operator(&pair.clone().into(), obs, unit()).unwrap();
            let GridState::Pair(ap) = applied else { unreachable!() };
            assert_abs_diff_eq!(ap.norm2(), a.second, epsilon = 1e-9);
        }
    }

    #[test]
    fn mixture_total_variance() {
        let s = spec();
        let a: GridState = GridWave::sample(s, |x| Complex64::new((-(x - 1.0).powi(2)).exp(), 0.0)).into();
        let b: GridState = GridWave::sample(s, |x| Complex64::new((-(x + 2.0).powi(2)).exp(), 0.0)).into();
        let mix = GridMixture::new(vec![(0.25, a.clone()), (0.75, b.clone())]).unwrap();
        let (ma, mb) = (a.moments(Observable::X, unit()).unwrap(), b.moments(Observable::X, unit()).unwrap());
        let direct = 0.25 * ma.second + 0.75 * mb.second - (0.25 * ma.mean + 0.75 * mb.mean).powi(2);
        assert_abs_diff_eq!(observable_variance(&mix, Observable::X, unit()).unwrap(), direct, epsilon = 1e-12);
    }
}
