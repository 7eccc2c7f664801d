//! Uniformly sampled states on periodic grids and the operator machinery that
//! acts on them.
//!
//! Two-particle states are kept as sums of product terms so that variances
//! reduce to single-particle matrix elements; a dense joint array is only
//! materialized for export or for imported data, capped at
//! [`DENSE_CAP`] × [`DENSE_CAP`].

pub mod fourier;
mod io;
mod observables;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modular::ModularScale;

pub use io::{read_csv, write_csv};
pub use observables::{
    apply_modular_operator, commutator_expectation, observable_variance, CommutatorPair, Measurable,
    Moments, Observable,
};

/// Largest per-axis size for a materialized two-particle array.
pub const DENSE_CAP: usize = 1 << 11;

/// Periodic grid with `points` nodes at `min + k·dx`, `dx = (max − min)/points`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    points: usize,
    min: f64,
    max: f64,
}

impl GridSpec {
    pub fn new(points: usize, min: f64, max: f64) -> Result<Self> {
        if points < 16 || !points.is_power_of_two() {
            return Err(Error::invalid(format!(
                "grid points must be a power of two ≥ 16, got {points}"
            )));
        }
        if !(min.is_finite() && max.is_finite()) {
            return Err(Error::NonFinite("grid domain"));
        }
        if max <= min {
            return Err(Error::invalid(format!("empty grid domain [{min}, {max})")));
        }
        Ok(Self { points, min, max })
    }

    /// Grid whose box spans a power-of-two number of periods of `scale`,
    /// covering `center ± halfwidth`. Nodes sit half a cell off the modular
    /// boundaries, so no node is ambiguous under the half-open convention.
    pub fn commensurate(center: f64, halfwidth: f64, scale: ModularScale, points: usize) -> Result<Self> {
        if !(center.is_finite() && halfwidth.is_finite()) || halfwidth <= 0.0 {
            return Err(Error::invalid("grid center and positive half-width required"));
        }
        let ell = scale.ell();
        let needed = (2.0 * halfwidth / ell).ceil().max(1.0) as usize;
        let periods = needed.next_power_of_two();
        if periods > points || points / periods < 8 {
            return Err(Error::GridTooCoarse(format!(
                "{points} points over {periods} periods leaves fewer than 8 points per period"
            )));
        }
        let dx = ell / (points / periods) as f64;
        let aligned = (center / ell).round() * ell;
        let min = aligned - (periods / 2) as f64 * ell + 0.5 * dx;
        Self::new(points, min, min + periods as f64 * ell)
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn box_len(&self) -> f64 {
        self.max - self.min
    }

    pub fn dx(&self) -> f64 {
        self.box_len() / self.points as f64
    }

    pub fn dp(&self) -> f64 {
        2.0 * PI / self.box_len()
    }

    pub fn x(&self, k: usize) -> f64 {
        self.min + k as f64 * self.dx()
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.points).map(|k| self.x(k))
    }

    /// Signed lattice index of FFT bin `k`.
    pub fn momentum_index(&self, k: usize) -> i64 {
        if k < self.points / 2 {
            k as i64
        } else {
            k as i64 - self.points as i64
        }
    }

    pub fn momentum(&self, k: usize) -> f64 {
        self.momentum_index(k) as f64 * self.dp()
    }

    /// Number of modular periods in the box; fails unless it is an integer.
    pub fn periods(&self, scale: ModularScale) -> Result<usize> {
        let ratio = self.box_len() / scale.ell();
        let m = ratio.round();
        if m < 1.0 || (ratio - m).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::Incommensurate { box_len: self.box_len(), ell: scale.ell() });
        }
        Ok(m as usize)
    }
}

pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(u, v)| u.conj() * v).sum()
}

fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum()
}

/// Single-particle grid state.
#[derive(Debug, Clone, PartialEq)]
pub struct GridWave {
    spec: GridSpec,
    amps: Vec<Complex64>,
}

impl GridWave {
    pub fn new(spec: GridSpec, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != spec.points() {
            return Err(Error::invalid(format!(
                "{} amplitudes for a {}-point grid",
                amps.len(),
                spec.points()
            )));
        }
        if amps.iter().any(|a| !(a.re.is_finite() && a.im.is_finite())) {
            return Err(Error::NonFinite("grid amplitude"));
        }
        Ok(Self { spec, amps })
    }

    /// Samples `f` at the nodes without normalizing.
    pub fn sample(spec: GridSpec, f: impl Fn(f64) -> Complex64) -> Self {
        let amps = spec.xs().map(f).collect();
        Self { spec, amps }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm2(&self) -> f64 {
        norm_sqr(&self.amps) * self.spec.dx()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n2 = self.norm2();
        if !(n2 > 0.0 && n2.is_finite()) {
            return Err(Error::invalid("grid state has zero norm"));
        }
        let s = 1.0 / n2.sqrt();
        self.amps.iter_mut().for_each(|a| *a *= s);
        Ok(self)
    }

    /// `⟨self|other⟩` with grid weights.
    pub fn inner(&self, other: &GridWave) -> Complex64 {
        inner(&self.amps, &other.amps) * self.spec.dx()
    }

    pub fn position_density(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn momentum_amplitudes(&self) -> Vec<Complex64> {
        fourier::to_momentum(&self.spec, &self.amps)
    }

    /// `(p, |ψ̃(p)|²)` sorted by increasing momentum.
    pub fn momentum_density(&self) -> Vec<(f64, f64)> {
        let amps = self.momentum_amplitudes();
        let n = self.spec.points();
        (0..n)
            .map(|i| {
                let k = (i + n / 2) % n;
                (self.spec.momentum(k), amps[k].norm_sqr())
            })
            .collect()
    }

    pub fn mean_position(&self) -> f64 {
        let n2 = norm_sqr(&self.amps);
        self.spec.xs().zip(&self.amps).map(|(x, a)| x * a.norm_sqr()).sum::<f64>() / n2
    }

    pub(crate) fn with_amplitudes(&self, amps: Vec<Complex64>) -> Self {
        Self { spec: self.spec, amps }
    }
}

/// One product term `coeff · u(x₁) v(x₂)` of a structured two-particle state.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTerm {
    pub coeff: Complex64,
    pub first: Vec<Complex64>,
    pub second: Vec<Complex64>,
}

impl PairTerm {
    pub fn side(&self, particle: usize) -> &[Complex64] {
        if particle == 0 {
            &self.first
        } else {
            &self.second
        }
    }
}

/// Two-particle grid state stored as a sum of product terms.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPair {
    specs: [GridSpec; 2],
    terms: Vec<PairTerm>,
}

impl GridPair {
    pub fn new(specs: [GridSpec; 2], terms: Vec<PairTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::invalid("structured pair state needs at least one term"));
        }
        for t in &terms {
            if t.first.len() != specs[0].points() || t.second.len() != specs[1].points() {
                return Err(Error::invalid("pair term length does not match its grid"));
            }
        }
        Ok(Self { specs, terms })
    }

    pub fn specs(&self) -> &[GridSpec; 2] {
        &self.specs
    }

    pub fn terms(&self) -> &[PairTerm] {
        &self.terms
    }

    /// Gram matrix of the `particle` factors, grid-weighted.
    pub(crate) fn gram(&self, particle: usize) -> Vec<Vec<Complex64>> {
        let dx = self.specs[particle].dx();
        self.terms
            .iter()
            .map(|a| self.terms.iter().map(|b| inner(a.side(particle), b.side(particle)) * dx).collect())
            .collect()
    }

    pub fn norm2(&self) -> f64 {
        let (g1, g2) = (self.gram(0), self.gram(1));
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, a) in self.terms.iter().enumerate() {
            for (j, b) in self.terms.iter().enumerate() {
                acc += a.coeff.conj() * b.coeff * g1[i][j] * g2[i][j];
            }
        }
        acc.re
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n2 = self.norm2();
        if !(n2 > 0.0 && n2.is_finite()) {
            return Err(Error::invalid("pair state has zero norm"));
        }
        let s = 1.0 / n2.sqrt();
        self.terms.iter_mut().for_each(|t| t.coeff *= s);
        Ok(self)
    }

    /// Reduced position density of `particle` at its grid nodes.
    pub fn marginal_density(&self, particle: usize) -> Vec<f64> {
        let partner = self.gram(1 - particle);
        let n = self.specs[particle].points();
        let mut out = vec![0.0; n];
        for (i, a) in self.terms.iter().enumerate() {
            for (j, b) in self.terms.iter().enumerate() {
                let c = a.coeff.conj() * b.coeff * partner[i][j];
                for ((o, u), v) in out.iter_mut().zip(a.side(particle)).zip(b.side(particle)) {
                    *o += (c * u.conj() * v).re;
                }
            }
        }
        out.iter_mut().for_each(|o| *o = o.max(0.0));
        out
    }

    pub fn to_dense(&self) -> Result<GridDense> {
        let [s1, s2] = self.specs;
        if s1.points() > DENSE_CAP || s2.points() > DENSE_CAP {
            return Err(Error::invalid(format!(
                "dense two-particle grids are capped at {DENSE_CAP} points per axis"
            )));
        }
        let n2 = s2.points();
        let mut amps = vec![Complex64::new(0.0, 0.0); s1.points() * n2];
        for t in &self.terms {
            for (i, u) in t.first.iter().enumerate() {
                let cu = t.coeff * u;
                for (a, v) in amps[i * n2..(i + 1) * n2].iter_mut().zip(&t.second) {
                    *a += cu * v;
                }
            }
        }
        GridDense::new(self.specs, amps)
    }
}

/// Materialized two-particle amplitude array, row-major in `x₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDense {
    specs: [GridSpec; 2],
    amps: Vec<Complex64>,
}

impl GridDense {
    pub fn new(specs: [GridSpec; 2], amps: Vec<Complex64>) -> Result<Self> {
        if specs[0].points() > DENSE_CAP || specs[1].points() > DENSE_CAP {
            return Err(Error::invalid(format!(
                "dense two-particle grids are capped at {DENSE_CAP} points per axis"
            )));
        }
        if amps.len() != specs[0].points() * specs[1].points() {
            return Err(Error::invalid("dense amplitude count does not match the grids"));
        }
        Ok(Self { specs, amps })
    }

    pub fn specs(&self) -> &[GridSpec; 2] {
        &self.specs
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm2(&self) -> f64 {
        norm_sqr(&self.amps) * self.specs[0].dx() * self.specs[1].dx()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n2 = self.norm2();
        if !(n2 > 0.0 && n2.is_finite()) {
            return Err(Error::invalid("dense state has zero norm"));
        }
        let s = 1.0 / n2.sqrt();
        self.amps.iter_mut().for_each(|a| *a *= s);
        Ok(self)
    }

    pub fn joint_density(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn marginal_density(&self, particle: usize) -> Vec<f64> {
        let (n1, n2) = (self.specs[0].points(), self.specs[1].points());
        let mut out = vec![0.0; if particle == 0 { n1 } else { n2 }];
        let w = self.specs[1 - particle].dx();
        for i in 0..n1 {
            for j in 0..n2 {
                let d = self.amps[i * n2 + j].norm_sqr() * w;
                out[if particle == 0 { i } else { j }] += d;
            }
        }
        out
    }
}

/// Any pure grid state.
#[derive(Debug, Clone, PartialEq)]
pub enum GridState {
    Single(GridWave),
    Pair(GridPair),
    Dense(GridDense),
}

impl GridState {
    pub fn arity(&self) -> usize {
        match self {
            GridState::Single(_) => 1,
            _ => 2,
        }
    }

    pub fn norm2(&self) -> f64 {
        match self {
            GridState::Single(w) => w.norm2(),
            GridState::Pair(p) => p.norm2(),
            GridState::Dense(d) => d.norm2(),
        }
    }

    pub fn normalized(self) -> Result<Self> {
        Ok(match self {
            GridState::Single(w) => GridState::Single(w.normalized()?),
            GridState::Pair(p) => GridState::Pair(p.normalized()?),
            GridState::Dense(d) => GridState::Dense(d.normalized()?),
        })
    }
}

impl From<GridWave> for GridState {
    fn from(w: GridWave) -> Self {
        GridState::Single(w)
    }
}

impl From<GridPair> for GridState {
    fn from(p: GridPair) -> Self {
        GridState::Pair(p)
    }
}

impl From<GridDense> for GridState {
    fn from(d: GridDense) -> Self {
        GridState::Dense(d)
    }
}

/// Weighted ensemble of pure grid states.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMixture {
    components: Vec<(f64, GridState)>,
}

impl GridMixture {
    pub fn new(components: Vec<(f64, GridState)>) -> Result<Self> {
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
        Ok(Self { components })
    }

    pub fn components(&self) -> &[(f64, GridState)] {
        &self.components
    }
}

impl From<GridState> for GridMixture {
    fn from(s: GridState) -> Self {
        Self { components: vec![(1.0, s)] }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn spec_validation() {
        assert!(GridSpec::new(15, 0.0, 1.0).is_err());
        assert!(GridSpec::new(24, 0.0, 1.0).is_err());
        assert!(GridSpec::new(16, 1.0, 1.0).is_err());
        assert!(GridSpec::new(16, 0.0, f64::NAN).is_err());
        let s = GridSpec::new(16, -1.0, 1.0).unwrap();
        assert_eq!(s.dx(), 0.125);
        assert_eq!(s.momentum_index(8), -8);
        assert_eq!(s.momentum_index(7), 7);
    }

    #[test]
    fn commensurate_grid_layout() {
        let scale = ModularScale::new(0.5).unwrap();
        let s = GridSpec::commensurate(3.1, 2.2, scale, 256).unwrap();
        assert_eq!(s.periods(scale).unwrap(), 16);
        assert_abs_diff_eq!(s.dx(), 0.5 / 16.0, epsilon = 1e-15);
        // first node half a cell above a period boundary
        let off = (s.min() - 0.5 * s.dx()) / 0.5;
        assert_abs_diff_eq!(off, off.round(), epsilon = 1e-12);
        assert!(s.min() <= 3.1 - 2.2 && s.max() >= 3.1 + 2.2);
        assert!(matches!(
            GridSpec::commensurate(0.0, 40.0, scale, 256),
            Err(Error::GridTooCoarse(_))
        ));
        let odd = GridSpec::new(64, 0.0, 3.3).unwrap();
        assert!(matches!(odd.periods(scale), Err(Error::Incommensurate { .. })));
    }

    #[test]
    fn fourier_round_trip_is_unitary() {
        let spec = GridSpec::new(256, -7.0, 9.0).unwrap();
        let w = GridWave::sample(spec, |x| {
            Complex64::from_polar((-(x - 1.0) * (x - 1.0)).exp(), 2.0 * x)
        });
        let p = fourier::to_momentum(&spec, w.amplitudes());
        let pn: f64 = p.iter().map(|v| v.norm_sqr()).sum::<f64>() * spec.dp();
        assert_abs_diff_eq!(pn, w.norm2(), epsilon = 1e-12);
        let back = fourier::to_position(&spec, &p);
        for (a, b) in back.iter().zip(w.amplitudes()) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn pair_dense_agree() {
        let spec = GridSpec::new(32, -4.0, 4.0).unwrap();
        let g = |c: f64| -> Vec<Complex64> {
            spec.xs().map(|x| Complex64::new((-(x - c) * (x - c)).exp(), 0.0)).collect()
        };
        let pair = GridPair::new(
            [spec, spec],
            vec![
                PairTerm { coeff: Complex64::new(1.0, 0.0), first: g(0.5), second: g(-0.5) },
                PairTerm { coeff: Complex64::new(0.0, 1.0), first: g(-1.0), second: g(1.0) },
            ],
        )
        .unwrap()
        .normalized()
        .unwrap();
        let dense = pair.to_dense().unwrap();
        assert_abs_diff_eq!(dense.norm2(), 1.0, epsilon = 1e-12);
        for p in 0..2 {
            for (a, b) in pair.marginal_density(p).iter().zip(dense.marginal_density(p)) {
                assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
            }
        }
    }
}
