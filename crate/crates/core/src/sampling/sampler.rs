use num_complex::Complex64;

use super::rng::CounterRng;
use super::MeasurementKind;
use crate::error::{Error, Result};
use crate::grid::fourier::to_momentum;
use crate::grid::{GridPair, GridSpec};

/// Momentum lattice refinement over the box's own spacing 2π/L.
const MOMENTUM_OVERSAMPLE: usize = 4;
/// Padding stops once the momentum lattice reaches this many points.
const MOMENTUM_LATTICE_CAP: usize = 1 << 18;

/// One particle axis: ascending node coordinates (periodic with `period`)
/// and every term's amplitude at those nodes.
struct Axis {
    coords: Vec<f64>,
    period: f64,
    vectors: Vec<Vec<Complex64>>,
}

impl Axis {
    fn new(spec: &GridSpec, vectors: Vec<&[Complex64]>, kind: MeasurementKind) -> Self {
        match kind {
            MeasurementKind::Position => Axis {
                coords: spec.xs().collect(),
                period: spec.box_len(),
                vectors: vectors.into_iter().map(<[Complex64]>::to_vec).collect(),
            },
            MeasurementKind::Momentum => {
                // zero padding samples the same transform on a finer lattice
                let pad = (MOMENTUM_LATTICE_CAP / spec.points()).clamp(1, MOMENTUM_OVERSAMPLE);
                let n = spec.points() * pad;
                let padded = GridSpec::new(n, spec.min(), spec.min() + pad as f64 * spec.box_len())
                    .expect("padding keeps a valid grid");
                let order: Vec<usize> = (0..n).map(|i| (i + n / 2) % n).collect();
                Axis {
                    coords: order.iter().map(|&k| padded.momentum(k)).collect(),
                    period: n as f64 * padded.dp(),
                    vectors: vectors
                        .into_iter()
                        .map(|v| {
                            let mut buf = v.to_vec();
                            buf.resize(n, Complex64::default());
                            let m = to_momentum(&padded, &buf);
                            order.iter().map(|&k| m[k]).collect()
                        })
                        .collect(),
                }
            }
        }
    }

    fn len(&self) -> usize {
        self.coords.len()
    }

    fn cell_width(&self, cell: usize) -> f64 {
        let n = self.len();
        if cell + 1 < n {
            self.coords[cell + 1] - self.coords[cell]
        } else {
            self.coords[0] + self.period - self.coords[n - 1]
        }
    }
}

/// Position inside a cell whose density rises linearly from `lo` to `hi`,
/// holding mass `target` to its left (both in units of node density × cell).
fn invert_linear(lo: f64, hi: f64, target: f64) -> f64 {
    // solve lo·s + (hi − lo)s²/2 = target for s ∈ [0, 1]
    let disc = (lo * lo + 2.0 * (hi - lo) * target).max(0.0);
    let denom = lo + disc.sqrt();
    if denom <= 0.0 {
        return 0.5;
    }
    (2.0 * target / denom).clamp(0.0, 1.0)
}

/// Inverse-CDF sampler for one pure structured pair state. Node densities
/// are interpolated linearly within cells, including the periodic wrap cell.
pub(crate) struct PairSampler {
    first: Axis,
    second: Axis,
    coeffs: Vec<Complex64>,
    /// Marginal node density of the first particle.
    marginal: Vec<f64>,
    /// Cumulative mass of first-axis cells `0..c`.
    marginal_cdf: Vec<f64>,
    /// Running sums `Σ_{i≤j} v̄_t(i) v_u(i)` for `t ≤ u`, flattened.
    running: Vec<Vec<Complex64>>,
}

fn pair_index(t: usize, u: usize, terms: usize) -> usize {
    // row-major upper triangle
    t * terms - t * (t + 1) / 2 + u
}

impl PairSampler {
    pub(crate) fn new(state: &GridPair, kind: MeasurementKind) -> Result<Self> {
        let [s1, s2] = *state.specs();
        let first = Axis::new(&s1, state.terms().iter().map(|t| t.first.as_slice()).collect(), kind);
        let second = Axis::new(&s2, state.terms().iter().map(|t| t.second.as_slice()).collect(), kind);
        let coeffs: Vec<Complex64> = state.terms().iter().map(|t| t.coeff).collect();
        let t = coeffs.len();
        let n2 = second.len();
        let mut running = Vec::with_capacity(t * (t + 1) / 2);
        for a in 0..t {
            for b in a..t {
                let mut acc = Complex64::default();
                running.push(
                    second.vectors[a]
                        .iter()
                        .zip(&second.vectors[b])
                        .map(|(x, y)| {
                            acc += x.conj() * y;
                            acc
                        })
                        .collect::<Vec<_>>(),
                );
            }
        }
        let gram = |a: usize, b: usize| -> Complex64 {
            if a <= b {
                running[pair_index(a, b, t)][n2 - 1]
            } else {
                running[pair_index(b, a, t)][n2 - 1].conj()
            }
        };
        let marginal: Vec<f64> = (0..first.len())
            .map(|k| {
                let mut acc = Complex64::default();
                for a in 0..t {
                    let ua = (coeffs[a] * first.vectors[a][k]).conj();
                    for (b, (cb, vb)) in coeffs.iter().zip(&first.vectors).enumerate() {
                        acc += ua * cb * vb[k] * gram(a, b);
                    }
                }
                acc.re.max(0.0)
            })
            .collect();
        let n1 = first.len();
        let mut marginal_cdf = Vec::with_capacity(n1 + 1);
        marginal_cdf.push(0.0);
        for c in 0..n1 {
            let mass = 0.5 * (marginal[c] + marginal[(c + 1) % n1]) * first.cell_width(c);
            marginal_cdf.push(marginal_cdf[c] + mass);
        }
        let total = marginal_cdf[n1];
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::invalid("grid density cannot be normalized"));
        }
        Ok(Self { first, second, coeffs, marginal, marginal_cdf, running })
    }

    fn cdf_cell(cdf: &[f64], target: f64) -> usize {
        let n = cdf.len() - 1;
        cdf.partition_point(|&c| c <= target).clamp(1, n) - 1
    }

    fn sample_axis_cell(lo: f64, hi: f64, width: f64, residual: f64) -> f64 {
        let mass = 0.5 * (lo + hi);
        let scaled = if mass > 0.0 { residual / width } else { 0.0 };
        invert_linear(lo, hi, scaled.min(mass))
    }

    /// Draws one `(v1, v2)` record using four consecutive uniforms.
    pub(crate) fn draw(&self, rng: &CounterRng, base: u64) -> (f64, f64) {
        let n1 = self.first.len();
        let total = self.marginal_cdf[n1];
        let target = rng.f64_at(base) * total;
        let c = Self::cdf_cell(&self.marginal_cdf, target);
        let (lo, hi) = (self.marginal[c], self.marginal[(c + 1) % n1]);
        let width = self.first.cell_width(c);
        let s = Self::sample_axis_cell(lo, hi, width, target - self.marginal_cdf[c]);
        let v1 = self.first.coords[c] + s * width;
        // joint density is linear in v1 between the two bracketing nodes
        let (wl, wh) = ((1.0 - s) * lo, s * hi);
        let node = if rng.f64_at(base + 1) * (wl + wh) < wl { c } else { (c + 1) % n1 };
        (v1, self.draw_second(node, rng.f64_at(base + 2)))
    }

    fn draw_second(&self, node: usize, u: f64) -> f64 {
        let t = self.coeffs.len();
        let amps: Vec<Complex64> =
            (0..t).map(|a| self.coeffs[a] * self.first.vectors[a][node]).collect();
        let density = |j: usize| -> f64 {
            amps.iter().zip(&self.second.vectors).map(|(a, v)| a * v[j]).sum::<Complex64>().norm_sqr()
        };
        let running_sum = |j: usize| -> f64 {
            let mut acc = 0.0;
            for a in 0..t {
                acc += amps[a].norm_sqr() * self.running[pair_index(a, a, t)][j].re;
                for b in a + 1..t {
                    acc += 2.0 * (amps[a].conj() * amps[b] * self.running[pair_index(a, b, t)][j]).re;
                }
            }
            acc
        };
        let n2 = self.second.len();
        let rho0 = density(0);
        // mass of cells 0..j (unit width) is S(j) − ρ₀/2 − ρ_j/2
        let cells_before = |j: usize| -> f64 { running_sum(j) - 0.5 * rho0 - 0.5 * density(j) };
        let total = running_sum(n2 - 1);
        let target = u * total;
        let (mut lo, mut hi) = (0usize, n2 - 1);
        if target >= cells_before(n2 - 1) {
            lo = n2 - 1;
        } else {
            // invariant: cells_before(lo) ≤ target < cells_before(hi)
            while hi - lo > 1 {
                let mid = (lo + hi) / 2;
                if cells_before(mid) <= target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        let c = lo;
        let (dl, dh) = (density(c), density((c + 1) % n2));
        let s = invert_linear(dl, dh, (target - cells_before(c)).clamp(0.0, 0.5 * (dl + dh)));
        self.second.coords[c] + s * self.second.cell_width(c)
    }
}
