use std::f64::consts::PI;

use modvar::criterion::{mpe_closed_form_lhs, GridOptions};
use modvar::grid::GridMixture;
use modvar::modular::fringe_function;
use modvar::sampling::*;
use modvar::states::*;
use modvar::{ModularScale, PLANCK};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

const SIGMA: f64 = 5.0;

fn unit() -> ModularScale {
    ModularScale::new(1.0).unwrap()
}

fn grid_state(state: &MixtureState, points: usize) -> GridMixture {
    GridOptions::with_points(points).discretize(state, unit()).unwrap()
}

fn mpe(n: usize) -> MixtureState {
    build_mpe(&ModularStateParams::new(n, 0.0, 0, 1.0, Envelope::gaussian(SIGMA).unwrap())).unwrap().into()
}

/// Pearson χ² p-value of `values` binned on `edges` against bin probabilities `expected`.
fn chi_square_p(values: impl Iterator<Item = f64>, edges: &[f64], expected: &[f64]) -> f64 {
    let mut counts = vec![0usize; expected.len()];
    let mut n = 0usize;
    for v in values {
        n += 1;
        if v < edges[0] || v >= edges[edges.len() - 1] {
            continue;
        }
        let k = edges.partition_point(|&e| e <= v) - 1;
        counts[k] += 1;
    }
    let mut stat = 0.0;
    let mut dof = 0usize;
    for (c, p) in counts.iter().zip(expected) {
        let e = p * n as f64;
        if e >= 5.0 {
            stat += (*c as f64 - e).powi(2) / e;
            dof += 1;
        }
    }
    1.0 - ChiSquared::new((dof - 1) as f64).unwrap().cdf(stat)
}

/// Bin probabilities of a density by composite Simpson over each bin.
fn bin_probabilities(edges: &[f64], density: impl Fn(f64) -> f64) -> Vec<f64> {
    edges
        .windows(2)
        .map(|w| {
            let m = 16;
            let h = (w[1] - w[0]) / m as f64;
            let mut s = density(w[0]) + density(w[1]);
            for k in 1..m {
                s += density(w[0] + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
            }
            s * h / 3.0
        })
        .collect()
}

fn edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    (0..=bins).map(|k| lo + (hi - lo) * k as f64 / bins as f64).collect()
}

#[test]
fn position_samples_follow_the_two_component_density() {
    let g = grid_state(&mpe(2), 1 << 14);
    let set = sample_measurements(&g, MeasurementKind::Position, 1_000_000, 11).unwrap();
    // r = x1 − x2 has density g(r)·F_2(r), g Gaussian of variance 2σ²
    let gauss = Normal::new(0.0, SIGMA * 2f64.sqrt()).unwrap();
    let rel_density = |r: f64| statrs::distribution::Continuous::pdf(&gauss, r) * fringe_function(2, r).unwrap();
    let e = edges(-20.0, 20.0, 320);
    let p = chi_square_p(set.records.iter().map(|(a, b)| a - b), &e, &bin_probabilities(&e, rel_density));
    assert!(p > 0.01, "relative coordinate p-value {p}");
    // x1 + x2 carries no fringes
    let e = edges(-20.0, 20.0, 80);
    let sum_density = |s: f64| statrs::distribution::Continuous::pdf(&gauss, s);
    let p = chi_square_p(set.records.iter().map(|(a, b)| a + b), &e, &bin_probabilities(&e, sum_density));
    assert!(p > 0.01, "sum coordinate p-value {p}");
}

#[test]
fn momentum_samples_follow_the_two_component_density() {
    let g = grid_state(&mpe(2), 1 << 14);
    let set = sample_measurements(&g, MeasurementKind::Momentum, 1_000_000, 12).unwrap();
    let sp = 1.0 / (2.0 * SIGMA);
    let peak = |p: f64, c: f64| (-(p - c).powi(2) / (2.0 * sp * sp)).exp() / (2.0 * PI * sp * sp).sqrt();
    let p1_density = |p: f64| 0.5 * (peak(p, 0.0) + peak(p, PLANCK));
    let mut e = edges(-0.5, 0.5, 40);
    e.extend(edges(PLANCK - 0.5, PLANCK + 0.5, 40));
    e.dedup();
    // the wide bin spanning the gap between peaks holds no mass and is skipped
    let probs = bin_probabilities(&e, p1_density);
    let p = chi_square_p(set.records.iter().map(|r| r.0), &e, &probs);
    assert!(p > 0.01, "p1 p-value {p}");
    assert!(set.records.iter().all(|(a, b)| (a + b).abs() < 1.5));
}

#[test]
fn identical_seeds_give_identical_records() {
    let g = grid_state(&mpe(3), 1 << 12);
    let a = sample_measurements(&g, MeasurementKind::Position, 20_000, 99).unwrap();
    let b = sample_measurements(&g, MeasurementKind::Position, 20_000, 99).unwrap();
    assert_eq!(a, b);
    let c = sample_measurements(&g, MeasurementKind::Position, 20_000, 100).unwrap();
    assert_ne!(a.records, c.records);
    // a prefix of a longer run is the shorter run
    let long = sample_measurements(&g, MeasurementKind::Position, 30_000, 99).unwrap();
    assert_eq!(&long.records[..20_000], &a.records[..]);
}

#[test]
fn records_round_trip_through_csv() {
    let g = grid_state(&mpe(2), 1 << 12);
    let a = sample_measurements(&g, MeasurementKind::Momentum, 500, 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    let mut buf = Vec::new();
    a.write_csv(&mut buf).unwrap();
    std::fs::write(&path, &buf).unwrap();
    let text = std::fs::read(&path).unwrap();
    let back = SampleSet::read_csv(&text[..], &a.sidecar(None)).unwrap();
    assert_eq!(back, a);
    let mut wrong = a.sidecar(None);
    wrong.n = 499;
    assert!(SampleSet::read_csv(&text[..], &wrong).is_err());
}

#[test]
fn sampling_rejects_single_particle_grids() {
    let s = build_multislit(2, 1.0, Envelope::gaussian(0.1).unwrap()).unwrap();
    let spec = single_grid_spec(&s, 1024, DEFAULT_HALFWIDTH_SIGMAS, None).unwrap();
    let w = discretize_single(&s, spec, None).unwrap();
    let g = GridMixture::new(vec![(1.0, w.into())]).unwrap();
    assert!(sample_measurements(&g, MeasurementKind::Position, 10, 1).is_err());
}

fn experiment(g: &GridMixture, n: usize, seed: u64) -> EstimateReport {
    let pos = sample_measurements(g, MeasurementKind::Position, n, seed).unwrap();
    let mom = sample_measurements(g, MeasurementKind::Momentum, n, seed).unwrap();
    estimate_criterion(&pos, &mom, unit()).unwrap()
}

#[test]
fn mpe_estimate_violates_and_classical_does_not() {
    let g = grid_state(&mpe(2), 1 << 14);
    let r = experiment(&g, 100_000, 7);
    let truth = mpe_closed_form_lhs(2).unwrap();
    assert_eq!(r.verdict, Verdict::Violated);
    assert!((r.lhs_hat - truth).abs() < 3.0 * r.ci_halfwidth);
    assert!(r.ci_low <= r.lhs_hat && r.lhs_hat <= r.ci_high && r.ci_halfwidth > 0.0);
    assert!(!r.clamped);

    let cls = build_classical_correlated(&ModularStateParams::new(2, 0.0, 0, 1.0, Envelope::gaussian(SIGMA).unwrap())).unwrap();
    let r = experiment(&grid_state(&cls, 1 << 14), 100_000, 7);
    assert_eq!(r.verdict, Verdict::NotViolated);
    assert!((r.lhs_hat - 1.0 / 6.0).abs() < 3.0 * r.ci_halfwidth);
}

#[test]
fn bootstrap_interval_covers_the_truth() {
    let g = grid_state(&mpe(2), 1 << 14);
    let truth = mpe_closed_form_lhs(2).unwrap();
    // the 93–97% band is only ±1.3 binomial standard errors at 200 runs,
    // so the rate is measured over 2000
    let reps = 2000;
    let hits = (0..reps)
        .filter(|&k| {
            let r = experiment(&g, 10_000, 1000 + k);
            r.ci_low <= truth && truth <= r.ci_high
        })
        .count();
    let coverage = hits as f64 / reps as f64;
    assert!((0.93..=0.97).contains(&coverage), "coverage {coverage}");
}

#[test]
fn estimator_error_shrinks_as_inverse_square_root() {
    let g = grid_state(&mpe(2), 1 << 14);
    let truth = mpe_closed_form_lhs(2).unwrap();
    let sizes = [1_000usize, 10_000, 100_000, 1_000_000];
    let seeds = 16;
    let pts: Vec<(f64, f64)> = sizes
        .iter()
        .map(|&n| {
            let ms: f64 = (0..seeds)
                .map(|s| {
                    let pos = sample_measurements(&g, MeasurementKind::Position, n, 500 + s).unwrap();
                    let mom = sample_measurements(&g, MeasurementKind::Momentum, n, 500 + s).unwrap();
                    (plug_in_estimate(&pos, &mom, unit()).unwrap().2 - truth).powi(2)
                })
                .sum::<f64>()
                / seeds as f64;
            ((n as f64).ln(), ms.sqrt().ln())
        })
        .collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope + 0.5).abs() <= 0.1, "slope {slope}");
}
