use approx::assert_relative_eq;
use modvar::grid::fourier::{to_momentum, to_position};
use modvar::grid::*;
use modvar::modular::{smp_commutator_expectation, smp_integer_momentum_variance, smp_modular_position_variance};
use modvar::spectral::criterion_constant;
use modvar::states::*;
use modvar::ModularScale;
use num_complex::Complex64;
use proptest::prelude::*;

fn unit() -> ModularScale {
    ModularScale::new(1.0).unwrap()
}

fn smp_wave(n: usize, sigma: f64, points: usize) -> GridWave {
    let p = ModularStateParams::new(n, 0.0, 0, 1.0, Envelope::gaussian(sigma).unwrap());
    let s = build_smp(&p).unwrap();
    let spec = single_grid_spec(&s, points, DEFAULT_HALFWIDTH_SIGMAS, Some(unit())).unwrap();
    discretize_single(&s, spec, Some(unit())).unwrap()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn amplitudes(state: &GridState) -> Vec<Complex64> {
    match state {
        GridState::Single(w) => w.amplitudes().to_vec(),
        GridState::Dense(d) => d.amplitudes().to_vec(),
        GridState::Pair(p) => p.to_dense().unwrap().amplitudes().to_vec(),
    }
}

/// Superposition of Gaussian packets `(coeff, x0, sigma, p0)` sampled on `spec`.
fn packet_sum(spec: GridSpec, packets: &[(Complex64, f64, f64, f64)]) -> GridWave {
    GridWave::sample(spec, |x| {
        packets
            .iter()
            .map(|&(c, x0, s, p0)| c * Complex64::from_polar((-(x - x0).powi(2) / (4.0 * s * s)).exp(), p0 * x))
            .sum()
    })
    .normalized()
    .unwrap()
}

#[test]
fn smp_moments_match_closed_forms() {
    let w = smp_wave(2, 5.0, 1 << 16);
    let vx = observable_variance(&w, Observable::XMod, unit()).unwrap();
    assert_relative_eq!(vx, smp_modular_position_variance(2, unit()).unwrap(), max_relative = 1e-4);
    let vn = observable_variance(&w, Observable::Np, unit()).unwrap();
    assert!((vn - 0.25).abs() < 1e-6, "{vn}");
    for n in 1..=6 {
        let w = smp_wave(n, 5.0, 1 << 14);
        let vn = observable_variance(&w, Observable::Np, unit()).unwrap();
        assert!((vn - smp_integer_momentum_variance(n).unwrap()).abs() < 1e-6);
    }
}

#[test]
fn smp_commutators_match_closed_form() {
    for n in 1..=6 {
        let w = smp_wave(n, 5.0, 1 << 16);
        let c = commutator_expectation(&w, CommutatorPair::XModNp, unit()).unwrap();
        let expect = smp_commutator_expectation(n, unit()).unwrap();
        assert!(c.re.abs() < 1e-10, "commutator should be imaginary: {c}");
        assert!((c.norm() - expect).abs() < 1e-5, "N={n}: {} vs {expect}", c.norm());
        if n == 1 {
            assert!(c.norm() < 1e-8);
        }
    }
}

#[test]
fn robertson_relation_holds_on_smp_states() {
    for n in 1..=10 {
        let w = smp_wave(n, 5.0, 1 << 14);
        let vx = observable_variance(&w, Observable::XMod, unit()).unwrap();
        let vn = observable_variance(&w, Observable::Np, unit()).unwrap();
        let c = commutator_expectation(&w, CommutatorPair::XModNp, unit()).unwrap();
        assert!(vx * vn >= c.norm_sqr() / 4.0 - 1e-12, "N={n}");
    }
}

#[test]
fn mpe_pair_moments() {
    for n in [2, 3, 5] {
        let p = ModularStateParams::new(n, 0.0, 0, 1.0, Envelope::gaussian(5.0).unwrap());
        let m: MixtureState = build_mpe(&p).unwrap().into();
        let specs = pair_grid_specs(&m, 1 << 12, DEFAULT_HALFWIDTH_SIGMAS, Some(unit())).unwrap();
        let g = discretize_mixture(&m, specs, Some(unit())).unwrap();
        let v = observable_variance(&g, Observable::NpTot, unit()).unwrap();
        assert!(v.abs() < 1e-8, "N={n}: {v}");
    }
    let p = ModularStateParams::new(2, 0.0, 0, 1.0, Envelope::gaussian(5.0).unwrap());
    let m: MixtureState = build_mpe(&p).unwrap().into();
    let specs = pair_grid_specs(&m, 1 << 16, DEFAULT_HALFWIDTH_SIGMAS, Some(unit())).unwrap();
    let g = discretize_mixture(&m, specs, Some(unit())).unwrap();
    let v = observable_variance(&g, Observable::XModRel, unit()).unwrap();
    assert_relative_eq!(v, (1.0 - 3.0 / std::f64::consts::PI.powi(2)) / 6.0, max_relative = 1e-4);
}

#[test]
fn structured_pair_moments_agree_with_dense_grid() {
    let p = ModularStateParams::new(3, 0.2, 1, 1.0, Envelope::gaussian(1.2).unwrap());
    let m: MixtureState = build_mpe(&p).unwrap().into();
    let specs = [GridSpec::commensurate(0.2, 12.0, unit(), 512).unwrap(), GridSpec::commensurate(-0.2, 12.0, unit(), 512).unwrap()];
    let GridState::Pair(pair) = discretize_mixture(&m, specs, Some(unit())).unwrap().components()[0].1.clone() else {
        unreachable!()
    };
    let dense = pair.to_dense().unwrap();
    for obs in [Observable::XModRel, Observable::NpTot, Observable::NxTot, Observable::PModRel] {
        let a = pair.moments(obs, unit()).unwrap();
        let b = dense.moments(obs, unit()).unwrap();
        assert!((a.mean - b.mean).abs() < 1e-10 && (a.second - b.second).abs() < 1e-10, "{obs}");
    }
}

#[test]
fn modular_position_squared_by_double_application() {
    let spec = GridSpec::commensurate(0.0, 8.0, unit(), 1024).unwrap();
    let w = packet_sum(spec, &[(Complex64::new(1.0, 0.0), 0.3, 1.0, 2.0)]);
    let once = apply_modular_operator(&w.clone().into(), Observable::XMod, unit()).unwrap();
    let twice = apply_modular_operator(&once, Observable::XMod, unit()).unwrap();
    let direct: Vec<Complex64> = spec
        .xs()
        .zip(w.amplitudes())
        .map(|(x, a)| {
            let xm = x - (x + 0.5).floor();
            a * xm * xm
        })
        .collect();
    for (a, b) in amplitudes(&twice).iter().zip(&direct) {
        assert!((a - b).norm() < 1e-12);
    }
}

#[test]
fn fourier_round_trip_is_unitary() {
    let spec = GridSpec::commensurate(0.0, 8.0, unit(), 1024).unwrap();
    let w = packet_sum(spec, &[(Complex64::new(1.0, 0.5), -1.0, 0.7, 5.0), (Complex64::new(0.2, -1.0), 2.0, 1.1, -3.0)]);
    let mom = to_momentum(&spec, w.amplitudes());
    let norm_p: f64 = mom.iter().map(|a| a.norm_sqr()).sum::<f64>() * spec.dp();
    assert!((norm_p - 1.0).abs() < 1e-12);
    let back = to_position(&spec, &mom);
    for (a, b) in back.iter().zip(w.amplitudes()) {
        assert!((a - b).norm() < 1e-12);
    }
}

#[test]
fn momentum_observables_need_commensurate_boxes() {
    let spec = GridSpec::new(1024, -7.3, 7.3).unwrap();
    let w = packet_sum(spec, &[(Complex64::new(1.0, 0.0), 0.0, 1.0, 0.0)]);
    assert!(matches!(
        observable_variance(&w, Observable::Np, unit()),
        Err(modvar::Error::Incommensurate { .. })
    ));
    assert!(observable_variance(&w, Observable::XMod, unit()).is_ok());
    assert!(matches!(observable_variance(&w, Observable::XModRel, unit()), Err(modvar::Error::Arity { .. })));
}

#[test]
fn csv_round_trip() {
    let spec = GridSpec::commensurate(0.0, 4.0, unit(), 256).unwrap();
    let w = packet_sum(spec, &[(Complex64::new(1.0, 0.0), 0.1, 0.8, 1.0)]);
    let mut buf = Vec::new();
    write_csv(&w.clone().into(), &mut buf).unwrap();
    let back = read_csv(&buf[..]).unwrap();
    let GridState::Single(back) = back else { panic!("expected a single-particle grid") };
    for (a, b) in back.amplitudes().iter().zip(w.amplitudes()) {
        assert!((a - b).norm() < 1e-14);
    }
    assert!((back.spec().dx() - spec.dx()).abs() < 1e-12);
}

fn random_packets() -> impl Strategy<Value = Vec<(Complex64, f64, f64, f64)>> {
    prop::collection::vec(
        ((-1.0f64..1.0, -1.0f64..1.0), -3.0f64..3.0, 0.15f64..2.0, -12.0f64..12.0)
            .prop_map(|((re, im), x0, s, p0)| (Complex64::new(re, im), x0, s, p0)),
        1..5,
    )
    .prop_filter("nonzero amplitude", |v| v.iter().any(|(c, ..)| c.norm() > 0.05))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn additive_uncertainty_floor(packets in random_packets()) {
        let spec = GridSpec::commensurate(0.0, 16.0, unit(), 4096).unwrap();
        let w = packet_sum(spec, &packets);
        let total = observable_variance(&w, Observable::Np, unit()).unwrap()
            + observable_variance(&w, Observable::XMod, unit()).unwrap();
        prop_assert!(total >= criterion_constant() - 1e-4, "{}", total);
    }

    #[test]
    fn variances_ignore_global_phase(packets in random_packets(), theta in 0.0f64..6.3) {
        let spec = GridSpec::commensurate(0.0, 16.0, unit(), 2048).unwrap();
        let w = packet_sum(spec, &packets);
        let rotated = GridWave::new(spec, w.amplitudes().iter().map(|a| a * Complex64::from_polar(1.0, theta)).collect()).unwrap();
        for obs in [Observable::X, Observable::P, Observable::Nx, Observable::Np, Observable::XMod, Observable::PMod] {
            let a = observable_variance(&w, obs, unit()).unwrap();
            let b = observable_variance(&rotated, obs, unit()).unwrap();
            prop_assert!(a >= 0.0);
            prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0));
        }
    }

    #[test]
    fn single_particle_operators_are_hermitian(
        re in prop::collection::vec(-1.0f64..1.0, 256),
        im in prop::collection::vec(-1.0f64..1.0, 256),
        re2 in prop::collection::vec(-1.0f64..1.0, 256),
        im2 in prop::collection::vec(-1.0f64..1.0, 256),
    ) {
        let spec = GridSpec::commensurate(0.0, 4.0, unit(), 256).unwrap();
        let psi = GridWave::new(spec, re.iter().zip(&im).map(|(a, b)| Complex64::new(*a, *b)).collect()).unwrap();
        let phi = GridWave::new(spec, re2.iter().zip(&im2).map(|(a, b)| Complex64::new(*a, *b)).collect()).unwrap();
        for obs in [Observable::X, Observable::P, Observable::Nx, Observable::Np, Observable::XMod, Observable::PMod] {
            let a_phi = amplitudes(&apply_modular_operator(&phi.clone().into(), obs, unit()).unwrap());
            let a_psi = amplitudes(&apply_modular_operator(&psi.clone().into(), obs, unit()).unwrap());
            let lhs = dot(psi.amplitudes(), &a_phi);
            let rhs = dot(&a_psi, phi.amplitudes());
            prop_assert!((lhs - rhs).norm() < 1e-10 * (1.0 + lhs.norm()), "{obs}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn pair_operators_are_hermitian(
        re in prop::collection::vec(-1.0f64..1.0, 32 * 32),
        im in prop::collection::vec(-1.0f64..1.0, 32 * 32),
    ) {
        let spec = GridSpec::commensurate(0.0, 2.0, unit(), 32).unwrap();
        let psi = GridDense::new([spec, spec], re.iter().zip(&im).map(|(a, b)| Complex64::new(*a, *b)).collect()).unwrap();
        let phi = GridDense::new([spec, spec], im.iter().zip(re.iter().rev()).map(|(a, b)| Complex64::new(*a, *b)).collect()).unwrap();
        for obs in [Observable::XModRel, Observable::NpTot, Observable::NxTot, Observable::PModRel] {
            let a_phi = amplitudes(&apply_modular_operator(&phi.clone().into(), obs, unit()).unwrap());
            let a_psi = amplitudes(&apply_modular_operator(&psi.clone().into(), obs, unit()).unwrap());
            let lhs = dot(psi.amplitudes(), &a_phi);
            let rhs = dot(&a_psi, phi.amplitudes());
            prop_assert!((lhs - rhs).norm() < 1e-10 * (1.0 + lhs.norm()), "{obs}");
        }
    }
}
