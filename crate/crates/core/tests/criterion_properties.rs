use approx::assert_relative_eq;
use modvar::criterion::*;
use modvar::grid::{observable_variance, Observable};
use modvar::modular::squeezing_s2;
use modvar::spectral::solve_c;
use modvar::states::*;
use modvar::ModularScale;
use num_complex::Complex64;
use proptest::prelude::*;

fn unit() -> ModularScale {
    ModularScale::new(1.0).unwrap()
}

fn params(n: usize, lambda: f64) -> ModularStateParams {
    ModularStateParams::new(n, 0.0, 0, lambda, Envelope::gaussian(5.0 * lambda).unwrap())
}

fn lhs(state: &MixtureState, scale: ModularScale, points: usize) -> CriterionReport {
    evaluate_criterion(state, scale, CriterionAxis::MomentumInteger, GridOptions::with_points(points)).unwrap()
}

#[test]
fn mpe_violates_for_every_n_from_two_to_fifty() {
    let bound = 2.0 * solve_c(1e-12).unwrap().c;
    for n in 2..=50 {
        let l = mpe_closed_form_lhs(n).unwrap();
        assert_relative_eq!(l, (1.0 - squeezing_s2(n).unwrap()) / 6.0, epsilon = 1e-15);
        assert!(l < bound, "N={n}");
    }
    assert!(mpe_closed_form_lhs(1).unwrap() > bound);
}

#[test]
fn grid_lhs_matches_closed_form() {
    for n in [2, 3, 4] {
        let state: MixtureState = build_mpe(&params(n, 1.0)).unwrap().into();
        let r = lhs(&state, unit(), 1 << 16);
        let closed = mpe_closed_form_lhs(n).unwrap();
        assert!(((r.lhs - closed) / closed).abs() < 1e-4, "N={n}: {} vs {closed}", r.lhs);
        assert!(r.violated && !r.marginal);
        assert!(r.var_n_tot.abs() < 1e-8);
    }
}

#[test]
fn product_and_classical_states_pass() {
    let single: MixtureState = build_mpe(&params(1, 1.0)).unwrap().into();
    let r = lhs(&single, unit(), 1 << 14);
    assert!(!r.violated);
    assert!((r.lhs - 1.0 / 6.0).abs() < 1e-3);
    for n in [2, 3, 6] {
        let r = lhs(&build_classical_correlated(&params(n, 1.0)).unwrap(), unit(), 1 << 14);
        assert!(!r.violated, "N={n}");
        assert!((r.lhs - 1.0 / 6.0).abs() < 1e-3, "N={n}: {}", r.lhs);
        assert!(r.var_n_tot.abs() < 1e-8);
    }
}

#[test]
fn report_is_scale_invariant() {
    let a = lhs(&build_mpe(&params(3, 1.0)).unwrap().into(), unit(), 1 << 14);
    let scale = ModularScale::new(3.7).unwrap();
    let b = lhs(&build_mpe(&params(3, 3.7)).unwrap().into(), scale, 1 << 14);
    assert_relative_eq!(a.lhs, b.lhs, max_relative = 1e-10);
    assert_relative_eq!(b.var_mod_rel, a.var_mod_rel * 3.7 * 3.7, max_relative = 1e-10);
    assert_eq!(a.violated, b.violated);
}

#[test]
fn admixture_endpoints_reproduce_pure_cases() {
    let p = params(2, 1.0);
    let pure = lhs(&build_mpe(&p).unwrap().into(), unit(), 1 << 14).lhs;
    let cls = lhs(&build_classical_correlated(&p).unwrap(), unit(), 1 << 14).lhs;
    assert_relative_eq!(lhs(&build_admixture(&p, 0.0).unwrap(), unit(), 1 << 14).lhs, pure, max_relative = 1e-12);
    assert_relative_eq!(lhs(&build_admixture(&p, 1.0).unwrap(), unit(), 1 << 14).lhs, cls, max_relative = 1e-12);
}

#[test]
fn mixture_lhs_follows_total_variance_law() {
    let p = params(3, 1.0);
    let a: MixtureState = build_mpe(&p).unwrap().into();
    let b = build_classical_correlated(&p).unwrap();
    let grid = GridOptions::with_points(1 << 13);
    for w in [0.1, 0.5, 0.8] {
        let m = MixtureState::combine(vec![(1.0 - w, a.clone()), (w, b.clone())]).unwrap();
        let gm = grid.discretize(&m, unit()).unwrap();
        // recompute the law by hand over the discretized pure components
        let mut mean = (0.0, 0.0);
        let mut second = (0.0, 0.0);
        let mut weighted_lhs = 0.0;
        for (wi, comp) in gm.components() {
            let vm = observable_variance(comp, Observable::XModRel, unit()).unwrap();
            let vn = observable_variance(comp, Observable::NpTot, unit()).unwrap();
            let mm = modvar::grid::Measurable::moments(comp, Observable::XModRel, unit()).unwrap().mean;
            let mn = modvar::grid::Measurable::moments(comp, Observable::NpTot, unit()).unwrap().mean;
            mean = (mean.0 + wi * mm, mean.1 + wi * mn);
            second = (second.0 + wi * (vm + mm * mm), second.1 + wi * (vn + mn * mn));
            weighted_lhs += wi * (vm + vn);
        }
        let by_hand = second.0 - mean.0 * mean.0 + second.1 - mean.1 * mean.1;
        let r = evaluate_grid_criterion(&gm, unit(), CriterionAxis::MomentumInteger).unwrap();
        assert_relative_eq!(r.lhs, by_hand, max_relative = 1e-10);
        assert!(r.lhs >= weighted_lhs - 1e-12);
    }
}

#[test]
fn robustness_threshold_examples() {
    let r = robustness_threshold(&params(2, 1.0), GridOptions::with_points(1 << 14)).unwrap();
    assert!((0.79..=0.80).contains(&r.epsilon_closed_form));
    assert!((0.79..=0.80).contains(&r.epsilon_bisection));
    assert!((r.visibility_at_threshold - 0.21).abs() <= 0.01);
    assert!(!r.flagged);
    assert!(robustness_threshold_closed_form(1).is_err());
    let c = solve_c(1e-12).unwrap().c;
    assert!((robustness_threshold_closed_form(10_000).unwrap() - 12.0 * c).abs() < 1e-2);
}

#[test]
fn robustness_improves_with_n_and_both_methods_agree() {
    let mut prev = (0.0, 0.0);
    for n in 2..=10 {
        let r = robustness_threshold(&params(n, 1.0), GridOptions::with_points(1 << 14)).unwrap();
        assert!(r.discrepancy < 1e-3, "N={n}: {}", r.discrepancy);
        assert!(r.epsilon_closed_form > prev.0 && r.epsilon_bisection > prev.1, "N={n}");
        prev = (r.epsilon_closed_form, r.epsilon_bisection);
    }
}

#[test]
fn admixture_visibility() {
    assert_relative_eq!(visibility_of_admixture(0.0, 2).unwrap(), 1.0, epsilon = 1e-12);
    assert!(visibility_of_admixture(1.0, 2).unwrap().abs() < 1e-12);
    assert_relative_eq!(visibility_of_admixture(0.79, 2).unwrap(), 0.21, epsilon = 1e-9);
    for n in 2..8 {
        let mut prev = 2.0;
        for k in 0..=10 {
            let v = visibility_of_admixture(k as f64 / 10.0, n).unwrap();
            assert!((0.0..=1.0).contains(&v) && v < prev);
            prev = v;
        }
    }
    assert!(visibility_of_admixture(1.5, 2).is_err());
}

#[test]
fn position_axis_is_available() {
    let state: MixtureState = build_mpe(&params(2, 1.0)).unwrap().into();
    let r = evaluate_criterion(&state, unit(), CriterionAxis::PositionInteger, GridOptions::with_points(1 << 14)).unwrap();
    assert!(r.lhs >= 0.0 && r.var_n_tot >= 0.0 && r.var_mod_rel >= 0.0);
}

fn packet() -> impl Strategy<Value = (f64, f64, f64, f64, f64)> {
    (-1.0f64..1.0, -1.0f64..1.0, -3.0f64..3.0, 0.3f64..3.0, -15.0f64..15.0)
}

fn superposed(packets: &[(f64, f64, f64, f64, f64)]) -> SuperposedState {
    let terms = packets
        .iter()
        .map(|&(re, im, x0, s, p0)| {
            let c = Complex64::new(re, im);
            let c = if c.norm() < 1e-3 { Complex64::new(1.0, 0.0) } else { c };
            (c, WavePacket::new(Envelope::gaussian(s).unwrap(), x0, p0, 0.0).unwrap())
        })
        .collect();
    SuperposedState::new(terms).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn separable_states_never_violate(
        products in prop::collection::vec(
            (0.05f64..1.0, prop::collection::vec(packet(), 1..4), prop::collection::vec(packet(), 1..4)),
            1..4,
        )
    ) {
        let components = products
            .iter()
            .map(|(w, a, b)| (*w, TwoParticleState::product(&superposed(a), &superposed(b)).unwrap()))
            .collect();
        let state = mix(components).unwrap();
        let r = lhs(&state, unit(), 4096);
        prop_assert!(!r.violated, "lhs {} below bound {}", r.lhs, r.bound);
    }
}
