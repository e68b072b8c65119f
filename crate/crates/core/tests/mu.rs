use parahom_core::environment::{Environment, EnvironmentSpec, SymMatrix};
use parahom_core::exec::Sequential;
use parahom_core::lattice::CubeIndex;
use parahom_core::mu::{check_bounds, estimate_mu, estimate_mu_pair, estimate_mu_star, mc_moments, MuConfig};
use proptest::prelude::*;

fn cfg() -> MuConfig {
    MuConfig::default()
}

#[test]
fn negative_shift_makes_two_phase_measure_positive() {
    // inf F(M) = λ·2 > 0 when M = -2, so the lower bound forces positivity.
    let env = Environment::new(EnvironmentSpec::two_phase(1, 5)).unwrap();
    let s = estimate_mu(&env, &CubeIndex::origin(1, 1), 0.0, &SymMatrix::scalar(1, -2.0), &cfg()).unwrap();
    assert!(s.value > 0.0, "{}", s.value);
    assert!(check_bounds(&env, &s, 0.1).passed());
}

#[test]
fn above_sup_operator_measure_vanishes() {
    let env = Environment::new(EnvironmentSpec::two_phase(1, 5)).unwrap();
    // sup F(M = 1) = -λ = -0.5
    for ell in [-0.5, 0.0, 1.0] {
        let s = estimate_mu(&env, &CubeIndex::origin(1, 1), ell, &SymMatrix::scalar(1, 1.0), &cfg()).unwrap();
        assert_eq!(s.value, 0.0, "ell {ell}");
    }
}

#[test]
fn constant_environment_mirror_cases() {
    let env = Environment::new(EnvironmentSpec::constant(1, 1.0, 0.3)).unwrap();
    let c = CubeIndex::origin(1, 0);
    let z = SymMatrix::zero(1);
    assert!(estimate_mu_star(&env, &c, 1.3, &z, &cfg()).unwrap().value > 0.0);
    assert_eq!(estimate_mu_star(&env, &c, -0.7, &z, &cfg()).unwrap().value, 0.0);
    assert!(estimate_mu(&env, &c, -0.7, &z, &cfg()).unwrap().value >= 0.125 * 0.9);
}

#[test]
fn moment_ci_matches_sample_spread() {
    let spec = EnvironmentSpec::two_phase(1, 3);
    let seeds: Vec<u64> = (0..40).collect();
    let st = mc_moments(&spec, 0, -0.5, &SymMatrix::scalar(1, 1.0), &seeds, &cfg(), &Sequential).unwrap();
    assert_eq!(st.n, 40);
    assert!(st.e.ci <= 2.0 * st.e.sd / (40f64).sqrt() + 1e-15);
    assert!(st.j.mean >= st.e.mean * st.e.mean - 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn double_involution_is_identity(seed in any::<u64>(), ell in -1.5f64..1.5, m in -2.0f64..2.0, hjb in any::<bool>()) {
        let mut spec = EnvironmentSpec::two_phase(1, seed);
        spec.offset_range = (-0.3, 0.3);
        if hjb {
            spec.family = parahom_core::environment::Family::HjbMin;
        }
        let env = Environment::new(spec).unwrap();
        let c = CubeIndex::origin(1, 0);
        let shift = SymMatrix::scalar(1, m);
        let plain = estimate_mu(&env, &c, ell, &shift, &cfg()).unwrap();
        let twice = estimate_mu_star(&env.involute(), &c, -ell, &shift.neg(), &cfg()).unwrap();
        prop_assert_eq!(plain.value.to_bits(), twice.value.to_bits());
    }

    #[test]
    fn paired_solve_matches_separate_estimates(seed in any::<u64>(), ell in -1.5f64..1.5, m in -2.0f64..2.0) {
        let env = Environment::new(EnvironmentSpec::two_phase(1, seed)).unwrap();
        let c = CubeIndex::origin(1, 0);
        let shift = SymMatrix::scalar(1, m);
        let (a, b) = estimate_mu_pair(&env, &c, ell, &shift, &cfg()).unwrap();
        prop_assert_eq!(a.value.to_bits(), estimate_mu(&env, &c, ell, &shift, &cfg()).unwrap().value.to_bits());
        prop_assert_eq!(b.value.to_bits(), estimate_mu_star(&env, &c, ell, &shift, &cfg()).unwrap().value.to_bits());
    }

    #[test]
    fn measure_is_nonincreasing_in_ell(seed in any::<u64>(), ell in -1.5f64..1.0, gap in 0.01f64..0.5) {
        let env = Environment::new(EnvironmentSpec::two_phase(1, seed)).unwrap();
        let c = CubeIndex::origin(1, 0);
        let shift = SymMatrix::scalar(1, 1.0);
        let lo = estimate_mu(&env, &c, ell, &shift, &cfg()).unwrap().value;
        let hi = estimate_mu(&env, &c, ell + gap, &shift, &cfg()).unwrap().value;
        prop_assert!(hi <= lo * (1.0 + 1e-9) + 1e-12, "{lo} then {hi}");
    }

    #[test]
    fn bounds_hold_on_random_samples(seed in any::<u64>(), ell in -2.0f64..2.0, m in -2.0f64..2.0, level in 0i32..=1) {
        let env = Environment::new(EnvironmentSpec::two_phase(1, seed)).unwrap();
        let s = estimate_mu(&env, &CubeIndex::origin(1, level), ell, &SymMatrix::scalar(1, m), &cfg()).unwrap();
        prop_assert!(s.value >= 0.0);
        prop_assert!(check_bounds(&env, &s, 0.1).passed());
    }
}
