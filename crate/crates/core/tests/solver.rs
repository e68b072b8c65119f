use parahom_core::environment::{Environment, EnvironmentSpec, SymMatrix};
use parahom_core::lattice::{cfl_bound, grid_for_cube, CubeIndex, GridSpec};
use parahom_core::solver::{solve_dirichlet, Boundary, SolveRequest};
use proptest::prelude::*;

fn heat_grid(dx: f64, a: f64, t: f64) -> GridSpec {
    let steps = (t / cfl_bound(dx, a, 1)).ceil();
    GridSpec::for_box(1, [0.0, 0.0], [1.0, 0.0], 0.0, t, dx, t / steps).unwrap()
}

fn heat_sup(dx: f64, a: f64, t: f64) -> f64 {
    let env = Environment::new(EnvironmentSpec::constant(1, a, 0.0)).unwrap();
    let g = |x: &[f64; 2]| (std::f64::consts::PI * x[0]).sin();
    let grid = heat_grid(dx, a, t);
    let sol = solve_dirichlet(&SolveRequest {
        env: &env,
        shift: SymMatrix::zero(1),
        ell: 0.0,
        grid,
        boundary: Boundary::Static(&g),
    })
    .unwrap();
    sol.field.slice(grid.steps).iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[test]
fn heat_mode_decays_at_the_continuum_rate() {
    for a in [0.5, 1.0] {
        let exact = (-a * std::f64::consts::PI.powi(2) * 0.1).exp();
        let got = heat_sup(1.0 / 64.0, a, 0.1);
        assert!((got / exact - 1.0).abs() < 0.05, "a={a}: {got} vs {exact}");
    }
}

#[test]
fn halving_dx_converges_at_first_order_or_better() {
    let exact = (-std::f64::consts::PI.powi(2) * 0.1).exp();
    let e1 = (heat_sup(1.0 / 16.0, 1.0, 0.1) - exact).abs();
    let e2 = (heat_sup(1.0 / 32.0, 1.0, 0.1) - exact).abs();
    assert!(e2 <= 0.55 * e1, "{e1} -> {e2}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ordered_data_give_ordered_solutions(seed in any::<u64>(), a in -1.0f64..1.0, b in -1.0f64..1.0, lift in 0.0f64..0.5, ell in -1.0f64..1.0) {
        let env = Environment::new(EnvironmentSpec::two_phase(1, seed)).unwrap();
        let grid = grid_for_cube(&CubeIndex::origin(1, 1), 3, 1.0).unwrap();
        let g1 = move |x: &[f64; 2]| a * x[0] + b * (3.0 * x[0]).sin();
        let g2 = move |x: &[f64; 2]| g1(x) + lift;
        let solve = |g: &(dyn Fn(&[f64; 2]) -> f64 + Sync)| {
            solve_dirichlet(&SolveRequest { env: &env, shift: SymMatrix::scalar(1, 0.5), ell, grid, boundary: Boundary::Static(g) }).unwrap().field
        };
        let u1 = solve(&g1);
        let u2 = solve(&g2);
        for (x, y) in u1.values().iter().zip(u2.values()) {
            prop_assert!(x <= y);
        }
    }

    #[test]
    fn larger_ell_raises_the_solution(seed in any::<u64>(), ell in -1.0f64..1.0, gap in 0.0f64..1.0) {
        let env = Environment::new(EnvironmentSpec::two_phase(1, seed)).unwrap();
        let grid = grid_for_cube(&CubeIndex::origin(1, 0), 9, 1.0).unwrap();
        let solve = |l: f64| {
            solve_dirichlet(&SolveRequest { env: &env, shift: SymMatrix::zero(1), ell: l, grid, boundary: Boundary::Zero }).unwrap().field
        };
        let lo = solve(ell);
        let hi = solve(ell + gap);
        for (x, y) in lo.values().iter().zip(hi.values()) {
            prop_assert!(x <= y);
        }
    }
}
