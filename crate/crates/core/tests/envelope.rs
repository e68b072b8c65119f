use parahom_core::envelope::{
    convex_envelope_slice, midpoint_violation, monotone_envelope, running_min, subdiff_measure_contact, subdiff_measure_fiber,
    subdiff_measure_fiber_on,
};
use parahom_core::lattice::{grid_for_cube, CubeIndex, Field, GridSpec};
use proptest::prelude::*;

fn grid(d: usize) -> GridSpec {
    grid_for_cube(&CubeIndex::origin(d, 0), 6, 1.0).unwrap()
}

fn field(d: usize) -> impl Strategy<Value = Field> {
    let g = grid(d);
    proptest::collection::vec(-1.0f64..1.0, g.len()).prop_map(move |v| Field::from_values(g, v).unwrap())
}

fn sup(a: &Field, b: &Field) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn envelope_is_an_idempotent_minorant(d in 1usize..=2, u in (1usize..=2).prop_flat_map(field)) {
        let _ = d;
        let e = monotone_envelope(&u);
        let tol = 1e-9;
        for (g, v) in e.gamma.values().iter().zip(u.values()) {
            prop_assert!(*g <= v + tol);
        }
        let again = monotone_envelope(&e.gamma);
        prop_assert!(sup(&again.gamma, &e.gamma) <= tol);
    }

    #[test]
    fn envelope_slices_are_convex_and_decrease_in_time(u in (1usize..=2).prop_flat_map(field)) {
        let e = monotone_envelope(&u);
        let g = *u.grid();
        for k in 0..g.slices() {
            prop_assert!(midpoint_violation(e.gamma.slice(k), g.nodes[0], g.nodes[1]) <= 1e-9);
            if k > 0 {
                for v in 0..g.slice_len() {
                    prop_assert!(e.gamma.at(k, v) <= e.gamma.at(k - 1, v) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn envelope_commutes_with_affine_terms(
        u in (1usize..=2).prop_flat_map(field),
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
        c in -1.0f64..1.0,
    ) {
        let tilted = Field::from_fn(*u.grid(), |_, _| 0.0);
        let g = *u.grid();
        let mut tilted = tilted;
        for k in 0..g.slices() {
            for v in 0..g.slice_len() {
                let x = g.node_position(v);
                tilted.slice_mut(k)[v] = u.at(k, v) + a * x[0] + b * x[1] + c;
            }
        }
        let lhs = monotone_envelope(&tilted).gamma;
        let rhs = monotone_envelope(&u).gamma;
        for k in 0..g.slices() {
            for v in 0..g.slice_len() {
                let x = g.node_position(v);
                prop_assert!((lhs.at(k, v) - rhs.at(k, v) - a * x[0] - b * x[1] - c).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn running_min_is_nonincreasing(u in (1usize..=2).prop_flat_map(field)) {
        let m = running_min(&u);
        let g = *u.grid();
        for k in 1..g.slices() {
            for v in 0..g.slice_len() {
                prop_assert!(m.at(k, v) <= m.at(k - 1, v));
                prop_assert!(m.at(k, v) <= u.at(k, v));
            }
        }
    }

    #[test]
    fn fiber_measure_sees_only_the_envelope(u in field(1)) {
        let e = monotone_envelope(&u);
        let m = subdiff_measure_fiber(&u, None).unwrap();
        let a = m.value;
        let b = subdiff_measure_fiber_on(&e.gamma, &m.slopes.unwrap()).value;
        prop_assert!(a >= 0.0);
        prop_assert!(subdiff_measure_contact(&e).value >= 0.0);
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn negative_abs_flattens_to_minus_one() {
    let n = 121;
    let dx = 2.0 / (n - 1) as f64;
    let v: Vec<f64> = (0..n).map(|i| -(-1.0 + i as f64 * dx).abs()).collect();
    let out = convex_envelope_slice(&v, [n, 1], 1);
    assert!(out.iter().all(|w| (w + 1.0).abs() <= 1e-10));
}

#[test]
fn double_well_has_a_flat_bottom() {
    let n = 121;
    let dx = 3.0 / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| -1.5 + i as f64 * dx).collect();
    let v: Vec<f64> = xs.iter().map(|x| x.powi(4) - x * x).collect();
    let out = convex_envelope_slice(&v, [n, 1], 1);
    // Exact continuum envelope is -1/4 on |x| ≤ 1/√2; the grid adds O(dx²).
    for (x, w) in xs.iter().zip(&out) {
        if x.abs() < 0.65 {
            assert!((w + 0.25).abs() < 2e-3, "{x}: {w}");
        }
        if x.abs() > 0.8 {
            assert!((w - (x.powi(4) - x * x)).abs() < 1e-12, "{x}: {w}");
        }
    }
}

#[test]
fn constant_density_paraboloids() {
    for (b, m, tol) in [(1.0, 1.0, 0.02), (2.0, 2.0, 0.02), (0.5, 3.0, 0.02)] {
        let g = grid_for_cube(&CubeIndex::origin(1, 0), 60, m * b).unwrap();
        let w = Field::from_fn(g, |x, t| -b * t + 0.5 * m * x[0] * x[0]);
        let want = b * m;
        let fiber = subdiff_measure_fiber(&w, None).unwrap().value;
        assert!((fiber - want).abs() <= tol * want, "fiber {fiber} vs {want}");
        let contact = subdiff_measure_contact(&monotone_envelope(&w)).value;
        assert!((contact - want).abs() <= 0.03 * want, "contact {contact} vs {want}");
    }
}
