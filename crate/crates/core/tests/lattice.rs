use parahom_core::lattice::{cube_of_point, grid_for_cube, CubeIndex, Field};
use proptest::prelude::*;

fn cube() -> impl Strategy<Value = CubeIndex> {
    (1usize..=2, -2i32..=3, -20i64..20, -20i64..20, -20i64..20).prop_map(|(d, n, a, b, t)| CubeIndex::new(d, n, [a, b], t))
}

proptest! {
    #[test]
    fn children_partition_the_parent(c in cube()) {
        let kids = c.children();
        prop_assert_eq!(kids.len(), 3usize.pow(c.dim as u32 + 2));
        let total: f64 = kids.iter().map(|k| k.volume()).sum();
        prop_assert!((total - c.volume()).abs() <= 1e-9 * c.volume());
        for k in &kids {
            prop_assert_eq!(k.parent(), c);
        }
        let mut sorted = kids.clone();
        sorted.sort_by_key(|k| (k.space, k.time));
        sorted.dedup();
        prop_assert_eq!(sorted.len(), kids.len());
    }

    #[test]
    fn point_lookup_is_consistent(n in -2i32..=3, x in -50.0f64..50.0, y in -50.0f64..50.0, t in -50.0f64..50.0) {
        for p in [&[x][..], &[x, y][..]] {
            let c = cube_of_point(n, p, t);
            prop_assert!(c.contains(p, t), "{c:?} misses {p:?}, {t}");
            prop_assert_eq!(cube_of_point(n + 1, p, t), c.parent());
        }
    }

    #[test]
    fn restriction_to_a_child_keeps_values(d in 1usize..=2, pick in 0usize..81) {
        let parent = CubeIndex::origin(d, 1);
        let grid = grid_for_cube(&parent, 3, 1.0).unwrap();
        let f = Field::from_fn(grid, |x, t| x[0] - 2.0 * x[1] + 3.0 * t);
        let kids = parent.children();
        let child = kids[pick % kids.len()];
        let r = f.restrict(&child).unwrap();
        let g = *r.grid();
        for k in 0..g.slices() {
            for v in 0..g.slice_len() {
                let x = g.node_position(v);
                let want = x[0] - 2.0 * x[1] + 3.0 * g.slice_time(k);
                prop_assert!((r.at(k, v) - want).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn grandchildren_are_disjoint() {
    for d in [1, 2] {
        let c = CubeIndex::origin(d, 2);
        let mut all: Vec<_> = c.children().iter().flat_map(|k| k.children()).collect();
        let n = all.len();
        assert_eq!(n, 3usize.pow(2 * (d as u32 + 2)));
        all.sort_by_key(|k| (k.space, k.time));
        all.dedup();
        assert_eq!(all.len(), n);
    }
}
