//! Lower convex hulls and discrete convex envelopes of one time slice.

use alloc::vec::Vec;

/// Vertex indices of the lower convex hull of `(i, v[i])`.
///
/// Only points strictly above a chord are dropped, so collinear points stay
/// vertices and convex input is reproduced exactly.
pub fn lower_hull(v: &[f64]) -> Vec<usize> {
    let mut h: Vec<usize> = Vec::with_capacity(v.len());
    for c in 0..v.len() {
        while h.len() >= 2 {
            let a = h[h.len() - 2];
            let b = h[h.len() - 1];
            // b above the chord a-c
            if (v[b] - v[a]) * (c - a) as f64 > (v[c] - v[a]) * (b - a) as f64 {
                h.pop();
            } else {
                break;
            }
        }
        h.push(c);
    }
    h
}

/// Largest convex sequence below `v`, evaluated piecewise-linearly between
/// hull vertices. Vertex values are copied exactly.
pub fn convex_minorant_1d(v: &[f64], out: &mut [f64]) {
    let h = lower_hull(v);
    out[h[0]] = v[h[0]];
    for w in h.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (va, vb) = (v[a], v[b]);
        let span = (b - a) as f64;
        for (i, o) in out.iter_mut().enumerate().take(b).skip(a + 1) {
            *o = va + (vb - va) * ((i - a) as f64 / span);
        }
        out[b] = vb;
    }
}

/// Relaxation directions for `d = 2`: both axes and both diagonals.
const DIRECTIONS: [(isize, isize); 4] = [(1, 0), (0, 1), (1, 1), (1, -1)];

/// Largest function below `v` that is discretely convex along the axis and
/// diagonal lattice directions.
///
/// This is the fixed point of `v ← min(v, ½(v(x+e) + v(x-e)))` over those
/// directions. Each pass replaces every lattice line by its 1D convex minorant,
/// which reaches the same fixed point in far fewer sweeps; passes stop once the
/// largest change drops below `1e-13` and the midpoint condition holds to `1e-10`.
pub fn convex_envelope_2d(v: &[f64], n0: usize, n1: usize) -> Vec<f64> {
    let mut cur = v.to_vec();
    let mut line = Vec::with_capacity(n0.max(n1));
    let mut hull = Vec::with_capacity(n0.max(n1));
    let mut idx = Vec::with_capacity(n0.max(n1));
    for _ in 0..10_000 {
        let mut change = 0.0f64;
        for &(d0, d1) in &DIRECTIONS {
            for start in line_starts(n0, n1, d0, d1) {
                idx.clear();
                let (mut i, mut j) = start;
                while i >= 0 && j >= 0 && (i as usize) < n0 && (j as usize) < n1 {
                    idx.push(i as usize * n1 + j as usize);
                    i += d0;
                    j += d1;
                }
                if idx.len() < 3 {
                    continue;
                }
                line.clear();
                line.extend(idx.iter().map(|&k| cur[k]));
                hull.clear();
                hull.resize(line.len(), 0.0);
                convex_minorant_1d(&line, &mut hull);
                for (&k, &h) in idx.iter().zip(hull.iter()) {
                    change = change.max(cur[k] - h);
                    cur[k] = h;
                }
            }
        }
        if change < 1e-13 && midpoint_violation(&cur, n0, n1) <= 1e-10 {
            break;
        }
    }
    cur
}

/// First node of every lattice line with direction `(d0, d1)`.
fn line_starts(n0: usize, n1: usize, d0: isize, d1: isize) -> Vec<(isize, isize)> {
    let mut s = Vec::new();
    let (n0, n1) = (n0 as isize, n1 as isize);
    for i in 0..n0 {
        for j in 0..n1 {
            let (pi, pj) = (i - d0, j - d1);
            if pi < 0 || pj < 0 || pi >= n0 || pj >= n1 {
                s.push((i, j));
            }
        }
    }
    s
}

/// Largest `v(x) - ½(v(x+e) + v(x-e))` over nodes and directions (positive
/// values are convexity defects). Works for `d = 1` with `n1 = 1`.
pub fn midpoint_violation(v: &[f64], n0: usize, n1: usize) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    let dirs: &[(isize, isize)] = if n1 == 1 { &[(1, 0)] } else { &DIRECTIONS };
    for i in 0..n0 as isize {
        for j in 0..n1 as isize {
            for &(d0, d1) in dirs {
                let (a0, a1, b0, b1) = (i + d0, j + d1, i - d0, j - d1);
                if a0 < 0 || b0 < 0 || a1 < 0 || b1 < 0 {
                    continue;
                }
                let (a0, a1, b0, b1) = (a0 as usize, a1 as usize, b0 as usize, b1 as usize);
                if a0 >= n0 || b0 >= n0 || a1 >= n1 || b1 >= n1 {
                    continue;
                }
                let c = v[i as usize * n1 + j as usize];
                let m = 0.5 * (v[a0 * n1 + a1] + v[b0 * n1 + b1]);
                worst = worst.max(c - m);
            }
        }
    }
    worst.max(0.0)
}

/// `min_i (v_i - p x_i)` over hull vertices for every slope in increasing
/// order, with `x_i = x0 + i dx`.
///
/// Calls `emit(slope_index, value, argmin_vertices)`; the last argument lists
/// every hull vertex attaining the computed minimum.
pub fn conjugate_walk(
    v: &[f64],
    hull: &[usize],
    x0: f64,
    dx: f64,
    slopes: &[f64],
    mut emit: impl FnMut(usize, f64, &[usize]),
) {
    let val = |h: usize, p: f64| v[h] - p * (x0 + h as f64 * dx);
    let mut ptr = 0usize;
    let mut ties: Vec<usize> = Vec::with_capacity(4);
    for (s, &p) in slopes.iter().enumerate() {
        while ptr + 1 < hull.len() && val(hull[ptr + 1], p) <= val(hull[ptr], p) {
            ptr += 1;
        }
        let best = val(hull[ptr], p);
        ties.clear();
        ties.push(hull[ptr]);
        let mut back = ptr;
        while back > 0 && val(hull[back - 1], p) == best {
            back -= 1;
            ties.push(hull[back]);
        }
        emit(s, best, &ties);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convex_input_unchanged() {
        let v: Vec<f64> = (0..21).map(|i| ((i as f64) * 0.1 - 1.0).powi(2)).collect();
        let mut out = alloc::vec![0.0; v.len()];
        convex_minorant_1d(&v, &mut out);
        assert_eq!(out, v);
    }

    #[test]
    fn negative_abs_flattens() {
        let v: Vec<f64> = (0..21).map(|i| -((i as f64) * 0.1 - 1.0).abs()).collect();
        let mut out = alloc::vec![0.0; v.len()];
        convex_minorant_1d(&v, &mut out);
        assert!(out.iter().all(|&x| (x + 1.0).abs() < 1e-15));
    }

    #[test]
    fn two_dim_cone_is_kept() {
        // |x| + |y| is convex along every direction
        let n = 7;
        let v: Vec<f64> = (0..n * n)
            .map(|k| ((k / n) as f64 - 3.0).abs() + ((k % n) as f64 - 3.0).abs())
            .collect();
        let e = convex_envelope_2d(&v, n, n);
        for (a, b) in e.iter().zip(&v) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn two_dim_bump_is_removed() {
        let n = 9;
        let mut v = alloc::vec![0.0; n * n];
        v[4 * n + 4] = -1.0;
        let e = convex_envelope_2d(&v, n, n);
        assert!(midpoint_violation(&e, n, n) <= 1e-10);
        assert!(e.iter().zip(&v).all(|(a, b)| *a <= *b + 1e-12));
        assert!(e[4 * n + 4] <= -1.0 + 1e-12);
    }

    #[test]
    fn walk_matches_brute_force() {
        let v: Vec<f64> = (0..30).map(|i| libm::sin(i as f64 * 0.7) + 0.01 * (i * i) as f64).collect();
        let h = lower_hull(&v);
        let slopes: Vec<f64> = (-40..=40).map(|s| s as f64 * 0.05).collect();
        conjugate_walk(&v, &h, -1.0, 0.1, &slopes, |s, best, _| {
            let p = slopes[s];
            let brute = (0..v.len())
                .map(|i| v[i] - p * (-1.0 + i as f64 * 0.1))
                .fold(f64::INFINITY, f64::min);
            assert!((best - brute).abs() < 1e-12);
        });
    }
}
