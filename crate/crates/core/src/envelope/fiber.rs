//! Parabolic subdifferential measure by slope fibers.
//!
//! For a slope `p`, let `g_k(p)` be the minimum of `u - p·x` over all nodes up to
//! slice `k`. The set of heights `h` with `(p, h)` in the subdifferential is the
//! union of the descents `g_k < g_{k-1}` whose new minimum is attained at a node
//! off the parabolic boundary. Integrating the fiber lengths over a slope grid
//! gives the measure.

use alloc::vec;
use alloc::vec::Vec;

use super::hull::{conjugate_walk, lower_hull};
use super::{MeasureMethod, SubdiffMeasure};
use crate::error::{Error, Result};
use crate::lattice::{Field, GridSpec};
use crate::math::ceil;
use crate::solver::SliceObserver;

/// Uniform slope grid `{i δp : |i| ≤ N}^d` covering `[-L, L]^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeGrid {
    pub dim: usize,
    pub step: f64,
    /// `N`; there are `2N + 1` slopes per axis.
    pub half: usize,
    /// `L = Lip + 2 δp`.
    pub range: f64,
    /// Largest discrete spatial difference quotient of the field.
    pub lipschitz: f64,
}

impl SlopeGrid {
    /// `step = None` picks `min(Δx, Lip/32)`: the slope spacing must resolve
    /// both the grid and the range of attained slopes.
    pub fn new(dim: usize, lipschitz: f64, dx: f64, step: Option<f64>) -> Result<Self> {
        let step = match step {
            Some(s) => s,
            None if lipschitz > 0.0 => dx.min(lipschitz / 32.0),
            None => dx,
        };
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::SlopeStep(step));
        }
        let range = lipschitz + 2.0 * step;
        let half = ceil(range / step - 1e-9) as usize;
        Ok(SlopeGrid {
            dim,
            step,
            half,
            range,
            lipschitz,
        })
    }

    /// Slopes along one axis, increasing.
    pub fn axis(&self) -> Vec<f64> {
        let n = self.half as i64;
        (-n..=n).map(|i| i as f64 * self.step).collect()
    }

    pub fn per_axis(&self) -> usize {
        2 * self.half + 1
    }

    pub fn count(&self) -> usize {
        self.per_axis().pow(self.dim as u32)
    }

    /// `δp^d`.
    pub fn cell(&self) -> f64 {
        if self.dim == 1 {
            self.step
        } else {
            self.step * self.step
        }
    }
}

/// Largest spatial difference quotient of one slice.
pub(crate) fn slice_lipschitz(slice: &[f64], grid: &GridSpec) -> f64 {
    let (n0, n1) = (grid.nodes[0], grid.nodes[1]);
    let mut m = 0.0f64;
    for i in 0..n0 {
        for j in 0..n1 {
            let v = slice[i * n1 + j];
            if i + 1 < n0 {
                m = m.max((slice[(i + 1) * n1 + j] - v).abs());
            }
            if grid.dim == 2 && j + 1 < n1 {
                m = m.max((slice[i * n1 + j + 1] - v).abs());
            }
        }
    }
    m / grid.dx
}

/// Largest discrete spatial Lipschitz constant over all slices.
pub fn lipschitz(u: &Field) -> f64 {
    let g = u.grid();
    (0..g.slices()).map(|k| slice_lipschitz(u.slice(k), g)).fold(0.0, f64::max)
}

/// `min_x (v(x) - p x)` for every slope of `slopes` (1D slice).
pub fn conjugate_1d(v: &[f64], x0: f64, dx: f64, slopes: &[f64]) -> Vec<f64> {
    let hull = lower_hull(v);
    let mut out = vec![0.0; slopes.len()];
    conjugate_walk(v, &hull, x0, dx, slopes, |s, best, _| out[s] = best);
    out
}

/// `min_x (v(x) - p·x)` on the product slope grid (2D slice), slope-major in
/// the first axis.
pub fn conjugate_2d(v: &[f64], grid: &GridSpec, slopes: &[f64]) -> Vec<f64> {
    let (n0, n1) = (grid.nodes[0], grid.nodes[1]);
    let ps = slopes.len();
    // inner[i * ps + s1] = min over axis-1 of row i
    let mut inner = vec![0.0; n0 * ps];
    for i in 0..n0 {
        let row = &v[i * n1..(i + 1) * n1];
        let c = conjugate_1d(row, grid.x_lo[1], grid.dx, slopes);
        inner[i * ps..(i + 1) * ps].copy_from_slice(&c);
    }
    let mut out = vec![0.0; ps * ps];
    let mut col = vec![0.0; n0];
    for s1 in 0..ps {
        for i in 0..n0 {
            col[i] = inner[i * ps + s1];
        }
        let c = conjugate_1d(&col, grid.x_lo[0], grid.dx, slopes);
        for s0 in 0..ps {
            out[s0 * ps + s1] = c[s0];
        }
    }
    out
}

/// Per-slope minima of one slice and whether an off-boundary node attains them.
fn slice_minima(
    slice: &[f64],
    grid: &GridSpec,
    k: usize,
    slopes: &[f64],
    vals: &mut [f64],
    interior: &mut [bool],
) {
    if grid.dim == 1 {
        let hull = lower_hull(slice);
        let last = grid.nodes[0] - 1;
        conjugate_walk(slice, &hull, grid.x_lo[0], grid.dx, slopes, |s, best, ties| {
            vals[s] = best;
            interior[s] = k > 0 && ties.iter().any(|&i| i != 0 && i != last);
        });
    } else {
        brute_slice_minima(slice, grid, k, slopes, vals, interior);
    }
}

/// Reference evaluation over every node and slope.
fn brute_slice_minima(
    slice: &[f64],
    grid: &GridSpec,
    k: usize,
    slopes: &[f64],
    vals: &mut [f64],
    interior: &mut [bool],
) {
    let ps = slopes.len();
    let n = grid.slice_len();
    let combos = if grid.dim == 1 { ps } else { ps * ps };
    for c in 0..combos {
        let p = if grid.dim == 1 {
            [slopes[c], 0.0]
        } else {
            [slopes[c / ps], slopes[c % ps]]
        };
        let mut best = f64::INFINITY;
        let mut inside = false;
        for node in 0..n {
            let x = grid.node_position(node);
            let w = slice[node] - (p[0] * x[0] + p[1] * x[1]);
            let off_boundary = !grid.is_boundary(k, node);
            if w < best {
                best = w;
                inside = off_boundary;
            } else if w == best && off_boundary {
                inside = true;
            }
        }
        vals[c] = best;
        interior[c] = inside;
    }
}

/// Sweeps slices in order and accumulates interior descents per slope.
fn sweep(
    u: &Field,
    slopes: &SlopeGrid,
    brute: bool,
    mut record: impl FnMut(usize, &[f64]),
) -> Vec<f64> {
    let g = u.grid();
    let axis = slopes.axis();
    let combos = slopes.count();
    let mut running = vec![f64::INFINITY; combos];
    let mut fiber = vec![0.0; combos];
    let mut vals = vec![0.0; combos];
    let mut inside = vec![false; combos];
    for k in 0..g.slices() {
        if brute {
            brute_slice_minima(u.slice(k), g, k, &axis, &mut vals, &mut inside);
        } else {
            slice_minima(u.slice(k), g, k, &axis, &mut vals, &mut inside);
        }
        for c in 0..combos {
            if vals[c] < running[c] {
                if inside[c] {
                    fiber[c] += running[c] - vals[c];
                }
                running[c] = vals[c];
            }
        }
        record(k, &running);
    }
    fiber
}

fn finish(u: &Field, slopes: SlopeGrid, fiber: &[f64]) -> SubdiffMeasure {
    let total: f64 = fiber.iter().sum();
    SubdiffMeasure {
        value: total * slopes.cell() / u.grid().volume(),
        slopes: Some(slopes),
        method: MeasureMethod::Fiber,
    }
}

/// Normalized measure `|P(Q; u)| / |Q|` by the fiber sweep.
///
/// `step = None` uses the default slope spacing of [`SlopeGrid::new`].
pub fn subdiff_measure_fiber(u: &Field, step: Option<f64>) -> Result<SubdiffMeasure> {
    let slopes = SlopeGrid::new(u.grid().dim, lipschitz(u), u.grid().dx, step)?;
    let fiber = sweep(u, &slopes, false, |_, _| {});
    Ok(finish(u, slopes, &fiber))
}

/// Fiber measure on a given slope grid.
pub fn subdiff_measure_fiber_on(u: &Field, slopes: &SlopeGrid) -> SubdiffMeasure {
    let fiber = sweep(u, slopes, false, |_, _| {});
    finish(u, *slopes, &fiber)
}

/// Same measure, evaluating every node for every slope.
pub fn subdiff_measure_fiber_brute(u: &Field, step: Option<f64>) -> Result<SubdiffMeasure> {
    let slopes = SlopeGrid::new(u.grid().dim, lipschitz(u), u.grid().dx, step)?;
    let fiber = sweep(u, &slopes, true, |_, _| {});
    Ok(finish(u, slopes, &fiber))
}

/// The running minima `g_k(p)`, slice-major, for a given slope grid.
pub fn fiber_sequences(u: &Field, slopes: &SlopeGrid) -> Vec<f64> {
    let mut out = Vec::with_capacity(u.grid().slices() * slopes.count());
    sweep(u, slopes, false, |_, g| out.extend_from_slice(g));
    out
}

/// `∫ (G_0(p) - G_K(p)) dp` where `G(p) = min_x (v(x) - p x)`.
///
/// Both conjugates are concave and piecewise linear with breakpoints at hull
/// edge slopes, so the trapezoid rule on the merged breakpoints is exact. The
/// endpoints agree (static lateral data), so the difference vanishes outside
/// the breakpoint range.
pub fn exact_fiber_integral_1d(first: &[f64], last: &[f64], x0: f64, dx: f64) -> f64 {
    let mut breaks: Vec<f64> = Vec::new();
    for v in [first, last] {
        let h = lower_hull(v);
        for w in h.windows(2) {
            breaks.push((v[w[1]] - v[w[0]]) / ((w[1] - w[0]) as f64 * dx));
        }
    }
    if breaks.len() < 2 {
        return 0.0;
    }
    breaks.sort_by(|a, b| a.total_cmp(b));
    breaks.dedup();
    let g0 = conjugate_1d(first, x0, dx, &breaks);
    let gk = conjugate_1d(last, x0, dx, &breaks);
    let mut total = 0.0;
    for i in 0..breaks.len() - 1 {
        let d0 = (g0[i] - gk[i]).max(0.0);
        let d1 = (g0[i + 1] - gk[i + 1]).max(0.0);
        total += 0.5 * (d0 + d1) * (breaks[i + 1] - breaks[i]);
    }
    total
}

/// Domain over which minima are taken when measuring a subcube.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ambient {
    /// Minimize over the subcube alone.
    SelfCube,
    /// Minimize over the enclosing field up to each time.
    Cube,
}

/// Which nodes of a subcube may attain a counted descent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    /// Nodes off the subcube's parabolic boundary.
    Interior,
    /// Nodes of the half-open cube `[lo, hi)^d × (t_1, t_2]`: lower faces are
    /// owned, upper faces belong to the neighbor. Sibling subcubes then
    /// partition the parent's nodes.
    HalfOpen,
}

/// Index box inside a field: `count` nodes per axis from `offset`, slices
/// `k0..=k0 + steps`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub offset: [usize; 2],
    pub count: [usize; 2],
    pub k0: usize,
    pub steps: usize,
}

impl Window {
    /// The whole field.
    pub fn full(grid: &GridSpec) -> Self {
        Window {
            offset: [0, 0],
            count: grid.nodes,
            k0: 0,
            steps: grid.steps,
        }
    }

    /// Index window of a cube inside a field grid.
    pub fn of_cube(grid: &GridSpec, c: &crate::lattice::CubeIndex) -> Result<Self> {
        let mut offset = [0usize; 2];
        let mut count = [1usize; 2];
        for a in 0..grid.dim {
            let lo = (c.space_lo(a) - grid.x_lo[a]) / grid.dx;
            let n = c.side() / grid.dx;
            let (lo_r, n_r) = (crate::math::round(lo), crate::math::round(n));
            if (lo - lo_r).abs() > 1e-6 || (n - n_r).abs() > 1e-6 {
                return Err(Error::Misaligned);
            }
            if lo_r < 0.0 || lo_r as usize + n_r as usize >= grid.nodes[a] {
                return Err(Error::OutOfBox);
            }
            offset[a] = lo_r as usize;
            count[a] = n_r as usize + 1;
        }
        let k0 = (c.time_lo() - grid.t_lo) / grid.dt;
        let ks = c.depth() / grid.dt;
        let (k0r, ksr) = (crate::math::round(k0), crate::math::round(ks));
        if (k0 - k0r).abs() > 1e-6 || (ks - ksr).abs() > 1e-6 {
            return Err(Error::Misaligned);
        }
        if k0r < 0.0 || k0r as usize + ksr as usize > grid.steps {
            return Err(Error::OutOfBox);
        }
        Ok(Window {
            offset,
            count,
            k0: k0r as usize,
            steps: ksr as usize,
        })
    }

    fn contains_node(&self, grid: &GridSpec, node: usize) -> bool {
        let c = grid.node_coords(node);
        (0..grid.dim).all(|a| c[a] >= self.offset[a] && c[a] < self.offset[a] + self.count[a])
    }

    fn counts(&self, grid: &GridSpec, membership: Membership, k: usize, node: usize) -> bool {
        if k <= self.k0 || k > self.k0 + self.steps {
            return false;
        }
        let c = grid.node_coords(node);
        (0..grid.dim).all(|a| {
            let (lo, hi) = (self.offset[a], self.offset[a] + self.count[a] - 1);
            match membership {
                Membership::Interior => c[a] > lo && c[a] < hi,
                Membership::HalfOpen => c[a] >= lo && c[a] < hi,
            }
        })
    }

    /// Space-time volume.
    pub fn volume(&self, grid: &GridSpec) -> f64 {
        (0..grid.dim)
            .map(|a| (self.count[a] - 1) as f64 * grid.dx)
            .product::<f64>()
            * self.steps as f64
            * grid.dt
    }
}

/// Measure of a window of `u` on a given slope grid, normalized by the window
/// volume. Evaluates every node for every slope.
pub fn subdiff_measure_window(
    u: &Field,
    w: &Window,
    ambient: Ambient,
    membership: Membership,
    slopes: &SlopeGrid,
) -> Result<SubdiffMeasure> {
    let g = u.grid();
    if w.steps == 0 || w.k0 + w.steps > g.steps || (0..g.dim).any(|a| w.offset[a] + w.count[a] > g.nodes[a]) {
        return Err(Error::OutOfBox);
    }
    let axis = slopes.axis();
    let ps = axis.len();
    let k_start = match ambient {
        Ambient::SelfCube => w.k0,
        Ambient::Cube => 0,
    };
    let nodes: Vec<usize> = (0..g.slice_len())
        .filter(|&v| ambient == Ambient::Cube || w.contains_node(g, v))
        .collect();
    let positions: Vec<[f64; 2]> = nodes.iter().map(|&v| g.node_position(v)).collect();
    let mut total = 0.0;
    for cidx in 0..slopes.count() {
        let p = if g.dim == 1 {
            [axis[cidx], 0.0]
        } else {
            [axis[cidx / ps], axis[cidx % ps]]
        };
        let mut running = f64::INFINITY;
        for k in k_start..=w.k0 + w.steps {
            let slice = u.slice(k);
            let mut best = f64::INFINITY;
            let mut inside = false;
            for (&node, x) in nodes.iter().zip(&positions) {
                let v = slice[node] - (p[0] * x[0] + p[1] * x[1]);
                let here = w.counts(g, membership, k, node);
                if v < best {
                    best = v;
                    inside = here;
                } else if v == best && here {
                    inside = true;
                }
            }
            if best < running {
                if inside {
                    total += running - best;
                }
                running = best;
            }
        }
    }
    Ok(SubdiffMeasure {
        value: total * slopes.cell() / w.volume(g),
        slopes: Some(*slopes),
        method: MeasureMethod::Fiber,
    })
}

/// Streaming fiber measure for solves with time-independent boundary data.
///
/// With static lateral data no strict descent can be attained on the lateral
/// boundary, so each fiber equals `g_0(p) - g_K(p)`: the accumulator keeps
/// only the initial slice, the running minimum and the Lipschitz constant.
#[derive(Debug, Clone)]
pub struct FiberAccumulator {
    grid: GridSpec,
    step: Option<f64>,
    first: Vec<f64>,
    running: Vec<f64>,
    lateral: Vec<usize>,
    lip: f64,
    slices: usize,
}

impl FiberAccumulator {
    pub fn new(grid: &GridSpec, step: Option<f64>) -> Self {
        FiberAccumulator {
            grid: *grid,
            step,
            first: Vec::new(),
            running: Vec::new(),
            lateral: (0..grid.slice_len()).filter(|&v| grid.is_lateral(v)).collect(),
            lip: 0.0,
            slices: 0,
        }
    }

    /// Running minimum over all slices seen so far.
    pub fn running_min(&self) -> &[f64] {
        &self.running
    }

    pub fn initial(&self) -> &[f64] {
        &self.first
    }


    /// The measure. In `d = 1` the fiber integral is exact in the slope
    /// (no slope grid); in `d = 2` it is summed over the default slope grid.
    pub fn finish(&self) -> Result<SubdiffMeasure> {
        if self.slices < 2 {
            return Err(Error::Invalid("fiber accumulator saw fewer than two slices"));
        }
        let g = &self.grid;
        if g.dim == 1 && self.step.is_none() {
            let total = exact_fiber_integral_1d(&self.first, &self.running, g.x_lo[0], g.dx);
            return Ok(SubdiffMeasure {
                value: total / g.volume(),
                slopes: None,
                method: MeasureMethod::Fiber,
            });
        }
        let slopes = SlopeGrid::new(g.dim, self.lip, g.dx, self.step)?;
        let axis = slopes.axis();
        let (g0, gk) = if g.dim == 1 {
            (
                conjugate_1d(&self.first, g.x_lo[0], g.dx, &axis),
                conjugate_1d(&self.running, g.x_lo[0], g.dx, &axis),
            )
        } else {
            (conjugate_2d(&self.first, g, &axis), conjugate_2d(&self.running, g, &axis))
        };
        let total: f64 = g0.iter().zip(&gk).map(|(a, b)| (a - b).max(0.0)).sum();
        Ok(SubdiffMeasure {
            value: total * slopes.cell() / g.volume(),
            slopes: Some(slopes),
            method: MeasureMethod::Fiber,
        })
    }
}

impl SliceObserver for FiberAccumulator {
    fn observe(&mut self, k: usize, slice: &[f64]) -> Result<()> {
        if self.grid.dim == 2 || self.step.is_some() {
            self.lip = self.lip.max(slice_lipschitz(slice, &self.grid));
        }
        if k == 0 {
            self.first = slice.to_vec();
            self.running = slice.to_vec();
        } else {
            if self.lateral.iter().any(|&v| slice[v] != self.first[v]) {
                return Err(Error::TimeDependentBoundary);
            }
            for (m, &v) in self.running.iter_mut().zip(slice) {
                if v < *m {
                    *m = v;
                }
            }
        }
        self.slices += 1;
        Ok(())
    }
}
