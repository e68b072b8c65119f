//! Triadic parabolic cubes, space-time grids and sampled fields.
//!
//! A cube of level `n` has spatial side `3^n` and temporal depth `3^{2n}`. The
//! reference cube is `[-3^n/2, 3^n/2)^d × (0, 3^{2n}]`; translates are indexed by
//! an integer anchor `(i, j)` so that the cube is
//! `3^n (i - 1/2 .. i + 1/2)^d × (3^{2n} j, 3^{2n} (j + 1)]`.
//!
//! Coordinates are microscopic: environment cells are the level-0 cubes.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{ceil, floor, pow3, round};

/// Supported spatial dimensions.
pub const MAX_DIM: usize = 2;

fn check_dim(dim: usize) -> Result<()> {
    if dim == 1 || dim == 2 {
        Ok(())
    } else {
        Err(Error::Dimension(dim))
    }
}

/// A triadic parabolic cube `G_n(i, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CubeIndex {
    pub level: i32,
    pub dim: usize,
    /// Spatial anchor; entries beyond `dim` are zero.
    pub space: [i64; MAX_DIM],
    /// Temporal anchor.
    pub time: i64,
}

impl CubeIndex {
    /// The reference cube `G_n` (anchor zero).
    pub fn origin(dim: usize, level: i32) -> Self {
        CubeIndex {
            level,
            dim,
            space: [0; MAX_DIM],
            time: 0,
        }
    }

    pub fn new(dim: usize, level: i32, space: [i64; MAX_DIM], time: i64) -> Self {
        let mut space = space;
        for s in space.iter_mut().skip(dim) {
            *s = 0;
        }
        CubeIndex {
            level,
            dim,
            space,
            time,
        }
    }

    /// Spatial side length `3^n`.
    pub fn side(&self) -> f64 {
        pow3(self.level)
    }

    /// Temporal depth `3^{2n}`.
    pub fn depth(&self) -> f64 {
        pow3(2 * self.level)
    }

    /// Lebesgue measure `3^{n(d+2)}`.
    pub fn volume(&self) -> f64 {
        pow3(self.level * (self.dim as i32 + 2))
    }

    /// Lower spatial face along `axis`.
    pub fn space_lo(&self, axis: usize) -> f64 {
        self.side() * (self.space[axis] as f64 - 0.5)
    }

    pub fn space_hi(&self, axis: usize) -> f64 {
        self.side() * (self.space[axis] as f64 + 0.5)
    }

    /// Initial time `t_1` (excluded from the cube, part of its parabolic boundary).
    pub fn time_lo(&self) -> f64 {
        self.depth() * self.time as f64
    }

    pub fn time_hi(&self) -> f64 {
        self.depth() * (self.time as f64 + 1.0)
    }

    /// Half-open membership: `[lo, hi)` in space, `(t_1, t_2]` in time.
    pub fn contains(&self, x: &[f64], t: f64) -> bool {
        (0..self.dim).all(|a| x[a] >= self.space_lo(a) && x[a] < self.space_hi(a))
            && t > self.time_lo()
            && t <= self.time_hi()
    }

    /// The `3^{d+2}` cubes of level `n - 1` tiling this cube.
    pub fn children(&self) -> Vec<CubeIndex> {
        let per_axis: [i64; 3] = [-1, 0, 1];
        let mut out = Vec::with_capacity(pow3(self.dim as i32 + 2) as usize);
        for dj in 0..9 {
            let time = 9 * self.time + dj;
            if self.dim == 1 {
                for &di in &per_axis {
                    out.push(CubeIndex::new(1, self.level - 1, [3 * self.space[0] + di, 0], time));
                }
            } else {
                for &di in &per_axis {
                    for &dk in &per_axis {
                        out.push(CubeIndex::new(
                            2,
                            self.level - 1,
                            [3 * self.space[0] + di, 3 * self.space[1] + dk],
                            time,
                        ));
                    }
                }
            }
        }
        out
    }

    /// The level `n + 1` cube containing this one.
    pub fn parent(&self) -> CubeIndex {
        let mut space = [0; MAX_DIM];
        for (a, s) in space.iter_mut().enumerate().take(self.dim) {
            // i = 3 I + k with k in {-1, 0, 1}
            *s = (self.space[a] + 1).div_euclid(3);
        }
        CubeIndex::new(self.dim, self.level + 1, space, self.time.div_euclid(9))
    }
}

/// The cube of level `n` containing `(x, t)`.
///
/// Space uses `floor(3^{-n} x + 1/2)`; time uses `ceil(3^{-2n} t) - 1` so that
/// the temporal interval `(t_1, t_2]` is closed on the right.
pub fn cube_of_point(n: i32, x: &[f64], t: f64) -> CubeIndex {
    let dim = x.len();
    debug_assert!(dim == 1 || dim == 2);
    let side = pow3(n);
    let depth = pow3(2 * n);
    let mut space = [0i64; MAX_DIM];
    for a in 0..dim {
        space[a] = floor(x[a] / side + 0.5) as i64;
    }
    let time = ceil(t / depth) as i64 - 1;
    CubeIndex::new(dim, n, space, time)
}

/// Discretization of a space-time box.
///
/// Nodes sit at `x_lo + i dx` (per axis) and slices at `t_lo + k dt`,
/// `k = 0..=steps`. Slice 0 carries initial data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub dim: usize,
    pub dx: f64,
    pub dt: f64,
    /// Nodes per axis; unused axes hold 1.
    pub nodes: [usize; MAX_DIM],
    pub steps: usize,
    pub x_lo: [f64; MAX_DIM],
    pub t_lo: f64,
}

impl GridSpec {
    pub fn new(
        dim: usize,
        dx: f64,
        dt: f64,
        nodes: [usize; MAX_DIM],
        steps: usize,
        x_lo: [f64; MAX_DIM],
        t_lo: f64,
    ) -> Result<Self> {
        check_dim(dim)?;
        if !(dx > 0.0) || !(dt > 0.0) {
            return Err(Error::Invalid("grid steps must be positive"));
        }
        let mut nodes = nodes;
        for n in nodes.iter_mut().skip(dim) {
            *n = 1;
        }
        if nodes[..dim].iter().any(|&n| n < 2) || steps == 0 {
            return Err(Error::Invalid("grid needs at least two nodes per axis and one step"));
        }
        Ok(GridSpec {
            dim,
            dx,
            dt,
            nodes,
            steps,
            x_lo,
            t_lo,
        })
    }

    /// Grid over `[lo, hi]^d × [t_lo, t_hi]` with the given steps; extents must
    /// be integer multiples of the steps.
    pub fn for_box(
        dim: usize,
        lo: [f64; MAX_DIM],
        hi: [f64; MAX_DIM],
        t_lo: f64,
        t_hi: f64,
        dx: f64,
        dt: f64,
    ) -> Result<Self> {
        check_dim(dim)?;
        let mut nodes = [1usize; MAX_DIM];
        for a in 0..dim {
            nodes[a] = integral((hi[a] - lo[a]) / dx)? + 1;
        }
        let steps = integral((t_hi - t_lo) / dt)?;
        GridSpec::new(dim, dx, dt, nodes, steps, lo, t_lo)
    }

    pub fn slices(&self) -> usize {
        self.steps + 1
    }

    /// Nodes in one time slice.
    pub fn slice_len(&self) -> usize {
        self.nodes[0] * self.nodes[1]
    }

    pub fn len(&self) -> usize {
        self.slice_len() * self.slices()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        i * self.nodes[1] + j
    }

    /// Per-axis integer coordinates of a flat node index.
    pub fn node_coords(&self, node: usize) -> [usize; MAX_DIM] {
        [node / self.nodes[1], node % self.nodes[1]]
    }

    /// Physical position of a flat node index.
    pub fn node_position(&self, node: usize) -> [f64; MAX_DIM] {
        let c = self.node_coords(node);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim {
            x[a] = self.x_lo[a] + c[a] as f64 * self.dx;
        }
        x
    }

    pub fn slice_time(&self, k: usize) -> f64 {
        self.t_lo + k as f64 * self.dt
    }

    pub fn extent(&self, axis: usize) -> f64 {
        (self.nodes[axis] - 1) as f64 * self.dx
    }

    pub fn duration(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    /// Space-time volume of the box.
    pub fn volume(&self) -> f64 {
        (0..self.dim).map(|a| self.extent(a)).product::<f64>() * self.duration()
    }

    /// Node on the lateral spatial boundary.
    pub fn is_lateral(&self, node: usize) -> bool {
        let c = self.node_coords(node);
        (0..self.dim).any(|a| c[a] == 0 || c[a] + 1 == self.nodes[a])
    }

    /// Parabolic-boundary membership: the initial slice plus the lateral faces.
    ///
    /// Lateral nodes are flagged on every slice (closure convention); interior
    /// nodes of the final slice are not boundary.
    pub fn is_boundary(&self, k: usize, node: usize) -> bool {
        k == 0 || self.is_lateral(node)
    }

    /// Interior nodes per axis.
    pub fn interior_nodes(&self, axis: usize) -> usize {
        self.nodes[axis].saturating_sub(2)
    }

    /// Whether the explicit scheme is monotone for diffusion bounded by `lambda_max`.
    pub fn satisfies_cfl(&self, lambda_max: f64) -> bool {
        self.dt <= cfl_bound(self.dx, lambda_max, self.dim) * (1.0 + 1e-12)
    }
}

/// `Δx² / (2 d Λ)`, the largest monotone explicit time step.
pub fn cfl_bound(dx: f64, lambda_max: f64, dim: usize) -> f64 {
    dx * dx / (2.0 * dim as f64 * lambda_max)
}

fn integral(x: f64) -> Result<usize> {
    let r = round(x);
    if r < 0.0 || (x - r).abs() > 1e-6 * (1.0 + r) {
        return Err(Error::Misaligned);
    }
    Ok(r as usize)
}

/// Time steps per unit time for refinement `r`: the smallest integer count whose
/// step is CFL-admissible, rounded up to a multiple of `multiple`.
fn steps_per_unit(dx: f64, lambda_max: f64, dim: usize, multiple: usize) -> usize {
    let bound = cfl_bound(dx, lambda_max, dim);
    let raw = ceil(1.0 / bound - 1e-9).max(1.0) as usize;
    raw.div_ceil(multiple) * multiple
}

/// Grid for cube `c` with `r` nodes per unit cell and CFL-admissible time step.
///
/// The time step is `1/S` with `S` steps per unit time, so the same `r` yields
/// nested grids across levels: 3-adic in space, 9-adic in time.
pub fn grid_for_cube(c: &CubeIndex, r: usize, lambda_max: f64) -> Result<GridSpec> {
    if r < 3 {
        return Err(Error::RefinementTooCoarse(r));
    }
    check_dim(c.dim)?;
    let dx = 1.0 / r as f64;
    let cells = r as f64 * c.side();
    let per_axis = integral(cells)?;
    // Negative levels need a step count per unit divisible by 9^{-n}.
    let multiple = if c.level < 0 { pow3(-2 * c.level) as usize } else { 1 };
    let s = steps_per_unit(dx, lambda_max, c.dim, multiple);
    let steps = integral(s as f64 * c.depth())?;
    let mut x_lo = [0.0; MAX_DIM];
    let mut nodes = [1usize; MAX_DIM];
    for a in 0..c.dim {
        x_lo[a] = c.space_lo(a);
        nodes[a] = per_axis + 1;
    }
    GridSpec::new(c.dim, dx, 1.0 / s as f64, nodes, steps, x_lo, c.time_lo())
}

/// Real values on every node of a [`GridSpec`], slice-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: GridSpec) -> Self {
        Field {
            grid,
            values: alloc::vec![0.0; grid.len()],
        }
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Invalid("value count does not match grid"));
        }
        Ok(Field { grid, values })
    }

    /// Samples `f(x, t)` on every node.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64; MAX_DIM], f64) -> f64) -> Self {
        let n = grid.slice_len();
        let mut values = Vec::with_capacity(grid.len());
        for k in 0..grid.slices() {
            let t = grid.slice_time(k);
            for node in 0..n {
                values.push(f(&grid.node_position(node), t));
            }
        }
        Field { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        let n = self.grid.slice_len();
        &self.values[k * n..(k + 1) * n]
    }

    pub fn slice_mut(&mut self, k: usize) -> &mut [f64] {
        let n = self.grid.slice_len();
        &mut self.values[k * n..(k + 1) * n]
    }

    pub fn at(&self, k: usize, node: usize) -> f64 {
        self.values[k * self.grid.slice_len() + node]
    }

    /// Parabolic-boundary flags, slice-major like the values.
    pub fn boundary_mask(&self) -> Vec<bool> {
        let n = self.grid.slice_len();
        (0..self.grid.len())
            .map(|idx| self.grid.is_boundary(idx / n, idx % n))
            .collect()
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Pointwise map, same grid.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Restriction to cube `c`; the copy gets its own parabolic boundary.
    pub fn restrict(&self, c: &CubeIndex) -> Result<Field> {
        if c.dim != self.grid.dim {
            return Err(Error::DimensionMismatch {
                expected: self.grid.dim,
                got: c.dim,
            });
        }
        let g = &self.grid;
        let mut offset = [0usize; MAX_DIM];
        let mut count = [1usize; MAX_DIM];
        for a in 0..g.dim {
            let lo = (c.space_lo(a) - g.x_lo[a]) / g.dx;
            let n = c.side() / g.dx;
            let (lo, n) = (signed_integral(lo)?, signed_integral(n)?);
            if lo < 0 || (lo + n) as usize >= g.nodes[a] {
                return Err(Error::OutOfBox);
            }
            offset[a] = lo as usize;
            count[a] = n as usize + 1;
        }
        let k0 = signed_integral((c.time_lo() - g.t_lo) / g.dt)?;
        let kn = signed_integral(c.depth() / g.dt)?;
        if k0 < 0 || (k0 + kn) as usize > g.steps || kn == 0 {
            return Err(Error::OutOfBox);
        }
        self.restrict_indices(offset, count, k0 as usize, kn as usize)
    }

    /// Restriction to an index box: `count` nodes per axis from `offset`, slices
    /// `k0..=k0 + steps`.
    pub fn restrict_indices(
        &self,
        offset: [usize; MAX_DIM],
        count: [usize; MAX_DIM],
        k0: usize,
        steps: usize,
    ) -> Result<Field> {
        let g = &self.grid;
        for a in 0..g.dim {
            if count[a] < 2 || offset[a] + count[a] > g.nodes[a] {
                return Err(Error::OutOfBox);
            }
        }
        if steps == 0 || k0 + steps > g.steps {
            return Err(Error::OutOfBox);
        }
        let mut x_lo = [0.0; MAX_DIM];
        for a in 0..g.dim {
            x_lo[a] = g.x_lo[a] + offset[a] as f64 * g.dx;
        }
        let sub = GridSpec::new(g.dim, g.dx, g.dt, count, steps, x_lo, g.slice_time(k0))?;
        let mut values = Vec::with_capacity(sub.len());
        for k in k0..=k0 + steps {
            let slice = self.slice(k);
            for i in 0..sub.nodes[0] {
                for j in 0..sub.nodes[1] {
                    values.push(slice[g.node_index(offset[0] + i, offset[1] + j)]);
                }
            }
        }
        Ok(Field { grid: sub, values })
    }
}

fn signed_integral(x: f64) -> Result<i64> {
    let r = round(x);
    if (x - r).abs() > 1e-6 * (1.0 + r.abs()) {
        return Err(Error::Misaligned);
    }
    Ok(r as i64)
}
