//! Monotone explicit finite-difference solver for
//! `u_t + F(M + D²u, x, t) = ℓ` with Dirichlet data on the parabolic boundary.
//!
//! The update is `u^{k+1} = u^k + Δt (ℓ - F_h(M + D_h² u^k))` with 3-point
//! second differences per axis. Coefficients for the step `t_k → t_{k+1}` are
//! taken in the cell containing the step midpoint.

use alloc::vec;
use alloc::vec::Vec;
use core::time::Duration;

use crate::environment::{CellDraw, Environment, Family, SymMatrix};
use crate::error::{Error, Result};
use crate::lattice::{cfl_bound, Field, GridSpec};

/// Dirichlet data on the parabolic boundary.
#[derive(Clone, Copy)]
pub enum Boundary<'a> {
    Zero,
    /// Data depending on position only (initial and lateral values agree).
    Static(&'a (dyn Fn(&[f64; 2]) -> f64 + Sync)),
    /// Data depending on position and time.
    Dynamic(&'a (dyn Fn(&[f64; 2], f64) -> f64 + Sync)),
}

impl Boundary<'_> {
    pub fn is_static(&self) -> bool {
        !matches!(self, Boundary::Dynamic(_))
    }

    pub fn value(&self, x: &[f64; 2], t: f64) -> f64 {
        match self {
            Boundary::Zero => 0.0,
            Boundary::Static(g) => g(x),
            Boundary::Dynamic(g) => g(x, t),
        }
    }
}

impl core::fmt::Debug for Boundary<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            Boundary::Zero => "Zero",
            Boundary::Static(_) => "Static",
            Boundary::Dynamic(_) => "Dynamic",
        })
    }
}

/// One Dirichlet problem.
#[derive(Debug, Clone, Copy)]
pub struct SolveRequest<'a> {
    pub env: &'a Environment,
    /// Constant matrix added to the discrete Hessian.
    pub shift: SymMatrix,
    pub ell: f64,
    pub grid: GridSpec,
    pub boundary: Boundary<'a>,
}

/// Full space-time output of [`solve_dirichlet`].
#[derive(Debug, Clone)]
pub struct Solution {
    pub field: Field,
    /// Sup-norm of the discrete equation residual at interior nodes.
    pub residual: f64,
    pub steps: usize,
    /// Filled in by callers that have a clock.
    pub wall_time: Option<Duration>,
}

/// Receives each time slice as soon as it is computed.
pub trait SliceObserver {
    fn observe(&mut self, k: usize, slice: &[f64]) -> Result<()>;
}

impl<F: FnMut(usize, &[f64]) -> Result<()>> SliceObserver for F {
    fn observe(&mut self, k: usize, slice: &[f64]) -> Result<()> {
        self(k, slice)
    }
}

/// `Δx² / (2 d Λ)`.
pub fn cfl_dt(dx: f64, big_lambda: f64, dim: usize) -> f64 {
    cfl_bound(dx, big_lambda, dim)
}

fn clamp_data(v: f64) -> Result<f64> {
    if v.is_nan() {
        return Err(Error::Invalid("boundary data is NaN"));
    }
    Ok(v.clamp(-1e150, 1e150))
}

/// Checks shared by every explicit solve.
pub(crate) fn check_grid(grid: &GridSpec, diffusion: f64) -> Result<()> {
    if (0..grid.dim).any(|a| grid.interior_nodes(a) < 3) {
        return Err(Error::EmptyInterior);
    }
    let bound = cfl_bound(grid.dx, diffusion, grid.dim);
    if grid.dt > bound * (1.0 + 1e-12) {
        return Err(Error::Cfl { dt: grid.dt, bound });
    }
    Ok(())
}

/// Drives the explicit sweep: boundary data, observers and overflow checks.
///
/// `interior(k, prev, next)` must write every interior node of `next`.
pub(crate) fn march<O: SliceObserver>(
    grid: &GridSpec,
    boundary: &Boundary<'_>,
    observer: &mut O,
    mut interior: impl FnMut(usize, &[f64], &mut [f64]),
) -> Result<()> {
    let n = grid.slice_len();
    let mut cur = Vec::with_capacity(n);
    for node in 0..n {
        cur.push(clamp_data(boundary.value(&grid.node_position(node), grid.t_lo))?);
    }
    let lateral: Vec<usize> = (0..n).filter(|&v| grid.is_lateral(v)).collect();
    let static_lateral: Option<Vec<f64>> = if boundary.is_static() {
        Some(lateral.iter().map(|&v| cur[v]).collect())
    } else {
        None
    };
    observer.observe(0, &cur)?;
    let mut next = cur.clone();
    for k in 0..grid.steps {
        interior(k, &cur, &mut next);
        match &static_lateral {
            Some(vals) => {
                for (&v, &g) in lateral.iter().zip(vals) {
                    next[v] = g;
                }
            }
            None => {
                let t = grid.slice_time(k + 1);
                for &v in &lateral {
                    next[v] = clamp_data(boundary.value(&grid.node_position(v), t))?;
                }
            }
        }
        if next.iter().any(|v| !v.is_finite() || v.abs() > 1e200) {
            return Err(Error::NonFinite { step: k + 1 });
        }
        core::mem::swap(&mut cur, &mut next);
        observer.observe(k + 1, &cur)?;
    }
    Ok(())
}

/// Per-node coefficients, refreshed when the step midpoint enters a new time cell.
enum Coefficients {
    /// `F = -(a0 m0 + a1 m1) + c` with the involution folded into `c`.
    Linear { a0: Vec<f64>, a1: Vec<f64>, c: Vec<f64> },
    General { draws: Vec<CellDraw>, of_node: Vec<u32> },
    /// Smoothed fields are evaluated pointwise.
    Pointwise,
}

struct CoefficientCache<'a> {
    env: &'a Environment,
    /// Spatial cell of each node.
    cells: Vec<[i64; 2]>,
    time_cell: Option<i64>,
    coeffs: Coefficients,
}

impl<'a> CoefficientCache<'a> {
    fn new(env: &'a Environment, grid: &GridSpec) -> Self {
        let cells = (0..grid.slice_len())
            .map(|v| Environment::cell_of(&grid.node_position(v)[..grid.dim], 0.5).0)
            .collect();
        let coeffs = if env.spec().smoothing > 0.0 {
            Coefficients::Pointwise
        } else if env.spec().family == Family::Linear {
            let n = grid.slice_len();
            Coefficients::Linear {
                a0: vec![0.0; n],
                a1: vec![0.0; n],
                c: vec![0.0; n],
            }
        } else {
            Coefficients::General {
                draws: Vec::new(),
                of_node: vec![0; grid.slice_len()],
            }
        };
        CoefficientCache {
            env,
            cells,
            time_cell: None,
            coeffs,
        }
    }

    fn refresh(&mut self, t_mid: f64) {
        let tc = Environment::cell_of(&[], t_mid).1;
        if self.time_cell == Some(tc) {
            return;
        }
        self.time_cell = Some(tc);
        let sign = if self.env.is_starred() { -1.0 } else { 1.0 };
        match &mut self.coeffs {
            Coefficients::Linear { a0, a1, c } => {
                // Neighboring nodes share cells; reuse the last draw.
                let mut last: Option<([i64; 2], CellDraw)> = None;
                for (v, cell) in self.cells.iter().enumerate() {
                    let draw = match last {
                        Some((lc, d)) if lc == *cell => d,
                        _ => {
                            let d = self.env.sample_cell(*cell, tc);
                            last = Some((*cell, d));
                            d
                        }
                    };
                    a0[v] = draw.diffusion[0][0];
                    a1[v] = draw.diffusion[0][1];
                    c[v] = sign * draw.offset[0];
                }
            }
            Coefficients::General { draws, of_node } => {
                draws.clear();
                let mut index: Vec<([i64; 2], u32)> = Vec::new();
                for (v, cell) in self.cells.iter().enumerate() {
                    let id = match index.iter().find(|(c, _)| c == cell) {
                        Some(&(_, id)) => id,
                        None => {
                            let id = draws.len() as u32;
                            draws.push(self.env.sample_cell(*cell, tc));
                            index.push((*cell, id));
                            id
                        }
                    };
                    of_node[v] = id;
                }
            }
            Coefficients::Pointwise => {}
        }
    }
}

/// Runs the explicit scheme and hands every slice to `observer`.
///
/// Returns the number of time steps taken.
pub fn solve_streaming<O: SliceObserver>(req: &SolveRequest<'_>, observer: &mut O) -> Result<usize> {
    let g = req.grid;
    let dim = g.dim;
    if req.env.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: req.env.dim(),
        });
    }
    if req.shift.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: req.shift.dim(),
        });
    }
    check_grid(&g, req.env.spec().cfl_diffusion())?;
    let env = req.env;
    let mut cache = CoefficientCache::new(env, &g);
    let inv_dx2 = 1.0 / (g.dx * g.dx);
    let dt = g.dt;
    let ell = req.ell;
    let s = req.shift.diagonal();
    let (n0, n1) = (g.nodes[0], g.nodes[1]);
    march(&g, &req.boundary, observer, |k, prev, next| {
        let t_mid = g.t_lo + (k as f64 + 0.5) * dt;
        cache.refresh(t_mid);
        match (&cache.coeffs, dim) {
            (Coefficients::Linear { a0, c, .. }, 1) => {
                for i in 1..n0 - 1 {
                    let u = prev[i];
                    let m0 = s[0] + (prev[i + 1] - 2.0 * u + prev[i - 1]) * inv_dx2;
                    next[i] = u + dt * (ell + a0[i] * m0 - c[i]);
                }
            }
            (Coefficients::Linear { a0, a1, c }, _) => {
                for i in 1..n0 - 1 {
                    for j in 1..n1 - 1 {
                        let v = i * n1 + j;
                        let u = prev[v];
                        let m0 = s[0] + (prev[v + n1] - 2.0 * u + prev[v - n1]) * inv_dx2;
                        let m1 = s[1] + (prev[v + 1] - 2.0 * u + prev[v - 1]) * inv_dx2;
                        next[v] = u + dt * (ell + a0[v] * m0 + a1[v] * m1 - c[v]);
                    }
                }
            }
            (coeffs, _) => {
                for i in 1..n0 - 1 {
                    let (j_lo, j_hi) = if dim == 1 { (0, 1) } else { (1, n1 - 1) };
                    for j in j_lo..j_hi {
                        let v = i * n1 + j;
                        let m = second_differences(prev, v, dim, n1, inv_dx2, &s);
                        let f = match coeffs {
                            Coefficients::General { draws, of_node } => {
                                env.eval_draw(&draws[of_node[v] as usize], m)
                            }
                            _ => {
                                let x = g.node_position(v);
                                env.evaluate_diag(m, &x[..dim], t_mid)
                            }
                        };
                        next[v] = prev[v] + dt * (ell - f);
                    }
                }
            }
        }
    })?;
    Ok(g.steps)
}

#[inline]
fn second_differences(u: &[f64], v: usize, dim: usize, n1: usize, inv_dx2: f64, s: &[f64; 2]) -> [f64; 2] {
    let c = 2.0 * u[v];
    if dim == 1 {
        [s[0] + (u[v + 1] - c + u[v - 1]) * inv_dx2, 0.0]
    } else {
        [
            s[0] + (u[v + n1] - c + u[v - n1]) * inv_dx2,
            s[1] + (u[v + 1] - c + u[v - 1]) * inv_dx2,
        ]
    }
}

/// Solves and stores the whole space-time field.
pub fn solve_dirichlet(req: &SolveRequest<'_>) -> Result<Solution> {
    let g = req.grid;
    let mut values = Vec::with_capacity(g.len());
    let steps = solve_streaming(req, &mut |_k: usize, slice: &[f64]| {
        values.extend_from_slice(slice);
        Ok(())
    })?;
    let field = Field::from_values(g, values)?;
    let residual = discrete_residual(&field, req.env, &req.shift, req.ell)?;
    Ok(Solution {
        field,
        residual,
        steps,
        wall_time: None,
    })
}

/// `F_h(M + D_h² u)` at an interior node of one slice at time `t`.
pub fn discrete_f(
    env: &Environment,
    shift: &SymMatrix,
    grid: &GridSpec,
    slice: &[f64],
    node: usize,
    t: f64,
) -> f64 {
    let inv_dx2 = 1.0 / (grid.dx * grid.dx);
    let m = second_differences(slice, node, grid.dim, grid.nodes[1], inv_dx2, &shift.diagonal());
    let x = grid.node_position(node);
    env.evaluate_diag(m, &x[..grid.dim], t)
}

/// Sup over interior nodes and steps of `|D_t u + F_h(M + D_h² u) - ℓ|`, with
/// the operator evaluated at the step midpoint as in the solver.
pub fn discrete_residual(field: &Field, env: &Environment, shift: &SymMatrix, ell: f64) -> Result<f64> {
    let g = field.grid();
    if env.dim() != g.dim {
        return Err(Error::DimensionMismatch {
            expected: g.dim,
            got: env.dim(),
        });
    }
    let mut worst = 0.0f64;
    for k in 0..g.steps {
        let t_mid = g.t_lo + (k as f64 + 0.5) * g.dt;
        let (a, b) = (field.slice(k), field.slice(k + 1));
        for v in 0..g.slice_len() {
            if g.is_lateral(v) {
                continue;
            }
            let f = discrete_f(env, shift, g, a, v, t_mid);
            let r = (b[v] - a[v]) / g.dt + f - ell;
            worst = worst.max(r.abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::EnvironmentSpec;
    use crate::lattice::{grid_for_cube, CubeIndex};

    #[test]
    fn cfl_examples() {
        assert!((cfl_dt(0.1, 1.0, 1) - 0.005).abs() < 1e-15);
        assert!((cfl_dt(0.1, 2.0, 2) - 0.00125).abs() < 1e-15);
        assert!((cfl_dt(0.05, 1.0, 1) - 0.005 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn discrete_f_exact_on_quadratic() {
        let env = Environment::new(EnvironmentSpec::constant(1, 1.0, 0.0)).unwrap();
        let g = GridSpec::for_box(1, [-1.0, 0.0], [1.0, 0.0], 0.0, 0.1, 0.1, 0.005).unwrap();
        let a = 3.0;
        let f = Field::from_fn(g, |x, _| 0.5 * a * x[0] * x[0]);
        let v = discrete_f(&env, &SymMatrix::zero(1), &g, f.slice(0), 7, 0.05);
        assert!((v + a).abs() < 1e-10);
    }

    #[test]
    fn discrete_f_offset() {
        let env = Environment::new(EnvironmentSpec::constant(1, 1.0, 0.7)).unwrap();
        let g = GridSpec::for_box(1, [-1.0, 0.0], [1.0, 0.0], 0.0, 0.1, 0.1, 0.005).unwrap();
        let f = Field::zeros(g);
        assert_eq!(discrete_f(&env, &SymMatrix::zero(1), &g, f.slice(0), 3, 0.05), 0.7);
    }

    #[test]
    fn steady_state_stays_zero() {
        let env = Environment::new(EnvironmentSpec::constant(1, 1.0, 2.5)).unwrap();
        let c = CubeIndex::origin(1, 1);
        let grid = grid_for_cube(&c, 9, 1.0).unwrap();
        let req = SolveRequest {
            env: &env,
            shift: SymMatrix::zero(1),
            ell: 2.5,
            grid,
            boundary: Boundary::Zero,
        };
        let sol = solve_dirichlet(&req).unwrap();
        assert_eq!(sol.field.sup_abs(), 0.0);
        assert_eq!(sol.residual, 0.0);
    }

    #[test]
    fn cfl_violation_rejected() {
        let env = Environment::new(EnvironmentSpec::constant(1, 1.0, 0.0)).unwrap();
        let grid = GridSpec::for_box(1, [0.0, 0.0], [1.0, 0.0], 0.0, 0.1, 0.1, 0.01).unwrap();
        let req = SolveRequest {
            env: &env,
            shift: SymMatrix::zero(1),
            ell: 0.0,
            grid,
            boundary: Boundary::Zero,
        };
        assert!(matches!(solve_dirichlet(&req), Err(Error::Cfl { .. })));
    }

    #[test]
    fn empty_interior_rejected() {
        let env = Environment::new(EnvironmentSpec::constant(1, 1.0, 0.0)).unwrap();
        let grid = GridSpec::for_box(1, [0.0, 0.0], [0.3, 0.0], 0.0, 0.1, 0.1, 0.005).unwrap();
        let req = SolveRequest {
            env: &env,
            shift: SymMatrix::zero(1),
            ell: 0.0,
            grid,
            boundary: Boundary::Zero,
        };
        assert_eq!(solve_dirichlet(&req).unwrap_err(), Error::EmptyInterior);
    }

    #[test]
    fn general_family_matches_pointwise_residual() {
        let spec = EnvironmentSpec {
            dim: 2,
            lambda: 0.5,
            big_lambda: 1.5,
            family: Family::IsaacsMinMax,
            controls: vec![[0.5, 1.0], [1.5, 0.7], [1.0, 1.0]],
            offset_range: (-0.5, 0.5),
            seed: 4,
            smoothing: 0.0,
            controls_per_cell: Some(2),
        };
        let env = Environment::new(spec).unwrap();
        let grid = grid_for_cube(&CubeIndex::origin(2, 0), 6, 1.5).unwrap();
        let g = |x: &[f64; 2]| x[0] * x[0] - 0.3 * x[1];
        let req = SolveRequest {
            env: &env,
            shift: SymMatrix::diag(&[0.5, -1.0]).unwrap(),
            ell: 0.2,
            grid,
            boundary: Boundary::Static(&g),
        };
        let sol = solve_dirichlet(&req).unwrap();
        assert!(sol.residual < 1e-9, "residual {}", sol.residual);
    }
}
