//! The subadditive quantities `μ(Q, ω, ℓ, M)` and `μ*(Q, ω, ℓ, M)`.
//!
//! `μ` is the largest normalized subdifferential measure of the monotone
//! envelope of a supersolution of `u_t + F(M + D²u) = ℓ` on `Q`. It is
//! estimated from below by the best of a few explicit members of that class:
//!
//! * the solution with zero Dirichlet data (the canonical estimator),
//! * the quadratic barrier `-(η/(d+1)) t + (η / (2(d+1)Λ)) |x - x_c|²` with
//!   `η = inf_Q (F(M) - ℓ)_+`, which is a discrete supersolution,
//! * optionally, solutions for random time-independent Lipschitz boundary data.
//!
//! `μ*` is `μ` for the involuted environment at `(-ℓ, -M)`.

use alloc::vec::Vec;

use crate::envelope::{subdiff_measure_fiber, subdiff_measure_window, Ambient, FiberAccumulator, Membership, SlopeGrid, Window};
use crate::environment::{Environment, EnvironmentSpec, SymMatrix};
use crate::error::{Error, Result};
use crate::exec::SeedRunner;
use crate::lattice::{grid_for_cube, CubeIndex, GridSpec};
use crate::math::{ceil, floor, pow3, powf};
use crate::rng::{hash_coords, SplitMix64};
use crate::solver::{solve_dirichlet, solve_streaming, Boundary, SliceObserver, SolveRequest};
use crate::stats::{estimate, Estimate};

/// Estimator settings shared by every sample of an experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuConfig {
    /// Grid nodes per unit cell.
    pub refinement: usize,
    /// Include the quadratic barrier.
    pub barrier: bool,
    /// Number of random boundary-data probes.
    pub probes: usize,
    /// Amplitude of probe data relative to the cube's natural scale.
    pub probe_scale: f64,
    /// Slope spacing for quantized fiber sums; `None` integrates exactly in
    /// `d = 1` and uses the default grid in `d = 2`.
    pub slope_step: Option<f64>,
}

impl Default for MuConfig {
    fn default() -> Self {
        MuConfig {
            refinement: 9,
            barrier: true,
            probes: 0,
            probe_scale: 0.5,
            slope_step: None,
        }
    }
}

/// One estimate of `μ` or `μ*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuSample {
    pub cube: CubeIndex,
    pub ell: f64,
    pub shift: SymMatrix,
    pub seed: u64,
    pub starred: bool,
    pub refinement: usize,
    /// The estimate: best of the candidates below.
    pub value: f64,
    /// Measure of the zero-boundary solution.
    pub solution_value: f64,
    pub barrier_value: f64,
    /// Largest probe measure, when probes ran.
    pub probe_value: Option<f64>,
    /// `inf` of the zero-boundary solution over the closed cube.
    pub solution_inf: f64,
    /// `inf` of the same solution over the parabolic boundary.
    pub boundary_inf: f64,
    pub steps: usize,
}

impl MuSample {
    pub fn method(&self) -> &'static str {
        "fiber"
    }
}

/// Hypercone constant `(1/c_d)^{1/(d+1)}` with `c_d = ω_d d^{-d/2} / (d+1)`.
pub fn ptf_constant(dim: usize) -> f64 {
    let omega = if dim == 1 { 2.0 } else { core::f64::consts::PI };
    let d = dim as f64;
    let c = omega * powf(d, -d / 2.0) / (d + 1.0);
    powf(1.0 / c, 1.0 / (d + 1.0))
}

/// `¼ (1/(2dΛ))^d`, the density of the barrier used in the lower bound.
pub fn lower_constant(dim: usize, big_lambda: f64) -> f64 {
    0.25 * powf(1.0 / (2.0 * dim as f64 * big_lambda), dim as f64)
}

/// `λ^{-d} (d+1)^{-(d+1)}` from the arithmetic-geometric mean bound
/// `-w_t det D²w ≤ λ^{-d} ((-w_t + λ Δw)/(d+1))^{d+1}`.
pub fn upper_constant(dim: usize, lambda: f64) -> f64 {
    let d = dim as f64;
    powf(lambda, -d) * powf(d + 1.0, -(d + 1.0))
}

/// Near-neighbor count `1 + 3^{d+1}` in the variance decomposition.
pub fn mixdecay_constant(dim: usize) -> f64 {
    1.0 + pow3(dim as i32 + 1)
}

/// `(min, max)` of `F(M, ·, ·)` over the cells meeting the closed cube.
pub fn operator_range(env: &Environment, cube: &CubeIndex, shift: &SymMatrix) -> (f64, f64) {
    let halo = if env.spec().smoothing > 0.0 { 1 } else { 0 };
    let d = env.dim();
    let mut lo = [0i64; 2];
    let mut hi = [0i64; 2];
    for a in 0..d {
        lo[a] = floor(cube.space_lo(a) - 0.5) as i64 + 1 - halo;
        hi[a] = ceil(cube.space_hi(a) + 0.5) as i64 - 1 + halo;
    }
    let t_lo = floor(cube.time_lo() - 1.0) as i64 + 1 - halo;
    let t_hi = ceil(cube.time_hi()) as i64 - 1 + halo;
    let m = shift.diagonal();
    let (mut fmin, mut fmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for j in t_lo..=t_hi {
        for i0 in lo[0]..=hi[0] {
            for i1 in lo[1]..=hi[1] {
                let f = env.eval_draw(&env.sample_cell([i0, i1], j), m);
                fmin = fmin.min(f);
                fmax = fmax.max(f);
            }
        }
    }
    (fmin, fmax)
}

/// Exact discrete measure of the quadratic barrier with strength `eta`.
///
/// Every slope whose node-argmin of `c|x - x_c|² - p·x` is interior gets a
/// fiber of length `η/(d+1) · T`; per axis those slopes fill an interval of
/// length `2c (side - Δx)`.
pub fn barrier_measure(dim: usize, big_lambda: f64, eta: f64, grid: &GridSpec, side: f64) -> f64 {
    if !(eta > 0.0) {
        return 0.0;
    }
    let d = dim as f64;
    let curvature = eta / ((d + 1.0) * big_lambda);
    let per_axis = curvature * (side - grid.dx) / side;
    eta / (d + 1.0) * powf(per_axis, d)
}

struct Extrema {
    inf: f64,
    boundary_inf: f64,
}

/// Fiber accumulator plus solution extrema.
struct MeasureObserver {
    acc: FiberAccumulator,
    inf: f64,
    boundary_inf: f64,
    lateral: Vec<usize>,
    negate: bool,
    scratch: Vec<f64>,
}

impl MeasureObserver {
    fn new(grid: &GridSpec, step: Option<f64>, negate: bool) -> Self {
        MeasureObserver {
            acc: FiberAccumulator::new(grid, step),
            inf: f64::INFINITY,
            boundary_inf: f64::INFINITY,
            lateral: (0..grid.slice_len()).filter(|&v| grid.is_lateral(v)).collect(),
            negate,
            scratch: Vec::new(),
        }
    }

    fn extrema(&self) -> Extrema {
        Extrema {
            inf: self.inf,
            boundary_inf: self.boundary_inf,
        }
    }
}

impl SliceObserver for MeasureObserver {
    fn observe(&mut self, k: usize, slice: &[f64]) -> Result<()> {
        let s: &[f64] = if self.negate {
            self.scratch.clear();
            self.scratch.extend(slice.iter().map(|v| -v));
            &self.scratch
        } else {
            slice
        };
        for &v in s {
            if v < self.inf {
                self.inf = v;
            }
        }
        if k == 0 {
            self.boundary_inf = s.iter().copied().fold(f64::INFINITY, f64::min);
        } else {
            for &v in &self.lateral {
                self.boundary_inf = self.boundary_inf.min(s[v]);
            }
        }
        self.acc.observe(k, s)
    }
}

/// Observer feeding both the solution and its negation.
struct Paired<'a>(&'a mut MeasureObserver, &'a mut MeasureObserver);

impl SliceObserver for Paired<'_> {
    fn observe(&mut self, k: usize, slice: &[f64]) -> Result<()> {
        self.0.observe(k, slice)?;
        self.1.observe(k, slice)
    }
}

fn check_cube(env: &Environment, cube: &CubeIndex, shift: &SymMatrix) -> Result<()> {
    if cube.dim != env.dim() {
        return Err(Error::DimensionMismatch {
            expected: env.dim(),
            got: cube.dim,
        });
    }
    if shift.dim() != env.dim() {
        return Err(Error::DimensionMismatch {
            expected: env.dim(),
            got: shift.dim(),
        });
    }
    Ok(())
}

fn cube_grid(env: &Environment, cube: &CubeIndex, cfg: &MuConfig) -> Result<GridSpec> {
    grid_for_cube(cube, cfg.refinement, env.spec().cfl_diffusion())
}

/// Probe data: `side² α |y|² + side β·y` with `y = (x - x_c)/side`.
fn probe_data(cube: &CubeIndex, seed: u64, k: usize, scale: f64) -> impl Fn(&[f64; 2]) -> f64 + Sync {
    let mut rng = SplitMix64::new(hash_coords(seed, &[cube.level as i64, cube.space[0], cube.space[1], cube.time, k as i64]));
    let alpha = scale * rng.uniform(-1.0, 1.0);
    let beta = [scale * rng.uniform(-1.0, 1.0), scale * rng.uniform(-1.0, 1.0)];
    let side = cube.side();
    let dim = cube.dim;
    let center = [
        0.5 * (cube.space_lo(0) + cube.space_hi(0)),
        if dim == 2 { 0.5 * (cube.space_lo(1) + cube.space_hi(1)) } else { 0.0 },
    ];
    move |x: &[f64; 2]| {
        let mut q = 0.0;
        let mut l = 0.0;
        for a in 0..dim {
            let y = (x[a] - center[a]) / side;
            q += y * y;
            l += beta[a] * y;
        }
        side * side * alpha * q + side * l
    }
}

#[allow(clippy::too_many_arguments)]
fn finish_sample(
    env: &Environment,
    cube: &CubeIndex,
    ell: f64,
    shift: &SymMatrix,
    cfg: &MuConfig,
    grid: &GridSpec,
    solution_value: f64,
    ext: Extrema,
    steps: usize,
) -> Result<MuSample> {
    let barrier_value = if cfg.barrier {
        let (fmin, _) = operator_range(env, cube, shift);
        barrier_measure(env.dim(), env.spec().cfl_diffusion(), fmin - ell, grid, cube.side())
    } else {
        0.0
    };
    let mut probe_value = None;
    for k in 0..cfg.probes {
        let g = probe_data(cube, env.spec().seed, k, cfg.probe_scale);
        let req = SolveRequest {
            env,
            shift: *shift,
            ell,
            grid: *grid,
            boundary: Boundary::Static(&g),
        };
        let mut obs = MeasureObserver::new(grid, cfg.slope_step, false);
        solve_streaming(&req, &mut obs)?;
        let v = obs.acc.finish()?.value;
        probe_value = Some(probe_value.map_or(v, |p: f64| p.max(v)));
    }
    let value = solution_value.max(barrier_value).max(probe_value.unwrap_or(0.0));
    Ok(MuSample {
        cube: *cube,
        ell,
        shift: *shift,
        seed: env.spec().seed,
        starred: env.is_starred(),
        refinement: cfg.refinement,
        value,
        solution_value,
        barrier_value,
        probe_value,
        solution_inf: ext.inf,
        boundary_inf: ext.boundary_inf,
        steps,
    })
}

/// `μ(cube, ω, ℓ, M)` for the environment's seed.
pub fn estimate_mu(env: &Environment, cube: &CubeIndex, ell: f64, shift: &SymMatrix, cfg: &MuConfig) -> Result<MuSample> {
    check_cube(env, cube, shift)?;
    let grid = cube_grid(env, cube, cfg)?;
    let req = SolveRequest {
        env,
        shift: *shift,
        ell,
        grid,
        boundary: Boundary::Zero,
    };
    let mut obs = MeasureObserver::new(&grid, cfg.slope_step, false);
    let steps = solve_streaming(&req, &mut obs)?;
    let m = obs.acc.finish()?;
    finish_sample(env, cube, ell, shift, cfg, &grid, m.value, obs.extrema(), steps)
}

/// `μ*(cube, ω, ℓ, M) = μ(cube, ω*, -ℓ, -M)`.
pub fn estimate_mu_star(env: &Environment, cube: &CubeIndex, ell: f64, shift: &SymMatrix, cfg: &MuConfig) -> Result<MuSample> {
    estimate_mu(&env.involute(), cube, -ell, &shift.neg(), cfg)
}

/// `(μ, μ*)` from one solve.
///
/// The explicit scheme is odd under `(ω, ℓ, M, u) ↦ (ω*, -ℓ, -M, -u)` in
/// floating point, so the starred zero-boundary solution is exactly the
/// negated plain one. Probes still run separately.
pub fn estimate_mu_pair(
    env: &Environment,
    cube: &CubeIndex,
    ell: f64,
    shift: &SymMatrix,
    cfg: &MuConfig,
) -> Result<(MuSample, MuSample)> {
    check_cube(env, cube, shift)?;
    let grid = cube_grid(env, cube, cfg)?;
    let req = SolveRequest {
        env,
        shift: *shift,
        ell,
        grid,
        boundary: Boundary::Zero,
    };
    let mut plain = MeasureObserver::new(&grid, cfg.slope_step, false);
    let mut star = MeasureObserver::new(&grid, cfg.slope_step, true);
    let steps = solve_streaming(&req, &mut Paired(&mut plain, &mut star))?;
    let a = finish_sample(env, cube, ell, shift, cfg, &grid, plain.acc.finish()?.value, plain.extrema(), steps)?;
    let starred = env.involute();
    let b = finish_sample(
        &starred,
        cube,
        -ell,
        &shift.neg(),
        cfg,
        &grid,
        star.acc.finish()?.value,
        star.extrema(),
        steps,
    )?;
    Ok((a, b))
}

/// Moments of `μ` and `μ*` over independent seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct MuStats {
    pub level: i32,
    pub ell: f64,
    pub shift: SymMatrix,
    pub n: usize,
    /// `E_n`.
    pub e: Estimate,
    /// `J_n`.
    pub j: Estimate,
    pub e_star: Estimate,
    pub j_star: Estimate,
    /// `(μ, μ*)` per seed, in seed order.
    pub samples: Vec<(MuSample, MuSample)>,
}

impl MuStats {
    pub fn from_samples(level: i32, ell: f64, shift: SymMatrix, samples: Vec<(MuSample, MuSample)>) -> Self {
        let plain: Vec<f64> = samples.iter().map(|s| s.0.value).collect();
        let star: Vec<f64> = samples.iter().map(|s| s.1.value).collect();
        let sq = |v: &[f64]| v.iter().map(|x| x * x).collect::<Vec<f64>>();
        MuStats {
            level,
            ell,
            shift,
            n: samples.len(),
            e: estimate(&plain),
            j: estimate(&sq(&plain)),
            e_star: estimate(&star),
            j_star: estimate(&sq(&star)),
            samples,
        }
    }
}

/// Paired plain/starred samples on `G_level` for every seed.
pub fn mc_moments<R: SeedRunner>(
    spec: &EnvironmentSpec,
    level: i32,
    ell: f64,
    shift: &SymMatrix,
    seeds: &[u64],
    cfg: &MuConfig,
    runner: &R,
) -> Result<MuStats> {
    if seeds.len() < 2 {
        return Err(Error::TooFewSamples {
            need: 2,
            got: seeds.len(),
        });
    }
    spec.validate()?;
    let cube = CubeIndex::origin(spec.dim, level);
    let results = runner.run(seeds, |seed| {
        let env = Environment::new(spec.with_seed(seed))?;
        estimate_mu_pair(&env, &cube, ell, shift, cfg)
    });
    let samples = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(MuStats::from_samples(level, ell, *shift, samples))
}

/// `(inf_{∂_p} u - inf u) / (3^{2n} μ_u^{1/(d+1)})` for the zero-boundary
/// solution. Returns `+∞` when the measure vanishes but `u` dips below its
/// boundary values.
pub fn check_abp(sample: &MuSample) -> f64 {
    let num = sample.boundary_inf - sample.solution_inf;
    let scale = 1e-12 * (1.0 + sample.boundary_inf.abs());
    if num <= scale {
        return 0.0;
    }
    if sample.solution_value <= 0.0 {
        return f64::INFINITY;
    }
    let d = sample.cube.dim as f64;
    num / (sample.cube.depth() * powf(sample.solution_value, 1.0 / (d + 1.0)))
}

/// Outcome of [`check_bounds`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsReport {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

impl BoundsReport {
    pub fn passed(&self) -> bool {
        self.lower_ok && self.upper_ok
    }
}

/// `lower · inf(F(M) - ℓ)_+^{d+1} ≤ μ ≤ upper · sup(F(M) - ℓ)_+^{d+1}` with
/// relative slack.
pub fn check_bounds(env: &Environment, sample: &MuSample, slack: f64) -> BoundsReport {
    let s = env.spec();
    let d = s.dim as f64;
    let (fmin, fmax) = operator_range(env, &sample.cube, &sample.shift);
    let inf_pos = (fmin - sample.ell).max(0.0);
    let sup_pos = (fmax - sample.ell).max(0.0);
    let lower = lower_constant(s.dim, s.big_lambda) * powf(inf_pos, d + 1.0);
    let upper = upper_constant(s.dim, s.lambda) * powf(sup_pos, d + 1.0);
    BoundsReport {
        value: sample.value,
        lower,
        upper,
        lower_ok: sample.value >= lower * (1.0 - slack),
        upper_ok: sample.value <= upper * (1.0 + slack) + 1e-14,
    }
}

/// Outcome of [`check_subadditivity`].
#[derive(Debug, Clone, PartialEq)]
pub struct SubadditivityReport {
    pub parent: f64,
    pub children: Vec<f64>,
    pub child_mean: f64,
    pub slack: f64,
}

impl SubadditivityReport {
    pub fn passed(&self) -> bool {
        self.parent <= self.child_mean * (1.0 + self.slack) + 1e-14
    }

    /// `parent / mean(children)`; 1 when both vanish.
    pub fn ratio(&self) -> f64 {
        if self.child_mean == 0.0 {
            if self.parent == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            self.parent / self.child_mean
        }
    }
}

/// Compares the measure of the zero-boundary solution on `parent` with the
/// average of the measures of its restrictions to the children.
///
/// All measures share the parent's slope grid. Children own the nodes of their
/// half-open cube so that every parent node is counted by exactly one child.
pub fn check_subadditivity(
    env: &Environment,
    parent: &CubeIndex,
    ell: f64,
    shift: &SymMatrix,
    refinement: usize,
    ambient: Ambient,
    slack: f64,
) -> Result<SubadditivityReport> {
    check_cube(env, parent, shift)?;
    let grid = grid_for_cube(parent, refinement, env.spec().cfl_diffusion())?;
    let sol = solve_dirichlet(&SolveRequest {
        env,
        shift: *shift,
        ell,
        grid,
        boundary: Boundary::Zero,
    })?;
    let u = &sol.field;
    let whole = subdiff_measure_fiber(u, None)?;
    let slopes: SlopeGrid = whole.slopes.expect("fiber measure carries its slope grid");
    let mut children = Vec::new();
    for c in parent.children() {
        let w = Window::of_cube(&grid, &c)?;
        children.push(subdiff_measure_window(u, &w, ambient, Membership::HalfOpen, &slopes)?.value);
    }
    let child_mean = children.iter().sum::<f64>() / children.len() as f64;
    Ok(SubadditivityReport {
        parent: whole.value,
        children,
        child_mean,
        slack,
    })
}

/// Outcome of [`check_lipschitz_ell`].
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzReport {
    pub ells: Vec<f64>,
    pub e: Vec<Estimate>,
    /// Paired differences `E(ℓ_{i+1}) - E(ℓ_i)`.
    pub steps: Vec<Estimate>,
    /// Nonincreasing within the paired-difference CI.
    pub monotone: bool,
    /// Samples where `μ(ℓ_{i+1}) > μ(ℓ_i) + 1e-8`.
    pub sample_violations: usize,
    /// Largest `|ΔE| / Δℓ`.
    pub lipschitz: f64,
}

/// `E_n(ℓ)` along a sorted ℓ grid with common seeds.
pub fn check_lipschitz_ell<R: SeedRunner>(
    spec: &EnvironmentSpec,
    level: i32,
    shift: &SymMatrix,
    ells: &[f64],
    seeds: &[u64],
    cfg: &MuConfig,
    runner: &R,
) -> Result<LipschitzReport> {
    if ells.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Invalid("ell grid must be strictly increasing"));
    }
    let cube = CubeIndex::origin(spec.dim, level);
    let per_seed = runner.run(seeds, |seed| -> Result<Vec<f64>> {
        let env = Environment::new(spec.with_seed(seed))?;
        ells.iter()
            .map(|&l| estimate_mu(&env, &cube, l, shift, cfg).map(|s| s.value))
            .collect()
    });
    let per_seed = per_seed.into_iter().collect::<Result<Vec<_>>>()?;
    let column = |i: usize| per_seed.iter().map(|v| v[i]).collect::<Vec<f64>>();
    let e: Vec<Estimate> = (0..ells.len()).map(|i| estimate(&column(i))).collect();
    let mut steps = Vec::new();
    let mut monotone = true;
    let mut violations = 0;
    let mut lip = 0.0f64;
    for i in 0..ells.len().saturating_sub(1) {
        let diffs: Vec<f64> = per_seed.iter().map(|v| v[i + 1] - v[i]).collect();
        violations += diffs.iter().filter(|&&d| d > 1e-8).count();
        let st = estimate(&diffs);
        if st.mean > st.ci + 1e-12 {
            monotone = false;
        }
        lip = lip.max(st.mean.abs() / (ells[i + 1] - ells[i]));
        steps.push(st);
    }
    Ok(LipschitzReport {
        ells: ells.to_vec(),
        e,
        steps,
        monotone,
        sample_violations: violations,
        lipschitz: lip,
    })
}

/// Outcome of [`check_variance_decay`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceDecayReport {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

impl VarianceDecayReport {
    pub fn passed(&self) -> bool {
        self.lhs <= self.rhs + self.slack
    }
}

/// `J_{m+n} ≤ E_m² + (1 + 3^{d+1}) 3^{-n(d+2)} J_m`, with the CI half-widths
/// of every term as slack.
pub fn check_variance_decay(coarse: &MuStats, fine: &MuStats, dim: usize) -> VarianceDecayReport {
    let n = fine.level - coarse.level;
    let mix = mixdecay_constant(dim) / pow3(n * (dim as i32 + 2));
    let rhs = coarse.e.mean * coarse.e.mean + mix * coarse.j.mean;
    let slack = fine.j.ci + 2.0 * coarse.e.mean.abs() * coarse.e.ci + coarse.e.ci * coarse.e.ci + mix * coarse.j.ci;
    VarianceDecayReport {
        lhs: fine.j.mean,
        rhs,
        slack,
    }
}
