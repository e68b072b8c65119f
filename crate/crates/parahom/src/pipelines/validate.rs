//! Per-sample inequality suite and envelope property suite.

use parahom_core::envelope::{
    convex_minorant_1d, midpoint_violation, monotone_envelope, subdiff_measure_contact, subdiff_measure_fiber,
    subdiff_measure_fiber_on, Ambient,
};
use parahom_core::environment::{ellipticity_audit, Environment, EnvironmentSpec, Family, SymMatrix};
use parahom_core::exec::SeedRunner;
use parahom_core::lattice::{grid_for_cube, CubeIndex, Field};
use parahom_core::mu::{
    check_abp, check_bounds, check_lipschitz_ell, check_subadditivity, check_variance_decay, estimate_mu,
    mc_moments, operator_range, ptf_constant, MuConfig,
};
use parahom_core::rng::SplitMix64;
use parahom_core::solver::{solve_dirichlet, Boundary, SolveRequest};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::AppResult;

/// One line of the validation report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub cases: usize,
    pub failures: usize,
    /// Worst observed statistic, compared against `limit`.
    pub worst: f64,
    pub limit: f64,
    pub detail: String,
}

impl Check {
    fn new(name: &str, cases: usize, failures: usize, worst: f64, limit: f64, detail: String) -> Self {
        Check {
            name: name.to_string(),
            passed: failures == 0,
            cases,
            failures,
            worst,
            limit,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidateReport {
    pub dimension: usize,
    pub passed: bool,
    pub checks: Vec<Check>,
}

/// A random operator, cube, `ℓ` and `M` near the configured law.
#[derive(Debug, Clone)]
pub struct Case {
    pub spec: EnvironmentSpec,
    pub cube: CubeIndex,
    pub ell: f64,
    pub shift: SymMatrix,
}

pub fn random_case(base: &EnvironmentSpec, rng: &mut SplitMix64, levels: &[i32]) -> Case {
    let d = base.dim;
    let family = [Family::Linear, Family::HjbMin, Family::IsaacsMinMax][rng.below(3)];
    let k = 1 + rng.below(3);
    let controls = (0..k)
        .map(|_| {
            let a = rng.uniform(base.lambda, base.big_lambda);
            let b = rng.uniform(base.lambda, base.big_lambda);
            [a, b]
        })
        .collect();
    let (o1, o2) = (rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    let spec = EnvironmentSpec {
        dim: d,
        lambda: base.lambda,
        big_lambda: base.big_lambda,
        family,
        controls,
        offset_range: (o1.min(o2), o1.max(o2)),
        seed: rng.next_u64(),
        smoothing: if rng.below(4) == 0 { 0.2 } else { 0.0 },
        controls_per_cell: None,
    };
    let level = levels[rng.below(levels.len())];
    let mut space = [0i64; 2];
    for s in space.iter_mut().take(d) {
        *s = rng.below(5) as i64 - 2;
    }
    let cube = CubeIndex::new(d, level, space, rng.below(5) as i64 - 2);
    let m = rng.uniform(-2.0, 2.0);
    let shift = SymMatrix::scalar(d, m);
    let env = Environment::new(spec.clone()).expect("random law is valid");
    let (fmin, fmax) = operator_range(&env, &cube, &shift);
    let ell = rng.uniform(fmin - 1.0, fmax + 1.0);
    Case { spec, cube, ell, shift }
}

pub fn ellipticity(spec: &EnvironmentSpec, seed: u64) -> AppResult<Check> {
    let env = Environment::new(spec.clone())?;
    let trials = 2000;
    let r = ellipticity_audit(&env, trials, seed);
    let failures = usize::from(!r.passed());
    Ok(Check::new("ellipticity-audit", trials, failures, 0.0, 0.0, format!("{r:?}")))
}

/// A random solver output on `G_0` or `G_1`, used to exercise the envelope.
fn random_field(base: &EnvironmentSpec, rng: &mut SplitMix64) -> AppResult<Field> {
    let d = base.dim;
    let case = random_case(base, rng, if d == 1 { &[0, 1] } else { &[0] });
    let env = Environment::new(case.spec.clone())?;
    let r = if d == 1 { 9 } else { 6 };
    let grid = grid_for_cube(&case.cube, r, case.spec.cfl_diffusion())?;
    let (a, b) = (rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    let g = move |x: &[f64; 2]| a * (x[0] * x[0] + x[1] * x[1]) + b * x[0];
    let sol = solve_dirichlet(&SolveRequest {
        env: &env,
        shift: case.shift,
        ell: case.ell,
        grid,
        boundary: Boundary::Static(&g),
    })?;
    Ok(sol.field)
}

/// Largest chord value below `v` at every node: the affine-minorant oracle.
pub fn brute_minorant(v: &[f64], dx: f64) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|i| {
            let mut best = v[i];
            for j in 0..=i {
                for k in i..n {
                    if j == k {
                        continue;
                    }
                    let x = (i - j) as f64 * dx;
                    let w = v[j] + (v[k] - v[j]) * x / ((k - j) as f64 * dx);
                    best = best.min(w);
                }
            }
            best
        })
        .collect()
}

/// Idempotence, convexity per slice, time monotonicity, and two closed cases.
pub fn envelope_suite(base: &EnvironmentSpec, fields: usize, seed: u64) -> AppResult<Vec<Check>> {
    let mut rng = SplitMix64::new(seed);
    let (mut idem, mut conv, mut mono) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..fields {
        let u = random_field(base, &mut rng)?;
        let g = *u.grid();
        let scale = 1.0 + u.sup_abs();
        let gamma = monotone_envelope(&u).gamma;
        let twice = monotone_envelope(&gamma).gamma;
        let d = gamma.values().iter().zip(twice.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        idem = idem.max(d / scale);
        for k in 0..g.slices() {
            conv = conv.max(midpoint_violation(gamma.slice(k), g.nodes[0], g.nodes[1]) / scale);
            if k > 0 {
                let up = gamma.slice(k).iter().zip(gamma.slice(k - 1)).map(|(a, b)| a - b).fold(0.0, f64::max);
                mono = mono.max(up / scale);
            }
        }
    }
    let tol = 1e-10;
    let mut checks = vec![
        Check::new("envelope-idempotence", fields, usize::from(idem > tol), idem, tol, "relative sup |Γ(Γu) - Γu|".into()),
        Check::new("envelope-slice-convexity", fields, usize::from(conv > tol), conv, tol, "relative midpoint violation".into()),
        Check::new("envelope-time-monotone", fields, usize::from(mono > tol), mono, tol, "relative sup of Γ(t_k) - Γ(t_{k-1})".into()),
    ];
    let n = 121;
    let dx = 2.0 / (n - 1) as f64;
    let v: Vec<f64> = (0..n).map(|i| -(-1.0 + i as f64 * dx).abs()).collect();
    let mut out = vec![0.0; n];
    convex_minorant_1d(&v, &mut out);
    let abs_err = out.iter().map(|w| (w + 1.0).abs()).fold(0.0, f64::max);
    checks.push(Check::new("envelope-negative-abs", n, usize::from(abs_err > tol), abs_err, tol, "-|x| on [-1,1] flattens to -1".into()));
    let dx = 4.0 / (n - 1) as f64;
    let w: Vec<f64> = (0..n).map(|i| { let x = -2.0 + i as f64 * dx; (x * x - 1.0).powi(2) }).collect();
    convex_minorant_1d(&w, &mut out);
    let oracle = brute_minorant(&w, dx);
    let dw = out.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    checks.push(Check::new("envelope-double-well", n, usize::from(dw > 1e-8), dw, 1e-8, "(x²-1)² on [-2,2] vs chord oracle".into()));
    Ok(checks)
}

/// `w = -bt + ½ m x²` on `G_0`: both measures against `b m^d`.
pub fn density_suite(dim: usize, refinement: usize) -> AppResult<Vec<Check>> {
    let cases = [(1.0, 1.0), (2.0, 2.0), (0.5, 3.0)];
    let cube = CubeIndex::origin(dim, 0);
    let grid = grid_for_cube(&cube, refinement, 1.0)?;
    let (mut fiber_worst, mut contact_worst) = (0.0f64, 0.0f64);
    let mut detail = Vec::new();
    for (b, m) in cases {
        let w = Field::from_fn(grid, |x, t| -b * t + 0.5 * m * (x[0] * x[0] + if dim == 2 { x[1] * x[1] } else { 0.0 }));
        let target = b * m.powi(dim as i32);
        let f = subdiff_measure_fiber(&w, None)?.value;
        let c = subdiff_measure_contact(&monotone_envelope(&w)).value;
        fiber_worst = fiber_worst.max((f - target).abs() / target);
        contact_worst = contact_worst.max((c - target).abs() / target);
        detail.push(format!("(b={b}, m={m}): target {target}, fiber {f:.5}, contact {c:.5}"));
    }
    let detail = detail.join("; ");
    Ok(vec![
        Check::new("density-fiber", 3, usize::from(fiber_worst > 0.02), fiber_worst, 0.02, detail.clone()),
        Check::new("density-contact", 3, usize::from(contact_worst > 0.03), contact_worst, 0.03, detail),
    ])
}

/// Fiber measures of `u` and `Γ^u` on a shared slope grid, compared bitwise.
pub fn measure_equality(base: &EnvironmentSpec, fields: usize, seed: u64) -> AppResult<Check> {
    let mut rng = SplitMix64::new(seed);
    let mut failures = 0;
    let mut worst = 0.0f64;
    for _ in 0..fields {
        let u = random_field(base, &mut rng)?;
        let slopes = subdiff_measure_fiber(&u, None)?.slopes.expect("fiber measure has slopes");
        let a = subdiff_measure_fiber_on(&u, &slopes).value;
        let b = subdiff_measure_fiber_on(&monotone_envelope(&u).gamma, &slopes).value;
        if a.to_bits() != b.to_bits() {
            failures += 1;
            worst = worst.max((a - b).abs());
        }
    }
    Ok(Check::new("measure-equality", fields, failures, worst, 0.0, "bitwise comparison of |P(u)| and |P(Γu)|".into()))
}

pub fn abp_suite(base: &EnvironmentSpec, samples: usize, refinement: usize, slack: f64, seed: u64) -> AppResult<Check> {
    let mut rng = SplitMix64::new(seed);
    let limit = ptf_constant(base.dim) * (1.0 + slack);
    let cfg = MuConfig {
        refinement,
        ..MuConfig::default()
    };
    let mut worst = 0.0f64;
    let mut failures = 0;
    let levels: &[i32] = if base.dim == 1 { &[0, 1] } else { &[0] };
    for _ in 0..samples {
        let c = random_case(base, &mut rng, levels);
        let env = Environment::new(c.spec.clone())?;
        let s = estimate_mu(&env, &c.cube, c.ell, &c.shift, &cfg)?;
        let r = check_abp(&s);
        worst = worst.max(r);
        if !(r <= limit) {
            failures += 1;
        }
    }
    Ok(Check::new("abp", samples, failures, worst, limit, "(inf_∂ u - inf u) / (depth μ^{1/(d+1)})".into()))
}

pub fn bounds_and_subadditivity(
    base: &EnvironmentSpec,
    configs: usize,
    refinement: usize,
    bounds_slack: f64,
    sub_slack: f64,
    seed: u64,
) -> AppResult<Vec<Check>> {
    let mut rng = SplitMix64::new(seed);
    let cfg = MuConfig {
        refinement,
        ..MuConfig::default()
    };
    let (mut bf, mut sf) = (0, 0);
    let (mut bworst, mut sworst) = (0.0f64, 0.0f64);
    let levels: &[i32] = if base.dim == 1 { &[0, 1] } else { &[0] };
    for _ in 0..configs {
        let c = random_case(base, &mut rng, levels);
        let env = Environment::new(c.spec.clone())?;
        let s = estimate_mu(&env, &c.cube, c.ell, &c.shift, &cfg)?;
        let b = check_bounds(&env, &s, bounds_slack);
        if !b.passed() {
            bf += 1;
        }
        if b.upper > 0.0 {
            bworst = bworst.max(b.value / b.upper);
        } else if b.value > 0.0 {
            bworst = f64::INFINITY;
        }
        // The parent is the level-1 cube over the same origin when the
        // random level is 0; children are then level-0 cubes.
        let parent = if c.cube.level >= 1 { c.cube } else { c.cube.parent() };
        let r = check_subadditivity(&env, &parent, c.ell, &c.shift, refinement, Ambient::SelfCube, sub_slack)?;
        if !r.passed() {
            sf += 1;
        }
        let ratio = r.ratio();
        if ratio.is_finite() {
            sworst = sworst.max(ratio);
        }
    }
    Ok(vec![
        Check::new("bounds", configs, bf, bworst, 1.0 + bounds_slack, "worst μ / upper bound".into()),
        Check::new("subadditivity", configs, sf, sworst, 1.0 + sub_slack, "worst parent / child mean".into()),
    ])
}

pub fn lipschitz_check<R: SeedRunner>(
    spec: &EnvironmentSpec,
    ells: &[f64],
    m: f64,
    seeds: &[u64],
    refinement: usize,
    runner: &R,
) -> AppResult<Check> {
    let cfg = MuConfig {
        refinement,
        ..MuConfig::default()
    };
    let r = check_lipschitz_ell(spec, 1, &SymMatrix::scalar(spec.dim, m), ells, seeds, &cfg, runner)?;
    let worst = r.steps.iter().map(|s| s.mean).fold(f64::NEG_INFINITY, f64::max);
    let means: Vec<String> = r.e.iter().map(|e| format!("{:.4e}", e.mean)).collect();
    Ok(Check::new(
        "lipschitz-in-ell",
        seeds.len(),
        usize::from(!r.monotone),
        worst,
        0.0,
        format!(
            "E_1 = [{}], fitted Lipschitz constant {:.4}, per-sample increases {}",
            means.join(", "),
            r.lipschitz,
            r.sample_violations
        ),
    ))
}

pub fn variance_decay<R: SeedRunner>(
    spec: &EnvironmentSpec,
    ell: f64,
    m: f64,
    seeds: &[u64],
    refinement: usize,
    runner: &R,
) -> AppResult<Check> {
    let cfg = MuConfig {
        refinement,
        ..MuConfig::default()
    };
    let shift = SymMatrix::scalar(spec.dim, m);
    let s0 = mc_moments(spec, 0, ell, &shift, seeds, &cfg, runner)?;
    let mut failures = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut detail = Vec::new();
    for n in [1, 2] {
        let sn = mc_moments(spec, n, ell, &shift, seeds, &cfg, runner)?;
        let r = check_variance_decay(&s0, &sn, spec.dim);
        if !r.passed() {
            failures += 1;
        }
        worst = worst.max(r.lhs - r.rhs - r.slack);
        detail.push(format!("(0,{n}): J = {:.4e} ≤ {:.4e} + {:.4e}", r.lhs, r.rhs, r.slack));
    }
    Ok(Check::new("variance-decay", 2, failures, worst, 0.0, detail.join("; ")))
}

/// Runs every check on the configured law.
pub fn run<R: SeedRunner>(cfg: &ExperimentConfig, runner: &R) -> AppResult<ValidateReport> {
    let spec = cfg.spec()?;
    let counts = cfg.validate;
    let seed = spec.seed;
    let mut checks = vec![ellipticity(&spec, seed)?];
    checks.extend(envelope_suite(&spec, counts.envelope_fields, seed ^ 1)?);
    checks.extend(density_suite(spec.dim, counts.density_refinement)?);
    checks.push(measure_equality(&spec, counts.measure_fields, seed ^ 2)?);
    checks.push(abp_suite(&spec, counts.abp_samples, cfg.refinement, cfg.slack.abp, seed ^ 3)?);
    checks.extend(bounds_and_subadditivity(
        &spec,
        counts.random_configs,
        cfg.refinement,
        cfg.slack.bounds,
        cfg.slack.subadditivity,
        seed ^ 4,
    )?);
    let lip_seeds = cfg.seed_list(cfg.seeds.unwrap_or(counts.lipschitz_seeds));
    checks.push(lipschitz_check(&spec, &cfg.ells, cfg.m, &lip_seeds, cfg.refinement, runner)?);
    let var_seeds = cfg.seed_list(cfg.seeds.unwrap_or(counts.variance_seeds));
    checks.push(variance_decay(&spec, 0.0, cfg.m, &var_seeds, cfg.refinement, runner)?);
    Ok(ValidateReport {
        dimension: spec.dim,
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chord_oracle_on_convex_data_is_identity() {
        let v: Vec<f64> = (0..11).map(|i| (i as f64 - 5.0).powi(2)).collect();
        assert_eq!(brute_minorant(&v, 1.0), v);
    }

    #[test]
    fn corrupted_law_fails_audit() {
        let mut spec = EnvironmentSpec::two_phase(1, 1);
        spec.controls[1] = [3.0, 3.0];
        assert!(!ellipticity(&spec, 1).unwrap().passed);
        assert!(ellipticity(&EnvironmentSpec::two_phase(1, 1), 1).unwrap().passed);
    }

    #[test]
    fn envelope_suite_passes() {
        let checks = envelope_suite(&EnvironmentSpec::two_phase(1, 0), 3, 9).unwrap();
        assert!(checks.iter().all(|c| c.passed), "{checks:?}");
    }
}
