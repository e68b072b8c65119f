//! `homog-rate`: sup error between oscillating and homogenized solutions as
//! `ε = 3^{-k}` shrinks, and the fitted exponent.

use parahom_core::effective::{build_fbar_table, checkpoint_error, solve_homogenized_checkpoints, solve_scaled, FbarTable, ScaledProblem};
use parahom_core::environment::Environment;
use parahom_core::exec::SeedRunner;
use parahom_core::stats::{estimate, Estimate};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::AppResult;
use crate::fit::{fit_rate, RateFit};
use crate::output::OutputDir;
use crate::plot::Plot;

pub const DEFAULT_SEEDS: usize = 10;
const DURATION: f64 = 1.0;

type Data = dyn Fn(&[f64; 2]) -> f64 + Sync;

fn quadratic(x: &[f64; 2]) -> f64 {
    0.5 * (x[0] * x[0] + x[1] * x[1])
}

/// Kink through the middle of the box; `|x₁|` itself is affine on `(0, 1)`.
fn kink(x: &[f64; 2]) -> f64 {
    (x[0] - 0.5).abs()
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorRow {
    pub data: &'static str,
    pub eps_level: u32,
    pub eps: f64,
    pub refinement: usize,
    pub n: usize,
    pub error: f64,
    pub error_ci: f64,
    pub error_max: f64,
}

#[derive(Debug, Clone, Serialize)]
struct RateRow {
    experiment: &'static str,
    data: &'static str,
    exponent: f64,
    exponent_lo: f64,
    exponent_hi: f64,
    intercept: f64,
    r2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditPoint {
    pub eps_level: u32,
    pub error: f64,
    pub halved: f64,
    pub relative_change: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HomogReport {
    pub passed: bool,
    pub table_repaired: bool,
    pub rows: Vec<ErrorRow>,
    /// Fit of the `½|x|²` errors against `ε`; `exponent` is `β`.
    pub fit: Option<RateFit>,
    pub secondary_fit: Option<RateFit>,
    pub audit: Vec<AuditPoint>,
    pub audit_limit: f64,
    pub audit_ok: bool,
    pub tag: Option<&'static str>,
}

fn table_for<R: SeedRunner>(cfg: &ExperimentConfig, runner: &R) -> AppResult<FbarTable> {
    let spec = cfg.spec()?;
    if let Some(path) = &cfg.fbar_table {
        return super::effective::read_fbar_csv(path, &spec);
    }
    let seeds = cfg.seed_list(cfg.fbar_seeds);
    let fcfg = super::fbar_config(cfg, cfg.fbar_level);
    let (mut table, estimates) = build_fbar_table(&spec, &cfg.m_grid, &seeds, &fcfg, runner)?;
    for (v, est) in table.values.iter_mut().zip(&estimates) {
        *v = super::lock_in(&spec, &est.shift, *v, cfg.tol)?;
    }
    Ok(table)
}

fn errors<R: SeedRunner>(
    cfg: &ExperimentConfig,
    table: &FbarTable,
    data: &Data,
    eps_level: u32,
    refinement: usize,
    seeds: &[u64],
    runner: &R,
) -> AppResult<(Estimate, f64)> {
    let spec = cfg.spec()?;
    let coarse = solve_homogenized_checkpoints(table, cfg.homog_refinement, DURATION, data)?;
    let errs = runner.run(seeds, |seed| -> AppResult<f64> {
        let env = Environment::new(spec.with_seed(seed))?;
        let fine = solve_scaled(&ScaledProblem {
            env: &env,
            eps_level,
            refinement,
            duration: DURATION,
            data,
        })?;
        Ok(checkpoint_error(&fine, &coarse)?)
    });
    let errs = errs.into_iter().collect::<AppResult<Vec<_>>>()?;
    Ok((estimate(&errs), errs.iter().copied().fold(0.0, f64::max)))
}

fn row(data: &'static str, eps_level: u32, refinement: usize, e: &Estimate, max: f64) -> ErrorRow {
    ErrorRow {
        data,
        eps_level,
        eps: 3f64.powi(-(eps_level as i32)),
        refinement,
        n: e.n,
        error: e.mean,
        error_ci: e.ci,
        error_max: max,
    }
}

pub fn run<R: SeedRunner>(cfg: &ExperimentConfig, runner: &R, out: &mut OutputDir) -> AppResult<(HomogReport, Vec<u64>)> {
    let spec = cfg.spec()?;
    let table = table_for(cfg, runner)?;
    let seeds = cfg.seed_list(cfg.seeds.unwrap_or(DEFAULT_SEEDS));
    let mut levels = cfg.eps_levels.clone();
    levels.sort_unstable();
    let mut rows = Vec::new();
    let mut audit = Vec::new();
    let series: [(&'static str, &Data); 2] = [("half_norm_sq", &quadratic), ("kink", &kink)];
    for (name, data) in series {
        for &k in &levels {
            let (e, max) = errors(cfg, &table, data, k, cfg.refinement, &seeds, runner)?;
            rows.push(row(name, k, cfg.refinement, &e, max));
            if cfg.dx_audit && name == "half_norm_sq" {
                let (h, hmax) = errors(cfg, &table, data, k, 2 * cfg.refinement, &seeds, runner)?;
                rows.push(row(name, k, 2 * cfg.refinement, &h, hmax));
                audit.push(AuditPoint {
                    eps_level: k,
                    error: e.mean,
                    halved: h.mean,
                    relative_change: (h.mean - e.mean).abs() / e.mean.abs().max(1e-300),
                });
            }
        }
    }
    out.write_csv("stats.csv", &rows)?;
    let pairs = |name: &str| -> Vec<(f64, f64)> {
        rows.iter()
            .filter(|r| r.data == name && r.refinement == cfg.refinement)
            .map(|r| (r.eps, r.error))
            .collect()
    };
    let deterministic = spec.is_deterministic();
    let fit = fit_rate(&pairs("half_norm_sq")).ok();
    let secondary_fit = fit_rate(&pairs("kink")).ok();
    let mut rates = Vec::new();
    for (name, f) in [("half_norm_sq", &fit), ("kink", &secondary_fit)] {
        if let Some(f) = f {
            rates.push(RateRow {
                experiment: "homog-rate",
                data: name,
                exponent: f.exponent,
                exponent_lo: f.exponent_lo,
                exponent_hi: f.exponent_hi,
                intercept: f.intercept,
                r2: f.r2,
            });
        }
    }
    out.write_csv("rates.csv", &rates)?;
    if let Some(f) = &fit {
        let mut plot = Plot::new("homogenization error", "eps", "sup error").log_log();
        plot.points = f.x.iter().copied().zip(f.y.iter().copied()).collect();
        plot.line = super::fit_line(f);
        out.write_text("homog.svg", &plot.render())?;
    }
    let audit_ok = audit.iter().all(|a| a.relative_change <= cfg.slack.dx_halving);
    // Without randomness the error is pure discretization and the fit carries
    // no information; the run is reported, flagged and not judged.
    let (passed, tag) = if deterministic {
        (true, Some("zero-variance environment"))
    } else {
        let ok = fit.as_ref().is_some_and(|f| f.exponent > 0.0 && f.r2 >= 0.9);
        (ok && audit_ok, None)
    };
    let report = HomogReport {
        passed,
        table_repaired: table.repaired,
        rows,
        fit,
        secondary_fit,
        audit,
        audit_limit: cfg.slack.dx_halving,
        audit_ok,
        tag,
    };
    out.write_json("report.json", &report)?;
    Ok((report, seeds))
}
