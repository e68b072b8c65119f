//! Experiment pipelines behind the subcommands.

pub mod corrector;
pub mod effective;
pub mod estimate;
pub mod homog;
pub mod moments;
pub mod validate;

use parahom_core::effective::{estimate_fbar, FbarConfig};
use parahom_core::environment::{Environment, EnvironmentSpec, SymMatrix};
use parahom_core::exec::SeedRunner;
use parahom_core::mu::MuConfig;

use crate::config::ExperimentConfig;
use crate::error::AppResult;

/// Subcommand names, also used as the `kind` in manifests.
pub const KINDS: [&str; 6] = ["validate", "estimate-mu", "effective-f", "corrector-decay", "homog-rate", "moment-decay"];

pub(crate) fn mu_config(cfg: &ExperimentConfig) -> MuConfig {
    MuConfig {
        refinement: cfg.refinement,
        probes: cfg.probes,
        ..MuConfig::default()
    }
}

pub(crate) fn fbar_config(cfg: &ExperimentConfig, level: i32) -> FbarConfig {
    FbarConfig {
        level,
        tol: cfg.tol,
        bracket: None,
        mu: mu_config(cfg),
    }
}

/// `F̄(m I)` from the config, or by bisection at `fbar_level`.
pub(crate) fn fbar_at_m<R: SeedRunner>(cfg: &ExperimentConfig, spec: &EnvironmentSpec, runner: &R) -> AppResult<f64> {
    if let Some(v) = cfg.fbar {
        return Ok(v);
    }
    let seeds = cfg.seed_list(cfg.fbar_seeds);
    let est = estimate_fbar(spec, &cfg.shift(), &seeds, &fbar_config(cfg, cfg.fbar_level), runner)?;
    lock_in(spec, &cfg.shift(), est.ell, cfg.tol)
}

/// For a deterministic law, replaces a bisection result that is within `tol`
/// of `F(M)` by `F(M)` itself, so downstream correctors and moments vanish
/// exactly instead of carrying the bisection residue.
pub(crate) fn lock_in(spec: &EnvironmentSpec, shift: &SymMatrix, ell: f64, tol: f64) -> AppResult<f64> {
    if !spec.is_deterministic() {
        return Ok(ell);
    }
    let env = Environment::new(spec.clone())?;
    let exact = env.evaluate(shift, &[0.0, 0.0][..spec.dim], 0.5)?;
    Ok(if (exact - ell).abs() <= tol { exact } else { ell })
}

/// `(x, y)` pairs for plotting as a polyline along a fitted power law.
pub(crate) fn fit_line(fit: &crate::fit::RateFit) -> Vec<(f64, f64)> {
    let lo = fit.x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = fit.x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    vec![(lo, fit.predict(lo)), (hi, fit.predict(hi))]
}

/// What a finished subcommand reports back to the caller.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub passed: bool,
    /// One human-readable line per reported quantity.
    pub summary: Vec<String>,
    pub seeds: Vec<u64>,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

/// Runs subcommand `kind`, writing its files into `out`.
pub fn execute<R: SeedRunner>(kind: &str, cfg: &ExperimentConfig, runner: &R, out: &mut crate::output::OutputDir) -> AppResult<Outcome> {
    cfg.check()?;
    let (passed, summary, seeds) = match kind {
        "validate" => {
            let r = validate::run(cfg, runner)?;
            out.write_json("report.json", &r)?;
            let lines = r
                .checks
                .iter()
                .map(|c| format!("{:<28} {} ({} cases, {} failures)", c.name, if c.passed { "pass" } else { "FAIL" }, c.cases, c.failures))
                .collect();
            (r.passed, lines, vec![cfg.environment.seed])
        }
        "estimate-mu" => {
            let (r, seeds) = estimate::run(cfg, runner, out)?;
            let lines = vec![
                format!("samples {}", r.samples),
                format!("abp worst {:.4} (limit {:.4})", r.abp_worst, r.abp_limit),
                format!("bounds failures {}", r.bounds_failures),
                format!("level increases {}", r.level_increases.len()),
            ];
            (r.passed, lines, seeds)
        }
        "effective-f" => {
            let (r, _, seeds) = effective::run(cfg, runner, out)?;
            let mut lines: Vec<String> = r
                .points
                .iter()
                .map(|p| format!("M {:?}: Fbar {:.5} (E {:.2e}, E* {:.2e})", p.m, p.fbar, p.e, p.e_star))
                .collect();
            lines.push(format!("monotone {} ellipticity {} repaired {}", r.monotone, r.ellipticity_ok, r.repaired));
            if let Some(o) = &r.oracle {
                lines.push(format!("oracle {:.5} vs Fbar {:.5}, relative gap {:.4}", o.oracle, o.fbar, o.relative_gap));
            }
            (r.passed, lines, seeds)
        }
        "corrector-decay" => {
            let (r, seeds) = corrector::run(cfg, runner, out)?;
            let lines = vec![
                format!("Fbar {:.5}", r.fbar),
                format!("levels {:?}", r.levels),
                format!("mean sup norm {:?}", r.mean),
                format!("control {:?}", r.control_mean),
            ];
            (r.passed, lines, seeds)
        }
        "homog-rate" => {
            let (r, seeds) = homog::run(cfg, runner, out)?;
            let mut lines: Vec<String> = r
                .rows
                .iter()
                .map(|w| format!("{} eps 3^-{} r {}: error {:.3e} ± {:.1e}", w.data, w.eps_level, w.refinement, w.error, w.error_ci))
                .collect();
            lines.push(format!(
                "beta {} (R² {})",
                opt(r.fit.as_ref().map(|f| f.exponent)),
                opt(r.fit.as_ref().map(|f| f.r2))
            ));
            if let Some(t) = r.tag {
                lines.push(t.to_string());
            }
            (r.passed, lines, seeds)
        }
        "moment-decay" => {
            let (r, seeds) = moments::run(cfg, runner, out)?;
            let mut lines = vec![
                format!("ell {:.5}", r.ell),
                format!("J + J* {:?}", r.j_sum),
                format!("tau {} (upper {})", opt(r.tau), opt(r.tau_hi)),
            ];
            if let Some(t) = r.tag {
                lines.push(t.to_string());
            }
            (r.passed, lines, seeds)
        }
        other => return Err(crate::error::AppError::config(format!("unknown experiment kind `{other}`"))),
    };
    Ok(Outcome { passed, summary, seeds })
}
