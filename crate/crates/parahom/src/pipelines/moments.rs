//! `moment-decay`: `Ĵ_m + Ĵ*_m` at `ℓ̄` across levels and the fitted rate.

use parahom_core::exec::SeedRunner;
use parahom_core::mu::mc_moments;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::AppResult;
use crate::fit::{fit_rate, RateFit};
use crate::output::OutputDir;
use crate::plot::Plot;

pub const DEFAULT_SEEDS: usize = 400;

#[derive(Debug, Clone, Serialize)]
struct Row {
    level: i32,
    ell: f64,
    n: usize,
    e: f64,
    e_ci: f64,
    j: f64,
    j_ci: f64,
    e_star: f64,
    e_star_ci: f64,
    j_star: f64,
    j_star_ci: f64,
    j_sum: f64,
}

#[derive(Debug, Clone, Serialize)]
struct FitRow {
    experiment: &'static str,
    exponent: f64,
    exponent_lo: f64,
    exponent_hi: f64,
    intercept: f64,
    r2: f64,
    tau: f64,
    tau_hi: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentReport {
    pub passed: bool,
    pub ell: f64,
    pub levels: Vec<i32>,
    pub j_sum: Vec<f64>,
    /// `J_{m+1} / J_m` per consecutive pair.
    pub ratios: Vec<f64>,
    pub strictly_decreasing: bool,
    /// `None` when every second moment vanishes.
    pub fit: Option<RateFit>,
    /// Per-level factor `3^{exponent}` and its upper confidence bound.
    pub tau: Option<f64>,
    pub tau_hi: Option<f64>,
    pub tag: Option<&'static str>,
}

pub fn run<R: SeedRunner>(cfg: &ExperimentConfig, runner: &R, out: &mut OutputDir) -> AppResult<(MomentReport, Vec<u64>)> {
    let spec = cfg.spec()?;
    let ell = super::fbar_at_m(cfg, &spec, runner)?;
    let seeds = cfg.seed_list(cfg.seeds.unwrap_or(DEFAULT_SEEDS).max(2));
    let mu = super::mu_config(cfg);
    let shift = cfg.shift();
    let mut levels = cfg.moment_levels.clone();
    levels.sort_unstable();
    let mut rows = Vec::new();
    for &m in &levels {
        let s = mc_moments(&spec, m, ell, &shift, &seeds, &mu, runner)?;
        rows.push(Row {
            level: m,
            ell,
            n: s.n,
            e: s.e.mean,
            e_ci: s.e.ci,
            j: s.j.mean,
            j_ci: s.j.ci,
            e_star: s.e_star.mean,
            e_star_ci: s.e_star.ci,
            j_star: s.j_star.mean,
            j_star_ci: s.j_star.ci,
            j_sum: s.j.mean + s.j_star.mean,
        });
    }
    out.write_csv("stats.csv", &rows)?;
    let j_sum: Vec<f64> = rows.iter().map(|r| r.j_sum).collect();
    let ratios: Vec<f64> = j_sum.windows(2).map(|w| w[1] / w[0]).collect();
    let strictly_decreasing = j_sum.windows(2).all(|w| w[1] < w[0]);
    let degenerate = j_sum.iter().all(|&v| v == 0.0);
    let (fit, tau, tau_hi, tag, passed) = if degenerate {
        (None, None, None, Some("degenerate"), true)
    } else {
        let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (3f64.powi(r.level), r.j_sum)).collect();
        match fit_rate(&pairs) {
            Ok(f) => {
                let tau = 3f64.powf(f.exponent);
                let tau_hi = 3f64.powf(f.exponent_hi);
                let ok = strictly_decreasing && tau_hi < 1.0;
                (Some(f), Some(tau), Some(tau_hi), None, ok)
            }
            Err(_) => (None, None, None, Some("too few levels to fit"), false),
        }
    };
    if let Some(f) = &fit {
        out.write_csv(
            "rates.csv",
            &[FitRow {
                experiment: "moment-decay",
                exponent: f.exponent,
                exponent_lo: f.exponent_lo,
                exponent_hi: f.exponent_hi,
                intercept: f.intercept,
                r2: f.r2,
                tau: tau.unwrap_or(f64::NAN),
                tau_hi: tau_hi.unwrap_or(f64::NAN),
            }],
        )?;
        let mut plot = Plot::new("second moments at the effective rhs", "side 3^m", "J + J*").log_log();
        plot.points = f.x.iter().copied().zip(f.y.iter().copied()).collect();
        plot.line = super::fit_line(f);
        out.write_text("moments.svg", &plot.render())?;
    }
    let report = MomentReport {
        passed,
        ell,
        levels,
        j_sum,
        ratios,
        strictly_decreasing,
        fit,
        tau,
        tau_hi,
        tag,
    };
    out.write_json("report.json", &report)?;
    Ok((report, seeds))
}
