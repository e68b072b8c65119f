//! `estimate-mu`: samples and moments of `μ` and `μ*` over levels and `ℓ`.

use parahom_core::environment::Environment;
use parahom_core::exec::SeedRunner;
use parahom_core::mu::{check_abp, check_bounds, mc_moments, ptf_constant, MuSample, MuStats};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::AppResult;
use crate::output::OutputDir;
use crate::plot::Plot;

pub const DEFAULT_SEEDS: usize = 100;

#[derive(Debug, Clone, Serialize)]
pub struct SampleRow {
    pub level: i32,
    pub anchor: String,
    pub ell: f64,
    #[serde(rename = "M")]
    pub m: String,
    pub seed: u64,
    pub starred: bool,
    pub method: &'static str,
    pub refinement: usize,
    pub value: f64,
    pub solution_value: f64,
    pub barrier_value: f64,
    pub probe_value: Option<f64>,
}

impl SampleRow {
    pub fn new(s: &MuSample) -> Self {
        let d = s.cube.dim;
        let anchor = format!(
            "{} {}",
            s.cube.space[..d].iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "),
            s.cube.time
        );
        SampleRow {
            level: s.cube.level,
            anchor,
            ell: s.ell,
            m: s.shift.row_major().iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(" "),
            seed: s.seed,
            starred: s.starred,
            method: s.method(),
            refinement: s.refinement,
            value: s.value,
            solution_value: s.solution_value,
            barrier_value: s.barrier_value,
            probe_value: s.probe_value,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StatsRow {
    pub level: i32,
    pub ell: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "E_ci")]
    pub e_ci: f64,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "J_ci")]
    pub j_ci: f64,
    #[serde(rename = "E_star")]
    pub e_star: f64,
    #[serde(rename = "E_star_ci")]
    pub e_star_ci: f64,
    #[serde(rename = "J_star")]
    pub j_star: f64,
    #[serde(rename = "J_star_ci")]
    pub j_star_ci: f64,
}

impl StatsRow {
    pub fn new(s: &MuStats) -> Self {
        StatsRow {
            level: s.level,
            ell: s.ell,
            n: s.n,
            e: s.e.mean,
            e_ci: s.e.ci,
            j: s.j.mean,
            j_ci: s.j.ci,
            e_star: s.e_star.mean,
            e_star_ci: s.e_star.ci,
            j_star: s.j_star.mean,
            j_star_ci: s.j_star.ci,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub passed: bool,
    pub samples: usize,
    pub abp_worst: f64,
    pub abp_limit: f64,
    pub bounds_failures: usize,
    /// `(ℓ, n)` pairs where `Ê_{n+1} > Ê_n + CI` for consecutive levels.
    pub level_increases: Vec<(f64, i32)>,
    pub estimator: &'static str,
}

pub fn run<R: SeedRunner>(cfg: &ExperimentConfig, runner: &R, out: &mut OutputDir) -> AppResult<(EstimateReport, Vec<u64>)> {
    let spec = cfg.spec()?;
    let seeds = cfg.seed_list(cfg.seeds.unwrap_or(DEFAULT_SEEDS).max(2));
    let mu = super::mu_config(cfg);
    let shift = cfg.shift();
    let limit = ptf_constant(spec.dim) * (1.0 + cfg.slack.abp);
    let mut samples = Vec::new();
    let mut stats = Vec::new();
    let mut abp_worst = 0.0f64;
    let mut bounds_failures = 0;
    let mut by_ell: Vec<Vec<MuStats>> = vec![Vec::new(); cfg.ells.len()];
    let mut levels = cfg.levels.clone();
    levels.sort_unstable();
    for &n in &levels {
        for (i, &ell) in cfg.ells.iter().enumerate() {
            let st = mc_moments(&spec, n, ell, &shift, &seeds, &mu, runner)?;
            for (a, b) in &st.samples {
                abp_worst = abp_worst.max(check_abp(a));
                let env = Environment::new(spec.with_seed(a.seed))?;
                if !check_bounds(&env, a, cfg.slack.bounds).passed() {
                    bounds_failures += 1;
                }
                samples.push(SampleRow::new(a));
                samples.push(SampleRow::new(b));
            }
            stats.push(StatsRow::new(&st));
            by_ell[i].push(st);
        }
    }
    let mut level_increases = Vec::new();
    for (i, series) in by_ell.iter().enumerate() {
        for w in series.windows(2) {
            if w[1].level == w[0].level + 1 && w[1].e.mean > w[0].e.mean + w[0].e.ci + w[1].e.ci {
                level_increases.push((cfg.ells[i], w[0].level));
            }
        }
    }
    out.write_csv("samples.csv", &samples)?;
    out.write_csv("stats.csv", &stats)?;
    let top = *levels.last().unwrap_or(&0);
    let mut plot = Plot::new(&format!("E_n(ell) at level {top}"), "ell", "E_n");
    plot.points = stats.iter().filter(|r| r.level == top).map(|r| (r.ell, r.e)).collect();
    plot.line = plot.points.clone();
    out.write_text("stats.svg", &plot.render())?;
    let report = EstimateReport {
        passed: abp_worst <= limit && bounds_failures == 0 && level_increases.is_empty(),
        samples: samples.len(),
        abp_worst,
        abp_limit: limit,
        bounds_failures,
        level_increases,
        estimator: "max(zero-boundary solution, quadratic barrier, boundary probes)",
    };
    out.write_json("report.json", &report)?;
    Ok((report, seeds))
}
