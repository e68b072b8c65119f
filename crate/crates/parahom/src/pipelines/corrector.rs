//! `corrector-decay`: sup norms of approximate correctors, with a shifted
//! right-hand side as negative control.

use parahom_core::effective::{corrector_decay, CorrectorRun};
use parahom_core::exec::SeedRunner;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::AppResult;
use crate::output::OutputDir;
use crate::plot::Plot;

pub const DEFAULT_SEEDS: usize = 20;

/// The control counts as decaying only if its finest-level norm falls below
/// this fraction of its coarsest-level norm.
pub const PLATEAU_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Serialize)]
struct Row {
    run: &'static str,
    rhs: f64,
    level: i32,
    mean: f64,
    max: f64,
    ci: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrectorReport {
    pub passed: bool,
    pub fbar: f64,
    pub levels: Vec<i32>,
    pub mean: Vec<f64>,
    pub control_mean: Vec<f64>,
    /// Mean norm at the finest level strictly below the coarsest.
    pub decays: bool,
    /// The shifted right-hand side must plateau rather than decay.
    pub control_decays: bool,
    pub control_ratio: f64,
    pub deterministic: bool,
}

fn rows(run: &'static str, r: &CorrectorRun) -> Vec<Row> {
    (0..r.levels.len())
        .map(|l| Row {
            run,
            rhs: r.rhs,
            level: r.levels[l],
            mean: r.mean(l),
            max: r.max(l),
            ci: r.estimate(l).ci,
        })
        .collect()
}

pub fn run<R: SeedRunner>(cfg: &ExperimentConfig, runner: &R, out: &mut OutputDir) -> AppResult<(CorrectorReport, Vec<u64>)> {
    let spec = cfg.spec()?;
    let fbar = super::fbar_at_m(cfg, &spec, runner)?;
    let seeds = cfg.seed_list(cfg.seeds.unwrap_or(DEFAULT_SEEDS));
    let shift = cfg.shift();
    let main = corrector_decay(&spec, &shift, &cfg.corrector_levels, &seeds, fbar, cfg.refinement, runner)?;
    let control = corrector_decay(&spec, &shift, &cfg.corrector_levels, &seeds, fbar + cfg.control_offset, cfg.refinement, runner)?;
    let deterministic = spec.is_deterministic();
    let mut all = rows("corrector", &main);
    all.extend(rows("control", &control));
    out.write_csv("stats.csv", &all)?;
    let mut plot = Plot::new("corrector sup norm", "side 3^n", "mean |w|/9^n");
    plot.log_x = true;
    plot.log_y = true;
    plot.points = (0..main.levels.len()).map(|l| (3f64.powi(main.levels[l]), main.mean(l))).collect();
    plot.line = plot.points.clone();
    out.write_text("corrector.svg", &plot.render())?;
    let mean: Vec<f64> = (0..main.levels.len()).map(|l| main.mean(l)).collect();
    // A deterministic law has identically vanishing correctors.
    let decays = main.decays() || (deterministic && mean.iter().all(|&v| v < 1e-12));
    let last = control.levels.len().saturating_sub(1);
    let control_ratio = control.mean(last) / control.mean(0);
    let control_decays = !(control_ratio >= PLATEAU_FRACTION);
    let report = CorrectorReport {
        passed: decays && !control_decays,
        fbar,
        levels: main.levels.clone(),
        mean,
        control_mean: (0..control.levels.len()).map(|l| control.mean(l)).collect(),
        decays,
        control_decays,
        control_ratio,
        deterministic,
    };
    out.write_json("report.json", &report)?;
    Ok((report, seeds))
}
