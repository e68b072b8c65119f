//! `effective-f`: the `F̄` table, its checks, and the drift oracle.

use std::path::Path;

use parahom_core::effective::{build_fbar_table, drift_oracle, estimate_fbar, EffectiveEstimate, FbarTable};
use parahom_core::environment::{Environment, EnvironmentSpec};
use parahom_core::exec::SeedRunner;
use parahom_core::lattice::CubeIndex;
use parahom_core::mu::operator_range;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{AppError, AppResult};
use crate::output::OutputDir;
use crate::plot::Plot;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Row1 {
    m: f64,
    fbar: f64,
    ci: f64,
    repaired: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Row2 {
    m1: f64,
    m2: f64,
    fbar: f64,
    ci: f64,
    repaired: bool,
}

pub fn write_fbar_csv(out: &mut OutputDir, table: &FbarTable) -> AppResult<()> {
    let n = table.axis.len();
    if table.dim == 1 {
        let rows: Vec<Row1> = (0..n)
            .map(|i| Row1 {
                m: table.axis[i],
                fbar: table.values[i],
                ci: table.ci[i],
                repaired: table.repaired,
            })
            .collect();
        out.write_csv("fbar.csv", &rows)
    } else {
        let mut rows = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                rows.push(Row2 {
                    m1: table.axis[i],
                    m2: table.axis[j],
                    fbar: table.values[i * n + j],
                    ci: table.ci[i * n + j],
                    repaired: table.repaired,
                });
            }
        }
        out.write_csv("fbar.csv", &rows)
    }
}

/// Reloads a table written by [`write_fbar_csv`].
pub fn read_fbar_csv(path: &Path, spec: &EnvironmentSpec) -> AppResult<FbarTable> {
    let bad = |msg: &str| AppError::config(format!("{}: {msg}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| AppError::config(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers()?.clone();
    let mut repaired = false;
    let table = if headers.iter().any(|h| h == "m") {
        let rows: Vec<Row1> = rdr.deserialize().collect::<Result<_, _>>()?;
        repaired = rows.iter().any(|r| r.repaired);
        FbarTable::new(
            1,
            rows.iter().map(|r| r.m).collect(),
            rows.iter().map(|r| r.fbar).collect(),
            rows.iter().map(|r| r.ci).collect(),
            spec.lambda,
            spec.big_lambda,
        )
    } else {
        let rows: Vec<Row2> = rdr.deserialize().collect::<Result<_, _>>()?;
        let n = (rows.len() as f64).sqrt().round() as usize;
        if n * n != rows.len() {
            return Err(bad("two-dimensional table must be a full square grid"));
        }
        let axis: Vec<f64> = rows.iter().step_by(n).map(|r| r.m1).collect();
        for (k, r) in rows.iter().enumerate() {
            if r.m1 != axis[k / n] || r.m2 != rows[k % n].m2 || rows[k % n].m2 != axis[k % n] {
                return Err(bad("two-dimensional table rows are out of order"));
            }
            repaired |= r.repaired;
        }
        FbarTable::new(
            2,
            axis,
            rows.iter().map(|r| r.fbar).collect(),
            rows.iter().map(|r| r.ci).collect(),
            spec.lambda,
            spec.big_lambda,
        )
    };
    let mut table = table.map_err(|e| bad(&e.to_string()))?;
    if table.dim != spec.dim {
        return Err(bad("table dimension differs from the environment"));
    }
    table.repaired = repaired;
    Ok(table)
}

#[derive(Debug, Clone, Serialize)]
pub struct PointReport {
    pub m: Vec<f64>,
    pub fbar: f64,
    pub lo: f64,
    pub hi: f64,
    pub e: f64,
    pub e_ci: f64,
    pub e_star: f64,
    pub e_star_ci: f64,
    pub vanishes: bool,
    /// Estimate one level down and the gap, a proxy for finite-level bias.
    pub coarse_fbar: Option<f64>,
    pub level_gap: Option<f64>,
    /// Range of `F(M, ·, ·)` over sampled cells.
    pub cell_min: f64,
    pub cell_max: f64,
    pub in_cell_range: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub m: f64,
    pub fbar: f64,
    pub oracle: f64,
    pub oracle_ci: f64,
    pub relative_gap: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EffectiveReport {
    pub passed: bool,
    pub level: i32,
    pub deterministic: bool,
    pub repaired: bool,
    pub monotone: bool,
    /// `0 ≤ F̄(M₁) - F̄(M₂) ≤ Λ tr(M₂ - M₁) + 2 tol` on neighbouring points.
    pub ellipticity_ok: bool,
    /// Deterministic laws only: largest `|F̄(M) - F(M)|`.
    pub exact_error: Option<f64>,
    pub points: Vec<PointReport>,
    pub oracle: Option<OracleReport>,
}

fn cell_range(spec: &EnvironmentSpec, level: i32, seeds: &[u64], shift: &parahom_core::environment::SymMatrix) -> AppResult<(f64, f64)> {
    let cube = CubeIndex::origin(spec.dim, level);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &s in seeds {
        let env = Environment::new(spec.with_seed(s))?;
        let (a, b) = operator_range(&env, &cube, shift);
        lo = lo.min(a);
        hi = hi.max(b);
    }
    Ok((lo, hi))
}

fn ellipticity_ok(table: &FbarTable, tol: f64) -> bool {
    let x = &table.axis;
    let n = x.len();
    let pair = |a: f64, b: f64, dm: f64| {
        let drop = a - b;
        drop >= -2.0 * tol && drop <= table.big_lambda * dm + 2.0 * tol
    };
    if table.dim == 1 {
        (0..n - 1).all(|i| pair(table.values[i], table.values[i + 1], x[i + 1] - x[i]))
    } else {
        (0..n).all(|r| {
            (0..n - 1).all(|k| {
                pair(table.values[r * n + k], table.values[r * n + k + 1], x[k + 1] - x[k])
                    && pair(table.values[k * n + r], table.values[(k + 1) * n + r], x[k + 1] - x[k])
            })
        })
    }
}

pub fn run<R: SeedRunner>(cfg: &ExperimentConfig, runner: &R, out: &mut OutputDir) -> AppResult<(EffectiveReport, FbarTable, Vec<u64>)> {
    let spec = cfg.spec()?;
    let seeds = cfg.seed_list(cfg.seeds.unwrap_or(cfg.fbar_seeds));
    let level = cfg.fbar_level;
    let fcfg = super::fbar_config(cfg, level);
    let (table, estimates) = build_fbar_table(&spec, &cfg.m_grid, &seeds, &fcfg, runner)?;
    let deterministic = spec.is_deterministic();
    let mut points = Vec::with_capacity(estimates.len());
    let mut exact_error: Option<f64> = None;
    for est in &estimates {
        points.push(point_report(cfg, &spec, est, &seeds, runner)?);
        if deterministic {
            let env = Environment::new(spec.clone())?;
            let f = env.evaluate(&est.shift, &[0.0, 0.0][..spec.dim], 0.5)?;
            let e = (est.ell - f).abs();
            exact_error = Some(exact_error.map_or(e, |v| v.max(e)));
        }
    }
    let oracle = if cfg.oracle && !deterministic {
        let side = 3f64.powi(cfg.oracle_eps_level as i32);
        let o = drift_oracle(&spec, &cfg.shift(), side, side / 3.0, cfg.refinement, &seeds, runner)?;
        let fbar = table.eval([cfg.m, cfg.m]);
        let rel = (fbar - o.mean).abs() / o.mean.abs().max(1e-12);
        Some(OracleReport {
            m: cfg.m,
            fbar,
            oracle: o.mean,
            oracle_ci: o.ci,
            relative_gap: rel,
            limit: cfg.slack.oracle,
        })
    } else {
        None
    };
    let monotone = table.is_monotone();
    let ell_ok = ellipticity_ok(&table, cfg.tol);
    let passed = monotone
        && ell_ok
        && points.iter().all(|p| p.in_cell_range)
        && exact_error.map_or(true, |e| e <= cfg.tol)
        && oracle.as_ref().map_or(true, |o| o.relative_gap <= o.limit);
    write_fbar_csv(out, &table)?;
    if table.dim == 1 {
        let mut plot = Plot::new(&format!("effective operator at level {level}"), "m", "Fbar(m)");
        plot.points = table.axis.iter().copied().zip(table.values.iter().copied()).collect();
        plot.line = plot.points.clone();
        out.write_text("fbar.svg", &plot.render())?;
    }
    let report = EffectiveReport {
        passed,
        level,
        deterministic,
        repaired: table.repaired,
        monotone,
        ellipticity_ok: ell_ok,
        exact_error,
        points,
        oracle,
    };
    out.write_json("report.json", &report)?;
    Ok((report, table, seeds))
}

fn point_report<R: SeedRunner>(
    cfg: &ExperimentConfig,
    spec: &EnvironmentSpec,
    est: &EffectiveEstimate,
    seeds: &[u64],
    runner: &R,
) -> AppResult<PointReport> {
    let d = spec.dim;
    let coarse_fbar = if est.level > 0 {
        let c = estimate_fbar(spec, &est.shift, seeds, &super::fbar_config(cfg, est.level - 1), runner)?;
        Some(c.ell)
    } else {
        None
    };
    let (cell_min, cell_max) = cell_range(spec, est.level, seeds, &est.shift)?;
    Ok(PointReport {
        m: est.shift.diagonal()[..d].to_vec(),
        fbar: est.ell,
        lo: est.lo,
        hi: est.hi,
        e: est.e.mean,
        e_ci: est.e.ci,
        e_star: est.e_star.mean,
        e_star_ci: est.e_star.ci,
        vanishes: est.vanishes,
        coarse_fbar,
        level_gap: coarse_fbar.map(|c| (c - est.ell).abs()),
        cell_min,
        cell_max,
        in_cell_range: est.ell >= cell_min - cfg.tol && est.ell <= cell_max + cfg.tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = EnvironmentSpec::two_phase(2, 0);
        let mut t = FbarTable::linear(2, vec![-1.0, 0.0, 2.0], 0.75, 0.1).unwrap();
        t.lambda = spec.lambda;
        t.big_lambda = spec.big_lambda;
        let mut out = OutputDir::create(dir.path()).unwrap();
        write_fbar_csv(&mut out, &t).unwrap();
        let back = read_fbar_csv(&dir.path().join("fbar.csv"), &spec).unwrap();
        assert_eq!(back, t);
        let spec1 = EnvironmentSpec::two_phase(1, 0);
        let t1 = FbarTable::new(1, vec![0.0, 1.0], vec![0.0, -0.7], vec![1e-3; 2], 0.5, 1.0).unwrap();
        write_fbar_csv(&mut out, &t1).unwrap();
        assert_eq!(read_fbar_csv(&dir.path().join("fbar.csv"), &spec1).unwrap(), t1);
    }
}
