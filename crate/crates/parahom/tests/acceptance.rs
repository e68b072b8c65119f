//! End-to-end acceptance run: one line per criterion, nonzero exit if any
//! criterion fails. Uses the two-phase linear law in one dimension unless a
//! criterion says otherwise.

use std::time::{Duration, Instant};

use parahom::config::ExperimentConfig;
use parahom::output::OutputDir;
use parahom::pipelines::validate::{self, Check};
use parahom::pipelines::{corrector, effective, homog, moments};
use parahom::runner::{resolve_threads, RayonRunner, THREADS_ENV};
use parahom::AppResult;
use parahom_core::environment::EnvironmentSpec;

const SEED: u64 = 2024;

struct Line {
    id: usize,
    name: &'static str,
    passed: bool,
    elapsed: Duration,
    detail: String,
}

fn all(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}

fn describe(checks: &[Check]) -> String {
    checks
        .iter()
        .map(|c| format!("{} {}/{} worst {:.3e} limit {:.3e}", c.name, c.cases - c.failures, c.cases, c.worst, c.limit))
        .collect::<Vec<_>>()
        .join("; ")
}

fn timed<T>(f: impl FnOnce() -> AppResult<T>) -> (AppResult<T>, Duration) {
    let t = Instant::now();
    let r = f();
    (r, t.elapsed())
}

fn base() -> (EnvironmentSpec, ExperimentConfig) {
    let spec = EnvironmentSpec::two_phase(1, SEED);
    let mut cfg = ExperimentConfig::for_environment(&spec);
    cfg.m = 1.0;
    (spec, cfg)
}

fn criterion<T>(
    id: usize,
    name: &'static str,
    budget: Option<Duration>,
    f: impl FnOnce() -> AppResult<T>,
    judge: impl FnOnce(&T) -> (bool, String),
) -> Line {
    let (r, elapsed) = timed(f);
    let (mut passed, mut detail) = match &r {
        Ok(v) => judge(v),
        Err(e) => (false, format!("error: {e}")),
    };
    if let Some(b) = budget {
        if elapsed > b {
            passed = false;
            detail.push_str(&format!("; over the {}s budget", b.as_secs()));
        }
    }
    let line = Line {
        id,
        name,
        passed,
        elapsed,
        detail,
    };
    println!(
        "[{}] criterion {:>2} {:<28} {:>8.1}s  {}",
        if line.passed { "PASS" } else { "FAIL" },
        line.id,
        line.name,
        line.elapsed.as_secs_f64(),
        line.detail
    );
    line
}

fn main() {
    let threads = resolve_threads(None, std::env::var(THREADS_ENV).ok().as_deref()).expect("thread count");
    let runner = RayonRunner::new(threads).expect("thread pool");
    let (spec, cfg) = base();
    let counts = cfg.validate;
    let scratch = std::env::temp_dir().join(format!("parahom-acceptance-{}", std::process::id()));
    let out = |name: &str| OutputDir::create(&scratch.join(name)).expect("output directory");
    let mut lines = Vec::new();

    lines.push(criterion(
        1,
        "envelope suite",
        Some(Duration::from_secs(5)),
        || validate::envelope_suite(&spec, counts.envelope_fields, SEED ^ 1),
        |c| (all(c), describe(c)),
    ));
    lines.push(criterion(
        2,
        "density exactness",
        Some(Duration::from_secs(10)),
        || validate::density_suite(1, counts.density_refinement),
        |c| (all(c), describe(c)),
    ));
    lines.push(criterion(
        3,
        "measure equality",
        None,
        || validate::measure_equality(&spec, counts.measure_fields, SEED ^ 2),
        |c| (c.passed, describe(std::slice::from_ref(c))),
    ));
    lines.push(criterion(
        4,
        "abp inequality",
        Some(Duration::from_secs(180)),
        || validate::abp_suite(&spec, counts.abp_samples, cfg.refinement, cfg.slack.abp, SEED ^ 3),
        |c| (c.passed, describe(std::slice::from_ref(c))),
    ));
    lines.push(criterion(
        5,
        "bounds and subadditivity",
        None,
        || {
            validate::bounds_and_subadditivity(
                &spec,
                counts.random_configs,
                cfg.refinement,
                cfg.slack.bounds,
                cfg.slack.subadditivity,
                SEED ^ 4,
            )
        },
        |c| (all(c), describe(c)),
    ));
    lines.push(criterion(
        6,
        "monotone and lipschitz in ell",
        None,
        || validate::lipschitz_check(&spec, &cfg.ells, cfg.m, &cfg.seed_list(200), cfg.refinement, &runner),
        |c| (c.passed, describe(std::slice::from_ref(c))),
    ));
    lines.push(criterion(
        7,
        "variance decay",
        None,
        || validate::variance_decay(&spec, 0.0, cfg.m, &cfg.seed_list(400), cfg.refinement, &runner),
        |c| (c.passed, describe(std::slice::from_ref(c))),
    ));
    lines.push(criterion(
        8,
        "effective operator",
        None,
        || {
            let det = ExperimentConfig::for_environment(&EnvironmentSpec::constant(1, 0.7, 0.2));
            let (d, _, _) = effective::run(&det, &runner, &mut out("effective-deterministic"))?;
            let (r, table, _) = effective::run(&cfg, &runner, &mut out("effective"))?;
            Ok((d, r, table))
        },
        |(d, r, table)| {
            let exact = d.exact_error.is_some_and(|e| e <= cfg.tol);
            let bracketed = table
                .axis
                .iter()
                .zip(&table.values)
                .filter(|(m, _)| **m > 0.0)
                .all(|(m, v)| *v >= -spec.big_lambda * m - cfg.tol && *v <= -spec.lambda * m + cfg.tol);
            let oracle = r.oracle.as_ref().is_some_and(|o| o.relative_gap <= 0.05);
            let gap = r.oracle.as_ref().map_or(f64::NAN, |o| o.relative_gap);
            (
                exact && bracketed && oracle && r.passed,
                format!(
                    "deterministic error {:.2e}; Fbar(1) {:.5} in [-1, -0.5] {bracketed}; oracle gap {gap:.4}",
                    d.exact_error.unwrap_or(f64::NAN),
                    table.eval([1.0, 1.0]),
                ),
            )
        },
    ));
    lines.push(criterion(
        9,
        "corrector decay",
        None,
        || {
            let mut c = cfg.clone();
            c.seeds = Some(20);
            c.corrector_levels = vec![1, 2, 3, 4];
            corrector::run(&c, &runner, &mut out("corrector"))
        },
        |(r, _)| {
            let n = r.mean.len();
            (
                r.mean[n - 1] < r.mean[0] && !r.control_decays && r.passed,
                format!(
                    "n=1 {:.3e} n=4 {:.3e}; control ratio {:.3} (decays {})",
                    r.mean[0], r.mean[n - 1], r.control_ratio, r.control_decays
                ),
            )
        },
    ));
    lines.push(criterion(
        10,
        "homogenization rate",
        Some(Duration::from_secs(30 * 60)),
        || {
            let mut c = cfg.clone();
            c.seeds = Some(10);
            c.eps_levels = vec![1, 2, 3, 4];
            c.dx_audit = true;
            homog::run(&c, &runner, &mut out("homog"))
        },
        |(r, _)| {
            let (beta, r2) = r.fit.as_ref().map_or((f64::NAN, f64::NAN), |f| (f.exponent, f.r2));
            let worst = r.audit.iter().map(|a| a.relative_change).fold(0.0, f64::max);
            (
                beta > 0.0 && r2 >= 0.9 && r.audit_ok && r.passed,
                format!("beta {beta:.3} R² {r2:.4}; worst dx-halving change {:.2}%", 100.0 * worst),
            )
        },
    ));
    lines.push(criterion(
        11,
        "second-moment decay",
        None,
        || {
            let mut c = cfg.clone();
            c.seeds = Some(400);
            c.moment_levels = vec![0, 1, 2, 3];
            moments::run(&c, &runner, &mut out("moments"))
        },
        |(r, _)| {
            (
                r.strictly_decreasing && r.tau_hi.is_some_and(|t| t < 1.0) && r.passed,
                format!(
                    "J+J* {:?}; tau {:.4} (upper {:.4})",
                    r.j_sum.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>(),
                    r.tau.unwrap_or(f64::NAN),
                    r.tau_hi.unwrap_or(f64::NAN)
                ),
            )
        },
    ));

    let _ = std::fs::remove_dir_all(&scratch);
    let failed = lines.iter().filter(|l| !l.passed).count();
    println!("acceptance: {} of {} criteria passed", lines.len() - failed, lines.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
