use parahom::config::ExperimentConfig;
use parahom::output::OutputDir;
use parahom::pipelines::{corrector, effective, moments};
use parahom_core::environment::EnvironmentSpec;
use parahom_core::exec::Sequential;

fn deterministic() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::for_environment(&EnvironmentSpec::constant(1, 0.7, 0.2));
    cfg.m = 1.0;
    cfg.seeds = Some(2);
    cfg.fbar_seeds = 2;
    cfg.fbar_level = 0;
    cfg.corrector_levels = vec![0, 1, 2];
    cfg.moment_levels = vec![0, 1, 2];
    cfg.m_grid = vec![-1.0, 0.0, 1.0];
    cfg.oracle = false;
    cfg
}

#[test]
fn deterministic_law_recovers_the_operator() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = deterministic();
    let (r, table, _) = effective::run(&cfg, &Sequential, &mut OutputDir::create(dir.path()).unwrap()).unwrap();
    assert!(r.passed && r.deterministic && !r.repaired);
    assert!(r.exact_error.unwrap() <= cfg.tol);
    for (m, v) in table.axis.iter().zip(&table.values) {
        assert!((v - (0.2 - 0.7 * m)).abs() <= cfg.tol);
    }
    let back = effective::read_fbar_csv(&dir.path().join("fbar.csv"), &cfg.spec().unwrap()).unwrap();
    assert_eq!(back, table);
}

#[test]
fn deterministic_correctors_vanish_and_the_control_plateaus() {
    let dir = tempfile::tempdir().unwrap();
    let (r, _) = corrector::run(&deterministic(), &Sequential, &mut OutputDir::create(dir.path()).unwrap()).unwrap();
    assert!(r.mean.iter().all(|&v| v == 0.0), "{:?}", r.mean);
    assert!(!r.control_decays && r.passed);
}

#[test]
fn deterministic_moments_are_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let (r, _) = moments::run(&deterministic(), &Sequential, &mut OutputDir::create(dir.path()).unwrap()).unwrap();
    assert_eq!(r.tag, Some("degenerate"));
    assert!(r.j_sum.iter().all(|&v| v == 0.0));
    assert!(r.fit.is_none() && r.passed);
}

#[test]
fn fixed_effective_value_skips_bisection() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = deterministic();
    cfg.fbar = Some(-0.5);
    let (r, _) = corrector::run(&cfg, &Sequential, &mut OutputDir::create(dir.path()).unwrap()).unwrap();
    assert_eq!(r.fbar, -0.5);
    assert!(r.mean.iter().all(|&v| v > 0.0));
}
