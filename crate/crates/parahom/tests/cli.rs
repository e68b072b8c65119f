use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
seeds = 4
levels = [0, 1]
ells = [-0.5, 0.0, 0.5]
m = 1.0

[environment]
dimension = 1
lambda = 0.5
Lambda = 1.0
family = "linear"
controls = [[0.5], [1.0]]
offset_range = [0.0, 0.0]
seed = 11
smoothing = 0.0
"#;

fn parahom(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parahom"))
        .args(args)
        .env("PARAHOM_THREADS", threads)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn estimate_mu_is_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", CONFIG);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let ra = parahom(&["estimate-mu", "--config", &cfg, "--out", a.to_str().unwrap()], "1");
    let rb = parahom(&["estimate-mu", "--config", &cfg, "--out", b.to_str().unwrap()], "3");
    assert_eq!(ra.status.code(), Some(0), "{}", String::from_utf8_lossy(&ra.stderr));
    assert_eq!(rb.status.code(), Some(0));
    for f in ["samples.csv", "stats.csv", "report.json", "manifest.json", "stats.svg"] {
        let x = std::fs::read(a.join(f)).unwrap();
        let y = std::fs::read(b.join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "estimate-mu");
    assert_eq!(manifest["seeds"].as_array().unwrap().len(), 4);
}

#[test]
fn json_and_toml_configs_give_identical_results() {
    let dir = tempfile::tempdir().unwrap();
    let toml_path = write(dir.path(), "c.toml", CONFIG);
    let cfg = parahom::ExperimentConfig::parse_toml(CONFIG).unwrap();
    let json_path = write(dir.path(), "c.json", &serde_json::to_string(&cfg).unwrap());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(parahom(&["estimate-mu", "--config", &toml_path, "--out", a.to_str().unwrap()], "1").status.code(), Some(0));
    assert_eq!(parahom(&["estimate-mu", "--config", &json_path, "--out", b.to_str().unwrap()], "1").status.code(), Some(0));
    assert_eq!(std::fs::read(a.join("stats.csv")).unwrap(), std::fs::read(b.join("stats.csv")).unwrap());
}

#[test]
fn seeds_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", CONFIG);
    let out = dir.path().join("o");
    let r = parahom(&["estimate-mu", "--config", &cfg, "--out", out.to_str().unwrap(), "--seeds", "2"], "1");
    assert_eq!(r.status.code(), Some(0));
    let stats = std::fs::read_to_string(out.join("stats.csv")).unwrap();
    assert!(stats.lines().nth(1).unwrap().split(',').nth(2) == Some("2"), "{stats}");
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    let unknown = write(dir.path(), "u.toml", &format!("bogus = 1\n{CONFIG}"));
    let bad_family = write(dir.path(), "f.toml", &CONFIG.replace("\"linear\"", "\"quadratic\""));
    let bad_dim = write(dir.path(), "d.toml", &CONFIG.replace("dimension = 1", "dimension = 3"));
    let bad_refine = write(dir.path(), "r.toml", &format!("refinement = 1\n{CONFIG}"));
    let wrong_kind = write(dir.path(), "k.toml", &format!("kind = \"homog-rate\"\n{CONFIG}"));
    for cfg in [unknown, bad_family, bad_dim, bad_refine, wrong_kind, "/nonexistent/config.toml".to_string()] {
        let r = parahom(&["estimate-mu", "--config", &cfg, "--out", out], "1");
        assert_eq!(r.status.code(), Some(2), "{cfg}: {}", String::from_utf8_lossy(&r.stderr));
    }
    let r = parahom(&["estimate-mu", "--config", "x.toml"], "lots");
    assert_eq!(r.status.code(), Some(2));
    let r = parahom(&["no-such-subcommand"], "1");
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn non_elliptic_law_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    // The second control leaves [λ, Λ]; the ellipticity audit must flag it.
    let text = format!(
        "{}\n[validate]\nenvelope_fields = 1\nmeasure_fields = 1\nabp_samples = 2\nrandom_configs = 2\nlipschitz_seeds = 2\nvariance_seeds = 2\ndensity_refinement = 12\n",
        CONFIG.replace("controls = [[0.5], [1.0]]", "controls = [[0.5], [1.5]]")
    );
    let cfg = write(dir.path(), "bad.toml", &text);
    let out = dir.path().join("o");
    let r = parahom(&["validate", "--config", &cfg, "--out", out.to_str().unwrap()], "1");
    let code = r.status.code();
    assert_eq!(code, Some(1), "{}", String::from_utf8_lossy(&r.stdout));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], false);
}
