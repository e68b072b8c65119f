use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use parahom::output::OutputDir;
use parahom::runner::{resolve_threads, RayonRunner, THREADS_ENV};
use parahom::{execute, AppError, AppResult, ExperimentConfig};

#[derive(Parser)]
#[command(name = "parahom", version, about = "Quantitative homogenization experiments for parabolic equations in random environments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Invariant and bound checks on the building blocks.
    Validate(Common),
    /// Monte Carlo moments of the sub/superdiffusion measures.
    EstimateMu(Common),
    /// Effective operator table by bisection, with a drift oracle.
    EffectiveF(Common),
    /// Decay of approximate correctors with the cube size.
    CorrectorDecay(Common),
    /// Homogenization error against ε and the fitted exponent.
    HomogRate(Common),
    /// Second-moment decay across levels and the fitted rate.
    MomentDecay(Common),
}

#[derive(Args)]
struct Common {
    /// TOML or JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `out`, then `out/<subcommand>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of Monte Carlo seeds.
    #[arg(long)]
    seeds: Option<usize>,
    /// Worker threads (0 = all cores); overridden by PARAHOM_THREADS.
    #[arg(long)]
    threads: Option<usize>,
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Command::Validate(c) => ("validate", c),
            Command::EstimateMu(c) => ("estimate-mu", c),
            Command::EffectiveF(c) => ("effective-f", c),
            Command::CorrectorDecay(c) => ("corrector-decay", c),
            Command::HomogRate(c) => ("homog-rate", c),
            Command::MomentDecay(c) => ("moment-decay", c),
        }
    }
}

fn run(cli: Cli) -> AppResult<bool> {
    let (kind, args) = cli.command.parts();
    let (mut cfg, bytes) = ExperimentConfig::load(&args.config)?;
    if let Some(k) = &cfg.kind {
        if k != kind {
            return Err(AppError::config(format!("config is for `{k}`, not `{kind}`")));
        }
    }
    if args.seeds.is_some() {
        cfg.seeds = args.seeds;
    }
    let env = std::env::var(THREADS_ENV).ok();
    let threads = resolve_threads(args.threads, env.as_deref())?;
    let runner = RayonRunner::new(threads)?;
    let dir = args
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(kind));
    let mut out = OutputDir::create(&dir)?;
    let outcome = execute(kind, &cfg, &runner, &mut out)?;
    out.finish(kind, &bytes, &outcome.seeds)?;
    for line in &outcome.summary {
        println!("{line}");
    }
    println!("{kind}: {} ({})", if outcome.passed { "pass" } else { "FAIL" }, dir.display());
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
