use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use billiard_cli::cache::{BasisCache, CACHE_ENV};
use billiard_cli::commands::{run_classical, run_otoc, run_solve, run_sweep};
use billiard_cli::config::ExperimentConfig;
use billiard_cli::presets;
use billiard_cli::validate::{self, ValidateOptions};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "billiard", version, about = "Quantum and classical OTOCs in polygonal billiards")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the eigenbasis and write spectrum and Weyl diagnostics.
    Solve(RunArgs),
    /// Classical OTOC from a Wigner ensemble.
    Classical(RunArgs),
    /// Quantum OTOC, log-OTOC and growth fits (plus the classical curve if enabled).
    Otoc(RunArgs),
    /// Quantum OTOC over several hbar values and the rate trend.
    Sweep(RunArgs),
    /// Run the acceptance criteria.
    Validate(ValidateArgs),
    /// List the shipped presets.
    Presets,
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Shipped preset name (see `billiard presets`).
    #[arg(long)]
    preset: Option<String>,
    /// Override the hbar list.
    #[arg(long, value_delimiter = ',')]
    hbar: Option<Vec<f64>>,
    /// Override the mesh size.
    #[arg(long)]
    h: Option<f64>,
    /// Override the number of states (per sector for quarter solves).
    #[arg(long)]
    states: Option<usize>,
    /// Override the packet center, as `x,y`.
    #[arg(long, value_delimiter = ',')]
    r0: Option<Vec<f64>>,
    /// Override the launch angle.
    #[arg(long)]
    theta: Option<f64>,
    /// Override the Monte Carlo seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, short)]
    out: PathBuf,
    /// Directory for cached eigenbases.
    #[arg(long, env = CACHE_ENV)]
    cache_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Solve the unit-square checks on a coarse mesh; criteria 1 and 2 must fail.
    #[arg(long)]
    coarse: bool,
    /// Run only these criteria.
    #[arg(long, value_delimiter = ',')]
    only: Option<Vec<u8>>,
    /// Write the results as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long, env = CACHE_ENV)]
    cache_dir: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(name)) => presets::get(name)
                .with_context(|| format!("unknown preset {name:?}; known: {}", presets::NAMES.join(", ")))?,
            (None, None) => bail!("give --config or --preset"),
        };
        if let Some(h) = &self.hbar {
            cfg.hbar = h.clone();
        }
        if self.h.is_some() {
            cfg.spectral.h = self.h;
        }
        if self.states.is_some() {
            cfg.spectral.states = self.states;
        }
        if let Some(r) = &self.r0 {
            let [x, y] = r[..] else { bail!("--r0 takes two values, `x,y`") };
            cfg.packet.r0 = [x, y];
        }
        if let Some(t) = self.theta {
            cfg.packet.theta = t;
        }
        if let Some(s) = self.seed {
            cfg.classical.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn cache(&self) -> BasisCache {
        BasisCache::from_env(self.cache_dir.clone())
    }
}

fn run(cli: Cli) -> Result<bool> {
    let failed = |checks: &[billiard_cli::output::Check]| checks.iter().any(|c| !c.passed);
    match cli.command {
        Command::Solve(a) => {
            let m = run_solve(&a.config()?, &a.out, &a.cache())?;
            report(&m.checks);
            Ok(!failed(&m.checks))
        }
        Command::Classical(a) => {
            let m = run_classical(&a.config()?, &a.out)?;
            report(&m.checks);
            Ok(!failed(&m.checks))
        }
        Command::Otoc(a) => {
            let r = run_otoc(&a.config()?, &a.out, &a.cache())?;
            report(&r.manifest.checks);
            Ok(!failed(&r.manifest.checks))
        }
        Command::Sweep(a) => {
            let r = run_sweep(&a.config()?, &a.out, &a.cache())?;
            report(&r.manifest.checks);
            Ok(!failed(&r.manifest.checks))
        }
        Command::Validate(a) => {
            let results = validate::run(ValidateOptions {
                cache: BasisCache::from_env(a.cache_dir),
                coarse: a.coarse,
                only: a.only,
            });
            for r in &results {
                println!("{}", r.line());
            }
            if let Some(path) = a.json {
                std::fs::write(&path, serde_json::to_string_pretty(&results)?)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(results.iter().all(|r| r.passed))
        }
        Command::Presets => {
            for (n, d) in presets::NAMES.iter().zip(presets::DESCRIPTIONS) {
                println!("{n:<24} {d}");
            }
            Ok(true)
        }
    }
}

fn report(checks: &[billiard_cli::output::Check]) {
    for c in checks {
        eprintln!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
