use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use exposure::config::RunConfig;
use exposure::experiment as exp;

#[derive(Parser)]
#[command(name = "exposure", version, about = "Exposure PDMP simulation, couplings and convergence bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate single paths and write per-time means of (X, Theta, A, N_t).
    Simulate(Common),
    /// Compute every rate and constant and write rate_report.json (no simulation).
    Rates(Common),
    /// Run the coupling experiment and write curves and replica reports.
    Couple(Common),
    /// Run the coupling experiment and check every bound; exit 1 on failure.
    Verify(Common),
    /// Write sampled paths and event logs.
    DumpPaths(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override experiment.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override outputs.directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override experiment.n_replicas.
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    quiet: bool,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.experiment.seed = seed;
        }
        if let Some(n) = self.replicas {
            cfg.experiment.n_replicas = n;
        }
        if let Some(out) = &self.out {
            cfg.outputs.directory = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn report(quiet: bool, files: &[PathBuf]) {
    if !quiet {
        for f in files {
            println!("wrote {}", f.display());
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    let common = match &cli.command {
        Command::Simulate(c)
        | Command::Rates(c)
        | Command::Couple(c)
        | Command::Verify(c)
        | Command::DumpPaths(c) => c,
    };
    let cfg = common.load()?;
    let dir = cfg.outputs.directory.clone();
    let quiet = common.quiet;
    match cli.command {
        Command::Simulate(_) => {
            let mut files = vec![exp::write_simulate(&cfg, &dir)?];
            if cfg.outputs.paths {
                files.extend(exp::write_paths(&cfg, &dir)?);
            }
            report(quiet, &files);
        }
        Command::Rates(_) => {
            let r = exp::run_rates(&cfg)?;
            report(quiet, &[exp::write_rate_report(&r, &dir)?]);
            if !quiet {
                println!("TV rate {:?}, W1 rate {:?}", r.tv_curve.rate(), r.w1_curve.rate());
            }
        }
        Command::Couple(_) => {
            let out = exp::run_couple(&cfg)?;
            let mut files = exp::write_couple(&out, &dir)?;
            if cfg.outputs.paths {
                files.extend(exp::write_paths(&cfg, &dir)?);
            }
            report(quiet, &files);
        }
        Command::Verify(_) => {
            let (out, v) = exp::run_verify(&cfg)?;
            let mut files = exp::write_couple(&out, &dir)?;
            files.push(exp::write_verify(&v, &dir)?);
            report(quiet, &files);
            if !quiet {
                for c in &v.checks {
                    println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                }
            }
            return Ok(v.passed());
        }
        Command::DumpPaths(_) => report(quiet, &exp::write_paths(&cfg, &dir)?),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli).context("exposure") {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
