use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use qemlab_cli::{
    run_oracle, run_regions, run_simulate, run_single, run_sweep, sweep_exit_code, ExperimentConfig, EXIT_CONVERGED,
    EXIT_ERROR, EXIT_NOT_CONVERGED,
};

#[derive(Parser)]
#[command(name = "qemlab", version, about = "Quasi-ergodic measures of noisy open maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every epsilon of the config and compare with the oracle.
    Sweep(Common),
    /// One pipeline pass with all artifacts.
    Single(WithEpsilon),
    /// Oracle pressure and equilibrium state only.
    Oracle(Common),
    /// Monte Carlo conditioned averages against the spectral pass.
    Simulate(WithEpsilon),
    /// Region graph only.
    Regions(WithEpsilon),
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory (defaults to the config's `output`, then `out`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct WithEpsilon {
    #[command(flatten)]
    common: Common,
    /// Noise amplitude; defaults to the last (smallest) configured value.
    #[arg(long)]
    epsilon: Option<f64>,
}

impl Common {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf)> {
        if let Some(n) = self.threads {
            if n == 0 {
                bail!("--threads must be positive");
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .context("configuring the thread pool")?;
        }
        let mut config = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        let out = self
            .out
            .clone()
            .or_else(|| config.output.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        Ok((config, out))
    }
}

impl WithEpsilon {
    fn epsilon(&self, config: &ExperimentConfig) -> Result<f64> {
        let eps = self
            .epsilon
            .unwrap_or_else(|| *config.discretization.epsilons.last().expect("validated"));
        if !(eps > 0.0) {
            bail!("--epsilon must be positive");
        }
        Ok(eps)
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Sweep(c) => {
            let (config, out) = c.load()?;
            let report = run_sweep(&config, Some(&out));
            for r in &report.rows {
                eprintln!(
                    "eps={:e} lambda={:.12} log_lambda={:.12} period={} classes={} dominant={} w1={}",
                    r.epsilon,
                    r.lambda,
                    r.log_lambda,
                    r.period,
                    r.n_classes,
                    r.dominant_class,
                    r.w1_distance_to_reference.map_or("-".into(), |w| format!("{w:.3e}"))
                );
            }
            if let Some(e) = &report.error {
                eprintln!("error: {e}");
            }
            let code = sweep_exit_code(&report);
            eprintln!(
                "{} (final gap {:?}); report in {}",
                match code {
                    EXIT_CONVERGED => "converged",
                    EXIT_NOT_CONVERGED => "not converged",
                    _ => "failed",
                },
                report.final_gap,
                out.display()
            );
            Ok(code)
        }
        Command::Single(w) => {
            let (config, out) = w.common.load()?;
            let eps = w.epsilon(&config)?;
            let report = run_single(&config, eps, &out)?;
            print_json(&report.row)?;
            if let Some(mc) = &report.monte_carlo {
                print_json(mc)?;
            }
            Ok(EXIT_CONVERGED)
        }
        Command::Oracle(c) => {
            let (config, out) = c.load()?;
            let report = run_oracle(&config, &out)?;
            print_json(&report)?;
            Ok(EXIT_CONVERGED)
        }
        Command::Simulate(w) => {
            let (config, out) = w.common.load()?;
            let eps = w.epsilon(&config)?;
            let report = run_simulate(&config, eps, &out)?;
            print_json(&report)?;
            Ok(if report.checks.iter().all(|c| c.agrees) {
                EXIT_CONVERGED
            } else {
                EXIT_NOT_CONVERGED
            })
        }
        Command::Regions(w) => {
            let (config, out) = w.common.load()?;
            let eps = w.epsilon(&config)?;
            let summary = run_regions(&config, eps, &out)?;
            print_json(&summary)?;
            Ok(EXIT_CONVERGED)
        }
    }
}

fn exit(code: i32) -> ExitCode {
    ExitCode::from(u8::try_from(code).unwrap_or(1))
}

fn main() -> ExitCode {
    // clap would exit with 2 on usage errors, which means "not converged" here
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return exit(if e.use_stderr() { EXIT_ERROR } else { EXIT_CONVERGED });
        }
    };
    match run(cli) {
        Ok(code) => exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            exit(EXIT_ERROR)
        }
    }
}
