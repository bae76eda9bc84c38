use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use sspsde::experiments::{run, run_and_write, ExperimentConfig, ExperimentKind};
use sspsde::parallel::Execution;

/// Strong-stability-preserving stochastic RK experiments.
#[derive(Parser, Debug)]
#[command(name = "sspsde", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an experiment described by an INI file.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Use the published grid sizes, horizons and ensemble sizes.
        #[arg(long)]
        paper_scale: bool,
        /// Output directory (overrides `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write PGM images of the final fields.
        #[arg(long)]
        pgm: bool,
        #[command(flatten)]
        exec: ExecArgs,
    },
    /// Radius of absolute monotonicity of a tableau.
    Radius {
        /// Builtin name: fe, ssp22, ssp33, ssp104, midpoint, gamma(<v>).
        #[arg(long, default_value = "ssp104", conflicts_with = "tableau")]
        method: String,
        /// Butcher tableau file: stage count, rows of A, then b.
        #[arg(long)]
        tableau: Option<PathBuf>,
    },
    /// Monte Carlo convergence study on the linear test SDE.
    Converge {
        #[arg(long, default_value = "em")]
        method: String,
        #[arg(long, default_value = "gaussian")]
        sampler: String,
        /// Limit the error is measured against: ito or stratonovich.
        #[arg(long, default_value = "ito")]
        target: String,
        /// `ms` (mean-square) or `weak` (error of the mean).
        #[arg(long, default_value = "ms")]
        estimator: String,
        /// Step sizes, e.g. `2^-4,2^-5,2^-6,2^-7` or `1/2 1/4 1/8 1/16`.
        #[arg(long, default_value = "2^-4,2^-5,2^-6,2^-7,2^-8,2^-9")]
        dt_list: String,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        #[arg(long, default_value_t = 0.5)]
        b: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        exec: ExecArgs,
    },
    /// Monte Carlo moments of an increment sampler.
    ValidateIncrements {
        #[arg(long, default_value = "truncated_gaussian:1")]
        sampler: String,
        #[arg(long, default_value = "0.1")]
        dt: String,
        #[arg(long, default_value_t = 1_000_000)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Print the default configuration of an experiment as INI.
    Config { experiment: String },
}

#[derive(Args, Debug, Clone, Copy)]
struct ExecArgs {
    /// Run everything on the calling thread.
    #[arg(long)]
    sequential: bool,
}

impl ExecArgs {
    fn apply(self, cfg: &mut ExperimentConfig) {
        if self.sequential || !Execution::parallel_available() {
            cfg.exec = Execution::Sequential;
        }
    }
}

fn analysis(mut cfg: ExperimentConfig, pairs: &[(&str, String)], out: Option<PathBuf>) -> Result<()> {
    for (k, v) in pairs {
        cfg.set(k, v).with_context(|| format!("--{}", k.replace('_', "-")))?;
    }
    let report = match out {
        Some(dir) => {
            cfg.output_dir = dir;
            run_and_write(&cfg)?
        }
        None => run(&cfg)?,
    };
    print!("{}", report.summary);
    Ok(())
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            config,
            seed,
            paper_scale,
            out,
            pgm,
            exec,
        } => {
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let mut cfg = ExperimentConfig::from_ini(&text).with_context(|| format!("in {}", config.display()))?;
            if paper_scale {
                cfg.apply_paper_scale();
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            cfg.write_pgm |= pgm;
            exec.apply(&mut cfg);
            log::info!("running {} into {}", cfg.experiment, cfg.output_dir.display());
            let report = run_and_write(&cfg)?;
            print!("{}", report.summary);
            Ok(true)
        }
        Command::Radius { method, tableau } => {
            let mut pairs = vec![("method", method)];
            if let Some(t) = tableau {
                pairs.push(("tableau", t.display().to_string()));
            }
            analysis(ExperimentConfig::defaults(ExperimentKind::Radius), &pairs, None)?;
            Ok(true)
        }
        Command::Converge {
            method,
            sampler,
            target,
            estimator,
            dt_list,
            paths,
            seed,
            a,
            b,
            out,
            exec,
        } => {
            let mut cfg = ExperimentConfig::defaults(ExperimentKind::Converge);
            exec.apply(&mut cfg);
            let pairs = [
                ("method", method),
                ("sampler", sampler),
                ("target", target),
                ("estimator", estimator),
                ("dt_list", dt_list),
                ("paths", paths.to_string()),
                ("seed", seed.to_string()),
                ("sde_a", a.to_string()),
                ("sde_b", b.to_string()),
            ];
            analysis(cfg, &pairs, out)?;
            Ok(true)
        }
        Command::ValidateIncrements { sampler, dt, n, seed } => {
            let mut cfg = ExperimentConfig::defaults(ExperimentKind::ValidateIncrements);
            for (k, v) in [("sampler", sampler), ("dt", dt), ("n_samples", n.to_string()), ("seed", seed.to_string())] {
                cfg.set(k, &v)?;
            }
            let report = run(&cfg)?;
            print!("{}", report.summary);
            Ok(!report.moments.is_some_and(|m| m.any_flagged()))
        }
        Command::Config { experiment } => {
            let kind: ExperimentKind = experiment.parse()?;
            print!("{}", ExperimentConfig::defaults(kind).to_ini());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
