use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use mfo::experiment::{self, ExperimentConfig, Instance};
use mfo::quantize::{self, QuantizeMethod, SourceDistribution};

/// Thread count for the rayon pool.
const THREADS_ENV: &str = "MFO_THREADS";

#[derive(Parser)]
#[command(name = "mfo", version, about = "Mean field optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config and write history.csv, final.json and plot data.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        repeats: Option<usize>,
    },
    /// Move a solution onto a new marginal and report the certified bound.
    Bridge {
        /// A final.json or a measure JSON on Z.
        #[arg(long)]
        mu0: PathBuf,
        /// A measure JSON on X.
        #[arg(long)]
        m1: PathBuf,
        /// Problem name with default parameters (resource, congestion, pigou, grid, finite).
        #[arg(long, conflicts_with = "config")]
        problem: Option<String>,
        /// Take the problem from an experiment config instead.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "bridged.json")]
        out: PathBuf,
    },
    /// Quantize a one-dimensional distribution.
    Quantize {
        /// `uniform:a,b`, `exponential:rate` or `sample:p1,p2,...`.
        #[arg(long)]
        dist: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "grid")]
        method: QuantizeMethod,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a run directory.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

fn configure_threads() -> mfo::Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.parse().map_err(|_| mfo::Error::Config { field: THREADS_ENV.into(), reason: format!("not a count: `{v}`") })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| mfo::Error::Config { field: THREADS_ENV.into(), reason: e.to_string() })?;
    }
    Ok(())
}

fn emit(text: &str, out: Option<&PathBuf>) -> mfo::Result<()> {
    match out {
        Some(path) => std::fs::write(path, format!("{text}\n"))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn execute(cli: Cli) -> mfo::Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Solve { config, seed, out, repeats } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.solver.seed = s;
            }
            if let Some(r) = repeats {
                cfg.repeats = r;
            }
            let dir = out.or_else(|| cfg.outputs.clone()).unwrap_or_else(|| PathBuf::from("out"));
            let summary = experiment::run(&cfg, &dir)?;
            for ((seed, obj), gap) in summary.seeds.iter().zip(&summary.objectives).zip(&summary.gaps) {
                println!("seed {seed}: objective {obj:.9e}, gap {gap:.3e}");
            }
            println!("wrote {}", dir.display());
        }
        Command::Bridge { mu0, m1, problem, config, out } => {
            let instance = match (problem, config) {
                (Some(name), _) => Instance::named(&name)?,
                (None, Some(path)) => Instance::build(&ExperimentConfig::load(&path)?.problem)?,
                (None, None) => return Err(mfo::Error::InvalidArgument("pass --problem or --config".into())),
            };
            let (mu0, eps0) = experiment::load_measure(&mu0)?;
            let (m1, _) = experiment::load_measure(&m1)?;
            let p = instance.problem();
            let outcome = experiment::bridge_run(p, &p.metric(), &mu0, &m1, eps0)?;
            emit(&serde_json::to_string_pretty(&outcome)?, Some(&out))?;
            println!("d1 {:.6e}, eps0 {:.3e}, eta {:.6e}, objective {:.9e}", outcome.d1, outcome.eps0, outcome.eta, outcome.objective);
        }
        Command::Quantize { dist, n, method, seed, out } => {
            let dist = SourceDistribution::parse(&dist)?;
            let m = quantize::quantize(&dist, n, method, seed)?;
            let d1 = match dist {
                SourceDistribution::Sample { .. } => None,
                _ => Some(quantize::exact_d1_1d(&dist, &m)?),
            };
            let doc = json!({
                "dist": dist,
                "method": method,
                "n": n,
                "seed": seed,
                "d1": d1,
                "truncated_mass": dist.truncation_mass(n),
                "measure": m,
            });
            emit(&serde_json::to_string_pretty(&doc)?, out.as_ref())?;
        }
        Command::Report { out } => {
            let rep = experiment::report(&out)?;
            let text = serde_json::to_string_pretty(&rep)?;
            std::fs::write(out.join("report.json"), format!("{text}\n"))?;
            println!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
