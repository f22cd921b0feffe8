//! `pandora`: run regret experiments, parameter sweeps and verification suites.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use pandora_core::harness::experiment::{run_experiment, ExperimentSpec, ExperimentSummary, SeedSpec, SweepAxis, SweepSpec};
use pandora_core::harness::verify::{verify, Suite};

#[derive(Debug, Parser)]
#[command(name = "pandora", version, about = "Online threshold learning experiments")]
struct Cli {
    /// Override the spec's seeds with `0..k`.
    #[arg(long, global = true, value_name = "k")]
    seeds: Option<u64>,
    /// Worker threads for independent cells (1 = serial).
    #[arg(long, global = true, value_name = "j", default_value_t = 1)]
    parallel: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment spec.
    Run {
        #[arg(long)]
        spec: PathBuf,
        /// Output directory; falls back to the spec's `out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a spec once per value of a sweep axis.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        /// One of `T`, `n`, `d`.
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a verification suite and print the report as JSON.
    Verify {
        /// cdf, dominance, optimality, oracle, lipschitz, coverage or all.
        #[arg(long)]
        suite: String,
    },
}

fn load(spec: &Path, seeds: Option<u64>) -> Result<ExperimentSpec> {
    let mut parsed = ExperimentSpec::from_file(spec).with_context(|| format!("loading {}", spec.display()))?;
    if let Some(k) = seeds {
        parsed.run.seeds = SeedSpec::Count(k);
    }
    Ok(parsed)
}

fn execute(spec: &ExperimentSpec, out: Option<PathBuf>, parallel: usize) -> Result<ExperimentSummary> {
    let Some(out) = out.or_else(|| spec.out.clone()) else {
        bail!("no output directory: pass --out or set `out` in the spec");
    };
    let summary = run_experiment(spec, &out, parallel)?;
    eprintln!("wrote {} cells and summary.json to {}", summary.cells.len(), out.display());
    for g in &summary.groups {
        let axis = g.axis_value.map(|v| format!(" value={v}")).unwrap_or_default();
        let slope = g.slope.map_or_else(|| "n/a".to_string(), |s| format!("{s:.4}"));
        println!(
            "{:?}{axis}: T={} seeds={} final regret {:.4} +- {:.4}, slope {slope}",
            g.policy,
            g.horizon,
            g.seeds.len(),
            g.final_mean,
            g.final_stderr
        );
    }
    Ok(summary)
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { spec, out } => {
            let spec = load(&spec, cli.seeds)?;
            execute(&spec, out, cli.parallel)?;
        }
        Command::Sweep { spec, axis, values, out } => {
            let mut spec = load(&spec, cli.seeds)?;
            spec.sweep = Some(SweepSpec {
                axis: SweepAxis::parse(&axis)?,
                values,
            });
            execute(&spec, out, cli.parallel)?;
        }
        Command::Verify { suite } => {
            let suite: Suite = suite.parse()?;
            let report = verify(suite)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if !report.passed {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
