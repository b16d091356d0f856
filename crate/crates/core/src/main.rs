use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use ris_crn::alt_optimizer::{run_algorithm1, OptimizerParams};
use ris_crn::channel_model::generate_channels;
use ris_crn::experiments::{run_sweep, SweepSpec};
use ris_crn::scenario::Scenario;

#[derive(Parser)]
#[command(name = "ris-crn", version, about = "RIS-aided underlay cognitive radio optimizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo sweep and write the summary CSV.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        /// Base scenario; the bundled default is used when omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the spec's base seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
    },
    /// Optimize one channel draw and print the result as JSON.
    Solve {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Optimizer parameters as JSON.
        #[arg(long)]
        params: Option<PathBuf>,
    },
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn load_scenario(path: Option<&PathBuf>) -> ris_crn::Result<Scenario> {
    match path {
        Some(p) => Scenario::from_path(p),
        None => Ok(Scenario::reference_default()),
    }
}

fn run(cli: Cli) -> ris_crn::Result<()> {
    match cli.command {
        Command::Sweep { spec, scenario, out, seed, workers } => {
            let mut spec = SweepSpec::from_path(spec)?;
            if let Some(seed) = seed {
                spec.base_seed = seed;
            }
            let scenario = load_scenario(scenario.as_ref())?;
            let result = run_sweep(&spec, &scenario, workers)?;
            result.write_csv(BufWriter::new(File::create(out)?))?;
            let violations: usize = result.rows.iter().map(|r| r.violations).sum();
            if violations > 0 {
                error!("{violations} trials ended infeasible");
            }
        }
        Command::Solve { scenario, seed, params } => {
            let scenario = load_scenario(scenario.as_ref())?;
            let params: OptimizerParams = match params {
                Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
                None => OptimizerParams::default(),
            };
            let channels = generate_channels(&scenario, &scenario.derive_geometry()?, seed)?;
            let result = run_algorithm1(&channels, &scenario, &params, seed)?;
            println!("{}", serde_json::to_string_pretty(&result)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RIS_CRN_LOG", "error")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
