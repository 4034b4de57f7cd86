//! Writes a synthetic data root for a scenario: the records a collector
//! would have stored, the machine registry and a ground-truth sidecar.
//!
//! Exit status: 0 on success, 1 on a write failure, 2 on a bad scenario.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use poolgaze_core::sim::{emit_data_root, EmitError, Scenario, GROUND_TRUTH_FILE};
use poolgaze_core::storage::DataRoot;

#[derive(Debug, Parser)]
#[command(name = "poolgaze-sim", about = "Emit a simulated pool data root")]
struct Args {
    /// Scenario file of `key = value` lines. Defaults apply when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the scenario duration with whole days.
    #[arg(long)]
    emit_days: Option<u64>,
    /// Data root directory to write.
    #[arg(long)]
    data_root: PathBuf,
}

fn load(args: &Args) -> Result<Scenario, String> {
    let mut scenario = match &args.scenario {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?
            .parse::<Scenario>()
            .map_err(|e| e.to_string())?,
        None => Scenario::default(),
    };
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    if let Some(days) = args.emit_days {
        scenario.duration_s = days.saturating_mul(86_400);
    }
    scenario.validate().map_err(|e| e.to_string())?;
    Ok(scenario)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let scenario = match load(&args) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("poolgaze-sim: {e}");
            return ExitCode::from(2);
        }
    };
    let root = DataRoot::new(&args.data_root);
    match emit_data_root(&scenario, &root) {
        Ok((truth, reports)) => {
            let jobs = truth.job_intervals().count();
            println!(
                "{} machines, {} polls, {} job intervals; ground truth in {}",
                truth.machines().len(),
                reports.len(),
                jobs,
                args.data_root.join(GROUND_TRUTH_FILE).display()
            );
            ExitCode::SUCCESS
        }
        Err(EmitError::Scenario(e)) => {
            eprintln!("poolgaze-sim: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("poolgaze-sim: {e}");
            ExitCode::from(1)
        }
    }
}
