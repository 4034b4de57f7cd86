//! Polls a status source on aligned ticks and appends the records to a data
//! root. Prints one JSON poll report per line.
//!
//! Exit status: 0 on a clean stop, 1 on a runtime failure, 2 on a
//! configuration error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use poolgaze_core::clock::{Clock, StopSignal, SystemClock};
use poolgaze_core::collector::{
    build_machine_registry, next_tick, poll_once, run_loop, CollectorConfig, PollReport, DEFAULT_INTERVAL_S,
};
use poolgaze_core::source::SourceSpec;
use poolgaze_core::storage::{DataRoot, WriterLock};

#[derive(Debug, Parser)]
#[command(name = "poolgaze-collect", about = "Sample pool status into a data root")]
struct Args {
    /// Data root directory.
    #[arg(long)]
    data_root: PathBuf,
    /// Status source: cmd:<command>, file:<path> or sim:<scenario file>.
    #[arg(long)]
    source: String,
    /// Polling interval in seconds (30..=3600).
    #[arg(long, default_value_t = DEFAULT_INTERVAL_S)]
    interval_s: u32,
    /// Poll once at the current aligned tick and exit (for cron).
    #[arg(long)]
    once: bool,
    /// Rebuild the machine registry from the source. Exits afterwards unless
    /// `--once` is also given.
    #[arg(long)]
    build_registry: bool,
}

fn print_report(report: &PollReport) {
    println!("{}", serde_json::to_string(report).expect("report serializes"));
    for e in &report.errors {
        eprintln!("poolgaze-collect: {}: {e}", report.tick);
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let spec: SourceSpec = match args.source.parse() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("poolgaze-collect: {e}");
            return ExitCode::from(2);
        }
    };
    let mut config = CollectorConfig::new(spec, &args.data_root);
    config.interval_s = args.interval_s;
    if let Err(e) = config.validate() {
        eprintln!("poolgaze-collect: {e}");
        return ExitCode::from(2);
    }
    let source = match config.source.open(true) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("poolgaze-collect: {e}");
            return ExitCode::from(2);
        }
    };
    let root = DataRoot::new(&config.data_root);
    let _lock = match WriterLock::acquire(&root) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("poolgaze-collect: {e}");
            return ExitCode::from(1);
        }
    };
    let clock = SystemClock;

    if args.build_registry {
        match build_machine_registry(source.as_ref(), &root, clock.now()) {
            Ok(r) => eprintln!("poolgaze-collect: registry holds {} machines", r.len()),
            Err(e) => {
                eprintln!("poolgaze-collect: {e}");
                return ExitCode::from(1);
            }
        }
        if !args.once {
            return ExitCode::SUCCESS;
        }
    }

    if args.once {
        let interval = i64::from(config.interval_s);
        let now = clock.now();
        let floor = now - chrono::TimeDelta::seconds(now.timestamp().rem_euclid(interval));
        debug_assert_eq!(next_tick(floor, config.interval_s), floor);
        let report = poll_once(source.as_ref(), &root, floor);
        print_report(&report);
        return if report.errors.is_empty() {
            ExitCode::SUCCESS
        } else {
            ExitCode::from(1)
        };
    }

    let stop = StopSignal::new();
    let handler_stop = stop.clone();
    if let Err(e) = ctrlc::set_handler(move || handler_stop.stop()) {
        eprintln!("poolgaze-collect: cannot install signal handler: {e}");
        return ExitCode::from(1);
    }
    let cycles = run_loop(config.interval_s, source.as_ref(), &root, &clock, &stop, print_report);
    eprintln!("poolgaze-collect: stopped after {cycles} polls");
    ExitCode::SUCCESS
}
