//! Serves the pool API.
//!
//! Exit status: 0 on a clean shutdown, 1 on a runtime failure, 2 on a
//! configuration error.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;

use poolgaze_core::clock::SystemClock;
use poolgaze_core::collector::DEFAULT_INTERVAL_S;
use poolgaze_core::source::SourceSpec;
use poolgaze_server::{router, ServerConfig, DEFAULT_CACHE_TTL_S};

#[derive(Debug, Parser)]
#[command(name = "poolgaze-serve", about = "HTTP API over a pool data root")]
struct Args {
    /// Data root directory written by the collector.
    #[arg(long)]
    data_root: PathBuf,
    /// Live source: cmd:<command>, file:<path> or sim:<scenario file>.
    #[arg(long)]
    source: String,
    /// Address to listen on.
    #[arg(long, default_value = "127.0.0.1:8080")]
    listen: String,
    /// Lifetime of the cached live snapshot in seconds; 0 disables caching.
    #[arg(long, default_value_t = DEFAULT_CACHE_TTL_S)]
    refresh_cache_s: u64,
    /// Collector interval the data root was written with.
    #[arg(long, default_value_t = DEFAULT_INTERVAL_S)]
    interval_s: u32,
    /// Allowed CORS origin; any origin when omitted.
    #[arg(long)]
    cors_origin: Option<String>,
}

#[tokio::main]
async fn main() -> ExitCode {
    let args = Args::parse();
    let source = match args.source.parse::<SourceSpec>() {
        Ok(spec) => match spec.open(true) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("poolgaze-serve: {e}");
                return ExitCode::from(2);
            }
        },
        Err(e) => {
            eprintln!("poolgaze-serve: {e}");
            return ExitCode::from(2);
        }
    };
    let mut config = ServerConfig::new(args.data_root);
    config.cache_ttl_s = args.refresh_cache_s;
    config.interval_s = args.interval_s;
    config.cors_origin = args.cors_origin;
    let app = match router(config, source, Arc::new(SystemClock)) {
        Ok(app) => app,
        Err(e) => {
            eprintln!("poolgaze-serve: {e}");
            return ExitCode::from(2);
        }
    };
    let listener = match tokio::net::TcpListener::bind(&args.listen).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("poolgaze-serve: cannot listen on {}: {e}", args.listen);
            return ExitCode::from(1);
        }
    };
    eprintln!("poolgaze-serve: listening on {}", args.listen);
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    match axum::serve(listener, app).with_graceful_shutdown(shutdown).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("poolgaze-serve: {e}");
            ExitCode::from(1)
        }
    }
}
