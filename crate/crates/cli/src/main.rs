use std::process::ExitCode;

use clap::Parser;
use tracing_subscriber::EnvFilter;

use toponet_cli::{run_pipeline, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let result = cli
        .overrides
        .resolve()
        .and_then(|config| run_pipeline(&config, &cli.command));
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("toponet: {e}");
            ExitCode::FAILURE
        }
    }
}
