use std::process::ExitCode;

use clap::Parser;
use sefdm_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let env_seed = std::env::var("SEFDM_SEED").ok();
    match run(&cli, env_seed.as_deref(), &mut std::io::stderr()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
