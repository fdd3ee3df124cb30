use std::io::Write;

use clap::Parser;
use twinmaser_cli::{resolve, run_and_write, Cli};

fn main() {
    let cli = Cli::parse();
    let workers = cli.global.workers;
    let result = resolve(cli).and_then(|cfg| run_and_write(&cfg, workers));
    match result {
        Ok(summary) => {
            let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
            let _ = writeln!(std::io::stdout(), "{text}");
        }
        Err(e) => {
            eprintln!("twinmaser: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
