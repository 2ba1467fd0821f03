//! Runs a harness configuration in-process, the same way the `gaplab`
//! binary does, and prints the report.
//!
//!     cargo run --example run_config -- configs/chern_half_pair.json

use std::path::PathBuf;

use gaplab::harness::{run, RunConfig};

fn main() {
    let path: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            PathBuf::from(concat!(
                env!("CARGO_MANIFEST_DIR"),
                "/../../configs/freq_hofstadter.json"
            ))
        });
    let text = std::fs::read_to_string(&path).expect("readable config");
    let config = match RunConfig::from_json(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(2);
        }
    };
    let outcome = run(&config).unwrap_or_else(|e| {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    });
    println!("{}", serde_json::to_string_pretty(&outcome.report).unwrap());
    println!("exit {}: {}", outcome.exit_code, outcome.message);
}
