//! Runs every acceptance criterion and prints one PASS/FAIL line each.
//!
//! The process fails if any criterion fails other than those listed in
//! `KNOWN_RED`, whose failures are documented with the project.

use std::process::ExitCode;

use hj_cli::acceptance::{run_all, KNOWN_RED};
use hj_cli::config::DEFAULT_SEED;

fn main() -> ExitCode {
    // `cargo test -- --list` and similar probes expect no work
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let results = run_all(DEFAULT_SEED, |r| println!("{}", r.line()));
    let passed = results.iter().filter(|r| r.passed).count();
    let unexpected: Vec<u32> = results.iter().filter(|r| !r.passed && !KNOWN_RED.contains(&r.id)).map(|r| r.id).collect();
    let known: Vec<u32> = results.iter().filter(|r| !r.passed && KNOWN_RED.contains(&r.id)).map(|r| r.id).collect();
    println!("{passed}/{} criteria pass; known red: {known:?}; unexpected failures: {unexpected:?}", results.len());
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
