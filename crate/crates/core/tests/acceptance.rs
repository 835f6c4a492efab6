//! Acceptance suite: one line per criterion, nonzero exit on any failure.

use std::process::ExitCode;

use minetax_core::verify::{run_all, VerifySettings};
use minetax_core::ModelConfig;

fn main() -> ExitCode {
    let report = run_all(&ModelConfig::default(), &VerifySettings::default());
    println!("\nacceptance criteria");
    for id in 1..=9 {
        match report.get(id) {
            Some(check) => println!("{check}"),
            None => println!("[FAIL] {id:>2} missing from report"),
        }
    }
    for extra in report.checks.iter().filter(|c| c.id == 0) {
        println!("{extra}");
    }
    let complete = (1..=9).all(|id| report.get(id).is_some());
    if complete && report.all_passed() {
        println!("acceptance: all criteria passed\n");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED\n");
        ExitCode::FAILURE
    }
}
