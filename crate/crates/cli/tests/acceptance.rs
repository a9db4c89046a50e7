//! Runs the acceptance criteria at full size and prints one PASS/FAIL line each.
//! A criterion that passes but overruns its wall-clock target also fails here.
//!
//! `cargo test -p solwave-cli --test acceptance -- 6 7` runs a subset;
//! `SOLWAVE_ACCEPTANCE_QUICK=1` uses the reduced samples of `solwave all --quick`.

use solwave_cli::acceptance::{run_criterion, Effort, CRITERIA};
use solwave_cli::config::RunConfig;
use solwave_cli::context::Context;
use std::process::ExitCode;

fn main() -> ExitCode {
    let selected: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let quick = std::env::var_os("SOLWAVE_ACCEPTANCE_QUICK").is_some();
    let ctx = Context::new(RunConfig::default());
    let effort = Effort::new(&ctx, quick);
    let mut failed = Vec::new();
    let mut total = 0.0;
    for &(id, _, _) in CRITERIA.iter().filter(|c| selected.is_empty() || selected.contains(&c.0)) {
        let outcome = run_criterion(&ctx, id, effort);
        println!("{}", outcome.line());
        total += outcome.seconds;
        if !outcome.pass {
            failed.push(id);
        } else if outcome.seconds > outcome.budget_seconds {
            println!("FAIL [{id:>2}] over its {} s target", outcome.budget_seconds);
            failed.push(id);
        }
    }
    println!("acceptance: {} failed {failed:?}, {total:.1} s", failed.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
