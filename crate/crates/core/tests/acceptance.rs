//! Acceptance suite. Runs without the libtest harness so the per-criterion
//! lines always reach the output; the exit status carries the verdict.

use std::process::ExitCode;

use circle_mra::verify::{self, VerifyOptions};

fn main() -> ExitCode {
    let opts = VerifyOptions::default();
    let mut failed = Vec::new();
    for id in verify::CRITERIA {
        let report = match verify::run(id, &opts) {
            Ok(r) => r,
            Err(e) => {
                println!("criterion {id:>2} FAIL | error: {e}");
                failed.push(id);
                continue;
            }
        };
        let worst = report.worst().expect("criteria have checks");
        println!(
            "criterion {:>2} {} | {} | worst: {} = {:.3e} (threshold {:.1e}) | {:.2}s",
            id,
            if report.pass() { "PASS" } else { "FAIL" },
            report.title,
            worst.name,
            worst.value,
            worst.threshold,
            report.seconds
        );
        if !report.pass() {
            for c in report.checks.iter().filter(|c| !c.pass) {
                println!("    failed: {} = {:.3e} >= {:.1e}", c.name, c.value, c.threshold);
            }
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("all {} criteria pass", verify::CRITERIA.count());
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
