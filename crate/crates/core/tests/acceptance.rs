//! Acceptance criteria at their default tolerances, one line per criterion.
//!
//! Runs without the libtest harness so the lines are printed on success too.

use std::process::ExitCode;

use halfspace_ns::config::Config;
use halfspace_ns::harness::{run_checks, CRITERIA};

fn main() -> ExitCode {
    let cfg = Config::default();
    let mut failed = Vec::new();
    for &(id, name, checks) in CRITERIA {
        let records = run_checks(&cfg, checks);
        let pass = !records.is_empty() && records.iter().all(|r| r.pass);
        println!("criterion {id:>2} {name:<24} {}", if pass { "PASS" } else { "FAIL" });
        for r in &records {
            println!(
                "    {:<26} {:<10} measured {:>12.4e} tol {:>9.2e} {:>7.1}s {}  {}",
                r.check,
                r.level,
                r.measured,
                r.tolerance,
                r.runtime_s,
                if r.pass { "ok" } else { "FAIL" },
                r.detail
            );
        }
        if !pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", CRITERIA.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
