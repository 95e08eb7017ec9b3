//! Acceptance suite: every criterion at its full size and tolerance, with
//! one pass/fail line per criterion.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the table.

use std::process::Command;
use std::time::Duration;

use popcount::verify::{run_criteria, CheckResult, Level};

const SEED: u64 = 42;

/// Wall-clock budget per criterion; criteria 3 and 4 share one.
fn budget(id: &str) -> Option<Duration> {
    let secs = match id {
        "1" => 5,
        "2" => 5 * 60,
        "5" => 3 * 60,
        "8" => 5 * 60,
        _ => return None,
    };
    Some(Duration::from_secs(secs))
}

fn line(c: &CheckResult) -> String {
    format!("criterion {:>2}: {} — {} ({})", c.id, if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)
}

#[test]
fn criteria_1_to_10_at_full_size() {
    let report = run_criteria(Level::Full, SEED);
    let mut failures = Vec::new();
    for c in report.checks.iter().filter(|c| c.gating) {
        println!("{}", line(c));
        if !c.passed {
            failures.push(format!("criterion {} failed: {}", c.id, c.detail));
        }
        if let Some(b) = budget(&c.id) {
            if c.elapsed > b {
                failures.push(format!("criterion {} took {:?}, budget {:?}", c.id, c.elapsed, b));
            }
        }
    }
    let shared: Duration = report.checks.iter().filter(|c| c.id == "3" || c.id == "4").map(|c| c.elapsed).sum();
    if shared > Duration::from_secs(10 * 60) {
        failures.push(format!("criteria 3+4 took {shared:?}, budget 10 min"));
    }
    for c in report.checks.iter().filter(|c| !c.gating) {
        println!("supplementary {:>2}: {} — {} ({})", c.id, if c.passed { "ok" } else { "warn" }, c.name, c.detail);
    }
    assert_eq!(report.checks.iter().filter(|c| c.gating).count(), 10);
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn criterion_11_verify_reports_are_byte_identical() {
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_popcount"))
            .args(["verify", "--level", "fast", "--seed", "7"])
            .output()
            .expect("run popcount verify")
    };
    let first = run();
    let second = run();
    let passed = first.status.success() && second.status.success() && first.stdout == second.stdout;
    println!(
        "criterion 11: {} — determinism (two `verify --level fast --seed 7` runs, {} bytes)",
        if passed { "PASS" } else { "FAIL" },
        first.stdout.len()
    );
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stdout));
    assert_eq!(first.stdout, second.stdout);
    let text = String::from_utf8(first.stdout).unwrap();
    for id in 1..=11 {
        assert!(
            text.lines().any(|l| l.starts_with(&format!("{id} ")) && l.contains("PASS")),
            "criterion {id} missing from report:\n{text}"
        );
    }
}
