//! Runs every acceptance check and prints one line per check.
//!
//! The report goes straight to stderr rather than through `println!`, so it
//! shows up on a plain `cargo test` without `--nocapture`.

use std::io::Write;

#[test]
fn acceptance() {
    let report = fluxsync::acceptance::run_all().expect("bundled scenarios load");
    writeln!(std::io::stderr().lock(), "\n{report}").unwrap();
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.id.as_str()).collect();
    assert!(failed.is_empty(), "failed checks: {failed:?}");
}
