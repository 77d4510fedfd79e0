use std::path::Path;
use std::process::{Command, Output};

fn fluxsync(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fluxsync")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn validate_bundled_scenarios() {
    for name in ["loadstep_bus9.scn", "energize_fault_bus5.scn"] {
        let o = fluxsync(&["validate", name]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn invalid_override_is_a_config_failure() {
    let o = fluxsync(&["validate", "loadstep_bus9.scn", "--dt", "-1"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("dt"));
}

#[test]
fn bad_bus_reference_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.scn");
    std::fs::write(
        &path,
        "name = \"bad\"\n[network]\nfile = \"kundur_two_area.net\"\n[[wpg]]\nname = \"w\"\nbus = 99\n",
    )
    .unwrap();
    let o = fluxsync(&["validate", path.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("99"));
}

#[test]
fn missing_scenario_fails() {
    let o = fluxsync(&["validate", "/nonexistent/none.scn"]);
    assert_ne!(code(&o), 0);
}

#[test]
fn run_then_compare() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, ctrl) in [(&a, "nfscm"), (&b, "avscm")] {
        let o = fluxsync(&[
            "run",
            "energize_fault_bus5.scn",
            "--t-end",
            "0.02",
            "--controller",
            ctrl,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        for f in ["timeseries.csv", "metrics.json", "config.toml"] {
            assert!(Path::new(out).join(f).is_file(), "{f} missing");
        }
    }
    let header = std::fs::read_to_string(a.join("timeseries.csv")).unwrap();
    assert!(header.lines().any(|l| l.starts_with("time_s")));

    let o = fluxsync(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let cmp: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(cmp["rows_compared"].as_u64().unwrap() > 0);

    let o = fluxsync(&["compare", a.to_str().unwrap(), a.to_str().unwrap()]);
    let cmp: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let worst = cmp["channels"]
        .as_object()
        .unwrap()
        .values()
        .map(|c| c["max_abs"].as_f64().unwrap())
        .fold(0.0, f64::max);
    assert_eq!(worst, 0.0);
}
