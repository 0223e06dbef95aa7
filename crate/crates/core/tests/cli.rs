//! End-to-end runs of the binary.

use std::fs;
use std::path::Path;
use std::process::Command;

use halfspace_ns::io::{read_vector, CheckpointManifest};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_halfspace-ns"))
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("run.cfg");
    fs::write(&p, text).unwrap();
    p
}

const SMALL: &str = "grid.N_tan = 32\ngrid.N_nor = 24\ntime.t0 = 1e-2\ntime.ratio = 2\ntime.K = 4\nscenario.band = 0\n";

#[test]
fn verify_writes_reports_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL}verify.checks = heat_semigroup, heat_odd_trace\n"));
    let out = dir.path().join("out");
    let status = bin().args(["verify", "--config"]).arg(&cfg).arg("--out").arg(&out).args(["--threads", "2"]).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("check,anchor,measured,constant,level,pass"));
    assert_eq!(lines.count(), 2);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["records"].as_array().unwrap().len(), 2);

    let status = bin().arg("report").arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0));
}

#[test]
fn zero_tolerance_exits_one_and_names_the_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL}verify.checks = heat_semigroup\ntol.heat_semigroup = 0\n"));
    let out = bin().args(["verify", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("heat_semigroup") && stdout.contains("FAIL"), "{stdout}");
}

#[test]
fn configuration_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for text in ["grid.N_tann = 32\n", "grid.N_tan = 24\n", "besov.p = 0\n"] {
        let cfg = write_config(dir.path(), text);
        let status = bin().args(["besov", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).status().unwrap();
        assert_eq!(status.code(), Some(2), "{text}");
    }
    let status = bin().args(["verify", "--config", "/nonexistent/run.cfg"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
    let status = bin().arg("report").arg("--out").arg(dir.path().join("missing")).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn besov_prints_a_norm_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL}besov.s = -0.5\nbesov.p = 2\nbesov.q = inf\n"));
    let out = bin().args(["besov", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["value"].as_f64().unwrap() > 0.0);
    assert!(report["bands"].is_array());
}

#[test]
fn heat_and_stokes_write_field_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("f");
    assert_eq!(bin().args(["heat", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap().code(), Some(0));
    assert_eq!(read_vector(&out.join("heat.bin")).unwrap().grid().n_tan(), 32);
    assert_eq!(bin().args(["stokes", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap().code(), Some(0));
    for k in 0..4 {
        assert!(out.join(format!("velocity_{k:03}.bin")).exists());
        assert!(out.join(format!("velocity_{k:03}.bin.json")).exists());
    }
    let level = bin().args(["heat", "--level", "1", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert_eq!(level.code(), Some(0));
    assert_eq!(read_vector(&out.join("heat.bin")).unwrap().grid().n_tan(), 64);
}

#[test]
fn ns_iterate_checkpoints_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("picard");
    let cfg = write_config(dir.path(), &format!("{SMALL}picard.m_max = 3\npicard.stop_tol = 1e-14\n"));
    let status = bin().args(["ns-iterate", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(1), "m_max reached without convergence");
    let manifest = CheckpointManifest::load(&out.join("manifest.json")).unwrap();
    assert_eq!(manifest.entries.iter().map(|e| e.m).collect::<Vec<_>>(), vec![1, 2, 3]);
    assert!(manifest.entries.iter().all(|e| e.files.len() == 4));

    let cfg = write_config(dir.path(), &format!("{SMALL}picard.m_max = 20\npicard.stop_tol = 1e-7\n"));
    let out_text = bin().args(["ns-iterate", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(out_text.status.code(), Some(0), "{}", String::from_utf8_lossy(&out_text.stdout));
    let resumed = CheckpointManifest::load(&out.join("manifest.json")).unwrap();
    assert_eq!(resumed.entries[3].m, 4);
}
