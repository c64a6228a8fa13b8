use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rank2sr(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rank2sr")).args(args).current_dir(cwd).output().expect("spawn rank2sr")
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(|c| c.parse().unwrap()).collect()).collect();
    (header, rows)
}

#[test]
fn martinet_abnormal_moves_along_x2() {
    let dir = tempfile::tempdir().unwrap();
    let out = rank2sr(&["run", "martinet-abnormal", "--out", "m"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("m/01-abnormal.csv"));
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    assert!(rows.len() > 10);
    for r in &rows {
        assert_eq!((r[col("u1")], r[col("u2")]), (0.0, 1.0));
        assert!(r[col("goh")] <= 1e-8);
    }
    let last = rows.last().unwrap();
    assert!((last[col("t")] - 2.0).abs() < 1e-12 && (last[col("x2")] - 2.0).abs() < 1e-9);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("m/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["exit_code"], 0);
    assert_eq!(manifest["seed"], 1);
}

#[test]
fn free4_detsign_reports_no_positive_determinant() {
    let dir = tempfile::tempdir().unwrap();
    let out = rank2sr(&["run", "free4-detsign", "--out", "d", "--jobs", "2"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("d/00-detsign.json")).unwrap()).unwrap();
    assert_eq!(rep["passed"], true);
    assert_eq!(rep["summary"]["classes"]["positive_det_violation"], 0);
    assert!(rep["summary"]["zeros"].as_u64().unwrap() > 0);
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "name = \"x\"\n[structure\n").unwrap();
    assert_eq!(rank2sr(&["run", "bad.toml"], dir.path()).status.code(), Some(2));
    fs::write(dir.path().join("nofile.toml"), "name = \"x\"\n[structure]\nfile = \"missing.toml\"\n").unwrap();
    assert_eq!(rank2sr(&["run", "nofile.toml"], dir.path()).status.code(), Some(2));
    assert_eq!(rank2sr(&["run", "no-such-scenario"], dir.path()).status.code(), Some(2));
}

#[test]
fn failed_precondition_exits_3_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "name = \"x\"\nout = \"o\"\n[structure]\nbuiltin = \"martinet\"\n[[stage]]\nkind = \"abnormal\"\np0 = [1.0, 0.0, 0.0]\nt_end = 1.0\n";
    fs::write(dir.path().join("x.toml"), cfg).unwrap();
    let out = rank2sr(&["run", "x.toml"], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("abnormal"));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn structure_files_are_loaded_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("structures/heisenberg.toml");
    fs::copy(src, dir.path().join("h.toml")).unwrap();
    let cfg = "name = \"x\"\nout = \"o\"\n[structure]\nfile = \"h.toml\"\n[[stage]]\nkind = \"brackets\"\nmax_len = 2\n";
    fs::write(dir.path().join("x.toml"), cfg).unwrap();
    let out = rank2sr(&["run", "x.toml"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("o/00-brackets.json")).unwrap()).unwrap();
    assert_eq!(rep["summary"]["flag"], serde_json::json!([2, 3]));
}

#[test]
fn verify_rejects_unknown_suites() {
    let dir = tempfile::tempdir().unwrap();
    let out = rank2sr(&["verify", "nosuchsuite"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nosuchsuite"));
}

#[test]
fn verify_goh_passes_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = rank2sr(&["verify", "goh", "--out", "v", "--jobs", "2"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("v/goh.json")).unwrap()).unwrap();
    assert_eq!(rep["passed"], true);
    assert_eq!(rep["criteria"].as_array().unwrap().len(), 2);
}

#[test]
fn list_structures_names_the_library() {
    let out = rank2sr(&["list-structures"], Path::new("."));
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for name in ["heisenberg", "martinet", "engel", "free2", "free3", "free4"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name}");
    }
}

#[test]
fn bad_flags_exit_2() {
    let out = rank2sr(&["run", "martinet-abnormal", "--jobs", "0"], Path::new("."));
    assert_eq!(out.status.code(), Some(2));
}
