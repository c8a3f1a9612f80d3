use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use semimyopic_cli::output::RunManifest;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_semimyopic"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.conf");
    fs::write(&path, text).unwrap();
    path
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[test]
fn episode_myopic_and_blinkered() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = configs().join("pathological.conf");
    let out = tmp.path().join("m");
    let o = run(&[
        "--config",
        conf.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--scheme",
        "myopic",
        "episode",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out.join("episodes.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "myopic");
    assert_eq!(rows[0][7], "0");
    assert_eq!(rows[0][9], "0.5");
    assert_eq!(rows[0][11], "0");
    assert!(out.join("manifest.json").exists());

    let out = tmp.path().join("b");
    let o = run(&[
        "--config",
        conf.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "episode",
    ]);
    assert!(o.status.success());
    let trace = fs::read_to_string(out.join("trace.txt")).unwrap();
    let steps: Vec<&str> = trace
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("select"))
        .collect();
    assert!(!steps.is_empty());
    assert!(steps
        .iter()
        .all(|l| l.split_whitespace().nth(1) == Some("1")));
}

#[test]
fn missing_required_key_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = write_config(
        tmp.path(),
        "[problem]\nbudget = 3\n[experiment]\nseed = 1\n",
    );
    let o = run(&[
        "--config",
        conf.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
        "episode",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("problem.n"));
}

#[test]
fn measuring_known_item_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = configs().join("pathological.conf");
    let o = run(&[
        "--config",
        conf.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
        "voi-curve",
        "--item",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn voi_curve_edges() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = configs().join("pathological.conf");
    let out = tmp.path().join("one");
    let o = run(&[
        "--config",
        conf.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "voi-curve",
        "--item",
        "1",
        "--k-max",
        "1",
    ]);
    assert!(o.status.success());
    let rows = csv_rows(&out.join("voi_curve.csv"));
    assert_eq!(rows.len(), 1);
    let net: f64 = rows[0][3].parse().unwrap();
    assert!(net < 0.0);

    let free = write_config(
        tmp.path(),
        "[problem]\nn = 2\nbudget = 4\n[measurement]\ncost = 0\n[experiment]\nseed = 3\n",
    );
    let out = tmp.path().join("free");
    let o = run(&[
        "--config",
        free.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "voi-curve",
        "--item",
        "1",
    ]);
    assert!(o.status.success());
    let rows = csv_rows(&out.join("voi_curve.csv"));
    assert_eq!(rows.len(), 4);
    for r in rows {
        assert_eq!(
            r[1], r[3],
            "net equals intrinsic when measurements are free"
        );
    }
}

fn small_grid(dir: &Path) -> PathBuf {
    write_config(
        dir,
        "[problem]\nn = 2\nbudget = 5\n[scheme]\nfamily = myopic\n[experiment]\nreplicates = 1\nseed = 77\n",
    )
}

#[test]
fn grid_shape_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = small_grid(tmp.path());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for (dir, threads) in [(&a, "1"), (&b, "3")] {
        let o = run(&[
            "--config",
            conf.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
            "--threads",
            threads,
            "grid",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(csv_rows(&a.join("episodes.csv")).len(), 16);
    for f in ["episodes.csv", "summary.csv"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn manifest_replays_run() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = small_grid(tmp.path());
    let a = tmp.path().join("a");
    assert!(run(&[
        "--config",
        conf.to_str().unwrap(),
        "--out",
        a.to_str().unwrap(),
        "grid"
    ])
    .status
    .success());
    let manifest_path = a.join("manifest.json");
    let manifest: RunManifest = serde_json::from_slice(&fs::read(&manifest_path).unwrap()).unwrap();
    assert_eq!(manifest.master_seed, 77);
    assert_eq!(manifest.command, "grid");
    let b = tmp.path().join("b");
    let o = run(&[
        "--config",
        manifest_path.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
        "grid",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read(a.join("episodes.csv")).unwrap(),
        fs::read(b.join("episodes.csv")).unwrap()
    );
}

#[test]
fn injected_accounting_fault_is_caught() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&[
        "--out",
        tmp.path().to_str().unwrap(),
        "verify",
        "--inject-fault",
        "cost-accounting",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let report = fs::read_to_string(tmp.path().join("verify_report.txt")).unwrap();
    assert!(
        report
            .lines()
            .any(|l| l.starts_with("FAIL episode cost accounting")),
        "{report}"
    );
}
