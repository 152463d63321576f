use std::path::Path;
use std::process::Command as Proc;
use vmb_cli::config::{parse_config, RunConfig};
use vmb_cli::run::{run, Command, CORRECTOR_HEADER, FLUID_HEADER};

fn bin() -> Proc {
    Proc::new(env!("CARGO_BIN_EXE_vmb"))
}

fn small(out: &Path) -> RunConfig {
    let mut c = parse_config("grid = 16x16\nt_end = 0.02\ndt = 0.01\namplitude = 0.02\nkmax = 1").unwrap();
    c.out_dir = out.to_path_buf();
    c
}

#[test]
fn coeffs_report_is_positive() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["coeffs", "--out"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    for key in ["mu", "kappa", "sigma", "lambda"] {
        let line = stdout.lines().find(|l| l.starts_with(&format!("{key} = "))).unwrap();
        let v: f64 = line.split(" = ").nth(1).unwrap().parse().unwrap();
        assert!(v > 0.0);
    }
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("coeffs.json")).unwrap()).unwrap();
    for key in ["mu", "kappa", "sigma", "lambda"] {
        assert!(json[key].as_f64().unwrap() > 0.0, "{key}");
    }
    // Maxwell molecules
    assert!((json["sigma"].as_f64().unwrap() - 2.0).abs() < 1e-10);
}

#[test]
fn check_exits_zero_and_fills_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let out = bin()
        .args(["check", "--seed", "3", "--out"])
        .arg(dir.path().join("out"))
        .env("VMB_CACHE_DIR", &cache)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/check.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert!(report["checks"].as_array().unwrap().len() >= 20);
    let files: Vec<_> = std::fs::read_dir(&cache).unwrap().collect();
    assert_eq!(files.len(), 1);
}

#[test]
fn failing_check_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    // sigma override breaks the order-1 hierarchy identities
    std::fs::write(&cfg, "grid = 16x16\nt_end = 0.01\ndt = 0.01\nsigma = 5\n").unwrap();
    let out = bin().arg("check").arg("--config").arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("hierarchy_order"), "{err}");
    let report = std::fs::read_to_string(dir.path().join("check.json")).unwrap();
    assert!(report.contains("\"passed\": false"));
}

#[test]
fn bad_config_and_flags_fail_with_context() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "D = 6\ngamma = 2\n").unwrap();
    let out = bin().arg("coeffs").arg("--config").arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 2") && err.contains("gamma"), "{err}");
    let out = bin().args(["coeffs", "--threads", "4", "--out"]).arg(dir.path()).output().unwrap();
    assert!(!out.status.success());
    let out = bin().arg("coeffs").arg("--config").arg(dir.path().join("missing.cfg")).output().unwrap();
    assert!(String::from_utf8(out.stderr).unwrap().contains("missing.cfg"));
}

#[test]
fn fluid_and_corrector_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let o = run(&cfg, Command::Fluid).unwrap();
    assert_eq!(o.artifacts.len(), 2);
    let text = std::fs::read_to_string(dir.path().join("fluid.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), FLUID_HEADER.join(","));
    assert_eq!(text.lines().count(), 1 + 3);
    let snap = vmb_cli::snapshot::read_snapshot(&dir.path().join("fluid.nsfm")).unwrap();
    let names: Vec<&str> = snap.iter().map(|a| a.name.as_str()).collect();
    assert_eq!(names, ["u", "theta", "E", "B"]);
    assert_eq!(snap[0].dims, [3, 16, 16, 1]);

    run(&cfg, Command::Corrector).unwrap();
    let text = std::fs::read_to_string(dir.path().join("corrector.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), CORRECTOR_HEADER.join(","));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0][3].is_nan() && rows[2][3].is_nan());
    assert!(rows[1][3].is_finite());
    assert!(rows.iter().all(|r| r[4] < 1e-12 && r[5] < 1e-12));
}

#[test]
fn fluid_output_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(&small(a.path()), Command::Fluid).unwrap();
    run(&small(b.path()), Command::Fluid).unwrap();
    for f in ["fluid.csv", "fluid.nsfm"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
    }
    let mut other = small(b.path());
    other.seed = 1;
    run(&other, Command::Fluid).unwrap();
    assert_ne!(std::fs::read(a.path().join("fluid.csv")).unwrap(), std::fs::read(b.path().join("fluid.csv")).unwrap());
}

#[test]
fn residual_sweep_decreases_down_the_epsilon_column() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.dt = 1e-3;
    run(&cfg, Command::ResidualSweep).unwrap();
    let text = std::fs::read_to_string(dir.path().join("residual_sweep.csv")).unwrap();
    let rows: Vec<Vec<f64>> =
        text.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 5);
    for w in rows.windows(2) {
        assert!(w[1][0] < w[0][0]);
        assert!(w[1][1] < w[0][1], "{:?}", w);
    }
}

#[test]
fn expansion_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    run(&cfg, Command::Expansion).unwrap();
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("expansion.json")).unwrap()).unwrap();
    assert!(json["order_1_kinetic"].as_f64().unwrap() < 1e-5);
    let abl = json["ablations"].as_array().unwrap();
    assert_eq!(abl.len(), cfg.registry.len());
    assert!(abl.iter().all(|a| a["ratio"].as_f64().unwrap() >= 1e2));
    assert!(json["conservation_worst"].as_f64().unwrap() < 1e-8);
    let snap = vmb_cli::snapshot::read_snapshot(&dir.path().join("expansion.nsfm")).unwrap();
    assert_eq!(snap.len(), 6);
    assert_eq!(snap[0].dims, [84, 256]);
}
