use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tcadetect"))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("failed to launch tcadetect")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = r#"
seed = 3

[grid]
K = 5
T = 3
N_R = 2
f_min_hz = 20e9
f_max_hz = 30e9
spacing_m = 0.005

[covariance]
preset = "tc"

[signal]
theta_k = 0.2
theta_t = 0.2
snr_db = 1.0

[[detectors]]
kind = "ma"
half_width = 2

[[detectors]]
kind = "rapid"

[experiment]
kind = "dist"
trials = 3000
grid_points = 40
"#;

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

#[test]
fn shipped_configs_validate() {
    let mut n = 0;
    for entry in fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let o = run(&["validate", "--config", path.to_str().unwrap()]);
            assert!(o.status.success(), "{}: {}", path.display(), stderr(&o));
            n += 1;
        }
    }
    assert!(n >= 4);
}

#[test]
fn missing_covariance_file_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, SMALL.replace("preset = \"tc\"", "file = \"nowhere/cov.txt\"")).unwrap();
    let o = run(&[
        "dist",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let msg = stderr(&o);
    assert!(msg.contains("nowhere/cov.txt"), "{msg}");
    assert!(!dir.path().join("o").join("ks.csv").exists());
}

#[test]
fn unknown_keys_and_bad_windows_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, format!("{SMALL}\n[extra]\nx = 1\n")).unwrap();
    assert_eq!(
        run(&["validate", "--config", cfg.to_str().unwrap()]).status.code(),
        Some(1)
    );

    fs::write(&cfg, SMALL).unwrap();
    let o = run(&[
        "validate",
        "--config",
        cfg.to_str().unwrap(),
        "detectors.0.half_width=4",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&[
        "validate",
        "--config",
        cfg.to_str().unwrap(),
        "detectors.0.half_width=1",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn experiment_kind_must_match_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, SMALL).unwrap();
    let o = run(&[
        "roc",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("experiment.kind"));
}

#[test]
fn dist_is_reproducible_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, SMALL).unwrap();
    let mut results = Vec::new();
    for (name, workers) in [("a", "1"), ("b", "3")] {
        let out = dir.path().join(name);
        let o = run(&[
            "dist",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--workers",
            workers,
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        results.push(csv_files(&out));
    }
    assert!(!results[0].is_empty());
    assert_eq!(results[0], results[1]);

    let out = dir.path().join("c");
    let o = run(&[
        "dist",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "4",
    ]);
    assert!(o.status.success());
    assert_ne!(results[0], csv_files(&out));
}

#[test]
fn dist_writes_expected_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("o");
    let o = run(&[
        "dist",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "experiment.dump_samples=true",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in [
        "ks.csv",
        "manifest.json",
        "overlay-ma-L2-H0.csv",
        "overlay-rapid-H1.csv",
        "overlay-ma-L2.svg",
        "samples-rapid-H0.csv",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let ks = fs::read_to_string(out.join("ks.csv")).unwrap();
    assert!(ks.starts_with("detector,hypothesis,ks,n_trials\n"));
    assert_eq!(ks.lines().count(), 5);
    let overlay = fs::read_to_string(out.join("overlay-ma-L2-H1.csv")).unwrap();
    assert_eq!(overlay.lines().count(), 41);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["command"], "dist");
}

#[test]
fn roc_and_sweep_on_small_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, SMALL.replace("kind = \"dist\"", "kind = \"roc\"")).unwrap();
    let out = dir.path().join("roc");
    let o = run(&[
        "roc",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--no-plots",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let roc = fs::read_to_string(out.join("roc.csv")).unwrap();
    assert!(roc.starts_with("pfa,pd,detector,scenario\n"));
    assert!(!out.join("roc.svg").exists());

    fs::write(
        &cfg,
        SMALL.replace("kind = \"dist\"", "kind = \"sweep\"\ntheta_k = [0.0, 0.5, 1.0]"),
    )
    .unwrap();
    let out = dir.path().join("sweep");
    let o = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let sweep = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 3 * 2);
    assert!(out.join("sweep.svg").exists());
}

#[test]
fn gx2_cdf_and_quantile() {
    let o = run(&["gx2", "--weights", "1", "--dofs", "2", "--x", "2,4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,cdf"));
    for (line, x) in lines.zip([2.0f64, 4.0]) {
        let v: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((v - (1.0 - (-x / 2.0).exp())).abs() < 1e-10, "{line}");
    }

    let o = run(&["gx2", "--weights", "1", "--dofs", "2", "--p", "0.5"]);
    let text = String::from_utf8(o.stdout).unwrap();
    let q: f64 = text.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((q - 2.0 * 2f64.ln()).abs() < 1e-8);
}

#[test]
fn gx2_rejects_bad_input() {
    assert_eq!(
        run(&["gx2", "--weights", "1,2", "--dofs", "1", "--x", "1"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(run(&["gx2", "--weights", "1", "--p", "1.5"]).status.code(), Some(1));
    assert_eq!(run(&["gx2", "--weights", "abc"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
