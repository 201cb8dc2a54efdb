use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_abwave");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Small double-slit geometry that runs in about a second.
const MINI: &str = r#"
kind = "KIND"

[grid]
nx = 240
ny = 161
dx = 0.1
dy = 0.1
origin = [0.0, -8.0]

[packet]
center = [4.5, 0.0]
sigma = 0.6
k0 = [6.0, 0.0]

[geometry]
barrier_x = 9.0
barrier_thickness = 0.6
slit_separation = 4.5
slit_width = 0.8
screen_x = 21.0

[geometry.absorber]
left = 2.0
right = 2.0
bottom = 2.0
top = 2.0
strength = 20.0
"#;

fn mini(dir: &Path, kind: &str, extra: &str) -> PathBuf {
    let path = dir.join(format!("{kind}.toml"));
    fs::write(&path, format!("{}{extra}", MINI.replace("KIND", kind))).unwrap();
    path
}

fn abwave(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect()
}

fn num(cell: &str) -> f64 {
    cell.parse().unwrap()
}

#[test]
fn free_run_writes_artifacts_with_valid_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = configs().join("free.toml");
    let o = abwave(&[
        "run",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
        "--snapshots",
        "100",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["profile.csv", "fringe.json", "manifest.json", "report.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    assert!(!out.join("error.json").exists());
    // A single peak: fringe extraction reports why it failed plus the peak.
    let fringe = json(&out.join("fringe.json"));
    assert!(fringe["error"].is_string());
    assert!(fringe["peak_position"].as_f64().unwrap().abs() < 0.5);

    let manifest = json(&out.join("manifest.json"));
    let files = manifest["files"].as_array().unwrap();
    assert!(files
        .iter()
        .any(|f| f["path"].as_str().unwrap().starts_with("snapshots/")));
    for f in files {
        use sha2::{Digest, Sha256};
        let bytes = fs::read(out.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(
            f["sha256"].as_str().unwrap(),
            hex::encode(Sha256::digest(&bytes))
        );
    }
    assert_eq!(manifest["stages"].as_array().unwrap().len(), 4);
}

#[test]
fn screen_behind_barrier_is_an_invariant_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = mini(tmp.path(), "double_slit", "")
        .to_str()
        .unwrap()
        .to_string();
    let text = fs::read_to_string(&cfg)
        .unwrap()
        .replace("screen_x = 21.0", "screen_x = 8.0");
    fs::write(&cfg, text).unwrap();
    let out = tmp.path().join("out");
    let o = abwave(&["run", "--config", &cfg, "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(4));
    let err = json(&out.join("error.json"));
    assert_eq!(err["kind"], "invariant");
    assert!(
        err["message"]
            .as_str()
            .unwrap()
            .contains("screen strictly downstream"),
        "{err}"
    );
    assert!(!out.join("manifest.json").exists());
}

#[test]
fn config_errors_name_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = mini(tmp.path(), "double_slit", "\n[run]\nmax_stepz = 3\n");
    let out = tmp.path().join("out");
    let o = abwave(&["run", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let err = json(&out.join("error.json"));
    assert_eq!(err["kind"], "config");
    assert!(
        err["message"].as_str().unwrap().contains("max_stepz"),
        "{err}"
    );
}

#[test]
fn runs_are_byte_identical_across_repeats_and_threads() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = mini(tmp.path(), "ab_solenoid", "\n[solenoid]\nflux = 1.0\n");
    let mut outputs = Vec::new();
    for (k, threads) in ["1", "2", "1"].iter().enumerate() {
        let out = tmp.path().join(format!("out{k}"));
        let o = abwave(&[
            "run",
            "--config",
            s(&cfg),
            "--out",
            s(&out),
            "--threads",
            threads,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let m = json(&out.join("manifest.json"));
        outputs.push((
            fs::read(out.join("profile.csv")).unwrap(),
            m["files"].clone(),
        ));
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn audit_requires_a_non_identity_gauge() {
    let tmp = tempfile::tempdir().unwrap();
    let gauges = tmp.path().join("g.toml");
    fs::write(&gauges, "[[gauge]]\nkind = \"identity\"\n").unwrap();
    let out = tmp.path().join("out");
    let cfg = configs().join("free.toml");
    let o = abwave(&[
        "audit",
        "--config",
        s(&cfg),
        "--gauges",
        s(&gauges),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(json(&out.join("error.json"))["kind"], "usage");
}

#[test]
fn linear_gauge_audit_on_free_packet() {
    let tmp = tempfile::tempdir().unwrap();
    let gauges = tmp.path().join("g.toml");
    fs::write(
        &gauges,
        "[[gauge]]\nkind = \"identity\"\n\n[[gauge]]\nkind = \"linear\"\ngradient = [0.3, -0.2]\nrate = 0.5\n",
    )
    .unwrap();
    let out = tmp.path().join("out");
    let cfg = configs().join("free.toml");
    let o = abwave(&[
        "audit",
        "--config",
        s(&cfg),
        "--gauges",
        s(&gauges),
        "--out",
        s(&out),
        "--snapshots",
        "50",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let audit = json(&out.join("audit.json"));
    assert_eq!(audit["passed"], true);
    let linear = &audit["branches"][1];
    assert!(linear["profile"]["max_abs_dev"].as_f64().unwrap() <= 1e-6);
    assert!(linear["max_density_deviation"].as_f64().unwrap() <= 1e-8);
    // Paper-track recorded next to the full-wave result; a uniform gradient
    // is the same at source and target, so the pinned wavevector is unchanged.
    let p = &linear["paper_track"];
    for i in 0..4 {
        let d = p["delta"][i].as_f64().unwrap();
        assert_eq!(d, p["predicted_delta"][i].as_f64().unwrap());
        assert!(d.abs() < 1e-12);
    }
}

#[test]
fn unknown_sweep_param_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = configs().join("free.toml");
    let o = abwave(&[
        "sweep",
        "--config",
        s(&cfg),
        "--param",
        "phase",
        "--values",
        "0,1",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = json(&out.join("error.json"));
    assert!(
        err["message"]
            .as_str()
            .unwrap()
            .contains("unknown sweep parameter"),
        "{err}"
    );
}

#[test]
fn channel_sweep_tracks_papertrack_wavelength() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = mini(
        tmp.path(),
        "toroidal_channel",
        "\n[channel]\na_lower = 1.0\na_upper = 1.0\nplacement = \"both\"\n",
    );
    let out = tmp.path().join("out");
    let o = abwave(&[
        "sweep",
        "--config",
        s(&cfg),
        "--param",
        "channel_a",
        "--values",
        "0",
        "0.25k",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out.join("sweep.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(num(&rows[1][0]), 1.5);
    let ratio = num(&rows[1][4]) / num(&rows[0][4]);
    assert!((ratio - 0.8).abs() < 1e-12, "{ratio}");
    // Identical channels on both arms leave the full-wave spacing alone.
    let (s0, s1) = (num(&rows[0][1]), num(&rows[1][1]));
    assert!((s1 - s0).abs() <= 1e-6 * s0, "{s0} {s1}");
    assert!(json(&out.join("sweep.json"))["effect"].is_object());
}

#[test]
fn channel_sweep_at_zero_is_the_baseline() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = mini(
        tmp.path(),
        "toroidal_channel",
        "\n[channel]\na_lower = 1.0\na_upper = 1.0\nplacement = \"lower\"\n",
    );
    let base_out = tmp.path().join("base");
    let base = mini(tmp.path(), "double_slit", "");
    assert!(
        abwave(&["run", "--config", s(&base), "--out", s(&base_out)])
            .status
            .success()
    );
    let out = tmp.path().join("out");
    let o = abwave(&[
        "sweep",
        "--config",
        s(&cfg),
        "--param",
        "channel_a",
        "--values",
        "0",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out.join("sweep.csv"));
    assert_eq!(rows.len(), 1);
    let fringe = json(&base_out.join("fringe.json"));
    assert_eq!(num(&rows[0][1]), fringe["fringe_spacing"].as_f64().unwrap());
    assert_eq!(num(&rows[0][2]), 0.0);
}
