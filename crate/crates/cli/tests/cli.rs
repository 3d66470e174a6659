//! Black-box tests of the installed binary: exit codes, file layout,
//! manifest determinism, and the override round-trip.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_beamrx"))
}

fn fresh_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("beamrx-cli-{}-{tag}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn budget_default_scenario_passes_and_writes_report() {
    let dir = fresh_dir("budget");
    let out = run(&["budget", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("overall          PASS"), "{stdout}");
    let report = json(&dir.join("budget.json"));
    assert!(report["pass"].as_bool().unwrap());
    assert!((report["data_rate_bps"].as_f64().unwrap() - 2.9568e9).abs() < 1.0);
    let manifest = json(&dir.join("manifest.json"));
    assert_eq!(manifest["command"], "budget");
    assert_eq!(manifest["outputs"][0]["file"], "budget.json");
}

#[test]
fn budget_with_tightened_requirement_exits_3() {
    let dir = fresh_dir("budget3");
    let out =
        run(&["budget", "--set", "requirement.nf_max_db=2.0", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn broken_scenario_file_exits_2() {
    let dir = fresh_dir("broken");
    let bad = dir.join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    let out = run(&["budget", "--scenario", bad.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let invalid = run(&["sweep", "--grid", "10:5:1", "--out", dir.to_str().unwrap()]);
    assert_eq!(invalid.status.code(), Some(2));
}

#[test]
fn pattern_metrics_cover_tapered_uniform_and_single_element() {
    let dir = fresh_dir("pattern");
    let out = run(&["pattern", "--elevation", "--taper", "-6", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let m = json(&dir.join("pattern_metrics.json"));
    assert!(m["sidelobe_level_db"].as_f64().unwrap() <= -18.0);

    let out =
        run(&["pattern", "--elevation", "--taper", "uniform", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let m = json(&dir.join("pattern_metrics.json"));
    assert!((m["sidelobe_level_db"].as_f64().unwrap() + 12.8).abs() <= 0.3);

    // A lone element has no sidelobes: the metric is null, not a number.
    let out = run(&["pattern", "--set", "geometry.n_elements=1", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let m = json(&dir.join("pattern_metrics.json"));
    assert!(m["sidelobe_level_db"].is_null());
    assert!(String::from_utf8_lossy(&out.stdout).contains("sidelobes: none"));

    let csv = fs::read_to_string(dir.join("pattern.csv")).unwrap();
    assert!(csv.starts_with("angle_deg,magnitude_db\n"));
}

#[test]
fn sweep_finds_the_steered_peak() {
    let dir = fresh_dir("sweep");
    let out = run(&[
        "sweep",
        "--grid",
        "-90:90:2",
        "--set",
        "frontend.noise_enabled=false",
        "--set",
        "adc.ideal=true",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let m = json(&dir.join("sweep_metrics.json"));
    assert!(m["peak_error_deg"].as_f64().unwrap().abs() <= 1.0);
    assert!(m["max_abs_deviation_db"].as_f64().unwrap() <= 0.1);
    let csv = fs::read_to_string(dir.join("sweep.csv")).unwrap();
    assert!(csv.starts_with("doa_deg,measured_db,analytic_db\n"));
    assert_eq!(csv.lines().count(), 1 + 91);
}

#[test]
fn link_writes_ber_curve() {
    let dir = fresh_dir("link");
    let out = run(&[
        "link",
        "--grid",
        "8:12:2",
        "--set",
        "ber_bits=30000",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.join("ber.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("ebn0_db,ber,evm"));
    assert_eq!(lines.count(), 3);
    let m = json(&dir.join("link_metrics.json"));
    assert!((m["data_rate_bps"].as_f64().unwrap() - 2.9568e9).abs() < 1.0);
}

#[test]
fn calibrate_identical_channels_yields_unit_constants() {
    let dir = fresh_dir("cal");
    let out = run(&[
        "calibrate",
        "--set",
        "frontend.noise_enabled=false",
        "--set",
        "adc.ideal=true",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let cal = json(&dir.join("calibration.json"));
    for c in cal["set"]["constants"].as_array().unwrap() {
        assert_eq!(c["alpha"].as_f64().unwrap(), 1.0);
        assert_eq!(c["beta"].as_f64().unwrap(), 0.0);
    }
    assert!(cal["residual"].as_f64().unwrap() < 1e-9);
}

const RUN_ARGS: &[&str] = &[
    "run",
    "--set",
    "stimulus.kind=ofdm",
    "--set",
    "stimulus.power_dbm=-110",
    "--set",
    "stimulus.doa_deg=20",
    "--set",
    "ofdm.n_data=1",
    "--set",
    "n_frames=40",
];

#[test]
fn run_twice_with_same_seed_is_byte_identical() {
    let a = fresh_dir("run-a");
    let b = fresh_dir("run-b");
    for dir in [&a, &b] {
        let out = bin()
            .args(RUN_ARGS)
            .args(["--seed", "5", "--out", dir.to_str().unwrap()])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["manifest.json", "constellation.csv", "report.json"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name} differs between identical runs"
        );
    }
}

#[test]
fn override_round_trip_reruns_identically() {
    // Outputs produced with --set must be reproducible from the resolved
    // scenario recorded in the manifest.
    let first = fresh_dir("rt-first");
    let out = bin()
        .args(RUN_ARGS)
        .args(["--set", "frontend.noise_enabled=false", "--out", first.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let manifest = json(&first.join("manifest.json"));

    let second = fresh_dir("rt-second");
    let scenario_file = second.join("resolved.json");
    fs::write(&scenario_file, serde_json::to_string(&manifest["scenario"]).unwrap()).unwrap();
    let out = bin()
        .args(["run", "--scenario", scenario_file.to_str().unwrap()])
        .args(["--out", second.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let manifest2 = json(&second.join("manifest.json"));
    assert_eq!(manifest["scenario_sha256"], manifest2["scenario_sha256"]);
    assert_eq!(manifest["outputs"], manifest2["outputs"]);
}

#[test]
fn run_dump_iq_writes_capture_files_with_sidecars() {
    let dir = fresh_dir("dump");
    let out = bin()
        .args(RUN_ARGS)
        .args(["--dump-iq", "--out", dir.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let manifest = json(&dir.join("manifest.json"));
    let names: Vec<&str> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| o["file"].as_str().unwrap())
        .collect();
    for k in 0..4 {
        assert!(names.contains(&format!("channel_{k}.iq").as_str()));
        let sidecar = json(&dir.join(format!("channel_{k}.iq.json")));
        // 40 frames of 576 samples each.
        assert_eq!(sidecar["length"].as_u64().unwrap(), 40 * 576);
        let bytes = fs::read(dir.join(format!("channel_{k}.iq"))).unwrap();
        assert_eq!(bytes.len() as u64, 40 * 576 * 8);
    }
}

#[test]
fn set_reaches_into_objects_the_scenario_file_omits() {
    // A sparse file has no "chain" key at all; the override must still land
    // on the defaults-expanded structure instead of creating a bare object
    // that fails to parse.
    let dir = fresh_dir("sparse-set");
    let sparse = dir.join("sparse.json");
    fs::write(&sparse, r#"{ "frontend": { "noise_enabled": false } }"#).unwrap();
    let out = run(&[
        "budget",
        "--scenario",
        sparse.to_str().unwrap(),
        "--set",
        "frontend.chain.vga_setting_db=-15",
        "--out",
        dir.to_str().unwrap(),
    ]);
    // Minimum VGA gain drops the cascade below the gain requirement.
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&dir.join("budget.json"));
    assert!(report["cascade_mid"]["gain_db"].as_f64().unwrap() < 45.0);
    let manifest = json(&dir.join("manifest.json"));
    assert_eq!(manifest["scenario"]["frontend"]["chain"]["vga_setting_db"], -15.0);
    assert_eq!(manifest["scenario"]["frontend"]["noise_enabled"], false);
}

#[test]
fn out_dir_defaults_to_environment_variable() {
    let dir = fresh_dir("envvar");
    let out = bin()
        .args(["budget"])
        .env("BEAMRX_OUT", &dir)
        .current_dir(std::env::temp_dir())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.join("budget.json").exists());
    assert!(dir.join("manifest.json").exists());
}

#[test]
fn typoed_set_path_is_an_error_not_a_silent_noop() {
    let dir = fresh_dir("typo-set");
    let out = run(&[
        "budget",
        "--set",
        "frontend.chain.vga_settng_db=-15",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("frontend.chain.vga_settng_db"), "{stderr}");
    // Switching an enum variant is not a typo even though the expanded file
    // carried the other variant's fields.
    let ok = run(&[
        "run",
        "--set",
        "stimulus.kind=ofdm",
        "--set",
        "stimulus.power_dbm=-110",
        "--set",
        "n_frames=2",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
}
