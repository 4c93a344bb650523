use std::path::Path;
use std::process::{Command, Output};

use jcas::estimation::EstimatorKind;
use jcas::harness::ScenarioConfig;
use jcas::poweralloc::RadarSirCoefficients;
use jcas::rate::{FrameTiming, RateCoefficients};
use nalgebra::DMatrix;
use serde_json::{json, Value};

fn jcas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jcas"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn coefficients() -> RateCoefficients {
    let xi = DMatrix::from_row_slice(2, 2, &[0.1, 0.3, 0.2, 0.15]);
    let timing = FrameTiming::new(1e6, 200, 2).unwrap();
    RateCoefficients::new(EstimatorKind::Lmmse, vec![4.0, 2.5], xi, vec![0.2, 0.1], 0.5, timing).unwrap()
}

fn write_input(dir: &Path, radar_gain: f64, extra: Value) -> String {
    let sir = RadarSirCoefficients::new(radar_gain, vec![0.5, 1.0]).unwrap();
    let mut input = json!({
        "coefficients": coefficients(),
        "sir": sir,
        "budget": 2.0,
        "rho_star": 1.5,
    });
    if let (Value::Object(m), Value::Object(e)) = (&mut input, extra) {
        m.extend(e);
    }
    let path = dir.join("input.json");
    std::fs::write(&path, input.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn allocate_reports_a_feasible_max_min_point() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), 10.0, json!({}));
    let out = jcas(&["allocate", &input]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let t = v["allocation"]["achieved_t"].as_f64().unwrap();
    let sinr: Vec<f64> = v["sinr"].as_array().unwrap().iter().map(|s| s.as_f64().unwrap()).collect();
    assert_eq!(sinr.len(), 2);
    assert!(sinr.iter().all(|s| *s >= t * (1.0 - 1e-9)));
    assert!(v["radar_sir"].as_f64().unwrap() >= 1.5 * (1.0 - 1e-9));
    assert!(v["rates"].as_array().unwrap().iter().all(|r| r.as_f64().unwrap() > 0.0));
}

#[test]
fn allocate_uniform_needs_its_section() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), 10.0, json!({}));
    assert_eq!(code(&jcas(&["--allocator", "uniform", "allocate", &input])), 2);

    let input = write_input(
        dir.path(),
        10.0,
        json!({"uniform": {"p_dl": 1.0, "rcr": 2.0, "n_subcarriers": 4, "n_symbols": 2}}),
    );
    let out = jcas(&["--allocator", "uniform", "allocate", &input]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["allocation"]["eta_radar"].as_f64().unwrap(), 0.25);
}

#[test]
fn allocate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // No radar gain: the SIR constraint forces every user power to zero.
    let input = write_input(dir.path(), 0.0, json!({}));
    assert_eq!(code(&jcas(&["allocate", &input])), 3);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"budget\": 1.0}").unwrap();
    assert_eq!(code(&jcas(&["allocate", bad.to_str().unwrap()])), 2);
    assert_eq!(code(&jcas(&["allocate", "/nonexistent/input.json"])), 2);
}

#[test]
fn rates_writes_outputs_reproducibly() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    for (dir, seed) in [(&a, "7"), (&b, "7"), (&c, "8")] {
        let out = jcas(&["rates", "--scenarios", "2", "--seed", seed, "--out", dir.path().to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["rates.csv", "rate_cdf.csv", "allocations.json", "manifest.json"] {
        assert!(a.path().join(name).is_file(), "{name} missing");
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("rates.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));

    let text = String::from_utf8(read(&a)).unwrap();
    assert!(text.starts_with("scenario,seed,user,channel_model,estimator,beam,allocator,rate"));
    // 2 scenarios, 4 users, 3 models, 2 estimators, 2 beams, 2 allocators.
    assert_eq!(text.lines().count(), 1 + 2 * 4 * 3 * 2 * 2 * 2);

    let manifest: Value = serde_json::from_slice(&std::fs::read(a.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["scenarios"], 2);
}

#[test]
fn flags_narrow_the_rate_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let out = jcas(&[
        "--estimator",
        "pm",
        "--beam",
        "zfr",
        "--allocator",
        "maxmin",
        "rates",
        "--scenarios",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("rates.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 4 * 3);
    assert!(text.lines().skip(1).all(|l| l.contains(",pm,zfr,maxmin,")));
}

#[test]
fn config_round_trips_and_files_merge_onto_presets() {
    let out = jcas(&["config"]);
    assert_eq!(code(&out), 0);
    let parsed = ScenarioConfig::from_toml_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(parsed, ScenarioConfig::default());

    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("c.toml");
    std::fs::write(&file, "scenarios = 3\n").unwrap();
    let out = jcas(&["--preset", "table1", "--config", file.to_str().unwrap(), "--seed", "9", "config"]);
    assert_eq!(code(&out), 0);
    let parsed = ScenarioConfig::from_toml_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let mut expected = ScenarioConfig::preset(jcas::harness::Preset::Table1);
    expected.scenarios = 3;
    expected.seed = 9;
    assert_eq!(parsed, expected);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("c.toml");
    std::fs::write(&file, "no_such_key = 1\n").unwrap();
    assert_eq!(code(&jcas(&["--config", file.to_str().unwrap(), "config"])), 2);
    std::fs::write(&file, "users = 0\n").unwrap();
    assert_eq!(code(&jcas(&["--config", file.to_str().unwrap(), "rates"])), 2);
    // Beyond the cyclic prefix the echo no longer fits the symbol.
    assert_eq!(code(&jcas(&["detect", "--ranges", "5000"])), 2);
}

#[test]
fn detect_writes_pd_rows() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("c.toml");
    std::fs::write(
        &file,
        "[detection]\npfa = 0.1\ncalibration_trials = 1000\nranges_m = [60.0, 200.0]\nrcr_db = [3.0]\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = jcas(&[
        "--config",
        file.to_str().unwrap(),
        "--beam",
        "pbr",
        "--allocator",
        "uniform",
        "--out",
        out_dir.to_str().unwrap(),
        "detect",
        "--trials",
        "50",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(out_dir.join("detection.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(out_dir.join("thresholds.csv").is_file());
    let manifest: Value = serde_json::from_slice(&std::fs::read(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["trials"], 50);
}

#[test]
fn validate_flags_a_numerical_mismatch() {
    let ok = jcas(&["validate", "--scenarios", "1", "--draws", "20000"]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stdout));
    let strict = jcas(&["validate", "--scenarios", "1", "--draws", "200", "--tolerance", "1e-9"]);
    assert_eq!(code(&strict), 4);
}
