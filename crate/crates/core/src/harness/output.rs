//! CSV tables and the JSON run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::detection::{DetectionExperimentResult, ThresholdRecord, TrialFailure};
use super::rates::{RateExperimentResult, ScenarioFailure};
use super::{empirical_cdf, CdfPoint};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: ScenarioConfig,
    pub scenarios: Option<usize>,
    pub trials: Option<usize>,
    pub rows: usize,
    pub files: Vec<String>,
    pub rate_failures: Vec<ScenarioFailure>,
    pub detection_failures: Vec<TrialFailure>,
    pub thresholds: Vec<ThresholdRecord>,
}

impl RunManifest {
    pub fn new(command: &str, config: &ScenarioConfig) -> Result<Self> {
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed: config.seed,
            config_hash: config.hash()?,
            config: config.clone(),
            scenarios: None,
            trials: None,
            rows: 0,
            files: Vec::new(),
            rate_failures: Vec::new(),
            detection_failures: Vec::new(),
            thresholds: Vec::new(),
        })
    }
}

#[derive(Serialize)]
struct CdfRow<'a> {
    channel_model: &'a str,
    estimator: &'a str,
    beam: &'a str,
    allocator: &'a str,
    rate: f64,
    probability: f64,
}

fn check_finite(values: impl IntoIterator<Item = f64>, what: &str) -> Result<()> {
    if values.into_iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("non-finite value in {what}")));
    }
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `rates.csv`, `rate_cdf.csv` and `allocations.json`.
pub fn write_rate_outputs(dir: &Path, result: &RateExperimentResult) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    check_finite(result.rows.iter().map(|r| r.rate), "rates")?;
    let rates = dir.join("rates.csv");
    write_rows(&rates, &result.rows)?;

    let mut keys: Vec<_> = result
        .rows
        .iter()
        .map(|r| (r.channel_model, r.estimator, r.beam, r.allocator))
        .collect();
    keys.dedup();
    keys.sort_by_key(|k| (k.0.as_str(), k.1.as_str(), k.2.as_str(), k.3.as_str()));
    keys.dedup();
    let mut cdf_rows = Vec::new();
    for (model, est, beam, alloc) in &keys {
        let samples: Vec<f64> = result
            .rows
            .iter()
            .filter(|r| r.channel_model == *model && r.estimator == *est && r.beam == *beam && r.allocator == *alloc)
            .map(|r| r.rate)
            .collect();
        for CdfPoint { value, probability } in empirical_cdf(&samples)? {
            cdf_rows.push(CdfRow {
                channel_model: model.as_str(),
                estimator: est.as_str(),
                beam: beam.as_str(),
                allocator: alloc.as_str(),
                rate: value,
                probability,
            });
        }
    }
    let cdf = dir.join("rate_cdf.csv");
    write_rows(&cdf, &cdf_rows)?;

    let allocations = dir.join("allocations.json");
    fs::write(&allocations, serde_json::to_string_pretty(&result.allocations)?)?;
    Ok(vec![rates, cdf, allocations])
}

/// Writes `detection.csv` and `thresholds.csv`.
pub fn write_detection_outputs(dir: &Path, result: &DetectionExperimentResult) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    check_finite(
        result.rows.iter().flat_map(|r| [r.pd, r.ci_low, r.ci_high, r.threshold]),
        "detection rows",
    )?;
    let detection = dir.join("detection.csv");
    write_rows(&detection, &result.rows)?;

    #[derive(Serialize)]
    struct Row<'a> {
        beam: &'a str,
        allocator: &'a str,
        rcr_db: f64,
        threshold: f64,
        calibration_trials: usize,
        false_alarms: usize,
        pfa: f64,
        trials: usize,
    }
    let rows: Vec<Row> = result
        .thresholds
        .iter()
        .map(|t| Row {
            beam: t.combo.beam.as_str(),
            allocator: t.combo.allocator.as_str(),
            rcr_db: t.combo.rcr_db,
            threshold: t.threshold,
            calibration_trials: t.calibration_trials,
            false_alarms: t.false_alarms.detections,
            pfa: t.false_alarms.pd,
            trials: t.false_alarms.trials,
        })
        .collect();
    let thresholds = dir.join("thresholds.csv");
    write_rows(&thresholds, &rows)?;
    Ok(vec![detection, thresholds])
}

/// Writes `manifest.json`.
pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<PathBuf> {
    ensure_dir(dir)?;
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(manifest)?)?;
    Ok(path)
}

pub fn file_names(paths: &[PathBuf]) -> Vec<String> {
    paths
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect()
}
