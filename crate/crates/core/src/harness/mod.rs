//! Scenario configuration, Monte-Carlo drivers and output writers.

pub mod config;
pub mod detection;
pub mod output;
pub mod rates;
pub mod scenario;
pub mod validation;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use config::{AllocatorKind, Preset, ScenarioConfig};
pub use detection::{run_detection_experiment, DetectionExperimentResult, PdRow};
pub use rates::{run_rate_experiment, RateExperimentResult, RateRow};

/// Thermal noise power `10^((N₀ + F)/10) · 10⁻³ · B` in watts.
pub fn noise_variance(bandwidth: f64, noise_figure_db: f64, psd_dbm_hz: f64) -> Result<f64> {
    if !(bandwidth.is_finite() && bandwidth > 0.0) {
        return Err(Error::invalid("bandwidth", format!("{bandwidth} is not positive")));
    }
    Ok(10f64.powf((psd_dbm_hz + noise_figure_db) / 10.0) * 1e-3 * bandwidth)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub value: f64,
    pub probability: f64,
}

/// Sorted samples with probabilities `i/n`.
pub fn empirical_cdf(samples: &[f64]) -> Result<Vec<CdfPoint>> {
    if samples.is_empty() {
        return Err(Error::invalid("samples", "cannot build a CDF from no samples"));
    }
    if samples.iter().any(|s| s.is_nan()) {
        return Err(Error::Numerical("NaN sample in CDF input".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(i, value)| CdfPoint {
            value,
            probability: (i + 1) as f64 / n,
        })
        .collect())
}

/// Smallest sample whose empirical CDF reaches `q`.
pub fn percentile(samples: &[f64], q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid("q", format!("{q} is not a probability")));
    }
    let cdf = empirical_cdf(samples)?;
    let idx = ((q * cdf.len() as f64).ceil() as usize).clamp(1, cdf.len()) - 1;
    Ok(cdf[idx].value)
}

pub fn mean(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    samples.iter().sum::<f64>() / samples.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn noise_variance_examples() {
        let s = noise_variance(15.36e6, 9.0, -174.0).unwrap();
        assert!((s - 10f64.powf(-19.5) * 15.36e6).abs() < 1e-25);
        assert!((s - 4.857e-13).abs() < 1e-15);
        let one = noise_variance(1.0, 0.0, -174.0).unwrap();
        assert!((one - 3.981_071_705_534_969e-21).abs() < 1e-33);
        assert_eq!(noise_variance(2.0, 3.0, -170.0).unwrap(), 2.0 * noise_variance(1.0, 3.0, -170.0).unwrap());
        assert!(noise_variance(0.0, 0.0, -174.0).is_err());
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(
            empirical_cdf(&[5.0]).unwrap(),
            vec![CdfPoint {
                value: 5.0,
                probability: 1.0
            }]
        );
        let c = empirical_cdf(&[3.0, 1.0, 4.0, 2.0]).unwrap();
        assert_eq!(c.iter().map(|p| p.probability).collect::<Vec<_>>(), vec![0.25, 0.5, 0.75, 1.0]);
        assert_eq!(c.iter().map(|p| p.value).collect::<Vec<_>>(), vec![1.0, 2.0, 3.0, 4.0]);
        assert!(empirical_cdf(&[]).is_err());
        assert!(empirical_cdf(&[f64::NAN]).is_err());
    }

    #[test]
    fn uniform_samples_follow_identity_cdf() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let samples: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let c = empirical_cdf(&samples).unwrap();
        let n = c.len() as f64;
        let ks = c
            .iter()
            .enumerate()
            .map(|(i, p)| (p.probability - p.value).abs().max((i as f64 / n - p.value).abs()))
            .fold(0.0, f64::max);
        assert!(ks < 0.02, "{ks}");
    }

    #[test]
    fn percentiles() {
        let s: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(percentile(&s, 0.05).unwrap(), 5.0);
        assert_eq!(percentile(&s, 0.0).unwrap(), 1.0);
        assert_eq!(percentile(&s, 1.0).unwrap(), 100.0);
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
    }
}
