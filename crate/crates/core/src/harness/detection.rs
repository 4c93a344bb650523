//! Detection experiment: calibrated GLRT thresholds and Pd versus range for
//! every (radar beam × allocator × RCR) combination.
//!
//! All combinations in one trial share the scenario, symbols, target phase
//! and echo noise. The transmit vector is linear in the beams, so the echo
//! products are assembled from per-beam noise projections `w_bᴴ z` and
//! target gains `aᴴ w_b` instead of regenerating the echo per combination.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{AllocatorKind, DopplerPlacement, ScenarioConfig};
use super::scenario::{allocate, draw_links, draw_scenario, estimate, prepare_beams, Environment};
use crate::array::steering_vector;
use crate::beamform::RadarBeamKind;
use crate::channel::{target_gain_magnitude, TargetChannel, SPEED_OF_LIGHT};
use crate::poweralloc::PowerAllocation;
use crate::radar::{
    echo_phase, min_calibration_trials, threshold_from_samples, DelayDopplerGrid, DetectionEstimate, GlrtKernel,
    SignalGrid, SymbolGrid,
};
use crate::rng::{substream, Stage};
use crate::{CVector, Error, Result, C64};

/// Trial indices used for threshold calibration start here, so calibration
/// and evaluation never share random streams.
pub const CALIBRATION_TRIAL_OFFSET: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionCombo {
    pub beam: RadarBeamKind,
    pub allocator: AllocatorKind,
    pub rcr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdRow {
    pub range_m: f64,
    pub beam: RadarBeamKind,
    pub allocator: AllocatorKind,
    pub rcr_db: f64,
    pub pd: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub detections: usize,
    pub trials: usize,
    pub threshold: f64,
}

impl PdRow {
    pub fn estimate(&self) -> DetectionEstimate {
        DetectionEstimate::from_counts(self.detections, self.trials)
    }

    pub fn combo(&self) -> DetectionCombo {
        DetectionCombo {
            beam: self.beam,
            allocator: self.allocator,
            rcr_db: self.rcr_db,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRecord {
    pub combo: DetectionCombo,
    pub threshold: f64,
    pub calibration_trials: usize,
    /// False alarms on the H₀ products of the evaluation trials.
    pub false_alarms: DetectionEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial: u64,
    pub combo: Option<DetectionCombo>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionExperimentResult {
    pub seed: u64,
    pub config_hash: String,
    pub pfa: f64,
    pub trials: usize,
    pub rows: Vec<PdRow>,
    pub thresholds: Vec<ThresholdRecord>,
    pub failures: Vec<TrialFailure>,
}

impl DetectionExperimentResult {
    /// Pd rows of one combination in range order.
    pub fn curve(&self, combo: DetectionCombo) -> Vec<&PdRow> {
        self.rows.iter().filter(|r| r.combo() == combo).collect()
    }
}

/// Peak statistics of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialPeaks {
    /// H₀ peak per combination; `None` if the combination failed.
    pub h0: Vec<Option<f64>>,
    /// H₁ peaks, `h1[c][r]` for combination `c` and range `r`.
    pub h1: Vec<Option<Vec<f64>>>,
    pub failures: Vec<TrialFailure>,
}

/// Everything fixed across detection trials.
#[derive(Debug, Clone)]
pub struct DetectionEngine {
    pub env: Environment,
    pub grid: DelayDopplerGrid,
    pub kernel: GlrtKernel,
    pub combos: Vec<DetectionCombo>,
}

/// Per-trial quantities shared by all combinations.
struct TrialState {
    radar_direction: crate::array::Direction,
    user_beams: Vec<CVector>,
    /// Radar beams in the order of `config.radar_beams`.
    radar_beams: Vec<(RadarBeamKind, CVector)>,
    allocations: Vec<std::result::Result<PowerAllocation, String>>,
    symbols: Vec<SymbolGrid>,
    radar_symbols: SymbolGrid,
    noise: SignalGrid,
    target_phase: f64,
    doppler: f64,
}

impl DetectionEngine {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        let env = Environment::new(config)?;
        let grid = DelayDopplerGrid::resolution_cells(&env.frame)?;
        let kernel = GlrtKernel::new(&grid, &env.frame);
        let mut combos = Vec::new();
        for &beam in &config.radar_beams {
            for &allocator in &config.allocators {
                for &rcr_db in &config.detection.rcr_db {
                    combos.push(DetectionCombo { beam, allocator, rcr_db });
                }
            }
        }
        if combos.is_empty() {
            return Err(Error::Config("no detection combinations configured".into()));
        }
        Ok(Self {
            env,
            grid,
            kernel,
            combos,
        })
    }

    pub fn max_range(&self) -> f64 {
        SPEED_OF_LIGHT * self.env.frame.cp_duration() / 2.0
    }

    fn check_ranges(&self, ranges: &[f64]) -> Result<()> {
        let max = self.max_range();
        if let Some(r) = ranges.iter().find(|r| !(**r > 0.0 && **r <= max)) {
            return Err(Error::invalid("ranges", format!("range {r} m outside (0, {max:.1}] m")));
        }
        Ok(())
    }

    fn draw_state(&self, trial: u64) -> Result<TrialState> {
        let env = &self.env;
        let cfg = &env.config;
        let det = &cfg.detection;
        let draw = draw_scenario(env, trial)?;
        let links = draw_links(env, &draw, det.channel_model, trial)?;
        let est = estimate(env, &links, det.estimator)?;
        let mut radar_beams = Vec::new();
        let mut contexts = Vec::new();
        let mut user_beams = Vec::new();
        for &kind in &cfg.radar_beams {
            let ctx = prepare_beams(env, &links, &est, kind, draw.radar_direction);
            if let Ok(ctx) = &ctx {
                user_beams = ctx.beams.user_beams.clone();
                radar_beams.push((kind, ctx.beams.radar_beam.clone()));
            }
            contexts.push((kind, ctx));
        }
        let allocations = self
            .combos
            .iter()
            .map(|c| {
                let (_, ctx) = contexts.iter().find(|(k, _)| *k == c.beam).expect("combo beam is configured");
                match ctx {
                    Ok(ctx) => allocate(env, ctx, c.allocator, c.rcr_db).map_err(|e| e.to_string()),
                    Err(e) => Err(e.to_string()),
                }
            })
            .collect();
        let (n, m) = (env.frame.n_symbols(), env.frame.n_subcarriers());
        let mut rng = substream(env.seed(), trial, Stage::Symbols);
        let symbols = (0..cfg.users).map(|_| SymbolGrid::qpsk(n, m, &mut rng)).collect();
        let radar_symbols = SymbolGrid::qpsk(n, m, &mut rng);
        let mut rng = substream(env.seed(), trial, Stage::EchoNoise);
        let noise = SignalGrid::noise(n, m, env.geom.num_elements(), env.noise_var, &mut rng);
        let mut rng = substream(env.seed(), trial, Stage::Target);
        let target_phase = rng.random::<f64>() * 2.0 * PI;
        let dopplers = self.grid.dopplers();
        let doppler = match det.doppler {
            DopplerPlacement::Zero => 0.0,
            DopplerPlacement::OnGrid => dopplers[rng.random_range(0..dopplers.len())],
            DopplerPlacement::OffGrid => {
                let (lo, hi) = (dopplers[0], dopplers[dopplers.len() - 1]);
                if hi > lo {
                    rng.random_range(lo..hi)
                } else {
                    lo
                }
            }
        };
        Ok(TrialState {
            radar_direction: draw.radar_direction,
            user_beams,
            radar_beams,
            allocations,
            symbols,
            radar_symbols,
            noise,
            target_phase,
            doppler,
        })
    }

    /// H₀ and H₁ peaks of every combination for trial `trial`.
    pub fn trial(&self, trial: u64, ranges: &[f64]) -> Result<TrialPeaks> {
        let env = &self.env;
        let state = self.draw_state(trial)?;
        let a = steering_vector(&env.geom, state.radar_direction);
        let k_users = state.user_beams.len();
        let n_re = env.frame.num_resource_elements();

        // Gains aᴴw and projections wᴴz: users first, then each radar beam.
        let mut beams: Vec<&CVector> = state.user_beams.iter().collect();
        beams.extend(state.radar_beams.iter().map(|(_, w)| w));
        let gains: Vec<C64> = beams.iter().map(|w| a.dotc(w)).collect();
        let projections: Vec<Vec<C64>> = beams
            .iter()
            .map(|w| state.noise.vectors().iter().map(|z| w.dotc(z)).collect())
            .collect();

        let alpha_scale = env.config.detection.alpha_scale;
        let magnitudes = ranges
            .iter()
            .map(|r| Ok(alpha_scale * target_gain_magnitude(*r, &env.geom, env.config.detection.rcs_m2)?))
            .collect::<Result<Vec<_>>>()?;
        let phases: Vec<Vec<C64>> = ranges
            .iter()
            .map(|r| {
                let target = TargetChannel::new(
                    C64::new(1.0, 0.0),
                    state.radar_direction,
                    2.0 * r / SPEED_OF_LIGHT,
                    state.doppler,
                    &env.geom,
                );
                (0..env.frame.n_symbols())
                    .flat_map(|n| (0..env.frame.n_subcarriers()).map(move |m| (n, m)))
                    .map(|(n, m)| echo_phase(&target, &env.frame, n, m))
                    .collect()
            })
            .collect();
        let unit_phase = C64::from_polar(1.0, state.target_phase);

        let mut out = TrialPeaks {
            h0: Vec::with_capacity(self.combos.len()),
            h1: Vec::with_capacity(self.combos.len()),
            failures: Vec::new(),
        };
        let mut gain_grid = vec![C64::new(0.0, 0.0); n_re];
        let mut noise_grid = vec![C64::new(0.0, 0.0); n_re];
        let mut products = vec![C64::new(0.0, 0.0); n_re];
        for (combo, alloc) in self.combos.iter().zip(&state.allocations) {
            let alloc = match alloc {
                Ok(a) => a,
                Err(message) => {
                    out.failures.push(TrialFailure {
                        trial,
                        combo: Some(*combo),
                        message: message.clone(),
                    });
                    out.h0.push(None);
                    out.h1.push(None);
                    continue;
                }
            };
            let radar_slot = k_users
                + state
                    .radar_beams
                    .iter()
                    .position(|(k, _)| *k == combo.beam)
                    .expect("allocation succeeded so the beam exists");
            let amps: Vec<f64> = alloc.eta_users().iter().map(|e| e.sqrt()).collect();
            let radar_amp = alloc.eta_radar().sqrt();
            for idx in 0..n_re {
                let mut g = C64::new(0.0, 0.0);
                let mut z = C64::new(0.0, 0.0);
                for k in 0..k_users {
                    let c = state.symbols[k].entries()[idx] * amps[k];
                    g += c * gains[k];
                    z += c.conj() * projections[k][idx];
                }
                let c = state.radar_symbols.entries()[idx] * radar_amp;
                g += c * gains[radar_slot];
                z += c.conj() * projections[radar_slot][idx];
                gain_grid[idx] = g;
                noise_grid[idx] = z;
            }
            let h0 = self.kernel.evaluate(&noise_grid)?.peak.value;
            let mut h1 = Vec::with_capacity(ranges.len());
            for (mag, phase) in magnitudes.iter().zip(&phases) {
                let alpha = unit_phase * *mag;
                for idx in 0..n_re {
                    products[idx] = alpha * gain_grid[idx].norm_sqr() * phase[idx] + noise_grid[idx];
                }
                h1.push(self.kernel.evaluate(&products)?.peak.value);
            }
            out.h0.push(Some(h0));
            out.h1.push(Some(h1));
        }
        Ok(out)
    }

    /// Reference implementation for one combination and range: builds the
    /// transmit grid and echo explicitly.
    pub fn trial_full_path(&self, trial: u64, combo_index: usize, range: f64) -> Result<(f64, f64)> {
        let env = &self.env;
        let state = self.draw_state(trial)?;
        let combo = self.combos[combo_index];
        let alloc = state.allocations[combo_index].clone().map_err(Error::Numerical)?;
        let radar_beam = state
            .radar_beams
            .iter()
            .find(|(k, _)| *k == combo.beam)
            .map(|(_, w)| w.clone())
            .ok_or_else(|| Error::Numerical("radar beam unavailable".into()))?;
        let beams = crate::beamform::BeamformerSet {
            user_beams: state.user_beams.clone(),
            radar_beam,
            radar_kind: combo.beam,
            radar_direction: state.radar_direction,
        };
        let u = crate::radar::synthesize_tx_grid(&beams, &alloc, &state.symbols, &state.radar_symbols)?;
        let mag = env.config.detection.alpha_scale
            * target_gain_magnitude(range, &env.geom, env.config.detection.rcs_m2)?;
        let target = TargetChannel::new(
            C64::from_polar(mag, state.target_phase),
            state.radar_direction,
            2.0 * range / SPEED_OF_LIGHT,
            state.doppler,
            &env.geom,
        );
        let y1 = crate::radar::target_echo_with_noise(&u, &target, &env.frame, &state.noise)?;
        let h1 = crate::radar::glrt_statistic(&u, &y1, &self.grid, &env.frame)?.peak.value;
        let h0 = crate::radar::glrt_statistic(&u, &state.noise, &self.grid, &env.frame)?.peak.value;
        Ok((h0, h1))
    }

    /// H₀ peaks of `n_trials` calibration trials, indexed `[combo][trial]`.
    pub fn calibration_peaks(&self, n_trials: usize) -> Result<(Vec<Vec<f64>>, Vec<TrialFailure>)> {
        let trials = (0..n_trials as u64)
            .into_par_iter()
            .map(|i| self.trial(CALIBRATION_TRIAL_OFFSET + i, &[]))
            .collect::<Result<Vec<_>>>()?;
        let mut peaks = vec![Vec::with_capacity(n_trials); self.combos.len()];
        let mut failures = Vec::new();
        for t in trials {
            for (c, v) in t.h0.into_iter().enumerate() {
                if let Some(v) = v {
                    peaks[c].push(v);
                }
            }
            failures.extend(t.failures);
        }
        Ok((peaks, failures))
    }

    /// One threshold per combination from `n_trials` H₀ trials.
    pub fn calibrate(&self, n_trials: usize) -> Result<(Vec<f64>, Vec<TrialFailure>)> {
        let pfa = self.env.config.detection.pfa;
        let needed = min_calibration_trials(pfa);
        if n_trials < needed {
            return Err(Error::invalid(
                "calibration_trials",
                format!("{n_trials} H0 trials cannot resolve pfa = {pfa}; need at least {needed}"),
            ));
        }
        let (peaks, failures) = self.calibration_peaks(n_trials)?;
        let thresholds = peaks
            .iter()
            .zip(&self.combos)
            .map(|(p, c)| {
                if p.len() < needed {
                    return Err(Error::Numerical(format!(
                        "only {} usable calibration trials for {:?}",
                        p.len(),
                        c
                    )));
                }
                threshold_from_samples(p, pfa)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((thresholds, failures))
    }
}

/// Calibrates thresholds in-run and estimates Pd over `n_trials` fresh trials
/// at each range.
pub fn run_detection_experiment(
    config: &ScenarioConfig,
    ranges: &[f64],
    n_trials: usize,
) -> Result<DetectionExperimentResult> {
    let engine = DetectionEngine::new(config)?;
    engine.check_ranges(ranges)?;
    let calibration_trials = config.detection.calibration_trials;
    let (thresholds, mut failures) = engine.calibrate(calibration_trials)?;
    let trials = (0..n_trials as u64)
        .into_par_iter()
        .map(|i| engine.trial(i, ranges))
        .collect::<Result<Vec<_>>>()?;

    let n_combos = engine.combos.len();
    let mut detections = vec![vec![0usize; ranges.len()]; n_combos];
    let mut counts = vec![0usize; n_combos];
    let mut false_alarms = vec![0usize; n_combos];
    for t in trials {
        for c in 0..n_combos {
            if let (Some(h0), Some(h1)) = (t.h0[c], &t.h1[c]) {
                counts[c] += 1;
                if h0 > thresholds[c] {
                    false_alarms[c] += 1;
                }
                for (r, v) in h1.iter().enumerate() {
                    if *v > thresholds[c] {
                        detections[c][r] += 1;
                    }
                }
            }
        }
        failures.extend(t.failures);
    }

    let mut rows = Vec::with_capacity(n_combos * ranges.len());
    let mut records = Vec::with_capacity(n_combos);
    for (c, combo) in engine.combos.iter().enumerate() {
        for (r, range) in ranges.iter().enumerate() {
            let est = DetectionEstimate::from_counts(detections[c][r], counts[c]);
            rows.push(PdRow {
                range_m: *range,
                beam: combo.beam,
                allocator: combo.allocator,
                rcr_db: combo.rcr_db,
                pd: est.pd,
                ci_low: est.ci_low,
                ci_high: est.ci_high,
                detections: est.detections,
                trials: est.trials,
                threshold: thresholds[c],
            });
        }
        records.push(ThresholdRecord {
            combo: *combo,
            threshold: thresholds[c],
            calibration_trials,
            false_alarms: DetectionEstimate::from_counts(false_alarms[c], counts[c]),
        });
    }
    Ok(DetectionExperimentResult {
        seed: config.seed,
        config_hash: config.hash()?,
        pfa: config.detection.pfa,
        trials: n_trials,
        rows,
        thresholds: records,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioConfig {
        let mut c = ScenarioConfig::default();
        c.array.n_y = 2;
        c.array.n_z = 4;
        c.users = 2;
        c.frame.n_symbols = 4;
        c.frame.n_subcarriers = 16;
        c.detection.calibration_trials = 400;
        c.detection.pfa = 0.25;
        c.detection.rcr_db = vec![3.0];
        c
    }

    #[test]
    fn fast_path_matches_explicit_echo() {
        let engine = DetectionEngine::new(&small()).unwrap();
        let ranges = [40.0, 150.0];
        for trial in 0..3 {
            let fast = engine.trial(trial, &ranges).unwrap();
            for c in 0..engine.combos.len() {
                for (r, range) in ranges.iter().enumerate() {
                    let (h0, h1) = engine.trial_full_path(trial, c, *range).unwrap();
                    let f0 = fast.h0[c].unwrap();
                    let f1 = fast.h1[c].as_ref().unwrap()[r];
                    assert!((f0 - h0).abs() <= 1e-9 * h0.abs(), "{f0} {h0}");
                    assert!((f1 - h1).abs() <= 1e-9 * h1.abs(), "{f1} {h1}");
                }
            }
        }
    }

    #[test]
    fn strong_target_is_always_detected() {
        let mut c = small();
        c.detection.alpha_scale = 1e6;
        let r = run_detection_experiment(&c, &[50.0, 300.0], 100).unwrap();
        assert!(r.failures.is_empty());
        assert!(r.rows.iter().all(|row| row.pd == 1.0), "{:?}", r.rows);
    }

    #[test]
    fn absent_target_detects_at_false_alarm_rate() {
        let mut c = small();
        c.detection.alpha_scale = 0.0;
        let r = run_detection_experiment(&c, &[50.0], 400).unwrap();
        for row in &r.rows {
            let est = row.estimate();
            assert!((est.pd - 0.25).abs() <= 4.0 * est.sigma(), "{row:?}");
        }
        for t in &r.thresholds {
            assert_eq!(t.false_alarms.detections, r.curve(t.combo)[0].detections);
        }
    }

    #[test]
    fn runs_are_reproducible_and_ranges_validated() {
        let c = small();
        let a = run_detection_experiment(&c, &[60.0], 50).unwrap();
        let b = run_detection_experiment(&c, &[60.0], 50).unwrap();
        assert_eq!(a, b);
        assert!(run_detection_experiment(&c, &[400.0], 10).is_err());
        let mut few = c.clone();
        few.detection.calibration_trials = 10;
        assert!(run_detection_experiment(&few, &[60.0], 10).is_err());
    }
}
