//! Downlink rate experiment: per-user rate samples for every combination of
//! channel model, estimator, radar beam and allocator over paired scenarios.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{AllocatorKind, ScenarioConfig};
use super::scenario::{allocate, draw_links, draw_scenario, estimate, prepare_beams, Environment};
use crate::beamform::RadarBeamKind;
use crate::channel::ChannelModelKind;
use crate::estimation::EstimatorKind;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub scenario: u64,
    pub seed: u64,
    pub user: usize,
    pub channel_model: ChannelModelKind,
    pub estimator: EstimatorKind,
    pub beam: RadarBeamKind,
    pub allocator: AllocatorKind,
    /// bit/s
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationRecord {
    pub scenario: u64,
    pub channel_model: ChannelModelKind,
    pub estimator: EstimatorKind,
    pub beam: RadarBeamKind,
    pub allocator: AllocatorKind,
    pub eta_radar: f64,
    pub eta_users: Vec<f64>,
    pub achieved_t: Option<f64>,
}

/// A combination that could not be evaluated in one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFailure {
    pub scenario: u64,
    pub channel_model: ChannelModelKind,
    pub estimator: Option<EstimatorKind>,
    pub beam: Option<RadarBeamKind>,
    pub allocator: Option<AllocatorKind>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateExperimentResult {
    pub seed: u64,
    pub config_hash: String,
    pub scenarios: usize,
    pub rows: Vec<RateRow>,
    pub allocations: Vec<AllocationRecord>,
    pub failures: Vec<ScenarioFailure>,
}

/// Key selecting one curve of the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Combo {
    pub channel_model: ChannelModelKind,
    pub estimator: EstimatorKind,
    pub beam: RadarBeamKind,
    pub allocator: AllocatorKind,
}

impl RateExperimentResult {
    pub fn rates(&self, combo: Combo) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| {
                r.channel_model == combo.channel_model
                    && r.estimator == combo.estimator
                    && r.beam == combo.beam
                    && r.allocator == combo.allocator
            })
            .map(|r| r.rate)
            .collect()
    }

    /// Per-scenario minimum rate for a combination.
    pub fn min_rates(&self, combo: Combo) -> Vec<f64> {
        let mut out: Vec<(u64, f64)> = Vec::new();
        for r in self.rows.iter().filter(|r| {
            r.channel_model == combo.channel_model
                && r.estimator == combo.estimator
                && r.beam == combo.beam
                && r.allocator == combo.allocator
        }) {
            match out.last_mut() {
                Some((s, v)) if *s == r.scenario => *v = v.min(r.rate),
                _ => out.push((r.scenario, r.rate)),
            }
        }
        out.into_iter().map(|(_, v)| v).collect()
    }
}

#[derive(Default)]
struct ScenarioOutput {
    rows: Vec<RateRow>,
    allocations: Vec<AllocationRecord>,
    failures: Vec<ScenarioFailure>,
}

fn run_scenario(env: &Environment, index: u64) -> Result<ScenarioOutput> {
    let cfg = &env.config;
    let mut out = ScenarioOutput::default();
    let draw = draw_scenario(env, index)?;
    for &model in &cfg.channel_models {
        let links = draw_links(env, &draw, model, index)?;
        for &estimator in &cfg.estimators {
            let est = estimate(env, &links, estimator)?;
            for &beam in &cfg.radar_beams {
                let ctx = match prepare_beams(env, &links, &est, beam, draw.radar_direction) {
                    Ok(ctx) => ctx,
                    Err(e) => {
                        out.failures.push(ScenarioFailure {
                            scenario: index,
                            channel_model: model,
                            estimator: Some(estimator),
                            beam: Some(beam),
                            allocator: None,
                            message: e.to_string(),
                        });
                        continue;
                    }
                };
                for &allocator in &cfg.allocators {
                    let alloc = match allocate(env, &ctx, allocator, cfg.power.rcr_db) {
                        Ok(a) => a,
                        Err(e @ (Error::Infeasible(_) | Error::SolverStalled { .. } | Error::Numerical(_))) => {
                            out.failures.push(ScenarioFailure {
                                scenario: index,
                                channel_model: model,
                                estimator: Some(estimator),
                                beam: Some(beam),
                                allocator: Some(allocator),
                                message: e.to_string(),
                            });
                            continue;
                        }
                        Err(e) => return Err(e),
                    };
                    let rates = ctx.coeffs.rates(alloc.eta_users(), alloc.eta_radar())?;
                    if rates.iter().any(|r| !r.is_finite()) {
                        return Err(Error::Numerical(format!("non-finite rate in scenario {index}")));
                    }
                    for (user, rate) in rates.into_iter().enumerate() {
                        out.rows.push(RateRow {
                            scenario: index,
                            seed: cfg.seed,
                            user,
                            channel_model: model,
                            estimator,
                            beam,
                            allocator,
                            rate,
                        });
                    }
                    out.allocations.push(AllocationRecord {
                        scenario: index,
                        channel_model: model,
                        estimator,
                        beam,
                        allocator,
                        eta_radar: alloc.eta_radar(),
                        eta_users: alloc.eta_users().to_vec(),
                        achieved_t: alloc.achieved_t(),
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Runs `n_scenarios` paired scenarios. Scenario `i` uses the random
/// streams `(seed, i, stage)`, so results do not depend on thread count.
pub fn run_rate_experiment(config: &ScenarioConfig, n_scenarios: usize) -> Result<RateExperimentResult> {
    let env = Environment::new(config)?;
    let outputs = (0..n_scenarios as u64)
        .into_par_iter()
        .map(|i| run_scenario(&env, i))
        .collect::<Result<Vec<_>>>()?;
    let mut result = RateExperimentResult {
        seed: config.seed,
        config_hash: config.hash()?,
        scenarios: n_scenarios,
        rows: Vec::new(),
        allocations: Vec::new(),
        failures: Vec::new(),
    };
    for o in outputs {
        result.rows.extend(o.rows);
        result.allocations.extend(o.allocations);
        result.failures.extend(o.failures);
    }
    Ok(result)
}
