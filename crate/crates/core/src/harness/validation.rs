//! Monte-Carlo check of the closed-form bound terms on scenario draws.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::scenario::{channel_stats, draw_scenario, Environment};
use crate::channel::{draw_user_channel, ChannelModelKind};
use crate::estimation::{training_observation, EstimatorKind, EstimatorMatrices, PilotBook};
use crate::linalg::trace;
use crate::rate::{xi_matrix, CoefficientOptions};
use crate::rng::{substream, Stage};
use crate::{Result, C64};

/// Empirical `γ_k = |E[h_kᴴ w_k]|²` and `ξ_kj = E|h_kᴴ w_j|² − γ_k δ_kj` for
/// beams `w_j = ĥ_j / √E‖ĥ_j‖²`.
pub fn monte_carlo_bound_terms(
    stats: &[crate::channel::ChannelStats],
    book: &PilotBook,
    matrices: &EstimatorMatrices,
    pilot_noise: f64,
    draws: usize,
    seed: u64,
    stream: u64,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let k_users = stats.len();
    let norm: Vec<f64> = (0..k_users)
        .map(|j| match &matrices.e {
            Some(e) => trace(&(e[j].adjoint() * &matrices.ry[j] * &e[j])).re,
            None => trace(&matrices.ry[j]).re / book.power(j),
        })
        .collect();
    let mut mean = vec![C64::new(0.0, 0.0); k_users];
    let mut second = DMatrix::<f64>::zeros(k_users, k_users);
    let mut rng = substream(seed, stream, Stage::Validation);
    for _ in 0..draws {
        let ch: Vec<_> = stats.iter().map(|s| draw_user_channel(s, &mut rng)).collect();
        let y = training_observation(&ch, book, pilot_noise, &mut rng)?;
        let est = matrices.estimate(&y, book);
        for k in 0..k_users {
            for j in 0..k_users {
                let s = ch[k].h.dotc(&est[j]) / norm[j].sqrt();
                second[(k, j)] += s.norm_sqr();
                if j == k {
                    mean[k] += s;
                }
            }
        }
    }
    let n = draws.max(1) as f64;
    let gamma: Vec<f64> = mean.iter().map(|m| (m / n).norm_sqr()).collect();
    let mut xi = second / n;
    for k in 0..k_users {
        xi[(k, k)] -= gamma[k];
    }
    Ok((gamma, xi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub scenario: u64,
    pub channel_model: ChannelModelKind,
    pub estimator: EstimatorKind,
    pub draws: usize,
    /// Largest `|γ_k − γ̂_k| / γ_k`.
    pub gamma_error: f64,
    /// Largest `|ξ_kj − ξ̂_kj| / (γ_k + Σ_j ξ_kj)`, i.e. relative to user k's
    /// total received power, so tiny cross terms do not dominate.
    pub xi_error: f64,
}

/// Compares closed-form and Monte-Carlo bound terms for every configured
/// channel model and estimator on scenarios `0..n_scenarios`.
pub fn validate_bound_terms(config: &ScenarioConfig, n_scenarios: usize, draws: usize) -> Result<Vec<ValidationRow>> {
    let env = Environment::new(config)?;
    let options: CoefficientOptions = config.rate;
    let mut rows = Vec::new();
    for scenario in 0..n_scenarios as u64 {
        let draw = draw_scenario(&env, scenario)?;
        for &model in &config.channel_models {
            let stats = channel_stats(&env, &draw, model)?;
            for &estimator in &config.estimators {
                let matrices = EstimatorMatrices::build(estimator, &env.book, &stats, env.noise_var)?;
                let (gamma, xi) = xi_matrix(&stats, &env.book, &matrices, options)?;
                let (g_mc, xi_mc) =
                    monte_carlo_bound_terms(&stats, &env.book, &matrices, env.noise_var, draws, env.seed(), scenario)?;
                let k_users = gamma.len();
                let mut gamma_error: f64 = 0.0;
                let mut xi_error: f64 = 0.0;
                for k in 0..k_users {
                    gamma_error = gamma_error.max((gamma[k] - g_mc[k]).abs() / gamma[k]);
                    let total = gamma[k] + xi.row(k).sum();
                    for j in 0..k_users {
                        xi_error = xi_error.max((xi[(k, j)] - xi_mc[(k, j)]).abs() / total);
                    }
                }
                rows.push(ValidationRow {
                    scenario,
                    channel_model: model,
                    estimator,
                    draws,
                    gamma_error,
                    xi_error,
                });
            }
        }
    }
    Ok(rows)
}
