//! Closed-form downlink rate bounds.
//!
//! With power `η_k` on user `k`, `η_R` on the radar beam and noise `σ_z²` the
//! bound has the compact form
//!
//! ```text
//! SINR_k = η_k γ_k / (Σ_j η_j ξ_kj + η_R ζ_k + σ_z²)
//! R_k    = B (τ_d / τ_c) log₂(1 + SINR_k)
//! ```
//!
//! The coefficients are the use-and-then-forget terms for beams proportional
//! to the channel estimates and scaled to unit average power:
//! `γ_k = |E[h_kᴴ w_k]|²`, `ξ_kj = E|h_kᴴ w_j|²` for `j ≠ k`,
//! `ξ_kk = Var(h_kᴴ w_k)` and `ζ_k = w_Rᴴ H̄_k w_R`.
//!
//! The fourth-moment terms `δ_k` (pilot-matched estimation) and `δ̃_j^(k)`
//! (LMMSE) depend on the channel model. For zero-mean fading with a random
//! LoS phase, `E|hᴴAh|² − tr(A H̄ Aᴴ H̄) = c²(|tr A|² + 2K Re((aᴴAa)·conj tr A))`
//! with `c = β/(K+1)`; this is [`DeltaReading::TraceProduct`]. The other
//! readings are kept for comparison against the simulated bound.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelModelKind, ChannelStats};
use crate::estimation::{EstimatorKind, EstimatorMatrices, PilotBook};
use crate::linalg::{quadratic_form, real_part, trace, trace_of_product};
use crate::poweralloc::PowerAllocation;
use crate::{CMatrix, CVector, Error, Result};

/// Relative tolerance for imaginary residues of quantities that must be real.
pub const REAL_TOLERANCE: f64 = 1e-9;
/// Relative margin below zero that is still clamped for a diagonal `ξ_kk`.
pub const CLAMP_TOLERANCE: f64 = 1e-9;

/// Coherence-block bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameTiming {
    /// Bandwidth in Hz.
    pub bandwidth: f64,
    /// Coherence block length in symbols.
    pub tau_c: usize,
    /// Pilot length in symbols.
    pub tau_p: usize,
}

impl FrameTiming {
    pub fn new(bandwidth: f64, tau_c: usize, tau_p: usize) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::invalid("bandwidth", format!("{bandwidth} is not positive")));
        }
        if tau_p == 0 || tau_p >= tau_c {
            return Err(Error::invalid(
                "tau_p",
                format!("need 0 < tau_p < tau_c, got tau_p = {tau_p}, tau_c = {tau_c}"),
            ));
        }
        Ok(Self {
            bandwidth,
            tau_c,
            tau_p,
        })
    }

    pub fn tau_d(&self) -> usize {
        self.tau_c - self.tau_p
    }

    /// `B τ_d / τ_c`.
    pub fn prelog(&self) -> f64 {
        self.bandwidth * self.tau_d() as f64 / self.tau_c as f64
    }
}

/// How the Rice fourth-moment term is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaReading {
    /// `(aᴴEᴴa)·tr E`, real part.
    #[default]
    TraceProduct,
    /// `|aᴴEa|²`.
    SquaredQuadratic,
    /// `aᴴEᴴEa`.
    GramQuadratic,
    /// First term `tr E` rather than `|tr E|²`, and `N(N + 2K)` for the
    /// pilot-matched Rice term.
    Literal,
}

impl DeltaReading {
    pub const ALL: [DeltaReading; 4] = [
        Self::TraceProduct,
        Self::SquaredQuadratic,
        Self::GramQuadratic,
        Self::Literal,
    ];
}

impl fmt::Display for DeltaReading {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::TraceProduct => "trace_product",
            Self::SquaredQuadratic => "squared_quadratic",
            Self::GramQuadratic => "gram_quadratic",
            Self::Literal => "literal",
        };
        f.write_str(s)
    }
}

/// Beam scaling assumed by the pilot-matched closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PmNormalization {
    /// `w_j = ĥ_j / √E‖ĥ_j‖²`, so every beam has unit average power.
    #[default]
    AveragePower,
    /// `w_j = ĥ_j / √tr(H̄_j)`, which carries the estimation noise power
    /// into the beam.
    TraceOfHbar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CoefficientOptions {
    pub delta_reading: DeltaReading,
    pub pm_normalization: PmNormalization,
}

/// Coefficients that make the rate bound a function of the powers alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCoefficients {
    pub estimator: EstimatorKind,
    pub gamma: Vec<f64>,
    /// `xi[(k, j)]` is the interference on user `k` from the beam of user `j`.
    pub xi: DMatrix<f64>,
    pub zeta_radar: Vec<f64>,
    pub noise_var: f64,
    pub timing: FrameTiming,
}

impl RateCoefficients {
    pub fn new(
        estimator: EstimatorKind,
        gamma: Vec<f64>,
        xi: DMatrix<f64>,
        zeta_radar: Vec<f64>,
        noise_var: f64,
        timing: FrameTiming,
    ) -> Result<Self> {
        let k = gamma.len();
        if xi.nrows() != k || xi.ncols() != k {
            return Err(Error::DimensionMismatch {
                context: "xi matrix",
                expected: k,
                actual: xi.nrows().max(xi.ncols()),
            });
        }
        if zeta_radar.len() != k {
            return Err(Error::DimensionMismatch {
                context: "zeta_radar",
                expected: k,
                actual: zeta_radar.len(),
            });
        }
        if gamma.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::invalid("gamma", "signal coefficients must be positive"));
        }
        if xi.iter().chain(&zeta_radar).any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::invalid("xi", "interference coefficients must be nonnegative"));
        }
        if !(noise_var.is_finite() && noise_var >= 0.0) {
            return Err(Error::invalid("noise_var", format!("{noise_var} is negative")));
        }
        Ok(Self {
            estimator,
            gamma,
            xi,
            zeta_radar,
            noise_var,
            timing,
        })
    }

    pub fn num_users(&self) -> usize {
        self.gamma.len()
    }

    /// Interference-plus-noise power seen by user `k`.
    pub fn denominator(&self, k: usize, eta_users: &[f64], eta_radar: f64) -> f64 {
        let interference: f64 = eta_users.iter().enumerate().map(|(j, e)| e * self.xi[(k, j)]).sum();
        interference + eta_radar * self.zeta_radar[k] + self.noise_var
    }

    pub fn sinr(&self, eta_users: &[f64], eta_radar: f64) -> Result<Vec<f64>> {
        self.check_powers(eta_users, eta_radar)?;
        (0..self.num_users())
            .map(|k| {
                let num = eta_users[k] * self.gamma[k];
                let den = self.denominator(k, eta_users, eta_radar);
                if num == 0.0 {
                    return Ok(0.0);
                }
                if !(den > 0.0) {
                    return Err(Error::Numerical(format!(
                        "nonpositive SINR denominator {den} for user {k}"
                    )));
                }
                Ok(num / den)
            })
            .collect()
    }

    /// Per-user rates in bit/s.
    pub fn rates(&self, eta_users: &[f64], eta_radar: f64) -> Result<Vec<f64>> {
        let prelog = self.timing.prelog();
        Ok(self
            .sinr(eta_users, eta_radar)?
            .into_iter()
            .map(|s| prelog * s.log2_1p())
            .collect())
    }

    fn check_powers(&self, eta_users: &[f64], eta_radar: f64) -> Result<()> {
        if eta_users.len() != self.num_users() {
            return Err(Error::DimensionMismatch {
                context: "user powers",
                expected: self.num_users(),
                actual: eta_users.len(),
            });
        }
        if eta_users.iter().chain(std::iter::once(&eta_radar)).any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::invalid("powers", "powers must be finite and nonnegative"));
        }
        Ok(())
    }
}

trait Log2OnePlus {
    fn log2_1p(self) -> f64;
}

impl Log2OnePlus for f64 {
    fn log2_1p(self) -> f64 {
        self.ln_1p() / std::f64::consts::LN_2
    }
}

/// Per-user rates for an allocation.
pub fn rate(coeffs: &RateCoefficients, powers: &PowerAllocation) -> Result<Vec<f64>> {
    coeffs.rates(powers.eta_users(), powers.eta_radar())
}

/// SINR values for an allocation.
pub fn sinr(coeffs: &RateCoefficients, powers: &PowerAllocation) -> Result<Vec<f64>> {
    coeffs.sinr(powers.eta_users(), powers.eta_radar())
}

fn rice_scale(stats: &ChannelStats) -> f64 {
    stats.beta() / (stats.k_factor() + 1.0)
}

/// `δ_k = E‖h_k‖⁴ − tr(H̄_k²)`.
pub fn delta_pm(stats: &ChannelStats, reading: DeltaReading) -> f64 {
    let n = stats.num_elements() as f64;
    match stats.kind() {
        ChannelModelKind::Rayleigh => stats.beta().powi(2) * n * n,
        ChannelModelKind::LoS => 0.0,
        ChannelModelKind::Rice => {
            let c = rice_scale(stats);
            let k = stats.k_factor();
            match reading {
                DeltaReading::Literal => c * c * n * (n + 2.0 * k),
                _ => c * c * n * n * (1.0 + 2.0 * k),
            }
        }
    }
}

/// `δ̃_j^(k) = E|h_kᴴ E_jᴴ h_k|² − tr(E_jᴴ H̄_k E_j H̄_k)` for the statistics of
/// user `k` and the LMMSE filter `E_j`.
pub fn delta_lmmse(stats_k: &ChannelStats, e_j: &CMatrix, reading: DeltaReading) -> Result<f64> {
    let n = stats_k.num_elements();
    if e_j.nrows() != n || e_j.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "LMMSE filter",
            expected: n,
            actual: e_j.nrows(),
        });
    }
    if stats_k.kind() == ChannelModelKind::LoS {
        return Ok(0.0);
    }
    let tr = trace(e_j);
    let first = match reading {
        DeltaReading::Literal => real_part(tr, REAL_TOLERANCE, "tr(E)")?,
        _ => tr.norm_sqr(),
    };
    let c = match stats_k.kind() {
        ChannelModelKind::Rayleigh => return Ok(stats_k.beta().powi(2) * first),
        _ => rice_scale(stats_k),
    };
    let a = stats_k.steering();
    let ea = e_j * a;
    let second = match reading {
        DeltaReading::TraceProduct | DeltaReading::Literal => (ea.dotc(a) * tr).re,
        DeltaReading::SquaredQuadratic => a.dotc(&ea).norm_sqr(),
        DeltaReading::GramQuadratic => ea.norm_squared(),
    };
    Ok(c * c * (first + 2.0 * stats_k.k_factor() * second))
}

/// `ζ_k = w_Rᴴ H̄_k w_R`.
pub fn zeta_radar(stats: &ChannelStats, radar_beam: &CVector) -> Result<f64> {
    if radar_beam.len() != stats.num_elements() {
        return Err(Error::DimensionMismatch {
            context: "radar beam",
            expected: stats.num_elements(),
            actual: radar_beam.len(),
        });
    }
    let q = real_part(quadratic_form(radar_beam, stats.hbar()), REAL_TOLERANCE, "w_R' H w_R")?;
    Ok(q.max(0.0))
}

fn clamp_diagonal(value: f64, scale: f64, k: usize) -> Result<f64> {
    if value >= 0.0 {
        Ok(value)
    } else if value >= -CLAMP_TOLERANCE * scale {
        Ok(0.0)
    } else {
        Err(Error::Numerical(format!(
            "self-interference coefficient for user {k} is {value:e}, below zero beyond tolerance"
        )))
    }
}

/// Signal coefficients `γ` and the interference matrix `ξ`.
pub fn xi_matrix(
    stats: &[ChannelStats],
    book: &PilotBook,
    matrices: &EstimatorMatrices,
    options: CoefficientOptions,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let k_users = stats.len();
    if book.num_users() != k_users || matrices.ry.len() != k_users {
        return Err(Error::DimensionMismatch {
            context: "coefficient inputs",
            expected: k_users,
            actual: book.num_users().min(matrices.ry.len()),
        });
    }
    match (matrices.kind, &matrices.e) {
        (EstimatorKind::Pm, _) => pm_xi(stats, book, &matrices.ry, options),
        (EstimatorKind::Lmmse, Some(e)) => lmmse_xi(stats, book, e, options.delta_reading),
        (EstimatorKind::Lmmse, None) => Err(Error::invalid("matrices", "LMMSE filters are missing")),
    }
}

fn pm_xi(
    stats: &[ChannelStats],
    book: &PilotBook,
    ry: &[CMatrix],
    options: CoefficientOptions,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let k_users = stats.len();
    let trace_hbar: Vec<f64> = stats.iter().map(|s| s.beta() * s.num_elements() as f64).collect();
    let delta: Vec<f64> = stats.iter().map(|s| delta_pm(s, options.delta_reading)).collect();
    let nu: Vec<f64> = match options.pm_normalization {
        PmNormalization::AveragePower => (0..k_users)
            .map(|j| {
                let tr = real_part(trace(&ry[j]), REAL_TOLERANCE, "tr(R_y)")?;
                Ok(book.power(j) * trace_hbar[j] / tr)
            })
            .collect::<Result<_>>()?,
        PmNormalization::TraceOfHbar => vec![1.0; k_users],
    };
    let mut xi = DMatrix::zeros(k_users, k_users);
    for k in 0..k_users {
        for j in 0..k_users {
            let cross = real_part(trace_of_product(&ry[j], stats[k].hbar()), REAL_TOLERANCE, "tr(R_y H)")?;
            let rho = book.overlap(k, j);
            let second = (cross + book.power(k) * rho * delta[k]) / (book.power(j) * trace_hbar[j]);
            xi[(k, j)] = if j == k {
                clamp_diagonal((second - trace_hbar[k]) * nu[k], second * nu[k], k)?
            } else {
                second * nu[j]
            };
        }
    }
    let gamma = trace_hbar.iter().zip(&nu).map(|(g, n)| g * n).collect();
    Ok((gamma, xi))
}

fn lmmse_xi(
    stats: &[ChannelStats],
    book: &PilotBook,
    e: &[CMatrix],
    reading: DeltaReading,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let k_users = stats.len();
    let he: Vec<CMatrix> = (0..k_users).map(|j| stats[j].hbar() * &e[j]).collect();
    let gamma: Vec<f64> = (0..k_users)
        .map(|k| Ok(book.power(k).sqrt() * real_part(trace(&he[k]), REAL_TOLERANCE, "tr(H E)")?))
        .collect::<Result<_>>()?;
    let mut xi = DMatrix::zeros(k_users, k_users);
    for k in 0..k_users {
        for j in 0..k_users {
            let first = book.power(j).sqrt()
                * real_part(trace_of_product(&he[j], stats[k].hbar()), REAL_TOLERANCE, "tr(H E H)")?;
            let rho = book.overlap(k, j);
            let extra = if rho > 0.0 {
                book.power(k) * rho * delta_lmmse(&stats[k], &e[j], reading)?
            } else {
                0.0
            };
            let second = (first + extra) / gamma[j];
            xi[(k, j)] = if j == k {
                clamp_diagonal(second - gamma[k], second, k)?
            } else {
                second
            };
        }
    }
    Ok((gamma, xi))
}

/// Builds every coefficient of the bound for the given estimator family.
pub fn assemble_coefficients(
    stats: &[ChannelStats],
    book: &PilotBook,
    matrices: &EstimatorMatrices,
    radar_beam: &CVector,
    noise_var: f64,
    timing: FrameTiming,
    options: CoefficientOptions,
) -> Result<RateCoefficients> {
    let (gamma, xi) = xi_matrix(stats, book, matrices, options)?;
    let zeta = stats.iter().map(|s| zeta_radar(s, radar_beam)).collect::<Result<Vec<_>>>()?;
    RateCoefficients::new(matrices.kind, gamma, xi, zeta, noise_var, timing)
}

/// Inputs of the expanded per-user SINR expressions.
#[derive(Debug, Clone, Copy)]
pub struct DirectSinrInputs<'a> {
    pub stats: &'a [ChannelStats],
    pub book: &'a PilotBook,
    pub pilot_noise: f64,
    pub radar_beam: &'a CVector,
    pub noise_var: f64,
    pub eta_users: &'a [f64],
    pub eta_radar: f64,
}

/// Pilot-matched SINR written out term by term.
pub fn pm_sinr_direct(inputs: DirectSinrInputs<'_>, options: CoefficientOptions) -> Result<Vec<f64>> {
    let DirectSinrInputs {
        stats,
        book,
        pilot_noise,
        radar_beam,
        noise_var,
        eta_users,
        eta_radar,
    } = inputs;
    let k_users = stats.len();
    let n = stats.first().map_or(0, |s| s.num_elements());
    let mut out = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let mut signal = 0.0;
        let mut den = noise_var + eta_radar * zeta_radar(&stats[k], radar_beam)?;
        for j in 0..k_users {
            // R_{y,j} = Σ_i η_{p,i} ρ_ij H̄_i + σ_w² I.
            let mut tr_ry_hk = pilot_noise * stats[k].beta() * n as f64;
            let mut tr_ry = pilot_noise * n as f64;
            for i in 0..k_users {
                let w = book.power(i) * book.overlap(i, j);
                if w != 0.0 {
                    tr_ry_hk += w * trace_of_product(stats[i].hbar(), stats[k].hbar()).re;
                    tr_ry += w * stats[i].beta() * n as f64;
                }
            }
            let gamma_j = stats[j].beta() * n as f64;
            let scale = match options.pm_normalization {
                PmNormalization::AveragePower => book.power(j) / tr_ry,
                PmNormalization::TraceOfHbar => 1.0 / gamma_j,
            };
            let rho = book.overlap(k, j);
            let e2 = (tr_ry_hk + book.power(k) * rho * delta_pm(&stats[k], options.delta_reading)) / book.power(j);
            den += eta_users[j] * e2 * scale;
            if j == k {
                signal = eta_users[k] * gamma_j * gamma_j * scale;
            }
        }
        den -= signal;
        out.push(if signal == 0.0 { 0.0 } else { signal / den });
    }
    Ok(out)
}

/// LMMSE SINR written out term by term from the filters `E_k`.
pub fn lmmse_sinr_direct(inputs: DirectSinrInputs<'_>, e: &[CMatrix], reading: DeltaReading) -> Result<Vec<f64>> {
    let DirectSinrInputs {
        stats,
        book,
        radar_beam,
        noise_var,
        eta_users,
        eta_radar,
        ..
    } = inputs;
    let k_users = stats.len();
    let gamma: Vec<f64> = (0..k_users)
        .map(|j| book.power(j).sqrt() * trace_of_product(stats[j].hbar(), &e[j]).re)
        .collect();
    let mut out = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let mut den = noise_var + eta_radar * zeta_radar(&stats[k], radar_beam)?;
        for j in 0..k_users {
            let hej = stats[j].hbar() * &e[j];
            let mut term = book.power(j).sqrt() * trace_of_product(&hej, stats[k].hbar()).re;
            let rho = book.overlap(k, j);
            if rho > 0.0 {
                term += book.power(k) * rho * delta_lmmse(&stats[k], &e[j], reading)?;
            }
            den += eta_users[j] * term / gamma[j];
        }
        let signal = eta_users[k] * gamma[k];
        den -= signal;
        out.push(if signal == 0.0 { 0.0 } else { signal / den });
    }
    Ok(out)
}
