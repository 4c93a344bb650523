//! User and target channel models.
//!
//! User channels are frequency flat and follow one of three models: i.i.d.
//! Rayleigh, pure line-of-sight with a uniform random phase, or Rice. Each
//! user carries its [`ChannelStats`], including the correlation matrix
//! `H̄ = E[h hᴴ]` that the estimators and the rate bounds consume.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::array::{steering_vector, ArrayGeometry, Direction};
use crate::linalg::outer;
use crate::rng::complex_gaussian_vector;
use crate::{CMatrix, CVector, Error, Result, C64};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Radar cross-section of a small unmanned aerial vehicle, in m².
pub const DEFAULT_TARGET_RCS: f64 = 0.1253;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelModelKind {
    Rayleigh,
    #[serde(rename = "los")]
    LoS,
    Rice,
}

impl ChannelModelKind {
    pub const ALL: [ChannelModelKind; 3] = [Self::Rayleigh, Self::LoS, Self::Rice];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Rayleigh => "rayleigh",
            Self::LoS => "los",
            Self::Rice => "rice",
        }
    }
}

impl fmt::Display for ChannelModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChannelModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rayleigh" => Ok(Self::Rayleigh),
            "los" => Ok(Self::LoS),
            "rice" | "rician" => Ok(Self::Rice),
            other => Err(Error::Config(format!("unknown channel model `{other}`"))),
        }
    }
}

/// Model-level description of one user's channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStats {
    kind: ChannelModelKind,
    beta: f64,
    k_factor: f64,
    direction: Direction,
    steering: CVector,
    hbar: CMatrix,
}

impl ChannelStats {
    pub fn new(
        kind: ChannelModelKind,
        beta: f64,
        k_factor: f64,
        direction: Direction,
        geom: &ArrayGeometry,
    ) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::invalid("beta", format!("{beta} is not positive")));
        }
        if !(k_factor.is_finite() && k_factor >= 0.0) {
            return Err(Error::invalid("k_factor", format!("{k_factor} is negative or not finite")));
        }
        let k_factor = if kind == ChannelModelKind::Rice { k_factor } else { 0.0 };
        let steering = steering_vector(geom, direction);
        let hbar = hbar_from_steering(kind, beta, k_factor, &steering);
        Ok(Self {
            kind,
            beta,
            k_factor,
            direction,
            steering,
            hbar,
        })
    }

    pub fn rayleigh(beta: f64, direction: Direction, geom: &ArrayGeometry) -> Result<Self> {
        Self::new(ChannelModelKind::Rayleigh, beta, 0.0, direction, geom)
    }

    pub fn los(beta: f64, direction: Direction, geom: &ArrayGeometry) -> Result<Self> {
        Self::new(ChannelModelKind::LoS, beta, 0.0, direction, geom)
    }

    pub fn rice(beta: f64, k_factor: f64, direction: Direction, geom: &ArrayGeometry) -> Result<Self> {
        Self::new(ChannelModelKind::Rice, beta, k_factor, direction, geom)
    }

    pub fn kind(&self) -> ChannelModelKind {
        self.kind
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Linear Ricean factor; zero for the other models.
    pub fn k_factor(&self) -> f64 {
        self.k_factor
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// Steering vector towards the user.
    pub fn steering(&self) -> &CVector {
        &self.steering
    }

    /// Correlation matrix `H̄ = E[h hᴴ]`.
    pub fn hbar(&self) -> &CMatrix {
        &self.hbar
    }

    pub fn num_elements(&self) -> usize {
        self.steering.len()
    }
}

/// Correlation matrix `H̄` for the given model: `β I` (Rayleigh), `β a aᴴ`
/// (LoS) or `β/(K+1) (K a aᴴ + I)` (Rice).
pub fn hbar_matrix(
    kind: ChannelModelKind,
    beta: f64,
    k_factor: f64,
    direction: Direction,
    geom: &ArrayGeometry,
) -> CMatrix {
    hbar_from_steering(kind, beta, k_factor, &steering_vector(geom, direction))
}

fn hbar_from_steering(kind: ChannelModelKind, beta: f64, k_factor: f64, a: &CVector) -> CMatrix {
    let n = a.len();
    match kind {
        ChannelModelKind::Rayleigh => CMatrix::from_diagonal_element(n, n, C64::new(beta, 0.0)),
        ChannelModelKind::LoS => outer(a, a) * C64::new(beta, 0.0),
        ChannelModelKind::Rice => {
            let scale = beta / (k_factor + 1.0);
            let mut m = outer(a, a) * C64::new(k_factor * scale, 0.0);
            for i in 0..n {
                m[(i, i)] += C64::new(scale, 0.0);
            }
            m
        }
    }
}

/// One realisation of a user channel.
#[derive(Debug, Clone, PartialEq)]
pub struct UserChannel {
    pub h: CVector,
    pub stats: ChannelStats,
    /// LoS phase `ψ`, present for LoS and Rice draws.
    pub phase_psi: Option<f64>,
}

/// Draws `h` according to the model in `stats`.
pub fn draw_user_channel<R: Rng + ?Sized>(stats: &ChannelStats, rng: &mut R) -> UserChannel {
    let n = stats.num_elements();
    let (h, phase_psi) = match stats.kind {
        ChannelModelKind::Rayleigh => {
            let g = complex_gaussian_vector(rng, n, 1.0);
            (g * C64::new(stats.beta.sqrt(), 0.0), None)
        }
        ChannelModelKind::LoS => {
            let psi = rng.random::<f64>() * 2.0 * PI;
            let coef = C64::from_polar(stats.beta.sqrt(), psi);
            (&stats.steering * coef, Some(psi))
        }
        ChannelModelKind::Rice => {
            let psi = rng.random::<f64>() * 2.0 * PI;
            let g = complex_gaussian_vector(rng, n, 1.0);
            let scale = (stats.beta / (stats.k_factor + 1.0)).sqrt();
            let los = &stats.steering * C64::from_polar(stats.k_factor.sqrt(), psi);
            ((los + g) * C64::new(scale, 0.0), Some(psi))
        }
    };
    UserChannel {
        h,
        stats: stats.clone(),
        phase_psi,
    }
}

/// Ricean factor `K = p / (1 - p)` from a LoS probability.
pub fn k_factor_from_los_probability(p_los: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&p_los) {
        return Err(Error::invalid(
            "p_los",
            format!("{p_los} outside [0, 1); K is unbounded at 1"),
        ));
    }
    Ok(p_los / (1.0 - p_los))
}

/// Distance-dependent LoS probability
/// `min(d1/d, 1) (1 - e^{-d/d2}) + e^{-d/d2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LosProbabilityModel {
    pub d1: f64,
    pub d2: f64,
}

impl Default for LosProbabilityModel {
    fn default() -> Self {
        Self { d1: 18.0, d2: 63.0 }
    }
}

impl LosProbabilityModel {
    pub fn probability(&self, d_2d: f64) -> f64 {
        let e = (-d_2d / self.d2).exp();
        (self.d1 / d_2d).min(1.0) * (1.0 - e) + e
    }
}

/// Source of large-scale fading coefficients `β_k`.
pub trait LargeScaleModel {
    /// Linear-scale `β` for user `index` at 3-D distance `d_3d` metres.
    fn beta(&self, index: usize, d_3d: f64, rng: &mut dyn RngCore) -> f64;
}

/// Log-distance path loss with optional log-normal shadowing:
/// `β_dB = -PL₀ - 10 n log₁₀(d / d₀) + σ_sh ξ`, `ξ ~ N(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogDistance {
    pub pl0_db: f64,
    pub exponent: f64,
    pub reference_distance: f64,
    pub shadowing_db: f64,
}

impl LogDistance {
    /// Defaults for non-line-of-sight links.
    pub fn nlos() -> Self {
        Self {
            pl0_db: 30.0,
            exponent: 3.5,
            reference_distance: 1.0,
            shadowing_db: 8.0,
        }
    }

    /// Defaults for line-of-sight links.
    pub fn los() -> Self {
        Self {
            pl0_db: 30.0,
            exponent: 2.2,
            reference_distance: 1.0,
            shadowing_db: 4.0,
        }
    }

    /// Mean `β_dB` at distance `d_3d`.
    pub fn mean_db(&self, d_3d: f64) -> f64 {
        -self.pl0_db - 10.0 * self.exponent * (d_3d / self.reference_distance).log10()
    }

    /// `β` with a caller-supplied standard-normal shadowing sample.
    pub fn beta_with_shadowing(&self, d_3d: f64, standard_normal: f64) -> f64 {
        10f64.powf((self.mean_db(d_3d) + self.shadowing_db * standard_normal) / 10.0)
    }
}

impl LargeScaleModel for LogDistance {
    fn beta(&self, _index: usize, d_3d: f64, rng: &mut dyn RngCore) -> f64 {
        let xi: f64 = if self.shadowing_db > 0.0 {
            rng.sample(StandardNormal)
        } else {
            0.0
        };
        self.beta_with_shadowing(d_3d, xi)
    }
}

/// Per-user `β` values injected directly.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedBeta(pub Vec<f64>);

impl LargeScaleModel for FixedBeta {
    fn beta(&self, index: usize, _d_3d: f64, _rng: &mut dyn RngCore) -> f64 {
        self.0[index % self.0.len()]
    }
}

/// Two-way channel to a point target, `H_T = α_T a aᴴ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetChannel {
    pub alpha: C64,
    pub direction: Direction,
    /// Round-trip delay in seconds.
    pub delay: f64,
    /// Doppler shift in Hz.
    pub doppler: f64,
    steering: CVector,
}

impl TargetChannel {
    pub fn new(alpha: C64, direction: Direction, delay: f64, doppler: f64, geom: &ArrayGeometry) -> Self {
        Self {
            alpha,
            direction,
            delay,
            doppler,
            steering: steering_vector(geom, direction),
        }
    }

    pub fn steering(&self) -> &CVector {
        &self.steering
    }

    pub fn two_way_matrix(&self) -> CMatrix {
        outer(&self.steering, &self.steering) * self.alpha
    }

    /// `H_T u` evaluated as `α a (aᴴ u)`.
    pub fn apply(&self, u: &CVector) -> CVector {
        &self.steering * (self.alpha * self.steering.dotc(u))
    }
}

/// Two-way free-space loss `L_τ = (4π)³ / λ² · R⁴`, with `R = cτ/2` the range.
pub fn two_way_path_loss(range: f64, wavelength: f64) -> Result<f64> {
    if !(range.is_finite() && range > 0.0) {
        return Err(Error::invalid("range", format!("{range} is not positive")));
    }
    Ok((4.0 * PI).powi(3) / (wavelength * wavelength) * range.powi(4))
}

/// `|α_T| = N_A √(σ / L_τ)`, using the linear broadside gain `N_A`.
pub fn target_gain_magnitude(range: f64, geom: &ArrayGeometry, rcs: f64) -> Result<f64> {
    if !(rcs.is_finite() && rcs > 0.0) {
        return Err(Error::invalid("rcs", format!("{rcs} is not positive")));
    }
    let loss = two_way_path_loss(range, geom.wavelength())?;
    Ok(geom.num_elements() as f64 * (rcs / loss).sqrt())
}

/// Reflection coefficient and delay of a target at `range`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetReturn {
    pub alpha: C64,
    pub delay: f64,
}

/// Draws `α_T` with the deterministic magnitude of [`target_gain_magnitude`]
/// and a uniform phase; the delay is `2 R / c`.
pub fn target_return<R: Rng + ?Sized>(
    range: f64,
    geom: &ArrayGeometry,
    rcs: f64,
    rng: &mut R,
) -> Result<TargetReturn> {
    let magnitude = target_gain_magnitude(range, geom, rcs)?;
    let phase = rng.random::<f64>() * 2.0 * PI;
    Ok(TargetReturn {
        alpha: C64::from_polar(magnitude, phase),
        delay: 2.0 * range / SPEED_OF_LIGHT,
    })
}
