//! Per-scenario drawing: user layout, large-scale fading, training and the
//! beam/coefficient set that the allocators and the radar share.

use rand::Rng;
use rand_distr::StandardNormal;

use super::config::{AllocatorKind, ScenarioConfig};
use super::noise_variance;
use crate::array::{steering_vector, ArrayGeometry, Direction};
use crate::beamform::{BeamformerSet, RadarBeamKind};
use crate::channel::{
    draw_user_channel, k_factor_from_los_probability, ChannelModelKind, ChannelStats, UserChannel,
};
use crate::estimation::{training_observation, EstimationOutput, EstimatorKind, EstimatorMatrices, PilotBook};
use crate::poweralloc::{
    max_min_allocate, symbol_budget, uniform_allocate, AllocationProblem, BisectionOptions, PowerAllocation,
    RadarSirCoefficients,
};
use crate::radar::OfdmFrameConfig;
use crate::rate::{assemble_coefficients, FrameTiming, RateCoefficients};
use crate::rng::{substream, Stage};
use crate::{CMatrix, Result};

/// Quantities fixed by the configuration.
#[derive(Debug, Clone)]
pub struct Environment {
    pub config: ScenarioConfig,
    pub geom: ArrayGeometry,
    pub frame: OfdmFrameConfig,
    pub book: PilotBook,
    pub timing: FrameTiming,
    /// Noise power per antenna over the signal bandwidth, used for pilots,
    /// downlink users and radar echoes alike.
    pub noise_var: f64,
}

impl Environment {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let geom = config.array.geometry()?;
        let frame = config.frame.ofdm()?;
        let book = PilotBook::dft(config.users, config.tau_p(), config.power.pilot_power_w)?;
        let timing = FrameTiming::new(frame.bandwidth(), config.training.tau_c, config.tau_p())?;
        let noise_var = noise_variance(
            frame.bandwidth(),
            config.power.noise_figure_db,
            config.power.noise_psd_dbm_hz,
        )?;
        Ok(Self {
            config: config.clone(),
            geom,
            frame,
            book,
            timing,
            noise_var,
        })
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }
}

/// One user's position relative to the array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserPlacement {
    pub x: f64,
    pub y: f64,
    pub d_2d: f64,
    pub d_3d: f64,
    pub direction: Direction,
    /// Standard-normal shadowing sample shared by every channel model.
    pub shadowing: f64,
}

/// Model-independent part of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioDraw {
    pub users: Vec<UserPlacement>,
    pub radar_direction: Direction,
}

pub fn place_users<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Result<Vec<UserPlacement>> {
    let p = &config.placement;
    let dz = p.user_height - p.bs_height;
    (0..config.users)
        .map(|_| {
            let x = uniform(rng, p.x_min, p.x_max);
            let y_abs = uniform(rng, p.y_abs_min, p.y_abs_max);
            let y = if rng.random::<bool>() { y_abs } else { -y_abs };
            let shadowing: f64 = rng.sample(StandardNormal);
            let d_2d = x.hypot(y);
            Ok(UserPlacement {
                x,
                y,
                d_2d,
                d_3d: d_2d.hypot(dz),
                direction: Direction::towards(x, y, dz)?,
                shadowing,
            })
        })
        .collect()
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Uniform pointing inside the scan sector.
pub fn draw_radar_direction<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Result<Direction> {
    let s = &config.sector;
    let az = uniform(rng, s.azimuth_min_deg, s.azimuth_max_deg);
    let el = uniform(rng, s.elevation_min_deg, s.elevation_max_deg);
    Direction::from_degrees_above_horizon(az, el)
}

/// Layout and radar pointing for scenario `index`.
pub fn draw_scenario(env: &Environment, index: u64) -> Result<ScenarioDraw> {
    let mut rng = substream(env.seed(), index, Stage::Placement);
    let users = place_users(&env.config, &mut rng)?;
    let mut rng = substream(env.seed(), index, Stage::RadarPointing);
    let radar_direction = draw_radar_direction(&env.config, &mut rng)?;
    Ok(ScenarioDraw { users, radar_direction })
}

/// Channel statistics of every user under one channel model.
pub fn channel_stats(env: &Environment, draw: &ScenarioDraw, model: ChannelModelKind) -> Result<Vec<ChannelStats>> {
    let ls = &env.config.large_scale;
    draw.users
        .iter()
        .map(|u| {
            let (beta, k) = match model {
                ChannelModelKind::Rayleigh => (ls.nlos.beta_with_shadowing(u.d_3d, u.shadowing), 0.0),
                ChannelModelKind::LoS => (ls.los.beta_with_shadowing(u.d_3d, u.shadowing), 0.0),
                ChannelModelKind::Rice => {
                    let p = ls.los_probability.probability(u.d_2d).min(ls.max_los_probability);
                    (
                        ls.nlos.beta_with_shadowing(u.d_3d, u.shadowing),
                        k_factor_from_los_probability(p)?,
                    )
                }
            };
            ChannelStats::new(model, beta, k, u.direction, &env.geom)
        })
        .collect()
}

/// Realised channels and the training observation for one model.
#[derive(Debug, Clone)]
pub struct LinkState {
    pub model: ChannelModelKind,
    pub stats: Vec<ChannelStats>,
    pub channels: Vec<UserChannel>,
    pub observation: CMatrix,
}

/// Small-scale fading and pilot noise; both estimators see the same
/// observation.
pub fn draw_links(env: &Environment, draw: &ScenarioDraw, model: ChannelModelKind, index: u64) -> Result<LinkState> {
    let stats = channel_stats(env, draw, model)?;
    let mut rng = substream(env.seed(), index, Stage::Channels);
    let channels: Vec<UserChannel> = stats.iter().map(|s| draw_user_channel(s, &mut rng)).collect();
    let mut rng = substream(env.seed(), index, Stage::PilotNoise);
    let observation = training_observation(&channels, &env.book, env.noise_var, &mut rng)?;
    Ok(LinkState {
        model,
        stats,
        channels,
        observation,
    })
}

pub fn estimate(env: &Environment, links: &LinkState, estimator: EstimatorKind) -> Result<EstimationOutput> {
    let matrices = EstimatorMatrices::build(estimator, &env.book, &links.stats, env.noise_var)?;
    Ok(EstimationOutput {
        estimates: matrices.estimate(&links.observation, &env.book),
        matrices,
    })
}

/// Beams, rate coefficients and radar-SIR gains for one radar beam kind.
#[derive(Debug, Clone)]
pub struct BeamContext {
    pub beams: BeamformerSet,
    pub coeffs: RateCoefficients,
    pub sir: RadarSirCoefficients,
}

pub fn prepare_beams(
    env: &Environment,
    links: &LinkState,
    estimation: &EstimationOutput,
    kind: RadarBeamKind,
    radar_direction: Direction,
) -> Result<BeamContext> {
    let beams = BeamformerSet::build(&env.geom, &estimation.estimates, kind, radar_direction)?;
    let coeffs = assemble_coefficients(
        &links.stats,
        &env.book,
        &estimation.matrices,
        &beams.radar_beam,
        env.noise_var,
        env.timing,
        env.config.rate,
    )?;
    let a = steering_vector(&env.geom, radar_direction);
    let sir = RadarSirCoefficients::from_beams(&a, &beams.radar_beam, &beams.user_beams)?;
    Ok(BeamContext { beams, coeffs, sir })
}

/// Allocation for the configured downlink power at the given RCR (dB).
pub fn allocate(env: &Environment, ctx: &BeamContext, allocator: AllocatorKind, rcr_db: f64) -> Result<PowerAllocation> {
    let cfg = &env.config;
    let rcr = super::config::db_to_linear(rcr_db);
    let (m, n) = (env.frame.n_subcarriers(), env.frame.n_symbols());
    match allocator {
        AllocatorKind::Uniform => uniform_allocate(cfg.power.p_dl_w, rcr, cfg.users, m, n),
        AllocatorKind::Maxmin => {
            let budget = symbol_budget(cfg.power.p_dl_w, rcr, m, n);
            let rho_star = if rcr_db == cfg.power.rcr_db {
                cfg.power.rho_star()
            } else {
                rcr
            };
            let problem = AllocationProblem {
                coeffs: &ctx.coeffs,
                sir: &ctx.sir,
                budget,
                rho_star,
            };
            max_min_allocate(
                problem,
                BisectionOptions {
                    rel_tol: Some(cfg.bisection_tol),
                    ..Default::default()
                },
            )
        }
    }
}
