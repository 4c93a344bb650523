//! Scenario configuration.
//!
//! Every field has a default equal to the desk-scale preset, so a TOML file
//! only needs the values it changes.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::array::ArrayGeometry;
use crate::beamform::RadarBeamKind;
use crate::channel::{ChannelModelKind, LogDistance, LosProbabilityModel, DEFAULT_TARGET_RCS, SPEED_OF_LIGHT};
use crate::estimation::EstimatorKind;
use crate::radar::OfdmFrameConfig;
use crate::rate::CoefficientOptions;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllocatorKind {
    Uniform,
    Maxmin,
}

impl AllocatorKind {
    pub const ALL: [AllocatorKind; 2] = [Self::Uniform, Self::Maxmin];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::Maxmin => "maxmin",
        }
    }
}

impl fmt::Display for AllocatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AllocatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" | "uni" => Ok(Self::Uniform),
            "maxmin" | "pa" => Ok(Self::Maxmin),
            other => Err(Error::Config(format!("unknown allocator `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Desk,
    Table1,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "desk" => Ok(Self::Desk),
            "table1" => Ok(Self::Table1),
            other => Err(Error::Config(format!("unknown preset `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArrayConfig {
    pub n_y: usize,
    pub n_z: usize,
    pub carrier_hz: f64,
    /// Element spacing in wavelengths.
    pub spacing_wavelengths: f64,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        Self {
            n_y: 4,
            n_z: 4,
            carrier_hz: 3e9,
            spacing_wavelengths: 0.5,
        }
    }
}

impl ArrayConfig {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        let lambda = self.wavelength();
        ArrayGeometry::new(self.n_y, self.n_z, self.spacing_wavelengths * lambda, lambda)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameConfig {
    pub n_symbols: usize,
    pub n_subcarriers: usize,
    pub subcarrier_spacing_hz: f64,
    /// Cyclic prefix as a fraction of `1/Δf`.
    pub cp_fraction: f64,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            n_symbols: 14,
            n_subcarriers: 64,
            subcarrier_spacing_hz: 30e3,
            cp_fraction: crate::radar::DEFAULT_CP_FRACTION,
        }
    }
}

impl FrameConfig {
    pub fn ofdm(&self) -> Result<OfdmFrameConfig> {
        OfdmFrameConfig::with_cp_fraction(
            self.n_symbols,
            self.n_subcarriers,
            self.subcarrier_spacing_hz,
            self.cp_fraction,
        )
    }
}

/// Users sit at `x ∈ [x_min, x_max]`, `|y| ∈ [y_abs_min, y_abs_max]` with a
/// random sign; the array is at the origin, facing `+x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlacementConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub y_abs_min: f64,
    pub y_abs_max: f64,
    pub user_height: f64,
    pub bs_height: f64,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        Self {
            x_min: 10.0,
            x_max: 100.0,
            y_abs_min: 10.0,
            y_abs_max: 50.0,
            user_height: 1.65,
            bs_height: 15.0,
        }
    }
}

/// Radar scan sector; elevations are measured above the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SectorConfig {
    pub azimuth_min_deg: f64,
    pub azimuth_max_deg: f64,
    pub elevation_min_deg: f64,
    pub elevation_max_deg: f64,
}

impl Default for SectorConfig {
    fn default() -> Self {
        Self {
            azimuth_min_deg: -60.0,
            azimuth_max_deg: 60.0,
            elevation_min_deg: 10.0,
            elevation_max_deg: 80.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerConfig {
    pub p_dl_w: f64,
    pub rcr_db: f64,
    /// Radar SIR floor (linear); the linear RCR when absent.
    pub rho_star: Option<f64>,
    pub pilot_power_w: f64,
    pub noise_psd_dbm_hz: f64,
    pub noise_figure_db: f64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            p_dl_w: 2.0,
            rcr_db: 3.0,
            rho_star: None,
            pilot_power_w: 0.2,
            noise_psd_dbm_hz: -174.0,
            noise_figure_db: 9.0,
        }
    }
}

impl PowerConfig {
    pub fn rcr_linear(&self) -> f64 {
        db_to_linear(self.rcr_db)
    }

    pub fn rho_star(&self) -> f64 {
        self.rho_star.unwrap_or_else(|| self.rcr_linear())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub tau_c: usize,
    /// Pilot length; the number of users when absent.
    pub tau_p: Option<usize>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            tau_c: 200,
            tau_p: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LargeScaleConfig {
    /// Path loss for Rayleigh and Rice links.
    pub nlos: LogDistance,
    /// Path loss for pure LoS links.
    pub los: LogDistance,
    pub los_probability: LosProbabilityModel,
    /// Cap on `p_LoS`, which bounds the Rice factor at `p/(1−p)`.
    pub max_los_probability: f64,
}

impl Default for LargeScaleConfig {
    fn default() -> Self {
        Self {
            nlos: LogDistance::nlos(),
            los: LogDistance::los(),
            los_probability: LosProbabilityModel::default(),
            max_los_probability: 0.99,
        }
    }
}

/// Doppler of the simulated target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DopplerPlacement {
    Zero,
    /// A uniformly drawn hypothesis bin.
    OnGrid,
    /// Uniform over the Doppler span of the grid.
    OffGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionConfig {
    pub ranges_m: Vec<f64>,
    pub rcr_db: Vec<f64>,
    pub trials: usize,
    pub calibration_trials: usize,
    pub pfa: f64,
    pub rcs_m2: f64,
    pub channel_model: ChannelModelKind,
    pub estimator: EstimatorKind,
    pub doppler: DopplerPlacement,
    /// Multiplies the target amplitude; 0 turns H₁ into H₀.
    pub alpha_scale: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            ranges_m: vec![40.0, 60.0, 80.0, 100.0, 130.0, 160.0, 200.0, 250.0],
            rcr_db: vec![3.0, 6.0],
            trials: 20_000,
            calibration_trials: 20_000,
            pfa: 1e-2,
            rcs_m2: DEFAULT_TARGET_RCS,
            channel_model: ChannelModelKind::Rice,
            estimator: EstimatorKind::Lmmse,
            doppler: DopplerPlacement::OnGrid,
            alpha_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub scenarios: usize,
    pub users: usize,
    pub array: ArrayConfig,
    pub frame: FrameConfig,
    pub placement: PlacementConfig,
    pub sector: SectorConfig,
    pub power: PowerConfig,
    pub training: TrainingConfig,
    pub large_scale: LargeScaleConfig,
    pub channel_models: Vec<ChannelModelKind>,
    pub estimators: Vec<EstimatorKind>,
    pub radar_beams: Vec<RadarBeamKind>,
    pub allocators: Vec<AllocatorKind>,
    pub rate: CoefficientOptions,
    /// Bisection bracket width relative to the achieved min-SINR.
    pub bisection_tol: f64,
    pub detection: DetectionConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            scenarios: 50,
            users: 4,
            array: ArrayConfig::default(),
            frame: FrameConfig::default(),
            placement: PlacementConfig::default(),
            sector: SectorConfig::default(),
            power: PowerConfig::default(),
            training: TrainingConfig::default(),
            large_scale: LargeScaleConfig::default(),
            channel_models: ChannelModelKind::ALL.to_vec(),
            estimators: EstimatorKind::ALL.to_vec(),
            radar_beams: RadarBeamKind::ALL.to_vec(),
            allocators: AllocatorKind::ALL.to_vec(),
            rate: CoefficientOptions::default(),
            bisection_tol: crate::poweralloc::DEFAULT_TOL_EPS,
            detection: DetectionConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Desk => Self::default(),
            Preset::Table1 => Self {
                users: 10,
                array: ArrayConfig {
                    n_y: 10,
                    n_z: 10,
                    ..ArrayConfig::default()
                },
                frame: FrameConfig {
                    n_subcarriers: 512,
                    ..FrameConfig::default()
                },
                ..Self::default()
            },
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Parses `text` on top of `base`: tables merge key by key and fields
    /// absent from `text` keep the values of `base`.
    pub fn from_toml_str_with_base(text: &str, base: &ScenarioConfig) -> Result<Self> {
        let overlay: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut merged = toml::Table::try_from(base).map_err(|e| Error::Config(e.to_string()))?;
        merge_tables(&mut merged, overlay);
        let config: Self = merged.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_file_with_base(path, &Self::default())
    }

    pub fn from_file_with_base(path: &Path, base: &ScenarioConfig) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str_with_base(&text, base)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical TOML serialisation.
    pub fn hash(&self) -> Result<String> {
        let text = self.to_toml_string()?;
        Ok(hex::encode(Sha256::digest(text.as_bytes())))
    }

    pub fn tau_p(&self) -> usize {
        self.training.tau_p.unwrap_or(self.users).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if self.users == 0 {
            return bad("users must be positive");
        }
        self.array.geometry().map_err(|e| Error::Config(e.to_string()))?;
        self.frame.ofdm().map_err(|e| Error::Config(e.to_string()))?;
        let p = &self.placement;
        if !(p.x_min > 0.0 && p.x_max >= p.x_min && p.y_abs_min >= 0.0 && p.y_abs_max >= p.y_abs_min) {
            return bad("placement box is empty or invalid");
        }
        if !(p.user_height >= 0.0 && p.bs_height > 0.0) {
            return bad("heights must be positive");
        }
        let s = &self.sector;
        if !(s.azimuth_min_deg >= -180.0
            && s.azimuth_max_deg <= 180.0
            && s.azimuth_min_deg <= s.azimuth_max_deg
            && s.elevation_min_deg >= -90.0
            && s.elevation_max_deg <= 90.0
            && s.elevation_min_deg <= s.elevation_max_deg)
        {
            return bad("scan sector is invalid");
        }
        let pw = &self.power;
        if !(pw.p_dl_w > 0.0 && pw.p_dl_w.is_finite() && pw.pilot_power_w > 0.0 && pw.rcr_db.is_finite()) {
            return bad("powers must be positive");
        }
        if pw.rho_star.is_some_and(|r| !(r >= 0.0 && r.is_finite())) {
            return bad("rho_star must be nonnegative");
        }
        if !(pw.noise_psd_dbm_hz.is_finite() && pw.noise_figure_db.is_finite()) {
            return bad("noise parameters must be finite");
        }
        let tau_p = self.tau_p();
        if tau_p >= self.training.tau_c {
            return bad("tau_p must be smaller than tau_c");
        }
        let ls = &self.large_scale;
        if !(ls.max_los_probability >= 0.0 && ls.max_los_probability < 1.0) {
            return bad("max_los_probability must lie in [0, 1)");
        }
        if self.channel_models.is_empty()
            || self.estimators.is_empty()
            || self.radar_beams.is_empty()
            || self.allocators.is_empty()
        {
            return bad("model, estimator, beam and allocator lists must be non-empty");
        }
        if !(self.bisection_tol > 0.0 && self.bisection_tol < 1.0) {
            return bad("bisection_tol must lie in (0, 1)");
        }
        let d = &self.detection;
        if d.ranges_m.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return bad("detection ranges must be positive");
        }
        if d.rcr_db.iter().any(|r| !r.is_finite()) {
            return bad("detection RCR values must be finite");
        }
        if !(d.pfa > 0.0 && d.pfa < 1.0) {
            return bad("pfa must lie in (0, 1)");
        }
        if !(d.rcs_m2 > 0.0 && d.alpha_scale >= 0.0 && d.alpha_scale.is_finite()) {
            return bad("rcs must be positive and alpha_scale nonnegative");
        }
        let ofdm = self.frame.ofdm()?;
        let max_range = SPEED_OF_LIGHT * ofdm.cp_duration() / 2.0;
        if d.ranges_m.iter().any(|r| *r > max_range) {
            return Err(Error::Config(format!(
                "detection ranges must not exceed the cyclic-prefix range {max_range:.1} m"
            )));
        }
        Ok(())
    }
}

fn merge_tables(base: &mut toml::Table, overlay: toml::Table) {
    for (key, value) in overlay {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge_tables(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
