//! OFDM radar on the resource grid.
//!
//! The transmitted vector on symbol `n`, subcarrier `m` is
//! `u(n,m) = Σ_k √η_k x_k(n,m) w_k + √η_R x_R(n,m) w_R`. A point target
//! returns `y(n,m) = H_T u(n,m) e^{j2πνnT₀} e^{−j2πmΔfτ} + z(n,m)` and the
//! detector is the GLRT
//!
//! ```text
//! max_{(τ,ν) ∈ 𝒢} |Σ_{n,m} e^{−j2πνnT₀} e^{j2πmΔfτ} u(n,m)ᴴ y(n,m)|²
//! ```
//!
//! Grids are stored symbol-major: entry `(n, m)` lives at `n·M + m`.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::beamform::BeamformerSet;
use crate::channel::TargetChannel;
use crate::poweralloc::PowerAllocation;
use crate::rng::complex_gaussian_vector;
use crate::{CVector, Error, Result, C64};

/// Cyclic-prefix length as a fraction of the useful symbol time.
pub const DEFAULT_CP_FRACTION: f64 = 0.07;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OfdmFrameConfig {
    n_symbols: usize,
    n_subcarriers: usize,
    subcarrier_spacing: f64,
    cp_duration: f64,
}

impl OfdmFrameConfig {
    pub fn new(n_symbols: usize, n_subcarriers: usize, subcarrier_spacing: f64, cp_duration: f64) -> Result<Self> {
        if n_symbols == 0 || n_subcarriers == 0 {
            return Err(Error::invalid("grid", "need at least one symbol and one subcarrier"));
        }
        if !(subcarrier_spacing.is_finite() && subcarrier_spacing > 0.0) {
            return Err(Error::invalid("subcarrier_spacing", format!("{subcarrier_spacing} is not positive")));
        }
        if !(cp_duration.is_finite() && cp_duration > 0.0) {
            return Err(Error::invalid("cp_duration", format!("{cp_duration} is not positive")));
        }
        Ok(Self {
            n_symbols,
            n_subcarriers,
            subcarrier_spacing,
            cp_duration,
        })
    }

    /// `T_CP = fraction · T_s`.
    pub fn with_cp_fraction(n_symbols: usize, n_subcarriers: usize, subcarrier_spacing: f64, fraction: f64) -> Result<Self> {
        Self::new(n_symbols, n_subcarriers, subcarrier_spacing, fraction / subcarrier_spacing)
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    pub fn subcarrier_spacing(&self) -> f64 {
        self.subcarrier_spacing
    }

    pub fn cp_duration(&self) -> f64 {
        self.cp_duration
    }

    /// `T_s = 1/Δf`.
    pub fn useful_duration(&self) -> f64 {
        1.0 / self.subcarrier_spacing
    }

    /// `T₀ = T_CP + T_s`.
    pub fn symbol_duration(&self) -> f64 {
        self.cp_duration + self.useful_duration()
    }

    /// `B = M Δf`.
    pub fn bandwidth(&self) -> f64 {
        self.n_subcarriers as f64 * self.subcarrier_spacing
    }

    pub fn num_resource_elements(&self) -> usize {
        self.n_symbols * self.n_subcarriers
    }
}

/// `N × M` grid of unit-modulus symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolGrid {
    n_symbols: usize,
    n_subcarriers: usize,
    entries: Vec<C64>,
}

impl SymbolGrid {
    pub fn new(n_symbols: usize, n_subcarriers: usize, entries: Vec<C64>) -> Result<Self> {
        if entries.len() != n_symbols * n_subcarriers {
            return Err(Error::DimensionMismatch {
                context: "symbol grid",
                expected: n_symbols * n_subcarriers,
                actual: entries.len(),
            });
        }
        if entries.iter().any(|x| (x.norm() - 1.0).abs() > 1e-12) {
            return Err(Error::invalid("symbols", "symbols must have unit modulus"));
        }
        Ok(Self {
            n_symbols,
            n_subcarriers,
            entries,
        })
    }

    /// Uniform QPSK symbols `e^{jπ(2q+1)/4}`.
    pub fn qpsk<R: Rng + ?Sized>(n_symbols: usize, n_subcarriers: usize, rng: &mut R) -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let entries = (0..n_symbols * n_subcarriers)
            .map(|_| {
                let bits: u8 = rng.random_range(0..4);
                C64::new(if bits & 1 == 0 { h } else { -h }, if bits & 2 == 0 { h } else { -h })
            })
            .collect();
        Self {
            n_symbols,
            n_subcarriers,
            entries,
        }
    }

    pub fn get(&self, n: usize, m: usize) -> C64 {
        self.entries[n * self.n_subcarriers + m]
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_symbols, self.n_subcarriers)
    }
}

/// One antenna-domain vector per resource element.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalGrid {
    n_symbols: usize,
    n_subcarriers: usize,
    vectors: Vec<CVector>,
}

impl SignalGrid {
    pub fn new(n_symbols: usize, n_subcarriers: usize, vectors: Vec<CVector>) -> Result<Self> {
        if vectors.len() != n_symbols * n_subcarriers {
            return Err(Error::DimensionMismatch {
                context: "signal grid",
                expected: n_symbols * n_subcarriers,
                actual: vectors.len(),
            });
        }
        let len = vectors.first().map_or(0, |v| v.len());
        if vectors.iter().any(|v| v.len() != len) {
            return Err(Error::invalid("signal grid", "all vectors must share one length"));
        }
        Ok(Self {
            n_symbols,
            n_subcarriers,
            vectors,
        })
    }

    pub fn zeros(n_symbols: usize, n_subcarriers: usize, n_antennas: usize) -> Self {
        Self {
            n_symbols,
            n_subcarriers,
            vectors: vec![CVector::zeros(n_antennas); n_symbols * n_subcarriers],
        }
    }

    /// I.i.d. complex Gaussian entries of the given variance.
    pub fn noise<R: Rng + ?Sized>(n_symbols: usize, n_subcarriers: usize, n_antennas: usize, variance: f64, rng: &mut R) -> Self {
        Self {
            n_symbols,
            n_subcarriers,
            vectors: (0..n_symbols * n_subcarriers)
                .map(|_| complex_gaussian_vector(rng, n_antennas, variance))
                .collect(),
        }
    }

    pub fn get(&self, n: usize, m: usize) -> &CVector {
        &self.vectors[n * self.n_subcarriers + m]
    }

    pub fn vectors(&self) -> &[CVector] {
        &self.vectors
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_symbols, self.n_subcarriers)
    }

    pub fn n_antennas(&self) -> usize {
        self.vectors.first().map_or(0, |v| v.len())
    }

    /// `Σ_{n,m} ‖v(n,m)‖²`.
    pub fn energy(&self) -> f64 {
        self.vectors.iter().map(|v| v.norm_squared()).sum()
    }

    /// Multiplies every entry by a complex constant.
    pub fn scaled(&self, c: C64) -> Self {
        Self {
            n_symbols: self.n_symbols,
            n_subcarriers: self.n_subcarriers,
            vectors: self.vectors.iter().map(|v| v * c).collect(),
        }
    }
}

/// Builds `u(n,m)` from beams, powers and symbol grids.
pub fn synthesize_tx_grid(
    beams: &BeamformerSet,
    powers: &PowerAllocation,
    data: &[SymbolGrid],
    radar: &SymbolGrid,
) -> Result<SignalGrid> {
    let k_users = beams.num_users();
    if data.len() != k_users || powers.eta_users().len() != k_users {
        return Err(Error::DimensionMismatch {
            context: "transmit users",
            expected: k_users,
            actual: data.len().min(powers.eta_users().len()),
        });
    }
    let shape = radar.shape();
    if data.iter().any(|g| g.shape() != shape) {
        return Err(Error::invalid("symbol grids", "all symbol grids must share one shape"));
    }
    let user_amp: Vec<f64> = powers.eta_users().iter().map(|e| e.sqrt()).collect();
    let radar_amp = powers.eta_radar().sqrt();
    let vectors = (0..shape.0 * shape.1)
        .map(|idx| {
            let mut u = &beams.radar_beam * (radar.entries[idx] * radar_amp);
            for k in 0..k_users {
                u.axpy(data[k].entries[idx] * user_amp[k], &beams.user_beams[k], C64::new(1.0, 0.0));
            }
            u
        })
        .collect();
    SignalGrid::new(shape.0, shape.1, vectors)
}

/// `e^{j2πνnT₀}·e^{−j2πmΔfτ}` for the target's delay and Doppler.
pub fn echo_phase(target: &TargetChannel, config: &OfdmFrameConfig, n: usize, m: usize) -> C64 {
    let phase = 2.0 * PI
        * (target.doppler * n as f64 * config.symbol_duration()
            - m as f64 * config.subcarrier_spacing() * target.delay);
    C64::from_polar(1.0, phase)
}

fn check_echo_inputs(u: &SignalGrid, target: &TargetChannel, config: &OfdmFrameConfig) -> Result<()> {
    if u.shape() != (config.n_symbols(), config.n_subcarriers()) {
        return Err(Error::invalid("transmit grid", "grid shape does not match the frame"));
    }
    if !(target.delay >= 0.0 && target.delay <= config.cp_duration()) {
        return Err(Error::invalid(
            "delay",
            format!("target delay {:e} s lies outside [0, T_CP = {:e} s]", target.delay, config.cp_duration()),
        ));
    }
    if u.n_antennas() != target.steering().len() {
        return Err(Error::DimensionMismatch {
            context: "target steering",
            expected: u.n_antennas(),
            actual: target.steering().len(),
        });
    }
    Ok(())
}

/// Echo plus a caller-supplied noise grid.
pub fn target_echo_with_noise(
    u: &SignalGrid,
    target: &TargetChannel,
    config: &OfdmFrameConfig,
    noise: &SignalGrid,
) -> Result<SignalGrid> {
    check_echo_inputs(u, target, config)?;
    if noise.shape() != u.shape() || noise.n_antennas() != u.n_antennas() {
        return Err(Error::invalid("noise grid", "noise grid does not match the transmit grid"));
    }
    let a = target.steering();
    let (n_sym, n_sub) = u.shape();
    let mut vectors = Vec::with_capacity(n_sym * n_sub);
    for n in 0..n_sym {
        for m in 0..n_sub {
            let c = target.alpha * a.dotc(u.get(n, m)) * echo_phase(target, config, n, m);
            let mut y = noise.get(n, m).clone();
            y.axpy(c, a, C64::new(1.0, 0.0));
            vectors.push(y);
        }
    }
    SignalGrid::new(n_sym, n_sub, vectors)
}

/// Echo with fresh noise of variance `noise_var` per antenna.
pub fn target_echo<R: Rng + ?Sized>(
    u: &SignalGrid,
    target: &TargetChannel,
    config: &OfdmFrameConfig,
    noise_var: f64,
    rng: &mut R,
) -> Result<SignalGrid> {
    check_echo_inputs(u, target, config)?;
    let (n_sym, n_sub) = u.shape();
    let noise = if noise_var > 0.0 {
        SignalGrid::noise(n_sym, n_sub, u.n_antennas(), noise_var, rng)
    } else {
        SignalGrid::zeros(n_sym, n_sub, u.n_antennas())
    };
    target_echo_with_noise(u, target, config, &noise)
}

/// Uniform delay-Doppler hypothesis grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayDopplerGrid {
    delays: Vec<f64>,
    dopplers: Vec<f64>,
}

impl DelayDopplerGrid {
    pub fn new(delays: Vec<f64>, dopplers: Vec<f64>, config: &OfdmFrameConfig) -> Result<Self> {
        if delays.is_empty() || dopplers.is_empty() {
            return Err(Error::invalid("grid", "delay-Doppler grid must be non-empty"));
        }
        check_uniform(&delays, "delays")?;
        check_uniform(&dopplers, "dopplers")?;
        let t_cp = config.cp_duration();
        if delays.iter().any(|d| !(*d >= 0.0 && *d <= t_cp * (1.0 + 1e-12))) {
            return Err(Error::invalid("delays", "delays must lie in [0, T_CP]"));
        }
        let half = config.subcarrier_spacing() / 2.0;
        if dopplers.iter().any(|v| !(v.abs() < half)) {
            return Err(Error::invalid("dopplers", "Dopplers must lie in (-Δf/2, Δf/2)"));
        }
        Ok(Self { delays, dopplers })
    }

    /// Delay step `1/(MΔf)` over `[0, T_CP]` and the `N` Doppler bins of
    /// width `1/(NT₀)` centred on zero.
    pub fn resolution_cells(config: &OfdmFrameConfig) -> Result<Self> {
        let step = 1.0 / config.bandwidth();
        let count = (config.cp_duration() / step + 1e-9).floor() as usize;
        let delays = (0..=count).map(|i| i as f64 * step).collect();
        let n = config.n_symbols() as i64;
        let dstep = 1.0 / (n as f64 * config.symbol_duration());
        let dopplers = (-(n - 1) / 2..=n / 2).map(|l| l as f64 * dstep).collect();
        Self::new(delays, dopplers, config)
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    pub fn dopplers(&self) -> &[f64] {
        &self.dopplers
    }

    pub fn len(&self) -> usize {
        self.delays.len() * self.dopplers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn check_uniform(values: &[f64], name: &'static str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(name, "values must be finite"));
    }
    if values.len() > 2 {
        let step = values[1] - values[0];
        let ok = values
            .windows(2)
            .all(|w| ((w[1] - w[0]) - step).abs() <= 1e-9 * step.abs().max(f64::MIN_POSITIVE));
        if !ok || step <= 0.0 {
            return Err(Error::invalid(name, "grid must be uniformly spaced and increasing"));
        }
    } else if values.len() == 2 && values[1] <= values[0] {
        return Err(Error::invalid(name, "grid must be increasing"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub delay_index: usize,
    pub doppler_index: usize,
    pub delay: f64,
    pub doppler: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionOutcome {
    /// Delay-major: entry `(i, l)` at `i · n_dopplers + l`.
    pub statistic_map: Vec<f64>,
    pub n_delays: usize,
    pub n_dopplers: usize,
    pub peak: Peak,
}

impl DetectionOutcome {
    pub fn statistic(&self, delay_index: usize, doppler_index: usize) -> f64 {
        self.statistic_map[delay_index * self.n_dopplers + doppler_index]
    }

    /// `true` declares a target (H₁).
    pub fn decide(&self, threshold: f64) -> bool {
        self.peak.value > threshold
    }
}

/// Phase tables for the separable GLRT sum.
#[derive(Debug, Clone)]
pub struct GlrtKernel {
    grid: DelayDopplerGrid,
    n_symbols: usize,
    n_subcarriers: usize,
    /// `e^{j2πmΔfτ_i}`, delay-major.
    delay_phase: Vec<C64>,
    /// `e^{−j2πν_l nT₀}`, Doppler-major.
    doppler_phase: Vec<C64>,
}

impl GlrtKernel {
    pub fn new(grid: &DelayDopplerGrid, config: &OfdmFrameConfig) -> Self {
        let (n_sym, n_sub) = (config.n_symbols(), config.n_subcarriers());
        let df = config.subcarrier_spacing();
        let t0 = config.symbol_duration();
        let delay_phase = grid
            .delays
            .iter()
            .flat_map(|tau| (0..n_sub).map(move |m| C64::from_polar(1.0, 2.0 * PI * m as f64 * df * tau)))
            .collect();
        let doppler_phase = grid
            .dopplers
            .iter()
            .flat_map(|nu| (0..n_sym).map(move |n| C64::from_polar(1.0, -2.0 * PI * nu * n as f64 * t0)))
            .collect();
        Self {
            grid: grid.clone(),
            n_symbols: n_sym,
            n_subcarriers: n_sub,
            delay_phase,
            doppler_phase,
        }
    }

    /// Statistic map from the products `p(n,m) = u(n,m)ᴴ y(n,m)`.
    pub fn evaluate(&self, products: &[C64]) -> Result<DetectionOutcome> {
        let (n_sym, n_sub) = (self.n_symbols, self.n_subcarriers);
        if products.len() != n_sym * n_sub {
            return Err(Error::DimensionMismatch {
                context: "GLRT products",
                expected: n_sym * n_sub,
                actual: products.len(),
            });
        }
        let (nd, nv) = (self.grid.delays.len(), self.grid.dopplers.len());
        let mut map = Vec::with_capacity(nd * nv);
        let mut q = vec![C64::new(0.0, 0.0); n_sym];
        let mut best = (0, 0, f64::NEG_INFINITY);
        for i in 0..nd {
            let dp = &self.delay_phase[i * n_sub..(i + 1) * n_sub];
            for (n, qn) in q.iter_mut().enumerate() {
                let row = &products[n * n_sub..(n + 1) * n_sub];
                *qn = row.iter().zip(dp).map(|(p, e)| p * e).sum();
            }
            for l in 0..nv {
                let vp = &self.doppler_phase[l * n_sym..(l + 1) * n_sym];
                let s: C64 = q.iter().zip(vp).map(|(a, b)| a * b).sum();
                let v = s.norm_sqr();
                if v > best.2 {
                    best = (i, l, v);
                }
                map.push(v);
            }
        }
        Ok(DetectionOutcome {
            statistic_map: map,
            n_delays: nd,
            n_dopplers: nv,
            peak: Peak {
                delay_index: best.0,
                doppler_index: best.1,
                delay: self.grid.delays[best.0],
                doppler: self.grid.dopplers[best.1],
                value: best.2,
            },
        })
    }
}

/// `p(n,m) = u(n,m)ᴴ y(n,m)`.
pub fn correlation_products(u: &SignalGrid, y: &SignalGrid) -> Result<Vec<C64>> {
    if u.shape() != y.shape() || u.n_antennas() != y.n_antennas() {
        return Err(Error::invalid("grids", "transmit and receive grids differ in shape"));
    }
    Ok(u.vectors.iter().zip(&y.vectors).map(|(a, b)| a.dotc(b)).collect())
}

/// GLRT statistic over the hypothesis grid; no threshold is applied.
pub fn glrt_statistic(
    u: &SignalGrid,
    y: &SignalGrid,
    grid: &DelayDopplerGrid,
    config: &OfdmFrameConfig,
) -> Result<DetectionOutcome> {
    if grid.is_empty() {
        return Err(Error::invalid("grid", "delay-Doppler grid is empty"));
    }
    if u.shape() != (config.n_symbols(), config.n_subcarriers()) {
        return Err(Error::invalid("transmit grid", "grid shape does not match the frame"));
    }
    let products = correlation_products(u, y)?;
    GlrtKernel::new(grid, config).evaluate(&products)
}

/// Threshold at the empirical `1 − pfa` quantile of H₀ peaks: exactly
/// `⌊pfa·n⌋` samples exceed it. `pfa = 1` gives 0.
pub fn threshold_from_samples(samples: &[f64], pfa: f64) -> Result<f64> {
    if !(pfa > 0.0 && pfa <= 1.0) {
        return Err(Error::invalid("pfa", format!("{pfa} is not in (0, 1]")));
    }
    if samples.is_empty() {
        return Err(Error::invalid("samples", "no H0 samples"));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numerical("non-finite H0 statistic".into()));
    }
    let n = samples.len();
    let exceed = (pfa * n as f64 + 1e-9).floor() as usize;
    if exceed >= n {
        return Ok(0.0);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[n - exceed - 1])
}

/// Minimum H₀ trial count for a target false-alarm rate.
pub fn min_calibration_trials(pfa: f64) -> usize {
    (100.0 / pfa).ceil() as usize
}

/// Calibrates a threshold from `n_trials` H₀ peaks produced by `sample`.
pub fn calibrate_threshold<F>(pfa: f64, n_trials: usize, mut sample: F) -> Result<f64>
where
    F: FnMut(u64) -> Result<f64>,
{
    if !(pfa > 0.0 && pfa <= 1.0) {
        return Err(Error::invalid("pfa", format!("{pfa} is not in (0, 1]")));
    }
    if pfa == 1.0 {
        return Ok(0.0);
    }
    let needed = min_calibration_trials(pfa);
    if n_trials < needed {
        return Err(Error::invalid(
            "n_trials",
            format!("{n_trials} H0 trials cannot resolve pfa = {pfa}; need at least {needed}"),
        ));
    }
    let samples = (0..n_trials as u64).map(&mut sample).collect::<Result<Vec<_>>>()?;
    threshold_from_samples(&samples, pfa)
}

/// Detection count with a Wilson 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionEstimate {
    pub detections: usize,
    pub trials: usize,
    pub pd: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl DetectionEstimate {
    pub fn from_counts(detections: usize, trials: usize) -> Self {
        let (ci_low, ci_high) = wilson_interval(detections, trials, 1.96);
        Self {
            detections,
            trials,
            pd: if trials == 0 { 0.0 } else { detections as f64 / trials as f64 },
            ci_low,
            ci_high,
        }
    }

    /// Binomial standard deviation of `pd`, floored at one count.
    pub fn sigma(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        let n = self.trials as f64;
        (self.pd * (1.0 - self.pd) / n).sqrt().max(1.0 / n)
    }
}

/// Wilson score interval.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * nf)) / (1.0 + z2 / nf);
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / (1.0 + z2 / nf);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Fraction of trials whose peak statistic exceeds the threshold.
pub fn detection_probability<F>(threshold: f64, n_trials: usize, mut peak: F) -> Result<DetectionEstimate>
where
    F: FnMut(u64) -> Result<f64>,
{
    let mut detections = 0;
    for trial in 0..n_trials as u64 {
        if peak(trial)? > threshold {
            detections += 1;
        }
    }
    Ok(DetectionEstimate::from_counts(detections, n_trials))
}
