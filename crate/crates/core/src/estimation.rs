//! Uplink pilot training and channel estimation.
//!
//! During training the users send pilots `φ_k` (unit norm, length `τ_p`)
//! with power `η_{p,k}` and the array observes
//! `Y_p = Σ_k √η_{p,k} h_k φ_kᴴ + W_p`. The statistic `y_{p,k} = Y_p φ_k` feeds
//! either the pilot-matched estimator `y_{p,k} / √η_{p,k}` or the LMMSE
//! estimator `E_kᴴ y_{p,k}` with `E_k = √η_{p,k} R_{y,k}⁻¹ H̄_k`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelStats, UserChannel};
use crate::linalg::hermitian_solve;
use crate::rng::complex_gaussian_matrix;
use crate::{CMatrix, CVector, Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Pm,
    Lmmse,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 2] = [Self::Pm, Self::Lmmse];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Pm => "pm",
            Self::Lmmse => "lmmse",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pm" => Ok(Self::Pm),
            "lmmse" | "mmse" => Ok(Self::Lmmse),
            other => Err(Error::Config(format!("unknown estimator `{other}`"))),
        }
    }
}

/// Pilot sequences and powers for all users.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotBook {
    tau_p: usize,
    pilots: Vec<CVector>,
    powers: Vec<f64>,
}

impl PilotBook {
    pub fn new(pilots: Vec<CVector>, powers: Vec<f64>) -> Result<Self> {
        if pilots.len() != powers.len() {
            return Err(Error::DimensionMismatch {
                context: "pilot powers",
                expected: pilots.len(),
                actual: powers.len(),
            });
        }
        let tau_p = pilots.first().map_or(1, |p| p.len());
        for p in &pilots {
            if p.len() != tau_p {
                return Err(Error::DimensionMismatch {
                    context: "pilot length",
                    expected: tau_p,
                    actual: p.len(),
                });
            }
            if (p.norm_squared() - 1.0).abs() > 1e-12 {
                return Err(Error::invalid("pilot", "pilot sequences must have unit norm"));
            }
        }
        if let Some(bad) = powers.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return Err(Error::invalid("pilot power", format!("{bad} is not positive")));
        }
        Ok(Self {
            tau_p,
            pilots,
            powers,
        })
    }

    /// Columns of the unitary `τ_p`-point DFT matrix, assigned cyclically, so
    /// users `k` and `k + τ_p` share a pilot when `K > τ_p`.
    pub fn dft(users: usize, tau_p: usize, power: f64) -> Result<Self> {
        if tau_p == 0 {
            return Err(Error::invalid("tau_p", "pilot length must be positive"));
        }
        let norm = 1.0 / (tau_p as f64).sqrt();
        let pilots = (0..users)
            .map(|k| {
                let col = k % tau_p;
                CVector::from_fn(tau_p, |t, _| {
                    C64::from_polar(norm, -2.0 * PI * (col * t) as f64 / tau_p as f64)
                })
            })
            .collect();
        Self::new(pilots, vec![power; users])
    }

    pub fn tau_p(&self) -> usize {
        self.tau_p
    }

    pub fn num_users(&self) -> usize {
        self.pilots.len()
    }

    pub fn pilot(&self, k: usize) -> &CVector {
        &self.pilots[k]
    }

    pub fn power(&self, k: usize) -> f64 {
        self.powers[k]
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    /// `|φ_iᴴ φ_k|²`.
    pub fn overlap(&self, i: usize, k: usize) -> f64 {
        self.pilots[i].dotc(&self.pilots[k]).norm_sqr()
    }
}

/// Training observation `Y_p` (`N_A × τ_p`). A zero `noise_var` gives the
/// noiseless observation.
pub fn training_observation<R: Rng + ?Sized>(
    channels: &[UserChannel],
    book: &PilotBook,
    noise_var: f64,
    rng: &mut R,
) -> Result<CMatrix> {
    if channels.len() != book.num_users() {
        return Err(Error::DimensionMismatch {
            context: "training users",
            expected: book.num_users(),
            actual: channels.len(),
        });
    }
    if !(noise_var.is_finite() && noise_var >= 0.0) {
        return Err(Error::invalid("noise_var", format!("{noise_var} is negative")));
    }
    let n = channels.first().map_or(0, |c| c.h.len());
    let mut y = if noise_var > 0.0 {
        complex_gaussian_matrix(rng, n, book.tau_p, noise_var)
    } else {
        CMatrix::zeros(n, book.tau_p)
    };
    for (k, ch) in channels.iter().enumerate() {
        if ch.h.len() != n {
            return Err(Error::DimensionMismatch {
                context: "channel length",
                expected: n,
                actual: ch.h.len(),
            });
        }
        let scaled = &ch.h * C64::new(book.powers[k].sqrt(), 0.0);
        y += scaled * book.pilots[k].adjoint();
    }
    Ok(y)
}

/// `y_{p,k} = Y_p φ_k`.
pub fn correlate(y: &CMatrix, book: &PilotBook, k: usize) -> CVector {
    y * &book.pilots[k]
}

/// Pilot-matched estimate `y_{p,k} / √η_{p,k}`.
pub fn pm_estimate(y_pk: &CVector, eta_pk: f64) -> CVector {
    y_pk / C64::new(eta_pk.sqrt(), 0.0)
}

/// `R_{y,k} = Σ_i η_{p,i} H̄_i |φ_iᴴ φ_k|² + σ_w² I`, the covariance of `y_{p,k}`.
pub fn received_covariance(k: usize, book: &PilotBook, stats: &[ChannelStats], noise_var: f64) -> CMatrix {
    let n = stats[k].num_elements();
    let mut r = CMatrix::from_diagonal_element(n, n, C64::new(noise_var, 0.0));
    for (i, s) in stats.iter().enumerate() {
        let w = book.powers[i] * book.overlap(i, k);
        if w != 0.0 {
            r += s.hbar() * C64::new(w, 0.0);
        }
    }
    r
}

/// LMMSE filter for one user: `E_k` and the observation covariance `R_{y,k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LmmseFilter {
    pub e: CMatrix,
    pub ry: CMatrix,
}

/// Builds `E_k = √η_{p,k} R_{y,k}⁻¹ H̄_k` through a Hermitian solve.
pub fn lmmse_filter(k: usize, book: &PilotBook, stats: &[ChannelStats], noise_var: f64) -> Result<LmmseFilter> {
    if !(noise_var.is_finite() && noise_var > 0.0) {
        return Err(Error::invalid("noise_var", "LMMSE estimation needs positive noise variance"));
    }
    check_users(book, stats)?;
    let ry = received_covariance(k, book, stats, noise_var);
    let solved = hermitian_solve(&ry, stats[k].hbar())?;
    Ok(LmmseFilter {
        e: solved * C64::new(book.powers[k].sqrt(), 0.0),
        ry,
    })
}

/// LMMSE estimate `ĥ_k = E_kᴴ y_{p,k}` together with its filter.
pub fn lmmse_estimate(
    y_pk: &CVector,
    k: usize,
    book: &PilotBook,
    stats: &[ChannelStats],
    noise_var: f64,
) -> Result<(CVector, LmmseFilter)> {
    let filter = lmmse_filter(k, book, stats, noise_var)?;
    Ok((filter.e.adjoint() * y_pk, filter))
}

/// Estimator matrices that do not depend on the realised observation.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorMatrices {
    pub kind: EstimatorKind,
    /// `R_{y,k}` per user.
    pub ry: Vec<CMatrix>,
    /// `E_k` per user; LMMSE only.
    pub e: Option<Vec<CMatrix>>,
}

impl EstimatorMatrices {
    pub fn build(kind: EstimatorKind, book: &PilotBook, stats: &[ChannelStats], noise_var: f64) -> Result<Self> {
        check_users(book, stats)?;
        match kind {
            EstimatorKind::Pm => Ok(Self {
                kind,
                ry: (0..stats.len())
                    .map(|k| received_covariance(k, book, stats, noise_var))
                    .collect(),
                e: None,
            }),
            EstimatorKind::Lmmse => {
                let filters = (0..stats.len())
                    .map(|k| lmmse_filter(k, book, stats, noise_var))
                    .collect::<Result<Vec<_>>>()?;
                let (e, ry) = filters.into_iter().map(|f| (f.e, f.ry)).unzip();
                Ok(Self { kind, ry, e: Some(e) })
            }
        }
    }

    /// Applies the estimator to the training observation.
    pub fn estimate(&self, y: &CMatrix, book: &PilotBook) -> Vec<CVector> {
        (0..book.num_users())
            .map(|k| {
                let y_pk = correlate(y, book, k);
                match &self.e {
                    Some(e) => e[k].adjoint() * y_pk,
                    None => pm_estimate(&y_pk, book.powers[k]),
                }
            })
            .collect()
    }
}

/// Channel estimates for all users with the matrices that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationOutput {
    pub estimates: Vec<CVector>,
    pub matrices: EstimatorMatrices,
}

impl EstimationOutput {
    pub fn estimator(&self) -> EstimatorKind {
        self.matrices.kind
    }
}

/// Runs the chosen estimator on a training observation.
pub fn estimate_channels(
    kind: EstimatorKind,
    y: &CMatrix,
    book: &PilotBook,
    stats: &[ChannelStats],
    noise_var: f64,
) -> Result<EstimationOutput> {
    let matrices = EstimatorMatrices::build(kind, book, stats, noise_var)?;
    Ok(EstimationOutput {
        estimates: matrices.estimate(y, book),
        matrices,
    })
}

fn check_users(book: &PilotBook, stats: &[ChannelStats]) -> Result<()> {
    if book.num_users() != stats.len() {
        return Err(Error::DimensionMismatch {
            context: "channel statistics",
            expected: book.num_users(),
            actual: stats.len(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{ArrayGeometry, Direction};
    use crate::channel::{draw_user_channel, ChannelModelKind};
    use crate::rng::{substream, Stage};
    use nalgebra::SymmetricEigen;

    fn geom() -> ArrayGeometry {
        ArrayGeometry::half_wavelength(2, 2, 0.1).unwrap()
    }

    fn stats(kind: ChannelModelKind, betas: &[f64]) -> Vec<ChannelStats> {
        betas
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let d = Direction::new(-0.6 + 0.5 * i as f64, 1.8 + 0.1 * i as f64).unwrap();
                ChannelStats::new(kind, *b, 1.5, d, &geom()).unwrap()
            })
            .collect()
    }

    #[test]
    fn dft_pilots_are_orthonormal_and_reused_cyclically() {
        let book = PilotBook::dft(5, 3, 0.2).unwrap();
        for i in 0..5 {
            for k in 0..5 {
                let expected = if i % 3 == k % 3 { 1.0 } else { 0.0 };
                assert!((book.overlap(i, k) - expected).abs() < 1e-14);
            }
        }
        assert!(PilotBook::new(vec![CVector::from_element(2, C64::new(1.0, 0.0))], vec![1.0]).is_err());
        assert!(PilotBook::dft(2, 2, 0.0).is_err());
    }

    #[test]
    fn noiseless_single_user_observation() {
        let s = stats(ChannelModelKind::Rayleigh, &[1.0]);
        let mut rng = substream(1, 0, Stage::Channels);
        let ch = vec![draw_user_channel(&s[0], &mut rng)];
        let mut e1 = CVector::zeros(3);
        e1[0] = C64::new(1.0, 0.0);
        let book = PilotBook::new(vec![e1], vec![0.5]).unwrap();
        let y = training_observation(&ch, &book, 0.0, &mut rng).unwrap();
        let col0 = y.column(0).into_owned();
        assert!((col0 - &ch[0].h * C64::new(0.5f64.sqrt(), 0.0)).norm() < 1e-15);
        assert_eq!(y.column(1).norm(), 0.0);
        assert_eq!(y.column(2).norm(), 0.0);
    }

    #[test]
    fn observation_rejects_dimension_mismatch() {
        let s = stats(ChannelModelKind::Rayleigh, &[1.0, 1.0]);
        let mut rng = substream(1, 0, Stage::Channels);
        let ch = vec![draw_user_channel(&s[0], &mut rng)];
        let book = PilotBook::dft(2, 2, 1.0).unwrap();
        assert!(training_observation(&ch, &book, 1.0, &mut rng).is_err());
    }

    #[test]
    fn pure_noise_observation_has_noise_variance() {
        let s = stats(ChannelModelKind::Rayleigh, &[1.0, 2.0]);
        let book = PilotBook::dft(2, 2, 1.0).unwrap();
        let zero: Vec<UserChannel> = s
            .iter()
            .map(|st| UserChannel {
                h: CVector::zeros(4),
                stats: st.clone(),
                phase_psi: None,
            })
            .collect();
        let mut rng = substream(2, 0, Stage::PilotNoise);
        let (mut acc, mut count) = (0.0, 0usize);
        for _ in 0..10_000 {
            let y = training_observation(&zero, &book, 0.3, &mut rng).unwrap();
            acc += y.norm_squared();
            count += y.len();
        }
        let var = acc / count as f64;
        assert!((var - 0.3).abs() / 0.3 < 0.05, "{var}");
    }

    #[test]
    fn observation_mean_matches_signal_part() {
        let s = stats(ChannelModelKind::Rayleigh, &[1.0, 2.0]);
        let book = PilotBook::dft(2, 2, 0.7).unwrap();
        let mut rng = substream(3, 0, Stage::Channels);
        let ch: Vec<_> = s.iter().map(|st| draw_user_channel(st, &mut rng)).collect();
        let signal = training_observation(&ch, &book, 0.0, &mut rng).unwrap();
        let mut mean = CMatrix::zeros(4, 2);
        let n = 10_000;
        for _ in 0..n {
            mean += training_observation(&ch, &book, 0.1, &mut rng).unwrap();
        }
        mean /= C64::new(n as f64, 0.0);
        let rel = (mean - &signal).norm() / signal.norm();
        assert!(rel < 0.02, "{rel}");
    }

    #[test]
    fn correlate_matches_dense_oracle() {
        let mut rng = substream(4, 0, Stage::PilotNoise);
        let y = complex_gaussian_matrix(&mut rng, 4, 3, 1.0);
        let book = PilotBook::dft(3, 3, 1.0).unwrap();
        for k in 0..3 {
            let fast = correlate(&y, &book, k);
            for row in 0..4 {
                let mut acc = C64::new(0.0, 0.0);
                for t in 0..3 {
                    acc += y[(row, t)] * book.pilot(k)[t];
                }
                assert!((fast[row] - acc).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn pm_estimate_is_exact_without_noise_and_shows_contamination() {
        let s = stats(ChannelModelKind::Rayleigh, &[1.0, 3.0]);
        let mut rng = substream(5, 0, Stage::Channels);
        let ch: Vec<_> = s.iter().map(|st| draw_user_channel(st, &mut rng)).collect();

        let orth = PilotBook::dft(2, 2, 0.5).unwrap();
        let y = training_observation(&ch, &orth, 0.0, &mut rng).unwrap();
        for k in 0..2 {
            let est = pm_estimate(&correlate(&y, &orth, k), orth.power(k));
            assert!((est - &ch[k].h).norm() < 1e-14);
        }

        let y_pk = CVector::from_element(4, C64::new(0.3, 0.1));
        assert_eq!(pm_estimate(&y_pk, 1.0), y_pk);

        let p = orth.pilot(0).clone();
        let shared = PilotBook::new(vec![p.clone(), p], vec![0.5, 2.0]).unwrap();
        let y = training_observation(&ch, &shared, 0.0, &mut rng).unwrap();
        let y1 = correlate(&y, &shared, 0);
        let expected_y = &ch[0].h * C64::new(0.5f64.sqrt(), 0.0) + &ch[1].h * C64::new(2f64.sqrt(), 0.0);
        assert!((&y1 - expected_y).norm() < 1e-13);
        let est = pm_estimate(&y1, 0.5);
        let expected = &ch[0].h + &ch[1].h * C64::new((2.0f64 / 0.5).sqrt(), 0.0);
        assert!((est - expected).norm() < 1e-13);
    }

    #[test]
    fn lmmse_rayleigh_orthogonal_is_scalar_shrinkage() {
        let s = stats(ChannelModelKind::Rayleigh, &[2.0, 0.5]);
        let book = PilotBook::dft(2, 2, 0.8).unwrap();
        let noise = 0.3;
        for k in 0..2 {
            let f = lmmse_filter(k, &book, &s, noise).unwrap();
            let beta = s[k].beta();
            let c = 0.8f64.sqrt() * beta / (0.8 * beta + noise);
            assert!((&f.e - CMatrix::from_diagonal_element(4, 4, C64::new(c, 0.0))).norm() < 1e-13);
            let ry = CMatrix::from_diagonal_element(4, 4, C64::new(0.8 * beta + noise, 0.0));
            assert!((&f.ry - ry).norm() < 1e-13);
        }
    }

    #[test]
    fn lmmse_estimate_shrinks_with_noise() {
        let s = stats(ChannelModelKind::Rice, &[1.0, 0.5]);
        let book = PilotBook::dft(2, 2, 1.0).unwrap();
        let y = CVector::from_fn(4, |i, _| C64::new(1.0 + i as f64, -0.5));
        let mut last = f64::INFINITY;
        for noise in [0.01, 0.1, 1.0, 10.0, 100.0, 1e4, 1e6] {
            let (h, _) = lmmse_estimate(&y, 0, &book, &s, noise).unwrap();
            assert!(h.norm() < last);
            last = h.norm();
        }
        assert!(last < 1e-3);
        assert!(lmmse_filter(0, &book, &s, 0.0).is_err());
    }

    #[test]
    fn received_covariance_structure() {
        for kind in ChannelModelKind::ALL {
            let s = stats(kind, &[1.0, 0.4, 2.0]);
            let book = PilotBook::dft(3, 3, 0.6).unwrap();
            for k in 0..3 {
                let r = received_covariance(k, &book, &s, 0.2);
                let expected = s[k].hbar() * C64::new(0.6, 0.0)
                    + CMatrix::from_diagonal_element(4, 4, C64::new(0.2, 0.0));
                assert!((&r - expected).norm() < 1e-13);
                let eig = SymmetricEigen::new(r.clone()).eigenvalues;
                assert!(eig.iter().all(|e| *e >= 0.2 - 1e-9));
            }
            let shared = PilotBook::dft(3, 2, 0.6).unwrap();
            let r = received_covariance(0, &shared, &s, 0.2);
            let eig = SymmetricEigen::new(r).eigenvalues;
            assert!(eig.iter().all(|e| *e >= 0.2 - 1e-9));
        }
    }

    #[test]
    fn pm_and_lmmse_are_collinear_single_user_rayleigh() {
        let s = stats(ChannelModelKind::Rayleigh, &[1.0]);
        let book = PilotBook::dft(1, 1, 1.0).unwrap();
        let mut rng = substream(6, 0, Stage::Channels);
        let ch = vec![draw_user_channel(&s[0], &mut rng)];
        let y = training_observation(&ch, &book, 0.5, &mut rng).unwrap();
        let pm = estimate_channels(EstimatorKind::Pm, &y, &book, &s, 0.5).unwrap();
        let lm = estimate_channels(EstimatorKind::Lmmse, &y, &book, &s, 0.5).unwrap();
        let (a, b) = (&pm.estimates[0], &lm.estimates[0]);
        let cos = a.dotc(b).norm() / (a.norm() * b.norm());
        assert!((cos - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lmmse_beats_pm_in_mean_square_error() {
        let s = stats(ChannelModelKind::Rice, &[1.0, 0.6]);
        let book = PilotBook::dft(2, 1, 0.5).unwrap();
        let noise = 0.4;
        let pm = EstimatorMatrices::build(EstimatorKind::Pm, &book, &s, noise).unwrap();
        let lm = EstimatorMatrices::build(EstimatorKind::Lmmse, &book, &s, noise).unwrap();
        let mut rng = substream(7, 0, Stage::Channels);
        let (mut e_pm, mut e_lm) = (0.0, 0.0);
        for _ in 0..10_000 {
            let ch: Vec<_> = s.iter().map(|st| draw_user_channel(st, &mut rng)).collect();
            let y = training_observation(&ch, &book, noise, &mut rng).unwrap();
            let a = pm.estimate(&y, &book);
            let b = lm.estimate(&y, &book);
            e_pm += (&a[0] - &ch[0].h).norm_squared();
            e_lm += (&b[0] - &ch[0].h).norm_squared();
        }
        assert!(e_lm <= e_pm, "lmmse {e_lm} pm {e_pm}");
    }

    #[test]
    fn lmmse_error_is_orthogonal_to_observation() {
        let s = stats(ChannelModelKind::Rayleigh, &[1.0, 0.7]);
        let book = PilotBook::dft(2, 1, 1.0).unwrap();
        let noise = 0.5;
        let lm = EstimatorMatrices::build(EstimatorKind::Lmmse, &book, &s, noise).unwrap();
        let mut rng = substream(8, 0, Stage::Channels);
        let n = 100_000;
        let mut cross = CMatrix::zeros(4, 4);
        let mut scale = 0.0;
        for _ in 0..n {
            let ch: Vec<_> = s.iter().map(|st| draw_user_channel(st, &mut rng)).collect();
            let y = training_observation(&ch, &book, noise, &mut rng).unwrap();
            let y0 = correlate(&y, &book, 0);
            let est = lm.estimate(&y, &book);
            let err = &est[0] - &ch[0].h;
            cross += &err * y0.adjoint();
            scale += err.norm() * y0.norm();
        }
        let rel = cross.norm() / scale;
        assert!(rel < 0.03, "{rel}");
    }
}
