//! Downlink beamformers.
//!
//! Users are served with channel-matched beams `ĥ_k / ‖ĥ_k‖`. The radar beam
//! is either phased toward the surveillance direction (PBR) or that phased
//! beam projected onto the orthogonal complement of the estimated user
//! channels (ZFR).

use std::fmt;
use std::str::FromStr;

use nalgebra::SVD;
use serde::{Deserialize, Serialize};

use crate::array::{steering_vector, ArrayGeometry, Direction};
use crate::{CMatrix, CVector, Error, Result, C64};

/// Relative rank tolerance for the span of the estimated channels.
pub const RANK_TOLERANCE: f64 = 1e-10;
/// Projections with smaller norm are treated as degenerate.
pub const DEGENERATE_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RadarBeamKind {
    Pbr,
    Zfr,
}

impl RadarBeamKind {
    pub const ALL: [RadarBeamKind; 2] = [Self::Pbr, Self::Zfr];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Pbr => "pbr",
            Self::Zfr => "zfr",
        }
    }
}

impl fmt::Display for RadarBeamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RadarBeamKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pbr" => Ok(Self::Pbr),
            "zfr" => Ok(Self::Zfr),
            other => Err(Error::Config(format!("unknown radar beam `{other}`"))),
        }
    }
}

/// Unit-norm user beams and the radar beam.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    pub user_beams: Vec<CVector>,
    pub radar_beam: CVector,
    pub radar_kind: RadarBeamKind,
    pub radar_direction: Direction,
}

impl BeamformerSet {
    pub fn build(
        geom: &ArrayGeometry,
        estimates: &[CVector],
        radar_kind: RadarBeamKind,
        radar_direction: Direction,
    ) -> Result<Self> {
        let user_beams = estimates.iter().map(matched_beam).collect::<Result<Vec<_>>>()?;
        let radar_beam = match radar_kind {
            RadarBeamKind::Pbr => pbr_beam(geom, radar_direction),
            RadarBeamKind::Zfr => zfr_beam(geom, radar_direction, estimates)?,
        };
        Ok(Self {
            user_beams,
            radar_beam,
            radar_kind,
            radar_direction,
        })
    }

    pub fn num_users(&self) -> usize {
        self.user_beams.len()
    }
}

/// `ĥ / ‖ĥ‖`.
pub fn matched_beam(estimate: &CVector) -> Result<CVector> {
    let norm = estimate.norm();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::invalid("estimate", "cannot match a zero or non-finite channel estimate"));
    }
    Ok(estimate / C64::new(norm, 0.0))
}

/// `a(φ, θ) / √N_A`.
pub fn pbr_beam(geom: &ArrayGeometry, dir: Direction) -> CVector {
    let a = steering_vector(geom, dir);
    let scale = 1.0 / (geom.num_elements() as f64).sqrt();
    a * C64::new(scale, 0.0)
}

/// Orthonormal basis of the column span of `vectors`, from an SVD with the
/// rank cut at `RANK_TOLERANCE` times the largest column norm.
pub fn span_basis(vectors: &[CVector], len: usize) -> Result<CMatrix> {
    if vectors.is_empty() {
        return Ok(CMatrix::zeros(len, 0));
    }
    for v in vectors {
        if v.len() != len {
            return Err(Error::DimensionMismatch {
                context: "span vector length",
                expected: len,
                actual: v.len(),
            });
        }
    }
    let m = CMatrix::from_columns(vectors);
    let max_col = vectors.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if max_col == 0.0 {
        return Ok(CMatrix::zeros(len, 0));
    }
    let svd = SVD::new(m, true, false);
    let u = svd
        .u
        .ok_or_else(|| Error::Numerical("SVD did not return left singular vectors".into()))?;
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s > RANK_TOLERANCE * max_col)
        .map(|(i, _)| i)
        .collect();
    let cols: Vec<CVector> = keep.iter().map(|&i| u.column(i).into_owned()).collect();
    if cols.is_empty() {
        return Ok(CMatrix::zeros(len, 0));
    }
    Ok(CMatrix::from_columns(&cols))
}

/// `(I − ŨŨᴴ) a / ‖(I − ŨŨᴴ) a‖` with `Ũ` an orthonormal basis of the
/// estimated channels. With no users this is the phased beam, bit for bit.
pub fn zfr_beam(geom: &ArrayGeometry, dir: Direction, estimates: &[CVector]) -> Result<CVector> {
    if estimates.is_empty() {
        return Ok(pbr_beam(geom, dir));
    }
    let n = geom.num_elements();
    if n <= estimates.len() {
        return Err(Error::invalid(
            "users",
            format!("zero-forcing needs more antennas ({n}) than users ({})", estimates.len()),
        ));
    }
    let a = steering_vector(geom, dir);
    let basis = span_basis(estimates, n)?;
    let mut p = a.clone();
    if basis.ncols() > 0 {
        let coeffs = basis.adjoint() * &a;
        p -= &basis * coeffs;
        // A second pass removes the rounding left by the first.
        let coeffs = basis.adjoint() * &p;
        p -= &basis * coeffs;
    }
    let residual = p.norm() / (n as f64).sqrt();
    if residual < DEGENERATE_NORM {
        return Err(Error::DegenerateDirection { residual });
    }
    let norm = p.norm();
    Ok(p / C64::new(norm, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_gaussian_vector, substream, Stage};

    fn geom() -> ArrayGeometry {
        ArrayGeometry::half_wavelength(4, 4, 0.1).unwrap()
    }

    fn dir() -> Direction {
        Direction::new(0.4, 1.1).unwrap()
    }

    #[test]
    fn matched_beam_basics() {
        let mut e = CVector::zeros(4);
        e[0] = C64::new(3.0, 0.0);
        let w = matched_beam(&e).unwrap();
        assert_eq!(w[0], C64::new(1.0, 0.0));
        assert!(matched_beam(&CVector::zeros(4)).is_err());

        let mut rng = substream(1, 0, Stage::Channels);
        let h = complex_gaussian_vector(&mut rng, 16, 1.0);
        let w = matched_beam(&h).unwrap();
        assert!((w.norm() - 1.0).abs() < 1e-12);
        let alpha = C64::new(-0.7, 2.1);
        let ws = matched_beam(&(&h * alpha)).unwrap();
        let phase = C64::from_polar(1.0, alpha.arg());
        assert!((ws - w * phase).norm() < 1e-12);
    }

    #[test]
    fn pbr_beam_basics() {
        let g = geom();
        let w = pbr_beam(&g, dir());
        let a = steering_vector(&g, dir());
        assert!((a.dotc(&w).norm_sqr() - 16.0).abs() < 1e-10);
        assert!((w.norm() - 1.0).abs() < 1e-12);
        let b = pbr_beam(&g, Direction::broadside());
        assert!(b.iter().all(|x| (x - C64::new(0.25, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn zfr_without_users_is_pbr() {
        let g = geom();
        assert_eq!(zfr_beam(&g, dir(), &[]).unwrap(), pbr_beam(&g, dir()));
    }

    #[test]
    fn zfr_nulls_estimates_and_matches_gram_schmidt() {
        let g = geom();
        let mut rng = substream(2, 0, Stage::Channels);
        let hs: Vec<_> = (0..5).map(|_| complex_gaussian_vector(&mut rng, 16, 1.0)).collect();
        let w = zfr_beam(&g, dir(), &hs).unwrap();
        for h in &hs {
            assert!(h.dotc(&w).norm() <= 1e-10);
        }
        assert!((w.norm() - 1.0).abs() < 1e-12);

        // Modified Gram-Schmidt oracle.
        let mut q: Vec<CVector> = Vec::new();
        for h in &hs {
            let mut v = h.clone();
            for b in &q {
                let c = b.dotc(&v);
                v -= b * c;
            }
            let n = v.norm();
            q.push(v / C64::new(n, 0.0));
        }
        let mut p = steering_vector(&g, dir());
        for b in &q {
            let c = b.dotc(&p);
            p -= b * c;
        }
        let n = p.norm();
        let oracle = p / C64::new(n, 0.0);
        assert!((oracle - &w).norm() < 1e-9);
    }

    #[test]
    fn zfr_invariant_under_recombination() {
        let g = geom();
        let mut rng = substream(3, 0, Stage::Channels);
        let hs: Vec<_> = (0..3).map(|_| complex_gaussian_vector(&mut rng, 16, 1.0)).collect();
        let mix = [
            [C64::new(1.0, 0.5), C64::new(0.2, 0.0), C64::new(0.0, -1.0)],
            [C64::new(0.0, 0.0), C64::new(2.0, 0.0), C64::new(0.3, 0.3)],
            [C64::new(-1.0, 0.0), C64::new(0.0, 1.0), C64::new(1.5, 0.0)],
        ];
        let recombined: Vec<CVector> = mix
            .iter()
            .map(|row| row.iter().zip(&hs).fold(CVector::zeros(16), |acc, (c, h)| acc + h * *c))
            .collect();
        let a = zfr_beam(&g, dir(), &hs).unwrap();
        let b = zfr_beam(&g, dir(), &recombined).unwrap();
        assert!((a - b).norm() < 1e-9);
    }

    #[test]
    fn zfr_gain_never_exceeds_pbr() {
        let g = geom();
        let a = steering_vector(&g, dir());
        for seed in 0..20 {
            let mut rng = substream(seed, 0, Stage::Channels);
            let hs: Vec<_> = (0..4).map(|_| complex_gaussian_vector(&mut rng, 16, 1.0)).collect();
            let w = zfr_beam(&g, dir(), &hs).unwrap();
            assert!(a.dotc(&w).norm_sqr() <= 16.0 + 1e-9);
        }
    }

    #[test]
    fn zfr_errors() {
        let g = ArrayGeometry::half_wavelength(2, 1, 0.1).unwrap();
        let d = Direction::new(0.3, 1.4).unwrap();
        let a = steering_vector(&g, d);
        let other = CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0)]);
        assert!(matches!(
            zfr_beam(&g, d, &[a.clone(), other]),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(zfr_beam(&g, d, &[a]), Err(Error::DegenerateDirection { .. })));
    }

    #[test]
    fn span_basis_drops_collinear_vectors() {
        let mut rng = substream(4, 0, Stage::Channels);
        let h = complex_gaussian_vector(&mut rng, 8, 1.0);
        let basis = span_basis(&[h.clone(), &h * C64::new(0.0, 2.0)], 8).unwrap();
        assert_eq!(basis.ncols(), 1);
    }

    #[test]
    fn build_set() {
        let g = geom();
        let mut rng = substream(5, 0, Stage::Channels);
        let hs: Vec<_> = (0..4).map(|_| complex_gaussian_vector(&mut rng, 16, 1.0)).collect();
        for kind in RadarBeamKind::ALL {
            let set = BeamformerSet::build(&g, &hs, kind, dir()).unwrap();
            assert_eq!(set.num_users(), 4);
            assert!(set.user_beams.iter().all(|w| (w.norm() - 1.0).abs() < 1e-12));
            assert!((set.radar_beam.norm() - 1.0).abs() < 1e-12);
        }
    }
}
