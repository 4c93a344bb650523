//! Uniform planar array geometry and steering vectors.
//!
//! The array lies in the y–z plane with `n_y` columns along the horizontal
//! axis and `n_z` rows along the vertical axis. Element `(a_y, a_z)` is stored
//! at flat index `a_y * n_z + a_z` (a_y-major order); every module that builds
//! or consumes array-domain vectors uses this layout.

use std::f64::consts::PI;

use crate::{CVector, Error, Result, C64};

/// Planar array layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    n_y: usize,
    n_z: usize,
    spacing: f64,
    wavelength: f64,
}

impl ArrayGeometry {
    pub fn new(n_y: usize, n_z: usize, spacing: f64, wavelength: f64) -> Result<Self> {
        if n_y == 0 || n_z == 0 {
            return Err(Error::invalid("array size", "both axes need at least one element"));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::invalid("spacing", format!("{spacing} is not positive")));
        }
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::invalid("wavelength", format!("{wavelength} is not positive")));
        }
        Ok(Self {
            n_y,
            n_z,
            spacing,
            wavelength,
        })
    }

    /// Array with half-wavelength element spacing.
    pub fn half_wavelength(n_y: usize, n_z: usize, wavelength: f64) -> Result<Self> {
        Self::new(n_y, n_z, 0.5 * wavelength, wavelength)
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn n_z(&self) -> usize {
        self.n_z
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// Total element count `N_A = n_y * n_z`.
    pub fn num_elements(&self) -> usize {
        self.n_y * self.n_z
    }

    /// Wavenumber `2π / λ`.
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Flat index of element `(a_y, a_z)`.
    pub fn element_index(&self, a_y: usize, a_z: usize) -> usize {
        a_y * self.n_z + a_z
    }
}

/// Pointing direction seen from the array.
///
/// `azimuth` is measured in the horizontal plane from the array broadside
/// (x axis); `elevation` is the polar angle from the vertical (z) axis, so
/// `π/2` is the horizon, smaller values point upwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    azimuth: f64,
    elevation: f64,
}

impl Direction {
    pub fn new(azimuth: f64, elevation: f64) -> Result<Self> {
        if !(azimuth.is_finite() && (-PI..=PI).contains(&azimuth)) {
            return Err(Error::invalid("azimuth", format!("{azimuth} outside [-π, π]")));
        }
        if !(elevation.is_finite() && (0.0..=PI).contains(&elevation)) {
            return Err(Error::invalid("elevation", format!("{elevation} outside [0, π]")));
        }
        Ok(Self { azimuth, elevation })
    }

    /// Array broadside, on the horizon.
    pub fn broadside() -> Self {
        Self {
            azimuth: 0.0,
            elevation: 0.5 * PI,
        }
    }

    /// Direction from azimuth and the angle above the horizon, both in degrees.
    pub fn from_degrees_above_horizon(azimuth_deg: f64, above_horizon_deg: f64) -> Result<Self> {
        Self::new(azimuth_deg.to_radians(), (90.0 - above_horizon_deg).to_radians())
    }

    /// Direction of the displacement `(dx, dy, dz)` from the array centre.
    pub fn towards(dx: f64, dy: f64, dz: f64) -> Result<Self> {
        let r = (dx * dx + dy * dy + dz * dz).sqrt();
        if r == 0.0 {
            return Err(Error::invalid("displacement", "zero-length displacement"));
        }
        Self::new(dy.atan2(dx), (dz / r).clamp(-1.0, 1.0).acos())
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    pub fn elevation(&self) -> f64 {
        self.elevation
    }
}

/// Array response `a(φ, θ)` with entries
/// `exp(-j k d (a_y sinφ sinθ + a_z cosθ))` in a_y-major order.
pub fn steering_vector(geom: &ArrayGeometry, dir: Direction) -> CVector {
    let kd = geom.wavenumber() * geom.spacing();
    let step_y = kd * dir.azimuth.sin() * dir.elevation.sin();
    let step_z = kd * dir.elevation.cos();
    let mut a = CVector::zeros(geom.num_elements());
    for a_y in 0..geom.n_y {
        for a_z in 0..geom.n_z {
            let phase = a_y as f64 * step_y + a_z as f64 * step_z;
            a[geom.element_index(a_y, a_z)] = C64::from_polar(1.0, -phase);
        }
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn geom(n_y: usize, n_z: usize) -> ArrayGeometry {
        ArrayGeometry::half_wavelength(n_y, n_z, 0.1).unwrap()
    }

    #[test]
    fn broadside_is_all_ones() {
        let a = steering_vector(&geom(3, 4), Direction::broadside());
        assert!(a.iter().all(|x| (x - C64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn two_element_endfire_alternates_sign() {
        let dir = Direction::new(0.5 * PI, 0.5 * PI).unwrap();
        let a = steering_vector(&geom(2, 1), dir);
        assert_eq!(a[0], C64::new(1.0, 0.0));
        assert!((a[1] - C64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn matches_scalar_evaluation_for_small_planar_array() {
        // Oracle: phases computed one element at a time from the closed form,
        // with kd = π for half-wavelength spacing.
        let dir = Direction::new(PI / 4.0, PI / 3.0).unwrap();
        let a = steering_vector(&geom(2, 2), dir);
        let sy = (PI / 4.0).sin() * (PI / 3.0).sin();
        let cz = (PI / 3.0).cos();
        let expected = [
            (0.0, 0.0),
            (0.0, 1.0),
            (1.0, 0.0),
            (1.0, 1.0),
        ]
        .map(|(ay, az): (f64, f64)| {
            let phase = PI * (ay * sy + az * cz);
            C64::new(phase.cos(), -phase.sin())
        });
        for (i, e) in expected.iter().enumerate() {
            assert!((a[i] - e).norm() < 1e-14, "element {i}: {} vs {e}", a[i]);
        }
        // Frozen values of the same oracle.
        assert!((a[1] - C64::new(0.0, -1.0)).norm() < 1e-14);
        assert!((a[2] - C64::new(-0.345_741_044_348_779_2, -0.938_329_968_749_061_9)).norm() < 1e-12);
    }

    #[test]
    fn first_entry_is_exactly_one() {
        let dir = Direction::new(-1.1, 2.0).unwrap();
        let a = steering_vector(&geom(5, 3), dir);
        assert_eq!(a[0].re, 1.0);
        assert_eq!(a[0].im, 0.0);
    }

    #[test]
    fn rejects_invalid_geometry_and_direction() {
        assert!(ArrayGeometry::new(0, 2, 0.05, 0.1).is_err());
        assert!(ArrayGeometry::new(2, 2, -0.05, 0.1).is_err());
        assert!(ArrayGeometry::new(2, 2, 0.05, 0.0).is_err());
        assert!(Direction::new(4.0, 1.0).is_err());
        assert!(Direction::new(0.0, -0.1).is_err());
    }

    #[test]
    fn towards_recovers_angles() {
        let d = Direction::towards(10.0, 10.0, 0.0).unwrap();
        assert!((d.azimuth() - PI / 4.0).abs() < 1e-15);
        assert!((d.elevation() - PI / 2.0).abs() < 1e-15);
        let up = Direction::from_degrees_above_horizon(0.0, 30.0).unwrap();
        assert!((up.elevation() - PI / 3.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn unit_modulus_and_norm(az in -PI..PI, el in 0.0..PI, ny in 1usize..6, nz in 1usize..6) {
            let g = geom(ny, nz);
            let a = steering_vector(&g, Direction::new(az, el).unwrap());
            for x in a.iter() {
                prop_assert!((x.norm() - 1.0).abs() < 1e-14);
            }
            prop_assert!((a.norm_squared() - g.num_elements() as f64).abs() < 1e-11);
        }

        #[test]
        fn linear_array_reduces_to_ula(az in -PI..PI, n in 1usize..8) {
            let g = geom(n, 1);
            let a = steering_vector(&g, Direction::new(az, 0.5 * PI).unwrap());
            for i in 0..n {
                let e = C64::from_polar(1.0, -PI * i as f64 * az.sin());
                prop_assert!((a[i] - e).norm() < 1e-12);
            }
        }

        #[test]
        fn mirrored_azimuth_conjugates(az in -PI..PI, el in 0.0..PI, n in 1usize..8) {
            let g = geom(n, 1);
            let a = steering_vector(&g, Direction::new(az, el).unwrap());
            let b = steering_vector(&g, Direction::new(-az, el).unwrap());
            for i in 0..n {
                prop_assert!((a[i].conj() - b[i]).norm() < 1e-12);
            }
        }
    }
}
