//! Link-level simulation and power allocation for a massive MIMO base station
//! that serves downlink users and runs an OFDM surveillance radar through the
//! same planar array.
//!
//! The crate is organised bottom-up:
//!
//! - [`array`]: planar array geometry and steering vectors.
//! - [`channel`]: user channel models (Rayleigh, pure LoS, Rice), their
//!   correlation matrices and the two-way target channel.
//! - [`estimation`]: uplink pilot training with pilot-matched and LMMSE
//!   estimators.
//! - [`beamform`]: channel-matched user beams and the phased / zero-forcing
//!   radar beams.
//! - [`rate`]: closed-form use-and-then-forget rate bounds.
//! - [`poweralloc`]: max-min fair power allocation under a radar SIR
//!   constraint, solved by bisection over linear feasibility programs.
//! - [`radar`]: OFDM grid synthesis, target echoes and the GLRT detector.
//! - [`harness`]: scenario configuration, Monte-Carlo experiment drivers and
//!   output writers.

pub mod array;
pub mod beamform;
pub mod channel;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod linalg;
pub mod poweralloc;
pub mod radar;
pub mod rate;
pub mod rng;

pub use error::{Error, Result};

/// Double precision complex sample.
pub type C64 = num_complex::Complex64;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
