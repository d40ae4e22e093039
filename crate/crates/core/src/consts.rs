//! Physical constants (CODATA 2018) and the reference operating point.

use core::f64::consts::PI;

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Atomic mass unit, kg.
pub const AMU: f64 = 1.660_539_066_60e-27;
/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Mass of the reference ion (40 amu).
pub const CA40_MASS: f64 = 40.0 * AMU;
/// 4S1/2 - 4P3/2 resonance used for the kicks, m.
pub const KICK_WAVELENGTH: f64 = 393.3e-9;
/// Lifetime of 4P3/2, s.
pub const P32_LIFETIME: f64 = 6.9e-9;
/// Axial trap frequency of the reference design, Hz (ω/2π).
pub const TRAP_FREQUENCY_HZ: f64 = 0.27e6;
/// Pulse repetition rate of the source, Hz.
pub const REPETITION_RATE: f64 = 5.0e9;

/// Intensity time-bandwidth product of a transform-limited Gaussian, 2 ln2 / π.
pub const GAUSSIAN_TBP: f64 = 2.0 * core::f64::consts::LN_2 / PI;

pub(crate) const SQRT3: f64 = 1.732_050_807_568_877_2;
