//! Numerical kernels for fast two-ion phase gates driven by trains of
//! state-dependent momentum kicks from a GHz pulsed laser.
//!
//! The crate is `no_std` (it needs `alloc`) and does no IO. It covers:
//!
//! - [`model`]: kick dynamics of the center-of-mass and stretch modes,
//!   closure sums, the geometric gate phase, the gate error and phase-space
//!   trajectories.
//! - [`optimizer`]: continuous seeds, a memetic genetic algorithm over the
//!   repetition-rate grid and a brute-force enumerator used as its oracle.
//! - [`error_model`]: spontaneous-emission infidelity of resonant kicks.
//! - [`rap`]: chirped-pulse stretching and two-level rapid adiabatic passage.
//! - [`interferometry`]: synthetic Michelson pulse-area data and direct
//!   ellipse fitting to recover pulse-to-pulse phase shifts.
//! - [`hardware`]: pulse-picker / Pockels-cell pattern compilation and the
//!   laser-chain dispersion budget.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod consts;
pub mod error;
pub mod error_model;
pub mod hardware;
pub mod interferometry;
mod linalg;
pub mod model;
pub mod ode;
pub mod optimizer;
pub mod rap;

pub use error::{Error, Result};
pub use model::{GateResult, KickSequence, SpinConfiguration, TrapIonConfig};
