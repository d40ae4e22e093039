//! Spontaneous-emission budget of resonant kicks.
//!
//! During a kick the ion sits in the short-lived excited state for the delay
//! between the two counter-propagating pulses plus, on average, half of the
//! excitation pulse. A photon emitted in that window ruins the gate.

use alloc::format;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{domain, Result};

/// Above this value of γ·exposure the first-order picture is questionable.
pub const VALIDITY_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KickErrorBudget {
    /// Delay between the counter-propagating pulses, s.
    pub t_wait: f64,
    /// Pulse duration, s.
    pub pulse_duration: f64,
    /// Excited-state decay rate, 1/s.
    pub decay_rate: f64,
    pub per_kick_error: f64,
    pub kicks: u64,
    pub total_infidelity: f64,
    /// γ·(t_wait + δt/2) exceeded [`VALIDITY_LIMIT`].
    pub outside_validity: bool,
}

impl KickErrorBudget {
    pub fn new(t_wait: f64, pulse_duration: f64, decay_rate: f64, kicks: u64) -> Result<Self> {
        let per_kick_error = per_kick_error(t_wait, pulse_duration, decay_rate)?;
        Ok(Self {
            t_wait,
            pulse_duration,
            decay_rate,
            per_kick_error,
            kicks,
            total_infidelity: sequence_infidelity(per_kick_error, kicks)?,
            outside_validity: decay_rate * exposure_time(t_wait, pulse_duration) > VALIDITY_LIMIT,
        })
    }
}

/// Mean time spent in the excited state per kick: t_wait + δt/2.
pub fn exposure_time(t_wait: f64, pulse_duration: f64) -> f64 {
    t_wait + 0.5 * pulse_duration
}

/// ε₁ = 1 - exp(-γ (t_wait + δt/2)).
pub fn per_kick_error(t_wait: f64, pulse_duration: f64, decay_rate: f64) -> Result<f64> {
    for (name, v) in [("t_wait", t_wait), ("pulse duration", pulse_duration), ("decay rate", decay_rate)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(domain(format!("{name} must be finite and non-negative, got {v}")));
        }
    }
    Ok(-(-decay_rate * exposure_time(t_wait, pulse_duration)).exp_m1())
}

/// ε_N = 1 - (1 - ε₁)^N, evaluated as -expm1(N ln(1 - ε₁)).
pub fn sequence_infidelity(per_kick: f64, kicks: u64) -> Result<f64> {
    if !(0.0..=1.0).contains(&per_kick) {
        return Err(domain(format!("per-kick error must lie in [0, 1], got {per_kick}")));
    }
    if kicks == 0 || per_kick == 0.0 {
        return Ok(0.0);
    }
    if per_kick == 1.0 {
        return Ok(1.0);
    }
    Ok(-((kicks as f64) * (-per_kick).ln_1p()).exp_m1())
}
