//! Kick dynamics of a two-ion crystal.
//!
//! Each picked comb pulse (split into a counter-propagating pair) displaces
//! the center-of-mass and stretch modes in phase space by an amount whose
//! sign depends on the spins. Between kicks the modes rotate freely at
//! `ω` and `√3 ω`. A sequence closes when both modes return to the origin,
//! leaving only a spin-dependent geometric phase.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::consts::{self, SQRT3};
use crate::error::{config as config_error, domain, Result};

/// Momentum imparted by one picked pulse, in units of ħk.
pub const DEFAULT_MOMENTUM_FACTOR: f64 = 2.0;

/// Ion, trap and laser parameters. All quantities are SI; the trap frequency
/// is angular (rad/s).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrapIonConfig {
    pub ion_mass: f64,
    pub kick_wavelength: f64,
    pub trap_frequency: f64,
    pub repetition_rate: f64,
    pub excited_state_lifetime: f64,
}

impl Default for TrapIonConfig {
    fn default() -> Self {
        Self {
            ion_mass: consts::CA40_MASS,
            kick_wavelength: consts::KICK_WAVELENGTH,
            trap_frequency: TAU * consts::TRAP_FREQUENCY_HZ,
            repetition_rate: consts::REPETITION_RATE,
            excited_state_lifetime: consts::P32_LIFETIME,
        }
    }
}

impl TrapIonConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("ion_mass", self.ion_mass),
            ("kick_wavelength", self.kick_wavelength),
            ("trap_frequency", self.trap_frequency),
            ("repetition_rate", self.repetition_rate),
            ("excited_state_lifetime", self.excited_state_lifetime),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(config_error(format!("{name} must be finite and positive, got {value}")));
            }
        }
        Ok(())
    }

    /// Spacing of the repetition-rate grid, s.
    pub fn grid_period(&self) -> f64 {
        1.0 / self.repetition_rate
    }

    /// Trap period 2π/ω, s.
    pub fn trap_period(&self) -> f64 {
        TAU / self.trap_frequency
    }

    /// Decay rate γ of the excited state, 1/s.
    pub fn decay_rate(&self) -> f64 {
        1.0 / self.excited_state_lifetime
    }
}

/// Quantities derived from a [`TrapIonConfig`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModeParameters {
    /// Lamb-Dicke parameter η = k sqrt(ħ / 2mω).
    pub eta: f64,
    /// Center-of-mass kick strength η / 2^{3/2}.
    pub alpha_c: f64,
    /// Stretch kick strength α_c / 3^{1/4}.
    pub alpha_s: f64,
    pub omega_c: f64,
    pub omega_s: f64,
}

pub fn derive_parameters(config: &TrapIonConfig) -> Result<ModeParameters> {
    config.validate()?;
    let k = TAU / config.kick_wavelength;
    let eta = k * (consts::HBAR / (2.0 * config.ion_mass * config.trap_frequency)).sqrt();
    if !(eta.is_finite() && eta > 0.0) {
        return Err(config_error(format!("derived Lamb-Dicke parameter is not positive and finite: {eta}")));
    }
    let alpha_c = eta / 8.0_f64.sqrt();
    let alpha_s = alpha_c / 3.0_f64.powf(0.25);
    Ok(ModeParameters { eta, alpha_c, alpha_s, omega_c: config.trap_frequency, omega_s: SQRT3 * config.trap_frequency })
}

/// One kick group: `multiplicity` consecutive comb pulses treated as
/// simultaneous at the time of `slot`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Kick {
    pub slot: u64,
    pub multiplicity: u32,
}

impl Kick {
    pub const fn new(slot: u64, multiplicity: u32) -> Self {
        Self { slot, multiplicity }
    }
}

/// Ordered kicks on the repetition-rate grid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KickSequence {
    kicks: Vec<Kick>,
    momentum_factor: f64,
    grid_period: f64,
}

impl KickSequence {
    pub fn new(kicks: Vec<Kick>, momentum_factor: f64, grid_period: f64) -> Result<Self> {
        if !(grid_period.is_finite() && grid_period > 0.0) {
            return Err(config_error(format!("grid period must be positive, got {grid_period}")));
        }
        if !(momentum_factor.is_finite() && momentum_factor > 0.0) {
            return Err(config_error(format!("momentum factor must be positive, got {momentum_factor}")));
        }
        if let Some(i) = kicks.iter().position(|k| k.multiplicity == 0) {
            return Err(domain(format!("kick {i} has multiplicity 0")));
        }
        if let Some(w) = kicks.windows(2).position(|w| w[1].slot <= w[0].slot) {
            return Err(domain(format!("slot indices must be strictly increasing (kicks {w} and {})", w + 1)));
        }
        Ok(Self { kicks, momentum_factor, grid_period })
    }

    /// Unit-multiplicity kicks at the given slots.
    pub fn from_slots(slots: &[u64], momentum_factor: f64, grid_period: f64) -> Result<Self> {
        Self::new(slots.iter().map(|&s| Kick::new(s, 1)).collect(), momentum_factor, grid_period)
    }

    pub fn kicks(&self) -> &[Kick] {
        &self.kicks
    }

    pub fn len(&self) -> usize {
        self.kicks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kicks.is_empty()
    }

    pub fn momentum_factor(&self) -> f64 {
        self.momentum_factor
    }

    pub fn grid_period(&self) -> f64 {
        self.grid_period
    }

    pub fn with_momentum_factor(mut self, momentum_factor: f64) -> Result<Self> {
        if !(momentum_factor.is_finite() && momentum_factor > 0.0) {
            return Err(config_error(format!("momentum factor must be positive, got {momentum_factor}")));
        }
        self.momentum_factor = momentum_factor;
        Ok(self)
    }

    /// Arrival time of kick `n`, s.
    pub fn time(&self, n: usize) -> f64 {
        self.kicks[n].slot as f64 * self.grid_period
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|n| self.time(n)).collect()
    }

    /// t_N - t_1, s. Zero for empty and single-kick sequences.
    pub fn duration(&self) -> f64 {
        self.span_slots() as f64 * self.grid_period
    }

    pub fn span_slots(&self) -> u64 {
        match (self.kicks.first(), self.kicks.last()) {
            (Some(a), Some(b)) => b.slot - a.slot,
            _ => 0,
        }
    }

    /// Number of picked comb pulses, Σ z_n.
    pub fn pulse_count(&self) -> u64 {
        self.kicks.iter().map(|k| u64::from(k.multiplicity)).sum()
    }
}

/// Eigenvalue of σ_z for one ion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub fn value(self) -> i32 {
        match self {
            Spin::Up => 1,
            Spin::Down => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpinConfiguration {
    pub s1: Spin,
    pub s2: Spin,
}

impl SpinConfiguration {
    pub const ALL: [SpinConfiguration; 4] = [
        SpinConfiguration { s1: Spin::Up, s2: Spin::Up },
        SpinConfiguration { s1: Spin::Up, s2: Spin::Down },
        SpinConfiguration { s1: Spin::Down, s2: Spin::Up },
        SpinConfiguration { s1: Spin::Down, s2: Spin::Down },
    ];

    pub const fn new(s1: Spin, s2: Spin) -> Self {
        Self { s1, s2 }
    }

    /// s1 + s2, drives the center-of-mass mode.
    pub fn sum_factor(self) -> i32 {
        self.s1.value() + self.s2.value()
    }

    /// s1 - s2, drives the stretch mode.
    pub fn difference_factor(self) -> i32 {
        self.s1.value() - self.s2.value()
    }

    pub fn factor(self, mode: Mode) -> i32 {
        match mode {
            Mode::CenterOfMass => self.sum_factor(),
            Mode::Stretch => self.difference_factor(),
        }
    }

    pub fn label(self) -> &'static str {
        match (self.s1, self.s2) {
            (Spin::Up, Spin::Up) => "uu",
            (Spin::Up, Spin::Down) => "ud",
            (Spin::Down, Spin::Up) => "du",
            (Spin::Down, Spin::Down) => "dd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Mode {
    CenterOfMass,
    Stretch,
}

impl Mode {
    pub const BOTH: [Mode; 2] = [Mode::CenterOfMass, Mode::Stretch];

    pub fn frequency(self, params: &ModeParameters) -> f64 {
        match self {
            Mode::CenterOfMass => params.omega_c,
            Mode::Stretch => params.omega_s,
        }
    }

    pub fn strength(self, params: &ModeParameters) -> f64 {
        match self {
            Mode::CenterOfMass => params.alpha_c,
            Mode::Stretch => params.alpha_s,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Mode::CenterOfMass => "com",
            Mode::Stretch => "stretch",
        }
    }
}

/// `TAU` split into a head exactly representable in f64 and the rounding
/// remainder, for Cody-Waite style reduction.
const TAU_HI: f64 = TAU;
const TAU_LO: f64 = 2.449_293_598_294_706_4e-16;

/// `omega * t` reduced to (-π, π]. The product is formed exactly as a
/// head/tail pair with a fused multiply-add and the reduction subtracts
/// 2πk in two parts, so the result stays accurate for arguments of 1e4 rad
/// and beyond.
pub fn reduced_angle(omega: f64, t: f64) -> f64 {
    let hi = omega * t;
    if !hi.is_finite() {
        return hi;
    }
    let lo = omega.mul_add(t, -hi);
    let k = (hi / TAU).round();
    let mut r = (-k).mul_add(TAU_HI, hi);
    r = (-k).mul_add(TAU_LO, r);
    r += lo;
    if r > PI {
        r -= TAU;
    } else if r <= -PI {
        r += TAU;
    }
    r
}

/// Σ_n w_n e^{-i ω t_n} for real-valued times and weights.
pub fn closure_sum_at(times: &[f64], weights: &[f64], omega: f64) -> Complex64 {
    times
        .iter()
        .zip(weights)
        .map(|(&t, &w)| Complex64::from_polar(w, -reduced_angle(omega, t)))
        .fold(Complex64::new(0.0, 0.0), |acc, z| acc + z)
}

/// sin(√3 x)/√3 - sin(x) with x = ω τ.
pub fn pair_kernel(omega: f64, tau: f64) -> f64 {
    reduced_angle(SQRT3 * omega, tau).sin() / SQRT3 - reduced_angle(omega, tau).sin()
}

/// Derivative of [`pair_kernel`] with respect to τ.
pub fn pair_kernel_derivative(omega: f64, tau: f64) -> f64 {
    omega * (reduced_angle(SQRT3 * omega, tau).cos() - reduced_angle(omega, tau).cos())
}

/// Geometric phase for arbitrary real times, in index order:
/// α² Σ_{j>k} w_j w_k K(t_j - t_k). `alpha` already includes the momentum
/// factor.
pub fn phase_from_times(times: &[f64], weights: &[f64], omega: f64, alpha: f64) -> f64 {
    let mut sum = 0.0;
    for j in 1..times.len() {
        for k in 0..j {
            sum += weights[j] * weights[k] * pair_kernel(omega, times[j] - times[k]);
        }
    }
    alpha * alpha * sum
}

fn weights(seq: &KickSequence) -> Vec<f64> {
    seq.kicks.iter().map(|k| f64::from(k.multiplicity)).collect()
}

/// Mode sums S_c = Σ z_n e^{-i ω_c t_n} and S_s = Σ z_n e^{-i ω_s t_n}.
///
/// The displacement of mode m for spins (s1, s2) is
/// `A_m = i · f_m(s1, s2) · m_f · α_m · S_m` with f_c = s1 + s2 and
/// f_s = s1 - s2.
pub fn closure_sums(seq: &KickSequence, config: &TrapIonConfig) -> Result<(Complex64, Complex64)> {
    if seq.is_empty() {
        return Err(domain("closure sums need at least one kick"));
    }
    let params = derive_parameters(config)?;
    let t = seq.times();
    let w = weights(seq);
    Ok((closure_sum_at(&t, &w, params.omega_c), closure_sum_at(&t, &w, params.omega_s)))
}

/// Gate phase φ = (m_f α_c)² Σ_{j>k} z_j z_k [sin(√3 ω t_jk)/√3 - sin(ω t_jk)].
///
/// Differences t_jk are formed from integer slot differences, so they are exact
/// multiples of the grid period.
pub fn gate_phase(seq: &KickSequence, config: &TrapIonConfig) -> Result<f64> {
    let params = derive_parameters(config)?;
    let alpha = seq.momentum_factor * params.alpha_c;
    let kicks = seq.kicks();
    let mut sum = 0.0;
    for j in 1..kicks.len() {
        for k in 0..j {
            let tau = (kicks[j].slot - kicks[k].slot) as f64 * seq.grid_period;
            sum +=
                f64::from(kicks[j].multiplicity) * f64::from(kicks[k].multiplicity) * pair_kernel(params.omega_c, tau);
        }
    }
    Ok(alpha * alpha * sum)
}

/// Residual phase-space displacement ε = |A_c|² + |A_s|² at the worst-case
/// spin factors |s1 ± s2| = 2.
pub fn gate_error(seq: &KickSequence, config: &TrapIonConfig) -> Result<f64> {
    let params = derive_parameters(config)?;
    let (sc, ss) = closure_sums(seq, config)?;
    Ok(error_from_sums(&params, seq.momentum_factor, sc, ss))
}

pub(crate) fn error_from_sums(params: &ModeParameters, momentum_factor: f64, sc: Complex64, ss: Complex64) -> f64 {
    let ac = 2.0 * momentum_factor * params.alpha_c;
    let as_ = 2.0 * momentum_factor * params.alpha_s;
    ac * ac * sc.norm_sqr() + as_ * as_ * ss.norm_sqr()
}

/// Everything known about one kick sequence.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GateResult {
    pub closure_c: Complex64,
    pub closure_s: Complex64,
    pub phase: f64,
    pub gate_error: f64,
    /// t_N - t_1, s.
    pub duration: f64,
    /// Duration in trap periods, t ω / 2π.
    pub duration_periods: f64,
    pub pulse_count: u64,
    pub infidelity_spontaneous: f64,
}

/// Evaluates a sequence; `per_pulse_error` is the spontaneous-emission
/// probability of one picked pulse (see [`crate::error_model`]).
pub fn evaluate(seq: &KickSequence, config: &TrapIonConfig, per_pulse_error: f64) -> Result<GateResult> {
    let params = derive_parameters(config)?;
    let (closure_c, closure_s) = closure_sums(seq, config)?;
    let phase = gate_phase(seq, config)?;
    let duration = seq.duration();
    let pulse_count = seq.pulse_count();
    Ok(GateResult {
        closure_c,
        closure_s,
        phase,
        gate_error: error_from_sums(&params, seq.momentum_factor, closure_c, closure_s),
        duration,
        duration_periods: duration / config.trap_period(),
        pulse_count,
        infidelity_spontaneous: crate::error_model::sequence_infidelity(per_pulse_error, pulse_count)?,
    })
}

/// Polygonal orbit of one mode for one spin configuration, in the frame
/// rotating with the mode.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModeTrajectory {
    pub mode: Mode,
    pub spin: SpinConfiguration,
    /// Vertex 0 is the origin; vertex n is the position after kick n.
    pub vertices: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhaseSpaceTrajectory {
    pub center_of_mass: ModeTrajectory,
    pub stretch: ModeTrajectory,
}

pub fn trajectory(seq: &KickSequence, config: &TrapIonConfig, spin: SpinConfiguration) -> Result<PhaseSpaceTrajectory> {
    let params = derive_parameters(config)?;
    let build = |mode: Mode| {
        let omega = mode.frequency(&params);
        let strength = f64::from(spin.factor(mode)) * seq.momentum_factor * mode.strength(&params);
        let mut vertices = Vec::with_capacity(seq.len() + 1);
        let mut pos = Complex64::new(0.0, 0.0);
        vertices.push(pos);
        for (n, kick) in seq.kicks().iter().enumerate() {
            let phasor = Complex64::from_polar(f64::from(kick.multiplicity), -reduced_angle(omega, seq.time(n)));
            pos += Complex64::i() * strength * phasor;
            vertices.push(pos);
        }
        ModeTrajectory { mode, spin, vertices }
    };
    Ok(PhaseSpaceTrajectory { center_of_mass: build(Mode::CenterOfMass), stretch: build(Mode::Stretch) })
}
