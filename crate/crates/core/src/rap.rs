//! Chirped Gaussian pulses and rapid adiabatic passage on a two-level atom.
//!
//! A transform-limited Gaussian with intensity FWHM `τ₀` passed through
//! group-delay dispersion `φ₂` stays Gaussian. With `a = 2 ln2 / τ₀²` the
//! output field is `exp(-Γ t²)` where `Γ = a (1 + 2 i a φ₂) / (1 + 4 a² φ₂²)`,
//! so the intensity FWHM grows by `sqrt(1 + (4 ln2 φ₂ / τ₀²)²)` and the
//! instantaneous frequency sweeps linearly at `β = 4 a² φ₂ / (1 + 4 a² φ₂²)`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::{LN_2, PI};

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{domain, Result};
use crate::ode::{self, SolverStats, Tolerance};

/// Excitation probability that counts as transferred.
pub const PLATEAU_THRESHOLD: f64 = 0.99;
/// Half-width of the integration window in stretched FWHM.
pub const WINDOW_FWHM: f64 = 5.0;
const MAX_STEPS: usize = 20_000_000;
/// Per-step tolerance relative to the requested accuracy; the global error
/// of the probability grows to a few tens of per-step errors.
const LOCAL_TOL_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChirpedPulse {
    /// Transform-limited intensity FWHM, s.
    pub fwhm_tl: f64,
    /// Group-delay dispersion, s².
    pub gdd: f64,
    /// Peak Rabi frequency of the transform-limited pulse at unit energy, rad/s.
    pub peak_rabi: f64,
    /// Carrier minus transition frequency, rad/s.
    pub detuning_offset: f64,
}

impl Default for ChirpedPulse {
    /// 1 ps pulse, 5 ps² of GDD, unit energy = transform-limited π pulse.
    fn default() -> Self {
        Self::with_pi_area(1e-12, 5e-24)
    }
}

impl ChirpedPulse {
    /// Pulse whose transform-limited version at unit energy has area π.
    pub fn with_pi_area(fwhm_tl: f64, gdd: f64) -> Self {
        Self { fwhm_tl, gdd, peak_rabi: PI / gaussian_area_factor(fwhm_tl), detuning_offset: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fwhm_tl.is_finite() && self.fwhm_tl > 0.0) {
            return Err(domain(format!("fwhm_tl must be positive, got {}", self.fwhm_tl)));
        }
        if !self.gdd.is_finite() || !self.detuning_offset.is_finite() {
            return Err(domain("gdd and detuning offset must be finite"));
        }
        if !(self.peak_rabi.is_finite() && self.peak_rabi >= 0.0) {
            return Err(domain(format!("peak Rabi frequency must be non-negative, got {}", self.peak_rabi)));
        }
        Ok(())
    }

    /// Pulse area ∫Ω dt at unit energy (conserved by dispersion).
    pub fn area(&self) -> f64 {
        self.peak_rabi * gaussian_area_factor(self.fwhm_tl)
    }

    /// Peak Rabi frequency of the stretched pulse at the given energy scale.
    pub fn stretched_peak_rabi(&self, energy_scale: f64) -> f64 {
        let s = stretch(self);
        self.peak_rabi * (self.fwhm_tl / s.fwhm_out).sqrt() * energy_scale.sqrt()
    }
}

/// ∫ exp(-4 ln2 t² / 2 τ²) dt: the field envelope integral of unit peak.
fn gaussian_area_factor(fwhm: f64) -> f64 {
    fwhm * (PI / (2.0 * LN_2)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Stretch {
    /// Intensity FWHM after dispersion, s.
    pub fwhm_out: f64,
    /// Linear sweep rate of the instantaneous frequency, rad/s².
    pub chirp_rate: f64,
}

pub fn stretch(pulse: &ChirpedPulse) -> Stretch {
    let a = 2.0 * LN_2 / (pulse.fwhm_tl * pulse.fwhm_tl);
    let d = 2.0 * a * pulse.gdd;
    Stretch { fwhm_out: pulse.fwhm_tl * (1.0 + d * d).sqrt(), chirp_rate: 4.0 * a * a * pulse.gdd / (1.0 + d * d) }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TwoLevelOutcome {
    pub excitation_probability: f64,
    /// Largest |‖ψ‖² - 1| seen on accepted steps.
    pub max_norm_error: f64,
    pub stats: SolverStats,
}

/// Integrates the two-level Schrödinger equation (rotating frame, no decay)
/// through the chirped pulse, starting in the ground state.
///
/// H = ½ [[-Δ(t), Ω(t)], [Ω(t), Δ(t)]] with Ω(t) the stretched field envelope
/// and Δ(t) = Δ₀ + β t. `solver_tol` is the requested accuracy of the
/// returned probability.
pub fn evolve_two_level(pulse: &ChirpedPulse, energy_scale: f64, solver_tol: f64) -> Result<TwoLevelOutcome> {
    pulse.validate()?;
    if !(energy_scale.is_finite() && energy_scale >= 0.0) {
        return Err(domain(format!("energy scale must be non-negative, got {energy_scale}")));
    }
    if !(solver_tol > 0.0 && solver_tol < 1.0) {
        return Err(domain(format!("solver tolerance must lie in (0, 1), got {solver_tol}")));
    }
    let stats0 = SolverStats::default();
    if energy_scale == 0.0 || pulse.peak_rabi == 0.0 {
        return Ok(TwoLevelOutcome { excitation_probability: 0.0, max_norm_error: 0.0, stats: stats0 });
    }
    let s = stretch(pulse);
    let peak = pulse.stretched_peak_rabi(energy_scale);
    let width = 2.0 * LN_2 / (s.fwhm_out * s.fwhm_out);
    let beta = s.chirp_rate;
    let offset = pulse.detuning_offset;
    // interaction frame: the detuning phase is carried analytically so the
    // state only moves while the envelope is on
    let rhs = |t: f64, y: &[f64; 4]| {
        let om = 0.5 * peak * (-width * t * t).exp();
        let (sn, cs) = (offset * t + 0.5 * beta * t * t).sin_cos();
        [
            om * (cs * y[3] - sn * y[2]),
            -om * (cs * y[2] + sn * y[3]),
            om * (cs * y[1] + sn * y[0]),
            -om * (cs * y[0] - sn * y[1]),
        ]
    };
    let half = WINDOW_FWHM * s.fwhm_out;
    let mut max_norm_error = 0.0_f64;
    let (y, stats) = ode::integrate(
        rhs,
        -half,
        half,
        [1.0, 0.0, 0.0, 0.0],
        Tolerance::uniform(solver_tol * LOCAL_TOL_FRACTION),
        MAX_STEPS,
        |_, y| {
            let n = y.iter().map(|v| v * v).sum::<f64>();
            max_norm_error = max_norm_error.max((n - 1.0).abs());
        },
    )?;
    let pe = y[2] * y[2] + y[3] * y[3];
    Ok(TwoLevelOutcome { excitation_probability: pe.clamp(0.0, 1.0), max_norm_error, stats })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScanPoint {
    pub energy_scale: f64,
    pub excitation_probability: f64,
    pub max_norm_error: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RapScanResult {
    pub points: Vec<ScanPoint>,
    pub solver_tol: f64,
    /// Widest contiguous run of grid points with p ≥ [`PLATEAU_THRESHOLD`],
    /// as (first energy, last energy).
    pub plateau: Option<(f64, f64)>,
}

impl RapScanResult {
    /// Ratio of the plateau's upper to lower energy, 1 for a single point.
    pub fn plateau_ratio(&self) -> Option<f64> {
        self.plateau.and_then(|(lo, hi)| if lo > 0.0 { Some(hi / lo) } else { None })
    }

    pub fn total_steps(&self) -> usize {
        self.points.iter().map(|p| p.steps).sum()
    }

    pub fn max_norm_error(&self) -> f64 {
        self.points.iter().map(|p| p.max_norm_error).fold(0.0, f64::max)
    }
}

/// Geometric energy grid from `lo` to `hi` with `n` points.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return alloc::vec![lo];
    }
    let (l, h) = (lo.ln(), hi.ln());
    (0..n).map(|i| (l + (h - l) * i as f64 / (n - 1) as f64).exp()).collect()
}

pub fn rap_scan(pulse: &ChirpedPulse, energy_grid: &[f64], solver_tol: f64) -> Result<RapScanResult> {
    if energy_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(domain("energy grid must be non-decreasing"));
    }
    let mut points = Vec::with_capacity(energy_grid.len());
    for &e in energy_grid {
        let out = evolve_two_level(pulse, e, solver_tol)?;
        points.push(ScanPoint {
            energy_scale: e,
            excitation_probability: out.excitation_probability,
            max_norm_error: out.max_norm_error,
            steps: out.stats.accepted,
        });
    }
    let plateau = widest_plateau(&points);
    Ok(RapScanResult { points, solver_tol, plateau })
}

fn widest_plateau(points: &[ScanPoint]) -> Option<(f64, f64)> {
    let mut best: Option<(usize, usize)> = None;
    let mut start = None;
    for (i, p) in points.iter().enumerate() {
        if p.excitation_probability >= PLATEAU_THRESHOLD {
            let s = *start.get_or_insert(i);
            let wider = match best {
                None => true,
                Some((bs, be)) => {
                    let ratio = |a: usize, b: usize| points[b].energy_scale / points[a].energy_scale;
                    ratio(s, i) > ratio(bs, be)
                }
            };
            if wider {
                best = Some((s, i));
            }
        } else {
            start = None;
        }
    }
    best.map(|(s, e)| (points[s].energy_scale, points[e].energy_scale))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_dispersion_no_stretch() {
        let p = ChirpedPulse::with_pi_area(1e-12, 0.0);
        let s = stretch(&p);
        assert_eq!(s.fwhm_out, 1e-12);
        assert_eq!(s.chirp_rate, 0.0);
    }

    #[test]
    fn five_ps2_stretches_to_13_9_ps() {
        let s = stretch(&ChirpedPulse::default());
        assert!((s.fwhm_out * 1e12 - 13.899).abs() < 1e-3, "{}", s.fwhm_out);
        assert!(s.chirp_rate > 0.0);
        let neg = stretch(&ChirpedPulse::with_pi_area(1e-12, -5e-24));
        assert_eq!(neg.chirp_rate, -s.chirp_rate);
    }

    #[test]
    fn large_gdd_asymptote() {
        let p = ChirpedPulse::with_pi_area(1e-12, 1e-20);
        let s = stretch(&p);
        let asym = 4.0 * LN_2 * p.gdd / p.fwhm_tl;
        assert!((s.fwhm_out - asym).abs() / asym < 1e-9);
    }

    #[test]
    fn zero_energy_stays_in_ground_state() {
        let out = evolve_two_level(&ChirpedPulse::default(), 0.0, 1e-10).unwrap();
        assert_eq!(out.excitation_probability, 0.0);
    }

    #[test]
    fn resonant_pi_pulse_inverts() {
        let p = ChirpedPulse::with_pi_area(1e-12, 0.0);
        assert!((p.area() - PI).abs() < 1e-12);
        let out = evolve_two_level(&p, 1.0, 1e-11).unwrap();
        assert!((out.excitation_probability - 1.0).abs() < 1e-8, "{}", out.excitation_probability);
        assert!(out.max_norm_error < 1e-8);
    }

    #[test]
    fn resonant_area_theorem() {
        // Unchirped pulse: P = sin²(A/2) with A = π sqrt(E).
        let p = ChirpedPulse::with_pi_area(1e-12, 0.0);
        for e in [0.1, 0.5, 2.0] {
            let out = evolve_two_level(&p, e, 1e-11).unwrap();
            let expected = (PI * e.sqrt() / 2.0).sin().powi(2);
            assert!((out.excitation_probability - expected).abs() < 1e-8);
        }
    }

    #[test]
    fn chirp_sign_symmetry() {
        let up = ChirpedPulse::default();
        let down = ChirpedPulse { gdd: -up.gdd, ..up };
        for e in [0.3, 1.0, 4.0] {
            let a = evolve_two_level(&up, e, 1e-10).unwrap().excitation_probability;
            let b = evolve_two_level(&down, e, 1e-10).unwrap().excitation_probability;
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn tolerance_convergence() {
        let p = ChirpedPulse::default();
        let tol = 1e-9;
        let a = evolve_two_level(&p, 1.0, tol).unwrap().excitation_probability;
        let b = evolve_two_level(&p, 1.0, tol / 2.0).unwrap().excitation_probability;
        assert!((a - b).abs() < 10.0 * tol, "{a} {b}");
    }

    #[test]
    fn scan_rejects_decreasing_grid() {
        assert!(rap_scan(&ChirpedPulse::default(), &[1.0, 0.5], 1e-8).is_err());
    }

    #[test]
    fn scan_of_zero_grid_is_zero() {
        let r = rap_scan(&ChirpedPulse::default(), &[0.0, 0.0, 0.0], 1e-8).unwrap();
        assert!(r.points.iter().all(|p| p.excitation_probability == 0.0));
        assert!(r.plateau.is_none());
    }

    #[test]
    fn plateau_picks_widest_run() {
        let mk =
            |e: f64, p: f64| ScanPoint { energy_scale: e, excitation_probability: p, max_norm_error: 0.0, steps: 0 };
        let pts = [mk(1.0, 0.995), mk(2.0, 0.5), mk(3.0, 0.991), mk(6.0, 0.999), mk(20.0, 0.992), mk(30.0, 0.1)];
        assert_eq!(widest_plateau(&pts), Some((3.0, 20.0)));
    }
}
