//! Pulse-to-pulse phase shifts from Michelson interference areas.
//!
//! Delaying one arm by a pulse period makes pulse `i` interfere with pulse
//! `i + 1`. The net phase of that pair is `Δφᵢ + kΔx`, and with `Δx` random
//! between measurements the interference areas of two pairs trace
//! `u = u₀ + A_u cos θ`, `v = v₀ + A_v cos(θ + Δφ)`. In centered, normalized
//! coordinates this is the conic `ũ² + ṽ² - 2ũṽ cos Δφ = sin² Δφ`, so
//! `cos Δφ = -b / 2√(ac)` for any conic `a u² + b uv + c v² + d u + e v + f`
//! fitted to the points.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, Result};
use crate::linalg::{self, Mat3};

pub const MIN_POINTS: usize = 6;
/// 1 - |correlation| below this is treated as a line segment.
const COLLINEAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PulsePairSamples {
    pub points: Vec<(f64, f64)>,
}

impl PulsePairSamples {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if let Some(i) = points.iter().position(|(u, v)| !u.is_finite() || !v.is_finite()) {
            return Err(domain(format!("sample {i} is not finite")));
        }
        Ok(Self { points })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SynthesisParams {
    pub amp_u: f64,
    pub amp_v: f64,
    pub offset_u: f64,
    pub offset_v: f64,
    pub delta_phi: f64,
    pub n: usize,
    /// Standard deviation of the multiplicative Gaussian noise, as a fraction.
    pub noise: f64,
    pub rng_seed: u64,
}

pub fn synthesize(p: &SynthesisParams) -> Result<PulsePairSamples> {
    if !(p.amp_u > 0.0 && p.amp_v > 0.0) {
        return Err(domain("amplitudes must be positive"));
    }
    if p.n < MIN_POINTS {
        return Err(domain(format!("need at least {MIN_POINTS} samples, got {}", p.n)));
    }
    if !(p.noise >= 0.0 && p.noise.is_finite()) {
        return Err(domain("noise fraction must be non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.rng_seed);
    let points = (0..p.n)
        .map(|_| {
            let theta = rng.random::<f64>() * TAU;
            let mut u = p.offset_u + p.amp_u * theta.cos();
            let mut v = p.offset_v + p.amp_v * (theta + p.delta_phi).cos();
            if p.noise > 0.0 {
                let nu: f64 = rng.sample(StandardNormal);
                let nv: f64 = rng.sample(StandardNormal);
                u *= 1.0 + p.noise * nu;
                v *= 1.0 + p.noise * nv;
            }
            (u, v)
        })
        .collect();
    PulsePairSamples::new(points)
}

/// General conic `a u² + b uv + c v² + d u + e v + f = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Conic {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
}

impl Conic {
    pub fn eval(&self, u: f64, v: f64) -> f64 {
        self.a * u * u + self.b * u * v + self.c * v * v + self.d * u + self.e * v + self.f
    }

    /// b² - 4ac; negative for ellipses.
    pub fn discriminant(&self) -> f64 {
        self.b * self.b - 4.0 * self.a * self.c
    }

    fn scaled(self, k: f64) -> Self {
        Conic { a: self.a * k, b: self.b * k, c: self.c * k, d: self.d * k, e: self.e * k, f: self.f * k }
    }

    /// Rescales so that a + c = 1.
    fn normalized(self) -> Self {
        let s = self.a + self.c;
        if s == 0.0 {
            self
        } else {
            self.scaled(1.0 / s)
        }
    }

    /// Maps a conic in `((u - mu)/su, (v - mv)/sv)` back to `(u, v)`.
    fn denormalize(self, norm: &Normalization) -> Self {
        let Normalization { mu, mv, su, sv } = *norm;
        let a = self.a / (su * su);
        let b = self.b / (su * sv);
        let c = self.c / (sv * sv);
        let d0 = self.d / su;
        let e0 = self.e / sv;
        Conic {
            a,
            b,
            c,
            d: -2.0 * a * mu - b * mv + d0,
            e: -2.0 * c * mv - b * mu + e0,
            f: a * mu * mu + b * mu * mv + c * mv * mv - d0 * mu - e0 * mv + self.f,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EllipseFitResult {
    /// Fitted conic in the input coordinates, scaled so that a + c = 1.
    pub conic: Conic,
    /// Δφ in [0, π]; the sign is not observable.
    pub relative_phase: f64,
    /// The points lie on a line segment (Δφ ∈ {0, π}); `conic` is then the
    /// doubled line.
    pub degenerate: bool,
    /// RMS of the algebraic residual of `conic` over the samples.
    pub residual_rms: f64,
}

#[derive(Debug, Clone, Copy)]
struct Normalization {
    mu: f64,
    mv: f64,
    su: f64,
    sv: f64,
}

/// Direct ellipse-specific least-squares fit in the numerically stable
/// block form: minimize ‖D x‖² subject to 4ac - b² = 1, with the linear
/// part eliminated so only a 3x3 eigenproblem remains.
pub fn fit_ellipse(samples: &PulsePairSamples) -> Result<EllipseFitResult> {
    let pts = &samples.points;
    if pts.len() < MIN_POINTS {
        return Err(domain(format!("need at least {MIN_POINTS} points for a conic fit, got {}", pts.len())));
    }
    let n = pts.len() as f64;
    let mu = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mv = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let var_u = pts.iter().map(|p| (p.0 - mu) * (p.0 - mu)).sum::<f64>() / n;
    let var_v = pts.iter().map(|p| (p.1 - mv) * (p.1 - mv)).sum::<f64>() / n;
    let cov = pts.iter().map(|p| (p.0 - mu) * (p.1 - mv)).sum::<f64>() / n;
    let scale_floor = 1e-300;
    if var_u <= scale_floor || var_v <= scale_floor {
        // axis-parallel segment; no phase information
        let conic = if var_u <= scale_floor {
            Conic { a: 1.0, b: 0.0, c: 0.0, d: -2.0 * mu, e: 0.0, f: mu * mu }
        } else {
            Conic { a: 0.0, b: 0.0, c: 1.0, d: 0.0, e: -2.0 * mv, f: mv * mv }
        };
        return Ok(finish(pts, conic, PI / 2.0, true));
    }
    let norm = Normalization { mu, mv, su: var_u.sqrt(), sv: var_v.sqrt() };
    let rho = cov / (norm.su * norm.sv);
    if 1.0 - rho.abs() < COLLINEAR_TOL {
        return Ok(line_fit(pts, &norm, rho));
    }

    let mut s1: Mat3 = [[0.0; 3]; 3];
    let mut s2: Mat3 = [[0.0; 3]; 3];
    let mut s3: Mat3 = [[0.0; 3]; 3];
    for &(u, v) in pts {
        let x = (u - norm.mu) / norm.su;
        let y = (v - norm.mv) / norm.sv;
        let q = [x * x, x * y, y * y];
        let l = [x, y, 1.0];
        for i in 0..3 {
            for j in 0..3 {
                s1[i][j] += q[i] * q[j];
                s2[i][j] += q[i] * l[j];
                s3[i][j] += l[i] * l[j];
            }
        }
    }
    let Some(s3_inv) = linalg::inverse(&s3) else {
        return Ok(line_fit(pts, &norm, rho));
    };
    // T = -S3⁻¹ S2ᵀ; reduced scatter M = S1 + S2 T
    let mut t = linalg::mul(&s3_inv, &linalg::transpose(&s2));
    for row in t.iter_mut() {
        for v in row.iter_mut() {
            *v = -*v;
        }
    }
    let st = linalg::mul(&s2, &t);
    let mut m = s1;
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] += st[i][j];
        }
    }
    // premultiply by the inverse of the quadratic constraint block
    let reduced = [
        [m[2][0] / 2.0, m[2][1] / 2.0, m[2][2] / 2.0],
        [-m[1][0], -m[1][1], -m[1][2]],
        [m[0][0] / 2.0, m[0][1] / 2.0, m[0][2] / 2.0],
    ];
    let best = linalg::real_eigenpairs(&reduced)
        .into_iter()
        .filter(|(_, v)| 4.0 * v[0] * v[2] - v[1] * v[1] > 0.0)
        .map(|(_, v)| {
            let lin = linalg::mul_vec(&t, &v);
            let cost = quad_form(&m, &v) / (4.0 * v[0] * v[2] - v[1] * v[1]);
            (cost, v, lin)
        })
        .min_by(|a, b| a.0.total_cmp(&b.0));
    let Some((_, q, l)) = best else {
        return Ok(line_fit(pts, &norm, rho));
    };
    let local = Conic { a: q[0], b: q[1], c: q[2], d: l[0], e: l[1], f: l[2] };
    let phase = phase_of(&local);
    let conic = local.denormalize(&norm).normalized();
    Ok(finish(pts, conic, phase, false))
}

fn quad_form(m: &Mat3, v: &[f64; 3]) -> f64 {
    let mv = linalg::mul_vec(m, v);
    v[0] * mv[0] + v[1] * mv[1] + v[2] * mv[2]
}

fn phase_of(conic: &Conic) -> f64 {
    let ac = conic.a * conic.c;
    if ac <= 0.0 {
        return if conic.b > 0.0 { PI } else { 0.0 };
    }
    let sign = if conic.a + conic.c < 0.0 { -1.0 } else { 1.0 };
    (-sign * conic.b / (2.0 * ac.sqrt())).clamp(-1.0, 1.0).acos()
}

/// Doubled line `(ṽ - sũ)² = 0` through the centroid, s = sign of the correlation.
fn line_fit(pts: &[(f64, f64)], norm: &Normalization, rho: f64) -> EllipseFitResult {
    let s = if rho >= 0.0 { 1.0 } else { -1.0 };
    let local = Conic { a: 1.0, b: -2.0 * s, c: 1.0, d: 0.0, e: 0.0, f: 0.0 };
    let phase = if s > 0.0 { 0.0 } else { PI };
    finish(pts, local.denormalize(norm).normalized(), phase, true)
}

fn finish(pts: &[(f64, f64)], conic: Conic, relative_phase: f64, degenerate: bool) -> EllipseFitResult {
    let ss = pts.iter().map(|&(u, v)| conic.eval(u, v).powi(2)).sum::<f64>();
    EllipseFitResult { conic, relative_phase, degenerate, residual_rms: (ss / pts.len() as f64).sqrt() }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhaseEstimate {
    /// Δφ ∈ [0, π].
    pub delta_phi: f64,
    /// Fit was a line segment: Δφ is 0 or π, chosen by the slope sign, and
    /// the in-between branch is not resolvable.
    pub ambiguous: bool,
}

pub fn phase_from_ellipse(fit: &EllipseFitResult) -> PhaseEstimate {
    if fit.degenerate {
        return PhaseEstimate { delta_phi: fit.relative_phase, ambiguous: true };
    }
    PhaseEstimate { delta_phi: phase_of(&fit.conic), ambiguous: false }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(delta_phi: f64, noise: f64, seed: u64) -> SynthesisParams {
        SynthesisParams {
            amp_u: 1.0,
            amp_v: 0.8,
            offset_u: 1.0,
            offset_v: 0.8,
            delta_phi,
            n: 200,
            noise,
            rng_seed: seed,
        }
    }

    #[test]
    fn in_phase_points_are_collinear() {
        let p = SynthesisParams { delta_phi: 0.0, ..params(0.0, 0.0, 1) };
        let s = synthesize(&p).unwrap();
        for &(u, v) in &s.points {
            let line = p.offset_v + (p.amp_v / p.amp_u) * (u - p.offset_u);
            assert!((v - line).abs() < 1e-12);
        }
        let fit = fit_ellipse(&s).unwrap();
        assert!(fit.degenerate);
        let est = phase_from_ellipse(&fit);
        assert!(est.ambiguous);
        assert_eq!(est.delta_phi, 0.0);
    }

    #[test]
    fn antiphase_points_give_pi_branch() {
        let fit = fit_ellipse(&synthesize(&params(PI, 0.0, 4)).unwrap()).unwrap();
        assert!(fit.degenerate);
        assert_eq!(phase_from_ellipse(&fit).delta_phi, PI);
    }

    #[test]
    fn quadrature_points_lie_on_unit_circle() {
        let p = SynthesisParams { amp_u: 1.0, amp_v: 1.0, offset_u: 0.0, offset_v: 0.0, ..params(PI / 2.0, 0.0, 2) };
        let s = synthesize(&p).unwrap();
        assert!(s.points.iter().all(|(u, v)| (u * u + v * v - 1.0).abs() < 1e-12));
        let fit = fit_ellipse(&s).unwrap();
        assert!(!fit.degenerate);
        assert!(fit.conic.b.abs() < 1e-9);
        assert!((fit.conic.a - fit.conic.c).abs() < 1e-9);
        assert!((phase_from_ellipse(&fit).delta_phi - PI / 2.0).abs() < 1e-9);
    }

    #[test]
    fn centered_identity_holds_pointwise() {
        for dphi in [0.3, 1.1, 2.9] {
            let p = params(dphi, 0.0, 3);
            for (u, v) in synthesize(&p).unwrap().points {
                let x = (u - p.offset_u) / p.amp_u;
                let y = (v - p.offset_v) / p.amp_v;
                let lhs = x * x + y * y - 2.0 * x * y * dphi.cos();
                assert!((lhs - dphi.sin().powi(2)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn noiseless_fit_interpolates() {
        let s = synthesize(&params(0.7, 0.0, 9)).unwrap();
        let fit = fit_ellipse(&s).unwrap();
        assert!(fit.residual_rms < 1e-10, "{}", fit.residual_rms);
        assert!(fit.conic.discriminant() < 0.0);
        assert!((fit.conic.a + fit.conic.c - 1.0).abs() < 1e-12);
        assert!((phase_from_ellipse(&fit).delta_phi - 0.7).abs() < 1e-6);
    }

    #[test]
    fn too_few_points() {
        let s = PulsePairSamples::new(alloc::vec![(0.0, 1.0); 5]).unwrap();
        assert!(matches!(fit_ellipse(&s), Err(crate::Error::Domain(_))));
        assert!(synthesize(&SynthesisParams { n: 5, ..params(0.5, 0.0, 1) }).is_err());
    }

    #[test]
    fn non_finite_samples_rejected() {
        assert!(PulsePairSamples::new(alloc::vec![(f64::NAN, 1.0)]).is_err());
    }

    #[test]
    fn synthesis_is_deterministic() {
        assert_eq!(synthesize(&params(1.0, 0.05, 42)).unwrap(), synthesize(&params(1.0, 0.05, 42)).unwrap());
        assert_ne!(synthesize(&params(1.0, 0.05, 42)).unwrap(), synthesize(&params(1.0, 0.05, 43)).unwrap());
    }

    #[test]
    fn residual_is_permutation_invariant() {
        let s = synthesize(&params(1.2, 0.05, 5)).unwrap();
        let mut rev = s.clone();
        rev.points.reverse();
        let a = fit_ellipse(&s).unwrap();
        let b = fit_ellipse(&rev).unwrap();
        assert!((a.residual_rms - b.residual_rms).abs() <= 1e-10 * a.residual_rms);
        assert!((a.relative_phase - b.relative_phase).abs() < 1e-10);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn noiseless_round_trip(dphi in 0.05f64..(PI - 0.05), seed in 0u64..1000,
                                    au in 0.1f64..10.0, av in 0.1f64..10.0,
                                    ou in -5.0f64..5.0, ov in -5.0f64..5.0) {
                let p = SynthesisParams { amp_u: au, amp_v: av, offset_u: ou, offset_v: ov,
                                          delta_phi: dphi, n: 50, noise: 0.0, rng_seed: seed };
                let fit = fit_ellipse(&synthesize(&p).unwrap()).unwrap();
                prop_assert!(!fit.degenerate);
                prop_assert!((phase_from_ellipse(&fit).delta_phi - dphi).abs() < 1e-6);
            }

            #[test]
            fn axis_scaling_leaves_phase(dphi in 0.1f64..3.0, k in 0.01f64..100.0, seed in 0u64..1000) {
                let s = synthesize(&SynthesisParams { noise: 0.05, rng_seed: seed, ..params(dphi, 0.05, seed) }).unwrap();
                let scaled = PulsePairSamples::new(s.points.iter().map(|&(u, v)| (k * u, v)).collect()).unwrap();
                let a = fit_ellipse(&s).unwrap();
                let b = fit_ellipse(&scaled).unwrap();
                prop_assert_eq!(a.degenerate, b.degenerate);
                prop_assert!((phase_from_ellipse(&a).delta_phi - phase_from_ellipse(&b).delta_phi).abs() < 1e-9);
            }
        }
    }
}
