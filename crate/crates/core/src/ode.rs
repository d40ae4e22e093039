//! Adaptive Dormand-Prince 5(4) integrator for small fixed-size systems.

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Tolerance {
    pub const fn uniform(tol: f64) -> Self {
        Self { rtol: tol, atol: tol }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolverStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// 5th order minus embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy<const N: usize>(y: &[f64; N], terms: &[(f64, &[f64; N])], h: f64) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Integrates `dy/dt = rhs(t, y)` from `t0` to `t1`. `observe` is called after
/// every accepted step with the new time and state.
pub fn integrate<const N: usize, F, O>(
    mut rhs: F,
    t0: f64,
    t1: f64,
    y0: [f64; N],
    tol: Tolerance,
    max_steps: usize,
    mut observe: O,
) -> Result<([f64; N], SolverStats)>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    O: FnMut(f64, &[f64; N]),
{
    let span = t1 - t0;
    let mut stats = SolverStats::default();
    if span == 0.0 {
        return Ok((y0, stats));
    }
    let dir = span.signum();
    let mut t = t0;
    let mut y = y0;
    let mut h = span.abs() * 1e-3;
    let h_min = span.abs() * 1e-14;
    let mut k1 = rhs(t, &y);
    stats.evaluations += 1;

    while (t1 - t) * dir > 0.0 {
        if stats.accepted + stats.rejected >= max_steps {
            return Err(Error::Integration { t, steps: stats.accepted, step: h, reason: "step budget exhausted" });
        }
        if h < h_min {
            return Err(Error::Integration { t, steps: stats.accepted, step: h, reason: "step size underflow" });
        }
        let last = h >= (t1 - t) * dir;
        let hs = if last { t1 - t } else { h * dir };

        let k2 = rhs(t + C2 * hs, &axpy(&y, &[(A21, &k1)], hs));
        let k3 = rhs(t + C3 * hs, &axpy(&y, &[(A31, &k1), (A32, &k2)], hs));
        let k4 = rhs(t + C4 * hs, &axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], hs));
        let k5 = rhs(t + C5 * hs, &axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], hs));
        let k6 = rhs(t + hs, &axpy(&y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], hs));
        let y_new = axpy(&y, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], hs);
        let k7 = rhs(t + hs, &y_new);
        stats.evaluations += 6;

        let mut err = 0.0_f64;
        for i in 0..N {
            let e = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
            err = err.max((e / scale).abs());
        }
        if !err.is_finite() {
            return Err(Error::Integration { t, steps: stats.accepted, step: h, reason: "non-finite state" });
        }

        if err <= 1.0 {
            t = if last { t1 } else { t + hs };
            y = y_new;
            k1 = k7;
            stats.accepted += 1;
            observe(t, &y);
        } else {
            stats.rejected += 1;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = hs.abs() * factor;
    }
    Ok((y, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let (y, stats) =
            integrate(|_, y: &[f64; 1]| [-y[0]], 0.0, 2.0, [1.0], Tolerance::uniform(1e-10), 10_000, |_, _| {})
                .unwrap();
        assert!((y[0] - (-2.0_f64).exp()).abs() < 1e-9);
        assert!(stats.accepted > 0);
    }

    #[test]
    fn harmonic_oscillator_backwards() {
        let (y, _) = integrate(
            |_, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            -3.0,
            [1.0, 0.0],
            Tolerance::uniform(1e-11),
            100_000,
            |_, _| {},
        )
        .unwrap();
        assert!((y[0] - 3.0_f64.cos()).abs() < 1e-9);
        assert!((y[1] - 3.0_f64.sin()).abs() < 1e-9);
    }

    #[test]
    fn step_budget_is_reported() {
        let r = integrate(|_, y: &[f64; 1]| [y[0]], 0.0, 10.0, [1.0], Tolerance::uniform(1e-12), 3, |_, _| {});
        assert!(matches!(r, Err(Error::Integration { .. })));
    }
}
