//! Search for short kick sequences that close both modes and reach the
//! target phase.
//!
//! The search is a genetic algorithm over variable-length lists of
//! `(slot, multiplicity)` genes. Every offspring is additionally polished by
//! a deterministic local step: a damped Gauss-Newton solve of the closure
//! and phase conditions in continuous time, snapping to the grid, a
//! slot-level hill climb and repeated time compression while the candidate
//! stays feasible.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::f64::consts::{FRAC_PI_4, PI, TAU};

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::consts::SQRT3;
use crate::error::{config, domain, Error, Result};
use crate::linalg;
use crate::model::{
    derive_parameters, error_from_sums, pair_kernel, reduced_angle, Kick, KickSequence, ModeParameters, TrapIonConfig,
    DEFAULT_MOMENTUM_FACTOR,
};

/// Largest search space [`exhaustive_small_search`] will enumerate.
pub const ENUMERATION_BUDGET: u128 = 100_000_000;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptimizerConfig {
    pub population_size: usize,
    pub generations: usize,
    /// Probability of each mutation operator firing on an offspring.
    pub mutation_rate: f64,
    pub max_kicks: usize,
    pub max_multiplicity: u32,
    /// Longest allowed sequence, trap periods.
    pub duration_budget: f64,
    /// Cap on the gate error ε. May be infinite.
    pub tolerance_eps: f64,
    /// Cap on the phase violation, rad. May be infinite.
    pub tolerance_phi: f64,
    pub rng_seed: u64,
    pub phase_target: f64,
    pub momentum_factor: f64,
    pub weight_eps: f64,
    pub weight_phi: f64,
    pub elitism: usize,
    pub tournament_size: usize,
    /// Phase branches `target + 2nπ` tried for n in `0..=max_phase_branch`.
    pub max_phase_branch: u32,
    /// Restricts bursts to slots `[0, slot_window)` instead of the window
    /// implied by `duration_budget`.
    pub slot_window: Option<u64>,
    /// Polish every offspring with the local solver.
    pub local_search: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            population_size: 48,
            generations: 60,
            mutation_rate: 0.3,
            max_kicks: 8,
            max_multiplicity: 4,
            duration_budget: 1.0,
            tolerance_eps: 1e-3,
            tolerance_phi: 1e-3,
            rng_seed: 0,
            phase_target: FRAC_PI_4,
            momentum_factor: DEFAULT_MOMENTUM_FACTOR,
            weight_eps: 1e3,
            weight_phi: 1e3,
            elitism: 2,
            tournament_size: 3,
            max_phase_branch: 8,
            slot_window: None,
            local_search: true,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(config("population_size must be at least 2"));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(config(format!("mutation_rate must lie in [0, 1], got {}", self.mutation_rate)));
        }
        if self.max_kicks == 0 || self.max_multiplicity == 0 {
            return Err(config("max_kicks and max_multiplicity must be positive"));
        }
        if !(self.duration_budget.is_finite() && self.duration_budget > 0.0) {
            return Err(config(format!("duration_budget must be positive, got {}", self.duration_budget)));
        }
        for (name, tol) in [("tolerance_eps", self.tolerance_eps), ("tolerance_phi", self.tolerance_phi)] {
            if tol.is_nan() || tol <= 0.0 {
                return Err(config(format!("{name} must be positive, got {tol}")));
            }
        }
        if !self.phase_target.is_finite() {
            return Err(config("phase_target must be finite"));
        }
        if !(self.momentum_factor.is_finite() && self.momentum_factor > 0.0) {
            return Err(config("momentum_factor must be positive"));
        }
        for (name, w) in [("weight_eps", self.weight_eps), ("weight_phi", self.weight_phi)] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(config(format!("{name} must be finite and non-negative")));
            }
        }
        if self.elitism >= self.population_size {
            return Err(config("elitism must be smaller than population_size"));
        }
        if self.tournament_size == 0 {
            return Err(config("tournament_size must be positive"));
        }
        if self.slot_window == Some(0) {
            return Err(config("slot_window must be positive"));
        }
        Ok(())
    }

    /// Number of usable slots: bursts must lie in `[0, window)`.
    pub fn window_slots(&self, cfg: &TrapIonConfig) -> u64 {
        self.slot_window.unwrap_or_else(|| {
            (self.duration_budget * cfg.trap_period() / cfg.grid_period() * (1.0 + 1e-12)).floor() as u64 + 1
        })
    }

    /// min over branches of ||φ| - (target + 2nπ)|.
    pub fn phase_violation(&self, phase: f64) -> f64 {
        (0..=self.max_phase_branch)
            .map(|n| (phase.abs() - (self.phase_target + TAU * f64::from(n))).abs())
            .fold(f64::INFINITY, f64::min)
    }

    fn branch_target(&self, phase: f64) -> f64 {
        (0..=self.max_phase_branch)
            .map(|n| self.phase_target + TAU * f64::from(n))
            .min_by(|a, b| (phase.abs() - a).abs().total_cmp(&(phase.abs() - b).abs()))
            .unwrap_or(self.phase_target)
    }
}

/// An evaluated sequence.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Candidate {
    pub sequence: KickSequence,
    pub fitness: f64,
    pub feasible: bool,
    pub gate_error: f64,
    pub phase: f64,
    pub phase_violation: f64,
    pub duration_periods: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Score {
    fitness: f64,
    eps: f64,
    phase: f64,
    violation: f64,
    duration_periods: f64,
    feasible: bool,
}

impl Score {
    fn cmp(&self, other: &Self) -> Ordering {
        self.fitness.total_cmp(&other.fitness).then(self.eps.total_cmp(&other.eps))
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Individual {
    kicks: Vec<Kick>,
    score: Score,
}

impl Individual {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score.cmp(&other.score).then_with(|| self.kicks.cmp(&other.kicks))
    }
}

/// Scores slot lists with the same arithmetic as the core model.
struct Evaluator<'a> {
    opt: &'a OptimizerConfig,
    params: ModeParameters,
    grid: f64,
    trap_period: f64,
    window: u64,
    offset: f64,
}

impl<'a> Evaluator<'a> {
    fn new(opt: &'a OptimizerConfig, cfg: &TrapIonConfig) -> Result<Self> {
        opt.validate()?;
        let params = derive_parameters(cfg)?;
        let window = opt.window_slots(cfg);
        let grid = cfg.grid_period();
        let trap_period = cfg.trap_period();
        let offset = opt.duration_budget.max(window.saturating_sub(1) as f64 * grid / trap_period);
        Ok(Self { opt, params, grid, trap_period, window, offset })
    }

    fn score(&self, kicks: &[Kick]) -> Score {
        let mut sc = Complex64::new(0.0, 0.0);
        let mut ss = Complex64::new(0.0, 0.0);
        for k in kicks {
            let t = k.slot as f64 * self.grid;
            let w = f64::from(k.multiplicity);
            sc += Complex64::from_polar(w, -reduced_angle(self.params.omega_c, t));
            ss += Complex64::from_polar(w, -reduced_angle(self.params.omega_s, t));
        }
        let eps = error_from_sums(&self.params, self.opt.momentum_factor, sc, ss);
        let alpha = self.opt.momentum_factor * self.params.alpha_c;
        let mut sum = 0.0;
        for j in 1..kicks.len() {
            for k in 0..j {
                let tau = (kicks[j].slot - kicks[k].slot) as f64 * self.grid;
                sum += f64::from(kicks[j].multiplicity)
                    * f64::from(kicks[k].multiplicity)
                    * pair_kernel(self.params.omega_c, tau);
            }
        }
        let phase = alpha * alpha * sum;
        let span = match (kicks.first(), kicks.last()) {
            (Some(a), Some(b)) => b.slot - a.slot,
            _ => 0,
        };
        let duration_periods = span as f64 * self.grid / self.trap_period;
        self.finish(eps, phase, duration_periods)
    }

    fn finish(&self, eps: f64, phase: f64, duration_periods: f64) -> Score {
        let violation = self.opt.phase_violation(phase);
        let feasible = eps <= self.opt.tolerance_eps && violation <= self.opt.tolerance_phi;
        let mut fitness = duration_periods
            + self.opt.weight_eps * (eps - self.opt.tolerance_eps).max(0.0)
            + self.opt.weight_phi * (violation - self.opt.tolerance_phi).max(0.0);
        if !feasible {
            fitness += self.offset;
        }
        Score { fitness, eps, phase, violation, duration_periods, feasible }
    }

    fn individual(&self, kicks: Vec<Kick>) -> Individual {
        let score = self.score(&kicks);
        Individual { kicks, score }
    }

    fn candidate(&self, ind: &Individual) -> Result<Candidate> {
        let sequence = KickSequence::new(ind.kicks.clone(), self.opt.momentum_factor, self.grid)?;
        Ok(Candidate {
            sequence,
            fitness: ind.score.fitness,
            feasible: ind.score.feasible,
            gate_error: ind.score.eps,
            phase: ind.score.phase,
            phase_violation: ind.score.violation,
            duration_periods: ind.score.duration_periods,
        })
    }

    /// Sorts, clamps multiplicities, moves the first kick to slot 0, pushes
    /// overlapping bursts apart and drops kicks that leave the window.
    fn repair(&self, mut kicks: Vec<Kick>) -> Vec<Kick> {
        kicks.sort();
        let z_max = self.opt.max_multiplicity;
        let first = kicks.first().map_or(0, |k| k.slot);
        let mut out: Vec<Kick> = Vec::with_capacity(kicks.len());
        for k in kicks {
            let z = k.multiplicity.clamp(1, z_max);
            let mut slot = k.slot - first;
            if let Some(prev) = out.last() {
                slot = slot.max(prev.slot + u64::from(prev.multiplicity));
            }
            if slot + u64::from(z) > self.window || out.len() == self.opt.max_kicks {
                break;
            }
            out.push(Kick::new(slot, z));
        }
        if out.is_empty() {
            out.push(Kick::new(0, 1));
        }
        out
    }

    fn fits(&self, kicks: &[Kick]) -> bool {
        kicks.first().is_some_and(|k| k.slot == 0)
            && kicks.windows(2).all(|w| w[1].slot >= w[0].slot + u64::from(w[0].multiplicity))
            && kicks.last().is_some_and(|k| k.slot + u64::from(k.multiplicity) <= self.window)
    }

    /// Radians of center-of-mass rotation per slot.
    fn slot_angle(&self) -> f64 {
        self.params.omega_c * self.grid
    }
}

/// Damped Gauss-Newton on the closure and phase residuals over kick angles
/// `x = ω t` with `x[0] = 0` held fixed. Steps that reorder kicks, leave the
/// window or squeeze bursts together are rejected.
struct ContinuousSolver<'a> {
    ev: &'a Evaluator<'a>,
    weights: Vec<f64>,
    use_closure: bool,
    use_phase: bool,
    sign: f64,
    target: f64,
}

impl<'a> ContinuousSolver<'a> {
    fn residuals(&self, x: &[f64]) -> Vec<f64> {
        let p = &self.ev.params;
        let m = self.ev.opt.momentum_factor;
        let mut r = Vec::with_capacity(5);
        if self.use_closure {
            let (mut sc, mut ss) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
            for (&xi, &w) in x.iter().zip(&self.weights) {
                sc += Complex64::from_polar(w, -xi);
                ss += Complex64::from_polar(w, -SQRT3 * xi);
            }
            let (ac, as_) = (2.0 * m * p.alpha_c, 2.0 * m * p.alpha_s);
            r.extend_from_slice(&[ac * sc.re, ac * sc.im, as_ * ss.re, as_ * ss.im]);
        }
        if self.use_phase {
            let alpha = m * p.alpha_c;
            let mut sum = 0.0;
            for j in 1..x.len() {
                for k in 0..j {
                    let y = x[j] - x[k];
                    sum += self.weights[j] * self.weights[k] * ((SQRT3 * y).sin() / SQRT3 - y.sin());
                }
            }
            r.push(self.sign * alpha * alpha * sum - self.target);
        }
        r
    }

    /// Jacobian with respect to `x[1..]`, row-major `rows x (n - 1)`.
    fn jacobian(&self, x: &[f64], rows: usize) -> Vec<f64> {
        let p = &self.ev.params;
        let m = self.ev.opt.momentum_factor;
        let n = x.len();
        let cols = n - 1;
        let mut jac = vec![0.0; rows * cols];
        for c in 0..cols {
            let i = c + 1;
            let w = self.weights[i];
            let mut row = 0;
            if self.use_closure {
                let (ac, as_) = (2.0 * m * p.alpha_c, 2.0 * m * p.alpha_s);
                let (s1, c1) = x[i].sin_cos();
                let (s3, c3) = (SQRT3 * x[i]).sin_cos();
                jac[c] = -ac * w * s1;
                jac[cols + c] = -ac * w * c1;
                jac[2 * cols + c] = -as_ * SQRT3 * w * s3;
                jac[3 * cols + c] = -as_ * SQRT3 * w * c3;
                row = 4;
            }
            if self.use_phase {
                let alpha = m * p.alpha_c;
                let dk = |y: f64| (SQRT3 * y).cos() - y.cos();
                let mut d = 0.0;
                for k in 0..n {
                    if k < i {
                        d += w * self.weights[k] * dk(x[i] - x[k]);
                    } else if k > i {
                        d -= w * self.weights[k] * dk(x[k] - x[i]);
                    }
                }
                jac[row * cols + c] = self.sign * alpha * alpha * d;
            }
        }
        jac
    }

    fn admissible(&self, x: &[f64]) -> bool {
        let step = self.ev.slot_angle();
        let max = (self.ev.window as f64 - self.weights.last().copied().unwrap_or(1.0)) * step;
        x.windows(2).zip(&self.weights).all(|(w, &z)| w[1] - w[0] >= z * step) && x.last().is_some_and(|&v| v <= max)
    }

    fn solve(&self, mut x: Vec<f64>) -> Vec<f64> {
        let n = x.len();
        if n < 2 || !(self.use_closure || self.use_phase) {
            return x;
        }
        let cost = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
        let mut r = self.residuals(&x);
        let mut c = cost(&r);
        let rows = r.len();
        let cols = n - 1;
        let mut lambda = 1e-3;
        for _ in 0..200 {
            if c < 1e-24 {
                break;
            }
            let jac = self.jacobian(&x, rows);
            let mut jtj = vec![0.0; cols * cols];
            let mut jtr = vec![0.0; cols];
            for a in 0..cols {
                for b in 0..cols {
                    jtj[a * cols + b] = (0..rows).map(|k| jac[k * cols + a] * jac[k * cols + b]).sum();
                }
                jtr[a] = -(0..rows).map(|k| jac[k * cols + a] * r[k]).sum::<f64>();
            }
            let scale = (0..cols).map(|a| jtj[a * cols + a]).fold(0.0, f64::max).max(1e-300);
            let mut improved = false;
            while lambda < 1e10 {
                let mut a = jtj.clone();
                for d in 0..cols {
                    a[d * cols + d] += lambda * scale;
                }
                let Some(delta) = linalg::solve(a, jtr.clone()) else {
                    lambda *= 4.0;
                    continue;
                };
                let mut trial = x.clone();
                for (t, d) in trial[1..].iter_mut().zip(&delta) {
                    *t += d;
                }
                if self.admissible(&trial) {
                    let rt = self.residuals(&trial);
                    let ct = cost(&rt);
                    if ct < c {
                        let rel = (c - ct) / c;
                        x = trial;
                        r = rt;
                        c = ct;
                        lambda = (lambda / 3.0).max(1e-12);
                        improved = rel > 1e-12;
                        break;
                    }
                }
                lambda *= 4.0;
            }
            if !improved {
                break;
            }
        }
        x
    }
}

/// Kick times (s, starting at 0) of the phasor-balanced seed with
/// `n_kicks` unit kicks.
///
/// Even counts place antiphase pairs at ω whose offsets spread evenly in
/// stretch-mode phase, which closes both modes exactly. Odd counts start
/// from even spacing at ω and correct both modes by least squares.
pub fn continuous_seed_times(cfg: &TrapIonConfig, n_kicks: usize) -> Result<Vec<f64>> {
    if n_kicks < 2 {
        return Err(domain(format!("closure needs at least 2 kicks, got {n_kicks}")));
    }
    let params = derive_parameters(cfg)?;
    let mut x: Vec<f64> = if n_kicks == 2 {
        vec![0.0, PI]
    } else if n_kicks % 2 == 0 {
        let m = n_kicks / 2;
        let mut x: Vec<f64> = (0..m)
            .flat_map(|j| {
                let off = TAU * j as f64 / (m as f64 * SQRT3);
                [off, off + PI]
            })
            .collect();
        x.sort_by(f64::total_cmp);
        x
    } else {
        let x0: Vec<f64> = (0..n_kicks).map(|j| TAU * j as f64 / n_kicks as f64).collect();
        let opt = OptimizerConfig {
            slot_window: Some(u64::MAX / 2),
            tolerance_phi: f64::INFINITY,
            ..OptimizerConfig::default()
        };
        let ev = Evaluator::new(&opt, cfg)?;
        let solver = ContinuousSolver {
            ev: &ev,
            weights: vec![1.0; n_kicks],
            use_closure: true,
            use_phase: false,
            sign: 1.0,
            target: 0.0,
        };
        solver.solve(x0)
    };
    let omega = params.omega_c;
    for v in x.iter_mut() {
        *v /= omega;
    }
    Ok(x)
}

/// [`continuous_seed_times`] snapped to the nearest grid slots.
pub fn continuous_seed(cfg: &TrapIonConfig, n_kicks: usize) -> Result<KickSequence> {
    let times = continuous_seed_times(cfg, n_kicks)?;
    let grid = cfg.grid_period();
    let mut slots: Vec<u64> = times.iter().map(|t| (t / grid).round() as u64).collect();
    for i in 1..slots.len() {
        slots[i] = slots[i].max(slots[i - 1] + 1);
    }
    KickSequence::from_slots(&slots, DEFAULT_MOMENTUM_FACTOR, grid)
}

/// Continuous seeds for every kick count the configuration allows.
pub fn default_seeds(cfg: &TrapIonConfig, opt: &OptimizerConfig) -> Result<Vec<KickSequence>> {
    (2..=opt.max_kicks.max(2)).map(|n| continuous_seed(cfg, n)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    pub best_gate_error: f64,
    pub best_duration_periods: f64,
    pub feasible_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Outcome {
    Feasible,
    /// No candidate met the tolerances; `best` is the best effort.
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Evolution {
    pub outcome: Outcome,
    pub best: Candidate,
    pub history: Vec<GenerationStats>,
    pub evaluations: u64,
}

impl Evolution {
    pub fn is_feasible(&self) -> bool {
        self.outcome == Outcome::Feasible
    }
}

struct Search<'a> {
    ev: Evaluator<'a>,
    rng: ChaCha8Rng,
    evaluations: u64,
}

impl<'a> Search<'a> {
    fn eval(&mut self, kicks: Vec<Kick>) -> Individual {
        self.evaluations += 1;
        self.ev.individual(kicks)
    }

    fn random_genome(&mut self) -> Vec<Kick> {
        let opt = self.ev.opt;
        let n = self.rng.random_range(1..=opt.max_kicks);
        let w = self.ev.window;
        let mut kicks: Vec<Kick> = (0..n)
            .map(|_| Kick::new(self.rng.random_range(0..w), self.rng.random_range(1..=opt.max_multiplicity)))
            .collect();
        kicks.sort();
        kicks.dedup_by_key(|k| k.slot);
        if let Some(k) = kicks.first_mut() {
            k.slot = 0;
        }
        kicks
    }

    fn tournament(&mut self, pop: &[Individual]) -> usize {
        let mut best = self.rng.random_range(0..pop.len());
        for _ in 1..self.ev.opt.tournament_size {
            let c = self.rng.random_range(0..pop.len());
            if pop[c].cmp(&pop[best]) == Ordering::Less {
                best = c;
            }
        }
        best
    }

    fn crossover(&mut self, a: &[Kick], b: &[Kick]) -> Vec<Kick> {
        let cut = self.rng.random_range(0..=self.ev.window);
        a.iter().filter(|k| k.slot < cut).chain(b.iter().filter(|k| k.slot >= cut)).copied().collect()
    }

    fn mutate(&mut self, mut kicks: Vec<Kick>) -> Vec<Kick> {
        let opt = self.ev.opt;
        let rate = opt.mutation_rate;
        let w = self.ev.window;
        if self.rng.random_bool(rate) && !kicks.is_empty() {
            let i = self.rng.random_range(0..kicks.len());
            let reach = if self.rng.random_bool(0.5) { 3 } else { (w / 16).max(1) } as i64;
            let d = self.rng.random_range(-reach..=reach);
            kicks[i].slot = (kicks[i].slot as i64 + d).clamp(0, w as i64 - 1) as u64;
        }
        if self.rng.random_bool(rate) && !kicks.is_empty() {
            let i = self.rng.random_range(0..kicks.len());
            let up = self.rng.random_bool(0.5);
            let z = kicks[i].multiplicity;
            kicks[i].multiplicity = if up { (z + 1).min(opt.max_multiplicity) } else { (z - 1).max(1) };
        }
        if self.rng.random_bool(rate) && kicks.len() < opt.max_kicks {
            let k = Kick::new(self.rng.random_range(0..w), self.rng.random_range(1..=opt.max_multiplicity));
            kicks.push(k);
        }
        if self.rng.random_bool(rate) && kicks.len() > 1 {
            let i = self.rng.random_range(0..kicks.len());
            kicks.remove(i);
        }
        kicks
    }

    /// Gauss-Newton in continuous time, then snap to the grid.
    fn solve_continuous(&mut self, kicks: &[Kick], scale: f64) -> Option<Vec<Kick>> {
        let ev = &self.ev;
        let opt = ev.opt;
        let use_closure = opt.tolerance_eps.is_finite();
        let use_phase = opt.tolerance_phi.is_finite();
        if kicks.len() < 2 || !(use_closure || use_phase) {
            return None;
        }
        let step = ev.slot_angle();
        let x0: Vec<f64> = kicks.iter().map(|k| k.slot as f64 * step * scale).collect();
        let s = ev.score(kicks);
        let solver = ContinuousSolver {
            ev,
            weights: kicks.iter().map(|k| f64::from(k.multiplicity)).collect(),
            use_closure,
            use_phase,
            sign: if s.phase < 0.0 { -1.0 } else { 1.0 },
            target: opt.branch_target(s.phase),
        };
        if scale != 1.0 && !solver.admissible(&x0) {
            return None;
        }
        let x = solver.solve(x0);
        let snapped: Vec<Kick> = x
            .iter()
            .zip(kicks)
            .map(|(&xi, k)| Kick::new((xi / step).round().max(0.0) as u64, k.multiplicity))
            .collect();
        self.evaluations += 1;
        Some(self.ev.repair(snapped))
    }

    /// Moves single kicks by one slot while that improves the score.
    fn hill_climb(&mut self, mut best: Individual) -> Individual {
        for _ in 0..64 {
            let mut improved = false;
            for i in 0..best.kicks.len() {
                for d in [-1i64, 1] {
                    let slot = best.kicks[i].slot as i64 + d;
                    if slot < 0 {
                        continue;
                    }
                    let mut trial = best.kicks.clone();
                    trial[i].slot = slot as u64;
                    if i == 0 && slot > 0 {
                        // keep the first kick at slot 0
                        for k in trial.iter_mut() {
                            k.slot -= 1;
                        }
                    } else if i == 0 {
                        continue;
                    }
                    if !self.ev.fits(&trial) {
                        continue;
                    }
                    let cand = self.eval(trial);
                    if cand.cmp(&best) == Ordering::Less {
                        best = cand;
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        best
    }

    fn polish(&mut self, ind: Individual) -> Individual {
        let mut best = ind;
        if let Some(k) = self.solve_continuous(&best.kicks.clone(), 1.0) {
            let cand = self.eval(k);
            let cand = self.hill_climb(cand);
            if cand.cmp(&best) == Ordering::Less {
                best = cand;
            }
        }
        if !best.score.feasible {
            return self.hill_climb(best);
        }
        let mut shrink = 0.05;
        let mut attempts = 0;
        while shrink > 0.003 && attempts < 16 {
            attempts += 1;
            let trial = self
                .solve_continuous(&best.kicks.clone(), 1.0 - shrink)
                .map(|k| self.eval(k))
                .map(|c| self.hill_climb(c));
            match trial {
                Some(c) if c.score.feasible && c.cmp(&best) == Ordering::Less => best = c,
                _ => shrink /= 2.0,
            }
        }
        best
    }

    fn offspring(&mut self, kicks: Vec<Kick>) -> Individual {
        let kicks = self.ev.repair(kicks);
        let ind = self.eval(kicks);
        if self.ev.opt.local_search {
            self.polish(ind)
        } else {
            ind
        }
    }
}

fn stats(generation: usize, pop: &[Individual]) -> GenerationStats {
    GenerationStats {
        generation,
        best_fitness: pop[0].score.fitness,
        best_gate_error: pop[0].score.eps,
        best_duration_periods: pop[0].score.duration_periods,
        feasible_count: pop.iter().filter(|i| i.score.feasible).count(),
    }
}

/// Runs the genetic search. Seeds are repaired into the search window and
/// make up the start of the initial population; the rest is random.
///
/// The result is a pure function of the arguments. Elites survive each
/// generation unchanged, so the best fitness in `history` never increases.
/// A lone kick at slot 0 (zero duration) is scored on the side and returned
/// if nothing beats it, which only happens for very loose tolerances.
pub fn evolve(seeds: &[KickSequence], opt: &OptimizerConfig, cfg: &TrapIonConfig) -> Result<Evolution> {
    let ev = Evaluator::new(opt, cfg)?;
    let mut search = Search { ev, rng: ChaCha8Rng::seed_from_u64(opt.rng_seed), evaluations: 0 };

    let mut pop: Vec<Individual> = Vec::with_capacity(opt.population_size);
    for s in seeds.iter().take(opt.population_size) {
        let ind = search.offspring(s.kicks().to_vec());
        pop.push(ind);
    }
    while pop.len() < opt.population_size {
        let g = search.random_genome();
        let ind = search.offspring(g);
        pop.push(ind);
    }
    pop.sort_by(Individual::cmp);
    let mut history = vec![stats(0, &pop)];

    for generation in 1..=opt.generations {
        let mut next: Vec<Individual> = pop[..opt.elitism].to_vec();
        while next.len() < opt.population_size {
            let a = search.tournament(&pop);
            let b = search.tournament(&pop);
            let child = if search.rng.random_bool(0.9) {
                search.crossover(&pop[a].kicks, &pop[b].kicks)
            } else {
                pop[a].kicks.clone()
            };
            let child = search.mutate(child);
            let ind = search.offspring(child);
            next.push(ind);
        }
        next.sort_by(Individual::cmp);
        pop = next;
        history.push(stats(generation, &pop));
    }

    let trivial = search.eval(vec![Kick::new(0, 1)]);
    let winner = if trivial.cmp(&pop[0]) == Ordering::Less { &trivial } else { &pop[0] };
    let best = search.ev.candidate(winner)?;
    let outcome = if best.feasible { Outcome::Feasible } else { Outcome::Infeasible };
    Ok(Evolution { outcome, best, history, evaluations: search.evaluations })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnumerationResult {
    /// Best candidates first: feasible by duration then ε, then infeasible
    /// by fitness.
    pub ranked: Vec<Candidate>,
    pub optimum_fitness: f64,
    /// Number of sequences evaluated.
    pub states: u64,
}

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c.saturating_mul(u128::from(n - i)) / u128::from(i + 1);
    }
    c
}

/// Upper bound on the number of sequences with 1..=n_kicks bursts in the
/// window (first kick at slot 0).
pub fn enumeration_size(n_kicks: usize, slot_window: u64, z_max: u32) -> u128 {
    (1..=n_kicks as u64)
        .map(|k| {
            binomial(slot_window.saturating_sub(1), k - 1).saturating_mul(u128::from(z_max).saturating_pow(k as u32))
        })
        .fold(0u128, u128::saturating_add)
}

/// Enumerates every sequence of 1..=`n_kicks` non-overlapping bursts with
/// multiplicities up to `z_max` inside `[0, slot_window)`, the first kick at
/// slot 0, and returns the best `top` (at least one).
///
/// Tolerances, target and weights come from `opt`; its own window and size
/// limits are ignored.
pub fn exhaustive_small_search(
    cfg: &TrapIonConfig,
    opt: &OptimizerConfig,
    n_kicks: usize,
    slot_window: u64,
    z_max: u32,
    top: usize,
) -> Result<EnumerationResult> {
    if n_kicks == 0 || slot_window == 0 || z_max == 0 {
        return Err(domain("enumeration needs n_kicks, slot_window and z_max all positive"));
    }
    let states = enumeration_size(n_kicks, slot_window, z_max);
    if states > ENUMERATION_BUDGET {
        return Err(Error::SearchBudget { states, budget: ENUMERATION_BUDGET });
    }
    let opt = OptimizerConfig {
        slot_window: Some(slot_window),
        max_kicks: n_kicks,
        max_multiplicity: z_max,
        population_size: opt.population_size.max(2),
        elitism: 0,
        ..opt.clone()
    };
    let ev = Evaluator::new(&opt, cfg)?;
    let top = top.max(1);
    let mut best: Vec<Individual> = Vec::with_capacity(top + 1);
    let mut count = 0u64;
    let mut kicks: Vec<Kick> = Vec::with_capacity(n_kicks);

    fn visit(
        ev: &Evaluator,
        kicks: &mut Vec<Kick>,
        n_kicks: usize,
        z_max: u32,
        top: usize,
        best: &mut Vec<Individual>,
        count: &mut u64,
    ) {
        *count += 1;
        let score = ev.score(kicks);
        let worse_than_all = best.len() == top && {
            let last = &best[top - 1];
            score.cmp(&last.score).then_with(|| kicks.as_slice().cmp(&last.kicks)) != Ordering::Less
        };
        if !worse_than_all {
            let ind = Individual { kicks: kicks.clone(), score };
            let pos = best.partition_point(|b| b.cmp(&ind) == Ordering::Less);
            best.insert(pos, ind);
            best.truncate(top);
        }
        if kicks.len() == n_kicks {
            return;
        }
        let last = kicks[kicks.len() - 1];
        let start = last.slot + u64::from(last.multiplicity);
        for slot in start..ev.window {
            for z in 1..=z_max {
                if slot + u64::from(z) > ev.window {
                    break;
                }
                kicks.push(Kick::new(slot, z));
                visit(ev, kicks, n_kicks, z_max, top, best, count);
                kicks.pop();
            }
        }
    }

    for z in 1..=z_max {
        if u64::from(z) > slot_window {
            break;
        }
        kicks.push(Kick::new(0, z));
        visit(&ev, &mut kicks, n_kicks, z_max, top, &mut best, &mut count);
        kicks.pop();
    }
    let ranked = best.iter().map(|b| ev.candidate(b)).collect::<Result<Vec<_>>>()?;
    let optimum_fitness = ranked.first().map_or(f64::INFINITY, |c| c.fitness);
    Ok(EnumerationResult { ranked, optimum_fitness, states: count })
}

/// Scores an arbitrary sequence under the optimizer's objective.
pub fn score_sequence(seq: &KickSequence, opt: &OptimizerConfig, cfg: &TrapIonConfig) -> Result<Candidate> {
    let opt =
        OptimizerConfig { slot_window: Some(u64::MAX / 2), momentum_factor: seq.momentum_factor(), ..opt.clone() };
    let ev = Evaluator::new(&opt, cfg)?;
    let mut kicks = seq.kicks().to_vec();
    let first = kicks.first().map_or(0, |k| k.slot);
    for k in kicks.iter_mut() {
        k.slot -= first;
    }
    let ind = ev.individual(kicks);
    ev.candidate(&ind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{gate_error, gate_phase};

    fn coarse_cfg(slots_per_period: f64) -> TrapIonConfig {
        let base = TrapIonConfig::default();
        TrapIonConfig { repetition_rate: slots_per_period / base.trap_period(), ..base }
    }

    #[test]
    fn default_config_is_valid() {
        OptimizerConfig::default().validate().unwrap();
        let bad = OptimizerConfig { population_size: 1, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = OptimizerConfig { tolerance_eps: f64::NAN, ..Default::default() };
        assert!(bad.validate().is_err());
        let inf = OptimizerConfig { tolerance_eps: f64::INFINITY, ..Default::default() };
        inf.validate().unwrap();
    }

    #[test]
    fn phase_violation_uses_branches_and_magnitude() {
        let opt = OptimizerConfig::default();
        assert!(opt.phase_violation(FRAC_PI_4) < 1e-15);
        assert!(opt.phase_violation(-FRAC_PI_4) < 1e-15);
        assert!(opt.phase_violation(FRAC_PI_4 + 2.0 * TAU) < 1e-12);
        let narrow = OptimizerConfig { max_phase_branch: 1, ..Default::default() };
        assert!((narrow.phase_violation(FRAC_PI_4 + 2.0 * TAU) - TAU).abs() < 1e-12);
    }

    #[test]
    fn two_kick_seed_closes_center_of_mass() {
        let cfg = TrapIonConfig::default();
        let t = continuous_seed_times(&cfg, 2).unwrap();
        assert!((t[1] * cfg.trap_frequency - PI).abs() < 1e-12);
        assert!(continuous_seed_times(&cfg, 1).is_err());
    }

    #[test]
    fn even_seeds_close_both_modes_before_snapping() {
        let cfg = TrapIonConfig::default();
        let p = derive_parameters(&cfg).unwrap();
        for n in [4, 6, 8] {
            let t = continuous_seed_times(&cfg, n).unwrap();
            let w = vec![1.0; n];
            let sc = crate::model::closure_sum_at(&t, &w, p.omega_c);
            let ss = crate::model::closure_sum_at(&t, &w, p.omega_s);
            assert!(sc.norm() < 1e-9 && ss.norm() < 1e-9, "n = {n}");
        }
        let t4 = continuous_seed_times(&cfg, 4).unwrap();
        let periods = t4[3] / cfg.trap_period();
        assert!((periods - (0.5 + 0.5 / SQRT3)).abs() < 1e-12);
    }

    #[test]
    fn four_kick_seed_has_small_error_after_snapping() {
        let cfg = TrapIonConfig::default();
        let seq = continuous_seed(&cfg, 4).unwrap();
        assert!(gate_error(&seq, &cfg).unwrap() < 0.05);
        let times = continuous_seed_times(&cfg, 4).unwrap();
        for (a, b) in seq.times().iter().zip(&times) {
            assert!((a - b).abs() <= 0.5 * cfg.grid_period() * (1.0 + 1e-9));
        }
    }

    #[test]
    fn odd_seed_reduces_closure_error() {
        let cfg = TrapIonConfig::default();
        let seq = continuous_seed(&cfg, 5).unwrap();
        let even = KickSequence::from_slots(
            &(0..5)
                .map(|j| (j as f64 * cfg.trap_period() / 5.0 / cfg.grid_period()).round() as u64)
                .collect::<Vec<_>>(),
            DEFAULT_MOMENTUM_FACTOR,
            cfg.grid_period(),
        )
        .unwrap();
        assert!(gate_error(&seq, &cfg).unwrap() < gate_error(&even, &cfg).unwrap());
    }

    #[test]
    fn infinite_tolerances_give_zero_duration() {
        let cfg = TrapIonConfig::default();
        let opt = OptimizerConfig {
            tolerance_eps: f64::INFINITY,
            tolerance_phi: f64::INFINITY,
            population_size: 10,
            generations: 5,
            ..Default::default()
        };
        let evo = evolve(&[], &opt, &cfg).unwrap();
        assert!(evo.is_feasible());
        assert_eq!(evo.best.duration_periods, 0.0);
        assert_eq!(evo.best.sequence.len(), 1);
    }

    #[test]
    fn evolution_is_deterministic_and_monotone() {
        let cfg = coarse_cfg(64.0);
        let opt = OptimizerConfig {
            population_size: 16,
            generations: 12,
            max_kicks: 4,
            max_multiplicity: 3,
            tolerance_eps: 0.05,
            tolerance_phi: 0.05,
            phase_target: 0.3,
            rng_seed: 11,
            ..Default::default()
        };
        let a = evolve(&[], &opt, &cfg).unwrap();
        let b = evolve(&[], &opt, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.history.windows(2).all(|w| w[1].best_fitness <= w[0].best_fitness));
        assert_eq!(a.history.len(), opt.generations + 1);
        let c = evolve(&[], &OptimizerConfig { rng_seed: 12, ..opt.clone() }, &cfg).unwrap();
        assert!(c.evaluations > 0);
    }

    #[test]
    fn feasibility_flag_matches_core_model() {
        let cfg = coarse_cfg(64.0);
        let opt = OptimizerConfig {
            population_size: 12,
            generations: 6,
            max_kicks: 4,
            tolerance_eps: 0.05,
            tolerance_phi: 0.05,
            phase_target: 0.3,
            ..Default::default()
        };
        let evo = evolve(&[], &opt, &cfg).unwrap();
        let eps = gate_error(&evo.best.sequence, &cfg).unwrap();
        let phi = gate_phase(&evo.best.sequence, &cfg).unwrap();
        assert_eq!(eps, evo.best.gate_error);
        assert_eq!(phi, evo.best.phase);
        let feasible = eps <= opt.tolerance_eps && opt.phase_violation(phi) <= opt.tolerance_phi;
        assert_eq!(feasible, evo.best.feasible);
        assert_eq!(evo.is_feasible(), feasible);
    }

    #[test]
    fn single_slot_window_has_one_candidate() {
        let cfg = TrapIonConfig::default();
        let opt = OptimizerConfig::default();
        let r = exhaustive_small_search(&cfg, &opt, 3, 1, 1, 10).unwrap();
        assert_eq!(r.states, 1);
        assert_eq!(r.ranked.len(), 1);
        let seq = &r.ranked[0].sequence;
        assert_eq!(r.ranked[0].gate_error, gate_error(seq, &cfg).unwrap());
    }

    #[test]
    fn enumeration_counts_and_budget() {
        let cfg = coarse_cfg(32.0);
        let opt = OptimizerConfig::default();
        // one kick: z in 1..=2; two kicks: first at 0 with z0, second at
        // s >= z0 with s + z1 <= 5
        let r = exhaustive_small_search(&cfg, &opt, 2, 5, 2, 1000).unwrap();
        let expected = 2
            + (1..=2u64)
                .map(|z0| (z0..5).map(|s| (1..=2u64).filter(|z1| s + z1 <= 5).count() as u64).sum::<u64>())
                .sum::<u64>();
        assert_eq!(r.states, expected);
        assert_eq!(r.ranked.len() as u64, expected);
        assert!(r.ranked.windows(2).all(|w| w[0].fitness <= w[1].fitness));
        assert!(matches!(exhaustive_small_search(&cfg, &opt, 3, 100_000, 4, 1), Err(Error::SearchBudget { .. })));
    }

    #[test]
    fn two_unit_kicks_cannot_reach_the_gate_phase() {
        let cfg = coarse_cfg(400.0);
        let opt = OptimizerConfig::default();
        let p = derive_parameters(&cfg).unwrap();
        let alpha = opt.momentum_factor * p.alpha_c;
        // max over x of |sin(√3x)/√3 - sin x| is below 1 + 1/√3
        let bound = alpha * alpha * (1.0 + 1.0 / SQRT3);
        assert!(bound < FRAC_PI_4);
        let r = exhaustive_small_search(&cfg, &opt, 2, 800, 1, 5).unwrap();
        assert!(r.ranked.iter().all(|c| !c.feasible));
        assert!(r.ranked.iter().all(|c| c.phase.abs() <= bound));
    }

    #[test]
    fn genetic_search_never_beats_enumeration() {
        let cfg = coarse_cfg(48.0);
        let opt = OptimizerConfig {
            population_size: 16,
            generations: 10,
            max_kicks: 3,
            max_multiplicity: 2,
            slot_window: Some(30),
            tolerance_eps: 0.1,
            tolerance_phi: 0.1,
            phase_target: 0.2,
            ..Default::default()
        };
        let exact = exhaustive_small_search(&cfg, &opt, 3, 30, 2, 1).unwrap();
        let evo = evolve(&[], &opt, &cfg).unwrap();
        assert!(evo.best.fitness >= exact.optimum_fitness);
        assert!(evo.best.sequence.kicks().last().map_or(0, |k| k.slot + u64::from(k.multiplicity)) <= 30);
    }

    #[test]
    fn scoring_an_external_sequence() {
        let cfg = TrapIonConfig::default();
        let seq = continuous_seed(&cfg, 4).unwrap();
        let c = score_sequence(&seq, &OptimizerConfig::default(), &cfg).unwrap();
        assert_eq!(c.gate_error, gate_error(&seq, &cfg).unwrap());
        assert!(!c.feasible);
    }
}
