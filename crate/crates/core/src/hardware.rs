//! Pulse-picker / Pockels-cell scheduling and the dispersion budget.
//!
//! The pulse picker transmits the payload (the picked kick pulses) and, at
//! all other times, a decimated idle train that keeps the amplifiers seeded.
//! A slow Pockels cell opens only around the payload. After a change of
//! repetition rate the amplifier keeps its old pulse energy for a limited
//! number of slots, which bounds the length of one payload window.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{config, Error, Result};
use crate::model::KickSequence;

/// Relative slack when comparing durations built from float slot periods.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HardwareConstraints {
    /// Spacing of the pulse train, s.
    pub slot_period: f64,
    /// Shortest Pockels gate, s.
    pub pockels_min_window: f64,
    /// Longest payload window before the amplifier leaves its steady state.
    pub steady_state_budget_slots: u64,
    /// Idle train transmits one slot in this many.
    pub idle_decimation: u64,
    /// Payload energy gain from the idle-rate steady state.
    pub payload_energy_factor: f64,
    /// Minimum gap between payload windows in multi-epoch mode, s.
    pub settle_time: f64,
    /// Scheduling horizon, s.
    pub horizon: f64,
}

impl Default for HardwareConstraints {
    fn default() -> Self {
        Self {
            slot_period: 200e-12,
            pockels_min_window: 35e-9,
            steady_state_budget_slots: 750,
            idle_decimation: 4,
            payload_energy_factor: 4.0,
            settle_time: 1e-6,
            horizon: 1e-3,
        }
    }
}

impl HardwareConstraints {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("slot_period", self.slot_period),
            ("pockels_min_window", self.pockels_min_window),
            ("payload_energy_factor", self.payload_energy_factor),
            ("horizon", self.horizon),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.settle_time.is_finite() && self.settle_time >= 0.0) {
            return Err(config("settle_time must be non-negative"));
        }
        if self.steady_state_budget_slots == 0 || self.idle_decimation == 0 {
            return Err(config("steady_state_budget_slots and idle_decimation must be positive"));
        }
        if self.pockels_min_window < self.slot_period {
            return Err(config("pockels_min_window must be at least one slot"));
        }
        if self.horizon < self.slot_period {
            return Err(config("horizon must hold at least one slot"));
        }
        Ok(())
    }

    pub fn horizon_slots(&self) -> u64 {
        (self.horizon / self.slot_period * (1.0 + TIME_EPS)).floor() as u64
    }

    /// Pockels minimum window rounded up to whole slots.
    pub fn pockels_min_slots(&self) -> u64 {
        (self.pockels_min_window / self.slot_period * (1.0 - TIME_EPS)).ceil() as u64
    }

    pub fn settle_slots(&self) -> u64 {
        (self.settle_time / self.slot_period * (1.0 - TIME_EPS)).ceil() as u64
    }

    /// Idle pattern: transmit on slots divisible by the decimation.
    pub fn idle_bit(&self, slot: u64) -> bool {
        slot % self.idle_decimation == 0
    }
}

/// A Pockels gate in slot units: open on `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GateWindow {
    pub start: u64,
    pub end: u64,
}

impl GateWindow {
    pub fn contains(&self, slot: u64) -> bool {
        (self.start..self.end).contains(&slot)
    }

    pub fn len(&self) -> u64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn start_time(&self, slot_period: f64) -> f64 {
        self.start as f64 * slot_period
    }

    pub fn end_time(&self, slot_period: f64) -> f64 {
        self.end as f64 * slot_period
    }
}

/// First payload slot and length (first to last payload slot, inclusive).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PayloadWindow {
    pub start: u64,
    pub len: u64,
}

impl PayloadWindow {
    pub fn contains(&self, slot: u64) -> bool {
        slot >= self.start && slot - self.start < self.len
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PulsePattern {
    /// One entry per slot over the horizon; true = pulse picker transmits.
    pub slots: Vec<bool>,
    pub gates: Vec<GateWindow>,
    pub payloads: Vec<PayloadWindow>,
    pub idle_decimation: u64,
}

impl PulsePattern {
    pub fn transmitted(&self) -> usize {
        self.slots.iter().filter(|b| **b).count()
    }

    /// Transmitted slots that belong to a payload window.
    pub fn transmitted_payload(&self) -> usize {
        self.payloads
            .iter()
            .map(|w| self.slots[w.start as usize..(w.start + w.len) as usize].iter().filter(|b| **b).count())
            .sum()
    }

    /// Run-length encoding as (value, run length) pairs.
    pub fn runs(&self) -> Vec<(bool, u64)> {
        let mut runs: Vec<(bool, u64)> = Vec::new();
        for &b in &self.slots {
            match runs.last_mut() {
                Some((v, n)) if *v == b => *n += 1,
                _ => runs.push((b, 1)),
            }
        }
        runs
    }

    pub fn from_runs(runs: &[(bool, u64)]) -> Vec<bool> {
        let mut slots = Vec::with_capacity(runs.iter().map(|r| r.1 as usize).sum());
        for &(v, n) in runs {
            slots.extend(core::iter::repeat_n(v, n as usize));
        }
        slots
    }
}

/// A run of slots in the compact pattern encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Segment {
    /// `n` slots following the idle pattern, indexed by absolute slot.
    Idle(u64),
    On(u64),
    Off(u64),
}

impl Segment {
    pub fn len(&self) -> u64 {
        match *self {
            Segment::Idle(n) | Segment::On(n) | Segment::Off(n) => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Run-length encoding that also collapses stretches of the idle pattern,
/// which would otherwise cost one run per idle pulse.
pub fn encode_segments(slots: &[bool], idle_decimation: u64) -> Vec<Segment> {
    let idle = |s: usize| (s as u64) % idle_decimation.max(1) == 0;
    let mut out: Vec<Segment> = Vec::new();
    let mut s = 0;
    while s < slots.len() {
        let idle_len = slots[s..].iter().enumerate().take_while(|(i, b)| **b == idle(s + i)).count();
        let run_len = slots[s..].iter().take_while(|b| **b == slots[s]).count();
        let seg = if idle_len > run_len {
            Segment::Idle(idle_len as u64)
        } else if slots[s] {
            Segment::On(run_len as u64)
        } else {
            Segment::Off(run_len as u64)
        };
        match (out.last_mut(), seg) {
            (Some(Segment::Idle(n)), Segment::Idle(m)) => *n += m,
            (Some(Segment::On(n)), Segment::On(m)) => *n += m,
            (Some(Segment::Off(n)), Segment::Off(m)) => *n += m,
            _ => out.push(seg),
        }
        s += seg.len() as usize;
    }
    out
}

pub fn decode_segments(segments: &[Segment], idle_decimation: u64) -> Result<Vec<bool>> {
    if idle_decimation == 0 {
        return Err(config("idle_decimation must be positive"));
    }
    let total: u64 = segments.iter().map(Segment::len).sum();
    let mut slots = Vec::with_capacity(total as usize);
    for seg in segments {
        match *seg {
            Segment::Idle(n) => {
                let start = slots.len() as u64;
                slots.extend((start..start + n).map(|s| s % idle_decimation == 0));
            }
            Segment::On(n) => slots.extend(core::iter::repeat_n(true, n as usize)),
            Segment::Off(n) => slots.extend(core::iter::repeat_n(false, n as usize)),
        }
    }
    Ok(slots)
}

/// Expanded bursts `[slot, slot + z)` relative to the first kick.
fn bursts(seq: &KickSequence) -> Result<Vec<(u64, u64)>> {
    let kicks = seq.kicks();
    let Some(first) = kicks.first() else {
        return Ok(Vec::new());
    };
    let spans: Vec<(u64, u64)> =
        kicks.iter().map(|k| (k.slot - first.slot, k.slot - first.slot + u64::from(k.multiplicity))).collect();
    let collisions: Vec<(usize, usize)> =
        spans.windows(2).enumerate().filter(|(_, w)| w[1].0 < w[0].1).map(|(i, _)| (i, i + 1)).collect();
    if !collisions.is_empty() {
        return Err(Error::Collision(collisions));
    }
    Ok(spans)
}

fn render(hw: &HardwareConstraints, payloads: Vec<PayloadWindow>, bursts: &[(u64, u64)]) -> Result<PulsePattern> {
    let horizon = hw.horizon_slots();
    let min_gate = hw.pockels_min_slots();
    let gates: Vec<GateWindow> =
        payloads.iter().map(|p| GateWindow { start: p.start, end: p.start + p.len.max(min_gate) }).collect();
    let end = gates.iter().map(|g| g.end).max().unwrap_or(0);
    if end > horizon {
        return Err(Error::Capacity { needed: end, capacity: horizon });
    }
    if gates.windows(2).any(|w| w[1].start < w[0].end) {
        // a minimum-length gate would swallow the next window
        let needed = gates.windows(2).map(|w| w[0].end.saturating_sub(w[1].start)).max().unwrap_or(0);
        return Err(Error::Capacity { needed: min_gate + needed, capacity: min_gate });
    }
    let mut slots: Vec<bool> = (0..horizon).map(|s| hw.idle_bit(s)).collect();
    for g in &gates {
        for s in g.start..g.end {
            slots[s as usize] = false;
        }
    }
    for &(a, b) in bursts {
        for s in a..b {
            slots[s as usize] = true;
        }
    }
    Ok(PulsePattern { slots, gates, payloads, idle_decimation: hw.idle_decimation })
}

/// Places the whole sequence in one payload window at the start of the
/// horizon, covered by a single Pockels gate.
pub fn compile_pattern(seq: &KickSequence, hw: &HardwareConstraints) -> Result<PulsePattern> {
    hw.validate()?;
    let bursts = bursts(seq)?;
    let Some(&(_, last_end)) = bursts.last() else {
        return render(hw, Vec::new(), &[]);
    };
    if last_end > hw.steady_state_budget_slots {
        return Err(Error::Capacity { needed: last_end, capacity: hw.steady_state_budget_slots });
    }
    render(hw, alloc::vec![PayloadWindow { start: 0, len: last_end }], &bursts)
}

/// Splits the sequence into several payload windows, each short enough for
/// one steady-state epoch. Consecutive bursts share a window while it fits
/// the budget; a new window must start at least the settle time after the
/// previous one ends. Kick timing is preserved.
pub fn compile_multi_epoch(seq: &KickSequence, hw: &HardwareConstraints) -> Result<PulsePattern> {
    hw.validate()?;
    let bursts = bursts(seq)?;
    let budget = hw.steady_state_budget_slots;
    let settle = hw.settle_slots();
    let mut payloads: Vec<PayloadWindow> = Vec::new();
    for &(a, b) in &bursts {
        if b - a > budget {
            return Err(Error::Capacity { needed: b - a, capacity: budget });
        }
        match payloads.last_mut() {
            Some(w) if b - w.start <= budget => w.len = b - w.start,
            Some(w) => {
                let gap = a - (w.start + w.len);
                if gap < settle {
                    return Err(Error::Capacity { needed: settle, capacity: gap });
                }
                payloads.push(PayloadWindow { start: a, len: b - a });
            }
            None => payloads.push(PayloadWindow { start: a, len: b - a }),
        }
    }
    render(hw, payloads, &bursts)
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    fn push(&mut self, name: &str, violations: Vec<String>) {
        let passed = violations.is_empty();
        let detail = if passed {
            String::from("ok")
        } else {
            let shown: Vec<&str> = violations.iter().take(5).map(String::as_str).collect();
            format!("{} violation(s): {}", violations.len(), shown.join("; "))
        };
        self.checks.push(Check { name: String::from(name), passed, detail });
    }
}

/// Checks every pattern invariant and lists the outcome of each.
pub fn validate_pattern(p: &PulsePattern, hw: &HardwareConstraints) -> ValidationReport {
    let mut report = ValidationReport { checks: Vec::new() };
    let horizon = hw.horizon_slots();

    let mut v = Vec::new();
    if p.slots.len() as u64 != horizon {
        v.push(format!("{} slots, horizon holds {horizon}", p.slots.len()));
    }
    report.push("slot_count", v);

    let v = p
        .payloads
        .iter()
        .filter(|w| w.len > hw.steady_state_budget_slots)
        .map(|w| format!("payload at slot {} spans {} > {} slots", w.start, w.len, hw.steady_state_budget_slots))
        .collect();
    report.push("steady_state_budget", v);

    let v = p
        .gates
        .iter()
        .filter(|g| g.is_empty() || (g.len() as f64) * hw.slot_period < hw.pockels_min_window * (1.0 - TIME_EPS))
        .map(|g| {
            format!(
                "gate [{}, {}) lasts {:.3e} s < {:.3e} s",
                g.start,
                g.end,
                g.len() as f64 * hw.slot_period,
                hw.pockels_min_window
            )
        })
        .collect();
    report.push("pockels_min_window", v);

    let v = p
        .gates
        .windows(2)
        .filter(|w| w[1].start < w[0].end)
        .map(|w| format!("gates starting at {} and {} overlap", w[0].start, w[1].start))
        .collect();
    report.push("gates_disjoint", v);

    let mut payload_outside = Vec::new();
    let mut idle_mismatch = Vec::new();
    let mut gate_leak = Vec::new();
    let mut gi = 0;
    let mut pi = 0;
    for (s, &bit) in p.slots.iter().enumerate() {
        let s = s as u64;
        while gi < p.gates.len() && p.gates[gi].end <= s {
            gi += 1;
        }
        while pi < p.payloads.len() && p.payloads[pi].start + p.payloads[pi].len <= s {
            pi += 1;
        }
        let in_gate = p.gates.get(gi).is_some_and(|g| g.contains(s));
        let in_payload = p.payloads.get(pi).is_some_and(|w| w.contains(s));
        if in_payload && !in_gate {
            if bit {
                payload_outside.push(format!("slot {s}"));
            }
        } else if !in_gate {
            if bit != hw.idle_bit(s) {
                idle_mismatch.push(format!("slot {s}"));
            }
        } else if !in_payload && bit {
            gate_leak.push(format!("slot {s}"));
        }
    }
    report.push("payload_inside_gate", payload_outside);
    report.push("idle_pattern", idle_mismatch);
    report.push("dark_gate_outside_payload", gate_leak);
    report
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DispersionComponent {
    pub name: String,
    /// Signed dispersion, ps/nm.
    pub dispersion: f64,
    /// ± fine-tuning range, ps/nm; 0 if fixed.
    pub tunable_range: f64,
    /// Dispersion per meter for length-adjustable fiber, ps/nm/m.
    pub per_meter: Option<f64>,
}

impl DispersionComponent {
    pub fn fixed(name: &str, dispersion: f64) -> Self {
        Self { name: String::from(name), dispersion, tunable_range: 0.0, per_meter: None }
    }

    pub fn tunable(name: &str, dispersion: f64, tunable_range: f64) -> Self {
        Self { tunable_range, ..Self::fixed(name, dispersion) }
    }

    /// `length` meters of fiber with `per_meter` ps/nm/m.
    pub fn fiber(name: &str, per_meter: f64, length: f64) -> Self {
        Self { per_meter: Some(per_meter), ..Self::fixed(name, per_meter * length) }
    }

    /// The laser chain: CFBG, CVBG and 100 m of stretcher fiber.
    pub fn reference_chain() -> Vec<Self> {
        alloc::vec![
            Self::tunable("CFBG", -9.5, 0.005),
            Self::fixed("CVBG", 12.5),
            Self::fiber("stretcher", -0.041, 100.0),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DispersionBudget {
    /// Σ dispersion, ps/nm.
    pub residual: f64,
    /// Σ tuning ranges, ps/nm.
    pub tunable_margin: f64,
    pub balanced: bool,
    /// Length change of the first adjustable fiber that zeroes the residual
    /// (negative = remove fiber), with the fiber's name.
    pub length_correction: Option<(String, f64)>,
    pub note: String,
}

pub fn dispersion_budget(components: &[DispersionComponent]) -> Result<DispersionBudget> {
    if components.is_empty() {
        return Err(crate::error::domain("dispersion budget needs at least one component"));
    }
    if components.iter().any(|c| !c.dispersion.is_finite() || !c.tunable_range.is_finite()) {
        return Err(crate::error::domain("dispersion values must be finite"));
    }
    let residual: f64 = components.iter().map(|c| c.dispersion).sum();
    let tunable_margin: f64 = components.iter().map(|c| c.tunable_range.abs()).sum();
    let balanced = residual.abs() <= tunable_margin * (1.0 + TIME_EPS);
    let length_correction =
        components.iter().find_map(|c| c.per_meter.filter(|k| *k != 0.0).map(|k| (c.name.clone(), -residual / k)));
    let note = if balanced {
        String::from("residual within the tuning range")
    } else {
        format!("residual {residual:+.4} ps/nm is attributed to chain components not listed in the budget")
    };
    Ok(DispersionBudget { residual, tunable_margin, balanced, length_correction, note })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TbpCheck {
    pub tbp: f64,
    /// tbp over the Gaussian transform limit.
    pub excess_over_gaussian: f64,
}

/// `fwhm` in s and `spectral_fwhm` in Hz.
pub fn tbp_check(fwhm: f64, spectral_fwhm: f64) -> Result<TbpCheck> {
    if !(fwhm > 0.0 && spectral_fwhm > 0.0) || !fwhm.is_finite() || !spectral_fwhm.is_finite() {
        return Err(crate::error::domain("pulse and spectral widths must be positive"));
    }
    let tbp = fwhm * spectral_fwhm;
    Ok(TbpCheck { tbp, excess_over_gaussian: tbp / crate::consts::GAUSSIAN_TBP })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Kick;
    use alloc::vec;

    fn hw() -> HardwareConstraints {
        HardwareConstraints { horizon: 2e-6, ..Default::default() }
    }

    fn seq(kicks: &[(u64, u32)]) -> KickSequence {
        KickSequence::new(kicks.iter().map(|&(s, z)| Kick::new(s, z)).collect(), 2.0, 200e-12).unwrap()
    }

    #[test]
    fn derived_slot_counts() {
        let h = HardwareConstraints::default();
        assert_eq!(h.pockels_min_slots(), 175);
        assert_eq!(h.horizon_slots(), 5_000_000);
        assert_eq!(h.settle_slots(), 5000);
    }

    #[test]
    fn empty_sequence_is_all_idle() {
        let p = compile_pattern(&seq(&[]), &hw()).unwrap();
        assert!(p.gates.is_empty());
        assert!(p.slots.iter().enumerate().all(|(i, b)| *b == (i % 4 == 0)));
        assert!(validate_pattern(&p, &hw()).passed());
    }

    #[test]
    fn fifty_pulse_burst_gets_one_minimum_gate() {
        let p = compile_pattern(&seq(&[(0, 50)]), &hw()).unwrap();
        assert_eq!(p.gates, vec![GateWindow { start: 0, end: 175 }]);
        assert!((p.gates[0].len() as f64 * 200e-12 - 35e-9).abs() < 1e-18);
        assert_eq!(p.slots[..175].iter().filter(|b| **b).count(), 50);
        assert!(validate_pattern(&p, &hw()).passed());
    }

    #[test]
    fn long_sequence_exceeds_steady_state_budget() {
        // 3 µs at 200 ps = 15000 slots
        let s = seq(&[(0, 1), (5000, 1), (10000, 1), (15000, 1)]);
        assert_eq!(compile_pattern(&s, &hw()), Err(Error::Capacity { needed: 15001, capacity: 750 }));
    }

    #[test]
    fn overlapping_bursts_collide() {
        let s = seq(&[(0, 3), (2, 1), (10, 1), (11, 1)]);
        assert_eq!(compile_pattern(&s, &hw()), Err(Error::Collision(vec![(0, 1)])));
    }

    #[test]
    fn multi_epoch_splits_long_sequences() {
        let h = HardwareConstraints { horizon: 10e-6, ..Default::default() };
        let s = seq(&[(0, 2), (100, 1), (8000, 3), (16000, 1)]);
        let p = compile_multi_epoch(&s, &h).unwrap();
        assert_eq!(p.payloads.len(), 3);
        assert_eq!(p.payloads[0], PayloadWindow { start: 0, len: 101 });
        assert!(validate_pattern(&p, &h).passed());
        // kicks closer than the settle time cannot open a fresh epoch
        let tight = seq(&[(0, 1), (2000, 1)]);
        assert!(matches!(compile_multi_epoch(&tight, &h), Err(Error::Capacity { .. })));
    }

    #[test]
    fn short_gate_is_reported() {
        let mut p = compile_pattern(&seq(&[(0, 10)]), &hw()).unwrap();
        p.gates[0].end = 100; // 20 ns
        let r = validate_pattern(&p, &hw());
        assert_eq!(
            r.failures().map(|c| c.name.as_str()).collect::<Vec<_>>(),
            vec!["pockels_min_window", "idle_pattern"]
        );
    }

    #[test]
    fn oversized_payload_is_reported() {
        let h = hw();
        let mut slots: Vec<bool> = (0..h.horizon_slots()).map(|s| h.idle_bit(s)).collect();
        for s in slots.iter_mut().take(751) {
            *s = true;
        }
        let p = PulsePattern {
            slots,
            gates: vec![GateWindow { start: 0, end: 751 }],
            payloads: vec![PayloadWindow { start: 0, len: 751 }],
            idle_decimation: 4,
        };
        let r = validate_pattern(&p, &h);
        assert_eq!(r.failures().map(|c| c.name.as_str()).collect::<Vec<_>>(), vec!["steady_state_budget"]);
    }

    #[test]
    fn runs_round_trip() {
        let p = compile_pattern(&seq(&[(0, 2), (40, 1), (300, 4)]), &hw()).unwrap();
        assert_eq!(PulsePattern::from_runs(&p.runs()), p.slots);
    }

    #[test]
    fn segments_round_trip_and_stay_compact() {
        let h = HardwareConstraints::default();
        let p = compile_pattern(&seq(&[(0, 2), (40, 1), (300, 4)]), &h).unwrap();
        let segs = encode_segments(&p.slots, 4);
        assert!(segs.len() < 20, "{segs:?}");
        assert_eq!(decode_segments(&segs, 4).unwrap(), p.slots);
        let odd = vec![true, true, false, true, false, false, false, true, false];
        assert_eq!(decode_segments(&encode_segments(&odd, 3), 3).unwrap(), odd);
        assert_eq!(encode_segments(&[], 4), vec![]);
    }

    #[test]
    fn reference_chain_budget() {
        let b = dispersion_budget(&DispersionComponent::reference_chain()).unwrap();
        assert!((b.residual - -1.1).abs() < 1e-12);
        assert!(!b.balanced);
        let (name, dl) = b.length_correction.unwrap();
        assert_eq!(name, "stretcher");
        assert!((dl - -1.1 / 0.041).abs() < 1e-9);
    }

    #[test]
    fn single_component_unbalanced() {
        let b = dispersion_budget(&[DispersionComponent::fixed("CFBG", -9.5)]).unwrap();
        assert_eq!(b.residual, -9.5);
        assert!(!b.balanced);
        assert!(b.length_correction.is_none());
        assert!(dispersion_budget(&[]).is_err());
    }

    #[test]
    fn tuning_range_classifies_residuals() {
        let mk = |r: f64| vec![DispersionComponent::tunable("CFBG", 0.0, 0.005), DispersionComponent::fixed("rest", r)];
        assert!(dispersion_budget(&mk(0.004)).unwrap().balanced);
        assert!(!dispersion_budget(&mk(0.010)).unwrap().balanced);
        assert!(dispersion_budget(&mk(-0.004)).unwrap().balanced);
    }

    #[test]
    fn time_bandwidth() {
        let tl = tbp_check(1.0, crate::consts::GAUSSIAN_TBP).unwrap();
        assert!((tl.excess_over_gaussian - 1.0).abs() < 1e-15);
        let measured = tbp_check(560e-15, 0.49 / 560e-15).unwrap();
        assert!((measured.tbp - 0.49).abs() < 1e-12);
        assert!((measured.excess_over_gaussian - 1.111).abs() < 1e-3);
        assert!(((0.49 / 560e-15) / 1e9 - 875.0).abs() < 1e-9);
        assert!(tbp_check(0.0, 1.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn budget_is_permutation_invariant_and_additive(
                a in proptest::collection::vec(-20.0f64..20.0, 1..6),
                b in proptest::collection::vec(-20.0f64..20.0, 1..6),
            ) {
                let ca: Vec<_> = a.iter().map(|&d| DispersionComponent::tunable("x", d, 0.01)).collect();
                let cb: Vec<_> = b.iter().map(|&d| DispersionComponent::fixed("y", d)).collect();
                let mut rev = ca.clone();
                rev.reverse();
                let ra = dispersion_budget(&ca).unwrap();
                prop_assert!((ra.residual - dispersion_budget(&rev).unwrap().residual).abs() < 1e-12);
                let joined: Vec<_> = ca.iter().chain(&cb).cloned().collect();
                let rj = dispersion_budget(&joined).unwrap();
                let rb = dispersion_budget(&cb).unwrap();
                prop_assert!((rj.residual - (ra.residual + rb.residual)).abs() < 1e-12);
                prop_assert!((rj.tunable_margin - (ra.tunable_margin + rb.tunable_margin)).abs() < 1e-12);
            }
        }
    }
}
