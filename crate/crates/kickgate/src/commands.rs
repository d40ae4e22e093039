//! One function per subcommand. Each returns its artifacts in memory; the
//! caller decides where (and whether) to write them.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context as _};
use kickgate_core::error_model::{per_kick_error, KickErrorBudget};
use kickgate_core::hardware::{
    compile_multi_epoch, compile_pattern, dispersion_budget, encode_segments, tbp_check, validate_pattern, GateWindow,
    HardwareConstraints, PayloadWindow, PulsePattern, Segment, ValidationReport,
};
use kickgate_core::interferometry::{fit_ellipse, phase_from_ellipse, synthesize, PulsePairSamples, SynthesisParams};
use kickgate_core::model::{
    evaluate, trajectory, GateResult, Kick, KickSequence, Mode, SpinConfiguration, TrapIonConfig,
};
use kickgate_core::optimizer::{continuous_seed, default_seeds, evolve, Outcome};
use kickgate_core::rap::{log_grid, rap_scan, stretch};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::bitstream::Bitstream;
use crate::config::{RunConfig, SequenceFile};
use crate::output::{self, Csv, Meta, Plot, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    DesignGate,
    SimulateTrajectory,
    RapScan,
    FitEllipse,
    Dispersion,
    Pattern,
    ErrorBudget,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::DesignGate,
        Command::SimulateTrajectory,
        Command::RapScan,
        Command::FitEllipse,
        Command::Dispersion,
        Command::Pattern,
        Command::ErrorBudget,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::DesignGate => "design-gate",
            Command::SimulateTrajectory => "simulate-trajectory",
            Command::RapScan => "rap-scan",
            Command::FitEllipse => "fit-ellipse",
            Command::Dispersion => "dispersion",
            Command::Pattern => "pattern",
            Command::ErrorBudget => "error-budget",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    fn new(name: &str, bytes: Vec<u8>) -> Self {
        Self { name: name.to_string(), bytes }
    }

    pub fn extension(&self) -> &str {
        Path::new(&self.name).extension().and_then(|e| e.to_str()).unwrap_or("")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    /// Artifacts hold a best effort that misses the requested tolerances.
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct Run {
    pub artifacts: Vec<Artifact>,
    pub status: Status,
    /// One line for stdout.
    pub summary: String,
}

/// A resolved configuration plus where its relative paths point.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub config: RunConfig,
    pub base_dir: PathBuf,
}

impl Invocation {
    pub fn new(mut config: RunConfig, base_dir: PathBuf, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            config.optimizer.rng_seed = s;
            config.ellipse.rng_seed = s;
        }
        Self { config, base_dir }
    }

    pub fn config_sha256(&self) -> [u8; 32] {
        let digest = Sha256::digest(self.config.canonical_json().as_bytes());
        let mut out = [0u8; 32];
        out.copy_from_slice(&digest);
        out
    }

    fn meta(&self, cmd: Command, seed: u64) -> Meta {
        Meta {
            tool: output::TOOL,
            version: output::VERSION,
            subcommand: cmd.name().to_string(),
            config_sha256: hex::encode(self.config_sha256()),
            seed,
        }
    }
}

pub fn run(cmd: Command, inv: &Invocation) -> anyhow::Result<Run> {
    match cmd {
        Command::DesignGate => design_gate(inv),
        Command::SimulateTrajectory => simulate_trajectory(inv),
        Command::RapScan => rap(inv),
        Command::FitEllipse => ellipse(inv),
        Command::Dispersion => dispersion(inv),
        Command::Pattern => pattern(inv),
        Command::ErrorBudget => error_budget(inv),
    }
}

fn success(artifacts: Vec<Artifact>, summary: String) -> anyhow::Result<Run> {
    Ok(Run { artifacts, status: Status::Success, summary })
}

fn trap(inv: &Invocation) -> anyhow::Result<TrapIonConfig> {
    let cfg = inv.config.trap_ion();
    cfg.validate()?;
    Ok(cfg)
}

fn per_pulse_error(inv: &Invocation, cfg: &TrapIonConfig) -> anyhow::Result<f64> {
    let l = &inv.config.laser;
    Ok(per_kick_error(l.t_wait_ps * 1e-12, l.pulse_duration_ps * 1e-12, cfg.decay_rate())?)
}

#[derive(Serialize)]
struct GateReport<'a> {
    outcome: &'static str,
    feasible: bool,
    gate_error: f64,
    phase_rad: f64,
    phase_target_rad: f64,
    phase_violation_rad: f64,
    duration_periods: f64,
    duration_s: f64,
    pulse_count: u64,
    kick_count: usize,
    per_pulse_error: f64,
    spontaneous_infidelity: f64,
    closure_com: [f64; 2],
    closure_stretch: [f64; 2],
    fitness: f64,
    evaluations: u64,
    generations: usize,
    hardware: &'a HardwareStatus,
}

#[derive(Serialize)]
struct HardwareStatus {
    mode: &'static str,
    compiled: bool,
    error: Option<String>,
    validation_passed: Option<bool>,
}

fn design_gate(inv: &Invocation) -> anyhow::Result<Run> {
    let cfg = trap(inv)?;
    let opt = inv.config.optimizer();
    let meta = inv.meta(Command::DesignGate, opt.rng_seed);
    let mut seeds = if inv.config.optimizer.continuous_seeds { default_seeds(&cfg, &opt)? } else { Vec::new() };
    if let Some(s) = inv.config.sequence(&inv.base_dir)? {
        seeds.push(s);
    }
    let evo = evolve(&seeds, &opt, &cfg)?;
    let best = &evo.best;
    let eps1 = per_pulse_error(inv, &cfg)?;
    let result = evaluate(&best.sequence, &cfg, eps1)?;

    let mut artifacts =
        vec![Artifact::new("best_sequence.json", output::json(&meta, &SequenceFile::from_sequence(&best.sequence))?)];

    let hw = inv.config.hardware();
    let mode = if inv.config.hardware.multi_epoch { "multi_epoch" } else { "single_window" };
    let compiled = hw.validate().map_err(anyhow::Error::from).and_then(|_| compile(&best.sequence, inv, &hw));
    let hardware = match compiled {
        Ok((p, report)) => {
            let status = HardwareStatus { mode, compiled: true, error: None, validation_passed: Some(report.passed()) };
            artifacts.extend(pattern_artifacts(inv, &meta, &best.sequence, &hw, &p, &report)?);
            status
        }
        Err(e) => HardwareStatus { mode, compiled: false, error: Some(format!("{e:#}")), validation_passed: None },
    };

    let feasible = evo.outcome == Outcome::Feasible;
    let report = GateReport {
        outcome: if feasible { "feasible" } else { "infeasible" },
        feasible,
        gate_error: result.gate_error,
        phase_rad: result.phase,
        phase_target_rad: opt.phase_target,
        phase_violation_rad: best.phase_violation,
        duration_periods: result.duration_periods,
        duration_s: result.duration,
        pulse_count: result.pulse_count,
        kick_count: best.sequence.len(),
        per_pulse_error: eps1,
        spontaneous_infidelity: result.infidelity_spontaneous,
        closure_com: [result.closure_c.re, result.closure_c.im],
        closure_stretch: [result.closure_s.re, result.closure_s.im],
        fitness: best.fitness,
        evaluations: evo.evaluations,
        generations: evo.history.len(),
        hardware: &hardware,
    };
    artifacts.push(Artifact::new("gate_report.json", output::json(&meta, &report)?));

    let mut history =
        Csv::new(&meta, &["generation", "best_fitness", "best_gate_error", "best_duration_periods", "feasible_count"]);
    for g in &evo.history {
        history.row(&[
            g.generation.to_string(),
            g.best_fitness.to_string(),
            g.best_gate_error.to_string(),
            g.best_duration_periods.to_string(),
            g.feasible_count.to_string(),
        ]);
    }
    artifacts.push(Artifact::new("history.csv", history.into_bytes()));
    artifacts.extend(trajectory_artifacts(&meta, &best.sequence, &cfg)?);

    let summary = format!(
        "{}: {} kicks, {} pulses, {:.4} trap periods, eps = {:.3e}, phi = {:.6} rad, hardware {}",
        report.outcome,
        report.kick_count,
        report.pulse_count,
        report.duration_periods,
        report.gate_error,
        report.phase_rad,
        if hardware.compiled { "compiled" } else { "not compiled" },
    );
    let status = if feasible { Status::Success } else { Status::Infeasible };
    Ok(Run { artifacts, status, summary })
}

fn trajectory_artifacts(meta: &Meta, seq: &KickSequence, cfg: &TrapIonConfig) -> anyhow::Result<Vec<Artifact>> {
    let mut csv = Csv::new(meta, &["spin", "mode", "vertex", "re", "im"]);
    let mut plots: Vec<(Mode, Vec<Series>)> = Mode::BOTH.iter().map(|&m| (m, Vec::new())).collect();
    for spin in SpinConfiguration::ALL {
        let traj = trajectory(seq, cfg, spin)?;
        for m in [&traj.center_of_mass, &traj.stretch] {
            for (i, v) in m.vertices.iter().enumerate() {
                csv.row(&[
                    spin.label().into(),
                    m.mode.label().into(),
                    i.to_string(),
                    v.re.to_string(),
                    v.im.to_string(),
                ]);
            }
            if spin.factor(m.mode) != 0 {
                let series = Series {
                    label: format!("spins {}", spin.label()),
                    points: m.vertices.iter().map(|v| (v.re, v.im)).collect(),
                    markers: true,
                };
                plots.iter_mut().find(|(mode, _)| *mode == m.mode).unwrap().1.push(series);
            }
        }
    }
    let mut out = vec![Artifact::new("trajectory.csv", csv.into_bytes())];
    for (mode, series) in plots {
        let name = match mode {
            Mode::CenterOfMass => "center-of-mass",
            Mode::Stretch => "stretch",
        };
        let plot = Plot {
            title: format!("{name} mode phase space, rotating frame"),
            x_label: "Re displacement".into(),
            y_label: "Im displacement".into(),
            log_x: false,
            equal_aspect: true,
            series,
        };
        out.push(Artifact::new(&format!("trajectory_{}.svg", mode.label()), plot.render(meta)));
    }
    Ok(out)
}

#[derive(Serialize)]
struct SimulationReport {
    sequence: SequenceFile,
    source: &'static str,
    result: GateResult,
    per_pulse_error: f64,
}

fn simulate_trajectory(inv: &Invocation) -> anyhow::Result<Run> {
    let cfg = trap(inv)?;
    let meta = inv.meta(Command::SimulateTrajectory, inv.config.optimizer.rng_seed);
    let (seq, source) = match inv.config.sequence(&inv.base_dir)? {
        Some(s) => (s, "config"),
        None => {
            (continuous_seed(&cfg, 4)?.with_momentum_factor(inv.config.laser.momentum_factor)?, "continuous_seed_4")
        }
    };
    let eps1 = per_pulse_error(inv, &cfg)?;
    let result = evaluate(&seq, &cfg, eps1)?;
    let summary = format!(
        "{} kicks, {:.4} trap periods, eps = {:.3e}, phi = {:.6} rad",
        seq.len(),
        result.duration_periods,
        result.gate_error,
        result.phase
    );
    let report =
        SimulationReport { sequence: SequenceFile::from_sequence(&seq), source, result, per_pulse_error: eps1 };
    let mut artifacts = vec![Artifact::new("gate_result.json", output::json(&meta, &report)?)];
    artifacts.extend(trajectory_artifacts(&meta, &seq, &cfg)?);
    success(artifacts, summary)
}

/// 1 - exp(-π Ω² / 2|β|) for the peak Rabi frequency Ω and sweep rate β.
fn landau_zener(rabi: f64, chirp_rate: f64) -> f64 {
    if chirp_rate == 0.0 {
        return f64::NAN;
    }
    -(-PI * rabi * rabi / (2.0 * chirp_rate.abs())).exp_m1()
}

#[derive(Serialize)]
struct RapReport {
    fwhm_tl_s: f64,
    gdd_s2: f64,
    fwhm_out_s: f64,
    chirp_rate_rad_per_s2: f64,
    peak_rabi_rad_per_s: f64,
    solver_tol: f64,
    points: usize,
    plateau_threshold: f64,
    plateau_energy: Option<(f64, f64)>,
    plateau_ratio: Option<f64>,
    max_norm_error: f64,
    total_steps: usize,
}

fn rap(inv: &Invocation) -> anyhow::Result<Run> {
    let r = &inv.config.rap;
    ensure!(r.points >= 1, "config key `rap.points`: need at least one point");
    ensure!(
        r.energy_min > 0.0 && r.energy_max >= r.energy_min && r.energy_max.is_finite(),
        "config keys `rap.energy_min`/`rap.energy_max`: need 0 < min <= max"
    );
    let pulse = inv.config.pulse();
    pulse.validate()?;
    let meta = inv.meta(Command::RapScan, 0);
    let grid = log_grid(r.energy_min, r.energy_max, r.points);
    let scan = rap_scan(&pulse, &grid, r.solver_tol)?;
    let s = stretch(&pulse);

    let mut cols = vec!["energy_scale", "probability", "landau_zener", "max_norm_error", "steps"];
    if r.energy_calibration_nj.is_some() {
        cols.push("pulse_energy_nj");
    }
    let mut csv = Csv::new(&meta, &cols);
    for p in &scan.points {
        let mut row = vec![
            p.energy_scale.to_string(),
            p.excitation_probability.to_string(),
            landau_zener(pulse.stretched_peak_rabi(p.energy_scale), s.chirp_rate).to_string(),
            p.max_norm_error.to_string(),
            p.steps.to_string(),
        ];
        if let Some(k) = r.energy_calibration_nj {
            row.push((k * p.energy_scale).to_string());
        }
        csv.row(&row);
    }
    let plot = Plot {
        title: format!("excitation after {} ps^2 of GDD", r.gdd_ps2),
        x_label: "pulse energy (units of the transform-limited pi pulse)".into(),
        y_label: "excited-state probability".into(),
        log_x: true,
        equal_aspect: false,
        series: vec![Series {
            label: "two-level simulation".into(),
            points: scan.points.iter().map(|p| (p.energy_scale, p.excitation_probability)).collect(),
            markers: true,
        }],
    };
    let report = RapReport {
        fwhm_tl_s: pulse.fwhm_tl,
        gdd_s2: pulse.gdd,
        fwhm_out_s: s.fwhm_out,
        chirp_rate_rad_per_s2: s.chirp_rate,
        peak_rabi_rad_per_s: pulse.peak_rabi,
        solver_tol: scan.solver_tol,
        points: scan.points.len(),
        plateau_threshold: kickgate_core::rap::PLATEAU_THRESHOLD,
        plateau_energy: scan.plateau,
        plateau_ratio: scan.plateau_ratio(),
        max_norm_error: scan.max_norm_error(),
        total_steps: scan.total_steps(),
    };
    let summary = match report.plateau_ratio {
        Some(x) => format!("{} points, plateau spans a factor {x:.2} in energy", report.points),
        None => format!("{} points, no plateau above {}", report.points, report.plateau_threshold),
    };
    success(
        vec![
            Artifact::new("rap_scan.csv", csv.into_bytes()),
            Artifact::new("rap_scan.svg", plot.render(&meta)),
            Artifact::new("rap_scan.json", output::json(&meta, &report)?),
        ],
        summary,
    )
}

/// Reads `u,v` rows; blank lines, `#` comments and a non-numeric header
/// row are skipped.
pub fn read_samples(text: &str) -> anyhow::Result<PulsePairSamples> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = match fields.as_slice() {
            [u, v] => u.parse::<f64>().and_then(|u| v.parse::<f64>().map(|v| (u, v))),
            _ => bail!("line {}: expected two comma-separated columns", i + 1),
        };
        match parsed {
            Ok(p) => points.push(p),
            Err(_) if points.is_empty() => continue,
            Err(e) => bail!("line {}: {e}", i + 1),
        }
    }
    Ok(PulsePairSamples::new(points)?)
}

#[derive(Serialize)]
struct EllipseReport {
    source: String,
    n_points: usize,
    delta_phi_rad: f64,
    ambiguous: bool,
    degenerate: bool,
    residual_rms: f64,
    conic: [f64; 6],
    synthetic_delta_phi_rad: Option<f64>,
}

fn ellipse(inv: &Invocation) -> anyhow::Result<Run> {
    let e = &inv.config.ellipse;
    let meta = inv.meta(Command::FitEllipse, e.rng_seed);
    let mut artifacts = Vec::new();
    let (samples, source, truth) = match &e.input {
        Some(f) => {
            let path = inv.base_dir.join(f);
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let s = read_samples(&text).with_context(|| format!("parsing {}", path.display()))?;
            (s, f.clone(), None)
        }
        None => {
            let p = SynthesisParams {
                amp_u: e.amp_u,
                amp_v: e.amp_v,
                offset_u: e.offset_u,
                offset_v: e.offset_v,
                delta_phi: e.delta_phi_rad,
                n: e.n,
                noise: e.noise,
                rng_seed: e.rng_seed,
            };
            let s = synthesize(&p)?;
            let mut csv = Csv::new(&meta, &["u", "v"]);
            for (u, v) in &s.points {
                csv.row(&[u.to_string(), v.to_string()]);
            }
            artifacts.push(Artifact::new("samples.csv", csv.into_bytes()));
            (s, "synthetic".to_string(), Some(e.delta_phi_rad))
        }
    };
    let fit = fit_ellipse(&samples)?;
    let est = phase_from_ellipse(&fit);
    let c = fit.conic;
    let report = EllipseReport {
        source,
        n_points: samples.points.len(),
        delta_phi_rad: est.delta_phi,
        ambiguous: est.ambiguous,
        degenerate: fit.degenerate,
        residual_rms: fit.residual_rms,
        conic: [c.a, c.b, c.c, c.d, c.e, c.f],
        synthetic_delta_phi_rad: truth,
    };
    let summary = format!(
        "delta_phi = {:.9} rad{}",
        est.delta_phi,
        if est.ambiguous { " (degenerate: points are collinear)" } else { "" }
    );
    artifacts.push(Artifact::new("ellipse_fit.json", output::json(&meta, &report)?));
    success(artifacts, summary)
}

#[derive(Serialize)]
struct DispersionReport {
    components: Vec<ComponentLine>,
    residual_ps_per_nm: f64,
    tunable_margin_ps_per_nm: f64,
    balanced: bool,
    length_correction: Option<LengthCorrection>,
    note: String,
    time_bandwidth: Option<TbpLine>,
}

#[derive(Serialize)]
struct ComponentLine {
    name: String,
    dispersion_ps_per_nm: f64,
    tunable_range_ps_per_nm: f64,
}

#[derive(Serialize)]
struct LengthCorrection {
    component: String,
    /// Negative: remove fiber.
    delta_length_m: f64,
}

#[derive(Serialize)]
struct TbpLine {
    product: f64,
    excess_over_gaussian: f64,
}

fn dispersion(inv: &Invocation) -> anyhow::Result<Run> {
    let meta = inv.meta(Command::Dispersion, 0);
    let comps = inv.config.components()?;
    let b = dispersion_budget(&comps)?;
    let d = &inv.config.dispersion;
    let time_bandwidth = match (d.pulse_fwhm_fs, d.spectral_fwhm_ghz) {
        (Some(t), Some(f)) => {
            let c = tbp_check(t * 1e-15, f * 1e9)?;
            Some(TbpLine { product: c.tbp, excess_over_gaussian: c.excess_over_gaussian })
        }
        (None, None) => None,
        _ => bail!("config keys `dispersion.pulse_fwhm_fs`/`dispersion.spectral_fwhm_ghz`: give both or neither"),
    };
    let summary =
        format!("residual {:+.4} ps/nm, {}", b.residual, if b.balanced { "balanced" } else { "not balanced" });
    let report = DispersionReport {
        components: comps
            .iter()
            .map(|c| ComponentLine {
                name: c.name.clone(),
                dispersion_ps_per_nm: c.dispersion,
                tunable_range_ps_per_nm: c.tunable_range,
            })
            .collect(),
        residual_ps_per_nm: b.residual,
        tunable_margin_ps_per_nm: b.tunable_margin,
        balanced: b.balanced,
        length_correction: b
            .length_correction
            .map(|(component, delta_length_m)| LengthCorrection { component, delta_length_m }),
        note: b.note,
        time_bandwidth,
    };
    success(vec![Artifact::new("dispersion.json", output::json(&meta, &report)?)], summary)
}

fn compile(
    seq: &KickSequence,
    inv: &Invocation,
    hw: &HardwareConstraints,
) -> anyhow::Result<(PulsePattern, ValidationReport)> {
    let rel = (seq.grid_period() - hw.slot_period).abs() / hw.slot_period;
    ensure!(
        rel < 1e-9,
        "hardware slot period {} s differs from the laser grid {} s",
        hw.slot_period,
        seq.grid_period()
    );
    let p = if inv.config.hardware.multi_epoch { compile_multi_epoch(seq, hw)? } else { compile_pattern(seq, hw)? };
    let report = validate_pattern(&p, hw);
    Ok((p, report))
}

#[derive(Serialize)]
struct PatternReport<'a> {
    slot_period_s: f64,
    horizon_slots: usize,
    idle_decimation: u64,
    payload_energy_factor: f64,
    transmitted: usize,
    transmitted_payload: usize,
    kicks: Vec<Kick>,
    gates: Vec<GateLine>,
    payloads: &'a [PayloadWindow],
    segments: Vec<Segment>,
    validation: &'a ValidationReport,
}

#[derive(Serialize)]
struct GateLine {
    #[serde(flatten)]
    window: GateWindow,
    start_s: f64,
    end_s: f64,
}

fn pattern_artifacts(
    inv: &Invocation,
    meta: &Meta,
    seq: &KickSequence,
    hw: &HardwareConstraints,
    p: &PulsePattern,
    report: &ValidationReport,
) -> anyhow::Result<Vec<Artifact>> {
    let body = PatternReport {
        slot_period_s: hw.slot_period,
        horizon_slots: p.slots.len(),
        idle_decimation: p.idle_decimation,
        payload_energy_factor: hw.payload_energy_factor,
        transmitted: p.transmitted(),
        transmitted_payload: p.transmitted_payload(),
        kicks: seq.kicks().to_vec(),
        gates: p
            .gates
            .iter()
            .map(|&g| GateLine { window: g, start_s: g.start_time(hw.slot_period), end_s: g.end_time(hw.slot_period) })
            .collect(),
        payloads: &p.payloads,
        segments: encode_segments(&p.slots, p.idle_decimation),
        validation: report,
    };
    let bits = Bitstream {
        slot_period: hw.slot_period,
        config_sha256: inv.config_sha256(),
        tool_version: output::VERSION.to_string(),
        slots: p.slots.clone(),
    };
    Ok(vec![Artifact::new("pattern.json", output::json(meta, &body)?), Artifact::new("pattern.bin", bits.encode()?)])
}

fn pattern(inv: &Invocation) -> anyhow::Result<Run> {
    let meta = inv.meta(Command::Pattern, 0);
    let hw = inv.config.hardware();
    hw.validate()?;
    let seq = match inv.config.sequence(&inv.base_dir)? {
        Some(s) => s,
        None => KickSequence::new(vec![Kick::new(0, 50)], inv.config.laser.momentum_factor, hw.slot_period)?,
    };
    let (p, report) = compile(&seq, inv, &hw)?;
    let failures: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
    let summary = format!(
        "{} slots, {} gate(s), {} payload pulses, validation {}",
        p.slots.len(),
        p.gates.len(),
        p.transmitted_payload(),
        if failures.is_empty() { "passed".to_string() } else { format!("FAILED: {}", failures.join(", ")) }
    );
    let artifacts = pattern_artifacts(inv, &meta, &seq, &hw, &p, &report)?;
    ensure!(failures.is_empty(), "compiled pattern failed validation: {}", failures.join(", "));
    success(artifacts, summary)
}

fn error_budget(inv: &Invocation) -> anyhow::Result<Run> {
    let cfg = trap(inv)?;
    let meta = inv.meta(Command::ErrorBudget, 0);
    let l = &inv.config.laser;
    let b = KickErrorBudget::new(
        l.t_wait_ps * 1e-12,
        l.pulse_duration_ps * 1e-12,
        cfg.decay_rate(),
        inv.config.error_budget.kicks,
    )?;
    let line = output::json_line(&meta, &b)?;
    let summary = String::from_utf8(line.clone())?.trim_end().to_string();
    success(vec![Artifact::new("error_budget.json", line)], summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inv(json: &str) -> Invocation {
        Invocation::new(RunConfig::from_json(json).unwrap(), PathBuf::from("."), None)
    }

    #[test]
    fn seed_override_changes_hash() {
        let a = Invocation::new(RunConfig::default(), ".".into(), None);
        let b = Invocation::new(RunConfig::default(), ".".into(), Some(9));
        assert_ne!(a.config_sha256(), b.config_sha256());
        assert_eq!(b.config.optimizer.rng_seed, 9);
    }

    #[test]
    fn sample_reader_skips_header_and_comments() {
        let s = read_samples("# c\nu,v\n1,2\n\n3, 4\n5,6\n7,8\n9,1\n2,2\n").unwrap();
        assert_eq!(s.points.len(), 6);
        assert_eq!(s.points[1], (3.0, 4.0));
        assert!(read_samples("1,2\nx,3\n").is_err());
        assert!(read_samples("1,2,3\n").is_err());
    }

    #[test]
    fn lz_formula() {
        assert!((landau_zener(1.0, 2.0 * PI) - (1.0 - (-0.25f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn error_budget_is_one_line() {
        let r = run(Command::ErrorBudget, &inv("{}")).unwrap();
        assert_eq!(r.artifacts.len(), 1);
        let text = String::from_utf8(r.artifacts[0].bytes.clone()).unwrap();
        assert_eq!(text.lines().count(), 1);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!((v["total_infidelity"].as_f64().unwrap() - 7.196e-4).abs() < 1e-6);
    }

    #[test]
    fn mismatched_slot_period_is_rejected() {
        let e =
            run(Command::Pattern, &inv(r#"{"hardware": {"slot_period_ps": 100}, "sequence": {"kicks": [[0, 2]]}}"#))
                .unwrap_err();
        assert!(e.to_string().contains("slot period"), "{e}");
    }
}
