//! Run configuration: one JSON document with a section per subsystem.
//!
//! Every section and key is optional and falls back to the reference design.
//! Unknown keys are rejected. Units are part of the key names; frequencies
//! named `*_hz` are cycle frequencies (the trap frequency is ω/2π).

use std::f64::consts::TAU;
use std::fmt;
use std::path::Path;

use anyhow::{bail, Context};
use kickgate_core::consts;
use kickgate_core::hardware::{DispersionComponent, HardwareConstraints};
use kickgate_core::model::{Kick, KickSequence, TrapIonConfig};
use kickgate_core::optimizer::OptimizerConfig;
use kickgate_core::rap::ChirpedPulse;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A positive tolerance that may be infinite; written as a number or `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance(pub f64);

impl Serialize for Tolerance {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Tolerance {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Tolerance;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a positive number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Tolerance, E> {
                Ok(Tolerance(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Tolerance, E> {
                Ok(Tolerance(v as f64))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Tolerance, E> {
                Ok(Tolerance(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Tolerance, E> {
                match v.to_ascii_lowercase().as_str() {
                    "inf" | "+inf" | "infinity" => Ok(Tolerance(f64::INFINITY)),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IonSection {
    pub mass_amu: f64,
    pub kick_wavelength_nm: f64,
    pub excited_state_lifetime_ns: f64,
}

impl Default for IonSection {
    fn default() -> Self {
        Self { mass_amu: 40.0, kick_wavelength_nm: 393.3, excited_state_lifetime_ns: 6.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrapSection {
    pub trap_frequency_hz: f64,
}

impl Default for TrapSection {
    fn default() -> Self {
        Self { trap_frequency_hz: consts::TRAP_FREQUENCY_HZ }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LaserSection {
    pub repetition_rate_hz: f64,
    /// ħk per picked comb pulse.
    pub momentum_factor: f64,
    /// Delay between the two halves of a counter-propagating pair.
    pub t_wait_ps: f64,
    pub pulse_duration_ps: f64,
}

impl Default for LaserSection {
    fn default() -> Self {
        Self {
            repetition_rate_hz: consts::REPETITION_RATE,
            momentum_factor: 2.0,
            t_wait_ps: 0.742,
            pulse_duration_ps: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    pub population_size: usize,
    pub generations: usize,
    pub mutation_rate: f64,
    pub max_kicks: usize,
    pub max_multiplicity: u32,
    pub duration_budget_periods: f64,
    pub tolerance_eps: Tolerance,
    pub tolerance_phi_rad: Tolerance,
    pub rng_seed: u64,
    pub phase_target_rad: f64,
    pub weight_eps: f64,
    pub weight_phi: f64,
    pub elitism: usize,
    pub tournament_size: usize,
    pub max_phase_branch: u32,
    pub slot_window: Option<u64>,
    pub local_search: bool,
    /// Start from the phasor-balanced continuous seeds.
    pub continuous_seeds: bool,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let o = OptimizerConfig::default();
        Self {
            population_size: o.population_size,
            generations: o.generations,
            mutation_rate: o.mutation_rate,
            max_kicks: o.max_kicks,
            max_multiplicity: o.max_multiplicity,
            duration_budget_periods: o.duration_budget,
            tolerance_eps: Tolerance(o.tolerance_eps),
            tolerance_phi_rad: Tolerance(o.tolerance_phi),
            rng_seed: o.rng_seed,
            phase_target_rad: o.phase_target,
            weight_eps: o.weight_eps,
            weight_phi: o.weight_phi,
            elitism: o.elitism,
            tournament_size: o.tournament_size,
            max_phase_branch: o.max_phase_branch,
            slot_window: o.slot_window,
            local_search: o.local_search,
            continuous_seeds: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RapSection {
    pub fwhm_tl_ps: f64,
    pub gdd_ps2: f64,
    /// Peak Rabi frequency at the transform limit; defaults to a π pulse.
    pub peak_rabi_rad_per_s: Option<f64>,
    pub detuning_offset_rad_per_s: f64,
    pub energy_min: f64,
    pub energy_max: f64,
    pub points: usize,
    pub solver_tol: f64,
    /// Optional absolute energy axis: pulse energy per unit energy scale.
    pub energy_calibration_nj: Option<f64>,
}

impl Default for RapSection {
    fn default() -> Self {
        Self {
            fwhm_tl_ps: 1.0,
            gdd_ps2: 5.0,
            peak_rabi_rad_per_s: None,
            detuning_offset_rad_per_s: 0.0,
            energy_min: 0.01,
            energy_max: 100.0,
            points: 50,
            solver_tol: 1e-10,
            energy_calibration_nj: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EllipseSection {
    /// Two-column `u,v` CSV, relative to the config file. Synthetic data is
    /// generated from the fields below when absent.
    pub input: Option<String>,
    pub amp_u: f64,
    pub amp_v: f64,
    pub offset_u: f64,
    pub offset_v: f64,
    pub delta_phi_rad: f64,
    pub n: usize,
    pub noise: f64,
    pub rng_seed: u64,
}

impl Default for EllipseSection {
    fn default() -> Self {
        Self {
            input: None,
            amp_u: 1.0,
            amp_v: 1.0,
            offset_u: 1.0,
            offset_v: 1.0,
            delta_phi_rad: 0.7,
            n: 200,
            noise: 0.0,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub name: String,
    #[serde(default)]
    pub dispersion_ps_per_nm: Option<f64>,
    #[serde(default)]
    pub tunable_range_ps_per_nm: f64,
    /// Length-adjustable fiber: dispersion per meter and length.
    #[serde(default)]
    pub per_meter_ps_per_nm: Option<f64>,
    #[serde(default)]
    pub length_m: Option<f64>,
}

impl ComponentSpec {
    fn to_component(&self) -> anyhow::Result<DispersionComponent> {
        let mut c = match (self.dispersion_ps_per_nm, self.per_meter_ps_per_nm, self.length_m) {
            (None, Some(k), Some(l)) => DispersionComponent::fiber(&self.name, k, l),
            (Some(d), k, None) => DispersionComponent { per_meter: k, ..DispersionComponent::fixed(&self.name, d) },
            (Some(_), _, Some(_)) => {
                bail!("dispersion.components[{}]: give either dispersion_ps_per_nm or length_m, not both", self.name)
            }
            (None, _, _) => bail!(
                "dispersion.components[{}]: needs dispersion_ps_per_nm or per_meter_ps_per_nm with length_m",
                self.name
            ),
        };
        c.tunable_range = self.tunable_range_ps_per_nm;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DispersionSection {
    pub components: Vec<ComponentSpec>,
    pub pulse_fwhm_fs: Option<f64>,
    pub spectral_fwhm_ghz: Option<f64>,
}

impl Default for DispersionSection {
    fn default() -> Self {
        let spec = |name: &str, d: Option<f64>, tune: f64, k: Option<f64>, l: Option<f64>| ComponentSpec {
            name: name.to_string(),
            dispersion_ps_per_nm: d,
            tunable_range_ps_per_nm: tune,
            per_meter_ps_per_nm: k,
            length_m: l,
        };
        Self {
            components: vec![
                spec("CFBG", Some(-9.5), 0.005, None, None),
                spec("CVBG", Some(12.5), 0.0, None, None),
                spec("stretcher", None, 0.0, Some(-0.041), Some(100.0)),
            ],
            pulse_fwhm_fs: Some(560.0),
            spectral_fwhm_ghz: Some(875.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HardwareSection {
    pub slot_period_ps: f64,
    pub pockels_min_window_ns: f64,
    pub steady_state_budget_slots: u64,
    pub idle_decimation: u64,
    pub payload_energy_factor: f64,
    pub settle_time_us: f64,
    pub horizon_us: f64,
    /// Split long sequences into several steady-state epochs.
    pub multi_epoch: bool,
}

impl Default for HardwareSection {
    fn default() -> Self {
        Self {
            slot_period_ps: 200.0,
            pockels_min_window_ns: 35.0,
            steady_state_budget_slots: 750,
            idle_decimation: 4,
            payload_energy_factor: 4.0,
            settle_time_us: 1.0,
            horizon_us: 1000.0,
            multi_epoch: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SequenceSection {
    /// `[slot, multiplicity]` pairs on the repetition-rate grid.
    pub kicks: Option<Vec<[u64; 2]>>,
    /// A `best_sequence.json` written by `design-gate`, relative to the
    /// config file.
    pub file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ErrorBudgetSection {
    /// Number of picked pulses.
    pub kicks: u64,
}

impl Default for ErrorBudgetSection {
    fn default() -> Self {
        Self { kicks: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub ion: IonSection,
    pub trap: TrapSection,
    pub laser: LaserSection,
    pub optimizer: OptimizerSection,
    pub rap: RapSection,
    pub ellipse: EllipseSection,
    pub dispersion: DispersionSection,
    pub hardware: HardwareSection,
    pub sequence: SequenceSection,
    pub error_budget: ErrorBudgetSection,
}

/// A parse failure that names the offending key.
#[derive(Debug)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        if self.path.is_empty() || self.path == "." {
            write!(f, "config: {}", self.message)
        } else {
            write!(f, "config key `{}`: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            // serde reports unknown keys against the enclosing object
            let message = inner.to_string();
            ConfigError { path, message }
        })
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(Self::from_json(&text)?)
    }

    /// Canonical serialization used for the config hash.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn trap_ion(&self) -> TrapIonConfig {
        TrapIonConfig {
            ion_mass: self.ion.mass_amu * consts::AMU,
            kick_wavelength: self.ion.kick_wavelength_nm * 1e-9,
            trap_frequency: TAU * self.trap.trap_frequency_hz,
            repetition_rate: self.laser.repetition_rate_hz,
            excited_state_lifetime: self.ion.excited_state_lifetime_ns * 1e-9,
        }
    }

    pub fn optimizer(&self) -> OptimizerConfig {
        let o = &self.optimizer;
        OptimizerConfig {
            population_size: o.population_size,
            generations: o.generations,
            mutation_rate: o.mutation_rate,
            max_kicks: o.max_kicks,
            max_multiplicity: o.max_multiplicity,
            duration_budget: o.duration_budget_periods,
            tolerance_eps: o.tolerance_eps.0,
            tolerance_phi: o.tolerance_phi_rad.0,
            rng_seed: o.rng_seed,
            phase_target: o.phase_target_rad,
            momentum_factor: self.laser.momentum_factor,
            weight_eps: o.weight_eps,
            weight_phi: o.weight_phi,
            elitism: o.elitism,
            tournament_size: o.tournament_size,
            max_phase_branch: o.max_phase_branch,
            slot_window: o.slot_window,
            local_search: o.local_search,
        }
    }

    pub fn pulse(&self) -> ChirpedPulse {
        let r = &self.rap;
        let mut p = ChirpedPulse::with_pi_area(r.fwhm_tl_ps * 1e-12, r.gdd_ps2 * 1e-24);
        if let Some(om) = r.peak_rabi_rad_per_s {
            p.peak_rabi = om;
        }
        p.detuning_offset = r.detuning_offset_rad_per_s;
        p
    }

    pub fn hardware(&self) -> HardwareConstraints {
        let h = &self.hardware;
        HardwareConstraints {
            slot_period: h.slot_period_ps * 1e-12,
            pockels_min_window: h.pockels_min_window_ns * 1e-9,
            steady_state_budget_slots: h.steady_state_budget_slots,
            idle_decimation: h.idle_decimation,
            payload_energy_factor: h.payload_energy_factor,
            settle_time: h.settle_time_us * 1e-6,
            horizon: h.horizon_us * 1e-6,
        }
    }

    pub fn components(&self) -> anyhow::Result<Vec<DispersionComponent>> {
        self.dispersion.components.iter().map(ComponentSpec::to_component).collect()
    }

    /// The sequence named by the `sequence` section, if any. `base` resolves
    /// relative file names.
    pub fn sequence(&self, base: &Path) -> anyhow::Result<Option<KickSequence>> {
        let grid = 1.0 / self.laser.repetition_rate_hz;
        let m = self.laser.momentum_factor;
        match (&self.sequence.kicks, &self.sequence.file) {
            (Some(_), Some(_)) => bail!("config key `sequence`: give either kicks or file, not both"),
            (Some(k), None) => {
                let kicks = k
                    .iter()
                    .map(|&[slot, z]| u32::try_from(z).map(|z| Kick::new(slot, z)))
                    .collect::<Result<Vec<_>, _>>()
                    .context("config key `sequence.kicks`: multiplicity out of range")?;
                Ok(Some(KickSequence::new(kicks, m, grid)?))
            }
            (None, Some(f)) => {
                let path = base.join(f);
                let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                let doc: SequenceFile =
                    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
                let kicks = doc.kicks.iter().map(|k| Kick::new(k.slot, k.multiplicity)).collect();
                Ok(Some(KickSequence::new(kicks, doc.momentum_factor, doc.grid_period_s)?))
            }
            (None, None) => Ok(None),
        }
    }
}

/// Layout of `best_sequence.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceFile {
    pub grid_period_s: f64,
    pub momentum_factor: f64,
    pub kicks: Vec<KickEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KickEntry {
    pub slot: u64,
    pub multiplicity: u32,
    pub time_s: f64,
}

impl SequenceFile {
    pub fn from_sequence(seq: &KickSequence) -> Self {
        Self {
            grid_period_s: seq.grid_period(),
            momentum_factor: seq.momentum_factor(),
            kicks: seq
                .kicks()
                .iter()
                .enumerate()
                .map(|(n, k)| KickEntry { slot: k.slot, multiplicity: k.multiplicity, time_s: seq.time(n) })
                .collect(),
        }
    }
}
