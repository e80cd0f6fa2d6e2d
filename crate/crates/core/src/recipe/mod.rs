//! Experiment recipes. One TOML file describes a run; it is resolved into
//! the configurations of the physics modules, executed, and persisted as CSV
//! tables next to a JSON manifest.
//!
//! Physical keys carry their unit in the name (`duration_s`,
//! `linewidth_hz`, `field_step_mt`, ...). Unknown keys are rejected.

mod output;
mod resolve;
mod run;

pub use output::{execute, exit_code, write_fit_report, Manifest};
pub use resolve::{beta_from_power, ResolvedLine};
pub use run::{
    fit_table, read_xy_csv, run_bath_rabi, run_count_sweep, run_fluorescence, run_rabi, run_rotation, run_snr_compare,
    run_spectrum, BathRabiRun, CountSweep, CountSweepRow, FitModel, FitOptions, FluorescenceRun, RabiRun, SnrRow,
    SnrTable, Spectrum, SpectrumRow,
};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecipeKind {
    Spectrum,
    RotationPattern,
    Fluorescence,
    CountSweep,
    SnrCompare,
    Rabi,
    BathRabi,
}

impl RecipeKind {
    pub fn name(self) -> &'static str {
        match self {
            RecipeKind::Spectrum => "spectrum",
            RecipeKind::RotationPattern => "rotation_pattern",
            RecipeKind::Fluorescence => "fluorescence",
            RecipeKind::CountSweep => "count_sweep",
            RecipeKind::SnrCompare => "snr_compare",
            RecipeKind::Rabi => "rabi",
            RecipeKind::BathRabi => "bath_rabi",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentRecipe {
    pub kind: RecipeKind,
    /// Master seed; every random stream of the run derives from it.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub species: SpeciesSection,
    #[serde(default)]
    pub resonator: ResonatorSection,
    #[serde(default)]
    pub pulse: PulseSection,
    #[serde(default)]
    pub counter: CounterSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineKind {
    /// Width is the half width at half maximum.
    Lorentzian,
    /// Width is the standard deviation.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ion {
    /// Registry name of a species or of a low-symmetry doublet.
    pub name: String,
    /// Ions of this element per m³; the isotope abundance of the registry
    /// entry is applied on top.
    pub density_per_m3: f64,
    #[serde(default)]
    pub gamma_nr_per_s: Option<f64>,
    #[serde(default)]
    pub linewidth_hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpeciesSection {
    /// Alternative species table; the bundled one is used when absent.
    pub registry: Option<PathBuf>,
    pub ions: Vec<Ion>,
    pub phi_deg: f64,
    pub theta_c_deg: f64,
    pub lineshape: LineKind,
    pub linewidth_hz: f64,
    pub gamma_nr_per_s: f64,
}

impl Default for SpeciesSection {
    fn default() -> Self {
        SpeciesSection {
            registry: None,
            ions: Vec::new(),
            phi_deg: 0.0,
            theta_c_deg: 0.0,
            lineshape: LineKind::Gaussian,
            linewidth_hz: 1e6,
            gamma_nr_per_s: 0.15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Setup1,
    Setup2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Uniform,
    EdgePeaked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResonatorSection {
    pub preset: Preset,
    pub frequency_hz: Option<f64>,
    pub kappa_c_per_s: Option<f64>,
    pub kappa_i_per_s: Option<f64>,
    pub impedance_ohm: Option<f64>,
    pub wire_width_m: Option<f64>,
    pub wire_length_m: Option<f64>,
    pub wire_angle_deg: Option<f64>,
    pub current_profile: ProfileKind,
    pub grid_fine_cell_m: f64,
    pub grid_extent_m: f64,
}

impl Default for ResonatorSection {
    fn default() -> Self {
        ResonatorSection {
            preset: Preset::Setup1,
            frequency_hz: None,
            kappa_c_per_s: None,
            kappa_i_per_s: None,
            impedance_ohm: None,
            wire_width_m: None,
            wire_length_m: None,
            wire_angle_deg: None,
            current_profile: ProfileKind::EdgePeaked,
            grid_fine_cell_m: 10e-9,
            grid_extent_m: 50e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseSection {
    /// Drive amplitude at the resonator input. Alternatively give
    /// `input_power_dbm` and `attenuation_db`.
    pub beta_per_sqrt_ns: Option<f64>,
    pub input_power_dbm: Option<f64>,
    pub attenuation_db: Option<f64>,
    pub duration_s: f64,
    /// Pulse strengths for sweeps; each is reached by scaling the amplitude
    /// at fixed `duration_s`. Either a list or a log-spaced range.
    pub epsilons_sqrt_ns: Vec<f64>,
    /// Largest available amplitude. Stronger pulses in a sweep keep this
    /// amplitude and lengthen instead.
    pub beta_max_per_sqrt_ns: Option<f64>,
    pub epsilon_min_sqrt_ns: Option<f64>,
    pub epsilon_max_sqrt_ns: Option<f64>,
    pub epsilon_points: usize,
    /// Pulse durations for Rabi runs, linearly spaced.
    pub duration_start_s: Option<f64>,
    pub duration_stop_s: Option<f64>,
    pub duration_points: usize,
}

impl Default for PulseSection {
    fn default() -> Self {
        PulseSection {
            beta_per_sqrt_ns: None,
            input_power_dbm: None,
            attenuation_db: None,
            duration_s: 2e-6,
            epsilons_sqrt_ns: Vec::new(),
            beta_max_per_sqrt_ns: None,
            epsilon_min_sqrt_ns: None,
            epsilon_max_sqrt_ns: None,
            epsilon_points: 0,
            duration_start_s: None,
            duration_stop_s: None,
            duration_points: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterSection {
    pub cycle_s: f64,
    pub dead_time_s: f64,
    pub dark_rate_per_s: f64,
    pub repetition_s: f64,
    /// Counts are summed over this window after the dead time. SNR runs
    /// optimize the window and treat this as its upper limit.
    pub integration_s: f64,
    pub efficiency: f64,
    pub sequences: usize,
}

impl Default for CounterSection {
    fn default() -> Self {
        CounterSection {
            cycle_s: 12e-6,
            dead_time_s: 50e-6,
            dark_rate_per_s: 2e3,
            repetition_s: 2.0,
            integration_s: 0.1,
            efficiency: 0.15,
            sequences: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingKind {
    /// Coupling constants from the vacuum-field map of the wire.
    Map,
    /// `ρ(g) = ḡ²/g³` between `g_min_hz` and `g_max_hz`.
    ThinWire,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub coupling: CouplingKind,
    pub g_bins: usize,
    pub g_bar_hz: Option<f64>,
    pub g_min_hz: Option<f64>,
    pub g_max_hz: Option<f64>,
    pub field_start_mt: Option<f64>,
    pub field_stop_mt: Option<f64>,
    pub field_step_mt: Option<f64>,
    /// Static field for single-field runs; defaults to the first transition.
    pub field_mt: Option<f64>,
    pub time_points: usize,
    /// Sample detector clicks on top of the expected counts.
    pub noise: bool,
    pub background_subtract: bool,
    /// Window for the coarse-grained Monte Carlo rate trace.
    pub bin_s: f64,
    pub phi_start_deg: f64,
    pub phi_stop_deg: f64,
    pub phi_step_deg: f64,
    pub search_start_mt: Option<f64>,
    pub search_stop_mt: Option<f64>,
    pub search_step_mt: f64,
    /// Detunings spread over the cavity linewidth in Rabi runs.
    pub detunings: usize,
    pub g0_hz: Option<f64>,
    pub rabi_frequency_hz: Option<f64>,
    pub bath_sites: usize,
    pub bath_abundance: f64,
    pub bath_max_occupied: usize,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            coupling: CouplingKind::Map,
            g_bins: 60,
            g_bar_hz: None,
            g_min_hz: None,
            g_max_hz: None,
            field_start_mt: None,
            field_stop_mt: None,
            field_step_mt: None,
            field_mt: None,
            time_points: 200,
            noise: false,
            background_subtract: true,
            bin_s: 1e-3,
            phi_start_deg: 0.0,
            phi_stop_deg: 180.0,
            phi_step_deg: 5.0,
            search_start_mt: None,
            search_stop_mt: None,
            search_step_mt: 0.05,
            detunings: 1,
            g0_hz: None,
            rabi_frequency_hz: None,
            bath_sites: 15,
            bath_abundance: 0.14,
            bath_max_occupied: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// File name stem; defaults to the recipe kind.
    pub prefix: Option<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("."), prefix: None }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(config_err(format!("{name} must be a positive number, got {v}")))
    }
}

impl ExperimentRecipe {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let r: ExperimentRecipe = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        r.validate()?;
        Ok(r)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| e.context(path.display().to_string()))
    }

    /// Whether the run draws random numbers.
    pub fn is_stochastic(&self) -> bool {
        match self.kind {
            RecipeKind::SnrCompare => true,
            RecipeKind::Spectrum | RecipeKind::Fluorescence => self.simulation.noise,
            _ => false,
        }
    }

    pub fn file_stem(&self) -> String {
        self.output.prefix.clone().unwrap_or_else(|| self.kind.name().to_string())
    }

    /// Structural checks that need no physics; the rest surfaces while
    /// resolving.
    pub fn validate(&self) -> Result<()> {
        if self.is_stochastic() && self.seed.is_none() {
            return Err(config_err(format!("recipe `{}` draws random numbers and needs a `seed`", self.kind.name())));
        }
        let needs_ions = !matches!(self.kind, RecipeKind::Rabi);
        if needs_ions && self.species.ions.is_empty() {
            return Err(config_err("[species] needs at least one entry in `ions`"));
        }
        for ion in &self.species.ions {
            if !(ion.density_per_m3.is_finite() && ion.density_per_m3 >= 0.0) {
                return Err(config_err(format!("ion {}: density_per_m3 must be >= 0", ion.name)));
            }
        }
        positive("species.linewidth_hz", self.species.linewidth_hz)?;
        if !(self.species.gamma_nr_per_s >= 0.0) {
            return Err(config_err("species.gamma_nr_per_s must be >= 0"));
        }
        let c = &self.counter;
        positive("counter.cycle_s", c.cycle_s)?;
        positive("counter.repetition_s", c.repetition_s)?;
        positive("counter.integration_s", c.integration_s)?;
        if !(c.dead_time_s >= 0.0 && c.dark_rate_per_s >= 0.0) {
            return Err(config_err("counter.dead_time_s and counter.dark_rate_per_s must be >= 0"));
        }
        if !(0.0..=1.0).contains(&c.efficiency) {
            return Err(config_err("counter.efficiency must lie in [0, 1]"));
        }
        if c.dead_time_s + c.integration_s > c.repetition_s * (1.0 + 1e-12) {
            return Err(config_err("counter: dead_time_s + integration_s exceeds repetition_s"));
        }
        if self.is_stochastic() && c.sequences < 2 {
            return Err(config_err("counter.sequences must be >= 2 for statistics"));
        }
        positive("pulse.duration_s", self.pulse.duration_s)?;
        let s = &self.simulation;
        if s.g_bins == 0 || s.time_points < 2 {
            return Err(config_err("simulation.g_bins must be >= 1 and time_points >= 2"));
        }
        Ok(())
    }
}
