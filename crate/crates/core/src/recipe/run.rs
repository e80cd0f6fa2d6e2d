use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::bath::{
    bath_averaged_rabi, detunings_within_linewidth, period_contrast, tungsten_sites, BathConfig, Lattice, NuclearSite,
};
use crate::bloch::{evolve_packet, CavityDrive, EvolveOptions, Pulse, SpinPacket};
use crate::constants::{SQRT_NS, TWO_PI};
use crate::counter::{
    coarse_grain, count_statistics, id_snr, sample_clicks, CountHistogram, CounterConfig, RateTrace,
};
use crate::error::{Error, Result};
use crate::fit::{
    fit_exponential, fit_lorentzian, fit_rabi, fit_skewed_lorentzian, g0_from_purcell, g0_from_rabi, FitResult, RabiFit,
    Weighting,
};
use crate::fluorescence::{
    asymptotic_counts, background_subtract, ensemble_response, integrated_counts, log_times, AsymptoticModel,
    FluorescenceCurve, PacketEmission,
};
use crate::resonator::{g0_for_rate, purcell_rate, CouplingDistribution, ResonatorParams};
use crate::species::{field_direction, rotation_pattern, RotationRow, RotationSubject, SearchOptions};

use super::resolve::ResolvedLine;
use super::{config_err, CouplingKind, ExperimentRecipe};

/// Independent seed for the `k`-th point of a sweep.
fn point_seed(seed: u64, k: usize) -> u64 {
    // splitmix64 finaliser, so neighbouring points get unrelated streams
    let mut z = seed ^ (k as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Log-spaced times covering the detection window `[dead_time, t_rep]`.
fn curve_times(cfg: &CounterConfig, n: usize) -> Vec<f64> {
    if cfg.dead_time > 0.0 {
        log_times(cfg.dead_time, cfg.t_rep, n, false)
    } else {
        log_times(cfg.cycle_duration.min(cfg.t_rep * 1e-3), cfg.t_rep, n - 1, true)
    }
}

struct Prepared {
    params: ResonatorParams,
    lines: Vec<ResolvedLine>,
    couplings: Vec<Option<CouplingDistribution>>,
}

impl ExperimentRecipe {
    fn prepare(&self, params: ResonatorParams, lines: Vec<ResolvedLine>) -> Result<Prepared> {
        let needs_map = self.simulation.coupling == CouplingKind::Map && lines.iter().any(|l| l.density > 0.0);
        let map = if needs_map { Some(self.field_map(&params)?) } else { None };
        let couplings = lines
            .iter()
            .map(|l| self.coupling_for(l, map.as_ref()).map_err(|e| e.context(l.label.clone())))
            .collect::<Result<_>>()?;
        Ok(Prepared { params, lines, couplings })
    }

    /// Post-pulse state of every packet of every line at static field `b`.
    fn emissions_at(&self, prep: &Prepared, b: f64, pulse: &Pulse) -> Result<Vec<PacketEmission>> {
        let mut all = Vec::new();
        for (line, coupling) in prep.lines.iter().zip(&prep.couplings) {
            let Some(coupling) = coupling else { continue };
            let cfg = self.simulation_config(&prep.params, coupling.clone(), line, line.detuning_at(b));
            all.extend(ensemble_response(&cfg, pulse).map_err(|e| e.context(line.label.clone()))?);
        }
        Ok(all)
    }

    fn curve(&self, emissions: &[PacketEmission], pulse: Pulse) -> FluorescenceCurve {
        let cfg = self.counter_config();
        let times = curve_times(&cfg, self.simulation.time_points);
        FluorescenceCurve::from_emissions(emissions, self.counter.efficiency, &times, pulse, cfg.t_rep)
    }

    fn spin_counts(&self, curve: &FluorescenceCurve) -> Result<f64> {
        if self.simulation.background_subtract {
            background_subtract(curve, self.counter.integration_s)
        } else {
            integrated_counts(curve, self.counter.integration_s)
        }
    }

    fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| config_err(format!("recipe `{}` needs a `seed`", self.kind.name())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumRow {
    pub b_mt: f64,
    /// Expected counts over the integration window, dark counts included.
    pub c_raw: f64,
    /// Spin counts, background-subtracted when the recipe asks for it.
    pub c_spin: f64,
    /// Monte Carlo mean and spread of the raw counts.
    pub c_mc: Option<f64>,
    pub c_mc_std: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    pub rows: Vec<SpectrumRow>,
    /// `(label, resonance field in mT)` of every contributing transition.
    pub lines: Vec<(String, f64)>,
    pub max_click_probability: f64,
}

pub fn run_spectrum(recipe: &ExperimentRecipe) -> Result<Spectrum> {
    let params = recipe.resonator_params()?;
    let fields = recipe.field_grid()?;
    let (lo, hi) = (fields[0], fields[fields.len() - 1]);
    let margin = (0.2 * (hi - lo)).max(1e-3);
    let lines = recipe.resolve_lines(&params, ((lo - margin).max(1e-6), hi + margin))?;
    let prep = recipe.prepare(params, lines)?;
    let pulse = recipe.pulse(&params)?;
    let counter = recipe.counter_config();
    let t_int = recipe.counter.integration_s;
    let mut rows = Vec::with_capacity(fields.len());
    let mut max_p: f64 = 0.0;
    for (k, &b) in fields.iter().enumerate() {
        let at = |e: Error| e.context(format!("field point {:.4} mT", b * 1e3));
        let emissions = recipe.emissions_at(&prep, b, &pulse).map_err(at)?;
        let curve = recipe.curve(&emissions, pulse);
        let spin = integrated_counts(&curve, t_int).map_err(at)?;
        let mut row = SpectrumRow {
            b_mt: (b * 1e12).round() / 1e9,
            c_raw: spin + counter.dark_rate * t_int,
            c_spin: recipe.spin_counts(&curve).map_err(at)?,
            c_mc: None,
            c_mc_std: None,
        };
        if recipe.simulation.noise {
            let (streams, report) =
                sample_clicks(&curve, &counter, recipe.counter.sequences, point_seed(recipe.seed()?, k)).map_err(at)?;
            max_p = max_p.max(report.max_probability);
            let h = count_statistics(&streams, &counter, t_int).map_err(at)?;
            row.c_mc = Some(h.mean);
            row.c_mc_std = Some(h.std);
        }
        rows.push(row);
    }
    let lines = prep.lines.iter().map(|l| (l.label.clone(), l.b_res * 1e3)).collect();
    Ok(Spectrum { rows, lines, max_click_probability: max_p })
}

#[derive(Debug, Clone, Serialize)]
pub struct FluorescenceRun {
    pub b_mt: f64,
    pub curve: FluorescenceCurve,
    /// Counts over the integration window, background-subtracted when asked.
    pub spin_counts: f64,
    /// Exponential fit to the second half of the detection window.
    pub tail_fit: Option<FitResult>,
    pub warnings: Vec<String>,
    pub trace: Option<RateTrace>,
}

pub fn run_fluorescence(recipe: &ExperimentRecipe) -> Result<FluorescenceRun> {
    let params = recipe.resonator_params()?;
    let (b, lines) = recipe.single_field(&params)?;
    let prep = recipe.prepare(params, lines)?;
    let pulse = recipe.pulse(&params)?;
    let counter = recipe.counter_config();
    let emissions = recipe.emissions_at(&prep, b, &pulse)?;
    let curve = recipe.curve(&emissions, pulse);
    let mut warnings = Vec::new();
    let mid = 0.5 * (counter.dead_time + counter.t_rep);
    let tail_fit = match fit_exponential(&curve.times, &curve.rate, Some((mid, counter.t_rep)), Weighting::Uniform) {
        Ok(f) => Some(f),
        Err(e) => {
            warnings.push(format!("tail fit: {e}"));
            None
        }
    };
    let trace = if recipe.simulation.noise {
        let (streams, report) = sample_clicks(&curve, &counter, recipe.counter.sequences, recipe.seed()?)?;
        if report.saturated {
            warnings.push(format!("click probability per cycle reaches {:.3}", report.max_probability));
        }
        Some(coarse_grain(&streams, &counter, recipe.simulation.bin_s)?)
    } else {
        None
    };
    Ok(FluorescenceRun { b_mt: b * 1e3, spin_counts: recipe.spin_counts(&curve)?, curve, tail_fit, warnings, trace })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountSweepRow {
    pub epsilon: f64,
    pub c_spin_sim: f64,
    pub c_r_analytic: f64,
    pub c_nr_analytic: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CountSweep {
    pub b_mt: f64,
    pub rows: Vec<CountSweepRow>,
    /// `(ḡ, g_min, g_max)` per line of the analytic thin-wire model, rad/s.
    pub thin_wire: Vec<(f64, f64, f64)>,
}

/// Thin-wire law with the same spin count inside the Purcell volume as
/// `dist`. For an analytic distribution this returns its own parameters.
pub(super) fn equivalent_thin_wire(dist: &CouplingDistribution, g_lim: f64) -> (f64, f64, f64) {
    let g_min = dist.edges[0];
    let g_max = dist.edges[dist.edges.len() - 1];
    let mut n_p = 0.0;
    for (e, &c) in dist.edges.windows(2).zip(&dist.counts) {
        if e[0] >= g_lim {
            n_p += c;
        } else if e[1] > g_lim {
            // share of the bin above g_lim under a 1/g³ density
            n_p += c * (g_lim.powi(-2) - e[1].powi(-2)) / (e[0].powi(-2) - e[1].powi(-2));
        }
    }
    let g_bar = (2.0 * n_p / (g_lim.powi(-2) - g_max.powi(-2))).sqrt();
    (g_bar, g_min, g_max)
}

pub fn run_count_sweep(recipe: &ExperimentRecipe) -> Result<CountSweep> {
    let params = recipe.resonator_params()?;
    let (b, lines) = recipe.single_field(&params)?;
    let prep = recipe.prepare(params, lines)?;
    let pulses = recipe.epsilon_pulses()?;
    let eta = recipe.counter.efficiency;
    let models: Vec<AsymptoticModel> = prep
        .lines
        .iter()
        .zip(&prep.couplings)
        .filter_map(|(l, c)| c.as_ref().map(|c| (l, c)))
        .map(|(l, c)| {
            let (gb, lo, hi) = equivalent_thin_wire(c, g0_for_rate(l.gamma_nr, params.kappa()));
            AsymptoticModel::new(gb, lo, hi, &params, l.gamma_nr, eta)
        })
        .collect();
    let mut rows = Vec::with_capacity(pulses.len());
    for pulse in &pulses {
        let eps = pulse.strength();
        let at = |e: Error| e.context(format!("pulse strength {eps:.4e} ns^1/2"));
        let emissions = recipe.emissions_at(&prep, b, pulse).map_err(at)?;
        let curve = recipe.curve(&emissions, *pulse);
        let (mut c_r, mut c_nr) = (0.0, 0.0);
        for m in &models {
            let a = asymptotic_counts(eps, m).map_err(at)?;
            c_r += a.c_r;
            c_nr += a.c_nr;
        }
        rows.push(CountSweepRow {
            epsilon: eps,
            c_spin_sim: recipe.spin_counts(&curve).map_err(at)?,
            c_r_analytic: c_r,
            c_nr_analytic: c_nr,
        });
    }
    let thin_wire = models.iter().map(|m| (m.g_bar, m.g_min, m.g_max)).collect();
    Ok(CountSweep { b_mt: b * 1e3, rows, thin_wire })
}

#[derive(Debug, Clone, Serialize)]
pub struct SnrRow {
    pub epsilon: f64,
    /// Integration window maximizing the expected single-shot SNR.
    pub t_int: f64,
    pub expected_spin_counts: f64,
    pub snr_fd: f64,
    pub snr_id: f64,
    pub ratio: f64,
    #[serde(skip)]
    pub histogram: CountHistogram,
}

#[derive(Debug, Clone, Serialize)]
pub struct SnrTable {
    pub b_mt: f64,
    pub rows: Vec<SnrRow>,
    pub max_click_probability: f64,
}

/// Integration window in `(cycle, t_max]` maximizing `S/√(S + αT)` for
/// the expected spin counts `S(T)`.
fn best_window(curve: &FluorescenceCurve, cfg: &CounterConfig, t_max: f64) -> Result<f64> {
    let mut best = (f64::NEG_INFINITY, t_max);
    for t in log_times(cfg.cycle_duration, t_max, 120, false) {
        let t = (t / cfg.cycle_duration).floor() * cfg.cycle_duration;
        let s = integrated_counts(curve, t)?;
        let score = s / (s + cfg.dark_rate * t).max(f64::MIN_POSITIVE).sqrt();
        if score > best.0 {
            best = (score, t);
        }
    }
    Ok(best.1)
}

pub fn run_snr_compare(recipe: &ExperimentRecipe) -> Result<SnrTable> {
    let params = recipe.resonator_params()?;
    let (b, lines) = recipe.single_field(&params)?;
    let prep = recipe.prepare(params, lines)?;
    let pulses = recipe.epsilon_pulses()?;
    let counter = recipe.counter_config();
    // clicks after the longest allowed window never enter the histogram
    let t_max = recipe.counter.integration_s;
    let sampled = CounterConfig { t_rep: counter.dead_time + t_max, ..counter };
    let eta = recipe.counter.efficiency;
    let seed = recipe.seed()?;
    let mut rows = Vec::with_capacity(pulses.len());
    let mut max_p: f64 = 0.0;
    for (k, pulse) in pulses.iter().enumerate() {
        let eps = pulse.strength();
        let at = |e: Error| e.context(format!("pulse strength {eps:.4e} ns^1/2"));
        let emissions = recipe.emissions_at(&prep, b, pulse).map_err(at)?;
        let curve = recipe.curve(&emissions, *pulse);
        let t_int = best_window(&curve, &counter, t_max).map_err(at)?;
        let (streams, report) =
            sample_clicks(&curve, &sampled, recipe.counter.sequences, point_seed(seed, k)).map_err(at)?;
        max_p = max_p.max(report.max_probability);
        let histogram = count_statistics(&streams, &sampled, t_int).map_err(at)?;
        // dark clicks as a separate background run would see them, pile-up included
        let cycles = (t_int / counter.cycle_duration + 1e-9).floor();
        let dark = -(-counter.dark_rate * counter.cycle_duration).exp_m1() * cycles;
        let snr_fd = (histogram.mean - dark) / histogram.std;
        let snr_id = emissions
            .iter()
            .map(|e| id_snr(e.spins * e.excitation, e.gamma_r, params.kappa(), eta))
            .sum::<Result<f64>>()
            .map_err(at)?;
        rows.push(SnrRow {
            epsilon: eps,
            t_int,
            expected_spin_counts: integrated_counts(&curve, t_int).map_err(at)?,
            snr_fd,
            snr_id,
            ratio: snr_fd / snr_id,
            histogram,
        });
    }
    Ok(SnrTable { b_mt: b * 1e3, rows, max_click_probability: max_p })
}

#[derive(Debug, Clone, Serialize)]
pub struct RabiRun {
    pub durations: Vec<f64>,
    /// Upper-state population averaged over the packets.
    pub excitation: Vec<f64>,
    pub fit: RabiFit,
    pub n_bar: f64,
    pub g0: f64,
    pub g0_rabi: f64,
    /// Coupling inferred from the fluorescence decay after a π pulse.
    pub g0_purcell: f64,
    pub decay_times: Vec<f64>,
    pub decay_rate: Vec<f64>,
}

/// Drive amplitude (ns^(-1/2)) giving Rabi frequency `omega` to a resonant
/// spin of coupling `g0`.
pub(crate) fn beta_for_rabi(omega: f64, g0: f64, params: &ResonatorParams) -> f64 {
    let n_bar = (omega / (2.0 * g0)).powi(2);
    n_bar.sqrt() * params.kappa() / (2.0 * params.kappa_c.sqrt()) * SQRT_NS
}

pub fn run_rabi(recipe: &ExperimentRecipe) -> Result<RabiRun> {
    let params = recipe.resonator_params()?;
    let s = &recipe.simulation;
    let g0 = TWO_PI * s.g0_hz.ok_or_else(|| config_err("[simulation]: rabi runs need g0_hz"))?;
    let beta = match s.rabi_frequency_hz {
        Some(f) => beta_for_rabi(TWO_PI * f, g0, &params),
        None => recipe.beta(&params)?,
    };
    let durations = recipe.durations()?;
    let kappa = params.kappa();
    let gamma_nr = recipe.species.gamma_nr_per_s;
    let packets: Vec<SpinPacket> = detunings_within_linewidth(kappa, s.detunings)
        .into_iter()
        .map(|(d, w)| SpinPacket::new(g0, d, kappa, gamma_nr, w).with_sz(-0.5))
        .collect();
    let opts = EvolveOptions::default();
    let drive_all = |dt: f64| -> Result<Vec<f64>> {
        let drive = CavityDrive::new(Pulse::new(beta, dt)?, &params)?;
        packets.iter().map(|p| Ok(evolve_packet(p, &drive, &opts)?.excitation())).collect()
    };
    let excitation = durations
        .iter()
        .map(|&dt| {
            let exc = drive_all(dt).map_err(|e| e.context(format!("duration {dt:.3e} s")))?;
            Ok(packets.iter().zip(exc).map(|(p, x)| p.weight * x).sum())
        })
        .collect::<Result<Vec<f64>>>()?;
    let n_bar = CavityDrive::new(Pulse::new(beta, durations[0])?, &params)?.mean_photons();
    let fit = fit_rabi(&durations, &excitation, Weighting::Uniform)?;
    let g0_rabi = g0_from_rabi(fit.params.omega_r, n_bar)?;

    // fluorescence after a nominal π pulse, relaxing at Γ_R(δ) + Γ_NR
    let pi_exc = drive_all(std::f64::consts::PI / (2.0 * g0 * n_bar.sqrt()))?;
    let gamma0 = purcell_rate(g0, 0.0, kappa) + gamma_nr;
    let decay_times: Vec<f64> = (0..200).map(|k| k as f64 * 5.0 / gamma0 / 199.0).collect();
    let decay_rate: Vec<f64> = decay_times
        .iter()
        .map(|&t| packets.iter().zip(&pi_exc).map(|(p, x)| p.weight * x * p.gamma_r * (-p.gamma1() * t).exp()).sum())
        .collect();
    let decay = fit_exponential(&decay_times, &decay_rate, None, Weighting::Uniform)?;
    let gamma_r = 1.0 / decay.value("t1_eff") - gamma_nr;
    let g0_purcell = g0_from_purcell(gamma_r, kappa)?;
    Ok(RabiRun { durations, excitation, fit, n_bar, g0, g0_rabi, g0_purcell, decay_times, decay_rate })
}

#[derive(Debug, Clone, Serialize)]
pub struct BathRabiRun {
    pub b_mt: f64,
    /// γ/2π of the electron spin along the static field, Hz/T.
    pub gamma_e: f64,
    pub omega: f64,
    pub sites: Vec<NuclearSite>,
    pub times: Vec<f64>,
    pub p_up: Vec<f64>,
    /// Peak-to-peak swing per Rabi period.
    pub contrast: Vec<f64>,
}

pub fn run_bath_rabi(recipe: &ExperimentRecipe) -> Result<BathRabiRun> {
    let params = recipe.resonator_params()?;
    let (b, lines) = recipe.single_field(&params)?;
    let line = lines
        .iter()
        .min_by(|x, y| (x.b_res - b).abs().total_cmp(&(y.b_res - b).abs()))
        .ok_or_else(|| config_err("no transition to take the electron gyromagnetic ratio from"))?;
    let s = &recipe.simulation;
    let cfg = BathConfig {
        n_sites: s.bath_sites,
        abundance: s.bath_abundance,
        max_occupied: s.bath_max_occupied,
        ..BathConfig::default()
    };
    cfg.validate().map_err(|e| e.context("[simulation] bath"))?;
    let dir = field_direction(recipe.species.phi_deg, recipe.species.theta_c_deg);
    let gamma_e = line.slope.abs();
    let sites = tungsten_sites(&Lattice::builtin(), &cfg, gamma_e, [dir.x, dir.y, dir.z])?;
    let omega = TWO_PI * s.rabi_frequency_hz.unwrap_or(200e3);
    let times = recipe.durations()?;
    let detunings = detunings_within_linewidth(params.kappa(), s.detunings);
    let p_up = bath_averaged_rabi(&cfg, &sites, omega, &detunings, &times)?;
    let contrast = period_contrast(&times, &p_up, TWO_PI / omega);
    Ok(BathRabiRun { b_mt: b * 1e3, gamma_e, omega, sites, times, p_up, contrast })
}

pub fn run_rotation(recipe: &ExperimentRecipe) -> Result<Vec<RotationRow>> {
    let params = recipe.resonator_params()?;
    let registry = recipe.registry()?;
    let s = &recipe.simulation;
    let (Some(lo), Some(hi)) = (s.search_start_mt, s.search_stop_mt) else {
        return Err(config_err("[simulation]: rotation patterns need search_start_mt and search_stop_mt"));
    };
    if !(s.phi_step_deg > 0.0 && s.phi_stop_deg >= s.phi_start_deg) {
        return Err(config_err("[simulation]: need phi_step_deg > 0 and phi_stop_deg >= phi_start_deg"));
    }
    let n = ((s.phi_stop_deg - s.phi_start_deg) / s.phi_step_deg + 1e-9).floor() as usize;
    let grid: Vec<f64> = (0..=n).map(|k| s.phi_start_deg + k as f64 * s.phi_step_deg).collect();
    let opts = SearchOptions { step: s.search_step_mt * 1e-3, ..Default::default() };
    let nu0 = params.omega0 / TWO_PI;
    let mut rows = Vec::new();
    for ion in &recipe.species.ions {
        let subject = if let Some(sp) = registry.species_named(&ion.name) {
            RotationSubject::Species(sp)
        } else if let Some(d) = registry.doublet_named(&ion.name) {
            RotationSubject::Doublet(d)
        } else {
            return Err(config_err(format!("unknown species `{}`", ion.name)));
        };
        let found = rotation_pattern(subject, nu0, &grid, recipe.species.theta_c_deg, (lo * 1e-3, hi * 1e-3), &opts)
            .map_err(|e| e.context(format!("ion {}", ion.name)))?;
        rows.extend(found);
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    Exponential,
    Lorentzian,
    SkewedLorentzian,
    Rabi,
}

impl FromStr for FitModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exponential" => Ok(FitModel::Exponential),
            "lorentzian" => Ok(FitModel::Lorentzian),
            "skewed_lorentzian" | "skewed-lorentzian" => Ok(FitModel::SkewedLorentzian),
            "rabi" => Ok(FitModel::Rabi),
            _ => Err(config_err(format!("unknown fit model `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub weighting: Weighting,
    pub window: Option<(f64, f64)>,
    /// Hz/T, converts a field-axis Lorentzian width to frequency.
    pub field_slope: Option<f64>,
    pub fixed_skew: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { weighting: Weighting::Uniform, window: None, field_slope: None, fixed_skew: None }
    }
}

pub fn fit_table(x: &[f64], y: &[f64], model: FitModel, opts: &FitOptions) -> Result<FitResult> {
    match model {
        FitModel::Exponential => fit_exponential(x, y, opts.window, opts.weighting),
        FitModel::Lorentzian => fit_lorentzian(x, y, opts.weighting, opts.field_slope.map(|s| TWO_PI * s)),
        FitModel::SkewedLorentzian => fit_skewed_lorentzian(x, y, opts.weighting, opts.fixed_skew),
        FitModel::Rabi => fit_rabi(x, y, opts.weighting).map(|f| f.fit),
    }
}

/// Two numeric columns of a comma-separated file. Blank lines, `#`
/// comments and a leading header are skipped.
pub fn read_xy_csv(path: &Path, x_col: usize, y_col: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path)?;
    let (mut x, mut y) = (Vec::new(), Vec::new());
    let mut seen_data = false;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let get = |c: usize| cells.get(c).and_then(|v| v.parse::<f64>().ok());
        match (get(x_col), get(y_col)) {
            (Some(a), Some(b)) => {
                x.push(a);
                y.push(b);
                seen_data = true;
            }
            _ if !seen_data => continue,
            _ => return Err(Error::Format(format!("{}: line {} is not numeric in columns {x_col}, {y_col}", path.display(), n + 1))),
        }
    }
    if x.is_empty() {
        return Err(Error::Format(format!("{}: no numeric rows", path.display())));
    }
    Ok((x, y))
}
