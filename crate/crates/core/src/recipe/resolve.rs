use crate::bloch::Pulse;
use crate::constants::{HBAR, SQRT_NS, TWO_PI};
use crate::counter::CounterConfig;
use crate::error::{Error, Result};
use crate::fluorescence::{LineShape, SimulationConfig};
use crate::resonator::{
    coupling_distribution, coupling_map, field_profile, log_edges, CouplingDistribution, CurrentProfile, FieldMap,
    GridSpec, ResonatorParams, TransitionDipole,
};
use crate::species::{
    build_hamiltonian, eigen_levels, transition_fields, AnisotropicDoublet, DoubletSite, FieldConfig, SearchOptions,
    SpeciesRegistry, SpinSpecies, SpinSystem, DOUBLET_SITES,
};

use super::{config_err, CouplingKind, ExperimentRecipe, LineKind, Preset, ProfileKind};

/// Drive amplitude `√(P / ħω0)` in ns^(-1/2) for `power_dbm` at the
/// generator followed by `attenuation_db` of line loss.
pub fn beta_from_power(power_dbm: f64, attenuation_db: f64, omega0: f64) -> Result<f64> {
    if !(power_dbm.is_finite() && attenuation_db.is_finite() && omega0 > 0.0) {
        return Err(config_err("input power, attenuation and frequency must be finite"));
    }
    let watts = 1e-3 * 10f64.powf((power_dbm - attenuation_db) / 10.0);
    Ok((watts / (HBAR * omega0)).sqrt() * SQRT_NS)
}

pub(crate) enum Subject {
    Species(SpinSpecies),
    Doublet(AnisotropicDoublet, usize),
}

impl Subject {
    pub(crate) fn with<R>(&self, f: impl FnOnce(&dyn SpinSystem) -> R) -> R {
        match self {
            Subject::Species(s) => f(s),
            Subject::Doublet(d, site) => f(&DoubletSite { doublet: d, site: *site }),
        }
    }
}

/// One ion of the recipe, split into its magnetically distinct sites.
pub(crate) struct IonSpec {
    pub name: String,
    pub sites: Vec<Subject>,
    /// Spins per m³ on each site.
    pub site_density: f64,
    pub gamma_nr: f64,
    /// Centred at zero, rad/s.
    pub line: LineShape,
}

/// A transition of one ion site, with what is needed to place its line on a
/// field sweep.
#[derive(Debug, Clone)]
pub struct ResolvedLine {
    pub label: String,
    pub ion: usize,
    /// Tesla.
    pub b_res: f64,
    /// `d(ν_upper − ν_lower)/dB` at `b_res`, Hz/T.
    pub slope: f64,
    pub dipole: TransitionDipole,
    /// Spins per m³ taking part in this transition.
    pub density: f64,
    pub gamma_nr: f64,
    pub line: LineShape,
}

impl ResolvedLine {
    /// Spin-cavity detuning of the line centre at static field `b`, rad/s.
    pub fn detuning_at(&self, b: f64) -> f64 {
        TWO_PI * self.slope * (b - self.b_res)
    }
}

impl ExperimentRecipe {
    pub fn resonator_params(&self) -> Result<ResonatorParams> {
        let r = &self.resonator;
        let mut p = match r.preset {
            Preset::Setup1 => ResonatorParams::setup1(),
            Preset::Setup2 => ResonatorParams::setup2(),
        };
        if let Some(f) = r.frequency_hz {
            p.omega0 = TWO_PI * f;
        }
        p.kappa_c = r.kappa_c_per_s.unwrap_or(p.kappa_c);
        p.kappa_i = r.kappa_i_per_s.unwrap_or(p.kappa_i);
        p.z0 = r.impedance_ohm.unwrap_or(p.z0);
        p.wire_width = r.wire_width_m.unwrap_or(p.wire_width);
        p.wire_length = r.wire_length_m.unwrap_or(p.wire_length);
        p.wire_angle_deg = r.wire_angle_deg.unwrap_or(p.wire_angle_deg);
        p.validate().map_err(|e| e.context("[resonator]"))?;
        Ok(p)
    }

    pub fn counter_config(&self) -> CounterConfig {
        let c = &self.counter;
        CounterConfig {
            cycle_duration: c.cycle_s,
            dark_rate: c.dark_rate_per_s,
            dead_time: c.dead_time_s,
            t_rep: c.repetition_s,
        }
    }

    /// Pulse amplitude in ns^(-1/2).
    pub fn beta(&self, params: &ResonatorParams) -> Result<f64> {
        let p = &self.pulse;
        match (p.beta_per_sqrt_ns, p.input_power_dbm, p.attenuation_db) {
            (Some(b), None, None) => Ok(b),
            (None, Some(pw), Some(att)) => beta_from_power(pw, att, params.omega0),
            (None, None, None) => Err(config_err("[pulse] needs beta_per_sqrt_ns or input_power_dbm with attenuation_db")),
            _ => Err(config_err("[pulse]: give either beta_per_sqrt_ns or input_power_dbm and attenuation_db")),
        }
    }

    pub fn pulse(&self, params: &ResonatorParams) -> Result<Pulse> {
        Pulse::new(self.beta(params)?, self.pulse.duration_s).map_err(|e| e.context("[pulse]"))
    }

    /// Pulses of the requested strengths, all of duration `duration_s`.
    pub fn epsilon_pulses(&self) -> Result<Vec<Pulse>> {
        let p = &self.pulse;
        let eps = match (p.epsilon_min_sqrt_ns, p.epsilon_max_sqrt_ns) {
            (Some(lo), Some(hi)) if p.epsilons_sqrt_ns.is_empty() => {
                if !(lo > 0.0 && hi > lo && p.epsilon_points >= 2) {
                    return Err(config_err("[pulse]: need 0 < epsilon_min < epsilon_max and epsilon_points >= 2"));
                }
                log_edges(lo, hi, p.epsilon_points - 1)
            }
            (None, None) if !p.epsilons_sqrt_ns.is_empty() => p.epsilons_sqrt_ns.clone(),
            _ => return Err(config_err("[pulse]: give either epsilons_sqrt_ns or epsilon_min/max_sqrt_ns with epsilon_points")),
        };
        let dt_ns = p.duration_s * 1e9;
        let beta_max = p.beta_max_per_sqrt_ns.unwrap_or(f64::INFINITY);
        if !(beta_max > 0.0) {
            return Err(config_err("[pulse]: beta_max_per_sqrt_ns must be > 0"));
        }
        eps.iter()
            .map(|&e| {
                if !(e > 0.0 && e.is_finite()) {
                    return Err(config_err(format!("[pulse]: pulse strength {e} must be > 0")));
                }
                if e / dt_ns > beta_max {
                    Pulse::new(beta_max, e / beta_max * 1e-9)
                } else {
                    Pulse::new(e / dt_ns, p.duration_s)
                }
            })
            .collect()
    }

    pub fn durations(&self) -> Result<Vec<f64>> {
        let p = &self.pulse;
        match (p.duration_start_s, p.duration_stop_s) {
            (Some(a), Some(b)) if a > 0.0 && b > a && p.duration_points >= 2 => {
                Ok((0..p.duration_points).map(|k| a + (b - a) * k as f64 / (p.duration_points - 1) as f64).collect())
            }
            _ => Err(config_err("[pulse]: need 0 < duration_start_s < duration_stop_s and duration_points >= 2")),
        }
    }

    /// Swept static fields, tesla.
    pub fn field_grid(&self) -> Result<Vec<f64>> {
        let s = &self.simulation;
        match (s.field_start_mt, s.field_stop_mt, s.field_step_mt) {
            (Some(a), Some(b), Some(h)) if a >= 0.0 && b >= a && h > 0.0 => {
                let n = ((b - a) / h + 1e-9).floor() as usize;
                Ok((0..=n).map(|k| (a + k as f64 * h) * 1e-3).collect())
            }
            _ => Err(config_err("[simulation]: need field_start_mt <= field_stop_mt and field_step_mt > 0")),
        }
    }

    pub fn registry(&self) -> Result<SpeciesRegistry> {
        match &self.species.registry {
            Some(path) => SpeciesRegistry::load(path).map_err(|e| e.context(path.display().to_string())),
            None => Ok(SpeciesRegistry::builtin()),
        }
    }

    pub(crate) fn ions(&self, registry: &SpeciesRegistry) -> Result<Vec<IonSpec>> {
        let sp = &self.species;
        sp.ions
            .iter()
            .map(|ion| {
                let (sites, density) = if let Some(s) = registry.species_named(&ion.name) {
                    let per_line = ion.density_per_m3 * s.abundance / s.nuclear_spin.multiplicity() as f64;
                    (vec![Subject::Species(s.clone())], per_line)
                } else if let Some(d) = registry.doublet_named(&ion.name) {
                    let sites = (0..DOUBLET_SITES).map(|k| Subject::Doublet(d.clone(), k)).collect();
                    (sites, ion.density_per_m3 / DOUBLET_SITES as f64)
                } else {
                    return Err(config_err(format!("unknown species `{}`", ion.name)));
                };
                let width = TWO_PI * ion.linewidth_hz.unwrap_or(sp.linewidth_hz);
                let line = match sp.lineshape {
                    LineKind::Lorentzian => LineShape::lorentzian(width),
                    LineKind::Gaussian => LineShape::gaussian(width),
                };
                let gamma_nr = ion.gamma_nr_per_s.unwrap_or(sp.gamma_nr_per_s);
                if !(gamma_nr >= 0.0) || !(width > 0.0) {
                    return Err(config_err(format!("ion {}: gamma_nr_per_s and linewidth_hz must be positive", ion.name)));
                }
                Ok(IonSpec { name: ion.name.clone(), sites, site_density: density, gamma_nr, line })
            })
            .collect()
    }

    /// Transitions of every ion with resonance fields in `range` (tesla).
    pub fn resolve_lines(&self, params: &ResonatorParams, range: (f64, f64)) -> Result<Vec<ResolvedLine>> {
        let registry = self.registry()?;
        let ions = self.ions(&registry)?;
        let (phi, theta) = (self.species.phi_deg, self.species.theta_c_deg);
        let nu0 = params.omega0 / TWO_PI;
        let opts = SearchOptions { step: self.simulation.search_step_mt * 1e-3, ..Default::default() };
        let mut out = Vec::new();
        for (k, ion) in ions.iter().enumerate() {
            for subject in &ion.sites {
                subject
                    .with(|sys| -> Result<()> {
                        for t in transition_fields(sys, nu0, (phi, theta), range, &opts)? {
                            let field = FieldConfig::new(t.b_res, phi, theta)?;
                            out.push(ResolvedLine {
                                label: format!("{} {}-{}", sys.label(), t.lower, t.upper),
                                ion: k,
                                b_res: t.b_res,
                                slope: transition_slope(sys, t.b_res, (phi, theta), (t.lower, t.upper))?,
                                dipole: TransitionDipole::new(sys, &field, t.lower, t.upper)?,
                                density: ion.site_density,
                                gamma_nr: ion.gamma_nr,
                                line: ion.line.clone(),
                            });
                        }
                        Ok(())
                    })
                    .map_err(|e| e.context(format!("ion {}", ion.name)))?;
            }
        }
        out.sort_by(|a, b| a.b_res.total_cmp(&b.b_res));
        Ok(out)
    }

    pub fn field_map(&self, params: &ResonatorParams) -> Result<FieldMap> {
        let r = &self.resonator;
        let grid = GridSpec { fine_cell: r.grid_fine_cell_m, extent: r.grid_extent_m, ..GridSpec::default() };
        let profile = match r.current_profile {
            ProfileKind::Uniform => CurrentProfile::Uniform,
            ProfileKind::EdgePeaked => CurrentProfile::edge_peaked(),
        };
        field_profile(params, &grid, profile).map_err(|e| e.context("[resonator] field map"))
    }

    /// Coupling distribution of `line`; `None` when it holds no spins.
    pub fn coupling_for(&self, line: &ResolvedLine, map: Option<&FieldMap>) -> Result<Option<CouplingDistribution>> {
        let s = &self.simulation;
        match s.coupling {
            CouplingKind::ThinWire => {
                let (Some(gb), Some(lo), Some(hi)) = (s.g_bar_hz, s.g_min_hz, s.g_max_hz) else {
                    return Err(config_err("[simulation]: thin_wire coupling needs g_bar_hz, g_min_hz and g_max_hz"));
                };
                if line.density == 0.0 {
                    return Ok(None);
                }
                Ok(Some(CouplingDistribution::thin_wire(TWO_PI * gb, TWO_PI * lo, TWO_PI * hi, s.g_bins)?))
            }
            CouplingKind::Map => {
                if line.density == 0.0 {
                    return Ok(None);
                }
                let map = map.ok_or_else(|| config_err("map coupling needs the resonator field map"))?;
                let cmap = coupling_map(map, &line.dipole, self.species.theta_c_deg);
                let (lo, hi) = (cmap.min_positive(), cmap.max());
                if !(hi > lo) {
                    return Err(Error::Config(format!("{}: transition does not couple to the resonator", line.label)));
                }
                let edges = log_edges(lo * (1.0 - 1e-9), hi * (1.0 + 1e-9), s.g_bins);
                Ok(Some(coupling_distribution(&cmap, line.density, &edges)?))
            }
        }
    }

    /// Fluorescence configuration for `line` with its centre at `delta`.
    pub fn simulation_config(
        &self,
        params: &ResonatorParams,
        coupling: CouplingDistribution,
        line: &ResolvedLine,
        delta: f64,
    ) -> SimulationConfig {
        let mut cfg = SimulationConfig::new(coupling, line.line.clone().with_center(delta), *params);
        cfg.gamma_nr = line.gamma_nr;
        cfg.t_rep = self.counter.repetition_s;
        cfg.eta = self.counter.efficiency;
        cfg
    }

    /// The field of single-field runs: `field_mt`, or the lowest transition
    /// found in the search range (defaulting to 1 mT–2 T).
    pub fn single_field(&self, params: &ResonatorParams) -> Result<(f64, Vec<ResolvedLine>)> {
        let s = &self.simulation;
        let range = (s.search_start_mt.unwrap_or(1.0) * 1e-3, s.search_stop_mt.unwrap_or(2000.0) * 1e-3);
        let lines = self.resolve_lines(params, range)?;
        let b = match s.field_mt {
            Some(b) => b * 1e-3,
            None => lines.first().map(|l| l.b_res).ok_or_else(|| config_err("no transition in the search range"))?,
        };
        Ok((b, lines))
    }
}

/// `d(E_upper − E_lower)/dB`, Hz/T, by a central difference.
fn transition_slope(sys: &dyn SpinSystem, b: f64, dir: (f64, f64), pair: (usize, usize)) -> Result<f64> {
    let h = 1e-6_f64.max(1e-6 * b);
    let gap = |bf: f64| -> Result<f64> {
        let e = eigen_levels(&build_hamiltonian(sys, &FieldConfig::new(bf, dir.0, dir.1)?)?)?.energies;
        Ok(e[pair.1] - e[pair.0])
    };
    Ok((gap(b + h)? - gap((b - h).max(0.0))?) / (b + h - (b - h).max(0.0)))
}
