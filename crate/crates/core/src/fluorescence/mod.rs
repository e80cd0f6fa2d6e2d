//! Ensemble fluorescence: every (g0, δ) packet is driven, left to relax, and
//! its photon emission summed into the detector-side count rate.

mod analytic;
mod lineshape;

pub use analytic::{asymptotic_counts, AsymptoticCounts, AsymptoticModel};
pub use lineshape::{detuning_bins, DBin, DetuningGrid, LineShape};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bloch::{evolve_packet, rabi_angle, steady_state_init, CavityDrive, EvolveOptions, Pulse, SpinPacket};
use crate::error::{check, invalid, Result};
use crate::resonator::{CouplingDistribution, GBin, ResonatorParams};

/// Everything besides the pulse that fixes a fluorescence simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub coupling: CouplingDistribution,
    pub line: LineShape,
    pub detuning_grid: DetuningGrid,
    pub gamma_nr: f64,
    pub t_rep: f64,
    /// Spin-photon to click efficiency.
    pub eta: f64,
    pub resonator: ResonatorParams,
    pub evolve: EvolveOptions,
    /// Coupling bins are split until the rotation angle varies by less than
    /// this across a sub-bin (radians)...
    pub max_bin_rotation: f64,
    /// ...or until this many sub-bins.
    pub max_subbins: usize,
}

impl SimulationConfig {
    pub fn new(coupling: CouplingDistribution, line: LineShape, resonator: ResonatorParams) -> Self {
        SimulationConfig {
            coupling,
            line,
            detuning_grid: DetuningGrid::default(),
            gamma_nr: 0.15,
            t_rep: 2.0,
            eta: 0.15,
            resonator,
            evolve: EvolveOptions::default(),
            max_bin_rotation: std::f64::consts::FRAC_PI_4,
            max_subbins: 64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.resonator.validate()?;
        self.line.validate()?;
        self.detuning_grid.validate()?;
        check("gamma_nr", self.gamma_nr, self.gamma_nr >= 0.0, "must be >= 0")?;
        check("t_rep", self.t_rep, self.t_rep >= 0.0, "must be >= 0")?;
        check("eta", self.eta, (0.0..=1.0).contains(&self.eta), "must be in [0, 1]")?;
        check("max_bin_rotation", self.max_bin_rotation, self.max_bin_rotation > 0.0, "must be > 0")?;
        let c = &self.coupling;
        if c.edges.len() != c.counts.len() + 1 || c.counts.is_empty() {
            return Err(invalid("coupling", "need one more edge than bins"));
        }
        if c.edges.windows(2).any(|w| !(w[1] > w[0])) || c.edges[0] < 0.0 {
            return Err(invalid("coupling", "edges must be >= 0 and strictly increasing"));
        }
        if c.counts.iter().any(|n| !n.is_finite() || *n < 0.0) {
            return Err(invalid("coupling", "bin counts must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Outcome of driving one packet: what it will emit after the pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketEmission {
    pub g0: f64,
    pub delta: f64,
    /// Spins represented.
    pub spins: f64,
    pub gamma_r: f64,
    pub gamma1: f64,
    /// Upper-state population `(1 + 2Sz)/2` at `t_ref`.
    pub excitation: f64,
    /// Time after the end of the pulse at which the cavity has rung down and
    /// the packet state was taken, s.
    pub t_ref: f64,
}

impl PacketEmission {
    /// Photons per second into the line at time `t` after the pulse.
    pub fn rate(&self, t: f64) -> f64 {
        self.spins * self.gamma_r * self.excitation * (-self.gamma1 * (t - self.t_ref)).exp()
    }

    /// Photons emitted between `t0` and `t1`.
    pub fn photons(&self, t0: f64, t1: f64) -> f64 {
        if self.gamma1 == 0.0 {
            return self.spins * self.gamma_r * self.excitation * (t1 - t0);
        }
        let decay = |t: f64| (-self.gamma1 * (t - self.t_ref)).exp();
        self.spins * self.gamma_r / self.gamma1 * self.excitation * (decay(t0) - decay(t1))
    }
}

/// Expected detector click rate after one pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluorescenceCurve {
    /// s after the end of the pulse, ascending.
    pub times: Vec<f64>,
    /// counts/s
    pub rate: Vec<f64>,
    pub pulse: Pulse,
    pub eta: f64,
    pub t_rep: f64,
}

impl FluorescenceCurve {
    pub fn from_emissions(emissions: &[PacketEmission], eta: f64, times: &[f64], pulse: Pulse, t_rep: f64) -> Self {
        let rate = times.iter().map(|&t| eta * emissions.iter().map(|e| e.rate(t)).sum::<f64>()).collect();
        FluorescenceCurve { times: times.to_vec(), rate, pulse, eta, t_rep }
    }

    /// Linearly interpolated rate; zero outside the grid.
    pub fn rate_at(&self, t: f64) -> f64 {
        let n = self.times.len();
        if n == 0 || t < self.times[0] || t > self.times[n - 1] {
            return 0.0;
        }
        let k = self.times.partition_point(|&x| x <= t).clamp(1, n - 1) - 1;
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        self.rate[k] + (t - t0) / (t1 - t0) * (self.rate[k + 1] - self.rate[k])
    }

    /// Trapezoidal integral of the rate between `a` and `b`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let mut sum = 0.0;
        let mut prev = (a, self.rate_at(a));
        for (&t, &r) in self.times.iter().zip(&self.rate) {
            if t <= a {
                continue;
            }
            if t >= b {
                break;
            }
            sum += 0.5 * (prev.1 + r) * (t - prev.0);
            prev = (t, r);
        }
        sum + 0.5 * (prev.1 + self.rate_at(b)) * (b - prev.0)
    }

    pub fn extent(&self) -> (f64, f64) {
        (self.times.first().copied().unwrap_or(0.0), self.times.last().copied().unwrap_or(0.0))
    }

    /// Curve restricted to `t >= t_d`, as seen by a detector blind during
    /// the dead time.
    pub fn after_dead_time(&self, t_d: f64) -> Self {
        let keep: Vec<usize> = (0..self.times.len()).filter(|&k| self.times[k] >= t_d).collect();
        FluorescenceCurve {
            times: keep.iter().map(|&k| self.times[k]).collect(),
            rate: keep.iter().map(|&k| self.rate[k]).collect(),
            ..self.clone()
        }
    }
}

/// Coupling sub-bins for `pulse`: each bin is split so the rotation angle
/// changes by at most `max_bin_rotation` across a sub-bin.
fn coupling_bins(config: &SimulationConfig, pulse: &Pulse) -> Result<Vec<GBin>> {
    let p = &config.resonator;
    let eps = pulse.strength();
    let mut out = Vec::new();
    for k in 0..config.coupling.counts.len() {
        let span = rabi_angle(eps, config.coupling.edges[k + 1], p.kappa_c, p.kappa())?
            - rabi_angle(eps, config.coupling.edges[k], p.kappa_c, p.kappa())?;
        let n = ((span / config.max_bin_rotation).ceil() as usize).clamp(1, config.max_subbins.max(1));
        out.extend(config.coupling.split_bin(k, n).into_iter().filter(|b| b.count > 0.0));
    }
    Ok(out)
}

/// Drives every packet of the ensemble and records its post-pulse state.
pub fn ensemble_response(config: &SimulationConfig, pulse: &Pulse) -> Result<Vec<PacketEmission>> {
    config.validate()?;
    pulse.validate()?;
    let kappa = config.resonator.kappa();
    let drive = CavityDrive::new(*pulse, &config.resonator)?;
    let (dbins, _) = detuning_bins(&config.line, kappa, &config.detuning_grid)?;
    let gbins = coupling_bins(config, pulse)?;
    let t_ref = if pulse.beta == 0.0 { 0.0 } else { config.evolve.ringdown_kappa / kappa };
    let jobs: Vec<(GBin, DBin)> = gbins.iter().flat_map(|g| dbins.iter().map(move |d| (*g, *d))).collect();
    jobs.par_iter()
        .map(|(g, d)| {
            let mut packet = SpinPacket::new(g.g0, d.delta, kappa, config.gamma_nr, g.count * d.mass);
            // a null pulse cannot have saturated the spins in the previous sequence
            let sz0 = if pulse.beta == 0.0 { -0.5 } else { steady_state_init(packet.gamma1(), config.t_rep)? };
            packet = packet.with_sz(sz0);
            let out = if pulse.beta == 0.0 { packet } else { evolve_packet(&packet, &drive, &config.evolve)? };
            Ok(PacketEmission {
                g0: g.g0,
                delta: d.delta,
                spins: packet.weight,
                gamma_r: packet.gamma_r,
                gamma1: packet.gamma1(),
                excitation: out.excitation().max(0.0),
                t_ref,
            })
        })
        .collect()
}

/// Expected click rate on `times` (s after the pulse) for the ensemble.
pub fn simulate_curve(config: &SimulationConfig, pulse: &Pulse, times: &[f64]) -> Result<FluorescenceCurve> {
    if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(invalid("times", "must be finite, >= 0 and strictly increasing"));
    }
    let emissions = ensemble_response(config, pulse)?;
    Ok(FluorescenceCurve::from_emissions(&emissions, config.eta, times, *pulse, config.t_rep))
}

/// Counts collected from the start of the curve over `t_int`.
pub fn integrated_counts(curve: &FluorescenceCurve, t_int: f64) -> Result<f64> {
    let (t0, t1) = curve.extent();
    check("t_int", t_int, t_int >= 0.0 && t0 + t_int <= t1 * (1.0 + 1e-12), "must lie within the curve")?;
    Ok(curve.integral(t0, t0 + t_int))
}

/// Rate at the end of the sequence, averaged over its last sixth.
pub fn end_rate(curve: &FluorescenceCurve) -> Result<f64> {
    let (_, t1) = curve.extent();
    check("t_rep", curve.t_rep, curve.t_rep > 0.0 && t1 >= curve.t_rep * (1.0 - 1e-12), "curve must reach t_rep")?;
    let a = curve.t_rep * 5.0 / 6.0;
    Ok(curve.integral(a, curve.t_rep) / (curve.t_rep - a))
}

/// Counts over `t_int` minus `t_int` times the end-of-sequence rate.
pub fn background_subtract(curve: &FluorescenceCurve, t_int: f64) -> Result<f64> {
    Ok(integrated_counts(curve, t_int)? - t_int * end_rate(curve)?)
}

/// `n` points logarithmically spaced from `t0` to `t1`, preceded by 0 when
/// `with_zero`.
pub fn log_times(t0: f64, t1: f64, n: usize, with_zero: bool) -> Vec<f64> {
    let mut v = if with_zero { vec![0.0] } else { Vec::new() };
    let r = (t1 / t0).ln() / (n.max(2) - 1) as f64;
    v.extend((0..n.max(2)).map(|k| t0 * (r * k as f64).exp()));
    let last = v.len() - 1;
    v[last] = t1;
    v
}
