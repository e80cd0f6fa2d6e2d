//! Driven electron spin coupled to a sparse bath of ¹⁸³W nuclei through
//! the secular hyperfine interaction `S_z (A I_z + B I_x)`.

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{HBAR, MU_0, TWO_PI};
use crate::error::{check, invalid, Error, Result};

const BUILTIN_LATTICE: &str = include_str!("../../data/cawo4_lattice.toml");

/// Largest number of nuclei simulated together (Hilbert space 2 × 2³).
pub const MAX_NUCLEI: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lattice {
    pub a_angstrom: f64,
    pub c_angstrom: f64,
    pub tungsten: Vec<[f64; 3]>,
    pub calcium: Vec<[f64; 3]>,
}

impl Lattice {
    pub fn builtin() -> Self {
        Self::from_toml_str(BUILTIN_LATTICE).expect("bundled lattice file parses")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let l: Lattice = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if !(l.a_angstrom > 0.0 && l.c_angstrom > 0.0) || l.tungsten.is_empty() || l.calcium.is_empty() {
            return Err(Error::Config("lattice needs positive constants and at least one W and one Ca site".into()));
        }
        Ok(l)
    }

    fn cartesian(&self, f: [f64; 3]) -> Vector3<f64> {
        Vector3::new(f[0] * self.a_angstrom, f[1] * self.a_angstrom, f[2] * self.c_angstrom) * 1e-10
    }

    /// W positions relative to the first Ca site, sorted by distance,
    /// out to `cells` conventional cells in every direction.
    pub fn tungsten_around_calcium(&self, cells: i32) -> Vec<Vector3<f64>> {
        let origin = self.cartesian(self.calcium[0]);
        let mut out = Vec::new();
        for i in -cells..=cells {
            for j in -cells..=cells {
                for k in -cells..=cells {
                    for w in &self.tungsten {
                        let f = [w[0] + i as f64, w[1] + j as f64, w[2] + k as f64];
                        out.push(self.cartesian(f) - origin);
                    }
                }
            }
        }
        out.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NuclearSite {
    /// m, relative to the electron spin.
    pub position: [f64; 3],
    /// rad/s
    pub a: f64,
    /// rad/s
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathConfig {
    pub n_sites: usize,
    pub abundance: f64,
    pub max_occupied: usize,
    /// γ/2π of ¹⁸³W, Hz/T.
    pub gamma_w: f64,
}

impl Default for BathConfig {
    fn default() -> Self {
        BathConfig { n_sites: 15, abundance: 0.14, max_occupied: 3, gamma_w: 1.8e6 }
    }
}

impl BathConfig {
    pub fn validate(&self) -> Result<()> {
        check("abundance", self.abundance, (0.0..=1.0).contains(&self.abundance), "must be in [0, 1]")?;
        if self.max_occupied > self.n_sites {
            return Err(invalid("max_occupied", format!("{} exceeds n_sites = {}", self.max_occupied, self.n_sites)));
        }
        if self.max_occupied > MAX_NUCLEI {
            return Err(invalid("max_occupied", format!("at most {MAX_NUCLEI} nuclei can be simulated together")));
        }
        if self.n_sites > 63 {
            return Err(invalid("n_sites", "at most 63 sites"));
        }
        Ok(())
    }
}

/// Secular point-dipole constants `(A, B)` in rad/s for a nucleus at
/// `position` (m). `gamma_e` and `gamma_w` are γ/2π in Hz/T; `b0` is the
/// static field direction.
pub fn dipolar_constants(position: [f64; 3], gamma_e: f64, gamma_w: f64, b0: [f64; 3]) -> Result<(f64, f64)> {
    let r = Vector3::from(position);
    let dist = r.norm();
    if !(dist > 0.0) {
        return Err(invalid("position", "nucleus cannot sit on the electron"));
    }
    let n = Vector3::from(b0);
    if !(n.norm() > 0.0) {
        return Err(invalid("b0", "field direction must be non-zero"));
    }
    let cos = r.dot(&n) / (dist * n.norm());
    let sin = (1.0 - cos * cos).max(0.0).sqrt();
    let d = MU_0 / (4.0 * std::f64::consts::PI) * HBAR * (TWO_PI * gamma_e) * (TWO_PI * gamma_w) / dist.powi(3);
    Ok((d * (1.0 - 3.0 * cos * cos), -3.0 * d * sin * cos))
}

/// The `config.n_sites` W sites nearest to an Er ion on a Ca site.
/// Sites at equal distance are ordered by hyperfine magnitude, strongest
/// first, so a shell cut by `n_sites` keeps its most strongly coupled
/// members.
pub fn tungsten_sites(lattice: &Lattice, config: &BathConfig, gamma_e: f64, b0: [f64; 3]) -> Result<Vec<NuclearSite>> {
    let mut sites = lattice
        .tungsten_around_calcium(3)
        .into_iter()
        .map(|r| {
            let position = [r.x, r.y, r.z];
            let (a, b) = dipolar_constants(position, gamma_e, config.gamma_w, b0)?;
            Ok(NuclearSite { position, a, b })
        })
        .collect::<Result<Vec<_>>>()?;
    let dist = |s: &NuclearSite| Vector3::from(s.position).norm();
    sites.sort_by(|x, y| {
        let (dx, dy) = (dist(x), dist(y));
        if (dx - dy).abs() > 1e-6 * dx {
            dx.total_cmp(&dy)
        } else {
            x.a.hypot(x.b).total_cmp(&y.a.hypot(y.b)).reverse()
        }
    });
    sites.truncate(config.n_sites);
    Ok(sites)
}

/// Occupied sites (indices into the site list) and probability weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub occupied: Vec<usize>,
    pub weight: f64,
}

/// Every subset of at most `max_occupied` sites, with binomial weights
/// renormalized over the retained subsets. Also returns the probability
/// mass retained before renormalization.
pub fn enumerate_configs(config: &BathConfig) -> Result<(Vec<Configuration>, f64)> {
    config.validate()?;
    let (n, p) = (config.n_sites, config.abundance);
    let mut out = Vec::new();
    fn rec(start: usize, n: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        out.push(cur.clone());
        if left == 0 {
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut subsets = Vec::new();
    rec(0, n, config.max_occupied, &mut Vec::new(), &mut subsets);
    subsets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    for s in subsets {
        let k = s.len() as i32;
        let w = p.powi(k) * (1.0 - p).powi(n as i32 - k);
        out.push(Configuration { occupied: s, weight: w });
    }
    let mass: f64 = out.iter().map(|c| c.weight).sum();
    if !(mass > 0.0) {
        return Err(invalid("abundance", "no retained configuration has non-zero probability"));
    }
    out.iter_mut().for_each(|c| c.weight /= mass);
    Ok((out, mass))
}

/// Real symmetric Hamiltonian in the frame of the drive, basis index
/// `s·2^k + m` with `s = 0` for electron spin up and bit `i` of `m` set
/// when nucleus `i` points down.
fn hamiltonian(sites: &[NuclearSite], omega: f64, delta: f64) -> DMatrix<f64> {
    let k = sites.len();
    let nn = 1usize << k;
    let dim = 2 * nn;
    let mut h = DMatrix::zeros(dim, dim);
    for s in 0..2 {
        let sz = if s == 0 { 0.5 } else { -0.5 };
        for m in 0..nn {
            let row = s * nn + m;
            h[(row, row)] += delta * sz;
            for (i, site) in sites.iter().enumerate() {
                let iz = if m >> i & 1 == 0 { 0.5 } else { -0.5 };
                h[(row, row)] += sz * site.a * iz;
                h[(row, s * nn + (m ^ (1 << i)))] += sz * site.b * 0.5;
            }
        }
    }
    for m in 0..nn {
        h[(m, nn + m)] += 0.5 * omega;
        h[(nn + m, m)] += 0.5 * omega;
    }
    h
}

/// Spectral data for `P_↑(t) = Σ_{n,m} W_nm cos((E_n − E_m) t)`, with the
/// electron starting down and the nuclei maximally mixed.
struct Propagator {
    energies: Vec<f64>,
    weights: DMatrix<f64>,
    vectors: DMatrix<f64>,
    nn: usize,
}

impl Propagator {
    fn new(sites: &[NuclearSite], omega: f64, delta: f64) -> Result<Self> {
        if sites.len() > MAX_NUCLEI {
            return Err(invalid("configuration", format!("{} nuclei exceed the limit of {MAX_NUCLEI}", sites.len())));
        }
        let eig = SymmetricEigen::try_new(hamiltonian(sites, omega, delta), 1e-15, 10_000).ok_or_else(|| Error::EigenSolve("bath Hamiltonian".into()))?;
        let nn = 1usize << sites.len();
        let v = &eig.eigenvectors;
        let up = v.rows(0, nn);
        let down = v.rows(nn, nn);
        let x = up.transpose() * up;
        let y = down.transpose() * down;
        let weights = x.component_mul(&y) / nn as f64;
        Ok(Propagator { energies: eig.eigenvalues.iter().copied().collect(), weights, vectors: eig.eigenvectors, nn })
    }

    fn p_up(&self, t: f64) -> f64 {
        let e = &self.energies;
        let mut sum = 0.0;
        for n in 0..e.len() {
            sum += self.weights[(n, n)];
            for m in n + 1..e.len() {
                sum += 2.0 * self.weights[(n, m)] * ((e[n] - e[m]) * t).cos();
            }
        }
        sum
    }

    /// Largest deviation from 1 of `‖U(t)|↓, m⟩‖²` over nuclear states.
    fn norm_drift(&self, t: f64) -> f64 {
        let dim = self.energies.len();
        let mut worst = 0.0f64;
        for m in 0..self.nn {
            let col = self.nn + m;
            let mut norm = 0.0;
            for j in 0..dim {
                let (mut re, mut im) = (0.0, 0.0);
                for n in 0..dim {
                    let c = self.vectors[(j, n)] * self.vectors[(col, n)];
                    re += c * (self.energies[n] * t).cos();
                    im -= c * (self.energies[n] * t).sin();
                }
                norm += re * re + im * im;
            }
            worst = worst.max((norm - 1.0).abs());
        }
        worst
    }
}

/// Excitation probability of the electron spin versus pulse duration for
/// one nuclear configuration, under a constant Rabi frequency `omega` and
/// spin-drive detuning `delta` (rad/s).
pub fn simulate_driven_spin(sites: &[NuclearSite], omega: f64, delta: f64, times: &[f64]) -> Result<Vec<f64>> {
    let p = Propagator::new(sites, omega, delta)?;
    Ok(times.iter().map(|&t| p.p_up(t)).collect())
}

/// Largest departure from unit norm of any propagated state over `times`.
pub fn unitarity_drift(sites: &[NuclearSite], omega: f64, delta: f64, times: &[f64]) -> Result<f64> {
    let p = Propagator::new(sites, omega, delta)?;
    Ok(times.iter().map(|&t| p.norm_drift(t)).fold(0.0, f64::max))
}

/// `n` equally weighted detunings spread uniformly across the cavity
/// linewidth `[−κ/2, κ/2]`; `n = 1` gives the resonant spin alone.
pub fn detunings_within_linewidth(kappa: f64, n: usize) -> Vec<(f64, f64)> {
    if n <= 1 {
        return vec![(0.0, 1.0)];
    }
    (0..n).map(|i| (kappa * ((i as f64 + 0.5) / n as f64 - 0.5), 1.0 / n as f64)).collect()
}

/// `P_↑(t)` averaged over every retained configuration and over the
/// weighted `detunings`. Each configuration is evaluated independently;
/// the weighted sum runs in enumeration order, so results do not depend
/// on thread scheduling.
pub fn bath_averaged_rabi(
    config: &BathConfig,
    sites: &[NuclearSite],
    omega: f64,
    detunings: &[(f64, f64)],
    times: &[f64],
) -> Result<Vec<f64>> {
    if sites.len() < config.n_sites {
        return Err(invalid("sites", format!("{} sites given, configuration needs {}", sites.len(), config.n_sites)));
    }
    let (configs, _) = enumerate_configs(config)?;
    let total_w: f64 = detunings.iter().map(|d| d.1).sum();
    if !(total_w > 0.0) {
        return Err(invalid("detunings", "weights must sum to a positive value"));
    }
    let curves = configs
        .par_iter()
        .map(|c| {
            let occ: Vec<NuclearSite> = c.occupied.iter().map(|&i| sites[i]).collect();
            let mut acc = vec![0.0; times.len()];
            for &(delta, w) in detunings {
                let p = simulate_driven_spin(&occ, omega, delta, times)?;
                acc.iter_mut().zip(p).for_each(|(a, v)| *a += w / total_w * v);
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = vec![0.0; times.len()];
    for (c, curve) in configs.iter().zip(curves) {
        out.iter_mut().zip(curve).for_each(|(o, v)| *o += c.weight * v);
    }
    Ok(out)
}

/// Peak-to-peak swing of `p` within consecutive windows of one `period`,
/// a simple envelope for oscillation damping.
pub fn period_contrast(times: &[f64], p: &[f64], period: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut edge = times.first().copied().unwrap_or(0.0) + period;
    for (&t, &v) in times.iter().zip(p) {
        if t >= edge {
            out.push(hi - lo);
            (lo, hi) = (f64::INFINITY, f64::NEG_INFINITY);
            edge += period;
        }
        lo = lo.min(v);
        hi = hi.max(v);
    }
    out
}

#[cfg(test)]
mod tests;
