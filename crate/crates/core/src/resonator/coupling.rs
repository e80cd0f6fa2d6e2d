use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{g0_for_rate, FieldMap};
use crate::constants::TWO_PI;
use crate::error::{check, invalid, Error, Result};
use crate::species::{build_hamiltonian, eigen_levels, spin_operators, FieldConfig, SpinSystem};

/// `γ · <lower|S|upper>` for one transition, so that the coupling to a
/// field `δB1` is `2π |δB1 · w|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionDipole {
    /// Hz/T, crystal frame.
    pub w: [Complex64; 3],
}

impl TransitionDipole {
    pub fn new(system: &dyn SpinSystem, field: &FieldConfig, lower: usize, upper: usize) -> Result<Self> {
        let dim = system.dimension();
        if lower >= dim || upper >= dim || lower == upper {
            return Err(invalid("transition", format!("({lower}, {upper}) in a {dim}-level system")));
        }
        let levels = eigen_levels(&build_hamiltonian(system, field)?)?;
        let id_n = nalgebra::DMatrix::<Complex64>::identity(dim / 2, dim / 2);
        let s_ops = spin_operators(1).map(|s| s.kronecker(&id_n));
        let t = levels.electron_transition_vector(&s_ops, lower, upper);
        let gamma = system.gyro_matrix();
        let w = [0, 1, 2].map(|j| (0..3).map(|k| t[k] * gamma[(j, k)]).sum());
        Ok(TransitionDipole { w })
    }

    /// Coupling constant in rad/s for the vacuum field `db1` (tesla).
    pub fn coupling(&self, db1: &Vector3<f64>) -> f64 {
        let s: Complex64 = (0..3).map(|j| self.w[j] * db1[j]).sum();
        TWO_PI * s.norm()
    }
}

/// `g0 = 2π |<lower|S|upper> · γ · δB1|`, rad/s.
pub fn coupling_constant(
    system: &dyn SpinSystem,
    field: &FieldConfig,
    transition: (usize, usize),
    db1: &Vector3<f64>,
) -> Result<f64> {
    Ok(TransitionDipole::new(system, field, transition.0, transition.1)?.coupling(db1))
}

/// Coupling constant on the cross-section grid, assumed uniform along the wire.
#[derive(Debug, Clone)]
pub struct CouplingMap {
    pub y_edges: Vec<f64>,
    pub depth_edges: Vec<f64>,
    /// rad/s per cell, same layout as [`FieldMap::field`].
    pub g0: Vec<f64>,
    /// m² per cell.
    pub area: Vec<f64>,
    pub wire_length: f64,
}

impl CouplingMap {
    pub fn ny(&self) -> usize {
        self.y_edges.len() - 1
    }

    pub fn max(&self) -> f64 {
        self.g0.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_positive(&self) -> f64 {
        self.g0.iter().copied().filter(|&g| g > 0.0).fold(f64::INFINITY, f64::min)
    }

    /// Sampled volume, m³.
    pub fn volume(&self) -> f64 {
        self.area.iter().sum::<f64>() * self.wire_length
    }
}

pub fn coupling_map(field: &FieldMap, dipole: &TransitionDipole, theta_c_deg: f64) -> CouplingMap {
    let (lateral, normal) = field.frame(theta_c_deg);
    // the map is linear in δB1: project the dipole once
    let wl: Complex64 = (0..3).map(|j| dipole.w[j] * lateral[j]).sum();
    let wn: Complex64 = (0..3).map(|j| dipole.w[j] * normal[j]).sum();
    let g0 = field.field.iter().map(|b| TWO_PI * (wl * b[0] + wn * b[1]).norm()).collect();
    let area = (0..field.n_cells()).map(|i| field.area(i)).collect();
    CouplingMap {
        y_edges: field.y_edges.clone(),
        depth_edges: field.depth_edges.clone(),
        g0,
        area,
        wire_length: field.wire_length,
    }
}

/// Split of the grid into the Purcell volume and the spin-lattice volume.
#[derive(Debug, Clone)]
pub struct PurcellPartition {
    /// `true` where the resonant radiative rate exceeds the non-radiative one.
    pub purcell: Vec<bool>,
    /// Coupling on the boundary, rad/s.
    pub g0_lim: f64,
    /// Purcell-volume cells with at least one neighbour outside it.
    pub boundary: Vec<usize>,
}

impl PurcellPartition {
    pub fn purcell_volume(&self, map: &CouplingMap) -> f64 {
        self.purcell.iter().zip(&map.area).filter(|(p, _)| **p).map(|(_, a)| a).sum::<f64>() * map.wire_length
    }
}

pub fn purcell_partition(map: &CouplingMap, gamma_nr: f64, kappa: f64) -> Result<PurcellPartition> {
    check("gamma_nr", gamma_nr, gamma_nr >= 0.0, "must be >= 0")?;
    check("kappa", kappa, kappa > 0.0, "must be > 0")?;
    let g0_lim = g0_for_rate(gamma_nr, kappa);
    let purcell: Vec<bool> = map.g0.iter().map(|&g| g > g0_lim).collect();
    let ny = map.ny();
    let nz = map.depth_edges.len() - 1;
    let mut boundary = Vec::new();
    for i in 0..purcell.len() {
        if !purcell[i] {
            continue;
        }
        let (iy, iz) = (i % ny, i / ny);
        let outside = (iy > 0 && !purcell[i - 1])
            || (iy + 1 < ny && !purcell[i + 1])
            || (iz > 0 && !purcell[i - ny])
            || (iz + 1 < nz && !purcell[i + ny]);
        if outside {
            boundary.push(i);
        }
    }
    Ok(PurcellPartition { purcell, g0_lim, boundary })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionSource {
    FromMap,
    AnalyticThinWire,
}

/// Histogram of spins over coupling constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingDistribution {
    /// rad/s, ascending.
    pub edges: Vec<f64>,
    /// Spins in each bin.
    pub counts: Vec<f64>,
    pub source: DistributionSource,
}

/// One coupling bin as used by the ensemble simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GBin {
    /// Representative coupling, rad/s.
    pub g0: f64,
    pub width: f64,
    pub count: f64,
}

impl CouplingDistribution {
    /// `ρ(g) = ḡ²/g³` on `[g_min, g_max]`, binned exactly into `n_bins`
    /// logarithmic bins.
    pub fn thin_wire(g_bar: f64, g_min: f64, g_max: f64, n_bins: usize) -> Result<Self> {
        check("g_bar", g_bar, g_bar > 0.0, "must be > 0")?;
        check("g_min", g_min, g_min > 0.0, "must be > 0")?;
        check("g_max", g_max, g_max > g_min, "must exceed g_min")?;
        let edges = log_edges(g_min, g_max, n_bins.max(1));
        let counts = edges.windows(2).map(|e| 0.5 * g_bar * g_bar * (e[0].powi(-2) - e[1].powi(-2))).collect();
        Ok(CouplingDistribution { edges, counts, source: DistributionSource::AnalyticThinWire })
    }

    /// Thin-wire distribution holding `total` spins.
    pub fn thin_wire_with_total(total: f64, g_min: f64, g_max: f64, n_bins: usize) -> Result<Self> {
        check("total", total, total > 0.0, "must be > 0")?;
        let g_bar = (2.0 * total / (g_min.powi(-2) - g_max.powi(-2))).sqrt();
        Self::thin_wire(g_bar, g_min, g_max, n_bins)
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// Spins per unit coupling in bin `k`.
    pub fn density(&self, k: usize) -> f64 {
        self.counts[k] / (self.edges[k + 1] - self.edges[k])
    }

    pub fn bins(&self) -> Vec<GBin> {
        self.edges
            .windows(2)
            .zip(&self.counts)
            .map(|(e, &count)| {
                let g0 = if e[0] > 0.0 { (e[0] * e[1]).sqrt() } else { 0.5 * e[1] };
                GBin { g0, width: e[1] - e[0], count }
            })
            .collect()
    }

    /// Bin `k` cut into `n` sub-bins of equal coupling ratio (equal width
    /// when the bin starts at zero). Exact for the analytic distribution,
    /// piecewise-uniform for histograms.
    pub fn split_bin(&self, k: usize, n: usize) -> Vec<GBin> {
        let (lo, hi, c) = (self.edges[k], self.edges[k + 1], self.counts[k]);
        let n = n.max(1);
        let sub = if lo > 0.0 { log_edges(lo, hi, n) } else { lin_edges(lo, hi, n) };
        let g_bar2 = match self.source {
            DistributionSource::AnalyticThinWire => Some(2.0 * c / (lo.powi(-2) - hi.powi(-2))),
            DistributionSource::FromMap => None,
        };
        sub.windows(2)
            .map(|s| {
                let count = match g_bar2 {
                    Some(gb2) => 0.5 * gb2 * (s[0].powi(-2) - s[1].powi(-2)),
                    None => c * (s[1] - s[0]) / (hi - lo),
                };
                let g0 = if s[0] > 0.0 { (s[0] * s[1]).sqrt() } else { 0.5 * s[1] };
                GBin { g0, width: s[1] - s[0], count }
            })
            .collect()
    }

    /// Same spins, each bin split into `factor` sub-bins.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        let factor = factor.max(1);
        let mut edges = vec![self.edges[0]];
        let mut counts = Vec::new();
        for k in 0..self.counts.len() {
            let (lo, hi) = (self.edges[k], self.edges[k + 1]);
            let sub = if lo > 0.0 { log_edges(lo, hi, factor) } else { lin_edges(lo, hi, factor) };
            edges.extend_from_slice(&sub[1..]);
            counts.extend(self.split_bin(k, factor).iter().map(|b| b.count));
        }
        if edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("edges", "refinement produced non-increasing edges"));
        }
        Ok(CouplingDistribution { edges, counts, source: self.source })
    }

    /// A single narrow bin holding `count` spins at coupling `g0`.
    pub fn single(g0: f64, count: f64) -> Result<Self> {
        check("g0", g0, g0 > 0.0, "must be > 0")?;
        check("count", count, count >= 0.0, "must be >= 0")?;
        Ok(CouplingDistribution {
            edges: vec![g0 * (1.0 - 1e-12), g0 * (1.0 + 1e-12)],
            counts: vec![count],
            source: DistributionSource::FromMap,
        })
    }
}

/// `n + 1` logarithmically spaced edges from `lo` to `hi`.
pub fn log_edges(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let r = (hi / lo).ln() / n as f64;
    let mut e: Vec<f64> = (0..=n).map(|k| lo * (r * k as f64).exp()).collect();
    e[0] = lo;
    e[n] = hi;
    e
}

fn lin_edges(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect()
}

/// Histogram of the coupling map weighted by cell volume × `concentration`
/// (spins per m³).
pub fn coupling_distribution(map: &CouplingMap, concentration: f64, edges: &[f64]) -> Result<CouplingDistribution> {
    check("concentration", concentration, concentration > 0.0, "must be > 0")?;
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("edges", "need at least two strictly increasing bin edges"));
    }
    let mut counts = vec![0.0; edges.len() - 1];
    let mut total = 0.0;
    let mut missing = 0.0;
    for (&g, &a) in map.g0.iter().zip(&map.area) {
        let n = a * map.wire_length * concentration;
        total += n;
        let last = edges.len() - 1;
        if g < edges[0] || g > edges[last] {
            missing += n;
            continue;
        }
        let k = edges.partition_point(|&e| e <= g).clamp(1, last) - 1;
        counts[k] += n;
    }
    if missing > 0.0 {
        return Err(Error::Coverage { covered: 1.0 - missing / total, missing, tolerance: 0.0 });
    }
    Ok(CouplingDistribution { edges: edges.to_vec(), counts, source: DistributionSource::FromMap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resonator::{field_profile, CurrentProfile, GridSpec, ResonatorParams};
    use crate::species::SpeciesRegistry;
    use approx::assert_relative_eq;

    fn er_dipole(phi: f64) -> TransitionDipole {
        let reg = SpeciesRegistry::builtin();
        let er = reg.species_named("Er").unwrap();
        TransitionDipole::new(er, &FieldConfig::new(0.06, phi, 0.0).unwrap(), 0, 1).unwrap()
    }

    #[test]
    fn transverse_in_plane_field_couples_with_half_gamma_perp() {
        let d = er_dipole(0.0);
        let b1 = Vector3::new(0.0, 1.8e-8, 0.0);
        let expect = TWO_PI * 0.5 * 117.3e9 * 1.8e-8;
        assert_relative_eq!(d.coupling(&b1), expect, max_relative = 1e-9);
        assert!((d.coupling(&b1) / TWO_PI - 1.06e3).abs() < 0.01e3);
        assert!(d.coupling(&Vector3::new(1.8e-8, 0.0, 0.0)) < 1e-9 * expect);
        assert_relative_eq!(d.coupling(&(b1 * 3.0)), 3.0 * d.coupling(&b1), max_relative = 1e-12);
        // along c the coupling uses γ∥
        let along_c = d.coupling(&Vector3::new(0.0, 0.0, 1.8e-8));
        assert_relative_eq!(along_c, TWO_PI * 0.5 * 17.45e9 * 1.8e-8, max_relative = 1e-9);
    }

    #[test]
    fn coupling_map_reproduces_khz_scale_and_width_structure() {
        let p = ResonatorParams::setup1();
        let field = field_profile(&p, &GridSpec { fine_cell: 20e-9, ..Default::default() }, CurrentProfile::Uniform).unwrap();
        let map = coupling_map(&field, &er_dipole(47.0), 0.0);
        let gmax = map.max() / TWO_PI;
        assert!(gmax > 0.6e3 && gmax < 1.5e3, "{gmax}");
    }

    #[test]
    fn partition_is_complementary() {
        let p = ResonatorParams::setup1();
        let field = field_profile(&p, &GridSpec { fine_cell: 40e-9, ..Default::default() }, CurrentProfile::Uniform).unwrap();
        let map = coupling_map(&field, &er_dipole(47.0), 0.0);
        let part = purcell_partition(&map, 0.15, p.kappa()).unwrap();
        let n_r = part.purcell.iter().filter(|&&b| b).count();
        assert!(n_r > 0 && n_r < map.g0.len());
        for (g, inside) in map.g0.iter().zip(&part.purcell) {
            assert_eq!(*inside, crate::resonator::purcell_rate(*g, 0.0, p.kappa()) > 0.15);
        }
        assert!(!part.boundary.is_empty());
        let all = purcell_partition(&map, 0.0, p.kappa()).unwrap();
        assert!(all.purcell.iter().zip(&map.g0).all(|(p, g)| *p == (*g > 0.0)));
        let none = purcell_partition(&map, 1e12, p.kappa()).unwrap();
        assert!(none.purcell.iter().all(|p| !p));
    }

    #[test]
    fn histogram_conserves_spins_and_rejects_partial_cover() {
        let p = ResonatorParams::setup1();
        let field = field_profile(&p, &GridSpec { fine_cell: 40e-9, ..Default::default() }, CurrentProfile::Uniform).unwrap();
        let map = coupling_map(&field, &er_dipole(47.0), 0.0);
        let conc = 1e19;
        let edges = log_edges(map.min_positive() * 0.999, map.max() * 1.001, 60);
        let dist = coupling_distribution(&map, conc, &edges).unwrap();
        assert_relative_eq!(dist.total(), map.volume() * conc, max_relative = 1e-6);
        let narrow = log_edges(map.min_positive() * 2.0, map.max() * 1.001, 60);
        assert!(matches!(coupling_distribution(&map, conc, &narrow), Err(Error::Coverage { .. })));
    }

    #[test]
    fn thin_wire_density_is_inverse_cube() {
        let d = CouplingDistribution::thin_wire(100.0, 1.0, 1e3, 40).unwrap();
        let b = d.bins();
        for k in 0..b.len() - 1 {
            let slope = (d.density(k + 1) / d.density(k)).ln() / (b[k + 1].g0 / b[k].g0).ln();
            assert!((slope + 3.0).abs() < 0.01);
        }
        assert_relative_eq!(d.total(), 0.5 * 1e4 * (1.0 - 1e-6), max_relative = 1e-12);
        let r = d.refined(3).unwrap();
        assert_relative_eq!(r.total(), d.total(), max_relative = 1e-12);
        assert_eq!(r.counts.len(), 120);
    }
}
