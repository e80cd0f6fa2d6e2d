use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{vacuum_current, ResonatorParams};
use crate::constants::MU_0;
use crate::error::{check, Result};
use crate::species::field_direction;

use std::f64::consts::PI;

/// Lateral distribution of the vacuum current across the strip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurrentProfile {
    Uniform,
    /// Thin-film Meissner profile `K ∝ 1/√((w/2)² − y²)`, clipped at a
    /// distance `cutoff` (metres) from each edge.
    EdgePeaked { cutoff: f64, substrips: usize },
}

impl CurrentProfile {
    pub fn edge_peaked() -> Self {
        CurrentProfile::EdgePeaked { cutoff: 100e-9, substrips: 200 }
    }
}

/// Cross-section grid below the wire. `y` is lateral, `depth` is measured
/// into the crystal from the surface carrying the wire.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Uniform cell size close to the wire, metres.
    pub fine_cell: f64,
    /// The fine region extends this far beyond the wire edges and below the surface.
    pub fine_margin: f64,
    /// Outer half-width and depth of the grid.
    pub extent: f64,
    /// Ratio between consecutive cell sizes outside the fine region.
    pub growth: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { fine_cell: 10e-9, fine_margin: 2e-6, extent: 50e-6, growth: 1.08 }
    }
}

impl GridSpec {
    fn validate(&self) -> Result<()> {
        check("fine_cell", self.fine_cell, self.fine_cell > 0.0, "must be > 0")?;
        check("fine_margin", self.fine_margin, self.fine_margin > 0.0, "must be > 0")?;
        check("extent", self.extent, self.extent > self.fine_margin, "must exceed the fine region")?;
        check("growth", self.growth, self.growth >= 1.0, "must be >= 1")
    }

    /// Node positions from `start` outward to `extent`: uniform up to `fine_end`,
    /// then geometrically growing cells.
    fn nodes_from(&self, start: f64, fine_end: f64) -> Vec<f64> {
        let mut nodes = vec![start];
        let n_fine = ((fine_end - start) / self.fine_cell).round().max(1.0) as usize;
        let h = (fine_end - start) / n_fine as f64;
        for k in 1..=n_fine {
            nodes.push(start + k as f64 * h);
        }
        let mut step = h;
        let mut x = fine_end;
        while x < self.extent {
            step *= self.growth;
            x = (x + step).min(self.extent);
            if self.extent - x < 0.25 * step {
                x = self.extent;
            }
            nodes.push(x);
        }
        nodes
    }
}

/// Vacuum magnetic field sampled on a cross-section grid.
#[derive(Debug, Clone)]
pub struct FieldMap {
    pub y_edges: Vec<f64>,
    pub depth_edges: Vec<f64>,
    /// `(B_lateral, B_normal)` per cell, tesla, row-major with depth as the
    /// slow index. The normal points out of the crystal towards the wire.
    pub field: Vec<[f64; 2]>,
    pub wire_length: f64,
    pub wire_angle_deg: f64,
}

impl FieldMap {
    pub fn ny(&self) -> usize {
        self.y_edges.len() - 1
    }

    pub fn n_cells(&self) -> usize {
        self.field.len()
    }

    /// `(y, depth)` of the centre of cell `i`.
    pub fn center(&self, i: usize) -> (f64, f64) {
        let (iy, iz) = (i % self.ny(), i / self.ny());
        (
            0.5 * (self.y_edges[iy] + self.y_edges[iy + 1]),
            0.5 * (self.depth_edges[iz] + self.depth_edges[iz + 1]),
        )
    }

    /// Cross-section area of cell `i`, m².
    pub fn area(&self, i: usize) -> f64 {
        let (iy, iz) = (i % self.ny(), i / self.ny());
        (self.y_edges[iy + 1] - self.y_edges[iy]) * (self.depth_edges[iz + 1] - self.depth_edges[iz])
    }

    pub fn magnitude(&self, i: usize) -> f64 {
        self.field[i][0].hypot(self.field[i][1])
    }

    /// Field of cell `i` in the crystal (a, b, c) frame, for a sample whose
    /// normal is tilted by `theta_c_deg` from c.
    pub fn crystal_vector(&self, i: usize, theta_c_deg: f64) -> Vector3<f64> {
        let (lateral, normal) = self.frame(theta_c_deg);
        lateral * self.field[i][0] + normal * self.field[i][1]
    }

    pub(crate) fn frame(&self, theta_c_deg: f64) -> (Vector3<f64>, Vector3<f64>) {
        let along = field_direction(self.wire_angle_deg, theta_c_deg);
        let lateral = field_direction(self.wire_angle_deg + 90.0, theta_c_deg);
        (lateral, along.cross(&lateral))
    }
}

/// Field of an infinitely thin line current `current` (amperes) at lateral
/// offset `y_src`, seen at `(y, depth)`.
pub fn line_current_field(current: f64, y_src: f64, y: f64, depth: f64) -> [f64; 2] {
    let u = y - y_src;
    let r2 = u * u + depth * depth;
    let pre = MU_0 * current / (2.0 * PI * r2);
    [pre * depth, pre * u]
}

/// Field of a uniform current sheet of total `current` over `[y1, y2]`.
pub fn strip_field(current: f64, y1: f64, y2: f64, y: f64, depth: f64) -> [f64; 2] {
    let k = current / (y2 - y1);
    let (u1, u2) = (y - y2, y - y1);
    let b_lat = MU_0 * k / (2.0 * PI) * (u2.atan2(depth) - u1.atan2(depth));
    let b_norm = MU_0 * k / (4.0 * PI) * ((u2 * u2 + depth * depth) / (u1 * u1 + depth * depth)).ln();
    [b_lat, b_norm]
}

/// Sub-strips `(y1, y2, current)` that represent the chosen profile.
fn substrips(profile: CurrentProfile, width: f64, current: f64) -> Result<Vec<(f64, f64, f64)>> {
    let a = width / 2.0;
    match profile {
        CurrentProfile::Uniform => Ok(vec![(-a, a, current)]),
        CurrentProfile::EdgePeaked { cutoff, substrips } => {
            check("cutoff", cutoff, cutoff > 0.0 && cutoff < a, "must lie in (0, w/2)")?;
            let n = substrips.max(2);
            let inner = a - cutoff;
            let k_edge = 1.0 / (cutoff * (width - cutoff)).sqrt();
            // cumulative integral of the clipped profile, odd about the centre
            let cumulative = |y: f64| {
                let s = y.abs();
                let v = if s <= inner { (s / a).asin() } else { (inner / a).asin() + k_edge * (s - inner) };
                v.copysign(y)
            };
            // cosine spacing concentrates sub-strips at the edges
            let nodes: Vec<f64> = (0..=n).map(|k| -a * (PI * k as f64 / n as f64).cos()).collect();
            let total = cumulative(a) - cumulative(-a);
            Ok(nodes
                .windows(2)
                .map(|w| (w[0], w[1], current * (cumulative(w[1]) - cumulative(w[0])) / total))
                .collect())
        }
    }
}

/// Vacuum field `δB1` of the inductor wire on a cross-section grid.
pub fn field_profile(params: &ResonatorParams, grid: &GridSpec, profile: CurrentProfile) -> Result<FieldMap> {
    params.validate()?;
    grid.validate()?;
    let i0 = vacuum_current(params)?;
    let half = params.wire_width / 2.0;
    let fine_half = half + grid.fine_margin;

    let positive = grid.nodes_from(0.0, fine_half);
    let mut y_edges: Vec<f64> = positive.iter().rev().map(|y| -y).collect();
    y_edges.extend_from_slice(&positive[1..]);
    let depth_edges = grid.nodes_from(0.0, grid.fine_margin);

    let strips = substrips(profile, params.wire_width, i0)?;
    let ny = y_edges.len() - 1;
    let nz = depth_edges.len() - 1;
    let field = (0..ny * nz)
        .into_par_iter()
        .map(|i| {
            let y = 0.5 * (y_edges[i % ny] + y_edges[i % ny + 1]);
            let d = 0.5 * (depth_edges[i / ny] + depth_edges[i / ny + 1]);
            strips.iter().fold([0.0, 0.0], |acc, &(y1, y2, c)| {
                let b = strip_field(c, y1, y2, y, d);
                [acc[0] + b[0], acc[1] + b[1]]
            })
        })
        .collect();

    Ok(FieldMap { y_edges, depth_edges, field, wire_length: params.wire_length, wire_angle_deg: params.wire_angle_deg })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn thin_wire_field_at_600_nm() {
        let b = line_current_field(54e-9, 0.0, 0.0, 600e-9);
        assert!((b[0].hypot(b[1]) - 1.8e-8).abs() < 0.01e-8);
    }

    #[test]
    fn strip_reduces_to_line_current_far_away() {
        let far = strip_field(1e-6, -1e-6, 1e-6, 3e-5, 4e-5);
        let line = line_current_field(1e-6, 0.0, 3e-5, 4e-5);
        assert_relative_eq!(far[0], line[0], max_relative = 1e-3);
        assert_relative_eq!(far[1], line[1], max_relative = 1e-3);
    }

    #[test]
    fn strip_field_matches_quadrature() {
        // oracle: midpoint sum of 20000 line currents
        let (w, y, d) = (2e-6, 0.3e-6, 0.15e-6);
        let n = 20_000;
        let mut q = [0.0, 0.0];
        for k in 0..n {
            let ys = -w / 2.0 + (k as f64 + 0.5) * w / n as f64;
            let b = line_current_field(1.0 / n as f64, ys, y, d);
            q[0] += b[0];
            q[1] += b[1];
        }
        let s = strip_field(1.0, -w / 2.0, w / 2.0, y, d);
        assert_relative_eq!(s[0], q[0], max_relative = 1e-6);
        assert_relative_eq!(s[1], q[1], max_relative = 1e-6);
    }

    #[test]
    fn field_circulates_around_the_wire() {
        for &(y, d) in &[(2e-5, 1e-5), (-3e-5, 2e-5), (0.0, 4e-5)] {
            let b = strip_field(1.0, -1e-6, 1e-6, y, d);
            // radial vector from the wire to the point is (y, -d) in (lateral, normal)
            let dot = b[0] * y - b[1] * d;
            assert!(dot.abs() < 2e-3 * b[0].hypot(b[1]) * y.hypot(d));
        }
    }

    #[test]
    fn edge_peaked_substrips_carry_full_current() {
        let s = substrips(CurrentProfile::edge_peaked(), 2e-6, 1.0).unwrap();
        let total: f64 = s.iter().map(|x| x.2).sum();
        assert_relative_eq!(total, 1.0, max_relative = 1e-12);
        let density_edge = s[0].2 / (s[0].1 - s[0].0);
        let mid = &s[s.len() / 2];
        // clipped at 100 nm: a / √(λ(w − λ)) ≈ 2.29 times the central density
        assert!(density_edge > 2.2 * mid.2 / (mid.1 - mid.0));
    }

    #[test]
    fn far_field_falls_as_one_over_r() {
        let p = ResonatorParams::setup1();
        let map = field_profile(&p, &GridSpec { fine_cell: 50e-9, ..Default::default() }, CurrentProfile::Uniform).unwrap();
        let mut products = Vec::new();
        for i in 0..map.n_cells() {
            let (y, d) = map.center(i);
            let r = y.hypot(d);
            if r > 5.0 * p.wire_width && r < 45e-6 {
                products.push(map.magnitude(i) * r);
            }
        }
        let mean = products.iter().sum::<f64>() / products.len() as f64;
        for v in products {
            assert!((v / mean - 1.0).abs() < 0.02);
        }
    }

    #[test]
    fn grid_is_fine_near_the_wire() {
        let map = field_profile(&ResonatorParams::setup1(), &GridSpec::default(), CurrentProfile::Uniform).unwrap();
        let widths: Vec<f64> = map.y_edges.windows(2).map(|w| w[1] - w[0]).collect();
        let mid = widths.len() / 2;
        assert!((widths[mid] - 10e-9).abs() < 1e-12);
        assert!((map.y_edges[0] + 50e-6).abs() < 1e-12 && (map.depth_edges.last().unwrap() - 50e-6).abs() < 1e-12);
    }
}
