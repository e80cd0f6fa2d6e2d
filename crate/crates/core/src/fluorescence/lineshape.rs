use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use crate::error::{check, invalid, Error, Result};

/// Distribution of spin detunings `ρ(δ)`, rad/s. Normalized to unit mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LineShape {
    /// `width` is the half width at half maximum.
    Lorentzian { center: f64, width: f64 },
    /// `width` is the standard deviation.
    Gaussian { center: f64, width: f64 },
    /// Piecewise-linear density sampled at `delta` (offsets from `center`);
    /// any overall scale, it is normalized on use.
    Tabulated { center: f64, delta: Vec<f64>, density: Vec<f64> },
}

impl LineShape {
    pub fn lorentzian(width: f64) -> Self {
        LineShape::Lorentzian { center: 0.0, width }
    }

    pub fn gaussian(width: f64) -> Self {
        LineShape::Gaussian { center: 0.0, width }
    }

    pub fn center(&self) -> f64 {
        match self {
            LineShape::Lorentzian { center, .. } | LineShape::Gaussian { center, .. } => *center,
            LineShape::Tabulated { center, .. } => *center,
        }
    }

    pub fn with_center(mut self, c: f64) -> Self {
        match &mut self {
            LineShape::Lorentzian { center, .. }
            | LineShape::Gaussian { center, .. }
            | LineShape::Tabulated { center, .. } => *center = c,
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        check("center", self.center(), true, "")?;
        match self {
            LineShape::Lorentzian { width, .. } | LineShape::Gaussian { width, .. } => {
                check("width", *width, *width > 0.0, "must be > 0")
            }
            LineShape::Tabulated { delta, density, .. } => {
                if delta.len() < 2 || delta.len() != density.len() {
                    return Err(invalid("density", "tabulated line needs >= 2 points and matching lengths"));
                }
                if delta.windows(2).any(|w| !(w[1] > w[0])) || delta.iter().any(|d| !d.is_finite()) {
                    return Err(invalid("delta", "tabulated offsets must be finite and strictly increasing"));
                }
                if density.iter().any(|d| !d.is_finite() || *d < 0.0) {
                    return Err(invalid("density", "tabulated density must be finite and >= 0"));
                }
                if tab_total(delta, density) <= 0.0 {
                    return Err(invalid("density", "tabulated density has zero mass"));
                }
                Ok(())
            }
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        match self {
            LineShape::Lorentzian { center, width } => {
                let u = (x - center) / width;
                1.0 / (PI * width * (1.0 + u * u))
            }
            LineShape::Gaussian { center, width } => {
                let u = (x - center) / width;
                (-0.5 * u * u).exp() / (width * (2.0 * PI).sqrt())
            }
            LineShape::Tabulated { center, delta, density } => {
                let u = x - center;
                let n = delta.len();
                if u < delta[0] || u > delta[n - 1] {
                    return 0.0;
                }
                let k = delta.partition_point(|&d| d <= u).clamp(1, n - 1) - 1;
                let f = (u - delta[k]) / (delta[k + 1] - delta[k]);
                (density[k] + f * (density[k + 1] - density[k])) / tab_total(delta, density)
            }
        }
    }

    /// Mass below `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            LineShape::Lorentzian { center, width } => 0.5 + ((x - center) / width).atan() / PI,
            LineShape::Gaussian { center, width } => 0.5 * libm::erfc(-(x - center) / (width * SQRT_2)),
            LineShape::Tabulated { center, delta, density } => {
                let u = x - center;
                let n = delta.len();
                if u <= delta[0] {
                    return 0.0;
                }
                if u >= delta[n - 1] {
                    return 1.0;
                }
                let mut acc = 0.0;
                for k in 0..n - 1 {
                    let (a, b) = (delta[k], delta[k + 1]);
                    if u >= b {
                        acc += 0.5 * (density[k] + density[k + 1]) * (b - a);
                    } else {
                        let f = (u - a) / (b - a);
                        let d_u = density[k] + f * (density[k + 1] - density[k]);
                        acc += 0.5 * (density[k] + d_u) * (u - a);
                        break;
                    }
                }
                acc / tab_total(delta, density)
            }
        }
    }

    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        (self.cdf(hi) - self.cdf(lo)).max(0.0)
    }
}

fn tab_total(delta: &[f64], density: &[f64]) -> f64 {
    delta.windows(2).zip(density.windows(2)).map(|(x, d)| 0.5 * (d[0] + d[1]) * (x[1] - x[0])).sum()
}

/// How the detuning axis is cut into packets.
///
/// A linear core of `core_bins` bins spans `±core_half_width·κ`. Beyond it,
/// bins are laid out in `u = atan(2δ/κ)`, with the distance of the outer
/// edge to `u = π/2` shrinking by `outer_ratio` per bin, until the
/// Purcell-weighted spin mass left outside is below `tolerance`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetuningGrid {
    pub core_bins: usize,
    pub core_half_width: f64,
    pub outer_ratio: f64,
    pub tolerance: f64,
    pub max_outer: usize,
    /// Bins holding less than this fraction of the spins are dropped; their
    /// mass counts as uncovered.
    pub min_mass: f64,
}

impl Default for DetuningGrid {
    fn default() -> Self {
        DetuningGrid { core_bins: 41, core_half_width: 3.0, outer_ratio: 1.25, tolerance: 1e-3, max_outer: 200, min_mass: 1e-12 }
    }
}

impl DetuningGrid {
    /// Same coverage rules with bins half as wide.
    pub fn refined(&self) -> Self {
        DetuningGrid { core_bins: 2 * self.core_bins, outer_ratio: self.outer_ratio.sqrt(), ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.core_bins == 0 {
            return Err(invalid("core_bins", "must be >= 1"));
        }
        check("core_half_width", self.core_half_width, self.core_half_width > 0.0, "must be > 0")?;
        check("outer_ratio", self.outer_ratio, self.outer_ratio > 1.0, "must be > 1")?;
        check("tolerance", self.tolerance, self.tolerance > 0.0 && self.tolerance < 1.0, "must be in (0, 1)")?;
        check("min_mass", self.min_mass, (0.0..1.0).contains(&self.min_mass), "must be in [0, 1)")
    }
}

/// One detuning bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DBin {
    pub delta: f64,
    pub width: f64,
    /// Fraction of the spins in the bin.
    pub mass: f64,
}

fn lorentz_factor(delta: f64, kappa: f64) -> f64 {
    let x = 2.0 * delta / kappa;
    1.0 / (1.0 + x * x)
}

/// Detuning bins for `line` and their Purcell-weighted coverage.
///
/// Coverage compares `Σ mass·L(δ)` over the kept bins against the same sum
/// plus an upper bound on what lies beyond the outermost edges,
/// `L(D)·P(|δ| > D)`, with `L` the cavity Lorentzian.
pub fn detuning_bins(line: &LineShape, kappa: f64, grid: &DetuningGrid) -> Result<(Vec<DBin>, f64)> {
    line.validate()?;
    grid.validate()?;
    check("kappa", kappa, kappa > 0.0, "must be > 0")?;
    let half = grid.core_half_width * kappa;
    let step = 2.0 * half / grid.core_bins as f64;
    let mut bins: Vec<DBin> = (0..grid.core_bins)
        .map(|k| {
            let lo = -half + k as f64 * step;
            DBin { delta: lo + 0.5 * step, width: step, mass: line.mass(lo, lo + step) }
        })
        .collect();

    let to_delta = |s: f64| 0.5 * kappa / s.tan();
    let mut s = FRAC_PI_2 - (2.0 * grid.core_half_width).atan();
    let mut edge = half;
    let mut dropped = 0.0;
    let mut coverage;
    let mut layers = 0;
    loop {
        let kept: f64 = bins.iter().map(|b| b.mass * lorentz_factor(b.delta, kappa)).sum();
        let outside = line.cdf(-edge) + 1.0 - line.cdf(edge);
        let bound = lorentz_factor(edge, kappa) * outside + dropped;
        coverage = if kept + bound > 0.0 { kept / (kept + bound) } else { 1.0 };
        if coverage >= 1.0 - grid.tolerance || outside <= 0.0 {
            break;
        }
        if layers == grid.max_outer {
            return Err(Error::Coverage { covered: coverage, missing: bound, tolerance: grid.tolerance });
        }
        let s_next = s / grid.outer_ratio;
        let next = to_delta(s_next);
        let mid = to_delta(0.5 * (s + s_next));
        for sign in [-1.0, 1.0] {
            let (lo, hi) = if sign < 0.0 { (-next, -edge) } else { (edge, next) };
            bins.push(DBin { delta: sign * mid, width: next - edge, mass: line.mass(lo, hi) });
        }
        s = s_next;
        edge = next;
        layers += 1;
    }

    let keep = |b: &DBin| b.mass > grid.min_mass;
    dropped = bins.iter().filter(|b| !keep(b)).map(|b| b.mass * lorentz_factor(b.delta, kappa)).sum();
    bins.retain(keep);
    bins.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    let kept: f64 = bins.iter().map(|b| b.mass * lorentz_factor(b.delta, kappa)).sum();
    if dropped > 0.0 && kept > 0.0 {
        coverage = coverage.min(kept / (kept + dropped));
    }
    if coverage < 1.0 - grid.tolerance {
        return Err(Error::Coverage { covered: coverage, missing: dropped, tolerance: grid.tolerance });
    }
    Ok((bins, coverage))
}
