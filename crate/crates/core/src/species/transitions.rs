use nalgebra::Vector3;
use num_complex::Complex64;
use rayon::prelude::*;

use super::hamiltonian::{eigen_levels, electron_operators, hamiltonian_at};
use super::{field_direction, SpinSystem};
use crate::error::{check, Result};

/// A resonance between two levels (indices into the ascending spectrum).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    /// Tesla.
    pub b_res: f64,
    pub lower: usize,
    pub upper: usize,
    /// `|<lower| S·d |upper>|` for the drive direction `d`.
    pub matrix_element: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    /// Coarse scan step used to bracket resonances, tesla.
    pub step: f64,
    /// Drive field direction in the crystal frame. Defaults to the in-plane
    /// direction perpendicular to the static field.
    pub drive: Option<Vector3<f64>>,
    /// Relative tolerance on `|ΔE − hν0| / hν0`.
    pub rel_tol: f64,
    /// Transitions with a smaller matrix element are dropped.
    pub min_matrix_element: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { step: 0.05e-3, drive: None, rel_tol: 1e-10, min_matrix_element: 0.0 }
    }
}

/// Static fields in `range` (tesla) at which a level pair is split by `nu0`
/// (Hz), for a field along `(phi_deg, theta_c_deg)`. Sorted by field.
pub fn transition_fields(
    system: &dyn SpinSystem,
    nu0: f64,
    direction: (f64, f64),
    range: (f64, f64),
    opts: &SearchOptions,
) -> Result<Vec<Transition>> {
    let (b_lo, b_hi) = range;
    check("nu0", nu0, nu0 > 0.0, "must be > 0")?;
    check("range.start", b_lo, b_lo >= 0.0, "must be >= 0")?;
    check("range.end", b_hi, b_hi > b_lo, "must exceed range start")?;
    check("step", opts.step, opts.step > 0.0, "must be > 0")?;

    let dir = field_direction(direction.0, direction.1);
    let drive = opts
        .drive
        .map(|d| d.normalize())
        .unwrap_or_else(|| field_direction(direction.0 + 90.0, direction.1));

    let n_steps = ((b_hi - b_lo) / opts.step).ceil().max(1.0) as usize;
    let grid: Vec<f64> = (0..=n_steps).map(|k| (b_lo + k as f64 * opts.step).min(b_hi)).collect();
    let spectra: Vec<Vec<f64>> = grid
        .par_iter()
        .map(|&b| eigen_levels(&hamiltonian_at(system, &(dir * b))).map(|l| l.energies))
        .collect::<Result<_>>()?;

    let dim = system.dimension();
    let mut brackets = Vec::new();
    for w in 0..grid.len() - 1 {
        for i in 0..dim {
            for j in (i + 1)..dim {
                let f0 = spectra[w][j] - spectra[w][i] - nu0;
                let f1 = spectra[w + 1][j] - spectra[w + 1][i] - nu0;
                if f0 == 0.0 || (f0 < 0.0) != (f1 < 0.0) {
                    if f0 == 0.0 && w > 0 {
                        // already counted as the right end of the previous interval
                        continue;
                    }
                    brackets.push((grid[w], grid[w + 1], i, j));
                }
            }
        }
    }

    let s_ops = electron_operators(system);
    let drive_op = &s_ops[0] * Complex64::new(drive.x, 0.0)
        + &s_ops[1] * Complex64::new(drive.y, 0.0)
        + &s_ops[2] * Complex64::new(drive.z, 0.0);

    let mut out = brackets
        .into_par_iter()
        .map(|(a, b, i, j)| {
            let gap = |bf: f64| -> Result<f64> {
                let e = eigen_levels(&hamiltonian_at(system, &(dir * bf)))?.energies;
                Ok(e[j] - e[i] - nu0)
            };
            let b_res = refine_root(gap, a, b, nu0 * opts.rel_tol)?;
            let levels = eigen_levels(&hamiltonian_at(system, &(dir * b_res)))?;
            Ok(Transition { b_res, lower: i, upper: j, matrix_element: levels.matrix_element(&drive_op, i, j) })
        })
        .collect::<Result<Vec<_>>>()?;
    out.retain(|t| t.matrix_element >= opts.min_matrix_element);
    out.sort_by(|x, y| x.b_res.total_cmp(&y.b_res).then(x.lower.cmp(&y.lower)).then(x.upper.cmp(&y.upper)));
    Ok(out)
}

/// Illinois-variant regula falsi on a sign-change bracket.
fn refine_root(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, f_tol: f64) -> Result<f64> {
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    let mut last_side = 0i8;
    let mut x = 0.5 * (a + b);
    for _ in 0..200 {
        x = (a * fb - b * fa) / (fb - fa);
        let fx = f(x)?;
        if fx.abs() <= f_tol || (b - a).abs() <= 1e-14 * b.abs() {
            return Ok(x);
        }
        if (fx < 0.0) == (fb < 0.0) {
            b = x;
            fb = fx;
            if last_side == -1 {
                fa *= 0.5;
            }
            last_side = -1;
        } else {
            a = x;
            fa = fx;
            if last_side == 1 {
                fb *= 0.5;
            }
            last_side = 1;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::species::hamiltonian::{eigen_levels, hamiltonian_at};
    use crate::species::SpeciesRegistry;

    #[test]
    fn erbium_resonance_field_inverts_gamma_perp() {
        let reg = SpeciesRegistry::builtin();
        let er = reg.species_named("Er").unwrap();
        let t = transition_fields(er, 6.999e9, (37.0, 0.0), (0.05, 0.07), &SearchOptions::default()).unwrap();
        assert_eq!(t.len(), 1);
        assert!((t[0].b_res - 6.999e9 / 117.3e9).abs() < 1e-9);
        assert!((t[0].matrix_element - 0.5).abs() < 1e-9);
    }

    #[test]
    fn root_residual_below_tolerance() {
        let reg = SpeciesRegistry::builtin();
        let nd = reg.species_named("143Nd").unwrap();
        let nu0 = 7e9;
        let ts = transition_fields(nd, nu0, (30.0, 3.0), (0.05, 0.2), &SearchOptions::default()).unwrap();
        assert!(!ts.is_empty());
        let dir = crate::species::field_direction(30.0, 3.0);
        for t in ts {
            let e = eigen_levels(&hamiltonian_at(nd, &(dir * t.b_res))).unwrap().energies;
            assert!(((e[t.upper] - e[t.lower]) - nu0).abs() / nu0 < 1e-9);
        }
    }

    #[test]
    fn brute_force_scan_agrees_for_ytterbium() {
        // oracle: eigenvalue scan on a dense 1 µT grid
        let reg = SpeciesRegistry::builtin();
        let yb = reg.species_named("Yb").unwrap();
        let t = transition_fields(yb, 6.999e9, (0.0, 0.0), (0.1, 0.15), &SearchOptions::default()).unwrap();
        let dir = field_direction(0.0, 0.0);
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..=50_000 {
            let b = 0.1 + k as f64 * 1e-6;
            let e = eigen_levels(&hamiltonian_at(yb, &(dir * b))).unwrap().energies;
            let r: f64 = (e[1] - e[0] - 6.999e9).abs();
            if r < best.0 {
                best = (r, b);
            }
        }
        assert!((t[0].b_res - best.1).abs() < 1e-6);
    }

    #[test]
    fn empty_when_no_crossing() {
        let reg = SpeciesRegistry::builtin();
        let er = reg.species_named("Er").unwrap();
        let t = transition_fields(er, 6.999e9, (0.0, 0.0), (0.1, 0.2), &SearchOptions::default()).unwrap();
        assert!(t.is_empty());
        assert!(transition_fields(er, 6.999e9, (0.0, 0.0), (0.2, 0.1), &SearchOptions::default()).is_err());
    }
}
