//! Planar resonator: vacuum field around the inductor wire, spin-resonator
//! coupling, Purcell rates and the coupling-constant distribution.

mod coupling;
mod field;

pub use coupling::{
    coupling_constant, coupling_distribution, coupling_map, log_edges, purcell_partition, CouplingDistribution,
    CouplingMap, DistributionSource, GBin, PurcellPartition, TransitionDipole,
};
pub use field::{field_profile, line_current_field, strip_field, CurrentProfile, FieldMap, GridSpec};

use serde::{Deserialize, Serialize};

use crate::constants::{HBAR, TWO_PI};
use crate::error::{check, Result};

/// Lumped description of the resonator mode and the inductor wire.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonatorParams {
    /// rad/s
    pub omega0: f64,
    /// Coupling (output) loss rate, 1/s.
    pub kappa_c: f64,
    /// Internal loss rate, 1/s.
    pub kappa_i: f64,
    /// Ohms.
    pub z0: f64,
    /// Metres.
    pub wire_width: f64,
    /// Metres.
    pub wire_length: f64,
    /// In-plane angle between the wire and the crystal a axis, degrees.
    pub wire_angle_deg: f64,
}

impl ResonatorParams {
    /// 7.004 GHz, κc = 8.2e5 /s, κi = 6.3e5 /s (the JPA-equipped setup).
    pub fn setup1() -> Self {
        ResonatorParams {
            omega0: TWO_PI * 7.004e9,
            kappa_c: 8.2e5,
            kappa_i: 6.3e5,
            ..Self::setup2()
        }
    }

    /// 6.999 GHz, κc = 1.9e6 /s, κi = 3.6e5 /s.
    pub fn setup2() -> Self {
        ResonatorParams {
            omega0: TWO_PI * 6.999e9,
            kappa_c: 1.9e6,
            kappa_i: 3.6e5,
            z0: 35.0,
            wire_width: 2e-6,
            wire_length: 630e-6,
            wire_angle_deg: 51.0,
        }
    }

    pub fn kappa(&self) -> f64 {
        self.kappa_c + self.kappa_i
    }

    pub fn validate(&self) -> Result<()> {
        check("omega0", self.omega0, self.omega0 > 0.0, "must be > 0")?;
        check("kappa_c", self.kappa_c, self.kappa_c >= 0.0, "must be >= 0")?;
        check("kappa_i", self.kappa_i, self.kappa_i >= 0.0, "must be >= 0")?;
        check("kappa", self.kappa(), self.kappa() > 0.0, "kappa_c + kappa_i must be > 0")?;
        check("z0", self.z0, self.z0 > 0.0, "must be > 0")?;
        check("wire_width", self.wire_width, self.wire_width > 0.0, "must be > 0")?;
        check("wire_length", self.wire_length, self.wire_length > 0.0, "must be > 0")?;
        check("wire_angle", self.wire_angle_deg, true, "")
    }
}

/// RMS vacuum current in the inductor, `ω0 √(ħ / 2 Z0)`, amperes.
pub fn vacuum_current(params: &ResonatorParams) -> Result<f64> {
    check("z0", params.z0, params.z0 > 0.0, "must be > 0")?;
    Ok(params.omega0 * (HBAR / (2.0 * params.z0)).sqrt())
}

/// Purcell-enhanced radiative rate `(4g²/κ) / (1 + (2δ/κ)²)`.
pub fn purcell_rate(g0: f64, delta: f64, kappa: f64) -> f64 {
    let x = 2.0 * delta / kappa;
    4.0 * g0 * g0 / kappa / (1.0 + x * x)
}

/// Coupling at which the resonant Purcell rate equals `gamma`.
pub fn g0_for_rate(gamma: f64, kappa: f64) -> f64 {
    (kappa * gamma).sqrt() / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn vacuum_current_at_seven_gigahertz() {
        let p = ResonatorParams { omega0: TWO_PI * 7e9, ..ResonatorParams::setup1() };
        // ω0 √(ħ/2Z0), evaluated by hand: 4.398e10 × 1.2274e-18
        let expect = TWO_PI * 7e9 * (1.054_571_817e-34_f64 / 70.0).sqrt();
        assert_relative_eq!(vacuum_current(&p).unwrap(), expect, max_relative = 1e-14);
        assert!((vacuum_current(&p).unwrap() - 54.0e-9).abs() < 0.05e-9);
        let doubled = ResonatorParams { omega0: 2.0 * p.omega0, ..p };
        assert_relative_eq!(vacuum_current(&doubled).unwrap(), 2.0 * vacuum_current(&p).unwrap());
        assert!(vacuum_current(&ResonatorParams { z0: 0.0, ..p }).is_err());
    }

    #[test]
    fn purcell_rate_examples() {
        let g = TWO_PI * 1e3;
        assert!((purcell_rate(g, 0.0, 1.45e6) - 108.9).abs() < 0.05);
        assert_relative_eq!(purcell_rate(g, 1.45e6 / 2.0, 1.45e6), purcell_rate(g, 0.0, 1.45e6) / 2.0, max_relative = 1e-14);
        assert_eq!(purcell_rate(0.0, 3.0, 1.0), 0.0);
        let g_lim = g0_for_rate(0.15, 1.45e6);
        assert!((g_lim / TWO_PI - 37.0).abs() < 0.2);
        assert_relative_eq!(purcell_rate(g_lim, 0.0, 1.45e6), 0.15, max_relative = 1e-12);
    }

    #[test]
    fn setups_have_expected_linewidths() {
        assert_relative_eq!(ResonatorParams::setup1().kappa(), 1.45e6);
        assert!((ResonatorParams::setup2().kappa_c / ResonatorParams::setup2().kappa() - 0.841).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn purcell_rate_is_even_and_peaked(g in 1.0..1e5f64, d in -1e7..1e7f64, k in 1e3..1e8f64) {
            let r = purcell_rate(g, d, k);
            prop_assert_eq!(r, purcell_rate(g, -d, k));
            prop_assert!(r <= purcell_rate(g, 0.0, k));
        }
    }
}
