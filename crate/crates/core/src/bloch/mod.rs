//! Cavity-filtered drive and Bloch-vector dynamics of single spin packets.
//!
//! Drive amplitudes follow the photon-flux convention: `β` in ns^(-1/2),
//! pulse strength `ε = β·Dt` in ns^(1/2). Everything else is SI.

mod cavity;
mod evolve;

pub use cavity::{cavity_response, uniform_times, CavityDrive, CavityField, Pulse};
pub use evolve::{evolve_constant, evolve_packet, EvolveOptions, Integrator, SpinPacket};

use crate::constants::SQRT_NS;
use crate::error::{check, Result};

/// Rotation angle `ψ = 2 g0 ε √κc / κ` (radians) for pulse strength `epsilon`
/// in ns^(1/2). The excitation probability of a resonant spin is `sin²ψ`,
/// i.e. the Bloch vector nutates by `2ψ`.
pub fn rabi_angle(epsilon: f64, g0: f64, kappa_c: f64, kappa: f64) -> Result<f64> {
    check("kappa", kappa, kappa > 0.0, "must be > 0")?;
    Ok(2.0 * g0 * epsilon * SQRT_NS * kappa_c.sqrt() / kappa)
}

/// Longitudinal polarization left by the previous sequence: fully saturated
/// spins relaxing for `t_rep` towards `Sz = -1/2`.
pub fn steady_state_init(gamma1: f64, t_rep: f64) -> Result<f64> {
    check("t_rep", t_rep, t_rep >= 0.0, "must be >= 0")?;
    check("gamma1", gamma1, gamma1 >= 0.0, "must be >= 0")?;
    Ok(-0.5 + 0.5 * (-gamma1 * t_rep).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::TWO_PI;
    use approx::assert_relative_eq;

    #[test]
    fn rabi_angle_example() {
        let psi = rabi_angle(4.65e4, TWO_PI * 1e3, 8.2e5, 1.45e6).unwrap();
        // 2 · 6283.19 · 1.4705 s^½ · 905.54 / 1.45e6
        assert!((psi - 11.54).abs() < 0.01, "{psi}");
        assert_eq!(rabi_angle(0.0, 1.0, 1.0, 1.0).unwrap(), 0.0);
        assert_relative_eq!(
            rabi_angle(1e4, 3.0, 8.2e5, 1.45e6).unwrap(),
            3.0 * rabi_angle(1e4, 1.0, 8.2e5, 1.45e6).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn steady_state_examples() {
        assert!((steady_state_init(0.15, 2.0).unwrap() - (-0.1296)).abs() < 1e-4);
        assert_eq!(steady_state_init(0.15, f64::MAX).unwrap(), -0.5);
        assert_eq!(steady_state_init(0.15, 0.0).unwrap(), 0.0);
        assert!(steady_state_init(0.15, -1.0).is_err());
    }
}
