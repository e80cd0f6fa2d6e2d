//! Physical constants (CODATA 2018, SI).

use std::f64::consts::PI;

pub const HBAR: f64 = 1.054_571_817e-34;
pub const PLANCK: f64 = 6.626_070_15e-34;
pub const MU_0: f64 = 1.256_637_062_12e-6;
/// Bohr magneton divided by Planck's constant, in Hz/T.
pub const MU_B_OVER_H: f64 = 1.399_624_493_61e10;

pub const TWO_PI: f64 = 2.0 * PI;

/// Converts `ns^(±1/2)` drive units to SI `s^(±1/2)`.
pub const SQRT_NS: f64 = 3.162_277_660_168_379_4e-5;

/// Scheelite lattice constants, metres.
pub const CAWO4_A: f64 = 5.243e-10;
pub const CAWO4_C: f64 = 11.376e-10;
/// Ca sites per cubic metre (four formula units per conventional cell).
pub const CAWO4_CA_DENSITY: f64 = 4.0 / (CAWO4_A * CAWO4_A * CAWO4_C);
