use serde::{Deserialize, Serialize};

use crate::bloch::rabi_angle;
use crate::constants::SQRT_NS;
use crate::error::{check, Error, Result};
use crate::resonator::{g0_for_rate, ResonatorParams};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Thin-wire ensemble `ρ(g) = ḡ²/g³` on `[g_min, g_max]`, with no
/// inhomogeneous broadening and infinite integration time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticModel {
    pub g_bar: f64,
    pub g_min: f64,
    pub g_max: f64,
    pub kappa: f64,
    pub kappa_c: f64,
    pub gamma_nr: f64,
    pub eta: f64,
}

/// Radiative and non-radiative contributions to the spin counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticCounts {
    pub c_r: f64,
    pub c_nr: f64,
    pub psi_min: f64,
    pub psi_lim: f64,
    pub psi_max: f64,
}

impl AsymptoticCounts {
    pub fn total(&self) -> f64 {
        self.c_r + self.c_nr
    }
}

impl AsymptoticModel {
    pub fn new(g_bar: f64, g_min: f64, g_max: f64, params: &ResonatorParams, gamma_nr: f64, eta: f64) -> Self {
        AsymptoticModel { g_bar, g_min, g_max, kappa: params.kappa(), kappa_c: params.kappa_c, gamma_nr, eta }
    }

    /// Coupling at which the resonant Purcell rate equals `Γ_NR`.
    pub fn g_lim(&self) -> f64 {
        g0_for_rate(self.gamma_nr, self.kappa)
    }

    fn validate(&self) -> Result<()> {
        check("g_bar", self.g_bar, self.g_bar > 0.0, "must be > 0")?;
        check("kappa", self.kappa, self.kappa > 0.0, "must be > 0")?;
        check("kappa_c", self.kappa_c, self.kappa_c > 0.0, "must be > 0")?;
        check("gamma_nr", self.gamma_nr, self.gamma_nr > 0.0, "must be > 0")?;
        check("eta", self.eta, (0.0..=1.0).contains(&self.eta), "must be in [0, 1]")?;
        let g_lim = self.g_lim();
        if !(self.g_min > 0.0 && 10.0 * self.g_min <= g_lim && 10.0 * g_lim <= self.g_max) {
            return Err(Error::AsymptoticRegime { g_min: self.g_min, g_lim, g_max: self.g_max });
        }
        Ok(())
    }

    fn psi(&self, epsilon: f64, g: f64) -> Result<f64> {
        rabi_angle(epsilon, g, self.kappa_c, self.kappa)
    }

    /// `4ηḡ²κc/κ²`, per unit `ε²` with `ε` in s^(1/2).
    fn quadratic_prefactor(&self) -> f64 {
        4.0 * self.eta * self.g_bar * self.g_bar * self.kappa_c / (self.kappa * self.kappa)
    }

    /// `ε²` laws valid while every spin rotates by much less than π.
    pub fn low_drive(&self, epsilon: f64) -> Result<(f64, f64)> {
        self.validate()?;
        let e2 = (epsilon * SQRT_NS).powi(2);
        let q = self.quadratic_prefactor();
        Ok((q * (self.g_max / self.g_lim()).ln() * e2, 0.5 * q * e2))
    }

    /// Limits once the Purcell-volume boundary rotates by much more than π:
    /// constant radiative part, logarithmic non-radiative part.
    pub fn high_drive(&self, epsilon: f64) -> Result<(f64, f64)> {
        self.validate()?;
        let g_lim = self.g_lim();
        let psi_lim = self.psi(epsilon, g_lim)?;
        let gb2 = self.g_bar * self.g_bar;
        let c_r = 0.25 * self.eta * gb2 * (g_lim.powi(-2) - self.g_max.powi(-2));
        let c_nr = 2.0 * self.eta * gb2 / (self.kappa * self.gamma_nr) * ((2.0 * psi_lim).ln() + EULER_GAMMA);
        Ok((c_r, c_nr))
    }
}

/// Counts from the radiative and non-radiative volumes at pulse strength
/// `epsilon` (ns^(1/2)), with the rotation-angle integrals evaluated by
/// quadrature.
pub fn asymptotic_counts(epsilon: f64, model: &AsymptoticModel) -> Result<AsymptoticCounts> {
    model.validate()?;
    check("epsilon", epsilon, epsilon > 0.0, "must be > 0")?;
    let psi_min = model.psi(epsilon, model.g_min)?;
    let psi_lim = model.psi(epsilon, model.g_lim())?;
    let psi_max = model.psi(epsilon, model.g_max)?;
    let e2 = (epsilon * SQRT_NS).powi(2);
    let c_r = model.quadratic_prefactor() * e2 * integrate(|p| sinc2(p) / p, psi_lim, psi_max);
    let c_nr = 4.0 * model.eta * model.g_bar * model.g_bar / (model.kappa * model.gamma_nr)
        * integrate(|p| p * sinc2(p), psi_min, psi_max.min(psi_lim));
    Ok(AsymptoticCounts { c_r, c_nr, psi_min, psi_lim, psi_max })
}

/// `(sin x / x)²`, smooth through zero.
fn sinc2(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 3.0
    } else {
        (x.sin() / x).powi(2)
    }
}

const GL8: [(f64, f64); 4] = [
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (0.960_289_856_497_536_2, 0.101_228_536_290_376_3),
];

fn gauss8(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
    GL8.iter().map(|&(x, w)| w * (f(m - r * x) + f(m + r * x))).sum::<f64>() * r
}

/// Panels of constant ratio below 1 and of width at most 1/2 above,
/// so oscillating integrands are resolved at any angle.
fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut x = a;
    if x < 1.0 {
        let top = b.min(1.0);
        let n = ((top / x).ln() / 1.2f64.ln()).ceil().max(1.0) as usize;
        let r = (top / x).powf(1.0 / n as f64);
        for _ in 0..n {
            let next = (x * r).min(top);
            sum += gauss8(&f, x, next);
            x = next;
        }
        x = top;
    }
    if b > x {
        let n = ((b - x) / 0.5).ceil() as usize;
        let h = (b - x) / n as f64;
        for k in 0..n {
            sum += gauss8(&f, x + k as f64 * h, x + (k + 1) as f64 * h);
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn model() -> AsymptoticModel {
        let p = ResonatorParams::setup1();
        let g_lim = g0_for_rate(0.15, p.kappa());
        AsymptoticModel::new(2.0 * g_lim, g_lim / 100.0, 1000.0 * g_lim, &p, 0.15, 0.15)
    }

    #[test]
    fn quadrature_oracles() {
        // ∫_0^X sin²ψ/ψ dψ = (γ + ln 2X − Ci(2X))/2, and Ci(2X) = −1/(2X)² + O(X⁻⁴) at X = 50π
        let x = 50.0 * std::f64::consts::PI;
        let expect = 0.5 * (EULER_GAMMA + (2.0 * x).ln() + (2.0 * x).powi(-2));
        assert_relative_eq!(integrate(|p| p * sinc2(p), 1e-12, x), expect, max_relative = 1e-9);
        // ∫_0^∞ sin²ψ/ψ² dψ = π/2
        assert_relative_eq!(integrate(sinc2, 1e-12, 2e4), std::f64::consts::FRAC_PI_2, max_relative = 1e-4);
        assert_relative_eq!(integrate(|p| p * p, 1e-3, 3.0), (27.0 - 1e-9) / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn low_drive_matches_integrals() {
        let m = model();
        let eps = 1e-3 / rabi_angle(1.0, m.g_max, m.kappa_c, m.kappa).unwrap();
        let full = asymptotic_counts(eps, &m).unwrap();
        assert!(full.psi_max < 1.1e-3);
        let (c_r, c_nr) = m.low_drive(eps).unwrap();
        assert_relative_eq!(full.c_r, c_r, max_relative = 1e-5);
        assert_relative_eq!(full.c_nr, c_nr, max_relative = 1e-5);
        // the two ε² laws differ by 2 ln(g_max/g_lim)
        assert_relative_eq!(c_r / c_nr, 2.0 * 1000f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn high_drive_limits() {
        // the limit drops the angles below ψ_min, so take g_min far below g_lim
        let m = AsymptoticModel { g_min: model().g_lim() * 1e-4, ..model() };
        let eps = 300.0 / rabi_angle(1.0, m.g_lim(), m.kappa_c, m.kappa).unwrap();
        let full = asymptotic_counts(eps, &m).unwrap();
        let (c_r, c_nr) = m.high_drive(eps).unwrap();
        assert_relative_eq!(full.c_r, c_r, max_relative = 0.01);
        assert_relative_eq!(full.c_nr, c_nr, max_relative = 1e-3);
    }

    #[test]
    fn regime_is_enforced() {
        let mut m = model();
        m.g_max = 3.0 * m.g_lim();
        assert!(matches!(asymptotic_counts(1.0, &m), Err(Error::AsymptoticRegime { .. })));
    }
}
