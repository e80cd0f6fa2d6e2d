use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::SQRT_NS;
use crate::error::{check, invalid, Result};
use crate::resonator::ResonatorParams;

/// Rectangular microwave pulse at the resonator input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    /// Drive amplitude, ns^(-1/2).
    pub beta: f64,
    /// Seconds.
    pub duration: f64,
    /// Carrier minus resonator frequency, rad/s.
    #[serde(default)]
    pub carrier_detuning: f64,
}

impl Pulse {
    pub fn new(beta: f64, duration: f64) -> Result<Self> {
        let p = Pulse { beta, duration, carrier_detuning: 0.0 };
        p.validate()?;
        Ok(p)
    }

    /// Pulse of strength `epsilon` (ns^½) made with amplitude `beta`.
    pub fn from_strength(epsilon: f64, beta: f64) -> Result<Self> {
        check("beta", beta, beta > 0.0, "must be > 0 to build a pulse of given strength")?;
        Self::new(beta, epsilon / beta * 1e-9)
    }

    pub fn validate(&self) -> Result<()> {
        check("beta", self.beta, self.beta >= 0.0, "must be >= 0")?;
        check("duration", self.duration, self.duration > 0.0, "must be > 0")?;
        check("carrier_detuning", self.carrier_detuning, true, "")
    }

    /// `ε = β·Dt`, ns^(1/2).
    pub fn strength(&self) -> f64 {
        self.beta * self.duration * 1e9
    }

    /// β in s^(-1/2).
    pub fn beta_si(&self) -> f64 {
        self.beta / SQRT_NS
    }
}

/// Analytic intra-resonator amplitude for a rectangular pulse, in the frame
/// rotating at the carrier: `α' = -(κ/2 − iΔ)α + √κc β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityDrive {
    pub pulse: Pulse,
    pub kappa: f64,
    pub kappa_c: f64,
}

impl CavityDrive {
    pub fn new(pulse: Pulse, params: &ResonatorParams) -> Result<Self> {
        pulse.validate()?;
        params.validate()?;
        Ok(CavityDrive { pulse, kappa: params.kappa(), kappa_c: params.kappa_c })
    }

    fn lambda(&self) -> Complex64 {
        Complex64::new(self.kappa / 2.0, -self.pulse.carrier_detuning)
    }

    /// Plateau amplitude reached for `Dt ≫ 1/κ`.
    pub fn steady_state(&self) -> Complex64 {
        self.kappa_c.sqrt() * self.pulse.beta_si() / self.lambda()
    }

    /// Mean intra-resonator photon number on the plateau, `|α_ss|²`.
    pub fn mean_photons(&self) -> f64 {
        self.steady_state().norm_sqr()
    }

    pub fn alpha(&self, t: f64) -> Complex64 {
        if t <= 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let lam = self.lambda();
        let dt = self.pulse.duration;
        let ss = self.steady_state();
        if t <= dt {
            ss * (1.0 - (-lam * t).exp())
        } else {
            ss * (1.0 - (-lam * dt).exp()) * (-lam * (t - dt)).exp()
        }
    }

    /// `∫_0^t α dt'`.
    pub fn alpha_integral(&self, t: f64) -> Complex64 {
        if t <= 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let lam = self.lambda();
        let dt = self.pulse.duration;
        let ss = self.steady_state();
        let rise = |s: f64| ss * (s - (1.0 - (-lam * s).exp()) / lam);
        if t <= dt {
            rise(t)
        } else {
            rise(dt) + self.alpha(dt) * (1.0 - (-lam * (t - dt)).exp()) / lam
        }
    }

    /// `∫_0^t_end α(t) e^(−μt) dt` for complex `μ`. With `μ = iD` this is
    /// the drive spectrum seen by a spin precessing at `D` from the carrier.
    pub fn alpha_transform(&self, mu: Complex64, t_end: f64) -> Complex64 {
        let lam = self.lambda();
        let dt = self.pulse.duration.min(t_end);
        let mut v = self.steady_state() * (decay_integral(mu, dt) - decay_integral(lam + mu, dt));
        if t_end > dt {
            v += self.alpha(dt) * (-mu * dt).exp() * decay_integral(lam + mu, t_end - dt);
        }
        v
    }

    /// Time after which the plateau differs from `α_ss` by less than `rel`.
    pub fn settle_time(&self, rel: f64) -> f64 {
        2.0 * (1.0 / rel).ln() / self.kappa
    }
}

/// `∫_0^t e^(−μs) ds`, with a series where `μt` is small.
fn decay_integral(mu: Complex64, t: f64) -> Complex64 {
    let z = mu * t;
    if z.norm() < 1e-3 {
        t * (1.0 - z / 2.0 + z * z / 6.0 - z * z * z / 24.0)
    } else {
        (1.0 - (-z).exp()) / mu
    }
}

/// Sampled cavity response.
#[derive(Debug, Clone)]
pub struct CavityField {
    pub drive: CavityDrive,
    pub times: Vec<f64>,
    pub alpha: Vec<Complex64>,
}

impl CavityField {
    /// Trapezoidal `∫ |α| dt` over the sampled grid.
    pub fn abs_integral(&self) -> f64 {
        self.times
            .windows(2)
            .zip(self.alpha.windows(2))
            .map(|(t, a)| 0.5 * (t[1] - t[0]) * (a[0].norm() + a[1].norm()))
            .sum()
    }
}

/// Uniform grid `0, dt, …` up to at least `t_end`.
pub fn uniform_times(dt: f64, t_end: f64) -> Vec<f64> {
    let n = (t_end / dt).ceil() as usize;
    (0..=n).map(|k| k as f64 * dt).collect()
}

/// Intra-resonator field on `times`, which must start at 0, be increasing
/// with steps at most `0.1/κ`, and extend to `Dt + 10/κ`.
pub fn cavity_response(pulse: &Pulse, params: &ResonatorParams, times: &[f64]) -> Result<CavityField> {
    let drive = CavityDrive::new(*pulse, params)?;
    let kappa = drive.kappa;
    if times.first() != Some(&0.0) {
        return Err(invalid("times", "grid must start at t = 0"));
    }
    for w in times.windows(2) {
        let h = w[1] - w[0];
        if !(h > 0.0) {
            return Err(invalid("times", "grid must be strictly increasing"));
        }
        if h > 0.1 / kappa * (1.0 + 1e-12) {
            return Err(invalid("times", format!("step {h:.3e} s exceeds 0.1/kappa = {:.3e} s", 0.1 / kappa)));
        }
    }
    let need = pulse.duration + 10.0 / kappa;
    if *times.last().unwrap() < need * (1.0 - 1e-12) {
        return Err(invalid("times", format!("grid must extend to Dt + 10/kappa = {need:.3e} s")));
    }
    let alpha = times.iter().map(|&t| drive.alpha(t)).collect();
    Ok(CavityField { drive, times: times.to_vec(), alpha })
}
