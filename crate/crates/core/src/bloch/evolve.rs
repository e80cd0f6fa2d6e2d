use nalgebra::{Matrix4, Vector3, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::cavity::CavityDrive;
use crate::error::{check, Error, Result};
use crate::resonator::purcell_rate;

/// Spins sharing one coupling constant and one detuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinPacket {
    /// rad/s
    pub g0: f64,
    /// `ω0 − ωs`, rad/s.
    pub delta: f64,
    /// `(Sx, Sy, Sz)`, length at most 1/2.
    pub s: [f64; 3],
    pub gamma_r: f64,
    pub gamma_nr: f64,
    /// Number of spins represented.
    pub weight: f64,
}

impl SpinPacket {
    /// Packet in its ground state with the Purcell rate set by the resonator.
    pub fn new(g0: f64, delta: f64, kappa: f64, gamma_nr: f64, weight: f64) -> Self {
        SpinPacket { g0, delta, s: [0.0, 0.0, -0.5], gamma_r: purcell_rate(g0, delta, kappa), gamma_nr, weight }
    }

    pub fn with_sz(mut self, sz: f64) -> Self {
        self.s = [0.0, 0.0, sz];
        self
    }

    pub fn gamma1(&self) -> f64 {
        self.gamma_r + self.gamma_nr
    }

    /// Probability of the upper state, `Sz + 1/2`.
    pub fn excitation(&self) -> f64 {
        self.s[2] + 0.5
    }

    pub fn norm(&self) -> f64 {
        Vector3::from(self.s).norm()
    }

    fn validate(&self) -> Result<()> {
        check("g0", self.g0, self.g0 >= 0.0, "must be >= 0")?;
        check("delta", self.delta, true, "")?;
        check("gamma_r", self.gamma_r, self.gamma_r >= 0.0, "must be >= 0")?;
        check("gamma_nr", self.gamma_nr, self.gamma_nr >= 0.0, "must be >= 0")?;
        check("weight", self.weight, self.weight >= 0.0, "must be >= 0")?;
        if self.norm() > 0.5 + 1e-9 || self.s.iter().any(|x| !x.is_finite()) {
            return Err(self.failure("initial Bloch vector longer than 1/2"));
        }
        Ok(())
    }

    fn failure(&self, reason: &str) -> Error {
        Error::Integration { g0: self.g0, delta: self.delta, reason: reason.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Exact rotation about the mid-step field with exact relaxation half
    /// steps on either side.
    Split,
    /// Classical fourth-order Runge-Kutta.
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub integrator: Integrator,
    /// Step limit in units of `1/κ`.
    pub step_kappa: f64,
    /// Minimum number of steps across the pulse.
    pub steps_per_pulse: usize,
    /// Largest rotation angle per step, radians.
    pub max_rotation: f64,
    /// Ringdown followed after the pulse, in units of `1/κ`.
    pub ringdown_kappa: f64,
    /// Propagate the flat top of long pulses in one matrix exponential.
    pub plateau_fast_path: bool,
    /// Extra pure dephasing rate, 1/s. Zero leaves only the `Γ1/2` decay.
    pub dephasing: f64,
    /// Packets whose response stays linear to within this bound are
    /// propagated in closed form. Zero always integrates numerically.
    #[serde(default)]
    pub linear_tolerance: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            integrator: Integrator::Split,
            step_kappa: 0.05,
            steps_per_pulse: 1000,
            max_rotation: 0.1,
            ringdown_kappa: 40.0,
            plateau_fast_path: true,
            dephasing: 0.0,
            linear_tolerance: 1e-3,
        }
    }
}

/// Rotation vector of the Bloch equations `dS/dt = Ω × S` in the carrier frame.
fn omega(packet: &SpinPacket, alpha: Complex64, carrier_detuning: f64) -> Vector3<f64> {
    let two_g = 2.0 * packet.g0;
    Vector3::new(two_g * alpha.re, -two_g * alpha.im, -packet.delta - carrier_detuning)
}

fn rotate(s: Vector3<f64>, w: &Vector3<f64>, h: f64) -> Vector3<f64> {
    let norm = w.norm();
    let theta = norm * h;
    if theta == 0.0 {
        return s;
    }
    let k = w / norm;
    let (sin, cos) = theta.sin_cos();
    s * cos + k.cross(&s) * sin + k * (k.dot(&s) * (1.0 - cos))
}

fn relax(s: Vector3<f64>, g1: f64, g2: f64, h: f64) -> Vector3<f64> {
    let e2 = (-g2 * h).exp();
    Vector3::new(s.x * e2, s.y * e2, -0.5 + (s.z + 0.5) * (-g1 * h).exp())
}

fn derivative(s: &Vector3<f64>, w: &Vector3<f64>, g1: f64, g2: f64) -> Vector3<f64> {
    let mut d = w.cross(s);
    d.x -= g2 * s.x;
    d.y -= g2 * s.y;
    d.z -= g1 * (s.z + 0.5);
    d
}

struct Rates {
    g1: f64,
    g2: f64,
}

/// Steps from `t0` to `t1`. The step is `h_max`, shortened wherever the
/// field would rotate the spin by more than `opts.max_rotation` per step.
fn step_through(
    mut s: Vector3<f64>,
    packet: &SpinPacket,
    drive: &CavityDrive,
    rates: &Rates,
    (t0, t1): (f64, f64),
    h_max: f64,
    opts: &EvolveOptions,
) -> Vector3<f64> {
    let det = drive.pulse.carrier_detuning;
    let mut t = t0;
    while t < t1 {
        let w_a = omega(packet, drive.alpha(t), det).norm();
        let w_b = omega(packet, drive.alpha((t + h_max).min(t1)), det).norm();
        let mut h = h_max.min(opts.max_rotation / w_a.max(w_b).max(f64::MIN_POSITIVE));
        if t + h >= t1 || t1 - (t + h) < 1e-3 * h {
            h = t1 - t;
        }
        match opts.integrator {
            Integrator::Split => {
                let w = omega(packet, drive.alpha(t + 0.5 * h), det);
                s = relax(s, rates.g1, rates.g2, 0.5 * h);
                s = rotate(s, &w, h);
                s = relax(s, rates.g1, rates.g2, 0.5 * h);
            }
            Integrator::Rk4 => {
                let w0 = omega(packet, drive.alpha(t), det);
                let wm = omega(packet, drive.alpha(t + 0.5 * h), det);
                let w1 = omega(packet, drive.alpha(t + h), det);
                let k1 = derivative(&s, &w0, rates.g1, rates.g2);
                let k2 = derivative(&(s + k1 * (0.5 * h)), &wm, rates.g1, rates.g2);
                let k3 = derivative(&(s + k2 * (0.5 * h)), &wm, rates.g1, rates.g2);
                let k4 = derivative(&(s + k3 * h), &w1, rates.g1, rates.g2);
                s += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            }
        }
        t += h;
    }
    s
}

/// Exact propagation under a constant rotation vector `w` with relaxation,
/// through the matrix exponential of the affine Bloch generator.
pub fn evolve_constant(packet: &SpinPacket, w: &Vector3<f64>, duration: f64, dephasing: f64) -> SpinPacket {
    let g1 = packet.gamma1();
    let g2 = 0.5 * g1 + dephasing;
    #[rustfmt::skip]
    let m = Matrix4::new(
        -g2,   -w.z,  w.y,  0.0,
         w.z,  -g2,  -w.x,  0.0,
        -w.y,   w.x, -g1,  -0.5 * g1,
         0.0,   0.0,  0.0,  0.0,
    ) * duration;
    let v = m.exp() * Vector4::new(packet.s[0], packet.s[1], packet.s[2], 1.0);
    SpinPacket { s: [v.x, v.y, v.z], ..*packet }
}

/// First-order response of a packet starting on the z axis, or `None`
/// when the drive is too strong for it.
///
/// The transverse part is `S+(T) = −i ∫ Ω+(t) Sz(t) e^(−(iD+Γ2)(T−t)) dt`
/// with `Sz(t)` the undriven relaxation. Higher orders are bounded by the
/// drive area or, for far-detuned packets, by the light-shift phase
/// `∫|Ω+|²/2|D| dt`, both estimated from `|α| ≤ 2|α_ss|`. The population
/// change is `|S+|²/2|Sz0|` to leading order, exact to second order when the spin starts in
/// the ground state and dephases only through `Γ1`.
fn linear_response(packet: &SpinPacket, drive: &CavityDrive, t_end: f64, rates: &Rates, tol: f64) -> Option<Vector3<f64>> {
    let d = packet.delta + drive.pulse.carrier_detuning;
    let w_max = 2.0 * packet.g0 * 2.0 * drive.steady_state().norm();
    let dt = drive.pulse.duration;
    let area = w_max * (dt + 2.0 / drive.kappa);
    let light_shift = w_max * w_max * (dt + 1.0 / drive.kappa) / (2.0 * d.abs());
    let far = d.abs() >= 10.0 * w_max && light_shift <= tol;
    if !(area <= tol || far) {
        return None;
    }
    let sz0 = packet.s[2];
    let ground = sz0 == -0.5 && rates.g2 == 0.5 * rates.g1;
    if rates.g2 * t_end > 30.0 || (!ground && 2.0 * rates.g2 * t_end > 1e-2) || sz0 == 0.0 {
        return None;
    }
    // Ω+ = 2 g0 α*, so ∫Ω+ e^(νt) dt = 2 g0 conj(∫α e^(−ν* t) dt)
    let kernel = |nu: Complex64| 2.0 * packet.g0 * drive.alpha_transform(-nu.conj(), t_end).conj();
    let nu = Complex64::new(rates.g2, d);
    let mut acc = -0.5 * kernel(nu);
    if sz0 != -0.5 {
        acc += (sz0 + 0.5) * kernel(nu - rates.g1);
    }
    let s_plus = Complex64::new(0.0, -1.0) * (-nu * t_end).exp() * acc;
    if s_plus.norm() > tol.sqrt() * sz0.abs() {
        return None;
    }
    // |Sz0| − √(Sz0² − |S+|²) keeps the vector length of a pure rotation
    let lift = sz0.abs() - (sz0 * sz0 - s_plus.norm_sqr()).sqrt();
    let sz = -0.5 + (sz0 + 0.5) * (-rates.g1 * t_end).exp() + lift;
    Some(Vector3::new(s_plus.re, s_plus.im, sz))
}

/// Bloch evolution of `packet` under the cavity field through the pulse and
/// its ringdown. The Rabi rate is `2 g0 |α(t)|`; relaxation drives `Sz`
/// towards −1/2 at `Γ1` and the transverse components decay at `Γ1/2`.
pub fn evolve_packet(packet: &SpinPacket, drive: &CavityDrive, opts: &EvolveOptions) -> Result<SpinPacket> {
    packet.validate()?;
    let kappa = drive.kappa;
    let dt = drive.pulse.duration;
    let rates = Rates { g1: packet.gamma1(), g2: 0.5 * packet.gamma1() + opts.dephasing };
    let h = (opts.step_kappa / kappa).min(dt / opts.steps_per_pulse.max(1) as f64);
    let t_end = dt + opts.ringdown_kappa / kappa;
    let mut s = Vector3::from(packet.s);

    let on_axis = s.x == 0.0 && s.y == 0.0;
    let linear = if opts.linear_tolerance > 0.0 && on_axis {
        linear_response(packet, drive, t_end, &rates, opts.linear_tolerance)
    } else {
        None
    };
    let settle = drive.settle_time(1e-10);
    if let Some(v) = linear {
        s = v;
    } else if opts.plateau_fast_path && dt > settle + 10.0 * h {
        s = step_through(s, packet, drive, &rates, (0.0, settle), h, opts);
        let w = omega(packet, drive.steady_state(), drive.pulse.carrier_detuning);
        let mid = SpinPacket { s: s.into(), ..*packet };
        s = Vector3::from(evolve_constant(&mid, &w, dt - settle, opts.dephasing).s);
        s = step_through(s, packet, drive, &rates, (dt, t_end), h, opts);
    } else {
        s = step_through(s, packet, drive, &rates, (0.0, t_end), h, opts);
    }

    let out = SpinPacket { s: s.into(), ..*packet };
    if out.s.iter().any(|x| !x.is_finite()) {
        return Err(packet.failure("non-finite Bloch vector"));
    }
    if out.norm() > 0.5 + 1e-9 {
        return Err(packet.failure(&format!("Bloch vector grew to {}", out.norm())));
    }
    Ok(out)
}
