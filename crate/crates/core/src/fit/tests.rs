use super::*;
use crate::resonator::purcell_rate;
use approx::assert_relative_eq;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use std::f64::consts::PI;

fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

fn non_increasing(r: &FitResult) -> bool {
    r.cost_history.windows(2).all(|w| w[1] <= w[0])
}

fn skewed(x: &[f64], x0: f64, w0: f64, g: f64) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let w = w0 * (1.0 + g * ((v - x0) / w0).tanh());
            0.1 + 2.0 / (1.0 + ((v - x0) / w).powi(2))
        })
        .collect()
}

fn jitter(y: &[f64], sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, sigma).unwrap();
    y.iter().map(|v| v + n.sample(&mut rng)).collect()
}

#[test]
fn exponential_round_trip() {
    let t = grid(0.0, 0.2, 200);
    let y: Vec<f64> = t.iter().map(|t| (-t / 0.030f64).exp()).collect();
    let r = fit_exponential(&t, &y, None, Weighting::Uniform).unwrap();
    assert_relative_eq!(r.value("t1_eff"), 0.030, max_relative = 1e-3);
    assert!(r.converged && non_increasing(&r));
    // a window far into the tail must not disturb the amplitude reference
    let r = fit_exponential(&t, &y, Some((0.1, 0.2)), Weighting::Uniform).unwrap();
    assert_relative_eq!(r.value("t1_eff"), 0.030, max_relative = 1e-3);
    assert_relative_eq!(r.value("amplitude"), 1.0, max_relative = 1e-3);
}

#[test]
fn constant_trace_has_no_decay_time() {
    let t = grid(0.0, 1.0, 50);
    let y = vec![3.0; 50];
    assert!(matches!(fit_exponential(&t, &y, None, Weighting::Uniform), Err(Error::NonConvergence { .. })));
}

#[test]
fn exponential_needs_five_points() {
    let t = grid(0.0, 1.0, 50);
    let y: Vec<f64> = t.iter().map(|t| (-t).exp()).collect();
    assert!(matches!(fit_exponential(&t, &y, Some((0.0, 0.06)), Weighting::Uniform), Err(Error::InvalidParameter { .. })));
}

#[test]
fn rising_trace_warns() {
    let t = grid(0.0, 1.0, 50);
    let y: Vec<f64> = t.iter().map(|t| 1.0 - (-t / 0.2f64).exp()).collect();
    let r = fit_exponential(&t, &y, None, Weighting::Uniform).unwrap();
    assert_relative_eq!(r.value("t1_eff"), 0.2, max_relative = 1e-6);
    assert_eq!(r.warnings.len(), 1);
}

#[test]
fn lorentzian_width_in_frequency() {
    // a field sweep through a 117 GHz/T transition, 11 MHz half width
    let slope = 2.0 * PI * 117.3e9;
    let w_t = 2.0 * PI * 11e6 / slope;
    let x = grid(0.0595, 0.0599, 81);
    let y: Vec<f64> = x.iter().map(|b| 0.5 + 40.0 / (1.0 + ((b - 0.05967) / w_t).powi(2))).collect();
    let r = fit_lorentzian(&x, &y, Weighting::Poisson, Some(slope)).unwrap();
    assert_relative_eq!(r.value("width_frequency"), 11e6, max_relative = 0.01);
    assert!(non_increasing(&r));

    let w_t = 2.0 * PI * 1.4e6 / slope;
    let x = grid(0.0596, 0.0598, 21);
    let y: Vec<f64> = x.iter().map(|b| 40.0 / (1.0 + ((b - 0.05967) / w_t).powi(2))).collect();
    let r = fit_lorentzian(&x, &y, Weighting::Uniform, Some(slope)).unwrap();
    assert_relative_eq!(r.value("width_frequency"), 1.4e6, max_relative = 0.02);
}

#[test]
fn symmetric_data_gives_no_skew() {
    let x = grid(-5.0, 5.0, 101);
    let y = jitter(&skewed(&x, 0.2, 0.8, 0.0), 0.01, 4);
    let r = fit_skewed_lorentzian(&x, &y, Weighting::Uniform, None).unwrap();
    let s = r.get("skew").unwrap();
    assert!(s.value.abs() < 3.0 * s.error, "{s:?}");
    // residuals alternate in sign rather than forming one-sided lobes
    let l = fit_lorentzian(&x, &y, Weighting::Uniform, None).unwrap();
    let p: Vec<f64> = ["center", "width", "amplitude", "offset"].iter().map(|n| l.value(n)).collect();
    let res: Vec<f64> = x.iter().zip(&y).map(|(&v, &yv)| yv - (p[3] + p[2] / (1.0 + ((v - p[0]) / p[1]).powi(2)))).collect();
    let runs = 1 + res.windows(2).filter(|w| w[0].signum() != w[1].signum()).count();
    assert!(runs > 35, "{runs} sign runs in 101 residuals");
}

#[test]
fn skew_recovery_and_mirror() {
    let x = grid(-5.0, 5.0, 161);
    let y = skewed(&x, 0.3, 0.7, 0.35);
    let r = fit_skewed_lorentzian(&x, &y, Weighting::Uniform, None).unwrap();
    assert_relative_eq!(r.value("skew"), 0.35, max_relative = 1e-6);
    assert_relative_eq!(r.value("width"), 0.7, max_relative = 1e-6);
    assert!(non_increasing(&r));
    let xm: Vec<f64> = x.iter().rev().map(|v| -v).collect();
    let ym: Vec<f64> = y.iter().rev().copied().collect();
    let m = fit_skewed_lorentzian(&xm, &ym, Weighting::Uniform, None).unwrap();
    assert!(m.value("skew") < 0.0);
    assert_relative_eq!(m.value("skew").abs(), r.value("skew"), max_relative = 0.02);
    assert_relative_eq!(m.value("skew_width"), -0.35 * 0.7, max_relative = 1e-5);
}

#[test]
fn pinned_zero_skew_equals_lorentzian() {
    let x = grid(-4.0, 6.0, 91);
    let y = jitter(&skewed(&x, 1.0, 0.9, 0.2), 0.02, 9);
    let s = fit_skewed_lorentzian(&x, &y, Weighting::Uniform, Some(0.0)).unwrap();
    let l = fit_lorentzian(&x, &y, Weighting::Uniform, None).unwrap();
    for name in ["center", "width", "amplitude", "offset"] {
        assert!((s.value(name) - l.value(name)).abs() < 1e-8, "{name}: {} vs {}", s.value(name), l.value(name));
    }
}

#[test]
fn skew_zero_crossing_across_an_angle_sweep() {
    let phi0 = 0.4;
    let x = grid(-5.0, 5.0, 121);
    let phis = grid(-1.2, 1.8, 13);
    let skews: Vec<f64> = phis
        .iter()
        .map(|&phi| {
            let y = skewed(&x, 0.0, 0.8, 0.5 * (2.0 * (phi - phi0)).sin());
            fit_skewed_lorentzian(&x, &y, Weighting::Uniform, None).unwrap().value("skew")
        })
        .collect();
    let (a, phase, c) = fit_sine(&phis, &skews, 2.0).unwrap();
    // a sin(2φ + φ_s) + c vanishes at φ = (−φ_s)/2 on the rising branch
    assert_relative_eq!(a, 0.5, max_relative = 1e-6);
    assert!(c.abs() < 1e-8);
    assert_relative_eq!(-phase / 2.0, phi0, epsilon = 1e-6);
}

fn rabi_truth() -> RabiModelParams {
    RabiModelParams { amplitude: 5.0, omega_r: 2.0 * PI * 200e3, t_c1: 2e-6, background: 3.0, t_c2: 5e-6 }
}

#[test]
fn rabi_noiseless_round_trip() {
    let truth = rabi_truth();
    let t = grid(0.0, 12e-6, 241);
    let y: Vec<f64> = t.iter().map(|&v| truth.eval(v)).collect();
    let f = fit_rabi(&t, &y, Weighting::Uniform).unwrap();
    assert_relative_eq!(f.params.amplitude, 5.0, max_relative = 0.01);
    assert_relative_eq!(f.params.omega_r, truth.omega_r, max_relative = 0.01);
    assert_relative_eq!(f.params.t_c1, 2e-6, max_relative = 0.01);
    assert_relative_eq!(f.params.background, 3.0, max_relative = 0.01);
    assert_relative_eq!(f.params.t_c2, 5e-6, max_relative = 0.01);
    assert!(non_increasing(&f.fit));
}

#[test]
fn no_oscillation_is_its_own_error() {
    let truth = RabiModelParams { amplitude: 0.0, ..rabi_truth() };
    let t = grid(0.0, 12e-6, 241);
    let y: Vec<f64> = t.iter().map(|&v| truth.eval(v)).collect();
    assert!(matches!(fit_rabi(&t, &y, Weighting::Uniform), Err(Error::NoOscillation)));
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let noisy: Vec<f64> = y.iter().map(|v| Poisson::new(10.0 * v + 1.0).unwrap().sample(&mut rng)).collect();
    assert!(matches!(fit_rabi(&t, &noisy, Weighting::Poisson), Err(Error::NoOscillation)));
}

#[test]
fn rabi_with_counting_noise() {
    let truth = RabiModelParams { amplitude: 25.0, background: 10.0, t_c1: 6e-6, ..rabi_truth() };
    let t = grid(0.0, 15e-6, 151);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let y: Vec<f64> = t.iter().map(|&v| Poisson::new(truth.eval(v) + 1.0).unwrap().sample(&mut rng) - 1.0).collect();
    let f = fit_rabi(&t, &y, Weighting::Poisson).unwrap();
    assert_relative_eq!(f.params.omega_r, truth.omega_r, max_relative = 0.05);
}

#[test]
fn coupling_inversions() {
    let g0 = 2.0 * PI * 1e3;
    let n: f64 = 2.06e5;
    assert_relative_eq!(g0_from_rabi(2.0 * g0 * n.sqrt(), n).unwrap(), g0, max_relative = 1e-15);
    assert_relative_eq!(g0_from_rabi(2.0 * g0 * n.sqrt(), 4.0 * n).unwrap(), g0 / 2.0, max_relative = 1e-15);
    assert!(g0_from_rabi(1.0, 0.0).is_err());
    let g = g0_from_purcell(1.0 / 0.030, 1.45e6).unwrap() / (2.0 * PI);
    assert!((g - 553.0).abs() < 1.0, "{g}");
    let kappa = 1.45e6;
    assert_relative_eq!(g0_from_purcell(purcell_rate(g0, 0.0, kappa), kappa).unwrap(), g0, max_relative = 1e-14);
}
