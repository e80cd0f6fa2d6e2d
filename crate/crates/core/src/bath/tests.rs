use super::*;
use approx::assert_relative_eq;
use num_complex::Complex64;
use std::f64::consts::PI;

const GAMMA_ER: f64 = 117.3e9;

fn times(t_max: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| t_max * k as f64 / n as f64).collect()
}

fn site(a: f64, b: f64) -> NuclearSite {
    NuclearSite { position: [1e-9, 0.0, 0.0], a, b }
}

/// Schrödinger equation stepped with RK4 on the complex state vector,
/// independently of the spectral propagator.
fn rk4_p_up(sites: &[NuclearSite], omega: f64, delta: f64, t_end: f64, steps: usize) -> f64 {
    let h = hamiltonian(sites, omega, delta);
    let dim = h.nrows();
    let nn = dim / 2;
    let dt = t_end / steps as f64;
    let deriv = |psi: &[Complex64]| -> Vec<Complex64> {
        (0..dim).map(|i| -Complex64::i() * (0..dim).map(|j| psi[j] * h[(i, j)]).sum::<Complex64>()).collect()
    };
    let mut total = 0.0;
    for m in 0..nn {
        let mut psi = vec![Complex64::new(0.0, 0.0); dim];
        psi[nn + m] = Complex64::new(1.0, 0.0);
        for _ in 0..steps {
            let k1 = deriv(&psi);
            let y2: Vec<_> = psi.iter().zip(&k1).map(|(p, k)| p + k * (dt / 2.0)).collect();
            let k2 = deriv(&y2);
            let y3: Vec<_> = psi.iter().zip(&k2).map(|(p, k)| p + k * (dt / 2.0)).collect();
            let k3 = deriv(&y3);
            let y4: Vec<_> = psi.iter().zip(&k3).map(|(p, k)| p + k * dt).collect();
            let k4 = deriv(&y4);
            for i in 0..dim {
                psi[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0);
            }
        }
        total += psi[..nn].iter().map(|c| c.norm_sqr()).sum::<f64>();
    }
    total / nn as f64
}

#[test]
fn dipolar_scaling_and_magic_angle() {
    let (a1, b1) = dipolar_constants([1e-10, 2e-10, 3e-10], GAMMA_ER, 1.8e6, [1.0, 0.0, 0.0]).unwrap();
    let (a2, b2) = dipolar_constants([2e-10, 4e-10, 6e-10], GAMMA_ER, 1.8e6, [1.0, 0.0, 0.0]).unwrap();
    assert_relative_eq!(a1 / a2, 8.0, max_relative = 1e-12);
    assert_relative_eq!(b1 / b2, 8.0, max_relative = 1e-12);
    let magic = (1.0f64 / 3.0).sqrt().acos();
    let (a, b) = dipolar_constants([magic.cos() * 4e-10, magic.sin() * 4e-10, 0.0], GAMMA_ER, 1.8e6, [1.0, 0.0, 0.0]).unwrap();
    assert!(a.abs() < 1e-9 * b.abs());
    assert!(dipolar_constants([0.0; 3], GAMMA_ER, 1.8e6, [1.0, 0.0, 0.0]).is_err());
}

#[test]
fn dipolar_prefactor() {
    // μ0/4π · ħ γe γW / r³ along the field: A = −2d, B = 0
    let r: f64 = 3.87e-10;
    let d = 1e-7 * 1.054_571_817e-34 * (2.0 * PI * GAMMA_ER) * (2.0 * PI * 1.8e6) / r.powi(3);
    let (a, b) = dipolar_constants([r, 0.0, 0.0], GAMMA_ER, 1.8e6, [1.0, 0.0, 0.0]).unwrap();
    assert_relative_eq!(a, -2.0 * d, max_relative = 1e-8);
    assert_eq!(b, 0.0);
    assert_relative_eq!(d / (2.0 * PI), 240e3, max_relative = 0.02);
}

#[test]
fn nearest_shell_geometry() {
    let l = Lattice::builtin();
    let w = l.tungsten_around_calcium(2);
    // four W in the same ab plane at a/√2, four more at √((a/2)² + (c/4)²)
    let d0 = l.a_angstrom / 2f64.sqrt() * 1e-10;
    let d1 = ((l.a_angstrom / 2.0).powi(2) + (l.c_angstrom / 4.0).powi(2)).sqrt() * 1e-10;
    for r in &w[..4] {
        assert_relative_eq!(r.norm(), d0, max_relative = 1e-12);
        assert!(r.z.abs() < 1e-20);
    }
    for r in &w[4..8] {
        assert_relative_eq!(r.norm(), d1, max_relative = 1e-12);
    }
    assert_relative_eq!(d0, 3.707e-10, max_relative = 1e-3);
    assert_relative_eq!(d1, 3.867e-10, max_relative = 1e-3);
    assert!(w[8].norm() > d1 * 1.05);
    let sites = tungsten_sites(&l, &BathConfig::default(), GAMMA_ER, [1.0, 0.0, 0.0]).unwrap();
    assert_eq!(sites.len(), 15);
    let strongest = sites.iter().map(|s| s.a.hypot(s.b)).fold(0.0, f64::max) / (2.0 * PI);
    assert!((1e3..1e6).contains(&strongest), "{strongest} Hz");
}

#[test]
fn configuration_count_and_mass() {
    let (c, mass) = enumerate_configs(&BathConfig::default()).unwrap();
    assert_eq!(c.len(), 576);
    assert_relative_eq!(mass, 0.8524, epsilon = 1e-4);
    assert_relative_eq!(c.iter().map(|x| x.weight).sum::<f64>(), 1.0, epsilon = 1e-12);
    let (c, mass) = enumerate_configs(&BathConfig { max_occupied: 0, ..BathConfig::default() }).unwrap();
    assert_eq!(c.len(), 1);
    assert!(c[0].occupied.is_empty());
    assert_eq!(c[0].weight, 1.0);
    assert!(mass < 1.0);
    assert!(enumerate_configs(&BathConfig { max_occupied: 4, ..BathConfig::default() }).is_err());
}

#[test]
fn bare_spin_is_undamped() {
    let om = 2.0 * PI * 200e3;
    let t = times(20e-6, 400);
    let p = simulate_driven_spin(&[], om, 0.0, &t).unwrap();
    for (ti, pi) in t.iter().zip(p) {
        assert!((pi - (om * ti / 2.0).sin().powi(2)).abs() < 1e-12);
    }
}

#[test]
fn pure_ising_coupling_splits_into_two_level_branches() {
    let om = 2.0 * PI * 300e3;
    let delta = 2.0 * PI * 40e3;
    let sites = [site(2.0 * PI * 70e3, 0.0), site(-2.0 * PI * 25e3, 0.0)];
    let t = times(15e-6, 300);
    let p = simulate_driven_spin(&sites, om, delta, &t).unwrap();
    for (ti, pi) in t.iter().zip(p) {
        let mut expect = 0.0;
        for m in 0..4 {
            let shift: f64 = sites.iter().enumerate().map(|(i, s)| s.a * if m >> i & 1 == 0 { 0.5 } else { -0.5 }).sum();
            let d = delta + shift;
            let w = om.hypot(d);
            expect += om * om / (w * w) * (w * ti / 2.0).sin().powi(2) / 4.0;
        }
        assert!((pi - expect).abs() < 1e-11);
    }
}

/// `h_i·I_i` commutes with the Hamiltonian, so each nucleus only shifts
/// the detuning by `±|h_i|/2`, whatever the split between A and B.
fn branch_oracle(sites: &[NuclearSite], om: f64, delta: f64, t: f64) -> f64 {
    let n = 1 << sites.len();
    (0..n)
        .map(|m| {
            let shift: f64 = sites.iter().enumerate().map(|(i, s)| s.a.hypot(s.b) * if m >> i & 1 == 0 { 0.5 } else { -0.5 }).sum();
            let d = delta + shift;
            let w = om.hypot(d);
            om * om / (w * w) * (w * t / 2.0).sin().powi(2)
        })
        .sum::<f64>()
        / n as f64
}

#[test]
fn transverse_coupling_matches_conserved_branch_oracle() {
    let sites = [site(2.0 * PI * 90e3, 2.0 * PI * 60e3), site(2.0 * PI * 30e3, -2.0 * PI * 80e3), site(-2.0 * PI * 10e3, 2.0 * PI * 5e3)];
    let (om, delta) = (2.0 * PI * 200e3, 2.0 * PI * 30e3);
    let t = times(20e-6, 200);
    let p = simulate_driven_spin(&sites, om, delta, &t).unwrap();
    for (ti, pi) in t.iter().zip(p) {
        assert!((pi - branch_oracle(&sites, om, delta, *ti)).abs() < 1e-10);
    }
}

#[test]
fn one_nucleus_beats_only_off_resonance() {
    let om = 2.0 * PI * 500e3;
    let s = [site(2.0 * PI * 50e3, 2.0 * PI * 50e3)];
    let t = times(10e-6, 2000);
    let period = 2.0 * PI / om;
    // on resonance both branches share |detuning| and nothing beats
    let p = simulate_driven_spin(&s, om, 0.0, &t).unwrap();
    let env = period_contrast(&t, &p, period);
    assert!(env.iter().all(|&c| c > 0.99), "{env:?}");
    let delta = 2.0 * PI * 300e3;
    let p = simulate_driven_spin(&s, om, delta, &t).unwrap();
    let env = period_contrast(&t, &p, period);
    let min = env.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(min < 0.9 * env[0], "{env:?}");
    for &k in &[137usize, 1000, 2000] {
        assert_relative_eq!(p[k], rk4_p_up(&s, om, delta, t[k], 20_000), epsilon = 1e-8);
    }
}

#[test]
fn evolution_is_unitary() {
    let sites = [site(2.0 * PI * 90e3, 2.0 * PI * 60e3), site(2.0 * PI * 30e3, -2.0 * PI * 80e3), site(-2.0 * PI * 10e3, 2.0 * PI * 5e3)];
    let drift = unitarity_drift(&sites, 2.0 * PI * 200e3, 2.0 * PI * 100e3, &times(20e-6, 40)).unwrap();
    assert!(drift < 1e-10, "{drift}");
    assert!(simulate_driven_spin(&[sites[0]; 4], 1.0, 0.0, &[0.0]).is_err());
}

#[test]
fn no_hyperfine_leaves_only_detuning_average() {
    let cfg = BathConfig::default();
    let sites = vec![site(0.0, 0.0); 15];
    let om = 2.0 * PI * 200e3;
    let det = detunings_within_linewidth(1.45e6, 5);
    let t = times(10e-6, 100);
    let avg = bath_averaged_rabi(&cfg, &sites, om, &det, &t).unwrap();
    for (k, &ti) in t.iter().enumerate() {
        let expect: f64 = det.iter().map(|&(d, w)| w * om * om / (om * om + d * d) * ((om * om + d * d).sqrt() * ti / 2.0).sin().powi(2)).sum();
        assert!((avg[k] - expect).abs() < 1e-10);
    }
}

#[test]
fn relabeling_identical_sites_changes_nothing() {
    let cfg = BathConfig { n_sites: 6, ..BathConfig::default() };
    let mut sites: Vec<NuclearSite> = (0..6).map(|i| site(2.0 * PI * 1e4 * (i % 3 + 1) as f64, 2.0 * PI * 2e4)).collect();
    let t = times(10e-6, 50);
    let om = 2.0 * PI * 200e3;
    let a = bath_averaged_rabi(&cfg, &sites, om, &[(0.0, 1.0)], &t).unwrap();
    sites.reverse();
    let b = bath_averaged_rabi(&cfg, &sites, om, &[(0.0, 1.0)], &t).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn more_tungsten_damps_faster() {
    let l = Lattice::builtin();
    let om = 2.0 * PI * 200e3;
    let period = 2.0 * PI / om;
    let t = times(10.0 * period, 1000);
    let late = |p: f64| {
        let cfg = BathConfig { abundance: p, ..BathConfig::default() };
        let sites = tungsten_sites(&l, &cfg, GAMMA_ER, [1.0, 0.0, 0.0]).unwrap();
        let avg = bath_averaged_rabi(&cfg, &sites, om, &[(0.0, 1.0)], &t).unwrap();
        let env = period_contrast(&t, &avg, period);
        env[env.len() - 3..].iter().sum::<f64>() / 3.0
    };
    let (c1, c2, c3) = (late(0.05), late(0.14), late(0.3));
    assert!(c1 > c2 && c2 > c3, "{c1} {c2} {c3}");
}
