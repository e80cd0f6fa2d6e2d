//! Rabi oscillations of a resonant spin coupled to its nearest 183W
//! nuclei: single bath configurations keep recurring, the abundance
//! weighted average damps out.

use std::f64::consts::PI;

use fdepr::bath::{bath_averaged_rabi, enumerate_configs, period_contrast, simulate_driven_spin, tungsten_sites, BathConfig, Lattice};
use fdepr::species::field_direction;

fn main() -> fdepr::Result<()> {
    let cfg = BathConfig::default();
    let (configs, mass) = enumerate_configs(&cfg)?;
    println!("{} configurations with at most {} nuclei, {:.1}% of the probability", configs.len(), cfg.max_occupied, mass * 100.0);

    let dir = field_direction(0.0, 0.0);
    let sites = tungsten_sites(&Lattice::builtin(), &cfg, 117.3e9, [dir.x, dir.y, dir.z])?;
    for s in sites.iter().take(4) {
        let r = (s.position[0].powi(2) + s.position[1].powi(2) + s.position[2].powi(2)).sqrt();
        println!("W at {:.2} A: A/2pi {:8.1} Hz, B/2pi {:8.1} Hz", r * 1e10, s.a / (2.0 * PI), s.b / (2.0 * PI));
    }

    let omega = 2.0 * PI * 200e3;
    let period = 2.0 * PI / omega;
    let times: Vec<f64> = (0..=40 * 16).map(|k| period * k as f64 / 16.0).collect();
    let avg = period_contrast(&times, &bath_averaged_rabi(&cfg, &sites, omega, &[(0.0, 1.0)], &times)?, period);
    let strongest = configs.iter().find(|c| c.occupied == [0]).expect("single-nucleus configuration");
    let one: Vec<_> = strongest.occupied.iter().map(|&k| sites[k]).collect();
    let single = period_contrast(&times, &simulate_driven_spin(&one, omega, 0.0, &times)?, period);

    println!("\nperiod  averaged  nearest nucleus only");
    for k in (0..avg.len()).step_by(4) {
        println!("{:6} {:9.3} {:9.3}", k + 1, avg[k], single[k]);
    }
    Ok(())
}
