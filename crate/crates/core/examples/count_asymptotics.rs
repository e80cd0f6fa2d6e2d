//! Spin counts versus pulse strength for a thin-wire ensemble: the full
//! packet simulation against the closed-form low- and high-drive limits.

use fdepr::bloch::{rabi_angle, Pulse};
use fdepr::fluorescence::{asymptotic_counts, ensemble_response, AsymptoticModel, LineShape, SimulationConfig};
use fdepr::resonator::{g0_for_rate, CouplingDistribution, ResonatorParams};

fn main() -> fdepr::Result<()> {
    let p = ResonatorParams::setup1();
    let glim = g0_for_rate(0.15, p.kappa());
    let (gmin, gmax, gbar) = (1e-5 * glim, 300.0 * glim, 1e3 * glim);
    let mut cfg = SimulationConfig::new(CouplingDistribution::thin_wire(gbar, gmin, gmax, 60)?, LineShape::gaussian(1.0), p);
    cfg.t_rep = f64::MAX;
    let model = AsymptoticModel::new(gbar, gmin, gmax, &p, 0.15, 0.15);
    let per_eps = rabi_angle(1.0, glim, p.kappa_c, p.kappa())?;

    println!("   psi_lim        eps   simulated    analytic   ratio");
    for psi_lim in [1e-4, 3e-4, 1e-3, 1.0, 10.0, 40.0, 100.0, 400.0] {
        let eps = psi_lim / per_eps;
        let dt = if psi_lim < 1.0 { 1e-6 } else { 1e-3 };
        let pulse = Pulse::from_strength(eps, eps / (dt * 1e9))?;
        let emissions = ensemble_response(&cfg, &pulse)?;
        let sim = cfg.eta * emissions.iter().map(|e| e.photons(0.0, f64::INFINITY)).sum::<f64>();
        let analytic = asymptotic_counts(eps, &model)?.total();
        println!("{psi_lim:10.1e} {eps:10.3e} {sim:11.4e} {analytic:11.4e} {:7.3}", sim / analytic);
    }
    Ok(())
}
