//! Fluorescence decay of a broad Er ensemble after pulses of increasing
//! strength. Strongly coupled spins near the wire relax within
//! milliseconds, the bulk relaxes at the spin-lattice rate; fitting the
//! second half of the record recovers the latter.

use fdepr::bloch::Pulse;
use fdepr::fit::{fit_exponential, Weighting};
use fdepr::fluorescence::{log_times, simulate_curve, LineShape, SimulationConfig};
use fdepr::resonator::{g0_for_rate, CouplingDistribution, ResonatorParams};

fn main() -> fdepr::Result<()> {
    let p = ResonatorParams::setup1();
    let gamma_nr = 0.15;
    let glim = g0_for_rate(gamma_nr, p.kappa());
    let t_rep = 300.0;
    let mut cfg = SimulationConfig::new(
        CouplingDistribution::thin_wire(300.0 * glim, 0.01 * glim, 300.0 * glim, 60)?,
        LineShape::lorentzian(1.0),
        p,
    );
    cfg.gamma_nr = gamma_nr;
    cfg.t_rep = t_rep;
    let times = log_times(50e-6, t_rep, 300, false);

    println!("1/Gamma_NR = {:.2} s", 1.0 / gamma_nr);
    for eps in [1e3, 1e4, 1e5] {
        // cap the drive amplitude and lengthen the pulse instead
        let dt = (eps / 9.3f64).max(2000.0) * 1e-9;
        let curve = simulate_curve(&cfg, &Pulse::new(eps / (dt * 1e9), dt)?, &times)?;
        let early = fit_exponential(&curve.times, &curve.rate, Some((50e-6, 1e-2)), Weighting::Uniform)?;
        let late = fit_exponential(&curve.times, &curve.rate, Some((t_rep / 2.0, t_rep)), Weighting::Uniform)?;
        println!(
            "eps {eps:8.0e} ns^1/2: rate at 50 us {:.3e}/s, early T1 {:.3e} s, second-half T1 {:.2} s",
            curve.rate[0],
            early.value("t1_eff"),
            late.value("t1_eff")
        );
    }
    Ok(())
}
