//! Click statistics of a small ensemble seen through a photon counter with
//! dark counts, compared with the closed-form noise model, and the
//! expected advantage over echo detection.

use fdepr::counter::{count_statistics, fd_snr, sample_toy_ensemble, snr_ratio, CounterConfig, ToyEnsemble};
use fdepr::resonator::ResonatorParams;

fn main() -> fdepr::Result<()> {
    let dark = 100.0;
    let t_int = 0.2;
    let mut counter = CounterConfig::new(dark, t_int + 1e-3);
    counter.dead_time = 0.0;
    // the closed form counts dark clicks over 1/Γ1 only; the last column
    // charges them over the whole window instead
    println!("   N   mean(C)   std(C)  model std  window std   SNR(MC)  SNR(formula)");
    for n in [10, 100, 1000] {
        let ens = ToyEnsemble { n_spins: n, excitation: 1.0, gamma_r: 20.0, gamma1: 20.0, eta: 0.15 };
        let streams = sample_toy_ensemble(&ens, &counter, 5000, 3)?;
        let h = count_statistics(&streams, &counter, t_int)?;
        let model = (dark / ens.gamma1 + ens.eta * (1.0 - ens.eta) * n as f64).sqrt();
        let windowed = (dark * t_int + ens.eta * (1.0 - ens.eta) * n as f64).sqrt();
        let snr = (h.mean - dark * t_int) / h.std;
        println!(
            "{n:4} {:9.2} {:8.2} {model:10.2} {windowed:11.2} {snr:9.2} {:13.2}",
            h.mean,
            h.std,
            fd_snr(n as f64, ens.gamma_r, dark, ens.eta)?
        );
    }
    let p = ResonatorParams::setup1();
    println!("\nfluorescence/echo SNR ratio sqrt(eta kappa / 2 alpha) = {:.2}", snr_ratio(0.15, p.kappa(), 2e3)?);
    Ok(())
}
