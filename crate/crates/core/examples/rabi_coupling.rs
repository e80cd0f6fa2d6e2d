//! Coupling strength inferred two ways, from the Rabi frequency and from
//! the Purcell-enhanced decay, for one resonant spin and for spins spread
//! across the cavity linewidth.

use fdepr::recipe::{run_rabi, ExperimentRecipe};

fn main() -> fdepr::Result<()> {
    let text = include_str!("../recipes/rabi.toml");
    for detunings in [1, 21] {
        let recipe = ExperimentRecipe::from_toml_str(&text.replace("detunings = 21", &format!("detunings = {detunings}")))?;
        let run = run_rabi(&recipe)?;
        println!(
            "{detunings:2} detuning(s): g0 {:.1} Hz, from Rabi {:.1} Hz, from Purcell {:.1} Hz, ratio {:.3}",
            run.g0 / (2.0 * std::f64::consts::PI),
            run.g0_rabi / (2.0 * std::f64::consts::PI),
            run.g0_purcell / (2.0 * std::f64::consts::PI),
            run.g0_rabi / run.g0_purcell
        );
    }
    Ok(())
}
