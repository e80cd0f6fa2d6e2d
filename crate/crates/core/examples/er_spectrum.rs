//! Field-swept fluorescence spectrum of the Er line from the bundled recipe,
//! with raw and background-subtracted counts per sequence.

use fdepr::recipe::{run_spectrum, ExperimentRecipe};

fn main() -> fdepr::Result<()> {
    let recipe = ExperimentRecipe::from_toml_str(include_str!("../recipes/er_spectrum.toml"))?;
    let spectrum = run_spectrum(&recipe)?;
    for (name, b) in &spectrum.lines {
        println!("{name} line at {b:.3} mT");
    }
    let peak = spectrum.rows.iter().map(|r| r.c_spin).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    println!("\n  B (mT)     C_raw     C_spin");
    for r in &spectrum.rows {
        let bar = "#".repeat((40.0 * r.c_spin / peak).round().max(0.0) as usize);
        println!("{:8.3} {:9.3} {:10.4}  {bar}", r.b_mt, r.c_raw, r.c_spin);
    }
    Ok(())
}
