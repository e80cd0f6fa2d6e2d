//! Resonance fields of the S4-site rare-earth species at the resonator
//! frequency, plus the quasi-isotropic Fe3+ doublet at X band.

use fdepr::species::{rotation_pattern, transition_fields, RotationSubject, SearchOptions, SpeciesRegistry};

fn main() -> fdepr::Result<()> {
    let reg = SpeciesRegistry::builtin();
    let nu0 = 6.999e9;
    let opts = SearchOptions { min_matrix_element: 1e-3, ..Default::default() };

    println!("species   B_res (mT)  levels   |<l|S|u>|");
    for sp in reg.species() {
        for t in transition_fields(sp, nu0, (37.0, 0.0), (0.04, 0.14), &opts)? {
            println!("{:<8} {:>10.3}   {:>2}->{:<2}   {:.3}", sp.name, t.b_res * 1e3, t.lower, t.upper, t.matrix_element);
        }
    }

    let middle = reg.doublet_named("Fe-middle").expect("bundled table has the g = 4.3 doublet");
    let phis: Vec<f64> = (0..=36).map(|k| k as f64 * 5.0).collect();
    let rows = rotation_pattern(RotationSubject::Doublet(middle), 9.62e9, &phis, 0.0, (0.12, 0.2), &opts)?;
    let (lo, hi) = rows.iter().fold((f64::MAX, f64::MIN), |(a, b), r| (a.min(r.b_res_mt), b.max(r.b_res_mt)));
    println!("\nFe g=4.3 doublet at 9.62 GHz: {} (angle, site) points, {:.3} .. {:.3} mT (excursion {:.3} mT)", rows.len(), lo, hi, hi - lo);
    Ok(())
}
