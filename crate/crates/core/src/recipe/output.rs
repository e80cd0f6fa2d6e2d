use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::constants::TWO_PI;
use crate::counter::write_histogram_csv;
use crate::error::{Error, Result};
use crate::fit::FitResult;
use crate::resonator::ResonatorParams;
use crate::species::write_rotation_csv;

use super::run::*;
use super::{ExperimentRecipe, RecipeKind};

/// Everything needed to reproduce a run, written next to its CSV files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: RecipeKind,
    pub seed: Option<u64>,
    pub version: String,
    pub wall_time_s: f64,
    pub recipe: ExperimentRecipe,
    pub resonator: ResonatorParams,
    pub outputs: Vec<PathBuf>,
    pub results: serde_json::Value,
}

/// Process exit status for a failed run: 2 for configuration and input
/// problems, 3 for numerical failures.
pub fn exit_code(err: &Error) -> i32 {
    match err.root() {
        Error::Config(_) | Error::InvalidParameter { .. } | Error::Format(_) | Error::Io(_) => 2,
        _ => 3,
    }
}

struct Outputs {
    dir: PathBuf,
    stem: String,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn create(&mut self, suffix: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(format!("{}{suffix}", self.stem));
        let f = File::create(&path).map_err(|e| Error::Io(e).context(path.display().to_string()))?;
        self.written.push(path);
        Ok(BufWriter::new(f))
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Runs `recipe`, writes its CSV tables and manifest into the output
/// directory, and returns the manifest.
pub fn execute(recipe: &ExperimentRecipe) -> Result<Manifest> {
    recipe.validate()?;
    let start = Instant::now();
    let resonator = recipe.resonator_params()?;
    std::fs::create_dir_all(&recipe.output.dir)?;
    let mut out = Outputs { dir: recipe.output.dir.clone(), stem: recipe.file_stem(), written: Vec::new() };

    let results = match recipe.kind {
        RecipeKind::Spectrum => {
            let s = run_spectrum(recipe)?;
            let mut w = out.create(".csv")?;
            let noise = recipe.simulation.noise;
            writeln!(w, "B_mT,C_raw,C_spin{}", if noise { ",C_mc,C_mc_std" } else { "" })?;
            for r in &s.rows {
                write!(w, "{},{},{}", r.b_mt, r.c_raw, r.c_spin)?;
                if noise {
                    write!(w, ",{},{}", opt(r.c_mc), opt(r.c_mc_std))?;
                }
                writeln!(w)?;
            }
            w.flush()?;
            json!({ "lines": s.lines, "max_click_probability": s.max_click_probability })
        }
        RecipeKind::Fluorescence => {
            let f = run_fluorescence(recipe)?;
            let dark = recipe.counter.dark_rate_per_s;
            let mut w = out.create(".csv")?;
            writeln!(w, "t_s,rate_per_s,rate_with_dark_per_s")?;
            for (t, r) in f.curve.times.iter().zip(&f.curve.rate) {
                writeln!(w, "{t},{r},{}", r + dark)?;
            }
            w.flush()?;
            if let Some(trace) = &f.trace {
                let mut w = out.create("_mc.csv")?;
                writeln!(w, "t_s,rate_per_s")?;
                for (t, r) in trace.times.iter().zip(&trace.rate) {
                    writeln!(w, "{t},{r}")?;
                }
                w.flush()?;
            }
            json!({
                "b_mt": f.b_mt,
                "spin_counts": f.spin_counts,
                "tail_fit": f.tail_fit,
                "warnings": f.warnings,
            })
        }
        RecipeKind::CountSweep => {
            let s = run_count_sweep(recipe)?;
            let mut w = out.create(".csv")?;
            writeln!(w, "epsilon_sqrt_ns,C_spin_sim,C_R_analytic,C_NR_analytic")?;
            for r in &s.rows {
                writeln!(w, "{},{},{},{}", r.epsilon, r.c_spin_sim, r.c_r_analytic, r.c_nr_analytic)?;
            }
            w.flush()?;
            let tw: Vec<_> = s
                .thin_wire
                .iter()
                .map(|(gb, lo, hi)| json!({ "g_bar_hz": gb / TWO_PI, "g_min_hz": lo / TWO_PI, "g_max_hz": hi / TWO_PI }))
                .collect();
            json!({ "b_mt": s.b_mt, "thin_wire": tw })
        }
        RecipeKind::SnrCompare => {
            let s = run_snr_compare(recipe)?;
            let mut w = out.create(".csv")?;
            writeln!(w, "epsilon_sqrt_ns,T_int_s,C_spin_expected,SNR_FD,SNR_ID,ratio")?;
            for r in &s.rows {
                writeln!(w, "{},{},{},{},{},{}", r.epsilon, r.t_int, r.expected_spin_counts, r.snr_fd, r.snr_id, r.ratio)?;
            }
            w.flush()?;
            for (k, r) in s.rows.iter().enumerate() {
                let mut h = out.create(&format!("_hist_{k:03}.csv"))?;
                write_histogram_csv(&mut h, &r.histogram)?;
                h.flush()?;
            }
            json!({ "b_mt": s.b_mt, "max_click_probability": s.max_click_probability, "rows": s.rows })
        }
        RecipeKind::Rabi => {
            let r = run_rabi(recipe)?;
            let mut w = out.create(".csv")?;
            writeln!(w, "dt_s,excitation,fit")?;
            for (t, x) in r.durations.iter().zip(&r.excitation) {
                writeln!(w, "{t},{x},{}", r.fit.params.eval(*t))?;
            }
            w.flush()?;
            let mut w = out.create("_decay.csv")?;
            writeln!(w, "t_s,rate_per_s")?;
            for (t, x) in r.decay_times.iter().zip(&r.decay_rate) {
                writeln!(w, "{t},{x}")?;
            }
            w.flush()?;
            json!({
                "fit": r.fit,
                "n_bar": r.n_bar,
                "g0_hz": r.g0 / TWO_PI,
                "g0_rabi_hz": r.g0_rabi / TWO_PI,
                "g0_purcell_hz": r.g0_purcell / TWO_PI,
            })
        }
        RecipeKind::BathRabi => {
            let b = run_bath_rabi(recipe)?;
            let mut w = out.create(".csv")?;
            writeln!(w, "t_s,p_up")?;
            for (t, p) in b.times.iter().zip(&b.p_up) {
                writeln!(w, "{t},{p}")?;
            }
            w.flush()?;
            let mut w = out.create("_sites.csv")?;
            writeln!(w, "x_m,y_m,z_m,A_rad_per_s,B_rad_per_s")?;
            for s in &b.sites {
                writeln!(w, "{},{},{},{},{}", s.position[0], s.position[1], s.position[2], s.a, s.b)?;
            }
            w.flush()?;
            json!({ "b_mt": b.b_mt, "gamma_e_hz_per_t": b.gamma_e, "rabi_frequency_hz": b.omega / TWO_PI, "period_contrast": b.contrast })
        }
        RecipeKind::RotationPattern => {
            let rows = run_rotation(recipe)?;
            let mut w = out.create(".csv")?;
            write_rotation_csv(&rows, &mut w)?;
            w.flush()?;
            json!({ "rows": rows.len() })
        }
    };

    let manifest = Manifest {
        kind: recipe.kind,
        seed: recipe.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: start.elapsed().as_secs_f64(),
        recipe: recipe.clone(),
        resonator,
        outputs: out.written.clone(),
        results,
    };
    let mut w = out.create("_manifest.json")?;
    serde_json::to_writer_pretty(&mut w, &manifest).map_err(|e| Error::Format(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(Manifest { outputs: out.written, ..manifest })
}

pub fn write_fit_report(result: &FitResult, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, result).map_err(|e| Error::Format(e.to_string()))?;
    writeln!(w)?;
    Ok(w.flush()?)
}
