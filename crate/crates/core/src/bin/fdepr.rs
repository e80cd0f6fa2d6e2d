use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fdepr::fit::Weighting;
use fdepr::recipe::{execute, exit_code, fit_table, read_xy_csv, write_fit_report, ExperimentRecipe, FitModel, FitOptions, RecipeKind};
use fdepr::{Error, Result};

#[derive(Parser)]
#[command(name = "fdepr", version, about = "Fluorescence-detected EPR simulations and fits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RecipeArgs {
    /// Recipe file (TOML).
    recipe: PathBuf,
    /// Overrides `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the recipe seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Counts versus static field.
    Spectrum(RecipeArgs),
    /// Resonance fields versus in-plane angle.
    Rotation(RecipeArgs),
    /// Count-rate curve after one pulse.
    Fluorescence(RecipeArgs),
    /// Integrated counts versus pulse strength.
    Sweep(RecipeArgs),
    /// Fluorescence versus echo detection SNR.
    Snr(RecipeArgs),
    /// Rabi oscillation and the two coupling estimates.
    Rabi(RecipeArgs),
    /// Rabi oscillation damped by the tungsten nuclear bath.
    BathRabi(RecipeArgs),
    /// Fit a model to two columns of a CSV file.
    Fit(FitArgs),
}

#[derive(Args)]
struct FitArgs {
    input: PathBuf,
    /// exponential, lorentzian, skewed_lorentzian or rabi.
    #[arg(long)]
    model: String,
    #[arg(long, default_value_t = 0)]
    x_col: usize,
    #[arg(long, default_value_t = 1)]
    y_col: usize,
    /// Weight points as Poisson counts.
    #[arg(long)]
    poisson: bool,
    /// Exponential fits: restrict to this x window.
    #[arg(long, num_args = 2, value_names = ["START", "STOP"])]
    window: Option<Vec<f64>>,
    /// Lorentzian fits on a field axis: transition slope in Hz/T.
    #[arg(long)]
    field_slope_hz_per_t: Option<f64>,
    /// Skewed Lorentzian: hold the skew at this value.
    #[arg(long)]
    fixed_skew: Option<f64>,
    /// Write the result as JSON here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn run_recipe(args: &RecipeArgs, expected: RecipeKind) -> Result<()> {
    let mut recipe = ExperimentRecipe::load(&args.recipe)?;
    if recipe.kind != expected {
        return Err(Error::Config(format!(
            "{} describes a `{}` run, not `{}`",
            args.recipe.display(),
            recipe.kind.name(),
            expected.name()
        )));
    }
    if let Some(dir) = &args.out {
        recipe.output.dir = dir.clone();
    }
    if args.seed.is_some() {
        recipe.seed = args.seed;
    }
    let manifest = execute(&recipe)?;
    for p in &manifest.outputs {
        println!("{}", p.display());
    }
    eprintln!("{} finished in {:.2} s", expected.name(), manifest.wall_time_s);
    Ok(())
}

fn run_fit(args: &FitArgs) -> Result<()> {
    let model: FitModel = args.model.parse()?;
    let (x, y) = read_xy_csv(&args.input, args.x_col, args.y_col)?;
    let opts = FitOptions {
        weighting: if args.poisson { Weighting::Poisson } else { Weighting::Uniform },
        window: args.window.as_ref().map(|w| (w[0], w[1])),
        field_slope: args.field_slope_hz_per_t,
        fixed_skew: args.fixed_skew,
    };
    let result = fit_table(&x, &y, model, &opts)?;
    match &args.output {
        Some(path) => write_fit_report(&result, path)?,
        None => println!("{}", serde_json::to_string_pretty(&result).map_err(|e| Error::Format(e.to_string()))?),
    }
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Spectrum(a) => run_recipe(a, RecipeKind::Spectrum),
        Command::Rotation(a) => run_recipe(a, RecipeKind::RotationPattern),
        Command::Fluorescence(a) => run_recipe(a, RecipeKind::Fluorescence),
        Command::Sweep(a) => run_recipe(a, RecipeKind::CountSweep),
        Command::Snr(a) => run_recipe(a, RecipeKind::SnrCompare),
        Command::Rabi(a) => run_recipe(a, RecipeKind::Rabi),
        Command::BathRabi(a) => run_recipe(a, RecipeKind::BathRabi),
        Command::Fit(a) => run_fit(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
