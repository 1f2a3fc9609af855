//! Command-line interface to the pipeline stages.

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use volterra_rom::pipeline::{self, RunConfig, SweepInput, SweepSpec};
use volterra_rom::signals::{TimeGrid, TimeSignal};
use volterra_rom::{KernelSet, Result, RomError};

#[derive(Parser)]
#[command(
    name = "volterra-rom",
    version,
    about = "Parametric Volterra reduced-order modeling of unsteady aerodynamic responses"
)]
struct Cli {
    /// JSON config file; unspecified fields keep their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the parameter box and simulate the identification responses.
    Gen,
    /// Identify Volterra kernels for every dataset point.
    Identify,
    /// Train the configured interpolators on the identified kernels.
    Train,
    /// Predict kernels at the validation points with the trained models.
    Predict,
    /// Run the whole procedure: gen, identify, train, predict, report.
    RunAll,
    /// Validate an external dataset and normalize it into the output dir.
    Ingest {
        /// Directory containing manifest.json and the referenced CSVs.
        #[arg(long)]
        input: PathBuf,
    },
    /// Evaluate a kernel file against a step or harmonic input.
    Reconstruct {
        /// Kernel JSON produced by `identify` or `predict`.
        #[arg(long)]
        kernels: PathBuf,
        /// Step magnitude in degrees.
        #[arg(long, conflicts_with = "harmonic")]
        step: Option<f64>,
        /// Harmonic input as `mean,amplitude,reduced_frequency` (degrees).
        #[arg(long, value_name = "MEAN,AMP,K")]
        harmonic: Option<String>,
        /// Number of samples; defaults to the kernel memory depth.
        #[arg(long)]
        samples: Option<usize>,
        /// Time step; defaults to the kernel's identification grid.
        #[arg(long)]
        dt: Option<f64>,
        /// Output CSV path (tau,input,output).
        #[arg(long)]
        output: PathBuf,
    },
    /// Reconstruct responses over a grid of (Mach, alpha0) queries.
    Sweep {
        #[arg(long, default_value = "gpr")]
        interpolator: String,
        /// Comma-separated Mach numbers.
        #[arg(long, value_delimiter = ',', required = true)]
        machs: Vec<f64>,
        /// Comma-separated alpha0 values in degrees.
        #[arg(long, value_delimiter = ',', required = true)]
        alphas: Vec<f64>,
        /// Step magnitude in degrees.
        #[arg(long, conflicts_with = "harmonic")]
        step: Option<f64>,
        /// Harmonic input as `mean,amplitude,reduced_frequency` (degrees).
        #[arg(long, value_name = "MEAN,AMP,K")]
        harmonic: Option<String>,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load_json(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn parse_harmonic(text: &str) -> Result<SweepInput> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(RomError::Config(format!(
            "harmonic spec must be `mean,amplitude,reduced_frequency`, got `{text}`"
        )));
    }
    let parse = |s: &str| -> Result<f64> {
        s.trim()
            .parse()
            .map_err(|_| RomError::Config(format!("bad number `{s}` in harmonic spec")))
    };
    Ok(SweepInput::Harmonic {
        mean_deg: parse(parts[0])?,
        amplitude_deg: parse(parts[1])?,
        reduced_frequency: parse(parts[2])?,
    })
}

fn sweep_input(step: Option<f64>, harmonic: Option<&String>) -> Result<SweepInput> {
    match (step, harmonic) {
        (Some(amplitude_deg), None) => Ok(SweepInput::Step { amplitude_deg }),
        (None, Some(text)) => parse_harmonic(text),
        _ => Err(RomError::Config(
            "exactly one of --step or --harmonic is required".into(),
        )),
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Gen => {
            let config = load_config(cli)?;
            pipeline::generate_stage(&config)?;
            println!(
                "generated {} points under {}",
                config.samples,
                config.output_dir.display()
            );
        }
        Command::Identify => {
            let config = load_config(cli)?;
            pipeline::identify_stage(&config)?;
            println!(
                "kernels written to {}",
                config.output_dir.join("kernels").display()
            );
        }
        Command::Train => {
            let config = load_config(cli)?;
            pipeline::train_stage(&config)?;
            println!(
                "models written to {}",
                config.output_dir.join("models").display()
            );
        }
        Command::Predict => {
            let config = load_config(cli)?;
            pipeline::predict_stage(&config)?;
            println!(
                "predicted kernels written to {}",
                config
                    .output_dir
                    .join("report")
                    .join("predicted_kernels")
                    .display()
            );
        }
        Command::RunAll => {
            let config = load_config(cli)?;
            let report = pipeline::run_algorithm1(&config)?;
            for summary in &report.summary {
                let fmt =
                    |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
                println!(
                    "{}: median kernel errors h1 {:.4} h2 {}, median sinusoid RMS linear {} nonlinear {}",
                    summary.interpolator,
                    summary.median_h1_error_l2,
                    fmt(summary.median_h2_error_l2),
                    fmt(summary.median_sinusoid_linear_rms),
                    fmt(summary.median_sinusoid_nonlinear_rms),
                );
            }
            println!(
                "report written to {}",
                config.output_dir.join("report").display()
            );
        }
        Command::Ingest { input } => {
            let config = load_config(cli)?;
            let (count, errors) = pipeline::ingest_external(input, &config.output_dir)?;
            for e in &errors {
                eprintln!("ingest: skipped record: {e}");
            }
            println!(
                "ingested {count} records into {} ({} rejected)",
                config.output_dir.display(),
                errors.len()
            );
        }
        Command::Reconstruct {
            kernels,
            step,
            harmonic,
            samples,
            dt,
            output,
        } => {
            let set = KernelSet::load_json(kernels)?;
            let n = samples.unwrap_or(set.memory_depth);
            let grid = TimeGrid::new(dt.unwrap_or(set.dt), n)?;
            let input = match sweep_input(*step, harmonic.as_ref())? {
                SweepInput::Step { amplitude_deg } => TimeSignal::step(grid, amplitude_deg)?,
                SweepInput::Harmonic {
                    mean_deg,
                    amplitude_deg,
                    reduced_frequency,
                } => TimeSignal::sinusoid(grid, mean_deg, amplitude_deg, reduced_frequency)?,
            };
            let response = set.reconstruct(&input)?;
            let mut text = String::from("tau,input,output\n");
            for i in 0..grid.len() {
                use std::fmt::Write as _;
                let _ = writeln!(
                    text,
                    "{},{},{}",
                    grid.tau(i),
                    input.values()[i],
                    response.values()[i]
                );
            }
            std::fs::write(output, text)?;
            println!("response written to {}", output.display());
        }
        Command::Sweep {
            interpolator,
            machs,
            alphas,
            step,
            harmonic,
        } => {
            let config = load_config(cli)?;
            let spec = SweepSpec {
                machs: machs.clone(),
                alphas: alphas.clone(),
                input: sweep_input(*step, harmonic.as_ref())?,
            };
            let outcome = pipeline::sweep_reconstruct(&config, interpolator, &spec)?;
            for case in outcome.cases.iter().filter(|c| c.extrapolated) {
                eprintln!(
                    "warning: (M = {}, alpha0 = {}) lies outside the sampled box; \
                     prediction is an extrapolation",
                    case.mach, case.alpha0
                );
            }
            println!(
                "{} sweep cases written to {}",
                outcome.cases.len(),
                config.output_dir.join("sweep").display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::FAILURE
        }
    }
}
