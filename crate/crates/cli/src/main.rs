//! Command-line front end for the rate, detection and allocation experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use jcas::beamform::RadarBeamKind;
use jcas::estimation::EstimatorKind;
use jcas::harness::output::{file_names, write_detection_outputs, write_manifest, write_rate_outputs, RunManifest};
use jcas::harness::validation::validate_bound_terms;
use jcas::harness::{run_detection_experiment, run_rate_experiment, AllocatorKind, Preset, ScenarioConfig};
use jcas::poweralloc::{
    max_min_allocate, uniform_allocate, AllocationProblem, BisectionOptions, PowerAllocation, RadarSirCoefficients,
};
use jcas::rate::RateCoefficients;
use jcas::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "jcas", version, about = "Massive MIMO downlink and OFDM radar link simulator")]
struct Cli {
    /// TOML scenario file; unspecified fields take preset defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base configuration when no file is given.
    #[arg(long, global = true, default_value = "desk")]
    preset: Preset,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for CSV tables and the manifest.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Restrict to one estimator.
    #[arg(long, global = true)]
    estimator: Option<EstimatorKind>,
    /// Restrict to one radar beam.
    #[arg(long, global = true)]
    beam: Option<RadarBeamKind>,
    /// Restrict to one allocator.
    #[arg(long, global = true)]
    allocator: Option<AllocatorKind>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Per-user rate samples and CDFs over paired scenarios.
    Rates {
        #[arg(long)]
        scenarios: Option<usize>,
    },
    /// Threshold calibration and Pd versus range.
    Detect {
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        calibration_trials: Option<usize>,
        /// Comma-separated target ranges in metres.
        #[arg(long, value_delimiter = ',')]
        ranges: Option<Vec<f64>>,
    },
    /// Allocates power for coefficients read from a JSON file.
    Allocate { input: PathBuf },
    /// Compares closed-form bound terms with Monte-Carlo sampling.
    Validate {
        #[arg(long, default_value_t = 2)]
        scenarios: usize,
        #[arg(long, default_value_t = 20_000)]
        draws: usize,
        /// Largest accepted relative error.
        #[arg(long, default_value_t = 0.05)]
        tolerance: f64,
    },
    /// Prints the effective configuration as TOML.
    Config,
}

/// Input of the `allocate` subcommand.
#[derive(Debug, Deserialize)]
struct AllocateInput {
    coefficients: RateCoefficients,
    sir: RadarSirCoefficients,
    budget: f64,
    rho_star: f64,
    #[serde(default)]
    allocator: Option<AllocatorKind>,
    /// Needed by the uniform allocator.
    #[serde(default)]
    uniform: Option<UniformInput>,
}

#[derive(Debug, Deserialize)]
struct UniformInput {
    p_dl: f64,
    rcr: f64,
    n_subcarriers: usize,
    n_symbols: usize,
}

#[derive(Debug, Serialize)]
struct AllocateOutput {
    allocation: PowerAllocation,
    sinr: Vec<f64>,
    rates: Vec<f64>,
    radar_sir: f64,
}

fn load_config(cli: &Cli) -> Result<ScenarioConfig> {
    let mut config = match &cli.config {
        Some(path) => ScenarioConfig::from_file_with_base(path, &ScenarioConfig::preset(cli.preset))?,
        None => ScenarioConfig::preset(cli.preset),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(e) = cli.estimator {
        config.estimators = vec![e];
        config.detection.estimator = e;
    }
    if let Some(b) = cli.beam {
        config.radar_beams = vec![b];
    }
    if let Some(a) = cli.allocator {
        config.allocators = vec![a];
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Rates { scenarios } => {
            let config = load_config(cli)?;
            let n = scenarios.unwrap_or(config.scenarios);
            let result = run_rate_experiment(&config, n)?;
            let files = write_rate_outputs(&cli.out, &result)?;
            let mut manifest = RunManifest::new("rates", &config)?;
            manifest.scenarios = Some(n);
            manifest.rows = result.rows.len();
            manifest.files = file_names(&files);
            manifest.rate_failures = result.failures.clone();
            write_manifest(&cli.out, &manifest)?;
            println!(
                "{} rate rows from {n} scenarios ({} failed combinations) -> {}",
                result.rows.len(),
                result.failures.len(),
                cli.out.display()
            );
        }
        Command::Detect {
            trials,
            calibration_trials,
            ranges,
        } => {
            let mut config = load_config(cli)?;
            if let Some(c) = calibration_trials {
                config.detection.calibration_trials = *c;
            }
            if let Some(r) = ranges {
                config.detection.ranges_m = r.clone();
            }
            config.validate()?;
            let n = trials.unwrap_or(config.detection.trials);
            let result = run_detection_experiment(&config, &config.detection.ranges_m, n)?;
            let files = write_detection_outputs(&cli.out, &result)?;
            let mut manifest = RunManifest::new("detect", &config)?;
            manifest.trials = Some(n);
            manifest.rows = result.rows.len();
            manifest.files = file_names(&files);
            manifest.detection_failures = result.failures.clone();
            manifest.thresholds = result.thresholds.clone();
            write_manifest(&cli.out, &manifest)?;
            for row in &result.rows {
                println!(
                    "range {:>6.1} m  {:<3} {:<7} rcr {:>4.1} dB  pd {:.4} [{:.4}, {:.4}]",
                    row.range_m, row.beam, row.allocator, row.rcr_db, row.pd, row.ci_low, row.ci_high
                );
            }
        }
        Command::Allocate { input } => {
            let output = allocate_from_file(input, cli.allocator)?;
            println!("{}", serde_json::to_string_pretty(&output)?);
        }
        Command::Validate {
            scenarios,
            draws,
            tolerance,
        } => {
            let config = load_config(cli)?;
            let rows = validate_bound_terms(&config, *scenarios, *draws)?;
            let mut worst: f64 = 0.0;
            for r in &rows {
                println!(
                    "scenario {} {:<8} {:<5} gamma err {:.4}  xi err {:.4}",
                    r.scenario, r.channel_model, r.estimator, r.gamma_error, r.xi_error
                );
                worst = worst.max(r.gamma_error).max(r.xi_error);
            }
            if worst > *tolerance {
                return Err(Error::Numerical(format!(
                    "largest bound-term error {worst:.4} exceeds {tolerance}"
                )));
            }
        }
        Command::Config => {
            let config = load_config(cli)?;
            print!("{}", config.to_toml_string()?);
        }
    }
    Ok(())
}

fn allocate_from_file(path: &Path, allocator: Option<AllocatorKind>) -> Result<AllocateOutput> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let input: AllocateInput = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    let c = input.coefficients;
    let coeffs = RateCoefficients::new(c.estimator, c.gamma, c.xi, c.zeta_radar, c.noise_var, c.timing)?;
    let sir = RadarSirCoefficients::new(input.sir.radar_gain, input.sir.user_gains)?;
    let allocation = match allocator.or(input.allocator).unwrap_or(AllocatorKind::Maxmin) {
        AllocatorKind::Maxmin => max_min_allocate(
            AllocationProblem {
                coeffs: &coeffs,
                sir: &sir,
                budget: input.budget,
                rho_star: input.rho_star,
            },
            BisectionOptions::default(),
        )?,
        AllocatorKind::Uniform => {
            let u = input
                .uniform
                .ok_or_else(|| Error::Config("uniform allocation needs a `uniform` section".into()))?;
            uniform_allocate(u.p_dl, u.rcr, coeffs.num_users(), u.n_subcarriers, u.n_symbols)?
        }
    };
    Ok(AllocateOutput {
        sinr: coeffs.sinr(allocation.eta_users(), allocation.eta_radar())?,
        rates: coeffs.rates(allocation.eta_users(), allocation.eta_radar())?,
        radar_sir: allocation.radar_sir(&sir),
        allocation,
    })
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidParameter { .. } | Error::DimensionMismatch { .. } => 2,
        Error::Infeasible(_) => 3,
        Error::Numerical(_) | Error::SolverStalled { .. } | Error::DegenerateDirection { .. } => 4,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
