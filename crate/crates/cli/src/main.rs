//! `midband`: batch front end for the channel-measurement processing pipeline.

mod config;
mod stages;
mod synthetic;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use midband_core::Error;

use config::{FitArgs, PipelineArgs, RunConfig};
use synthetic::{SynthArgs, Tolerances};

#[derive(Debug, Parser)]
#[command(name = "midband", version, about = "Wideband double-directional channel measurement processing")]
struct Cli {
    /// JSON run configuration; command-line flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Full pipeline: condensed parameters, PDP/APS dumps and fit tables
    Process {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Divide every link by the calibration trace and write a new set
    Calibrate {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Omni and Max-Dir PDPs plus marginal angular spectra as CSV
    Pdp {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Condensed per-link, per-band parameters as CSV
    Condense {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Fit tables from a condensed CSV
    Fit {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Row labels to fit, e.g. `all,6-7`; defaults to every band in the input
        #[arg(long, value_delimiter = ',')]
        bands: Option<Vec<String>>,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Write a synthetic measurement set and its truth.json
    Synth {
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        synth: SynthArgs,
    },
    /// Synthesize (or take --input), process, and compare against the truth
    Roundtrip {
        /// Existing synthetic set with truth.json
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        synth: SynthArgs,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[command(flatten)]
        fit: FitArgs,
        #[command(flatten)]
        tol: Tolerances,
    },
    /// Print the fit tables of a results.json
    Report {
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

enum Failure {
    Error(Error),
    Tolerance(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn run(cli: Cli) -> std::result::Result<(), Failure> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let input = |flag: &Option<PathBuf>| config::required(flag.as_ref(), cfg.input.as_ref(), "input");
    let output = |flag: &Option<PathBuf>| config::required(flag.as_ref(), cfg.output.as_ref(), "output");

    match &cli.command {
        Command::Process {
            input: i,
            output: o,
            pipeline,
            fit,
        } => {
            let set = stages::open_set(&input(i)?)?;
            let opts = config::process_options(pipeline, &cfg)?;
            let bands = config::bands(pipeline, &cfg, set.grid())?;
            let weighting = config::weighting(fit, &cfg)?;
            stages::process(&set, &bands, &opts, &weighting, &output(o)?, |_, _| {})?;
        }
        Command::Calibrate { input: i, output: o } => {
            let set = stages::open_set(&input(i)?)?;
            stages::calibrate_set(&set, &output(o)?)?;
        }
        Command::Pdp {
            input: i,
            output: o,
            pipeline,
        } => {
            let set = stages::open_set(&input(i)?)?;
            let opts = config::process_options(pipeline, &cfg)?;
            let bands = config::bands(pipeline, &cfg, set.grid())?;
            stages::dumps(&set, &bands, &opts, &output(o)?)?;
        }
        Command::Condense {
            input: i,
            output: o,
            pipeline,
        } => {
            let set = stages::open_set(&input(i)?)?;
            let opts = config::process_options(pipeline, &cfg)?;
            let bands = config::bands(pipeline, &cfg, set.grid())?;
            stages::condense(&set, &bands, &opts, &output(o)?)?;
        }
        Command::Fit {
            input: i,
            output: o,
            bands,
            fit,
        } => {
            let rows = stages::read_condensed(&input(i)?)?;
            let weighting = config::weighting(fit, &cfg)?;
            let mut labels = stages::band_labels(&rows);
            if let Some(wanted) = bands.as_ref().or(cfg.bands.as_ref()) {
                let wanted: Vec<String> = wanted.iter().map(|w| normalize_label(w)).collect();
                labels.retain(|l| wanted.contains(l));
                if labels.is_empty() {
                    return Err(Error::invalid("bands", "none of the requested bands are in the input").into());
                }
            }
            let opts = config::process_options(&PipelineArgs::default(), &cfg)?;
            let meta = stages::metadata(&opts, &weighting);
            stages::write_fits(&rows, &labels, &weighting, &meta, &output(o)?)?;
        }
        Command::Synth { output: o, synth } => {
            let plan = synthetic::plan(synth, &cfg)?;
            synthetic::synth(&plan, &output(o)?)?;
        }
        Command::Roundtrip {
            input: i,
            output: o,
            synth,
            pipeline,
            fit,
            tol,
        } => {
            let out = output(o)?;
            let set_dir = match i.as_ref().or(cfg.input.as_ref()) {
                Some(dir) => dir.clone(),
                None => {
                    let dir = synthetic::default_set_dir(&out);
                    synthetic::synth(&synthetic::plan(synth, &cfg)?, &dir)?;
                    dir
                }
            };
            let set = stages::open_set(&set_dir)?;
            let opts = config::process_options(pipeline, &cfg)?;
            let bands = config::bands(pipeline, &cfg, set.grid())?;
            drop(set);
            let weighting = config::weighting(fit, &cfg)?;
            let checks = synthetic::roundtrip(&set_dir, &out, &bands, &opts, &weighting, tol)?;
            print!("{}", synthetic::render_checks(&checks));
            let failed = checks.iter().filter(|c| c.pass == Some(false)).count();
            if failed > 0 {
                return Err(Failure::Tolerance(failed));
            }
        }
        Command::Report { input: i } => {
            print!("{}", stages::report(&input(i)?)?);
        }
    }
    Ok(())
}

/// `6-7` and `all` to the row labels used in condensed tables.
fn normalize_label(s: &str) -> String {
    let t = s.trim();
    if t.eq_ignore_ascii_case("all") || t.eq_ignore_ascii_case("all bands") {
        "All Bands".to_string()
    } else if t.ends_with("GHz") {
        t.to_string()
    } else {
        format!("{t} GHz")
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Invalid { .. } => "invalid",
        Error::DimensionMismatch { .. } => "dimension_mismatch",
        Error::NonFinite { .. } => "non_finite",
        Error::Version { .. } => "version",
        Error::Format { .. } => "format",
        Error::CalibrationNull { .. } => "calibration_null",
        Error::OffGrid { .. } => "off_grid",
        Error::Outage(_) => "outage",
        Error::Unrealizable(_) => "unrealizable",
        Error::Io { .. } => "io",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Error(e)) => {
            let code = if e.is_numerical() { 3 } else { 2 };
            let report = serde_json::json!({
                "error": error_kind(&e),
                "message": e.to_string(),
                "exit_code": code,
            });
            eprintln!("{report}");
            ExitCode::from(code)
        }
        Err(Failure::Tolerance(n)) => {
            let report = serde_json::json!({
                "error": "tolerance",
                "message": format!("{n} roundtrip check(s) outside tolerance"),
                "exit_code": 4,
            });
            eprintln!("{report}");
            ExitCode::from(4)
        }
    }
}
