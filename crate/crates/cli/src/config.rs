//! Run configuration: JSON file merged under command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use midband_core::gain::AntennaElevationGainTable;
use midband_core::{
    AngularGrid, DistanceWeighting, Error, FrequencyGrid, LinkGeometry, ModelParams, PatternModel, PdpOptions,
    ProcessOptions, Result, SubBand, Window, WeightingScheme,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub bands: Option<Vec<String>>,
    pub pdp: PdpConfig,
    pub weighting: WeightingConfig,
    pub gain_table: Option<PathBuf>,
    pub seed: Option<u64>,
    pub synth: SynthConfig,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdpConfig {
    pub window: Option<Window>,
    pub pl_window: Option<Window>,
    pub oversample: Option<usize>,
    pub gate_ns: Option<f64>,
    pub threshold_db: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightingConfig {
    pub scheme: Option<WeightingScheme>,
    pub bin_decades: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub start_hz: f64,
    pub stop_hz: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub model: Option<ModelParams>,
    pub n_mpcs: Option<usize>,
    pub pattern: Option<PatternModel>,
    pub frequency: Option<GridConfig>,
    pub angles: Option<AngularGrid>,
    pub links: Option<Vec<LinkGeometry>>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            file: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}

/// PDP and fitting flags shared by the processing commands.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct PipelineArgs {
    /// Comma-separated sub-bands in GHz, e.g. `6-7,7-8,all`
    #[arg(long, value_delimiter = ',')]
    pub bands: Option<Vec<String>>,
    /// Window for the delay-spread PDPs
    #[arg(long)]
    pub window: Option<Window>,
    /// Window for path loss, Max-Dir selection and angular spectra
    #[arg(long)]
    pub pl_window: Option<Window>,
    #[arg(long)]
    pub oversample: Option<usize>,
    #[arg(long)]
    pub gate_ns: Option<f64>,
    #[arg(long)]
    pub threshold_db: Option<f64>,
    /// CSV with `freq_hz,correction_db` rows
    #[arg(long)]
    pub gain_table: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct FitArgs {
    #[arg(long)]
    pub weighting: Option<WeightingScheme>,
    /// Log-distance bin width in decades
    #[arg(long)]
    pub bin_decades: Option<f64>,
}

pub fn process_options(args: &PipelineArgs, cfg: &RunConfig) -> Result<ProcessOptions> {
    let d = PdpOptions::default();
    let pdp = PdpOptions {
        window: args.window.or(cfg.pdp.window).unwrap_or(d.window),
        oversample_factor: args.oversample.or(cfg.pdp.oversample).unwrap_or(d.oversample_factor),
        gate_delay_s: args.gate_ns.or(cfg.pdp.gate_ns).map_or(d.gate_delay_s, |ns| ns * 1e-9),
        threshold_below_peak_db: args
            .threshold_db
            .or(cfg.pdp.threshold_db)
            .unwrap_or(d.threshold_below_peak_db),
    };
    pdp.validate()?;
    let gains = match args.gain_table.as_ref().or(cfg.gain_table.as_ref()) {
        Some(path) => AntennaElevationGainTable::from_csv(path)?,
        None => AntennaElevationGainTable::nominal(),
    };
    Ok(ProcessOptions {
        pdp,
        pl_window: args.pl_window.or(cfg.pdp.pl_window).unwrap_or(Window::Hann),
        gains,
    })
}

pub fn weighting(args: &FitArgs, cfg: &RunConfig) -> Result<DistanceWeighting> {
    let d = DistanceWeighting::default();
    let w = DistanceWeighting {
        scheme: args.weighting.or(cfg.weighting.scheme).unwrap_or(d.scheme),
        bin_width: args.bin_decades.or(cfg.weighting.bin_decades).unwrap_or(d.bin_width),
    };
    if !(w.bin_width.is_finite() && w.bin_width > 0.0) {
        return Err(Error::invalid("weighting", "bin width must be positive"));
    }
    Ok(w)
}

/// Bands requested for `grid`; defaults to the full span plus every whole 1-GHz band.
pub fn bands(args: &PipelineArgs, cfg: &RunConfig, grid: &FrequencyGrid) -> Result<Vec<SubBand>> {
    match args.bands.as_ref().or(cfg.bands.as_ref()) {
        None => Ok(grid.default_bands()),
        Some(list) => {
            let mut out: Vec<SubBand> = Vec::new();
            for s in list {
                let b = SubBand::parse(s.trim(), grid)?;
                grid.band_indices(&b)?;
                if !out.contains(&b) {
                    out.push(b);
                }
            }
            if out.is_empty() {
                return Err(Error::invalid("bands", "empty band list"));
            }
            Ok(out)
        }
    }
}

pub fn required(flag: Option<&PathBuf>, cfg: Option<&PathBuf>, name: &str) -> Result<PathBuf> {
    flag.or(cfg)
        .cloned()
        .ok_or_else(|| Error::invalid(name, format!("--{name} is required (flag or config file)")))
}
