//! Post-processing and statistical modeling for wideband double-directional
//! channel measurements.
//!
//! The pipeline runs from raw frequency-domain scan tensors (one complex sweep per
//! Tx azimuth / Rx azimuth / Rx co-elevation triple) to calibrated power delay
//! profiles, strongest-beam and reconstructed omni-directional profiles, condensed
//! link parameters (path loss, RMS delay spread, Fleury angular spread), and
//! distance/distribution fits with 95 % confidence intervals. A synthetic channel
//! generator renders known multipath back into scan tensors for validation.

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fit;
pub mod gain;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod pdp;
pub mod pipeline;
pub mod results;
pub mod synth;
pub mod synthesis;
pub mod tensor;

pub use error::{Error, Result};
pub use fit::{
    fit_normal, fit_power_law, shadowing_residuals, DistanceWeighting, NormalFit, PowerLawFit, WeightingScheme,
};
pub use gain::AntennaElevationGainTable;
pub use grid::{AngularGrid, BeamIndex, FrequencyGrid, SubBand};
pub use io::{load_measurement_set, save_measurement_set, MeasurementSet, SetWriter};
pub use metrics::{
    angular_spread, compute_ddaps, marginal_aps, path_gain, path_loss_db, rmsds, AngularSpreadResult,
    CondensedLinkParams, Ddaps, DelaySpread, SpreadEnd,
};
pub use num_complex::Complex64;
pub use pdp::{apply_gate_threshold, calibrate, compute_pdp, PdpOptions, PowerDelayProfile, Window};
pub use pipeline::{process_link, process_link_band, BandResult, ProcessOptions};
pub use synth::{
    friis_pl, render_tensor, sample_link, HornPatternModel, ModelParams, PatternModel, SyntheticLink, SyntheticMpc,
};
pub use synthesis::{build_omni, select_max_dir, DirectionalPdpSet, OmniPdp};
pub use tensor::{CalibrationTrace, FrequencyScanTensor, LinkGeometry, LosClass};
