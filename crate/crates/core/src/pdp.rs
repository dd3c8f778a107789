//! Calibration, windowed inverse-DFT power delay profiles, and noise/delay gating.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BeamIndex, SubBand};
use crate::tensor::{CalibrationTrace, FrequencyScanTensor};

/// Calibration samples smaller than this fraction of the trace maximum are rejected.
pub const CALIBRATION_GUARD: f64 = 1e-12;

/// Divides every beam of `h_meas` by the calibration trace, in place.
pub fn calibrate(mut h_meas: FrequencyScanTensor, ota: &CalibrationTrace) -> Result<FrequencyScanTensor> {
    if h_meas.grid() != ota.grid() {
        return Err(Error::invalid(
            "calibration",
            "measurement and calibration frequency grids differ",
        ));
    }
    let peak = ota.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let guard = CALIBRATION_GUARD * peak;
    if let Some((i, v)) = ota
        .values()
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.norm() > guard))
    {
        return Err(Error::CalibrationNull {
            frequency_hz: ota.grid().frequency(i),
            magnitude: v.norm(),
            guard,
        });
    }
    let inv: Vec<Complex64> = ota.values().iter().map(|v| v.inv()).collect();
    let n = inv.len();
    for beam in h_meas.values_mut().chunks_exact_mut(n) {
        for (h, c) in beam.iter_mut().zip(&inv) {
            *h *= c;
        }
    }
    Ok(h_meas)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[serde(alias = "rect")]
    Rectangular,
    Hann,
}

impl Window {
    /// Window coefficients scaled so that their squares sum to `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        let mut w: Vec<f64> = match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann if n < 3 => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
                .collect(),
        };
        let energy: f64 = w.iter().map(|x| x * x).sum();
        let scale = (n as f64 / energy).sqrt();
        w.iter_mut().for_each(|x| *x *= scale);
        w
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Window::Rectangular => "rect",
            Window::Hann => "hann",
        })
    }
}

impl FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rect" | "rectangular" => Ok(Window::Rectangular),
            "hann" => Ok(Window::Hann),
            other => Err(Error::invalid("window", format!("unknown window `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdpOptions {
    pub window: Window,
    pub oversample_factor: usize,
    pub gate_delay_s: f64,
    /// Dynamic range kept below each profile's peak, in dB.
    pub threshold_below_peak_db: f64,
}

impl Default for PdpOptions {
    fn default() -> Self {
        Self {
            window: Window::Hann,
            oversample_factor: 10,
            gate_delay_s: 966.67e-9,
            threshold_below_peak_db: 22.0,
        }
    }
}

impl PdpOptions {
    pub fn validate(&self) -> Result<()> {
        if self.oversample_factor < 1 {
            return Err(Error::invalid("pdp options", "oversample factor must be >= 1"));
        }
        if !(self.gate_delay_s.is_finite() && self.gate_delay_s > 0.0) {
            return Err(Error::invalid("pdp options", "gate delay must be positive"));
        }
        if !(self.threshold_below_peak_db.is_finite() && self.threshold_below_peak_db > 0.0) {
            return Err(Error::invalid("pdp options", "threshold must be positive"));
        }
        Ok(())
    }

    pub fn with_window(mut self, window: Window) -> Self {
        self.window = window;
        self
    }
}

/// Delay-domain power on a uniform grid starting at zero delay.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerDelayProfile {
    pub delay_spacing_s: f64,
    pub powers: Vec<f64>,
    pub band: SubBand,
    pub beam: Option<BeamIndex>,
    pub gated: bool,
    pub kept_mask: Vec<bool>,
}

impl PowerDelayProfile {
    /// Ungated profile (every bin kept).
    pub fn new(delay_spacing_s: f64, powers: Vec<f64>, band: SubBand) -> Self {
        let n = powers.len();
        Self {
            delay_spacing_s,
            powers,
            band,
            beam: None,
            gated: false,
            kept_mask: vec![true; n],
        }
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }

    pub fn delay(&self, bin: usize) -> f64 {
        bin as f64 * self.delay_spacing_s
    }

    pub fn delays(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.delay(k))
    }

    /// Power of bin `k` as seen by downstream sums: zero when excluded.
    #[inline]
    pub fn kept_power(&self, k: usize) -> f64 {
        if self.kept_mask[k] {
            self.powers[k]
        } else {
            0.0
        }
    }

    pub fn kept_powers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.kept_power(k))
    }

    pub fn total_kept_power(&self) -> f64 {
        self.kept_powers().sum()
    }

    pub fn peak_power(&self) -> f64 {
        self.powers.iter().copied().fold(0.0, f64::max)
    }

    /// True when gating left no bin with positive power.
    pub fn all_excluded(&self) -> bool {
        !self.kept_powers().any(|p| p > 0.0)
    }

    pub fn n_kept(&self) -> usize {
        self.kept_mask.iter().filter(|&&k| k).count()
    }
}

/// Reusable inverse-DFT plan for one (frequency count, options) pair.
pub struct PdpEngine {
    n_points: usize,
    opts: PdpOptions,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for PdpEngine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PdpEngine")
            .field("n_points", &self.n_points)
            .field("opts", &self.opts)
            .finish()
    }
}

impl PdpEngine {
    pub fn new(n_points: usize, opts: PdpOptions) -> Result<Self> {
        opts.validate()?;
        if n_points < 2 {
            return Err(Error::invalid(
                "pdp input",
                format!("need at least 2 frequency points, got {n_points}"),
            ));
        }
        let fft = FftPlanner::new().plan_fft_inverse(n_points * opts.oversample_factor);
        Ok(Self {
            n_points,
            opts,
            window: opts.window.coefficients(n_points),
            fft,
        })
    }

    pub fn options(&self) -> &PdpOptions {
        &self.opts
    }

    pub fn padded_len(&self) -> usize {
        self.n_points * self.opts.oversample_factor
    }

    /// Delay bin width for a sweep with spacing `df`: 1 / (oversample · N · df).
    pub fn delay_spacing(&self, df_hz: f64) -> f64 {
        1.0 / (self.padded_len() as f64 * df_hz)
    }

    pub fn scratch(&self) -> PdpScratch {
        PdpScratch {
            buf: vec![Complex64::new(0.0, 0.0); self.padded_len()],
            fft: vec![Complex64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()],
        }
    }

    /// Writes the ungated powers for `h` into `out` (length = padded length).
    pub fn powers_into(&self, h: &[Complex64], scratch: &mut PdpScratch, out: &mut [f64]) {
        assert_eq!(h.len(), self.n_points, "transfer function length");
        let m = self.padded_len();
        let buf = &mut scratch.buf;
        for ((b, x), w) in buf.iter_mut().zip(h).zip(&self.window) {
            *b = x * *w;
        }
        buf[self.n_points..].fill(Complex64::new(0.0, 0.0));
        self.fft.process_with_scratch(buf, &mut scratch.fft);
        // |X_k|^2 / (M N) makes the bin powers sum to mean |H w|^2.
        let scale = 1.0 / (m as f64 * self.n_points as f64);
        for (o, b) in out.iter_mut().zip(buf.iter()) {
            *o = b.norm_sqr() * scale;
        }
    }

    pub fn compute(&self, h: &[Complex64], band: SubBand, df_hz: f64, scratch: &mut PdpScratch) -> PowerDelayProfile {
        let mut powers = vec![0.0; self.padded_len()];
        self.powers_into(h, scratch, &mut powers);
        PowerDelayProfile::new(self.delay_spacing(df_hz), powers, band)
    }
}

/// Per-thread working buffers for [`PdpEngine`].
pub struct PdpScratch {
    buf: Vec<Complex64>,
    fft: Vec<Complex64>,
}

/// Power delay profile of one beam's transfer function over `band`, sampled every `df_hz`.
pub fn compute_pdp(h_beam: &[Complex64], band: SubBand, df_hz: f64, opts: &PdpOptions) -> Result<PowerDelayProfile> {
    let engine = PdpEngine::new(h_beam.len(), *opts)?;
    let mut scratch = engine.scratch();
    Ok(engine.compute(h_beam, band, df_hz, &mut scratch))
}

/// Keep mask for `powers`: delay within the gate and power within the threshold of the peak.
/// Both comparisons are inclusive.
pub fn gate_mask_into(powers: &[f64], delay_spacing_s: f64, opts: &PdpOptions, mask: &mut [bool]) {
    let peak = powers.iter().copied().fold(0.0, f64::max);
    let floor = peak * 10f64.powf(-opts.threshold_below_peak_db / 10.0);
    for (k, (m, &p)) in mask.iter_mut().zip(powers).enumerate() {
        *m = k as f64 * delay_spacing_s <= opts.gate_delay_s && p >= floor;
    }
}

/// Applies delay gating and peak-relative thresholding. The peak is taken over the
/// raw (ungated) powers, so re-applying the same options is a no-op.
pub fn apply_gate_threshold(mut pdp: PowerDelayProfile, opts: &PdpOptions) -> PowerDelayProfile {
    gate_mask_into(&pdp.powers, pdp.delay_spacing_s, opts, &mut pdp.kept_mask);
    pdp.gated = true;
    pdp
}
