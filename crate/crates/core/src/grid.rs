//! Frequency and angular sampling grids, and sub-band definitions.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance (in units of grid spacing) for matching a frequency to a grid point.
const ON_GRID_TOL: f64 = 1e-6;

/// Uniformly spaced frequency sweep, both endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    start_hz: f64,
    stop_hz: f64,
    n_points: usize,
}

impl FrequencyGrid {
    pub fn new(start_hz: f64, stop_hz: f64, n_points: usize) -> Result<Self> {
        if !(start_hz.is_finite() && stop_hz.is_finite()) {
            return Err(Error::invalid("frequency grid", "non-finite endpoint"));
        }
        if n_points < 2 {
            return Err(Error::invalid(
                "frequency grid",
                format!("need at least 2 points, got {n_points}"),
            ));
        }
        if stop_hz <= start_hz {
            return Err(Error::invalid(
                "frequency grid",
                format!("stop {stop_hz} Hz must exceed start {start_hz} Hz"),
            ));
        }
        Ok(Self {
            start_hz,
            stop_hz,
            n_points,
        })
    }

    /// 6–14 GHz, 8001 points, 1 MHz spacing.
    pub fn nominal() -> Self {
        Self {
            start_hz: 6e9,
            stop_hz: 14e9,
            n_points: 8001,
        }
    }

    pub fn start_hz(&self) -> f64 {
        self.start_hz
    }

    pub fn stop_hz(&self) -> f64 {
        self.stop_hz
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing_hz(&self) -> f64 {
        (self.stop_hz - self.start_hz) / (self.n_points - 1) as f64
    }

    pub fn frequency(&self, index: usize) -> f64 {
        if index + 1 == self.n_points {
            self.stop_hz
        } else {
            self.start_hz + index as f64 * self.spacing_hz()
        }
    }

    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(|i| self.frequency(i))
    }

    /// Index of the grid point equal to `f_hz`, if any.
    pub fn index_of(&self, f_hz: f64) -> Option<usize> {
        let pos = (f_hz - self.start_hz) / self.spacing_hz();
        let idx = pos.round();
        if (pos - idx).abs() > ON_GRID_TOL || idx < 0.0 || idx >= self.n_points as f64 {
            return None;
        }
        Some(idx as usize)
    }

    /// Index range `[lo, hi]` (inclusive) covered by `band`.
    pub fn band_indices(&self, band: &SubBand) -> Result<(usize, usize)> {
        let lo = self.index_of(band.lo_hz()).ok_or(Error::OffGrid {
            edge: "lower",
            value_hz: band.lo_hz(),
        })?;
        let hi = self.index_of(band.hi_hz()).ok_or(Error::OffGrid {
            edge: "upper",
            value_hz: band.hi_hz(),
        })?;
        Ok((lo, hi))
    }

    /// Sub-grid spanning `band`.
    pub fn restrict(&self, band: &SubBand) -> Result<FrequencyGrid> {
        let (lo, hi) = self.band_indices(band)?;
        FrequencyGrid::new(self.frequency(lo), self.frequency(hi), hi - lo + 1)
    }

    pub fn span(&self) -> SubBand {
        SubBand {
            lo_hz: self.start_hz,
            hi_hz: self.stop_hz,
        }
    }

    /// The full span followed by every whole 1-GHz band inside it.
    pub fn default_bands(&self) -> Vec<SubBand> {
        let mut bands = vec![self.span()];
        let first = (self.start_hz / 1e9 - 1e-9).ceil() as i64;
        let last = (self.stop_hz / 1e9 + 1e-9).floor() as i64;
        for g in first..last {
            let b = SubBand {
                lo_hz: g as f64 * 1e9,
                hi_hz: (g + 1) as f64 * 1e9,
            };
            if self.band_indices(&b).is_ok() {
                bands.push(b);
            }
        }
        bands
    }
}

/// Closed frequency interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubBand {
    lo_hz: f64,
    hi_hz: f64,
}

impl SubBand {
    pub fn new(lo_hz: f64, hi_hz: f64) -> Result<Self> {
        if !(lo_hz.is_finite() && hi_hz.is_finite()) || lo_hz >= hi_hz {
            return Err(Error::invalid(
                "sub-band",
                format!("need finite lo < hi, got [{lo_hz}, {hi_hz}]"),
            ));
        }
        Ok(Self { lo_hz, hi_hz })
    }

    pub fn ghz(lo: f64, hi: f64) -> Result<Self> {
        Self::new(lo * 1e9, hi * 1e9)
    }

    pub fn lo_hz(&self) -> f64 {
        self.lo_hz
    }

    pub fn hi_hz(&self) -> f64 {
        self.hi_hz
    }

    pub fn center_hz(&self) -> f64 {
        0.5 * (self.lo_hz + self.hi_hz)
    }

    pub fn width_hz(&self) -> f64 {
        self.hi_hz - self.lo_hz
    }

    /// Row label: "All Bands" for the full grid span, "6-7 GHz" otherwise.
    pub fn label(&self, grid: &FrequencyGrid) -> String {
        if *self == grid.span() {
            "All Bands".to_string()
        } else {
            self.to_string()
        }
    }

    /// Parses `6-7` (GHz) or `all` (the full span of `grid`).
    pub fn parse(s: &str, grid: &FrequencyGrid) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("all") || s.eq_ignore_ascii_case("all bands") {
            return Ok(grid.span());
        }
        let body = s.trim_end_matches("GHz").trim();
        let (lo, hi) = body
            .split_once('-')
            .ok_or_else(|| Error::invalid("band", format!("expected `lo-hi` in GHz, got `{s}`")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid("band", format!("bad number `{v}` in `{s}`")))
        };
        SubBand::ghz(parse(lo)?, parse(hi)?)
    }
}

impl fmt::Display for SubBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{} GHz", self.lo_hz / 1e9, self.hi_hz / 1e9)
    }
}

/// Beam-pointing grid in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularGrid {
    pub tx_az_deg: Vec<f64>,
    pub rx_az_deg: Vec<f64>,
    pub rx_coel_deg: Vec<f64>,
}

impl AngularGrid {
    pub fn new(tx_az_deg: Vec<f64>, rx_az_deg: Vec<f64>, rx_coel_deg: Vec<f64>) -> Result<Self> {
        let grid = Self {
            tx_az_deg,
            rx_az_deg,
            rx_coel_deg,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Tx azimuth −60°..60°, Rx azimuth 0°..350°, Rx co-elevation −20°..20°, 10° steps.
    pub fn nominal() -> Self {
        let steps = |from: i32, to: i32| (from..=to).step_by(10).map(f64::from).collect();
        Self {
            tx_az_deg: steps(-60, 60),
            rx_az_deg: steps(0, 350),
            rx_coel_deg: steps(-20, 20),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_axis("tx_az_deg", &self.tx_az_deg, -180.0, 360.0, true)?;
        check_axis("rx_az_deg", &self.rx_az_deg, 0.0, 360.0, true)?;
        check_axis("rx_coel_deg", &self.rx_coel_deg, -90.0, 90.0, false)?;
        Ok(())
    }

    pub fn dims(&self) -> [usize; 3] {
        [
            self.tx_az_deg.len(),
            self.rx_az_deg.len(),
            self.rx_coel_deg.len(),
        ]
    }

    pub fn n_beams(&self) -> usize {
        self.dims().iter().product()
    }

    /// Flat beam index, row-major over (tx, rx, coel).
    pub fn flat(&self, beam: BeamIndex) -> usize {
        let [_, nr, nc] = self.dims();
        (beam.tx * nr + beam.rx) * nc + beam.coel
    }

    pub fn unflat(&self, flat: usize) -> BeamIndex {
        let [_, nr, nc] = self.dims();
        BeamIndex {
            tx: flat / (nr * nc),
            rx: (flat / nc) % nr,
            coel: flat % nc,
        }
    }

    pub fn beams(&self) -> impl Iterator<Item = BeamIndex> + '_ {
        (0..self.n_beams()).map(|i| self.unflat(i))
    }
}

fn check_axis(name: &str, values: &[f64], lo: f64, hi: f64, half_open: bool) -> Result<()> {
    if values.is_empty() {
        return Err(Error::invalid(name, "empty angle list"));
    }
    for (i, &v) in values.iter().enumerate() {
        let in_range = v.is_finite() && v >= lo && if half_open { v < hi } else { v <= hi };
        if !in_range {
            return Err(Error::invalid(
                name,
                format!("angle {v} at position {i} outside [{lo}, {hi})"),
            ));
        }
    }
    if let Some(w) = values.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::invalid(
            name,
            format!("angles not strictly increasing ({} then {})", w[0], w[1]),
        ));
    }
    if values[values.len() - 1] - values[0] >= 360.0 {
        return Err(Error::invalid(name, "angles span a full turn or more"));
    }
    Ok(())
}

/// Position of one beam pair in the angular grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BeamIndex {
    pub tx: usize,
    pub rx: usize,
    pub coel: usize,
}

impl BeamIndex {
    pub fn new(tx: usize, rx: usize, coel: usize) -> Self {
        Self { tx, rx, coel }
    }
}
