//! In-memory measurement containers.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{AngularGrid, BeamIndex, FrequencyGrid, SubBand};

/// Complex transfer function samples for one link, laid out `[tx_az][rx_az][rx_coel][f]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyScanTensor {
    grid: FrequencyGrid,
    angles: AngularGrid,
    values: Vec<Complex64>,
}

impl FrequencyScanTensor {
    pub fn new(grid: FrequencyGrid, angles: AngularGrid, values: Vec<Complex64>) -> Result<Self> {
        angles.validate()?;
        let expected = angles.n_beams() * grid.len();
        if values.len() != expected {
            return Err(Error::invalid(
                "scan tensor",
                format!("expected {expected} samples, got {}", values.len()),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "scan tensor",
                format!("non-finite sample at flat index {i}"),
            ));
        }
        Ok(Self {
            grid,
            angles,
            values,
        })
    }

    pub fn zeros(grid: FrequencyGrid, angles: AngularGrid) -> Self {
        let n = angles.n_beams() * grid.len();
        Self {
            grid,
            angles,
            values: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn angles(&self) -> &AngularGrid {
        &self.angles
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    /// Number of beam triples (scan positions).
    pub fn n_positions(&self) -> usize {
        self.angles.n_beams()
    }

    pub fn beam(&self, beam: BeamIndex) -> &[Complex64] {
        let n = self.grid.len();
        let start = self.angles.flat(beam) * n;
        &self.values[start..start + n]
    }

    pub fn beam_mut(&mut self, beam: BeamIndex) -> &mut [Complex64] {
        let n = self.grid.len();
        let start = self.angles.flat(beam) * n;
        &mut self.values[start..start + n]
    }

    /// Frequency slice of one beam restricted to `[lo, hi]` grid indices.
    pub(crate) fn beam_range(&self, flat_beam: usize, lo: usize, hi: usize) -> &[Complex64] {
        let start = flat_beam * self.grid.len();
        &self.values[start + lo..=start + hi]
    }

    /// Slice holding every grid frequency inside `band` (both edges inclusive).
    pub fn extract_subband(&self, band: &SubBand) -> Result<FrequencyScanTensor> {
        let (lo, hi) = self.grid.band_indices(band)?;
        let grid = self.grid.restrict(band)?;
        let mut values = Vec::with_capacity(self.angles.n_beams() * grid.len());
        for b in 0..self.angles.n_beams() {
            values.extend_from_slice(self.beam_range(b, lo, hi));
        }
        Ok(Self {
            grid,
            angles: self.angles.clone(),
            values,
        })
    }
}

/// Over-the-air reference sweep used to divide out the system response.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTrace {
    grid: FrequencyGrid,
    values: Vec<Complex64>,
    distance_m: f64,
}

impl CalibrationTrace {
    pub const NOMINAL_DISTANCE_M: f64 = 56.45;

    pub fn new(grid: FrequencyGrid, values: Vec<Complex64>, distance_m: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(
                "calibration trace",
                format!("expected {} samples, got {}", grid.len(), values.len()),
            ));
        }
        if !(distance_m.is_finite() && distance_m > 0.0) {
            return Err(Error::invalid(
                "calibration trace",
                format!("distance must be positive, got {distance_m}"),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "calibration trace",
                format!("non-finite sample at index {i}"),
            ));
        }
        Ok(Self {
            grid,
            values,
            distance_m,
        })
    }

    /// Unit response: calibration leaves the measurement unchanged.
    pub fn identity(grid: FrequencyGrid, distance_m: f64) -> Result<Self> {
        Self::new(grid, vec![Complex64::new(1.0, 0.0); grid.len()], distance_m)
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn distance_m(&self) -> f64 {
        self.distance_m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LosClass {
    LoS,
    OLoS,
}

impl fmt::Display for LosClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LosClass::LoS => "LoS",
            LosClass::OLoS => "OLoS",
        })
    }
}

impl FromStr for LosClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "LoS" => Ok(LosClass::LoS),
            "OLoS" => Ok(LosClass::OLoS),
            other => Err(Error::invalid("los_class", format!("unknown class `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    pub rx_id: String,
    pub distance_m: f64,
    pub los_class: LosClass,
}

impl LinkGeometry {
    pub fn new(rx_id: impl Into<String>, distance_m: f64, los_class: LosClass) -> Result<Self> {
        if !(distance_m.is_finite() && distance_m > 0.0) {
            return Err(Error::invalid(
                "link geometry",
                format!("distance must be positive, got {distance_m}"),
            ));
        }
        Ok(Self {
            rx_id: rx_id.into(),
            distance_m,
            los_class,
        })
    }

    /// The eleven receiver positions of the reference campaign (Rx1 LoS, the rest OLoS).
    pub fn campaign_links() -> Vec<LinkGeometry> {
        const DISTANCES: [f64; 11] = [
            65.1, 62.1, 103.5, 139.1, 143.6, 162.8, 201.4, 214.9, 336.3, 404.9, 436.1,
        ];
        DISTANCES
            .iter()
            .enumerate()
            .map(|(i, &d)| LinkGeometry {
                rx_id: format!("Rx{}", i + 1),
                distance_m: d,
                los_class: if i == 0 { LosClass::LoS } else { LosClass::OLoS },
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> FrequencyScanTensor {
        let grid = FrequencyGrid::new(6e9, 14e9, 9).unwrap();
        let angles = AngularGrid::new(vec![-10.0, 10.0], vec![0.0, 90.0, 180.0], vec![0.0]).unwrap();
        let values = (0..6 * 9)
            .map(|i| Complex64::new(i as f64, -(i as f64)))
            .collect();
        FrequencyScanTensor::new(grid, angles, values).unwrap()
    }

    #[test]
    fn beam_layout_is_row_major() {
        let t = small();
        let b = t.beam(BeamIndex::new(1, 2, 0));
        assert_eq!(b[0].re, ((3 + 2) * 9) as f64);
        assert_eq!(b.len(), 9);
    }

    #[test]
    fn subband_full_span_is_identity() {
        let t = small();
        let s = t.extract_subband(&t.grid().span()).unwrap();
        assert_eq!(s, t);
    }

    #[test]
    fn subband_slices_each_beam() {
        let t = small();
        let s = t.extract_subband(&SubBand::ghz(7.0, 9.0).unwrap()).unwrap();
        assert_eq!(s.grid().len(), 3);
        assert_eq!(s.beam(BeamIndex::new(0, 1, 0)), &t.beam(BeamIndex::new(0, 1, 0))[1..4]);
        assert!(t.extract_subband(&SubBand::ghz(7.5, 9.0).unwrap()).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        let grid = FrequencyGrid::new(1.0, 2.0, 2).unwrap();
        let angles = AngularGrid::new(vec![0.0], vec![0.0], vec![0.0]).unwrap();
        let v = vec![Complex64::new(f64::NAN, 0.0), Complex64::new(0.0, 0.0)];
        assert!(FrequencyScanTensor::new(grid, angles, v).is_err());
    }

    #[test]
    fn campaign_links_table() {
        let links = LinkGeometry::campaign_links();
        assert_eq!(links.len(), 11);
        assert_eq!(links[4].rx_id, "Rx5");
        assert_eq!(links[4].distance_m, 143.6);
        assert_eq!(links[0].los_class, LosClass::LoS);
    }
}
