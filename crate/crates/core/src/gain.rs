//! Extra peak gain of the elevation-summed (virtual omni) pattern over the horn.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntennaElevationGainTable {
    entries: Vec<(f64, f64)>,
}

impl AntennaElevationGainTable {
    /// Entries are `(frequency Hz, correction dB)`, strictly increasing in frequency.
    pub fn new(entries: Vec<(f64, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("gain table", "no entries"));
        }
        if let Some((f, c)) = entries.iter().find(|(f, c)| !(f.is_finite() && c.is_finite())) {
            return Err(Error::invalid("gain table", format!("non-finite entry ({f}, {c})")));
        }
        if entries.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::invalid("gain table", "frequencies must be strictly increasing"));
        }
        Ok(Self { entries })
    }

    /// 3.7 dB at 6.5 GHz, 1.57 dB at 13.5 GHz (five co-elevations).
    pub fn nominal() -> Self {
        Self {
            entries: vec![(6.5e9, 3.7), (13.5e9, 1.57)],
        }
    }

    /// Flat table with the same correction everywhere.
    pub fn constant(correction_db: f64) -> Self {
        Self {
            entries: vec![(0.0, correction_db), (f64::MAX, correction_db)],
        }
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }

    /// Correction in dB, linear in dB versus frequency between anchors. Refuses to extrapolate.
    pub fn correction_db(&self, f_hz: f64) -> Result<f64> {
        let (first, last) = (self.entries[0], self.entries[self.entries.len() - 1]);
        if f_hz < first.0 || f_hz > last.0 {
            return Err(Error::invalid(
                "gain table",
                format!("{f_hz} Hz outside table range [{}, {}] Hz", first.0, last.0),
            ));
        }
        let i = self.entries.partition_point(|(f, _)| *f <= f_hz);
        if i == self.entries.len() {
            return Ok(last.1);
        }
        let (f0, c0) = self.entries[i - 1];
        let (f1, c1) = self.entries[i];
        if f_hz == f0 {
            return Ok(c0);
        }
        Ok(c0 + (c1 - c0) * (f_hz - f0) / (f1 - f0))
    }

    /// Reads a `freq_hz,correction_db` CSV (header required).
    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bad = |reason: String| Error::Format {
            file: path.to_path_buf(),
            reason,
        };
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next().map(|h| h.replace(' ', "")) {
            Some(h) if h == "freq_hz,correction_db" => {}
            other => return Err(bad(format!("expected header `freq_hz,correction_db`, got {other:?}"))),
        }
        let mut entries = Vec::new();
        for (n, line) in lines.enumerate() {
            let (f, c) = line
                .split_once(',')
                .ok_or_else(|| bad(format!("row {}: expected two fields", n + 1)))?;
            let parse = |v: &str| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| bad(format!("row {}: bad number `{}`", n + 1, v.trim())))
            };
            entries.push((parse(f)?, parse(c)?));
        }
        Self::new(entries).map_err(|e| bad(e.to_string()))
    }
}

impl Default for AntennaElevationGainTable {
    fn default() -> Self {
        Self::nominal()
    }
}
