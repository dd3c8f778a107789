//! Strongest-beam (Max-Dir) selection and omni-directional PDP reconstruction.

use crate::error::{Error, Result};
use crate::gain::AntennaElevationGainTable;
use crate::grid::{AngularGrid, BeamIndex, SubBand};
use crate::pdp::PowerDelayProfile;

/// Gated directional PDPs of one link and band, one per beam triple.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalPdpSet {
    angles: AngularGrid,
    band: SubBand,
    pdps: Vec<PowerDelayProfile>,
}

impl DirectionalPdpSet {
    /// `pdps` are in row-major `[tx_az][rx_az][rx_coel]` order.
    pub fn new(angles: AngularGrid, band: SubBand, mut pdps: Vec<PowerDelayProfile>) -> Result<Self> {
        if pdps.len() != angles.n_beams() {
            return Err(Error::invalid(
                "directional set",
                format!("expected {} PDPs, got {}", angles.n_beams(), pdps.len()),
            ));
        }
        let (len, spacing) = (pdps[0].len(), pdps[0].delay_spacing_s);
        if pdps.iter().any(|p| p.len() != len || p.delay_spacing_s != spacing) {
            return Err(Error::invalid("directional set", "PDPs do not share one delay grid"));
        }
        for (i, p) in pdps.iter_mut().enumerate() {
            p.beam = Some(angles.unflat(i));
        }
        Ok(Self { angles, band, pdps })
    }

    pub fn angles(&self) -> &AngularGrid {
        &self.angles
    }

    pub fn band(&self) -> SubBand {
        self.band
    }

    pub fn pdps(&self) -> &[PowerDelayProfile] {
        &self.pdps
    }

    pub fn get(&self, beam: BeamIndex) -> &PowerDelayProfile {
        &self.pdps[self.angles.flat(beam)]
    }

    pub fn delay_len(&self) -> usize {
        self.pdps[0].len()
    }

    pub fn delay_spacing_s(&self) -> f64 {
        self.pdps[0].delay_spacing_s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmniPdp {
    pub pdp: PowerDelayProfile,
    /// Gain correction actually removed, in dB.
    pub correction_db: f64,
    pub band: SubBand,
}

/// Running arg-max of total kept power; ties go to the lexicographically smallest beam.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MaxDirSelector {
    best: Option<(BeamIndex, f64)>,
}

impl MaxDirSelector {
    fn beats(a: (BeamIndex, f64), b: (BeamIndex, f64)) -> bool {
        a.1 > b.1 || (a.1 == b.1 && a.0 < b.0)
    }

    /// Returns true when `beam` becomes the new best.
    pub fn offer(&mut self, beam: BeamIndex, total_power: f64) -> bool {
        if total_power <= 0.0 {
            return false;
        }
        match self.best {
            Some(b) if !Self::beats((beam, total_power), b) => false,
            _ => {
                self.best = Some((beam, total_power));
                true
            }
        }
    }

    pub fn merge(self, other: Self) -> Self {
        match (self.best, other.best) {
            (Some(a), Some(b)) => Self {
                best: Some(if Self::beats(b, a) { b } else { a }),
            },
            (a, b) => Self { best: a.or(b) },
        }
    }

    pub fn best(&self) -> Option<(BeamIndex, f64)> {
        self.best
    }
}

/// Per-bin maximum over azimuth pairs of elevation-summed kept power.
#[derive(Debug, Clone, PartialEq)]
pub struct OmniAccumulator {
    powers: Vec<f64>,
    mask: Vec<bool>,
}

impl OmniAccumulator {
    pub fn new(len: usize) -> Self {
        Self {
            powers: vec![0.0; len],
            mask: vec![false; len],
        }
    }

    /// Folds in one azimuth pair given the gated PDPs of its co-elevations.
    pub fn add_pair<'a>(&mut self, elevation_pdps: impl IntoIterator<Item = &'a PowerDelayProfile>, sum: &mut [f64]) {
        sum.fill(0.0);
        for pdp in elevation_pdps {
            for (k, s) in sum.iter_mut().enumerate() {
                if pdp.kept_mask[k] {
                    *s += pdp.powers[k];
                    self.mask[k] = true;
                }
            }
        }
        for (o, s) in self.powers.iter_mut().zip(sum.iter()) {
            if *s > *o {
                *o = *s;
            }
        }
    }

    pub fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.powers.iter_mut().zip(other.powers) {
            *a = a.max(b);
        }
        for (a, b) in self.mask.iter_mut().zip(other.mask) {
            *a |= b;
        }
        self
    }

    /// Applies the gain correction (subtracted in dB) and wraps the result.
    pub fn finish(self, delay_spacing_s: f64, band: SubBand, correction_db: f64) -> OmniPdp {
        let scale = 10f64.powf(-correction_db / 10.0);
        let powers = self.powers.into_iter().map(|p| p * scale).collect();
        OmniPdp {
            pdp: PowerDelayProfile {
                delay_spacing_s,
                powers,
                band,
                beam: None,
                gated: true,
                kept_mask: self.mask,
            },
            correction_db,
            band,
        }
    }
}

/// Beam with the largest total kept power, and its PDP.
pub fn select_max_dir(set: &DirectionalPdpSet) -> Result<(BeamIndex, &PowerDelayProfile)> {
    let mut sel = MaxDirSelector::default();
    for (i, pdp) in set.pdps.iter().enumerate() {
        sel.offer(set.angles.unflat(i), pdp.total_kept_power());
    }
    let (beam, _) = sel
        .best()
        .ok_or_else(|| Error::Outage(format!("every beam is empty after gating in {}", set.band)))?;
    Ok((beam, set.get(beam)))
}

pub fn build_omni(set: &DirectionalPdpSet, gains: &AntennaElevationGainTable) -> Result<OmniPdp> {
    let correction_db = gains.correction_db(set.band.center_hz())?;
    let [nt, nr, nc] = set.angles.dims();
    let mut acc = OmniAccumulator::new(set.delay_len());
    let mut sum = vec![0.0; set.delay_len()];
    for t in 0..nt {
        for r in 0..nr {
            acc.add_pair((0..nc).map(|c| set.get(BeamIndex::new(t, r, c))), &mut sum);
        }
    }
    Ok(acc.finish(set.delay_spacing_s(), set.band, correction_db))
}
