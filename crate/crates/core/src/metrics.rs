//! Condensed channel parameters: path gain, RMS delay spread, DDAPS, angular spread.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{AngularGrid, SubBand};
use crate::pdp::PowerDelayProfile;
use crate::synthesis::DirectionalPdpSet;

/// Sum of kept power. Errors with [`Error::Outage`] when nothing survives gating.
pub fn path_gain(pdp: &PowerDelayProfile) -> Result<f64> {
    let g = pdp.total_kept_power();
    if !(g > 0.0) {
        return Err(Error::Outage("path gain of a fully gated PDP".into()));
    }
    Ok(g)
}

pub fn path_loss_db(pdp: &PowerDelayProfile) -> Result<f64> {
    Ok(-10.0 * path_gain(pdp)?.log10())
}

/// RMS delay spread in seconds over the kept bins.
pub fn rmsds(pdp: &PowerDelayProfile) -> Result<f64> {
    let (mut p0, mut p1, mut p2) = (0.0, 0.0, 0.0);
    // Moments about the first kept delay keep the subtraction well conditioned.
    let origin = pdp.kept_mask.iter().position(|&k| k).unwrap_or(0);
    for (k, p) in pdp.kept_powers().enumerate() {
        if p > 0.0 {
            let t = (k as f64 - origin as f64) * pdp.delay_spacing_s;
            p0 += p;
            p1 += p * t;
            p2 += p * t * t;
        }
    }
    if !(p0 > 0.0) {
        return Err(Error::Outage("delay spread of a fully gated PDP".into()));
    }
    let mean = p1 / p0;
    Ok((p2 / p0 - mean * mean).max(0.0).sqrt())
}

/// 10·log10(seconds / 1 s).
pub fn to_db_seconds(seconds: f64) -> f64 {
    10.0 * seconds.log10()
}

/// Delay-integrated power per beam triple, and its co-elevation sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ddaps {
    pub angles: AngularGrid,
    /// `[tx_az][rx_az][rx_coel]`, row-major.
    pub values_full: Vec<f64>,
    /// `[tx_az][rx_az]`, row-major.
    pub values_az: Vec<f64>,
}

impl Ddaps {
    /// Builds from per-beam totals given in flat beam order.
    pub fn from_beam_totals(angles: AngularGrid, values_full: Vec<f64>) -> Result<Self> {
        if values_full.len() != angles.n_beams() {
            return Err(Error::invalid("ddaps", "beam count does not match the angular grid"));
        }
        let nc = angles.dims()[2];
        let values_az = values_full.chunks_exact(nc).map(|c| c.iter().sum()).collect();
        Ok(Self {
            angles,
            values_full,
            values_az,
        })
    }

    pub fn total(&self) -> f64 {
        self.values_full.iter().sum()
    }
}

pub fn compute_ddaps(set: &DirectionalPdpSet) -> Ddaps {
    let totals = set.pdps().iter().map(PowerDelayProfile::total_kept_power).collect();
    Ddaps::from_beam_totals(set.angles().clone(), totals).expect("set matches its grid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpreadEnd {
    TxAz,
    RxAz,
    RxEl,
}

impl fmt::Display for SpreadEnd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpreadEnd::TxAz => "tx_az",
            SpreadEnd::RxAz => "rx_az",
            SpreadEnd::RxEl => "rx_el",
        })
    }
}

/// Angular power spectrum of one end, paired with its angles in degrees.
pub fn marginal_aps(d: &Ddaps, end: SpreadEnd) -> (Vec<f64>, Vec<f64>) {
    let [nt, nr, nc] = d.angles.dims();
    match end {
        SpreadEnd::TxAz => {
            let aps = d.values_az.chunks_exact(nr).map(|row| row.iter().sum()).collect();
            (aps, d.angles.tx_az_deg.clone())
        }
        SpreadEnd::RxAz => {
            let mut aps = vec![0.0; nr];
            for row in d.values_az.chunks_exact(nr) {
                aps.iter_mut().zip(row).for_each(|(a, v)| *a += v);
            }
            (aps, d.angles.rx_az_deg.clone())
        }
        SpreadEnd::RxEl => {
            let mut aps = vec![0.0; nc];
            for cell in d.values_full.chunks_exact(nc) {
                aps.iter_mut().zip(cell).for_each(|(a, v)| *a += v);
            }
            debug_assert_eq!(d.values_full.len(), nt * nr * nc);
            (aps, d.angles.rx_coel_deg.clone())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularSpreadResult {
    pub sigma: f64,
    pub mu_phi: Complex64,
    pub end: SpreadEnd,
}

/// Fleury spread over `angles_deg`; both forms of the spread are evaluated and
/// required to agree.
pub fn angular_spread(aps: &[f64], angles_deg: &[f64], end: SpreadEnd) -> Result<AngularSpreadResult> {
    if aps.len() != angles_deg.len() {
        return Err(Error::invalid("angular spread", "APS and angle lists differ in length"));
    }
    if aps.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return Err(Error::invalid("angular spread", "APS must be finite and non-negative"));
    }
    let total: f64 = aps.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Outage(format!("{end} angular spread of an empty APS")));
    }
    let phasors: Vec<Complex64> = angles_deg
        .iter()
        .map(|a| Complex64::from_polar(1.0, a.to_radians()))
        .collect();
    let mu_phi = phasors.iter().zip(aps).map(|(e, p)| e * p).sum::<Complex64>() / total;
    let var: f64 = phasors
        .iter()
        .zip(aps)
        .map(|(e, p)| (e - mu_phi).norm_sqr() * p)
        .sum::<f64>()
        / total;
    let sigma = var.max(0.0).sqrt().min(1.0);
    let via_mean = (1.0 - mu_phi.norm_sqr()).max(0.0);
    debug_assert!(
        (var - via_mean).abs() < 1e-9,
        "Fleury forms disagree: {var} vs {via_mean}"
    );
    Ok(AngularSpreadResult { sigma, mu_phi, end })
}

/// Pair of linear and dB-second delay spreads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelaySpread {
    pub seconds: f64,
    pub db_seconds: f64,
}

impl DelaySpread {
    pub fn from_seconds(seconds: f64) -> Self {
        Self {
            seconds,
            db_seconds: to_db_seconds(seconds),
        }
    }
}

/// Condensed parameters for one link and band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondensedLinkParams {
    pub rx_id: String,
    pub distance_m: f64,
    pub band: SubBand,
    pub band_label: String,
    pub pl_omni_db: f64,
    pub pl_maxdir_db: f64,
    pub rmsds_omni: DelaySpread,
    pub rmsds_maxdir: DelaySpread,
    pub as_tx_az: f64,
    pub as_rx_az: f64,
    pub as_rx_el: f64,
    /// Max-Dir beam angles in degrees (tx az, rx az, rx co-elevation).
    pub maxdir_beam_deg: [f64; 3],
    pub omni_correction_db: f64,
}
