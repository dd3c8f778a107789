//! Synthetic channels: multipath sampling from fitted model parameters, rendering
//! through horn patterns into scan tensors, and the Friis free-space reference.
//!
//! Link `i` of a run seeded with `s` draws from `ChaCha8Rng::seed_from_u64(s)`
//! switched to stream `i`, so links can be generated independently and in any order.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{AngularGrid, FrequencyGrid};
use crate::metrics::to_db_seconds;
use crate::tensor::{FrequencyScanTensor, LinkGeometry};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Free-space path loss between isotropic antennas, in dB.
pub fn friis_pl(distance_m: f64, frequency_hz: f64) -> f64 {
    20.0 * (4.0 * PI * distance_m * frequency_hz / SPEED_OF_LIGHT).log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticMpc {
    pub delay_s: f64,
    /// Linear power.
    pub power: f64,
    pub tx_az_deg: f64,
    pub rx_az_deg: f64,
    pub rx_coel_deg: f64,
    pub phase_rad: f64,
}

/// Gaussian-beam horn: power falls off as `10^(-0.3 (2Δ/HPBW)^2)`, i.e. −3 dB at HPBW/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HornPatternModel {
    pub hpbw_az_deg: f64,
    pub hpbw_el_deg: f64,
    pub peak_gain_db: f64,
}

impl Default for HornPatternModel {
    fn default() -> Self {
        Self {
            hpbw_az_deg: 30.0,
            hpbw_el_deg: 30.0,
            peak_gain_db: 0.0,
        }
    }
}

impl HornPatternModel {
    fn lobe(offset_deg: f64, hpbw_deg: f64) -> f64 {
        let x = 2.0 * offset_deg / hpbw_deg;
        10f64.powf(-0.3 * x * x / 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PatternModel {
    /// Unit gain exactly on boresight, zero elsewhere.
    Idealized,
    Gaussian(HornPatternModel),
}

/// Signed azimuth difference wrapped to (−180°, 180°].
fn wrap_deg(d: f64) -> f64 {
    let r = d.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

const BORESIGHT_TOL_DEG: f64 = 1e-9;

impl PatternModel {
    /// Tx amplitude gain at an azimuth offset.
    fn tx_gain(&self, d_az: f64) -> f64 {
        let d_az = wrap_deg(d_az);
        match self {
            PatternModel::Idealized => (d_az.abs() < BORESIGHT_TOL_DEG) as u8 as f64,
            PatternModel::Gaussian(h) => 10f64.powf(h.peak_gain_db / 20.0) * HornPatternModel::lobe(d_az, h.hpbw_az_deg),
        }
    }

    /// Rx amplitude gain at azimuth and co-elevation offsets.
    fn rx_gain(&self, d_az: f64, d_el: f64) -> f64 {
        let d_az = wrap_deg(d_az);
        match self {
            PatternModel::Idealized => {
                (d_az.abs() < BORESIGHT_TOL_DEG && d_el.abs() < BORESIGHT_TOL_DEG) as u8 as f64
            }
            PatternModel::Gaussian(h) => {
                10f64.powf(h.peak_gain_db / 20.0)
                    * HornPatternModel::lobe(d_az, h.hpbw_az_deg)
                    * HornPatternModel::lobe(d_el, h.hpbw_el_deg)
            }
        }
    }
}

/// Amplitude contributions below this are dropped when rendering.
const RENDER_FLOOR: f64 = 1e-9;

/// Sum of MPC phasors seen through the Tx/Rx patterns at every scan position.
pub fn render_tensor(
    mpcs: &[SyntheticMpc],
    grid: &FrequencyGrid,
    angles: &AngularGrid,
    pattern: &PatternModel,
) -> FrequencyScanTensor {
    let n = grid.len();
    let phasors: Vec<Vec<Complex64>> = mpcs
        .iter()
        .map(|m| {
            let a = m.power.sqrt();
            grid.frequencies()
                .map(|f| Complex64::from_polar(a, m.phase_rad - 2.0 * PI * f * m.delay_s))
                .collect()
        })
        .collect();
    let mut tensor = FrequencyScanTensor::zeros(*grid, angles.clone());
    for beam in angles.beams() {
        let (tx, rx, el) = (
            angles.tx_az_deg[beam.tx],
            angles.rx_az_deg[beam.rx],
            angles.rx_coel_deg[beam.coel],
        );
        let out = tensor.beam_mut(beam);
        for (m, ph) in mpcs.iter().zip(&phasors) {
            let g = pattern.tx_gain(tx - m.tx_az_deg) * pattern.rx_gain(rx - m.rx_az_deg, el - m.rx_coel_deg);
            if g < RENDER_FLOOR {
                continue;
            }
            for (o, p) in out.iter_mut().zip(ph) {
                *o += p * g;
            }
        }
        debug_assert_eq!(out.len(), n);
    }
    tensor
}

/// Generative parameters for synthetic links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    pub alpha: f64,
    pub beta: f64,
    pub sigma_shadow: f64,
    /// RMS delay spread distribution in dB-seconds.
    pub rmsds_mu: f64,
    pub rmsds_sigma: f64,
    /// Target Fleury spreads per end, in [0, 1).
    pub as_tx_az: f64,
    pub as_rx_az: f64,
    pub as_rx_el: f64,
    /// Delay of the first arrival.
    pub first_delay_s: f64,
    /// No tap may lie beyond this delay.
    pub max_delay_s: f64,
    pub seed: u64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            alpha: 21.76,
            beta: 4.14,
            sigma_shadow: 3.22,
            rmsds_mu: -84.54,
            rmsds_sigma: 8.59,
            as_tx_az: 0.20,
            as_rx_az: 0.20,
            as_rx_el: 0.11,
            first_delay_s: 50e-9,
            max_delay_s: 966.67e-9,
            seed: 1,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.alpha,
            self.beta,
            self.sigma_shadow,
            self.rmsds_mu,
            self.rmsds_sigma,
            self.first_delay_s,
            self.max_delay_s,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("model params", "non-finite value"));
        }
        if self.sigma_shadow < 0.0 || self.rmsds_sigma < 0.0 {
            return Err(Error::invalid("model params", "standard deviations must be >= 0"));
        }
        for (name, v) in [("as_tx_az", self.as_tx_az), ("as_rx_az", self.as_rx_az), ("as_rx_el", self.as_rx_el)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::invalid("model params", format!("{name} = {v} outside [0, 1)")));
            }
        }
        if self.first_delay_s < 0.0 || self.max_delay_s <= self.first_delay_s {
            return Err(Error::invalid("model params", "need 0 <= first_delay < max_delay"));
        }
        Ok(())
    }

    /// Deterministic generator for link `link_index`.
    pub fn link_rng(&self, link_index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(link_index);
        rng
    }
}

/// One sampled link together with the quantities the sampler realized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticLink {
    pub geometry: LinkGeometry,
    pub mpcs: Vec<SyntheticMpc>,
    /// Path loss implied by the total MPC power.
    pub pl_db: f64,
    pub shadowing_db: f64,
    /// Delay spread of the taps, evaluated directly from their moments.
    pub rmsds_s: f64,
    /// `None` when the spread is zero (single tap).
    pub rmsds_dbs: Option<f64>,
    pub as_tx_az: f64,
    pub as_rx_az: f64,
    pub as_rx_el: f64,
}

/// Delay spread of discrete taps.
pub fn tap_rmsds(delays: &[f64], powers: &[f64]) -> f64 {
    let p0: f64 = powers.iter().sum();
    let m1 = delays.iter().zip(powers).map(|(t, p)| t * p).sum::<f64>() / p0;
    let m2 = delays.iter().zip(powers).map(|(t, p)| (t - m1).powi(2) * p).sum::<f64>() / p0;
    m2.max(0.0).sqrt()
}

/// Two clusters on one axis realizing a Fleury spread. Returns the grid indices of
/// the strong and weak cluster and the weak cluster's power fraction.
fn place_clusters(target: f64, axis: &[f64], rng: &mut ChaCha8Rng, name: &str) -> Result<(usize, usize, f64)> {
    if target <= 1e-12 {
        let i = rng.random_range(0..axis.len());
        return Ok((i, i, 0.0));
    }
    // |e^{ja} - e^{jb}|^2 = 4 sin^2((a-b)/2); the spread of a two-point APS with
    // weak fraction q is sigma^2 = 4 q (1-q) sin^2(D/2).
    let mut best: Option<f64> = None;
    let mut pairs = Vec::new();
    for i in 0..axis.len() {
        for j in 0..axis.len() {
            if i == j {
                continue;
            }
            let s = ((axis[i] - axis[j]).to_radians() / 2.0).sin().abs();
            if s + 1e-12 < target {
                continue;
            }
            match best {
                Some(b) if s > b + 1e-12 => {}
                Some(b) if (s - b).abs() <= 1e-12 => pairs.push((i, j)),
                _ => {
                    best = Some(s);
                    pairs.clear();
                    pairs.push((i, j));
                }
            }
        }
    }
    let s = best.ok_or_else(|| {
        Error::Unrealizable(format!(
            "{name} angular spread {target} exceeds what two clusters on the grid can produce"
        ))
    })?;
    let (i, j) = pairs[rng.random_range(0..pairs.len())];
    let k = (target * target / (4.0 * s * s)).min(0.25);
    let q = 0.5 * (1.0 - (1.0 - 4.0 * k).max(0.0).sqrt());
    Ok((i, j, q))
}

const MAX_REJECTIONS: usize = 1000;
/// Strongest-to-weakest tap ratio cap, in dB.
const TAP_DYNAMIC_RANGE_DB: f64 = 20.0;

/// Samples MPCs for one link: total power from the power law plus shadowing, an
/// exponential tap profile scaled to a drawn RMS delay spread, and per-end two-cluster
/// angle placement meeting the angular-spread targets exactly.
///
/// With a single tap the delay spread is necessarily zero and no delay-spread draw is made.
pub fn sample_link(
    params: &ModelParams,
    geometry: &LinkGeometry,
    angles: &AngularGrid,
    n_mpcs: usize,
    link_index: u64,
) -> Result<SyntheticLink> {
    params.validate()?;
    if n_mpcs < 1 {
        return Err(Error::invalid("sample_link", "need at least one MPC"));
    }
    let mut rng = params.link_rng(link_index);

    let z: f64 = rng.sample(StandardNormal);
    let shadowing_db = params.sigma_shadow * z;
    let pl_db = params.alpha + 10.0 * params.beta * geometry.distance_m.log10() + shadowing_db;
    let total_power = 10f64.powf(-pl_db / 10.0);

    // Tap shape: exponentially spaced excess delays, exponentially decaying powers.
    let mut excess = vec![0.0; n_mpcs];
    for l in 1..n_mpcs {
        let step: f64 = rng.sample(Exp1);
        excess[l] = excess[l - 1] + step;
    }
    let e_max = excess[n_mpcs - 1];
    let rate = if e_max > 0.0 {
        (TAP_DYNAMIC_RANGE_DB / 10.0 * std::f64::consts::LN_10 / e_max).min(1.0)
    } else {
        1.0
    };
    let shape: Vec<f64> = excess.iter().map(|e| (-rate * e).exp()).collect();
    let shape_sum: f64 = shape.iter().sum();
    let powers: Vec<f64> = shape.iter().map(|p| p / shape_sum * total_power).collect();

    let delays: Vec<f64> = if n_mpcs == 1 {
        vec![params.first_delay_s]
    } else {
        let unit = tap_rmsds(&excess, &shape);
        let mut scaled = None;
        for _ in 0..MAX_REJECTIONS {
            let zd: f64 = rng.sample(StandardNormal);
            let target = 10f64.powf((params.rmsds_mu + params.rmsds_sigma * zd) / 10.0);
            let scale = target / unit;
            if params.first_delay_s + e_max * scale <= params.max_delay_s {
                scaled = Some(excess.iter().map(|e| params.first_delay_s + e * scale).collect());
                break;
            }
        }
        scaled.ok_or_else(|| {
            Error::Unrealizable(format!(
                "no delay-spread draw fit under the {} s delay bound after {MAX_REJECTIONS} tries",
                params.max_delay_s
            ))
        })?
    };
    let rmsds_s = tap_rmsds(&delays, &powers);

    let tx = place_clusters(params.as_tx_az, &angles.tx_az_deg, &mut rng, "tx_az")?;
    let rx = place_clusters(params.as_rx_az, &angles.rx_az_deg, &mut rng, "rx_az")?;
    let el = place_clusters(params.as_rx_el, &angles.rx_coel_deg, &mut rng, "rx_el")?;
    let split = |(a, b, q): (usize, usize, f64)| -> Vec<(usize, f64)> {
        if q > 0.0 {
            vec![(a, 1.0 - q), (b, q)]
        } else {
            vec![(a, 1.0)]
        }
    };
    let (tx_parts, rx_parts, el_parts) = (split(tx), split(rx), split(el));

    let mut mpcs = Vec::with_capacity(n_mpcs * tx_parts.len() * rx_parts.len() * el_parts.len());
    for (tau, p) in delays.iter().zip(&powers) {
        for &(ti, tf) in &tx_parts {
            for &(ri, rf) in &rx_parts {
                for &(ei, ef) in &el_parts {
                    mpcs.push(SyntheticMpc {
                        delay_s: *tau,
                        power: p * tf * rf * ef,
                        tx_az_deg: angles.tx_az_deg[ti],
                        rx_az_deg: angles.rx_az_deg[ri],
                        rx_coel_deg: angles.rx_coel_deg[ei],
                        phase_rad: rng.random_range(0.0..2.0 * PI),
                    });
                }
            }
        }
    }

    Ok(SyntheticLink {
        geometry: geometry.clone(),
        mpcs,
        pl_db,
        shadowing_db,
        rmsds_s,
        rmsds_dbs: (rmsds_s > 0.0).then(|| to_db_seconds(rmsds_s)),
        as_tx_az: params.as_tx_az,
        as_rx_az: params.as_rx_az,
        as_rx_el: params.as_rx_el,
    })
}

/// Path loss implied by a list of MPCs, in dB.
pub fn mpc_path_loss_db(mpcs: &[SyntheticMpc]) -> f64 {
    -10.0 * mpcs.iter().map(|m| m.power).sum::<f64>().log10()
}
