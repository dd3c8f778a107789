//! End-to-end processing of one calibrated link: per-beam PDPs, gating, Max-Dir and
//! omni construction, and condensed parameters for each requested band.
//!
//! Beams are streamed per azimuth pair so the directional PDPs of a full link never
//! need to be resident at once.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gain::AntennaElevationGainTable;
use crate::grid::{BeamIndex, SubBand};
use crate::metrics::{
    angular_spread, marginal_aps, path_loss_db, rmsds, CondensedLinkParams, Ddaps, DelaySpread, SpreadEnd,
};
use crate::pdp::{gate_mask_into, PdpEngine, PdpOptions, PdpScratch, PowerDelayProfile, Window};
use crate::synthesis::{MaxDirSelector, OmniAccumulator, OmniPdp};
use crate::tensor::{FrequencyScanTensor, LinkGeometry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessOptions {
    /// PDP options; `window` is the one used for delay spread.
    pub pdp: PdpOptions,
    /// Window for path gain, Max-Dir selection and the DDAPS.
    pub pl_window: Window,
    pub gains: AntennaElevationGainTable,
}

impl Default for ProcessOptions {
    fn default() -> Self {
        Self {
            pdp: PdpOptions::default(),
            pl_window: Window::Hann,
            gains: AntennaElevationGainTable::nominal(),
        }
    }
}

/// Everything computed for one link in one band.
#[derive(Debug, Clone)]
pub struct BandResult {
    pub params: CondensedLinkParams,
    pub maxdir_beam: BeamIndex,
    pub omni_pl: OmniPdp,
    pub maxdir_pl: PowerDelayProfile,
    /// Delay-spread-window profiles; equal to the PL ones when both windows agree.
    pub omni_ds: OmniPdp,
    pub maxdir_ds: PowerDelayProfile,
    pub ddaps: Ddaps,
}

struct BestBeam {
    beam: BeamIndex,
    pl: PowerDelayProfile,
    ds: Option<PowerDelayProfile>,
}

struct Fold {
    omni_pl: OmniAccumulator,
    omni_ds: Option<OmniAccumulator>,
    selector: MaxDirSelector,
    best: Option<BestBeam>,
    totals: Vec<f64>,
}

impl Fold {
    fn merge(mut self, other: Fold) -> Fold {
        self.omni_pl = self.omni_pl.merge(other.omni_pl);
        self.omni_ds = match (self.omni_ds, other.omni_ds) {
            (Some(a), Some(b)) => Some(a.merge(b)),
            (a, b) => a.or(b),
        };
        let selector = self.selector.merge(other.selector);
        let winner = selector.best().map(|(b, _)| b);
        self.best = [self.best, other.best]
            .into_iter()
            .flatten()
            .find(|b| Some(b.beam) == winner);
        self.selector = selector;
        for (a, b) in self.totals.iter_mut().zip(other.totals) {
            *a += b;
        }
        self
    }
}

struct Workspace {
    scratch_pl: PdpScratch,
    scratch_ds: Option<PdpScratch>,
    pl: Vec<PowerDelayProfile>,
    ds: Vec<PowerDelayProfile>,
    sum: Vec<f64>,
}

fn gated_profile(
    engine: &PdpEngine,
    h: &[num_complex::Complex64],
    scratch: &mut PdpScratch,
    out: &mut PowerDelayProfile,
    opts: &PdpOptions,
) {
    engine.powers_into(h, scratch, &mut out.powers);
    gate_mask_into(&out.powers, out.delay_spacing_s, opts, &mut out.kept_mask);
}

/// Processes one calibrated link tensor over one band.
pub fn process_link_band(
    tensor: &FrequencyScanTensor,
    geometry: &LinkGeometry,
    band: SubBand,
    opts: &ProcessOptions,
) -> Result<BandResult> {
    let grid = tensor.grid();
    let angles = tensor.angles();
    let (lo, hi) = grid.band_indices(&band)?;
    let n = hi - lo + 1;
    let df = grid.spacing_hz();
    let correction_db = opts.gains.correction_db(band.center_hz())?;

    let pl_opts = opts.pdp.with_window(opts.pl_window);
    let separate_ds = opts.pdp.window != opts.pl_window;
    let engine_pl = PdpEngine::new(n, pl_opts)?;
    let engine_ds = if separate_ds {
        Some(PdpEngine::new(n, opts.pdp)?)
    } else {
        None
    };
    let m = engine_pl.padded_len();
    let spacing = engine_pl.delay_spacing(df);
    let [nt, nr, nc] = angles.dims();

    let blank = |beam: BeamIndex| {
        let mut p = PowerDelayProfile::new(spacing, vec![0.0; m], band);
        p.beam = Some(beam);
        p.gated = true;
        p
    };

    let fold = (0..nt * nr)
        .into_par_iter()
        .fold(
            || {
                (
                    Workspace {
                        scratch_pl: engine_pl.scratch(),
                        scratch_ds: engine_ds.as_ref().map(PdpEngine::scratch),
                        pl: (0..nc).map(|c| blank(BeamIndex::new(0, 0, c))).collect(),
                        ds: if separate_ds {
                            (0..nc).map(|c| blank(BeamIndex::new(0, 0, c))).collect()
                        } else {
                            Vec::new()
                        },
                        sum: vec![0.0; m],
                    },
                    Fold {
                        omni_pl: OmniAccumulator::new(m),
                        omni_ds: separate_ds.then(|| OmniAccumulator::new(m)),
                        selector: MaxDirSelector::default(),
                        best: None,
                        totals: vec![0.0; angles.n_beams()],
                    },
                )
            },
            |(mut ws, mut acc), pair| {
                let (t, r) = (pair / nr, pair % nr);
                for c in 0..nc {
                    let beam = BeamIndex::new(t, r, c);
                    let flat = angles.flat(beam);
                    let h = tensor.beam_range(flat, lo, hi);
                    ws.pl[c].beam = Some(beam);
                    gated_profile(&engine_pl, h, &mut ws.scratch_pl, &mut ws.pl[c], &pl_opts);
                    if let (Some(engine), Some(scratch)) = (engine_ds.as_ref(), ws.scratch_ds.as_mut()) {
                        ws.ds[c].beam = Some(beam);
                        gated_profile(engine, h, scratch, &mut ws.ds[c], &opts.pdp);
                    }
                    let total = ws.pl[c].total_kept_power();
                    acc.totals[flat] = total;
                    if acc.selector.offer(beam, total) {
                        acc.best = Some(BestBeam {
                            beam,
                            pl: ws.pl[c].clone(),
                            ds: separate_ds.then(|| ws.ds[c].clone()),
                        });
                    }
                }
                acc.omni_pl.add_pair(&ws.pl, &mut ws.sum);
                if let Some(omni_ds) = acc.omni_ds.as_mut() {
                    omni_ds.add_pair(&ws.ds, &mut ws.sum);
                }
                (ws, acc)
            },
        )
        .map(|(_, acc)| acc)
        .reduce_with(Fold::merge)
        .ok_or_else(|| Error::invalid("link", "empty angular grid"))?;

    let best = fold
        .best
        .ok_or_else(|| Error::Outage(format!("link {} band {band}: every beam empty after gating", geometry.rx_id)))?;
    let omni_pl = fold.omni_pl.finish(spacing, band, correction_db);
    let omni_ds = match fold.omni_ds {
        Some(acc) => acc.finish(spacing, band, correction_db),
        None => omni_pl.clone(),
    };
    let maxdir_ds = best.ds.unwrap_or_else(|| best.pl.clone());
    let ddaps = Ddaps::from_beam_totals(angles.clone(), fold.totals)?;

    let spread = |end| -> Result<f64> {
        let (aps, axis) = marginal_aps(&ddaps, end);
        Ok(angular_spread(&aps, &axis, end)?.sigma)
    };
    let beam = best.beam;
    let params = CondensedLinkParams {
        rx_id: geometry.rx_id.clone(),
        distance_m: geometry.distance_m,
        band,
        band_label: band.label(grid),
        pl_omni_db: path_loss_db(&omni_pl.pdp)?,
        pl_maxdir_db: path_loss_db(&best.pl)?,
        rmsds_omni: DelaySpread::from_seconds(rmsds(&omni_ds.pdp)?),
        rmsds_maxdir: DelaySpread::from_seconds(rmsds(&maxdir_ds)?),
        as_tx_az: spread(SpreadEnd::TxAz)?,
        as_rx_az: spread(SpreadEnd::RxAz)?,
        as_rx_el: spread(SpreadEnd::RxEl)?,
        maxdir_beam_deg: [
            angles.tx_az_deg[beam.tx],
            angles.rx_az_deg[beam.rx],
            angles.rx_coel_deg[beam.coel],
        ],
        omni_correction_db: correction_db,
    };
    Ok(BandResult {
        params,
        maxdir_beam: beam,
        omni_pl,
        maxdir_pl: best.pl,
        omni_ds,
        maxdir_ds,
        ddaps,
    })
}

/// Processes one calibrated link over every band in `bands`.
pub fn process_link(
    tensor: &FrequencyScanTensor,
    geometry: &LinkGeometry,
    bands: &[SubBand],
    opts: &ProcessOptions,
) -> Result<Vec<BandResult>> {
    bands
        .iter()
        .map(|b| process_link_band(tensor, geometry, *b, opts))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{AngularGrid, FrequencyGrid};
    use crate::metrics::{compute_ddaps, path_gain};
    use crate::pdp::{apply_gate_threshold, compute_pdp};
    use crate::synthesis::{build_omni, select_max_dir, DirectionalPdpSet};
    use num_complex::Complex64;

    /// Streaming result must equal the set-based operations on a small random link.
    #[test]
    fn streaming_matches_set_operations() {
        let grid = FrequencyGrid::new(6e9, 6.1e9, 101).unwrap();
        let angles = AngularGrid::new(vec![-10.0, 0.0, 10.0], vec![0.0, 90.0, 180.0, 270.0], vec![-10.0, 0.0, 10.0]).unwrap();
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let values = (0..angles.n_beams() * grid.len())
            .map(|_| Complex64::new(next(), next()))
            .collect();
        let t = FrequencyScanTensor::new(grid, angles.clone(), values).unwrap();
        let geometry = LinkGeometry::new("RxT", 100.0, crate::tensor::LosClass::OLoS).unwrap();
        let band = grid.span();
        let opts = ProcessOptions {
            pdp: PdpOptions {
                oversample_factor: 4,
                gate_delay_s: 5e-6,
                ..Default::default()
            },
            pl_window: Window::Rectangular,
            gains: AntennaElevationGainTable::constant(2.0),
        };
        let res = process_link_band(&t, &geometry, band, &opts).unwrap();

        let build = |w: Window| {
            let o = opts.pdp.with_window(w);
            let pdps = angles
                .beams()
                .map(|b| {
                    let p = compute_pdp(t.beam(b), band, grid.spacing_hz(), &o).unwrap();
                    apply_gate_threshold(p, &o)
                })
                .collect();
            DirectionalPdpSet::new(angles.clone(), band, pdps).unwrap()
        };
        let set_pl = build(Window::Rectangular);
        let set_ds = build(Window::Hann);
        let (beam, maxdir) = select_max_dir(&set_pl).unwrap();
        assert_eq!(beam, res.maxdir_beam);
        assert_eq!(maxdir.powers, res.maxdir_pl.powers);
        assert_eq!(set_ds.get(beam).powers, res.maxdir_ds.powers);
        let omni = build_omni(&set_pl, &opts.gains).unwrap();
        assert_eq!(omni.pdp.powers, res.omni_pl.pdp.powers);
        assert_eq!(omni.pdp.kept_mask, res.omni_pl.pdp.kept_mask);
        let omni_ds = build_omni(&set_ds, &opts.gains).unwrap();
        assert_eq!(omni_ds.pdp.powers, res.omni_ds.pdp.powers);
        assert_eq!(compute_ddaps(&set_pl), res.ddaps);
        let pl = -10.0 * path_gain(&omni.pdp).unwrap().log10();
        assert_eq!(pl, res.params.pl_omni_db);
        assert_eq!(res.params.omni_correction_db, 2.0);
    }
}
