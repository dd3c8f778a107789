use std::f64::consts::TAU;

use midband_core::gain::AntennaElevationGainTable;
use midband_core::synth::{mpc_path_loss_db, tap_rmsds};
use midband_core::{
    calibrate, compute_pdp, fit_power_law, process_link_band, render_tensor, sample_link, AngularGrid, BeamIndex,
    CalibrationTrace, DistanceWeighting, FrequencyGrid, LinkGeometry, LosClass, ModelParams, PatternModel,
    PdpOptions, ProcessOptions, SyntheticMpc,
};
use proptest::prelude::*;

fn compact() -> AngularGrid {
    AngularGrid::new(
        (-60..=60).step_by(30).map(f64::from).collect(),
        (0..360).step_by(30).map(f64::from).collect(),
        vec![-20.0, 0.0, 20.0],
    )
    .unwrap()
}

fn lossless_opts() -> ProcessOptions {
    ProcessOptions {
        gains: AntennaElevationGainTable::constant(0.0),
        ..ProcessOptions::default()
    }
}

fn mpc(delay_s: f64, power: f64, tx: f64, rx: f64, el: f64, phase: f64) -> SyntheticMpc {
    SyntheticMpc {
        delay_s,
        power,
        tx_az_deg: tx,
        rx_az_deg: rx,
        rx_coel_deg: el,
        phase_rad: phase,
    }
}

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[test]
fn same_seed_same_link() {
    let p = ModelParams::default();
    let g = LinkGeometry::new("Rx3", 100.0, LosClass::OLoS).unwrap();
    let a = sample_link(&p, &g, &compact(), 5, 2).unwrap();
    let b = sample_link(&p, &g, &compact(), 5, 2).unwrap();
    assert_eq!(a, b);
    let c = sample_link(&p, &g, &compact(), 5, 3).unwrap();
    assert_ne!(a.mpcs, c.mpcs);
}

#[test]
fn tap_delay_spread_matches_direct_moments() {
    let p = ModelParams::default();
    let angles = compact();
    for i in 0..50 {
        let g = LinkGeometry::new(format!("L{i}"), 80.0, LosClass::OLoS).unwrap();
        let link = sample_link(&p, &g, &angles, 6, i).unwrap();
        let delays: Vec<f64> = link.mpcs.iter().map(|m| m.delay_s).collect();
        let powers: Vec<f64> = link.mpcs.iter().map(|m| m.power).collect();
        let p0: f64 = powers.iter().sum();
        let m1: f64 = delays.iter().zip(&powers).map(|(t, p)| t * p).sum::<f64>() / p0;
        let m2: f64 = delays.iter().zip(&powers).map(|(t, p)| (t - m1).powi(2) * p).sum::<f64>() / p0;
        let direct = m2.sqrt();
        assert!((direct / link.rmsds_s - 1.0).abs() < 1e-3, "{direct} vs {}", link.rmsds_s);
        assert!((tap_rmsds(&delays, &powers) / link.rmsds_s - 1.0).abs() < 1e-9);
        assert!(delays.iter().all(|&t| t <= p.max_delay_s));
    }
}

#[test]
fn zero_shadowing_single_tap_gives_law_exactly() {
    let p = ModelParams {
        sigma_shadow: 0.0,
        ..ModelParams::default()
    };
    for (i, g) in LinkGeometry::campaign_links().iter().enumerate() {
        let link = sample_link(&p, g, &compact(), 1, i as u64).unwrap();
        let law = p.alpha + 10.0 * p.beta * g.distance_m.log10();
        assert!((mpc_path_loss_db(&link.mpcs) - law).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rendering_superposes(
        a in prop::collection::vec((1e-9..2e-7f64, 1e-6..1.0f64, -60.0..60.0f64, 0.0..360.0f64, -20.0..20.0f64, 0.0..TAU), 1..4),
        b in prop::collection::vec((1e-9..2e-7f64, 1e-6..1.0f64, -60.0..60.0f64, 0.0..360.0f64, -20.0..20.0f64, 0.0..TAU), 1..4),
    ) {
        let to_mpcs = |v: &[(f64, f64, f64, f64, f64, f64)]| -> Vec<SyntheticMpc> {
            v.iter().map(|&(t, p, tx, rx, el, ph)| mpc(t, p, tx, rx, el, ph)).collect()
        };
        let (ma, mb) = (to_mpcs(&a), to_mpcs(&b));
        let both: Vec<SyntheticMpc> = ma.iter().chain(&mb).copied().collect();
        let grid = FrequencyGrid::new(6e9, 7e9, 21).unwrap();
        let angles = compact();
        let pattern = PatternModel::Gaussian(Default::default());
        let ra = render_tensor(&ma, &grid, &angles, &pattern);
        let rb = render_tensor(&mb, &grid, &angles, &pattern);
        let rab = render_tensor(&both, &grid, &angles, &pattern);
        for ((x, y), z) in ra.values().iter().zip(rb.values()).zip(rab.values()) {
            prop_assert!((x + y - z).norm() <= 1e-9 * (1.0 + z.norm()));
        }
    }
}

#[test]
fn single_boresight_mpc_stays_in_its_beam() {
    let grid = FrequencyGrid::new(6e9, 7e9, 1001).unwrap();
    let angles = compact();
    let m = mpc(120e-9, 2.5e-9, 30.0, 90.0, 0.0, 0.4);
    let t = render_tensor(&[m], &grid, &angles, &PatternModel::Idealized);
    let hit = BeamIndex::new(3, 3, 1);
    for beam in angles.beams() {
        let energy: f64 = t.beam(beam).iter().map(|v| v.norm_sqr()).sum();
        assert_eq!(energy > 0.0, beam == hit, "{beam:?}");
    }
    let pdp = compute_pdp(t.beam(hit), grid.span(), grid.spacing_hz(), &PdpOptions::default()).unwrap();
    let argmax = (0..pdp.len()).max_by(|&a, &b| pdp.powers[a].total_cmp(&pdp.powers[b])).unwrap();
    assert!((pdp.delay(argmax) - m.delay_s).abs() <= pdp.delay_spacing_s);
    let gated = midband_core::apply_gate_threshold(pdp, &PdpOptions::default());
    assert!((db(gated.total_kept_power()) - db(m.power)).abs() < 0.01);
}

#[test]
fn two_mpcs_in_disjoint_beams_give_two_ddaps_cells() {
    let grid = FrequencyGrid::new(6e9, 14e9, 2001).unwrap();
    let angles = compact();
    let mpcs = [
        mpc(60e-9, 4e-10, -30.0, 60.0, 20.0, 1.0),
        mpc(240e-9, 1e-11, 60.0, 300.0, -20.0, 2.0),
    ];
    let tensor = render_tensor(&mpcs, &grid, &angles, &PatternModel::Idealized);
    let geom = LinkGeometry::new("Rx1", 65.1, LosClass::LoS).unwrap();
    let r = process_link_band(&tensor, &geom, grid.span(), &lossless_opts()).unwrap();
    let nonzero: Vec<(usize, f64)> = r
        .ddaps
        .values_full
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, v)| *v > 0.0)
        .collect();
    assert_eq!(nonzero.len(), 2);
    let cell = |tx, rx, el| angles.flat(BeamIndex::new(tx, rx, el));
    assert_eq!(nonzero[0].0, cell(1, 2, 2));
    assert_eq!(nonzero[1].0, cell(4, 10, 0));
    assert!((db(nonzero[0].1) - db(mpcs[0].power)).abs() < 0.01);
    assert!((db(nonzero[1].1) - db(mpcs[1].power)).abs() < 0.01);
}

/// render -> calibrate (identity) -> PDP -> condense: per-MPC delay within one bin,
/// per-MPC power within 0.01 dB, angular spreads within 0.02 of their targets.
#[test]
fn noiseless_round_trip() {
    let grid = FrequencyGrid::new(6e9, 14e9, 2001).unwrap();
    let angles = compact();
    let p = ModelParams {
        sigma_shadow: 0.0,
        ..ModelParams::default()
    };
    let ota = CalibrationTrace::identity(grid, CalibrationTrace::NOMINAL_DISTANCE_M).unwrap();
    for (i, g) in LinkGeometry::campaign_links().iter().enumerate().take(4) {
        let link = sample_link(&p, g, &angles, 1, i as u64).unwrap();
        let tensor = calibrate(render_tensor(&link.mpcs, &grid, &angles, &PatternModel::Idealized), &ota).unwrap();
        let r = process_link_band(&tensor, g, grid.span(), &lossless_opts()).unwrap();
        for m in &link.mpcs {
            let beam = BeamIndex::new(
                angles.tx_az_deg.iter().position(|&a| a == m.tx_az_deg).unwrap(),
                angles.rx_az_deg.iter().position(|&a| a == m.rx_az_deg).unwrap(),
                angles.rx_coel_deg.iter().position(|&a| a == m.rx_coel_deg).unwrap(),
            );
            let got = r.ddaps.values_full[angles.flat(beam)];
            assert!((db(got) - db(m.power)).abs() < 0.01, "{} vs {}", db(got), db(m.power));
            let h = tensor.beam(beam);
            let pdp = compute_pdp(h, grid.span(), grid.spacing_hz(), &PdpOptions::default()).unwrap();
            let argmax = (0..pdp.len()).max_by(|&a, &b| pdp.powers[a].total_cmp(&pdp.powers[b])).unwrap();
            assert!((pdp.delay(argmax) - m.delay_s).abs() <= pdp.delay_spacing_s);
        }
        assert!((r.params.as_tx_az - p.as_tx_az).abs() < 0.02);
        assert!((r.params.as_rx_az - p.as_rx_az).abs() < 0.02);
        assert!((r.params.as_rx_el - p.as_rx_el).abs() < 0.02);
        assert!((db(r.ddaps.total()) + link.pl_db).abs() < 0.01);
    }
}

#[test]
fn multi_tap_angular_spreads_hit_targets() {
    let grid = FrequencyGrid::new(6e9, 14e9, 801).unwrap();
    let angles = compact();
    let p = ModelParams::default();
    for i in 0..3u64 {
        let g = LinkGeometry::new(format!("L{i}"), 120.0, LosClass::OLoS).unwrap();
        let link = sample_link(&p, &g, &angles, 5, i).unwrap();
        let tensor = render_tensor(&link.mpcs, &grid, &angles, &PatternModel::Idealized);
        let r = process_link_band(&tensor, &g, grid.span(), &lossless_opts()).unwrap();
        assert!((r.params.as_tx_az - p.as_tx_az).abs() < 0.02, "{}", r.params.as_tx_az);
        assert!((r.params.as_rx_az - p.as_rx_az).abs() < 0.02, "{}", r.params.as_rx_az);
        assert!((r.params.as_rx_el - p.as_rx_el).abs() < 0.02, "{}", r.params.as_rx_el);
    }
}

/// Shadowed links through the rendered pipeline: the generating (alpha, beta) falls in
/// the fitted 95% interval in at least 90% of 200 meta-trials.
#[test]
fn statistical_round_trip_coverage() {
    let grid = FrequencyGrid::new(6e9, 14e9, 201).unwrap();
    let angles = AngularGrid::new(vec![0.0], vec![0.0], vec![0.0]).unwrap();
    let links = LinkGeometry::campaign_links();
    let opts = lossless_opts();
    let weighting = DistanceWeighting::default();
    let mut covered = 0;
    let trials = 200;
    for trial in 0..trials {
        let p = ModelParams {
            as_tx_az: 0.0,
            as_rx_az: 0.0,
            as_rx_el: 0.0,
            first_delay_s: 5e-9,
            seed: 1000 + trial,
            ..ModelParams::default()
        };
        let samples: Vec<(f64, f64)> = links
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let link = sample_link(&p, g, &angles, 1, i as u64).unwrap();
                let t = render_tensor(&link.mpcs, &grid, &angles, &PatternModel::Idealized);
                let r = process_link_band(&t, g, grid.span(), &opts).unwrap();
                (g.distance_m, -db(r.ddaps.total()))
            })
            .collect();
        let ci = fit_power_law(&samples, &weighting).unwrap().ci95.unwrap();
        if (ci.alpha_lo..=ci.alpha_hi).contains(&p.alpha) && (ci.beta_lo..=ci.beta_hi).contains(&p.beta) {
            covered += 1;
        }
    }
    assert!(covered * 10 >= trials * 9, "coverage {covered}/{trials}");
}
