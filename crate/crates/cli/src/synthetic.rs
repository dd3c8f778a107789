//! `synth` and `roundtrip`.

use std::fs;
use std::path::{Path, PathBuf};

use midband_core::io::atomic_write;
use midband_core::{
    fit_power_law, render_tensor, sample_link, AngularGrid, CalibrationTrace, DistanceWeighting, Error,
    FrequencyGrid, HornPatternModel, LinkGeometry, ModelParams, PatternModel, ProcessOptions, Result, SetWriter,
    SubBand, SyntheticLink,
};
use serde::{Deserialize, Serialize};

use crate::config::{GridConfig, RunConfig};
use crate::stages;

pub const TRUTH_FILE: &str = "truth.json";
/// Threshold at or above which multi-tap profiles lose no measurable power.
const LOSSLESS_THRESHOLD_DB: f64 = 60.0;
const SEED_RULE: &str = "ChaCha8 seeded from `seed`, stream = link index in manifest order";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PatternKind {
    Idealized,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum AnglePreset {
    /// 13 x 36 x 5 positions, 10-degree steps
    Nominal,
    /// 5 x 12 x 3 positions, 30/30/20-degree steps
    Compact,
}

impl AnglePreset {
    pub fn grid(self) -> AngularGrid {
        match self {
            AnglePreset::Nominal => AngularGrid::nominal(),
            AnglePreset::Compact => AngularGrid::new(
                (-60..=60).step_by(30).map(f64::from).collect(),
                (0..360).step_by(30).map(f64::from).collect(),
                vec![-20.0, 0.0, 20.0],
            )
            .expect("compact grid is valid"),
        }
    }
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Taps per link before angular splitting
    #[arg(long)]
    pub n_mpcs: Option<usize>,
    #[arg(long, value_enum)]
    pub pattern: Option<PatternKind>,
    /// Frequency points over 6-14 GHz
    #[arg(long)]
    pub n_points: Option<usize>,
    #[arg(long, value_enum)]
    pub angles: Option<AnglePreset>,
    /// Shadowing standard deviation in dB (overrides the model)
    #[arg(long)]
    pub sigma_shadow: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truth {
    pub params: ModelParams,
    pub pattern: PatternModel,
    pub n_mpcs: usize,
    pub seed_rule: String,
    pub frequency: GridConfig,
    pub angles: AngularGrid,
    pub links: Vec<SyntheticLink>,
}

impl Truth {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            file: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}

pub struct SynthPlan {
    pub params: ModelParams,
    pub pattern: PatternModel,
    pub n_mpcs: usize,
    pub grid: FrequencyGrid,
    pub angles: AngularGrid,
    pub links: Vec<LinkGeometry>,
}

pub fn plan(args: &SynthArgs, cfg: &RunConfig) -> Result<SynthPlan> {
    let mut params = cfg.synth.model.clone().unwrap_or_default();
    if let Some(seed) = args.seed.or(cfg.seed) {
        params.seed = seed;
    }
    if let Some(s) = args.sigma_shadow {
        params.sigma_shadow = s;
    }
    params.validate()?;
    let pattern = match (args.pattern, cfg.synth.pattern) {
        (Some(PatternKind::Idealized), _) => PatternModel::Idealized,
        (Some(PatternKind::Gaussian), Some(p @ PatternModel::Gaussian(_))) => p,
        (Some(PatternKind::Gaussian), _) => PatternModel::Gaussian(HornPatternModel::default()),
        (None, Some(p)) => p,
        (None, None) => PatternModel::Idealized,
    };
    if let PatternModel::Gaussian(h) = pattern {
        if !(h.hpbw_az_deg > 0.0 && h.hpbw_el_deg > 0.0 && h.peak_gain_db.is_finite()) {
            return Err(Error::invalid("pattern", "beamwidths must be positive"));
        }
    }
    let grid = match (args.n_points, cfg.synth.frequency) {
        (Some(n), _) => FrequencyGrid::new(6e9, 14e9, n)?,
        (None, Some(g)) => FrequencyGrid::new(g.start_hz, g.stop_hz, g.n_points)?,
        (None, None) => FrequencyGrid::nominal(),
    };
    let angles = match (args.angles, &cfg.synth.angles) {
        (Some(p), _) => p.grid(),
        (None, Some(a)) => {
            a.validate()?;
            a.clone()
        }
        (None, None) => AngularGrid::nominal(),
    };
    let links = match &cfg.synth.links {
        Some(list) => list
            .iter()
            .map(|l| LinkGeometry::new(l.rx_id.clone(), l.distance_m, l.los_class))
            .collect::<Result<Vec<_>>>()?,
        None => LinkGeometry::campaign_links(),
    };
    if links.is_empty() {
        return Err(Error::invalid("links", "no links"));
    }
    let n_mpcs = args.n_mpcs.or(cfg.synth.n_mpcs).unwrap_or(4);
    Ok(SynthPlan {
        params,
        pattern,
        n_mpcs,
        grid,
        angles,
        links,
    })
}

/// Samples, renders and writes a measurement set plus `truth.json` to `out`.
pub fn synth(plan: &SynthPlan, out: &Path) -> Result<Truth> {
    let ota = CalibrationTrace::identity(plan.grid, CalibrationTrace::NOMINAL_DISTANCE_M)?;
    let mut writer = SetWriter::create(out, ota, plan.angles.clone())?;
    let mut sampled = Vec::with_capacity(plan.links.len());
    for (i, geom) in plan.links.iter().enumerate() {
        let link = sample_link(&plan.params, geom, &plan.angles, plan.n_mpcs, i as u64)?;
        let tensor = render_tensor(&link.mpcs, &plan.grid, &plan.angles, &plan.pattern);
        writer.write_link(geom, &tensor)?;
        sampled.push(link);
    }
    writer.finish()?;
    let truth = Truth {
        params: plan.params.clone(),
        pattern: plan.pattern,
        n_mpcs: plan.n_mpcs,
        seed_rule: SEED_RULE.into(),
        frequency: GridConfig {
            start_hz: plan.grid.start_hz(),
            stop_hz: plan.grid.stop_hz(),
            n_points: plan.grid.len(),
        },
        angles: plan.angles.clone(),
        links: sampled,
    };
    let mut text = serde_json::to_string_pretty(&truth).expect("truth serializes");
    text.push('\n');
    atomic_write(&out.join(TRUTH_FILE), text.as_bytes())?;
    Ok(truth)
}

#[derive(Debug, Clone, Copy, clap::Args)]
pub struct Tolerances {
    /// Per-link total directional path loss, dB
    #[arg(long, default_value_t = 0.01)]
    pub pl_tol_db: f64,
    /// Fleury angular spread, absolute
    #[arg(long, default_value_t = 0.02)]
    pub as_tol: f64,
    /// Intercept recovery when shadowing is off, dB
    #[arg(long, default_value_t = 0.05)]
    pub alpha_tol: f64,
    /// Exponent recovery when shadowing is off
    #[arg(long, default_value_t = 0.01)]
    pub beta_tol: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub check: String,
    pub link: String,
    pub expected: f64,
    pub observed: f64,
    /// `None` for informational rows.
    pub tolerance: Option<f64>,
    pub pass: Option<bool>,
}

impl Check {
    fn within(check: &str, link: &str, expected: f64, observed: f64, tol: f64) -> Self {
        Self {
            check: check.into(),
            link: link.into(),
            expected,
            observed,
            tolerance: Some(tol),
            pass: Some((observed - expected).abs() <= tol),
        }
    }

    fn info(check: &str, link: &str, expected: f64, observed: f64) -> Self {
        Self {
            check: check.into(),
            link: link.into(),
            expected,
            observed,
            tolerance: None,
            pass: None,
        }
    }
}

struct Observed {
    rx_id: String,
    distance_m: f64,
    pl_total_db: f64,
    as_tx_az: f64,
    as_rx_az: f64,
    as_rx_el: f64,
    rmsds_s: f64,
}

/// Processes the synthetic set at `set_dir` into `out` and compares against its truth.
pub fn roundtrip(
    set_dir: &Path,
    out: &Path,
    bands: &[SubBand],
    opts: &ProcessOptions,
    weighting: &DistanceWeighting,
    tol: &Tolerances,
) -> Result<Vec<Check>> {
    let truth = Truth::load(&set_dir.join(TRUTH_FILE))?;
    let set = stages::open_set(set_dir)?;
    if set.links().len() != truth.links.len() {
        return Err(Error::invalid(
            "truth",
            format!("{} links in truth, {} in the set", truth.links.len(), set.links().len()),
        ));
    }
    let span = set.grid().span();
    let mut bands = bands.to_vec();
    if !bands.contains(&span) {
        bands.insert(0, span);
    }

    let mut observed = Vec::new();
    stages::process(&set, &bands, opts, weighting, &out.join("processed"), |geom, results| {
        let r = results.iter().find(|r| r.params.band == span).expect("span band processed");
        observed.push(Observed {
            rx_id: geom.rx_id.clone(),
            distance_m: geom.distance_m,
            pl_total_db: -10.0 * r.ddaps.total().log10(),
            as_tx_az: r.params.as_tx_az,
            as_rx_az: r.params.as_rx_az,
            as_rx_el: r.params.as_rx_el,
            rmsds_s: r.params.rmsds_omni.seconds,
        });
    })?;

    // Per-link power is only exact with delta patterns and no threshold losses: a single
    // tap per beam, or a floor far below the weakest tap.
    let exact_angles = truth.pattern == PatternModel::Idealized;
    let exact = exact_angles && (truth.n_mpcs == 1 || opts.pdp.threshold_below_peak_db >= LOSSLESS_THRESHOLD_DB);
    let mut checks = Vec::new();
    for (obs, t) in observed.iter().zip(&truth.links) {
        if obs.rx_id != t.geometry.rx_id {
            return Err(Error::invalid("truth", format!("link order differs at {}", obs.rx_id)));
        }
        let id = obs.rx_id.as_str();
        let pl = midband_core::synth::mpc_path_loss_db(&t.mpcs);
        let spreads = [
            ("as_tx_az", t.as_tx_az, obs.as_tx_az),
            ("as_rx_az", t.as_rx_az, obs.as_rx_az),
            ("as_rx_el", t.as_rx_el, obs.as_rx_el),
        ];
        checks.push(if exact {
            Check::within("pl_total_db", id, pl, obs.pl_total_db, tol.pl_tol_db)
        } else {
            Check::info("pl_total_db", id, pl, obs.pl_total_db)
        });
        for (name, want, got) in spreads {
            checks.push(if exact_angles {
                Check::within(name, id, want, got, tol.as_tol)
            } else {
                Check::info(name, id, want, got)
            });
        }
        checks.push(Check::info("rmsds_omni_s", id, t.rmsds_s, obs.rmsds_s));
    }

    let samples: Vec<(f64, f64)> = observed.iter().map(|o| (o.distance_m, o.pl_total_db)).collect();
    let fit = fit_power_law(&samples, weighting)?;
    let (a0, b0) = (truth.params.alpha, truth.params.beta);
    if !exact_angles || (truth.params.sigma_shadow == 0.0 && !exact) {
        checks.push(Check::info("alpha", "fit", a0, fit.alpha));
        checks.push(Check::info("beta", "fit", b0, fit.beta));
    } else if truth.params.sigma_shadow == 0.0 {
        checks.push(Check::within("alpha", "fit", a0, fit.alpha, tol.alpha_tol));
        checks.push(Check::within("beta", "fit", b0, fit.beta, tol.beta_tol));
    } else {
        let covered = fit
            .ci95
            .map(|c| (c.alpha_lo..=c.alpha_hi).contains(&a0) && (c.beta_lo..=c.beta_hi).contains(&b0));
        checks.push(Check {
            check: "alpha_beta_in_ci95".into(),
            link: "fit".into(),
            expected: 1.0,
            observed: covered.map_or(f64::NAN, |c| c as u8 as f64),
            tolerance: Some(0.0),
            pass: Some(covered == Some(true)),
        });
        checks.push(Check::info("alpha", "fit", a0, fit.alpha));
        checks.push(Check::info("beta", "fit", b0, fit.beta));
    }
    checks.push(Check::info("sigma_shadow", "fit", truth.params.sigma_shadow, fit.sigma_shadow));

    let mut text = serde_json::to_string_pretty(&checks).expect("checks serialize");
    text.push('\n');
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    atomic_write(&out.join("roundtrip.json"), text.as_bytes())?;
    Ok(checks)
}

pub fn render_checks(checks: &[Check]) -> String {
    let mut s = format!(
        "{:<20} {:<8} {:>16} {:>16} {:>10}  {}\n",
        "check", "link", "expected", "observed", "tolerance", "result"
    );
    for c in checks {
        let result = match c.pass {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "info",
        };
        let tol = c.tolerance.map_or_else(|| "-".to_string(), |t| format!("{t}"));
        s.push_str(&format!(
            "{:<20} {:<8} {:>16} {:>16} {:>10}  {}\n",
            c.check,
            c.link,
            num(c.expected),
            num(c.observed),
            tol,
            result
        ));
    }
    s
}

fn num(v: f64) -> String {
    if v != 0.0 && v.abs() < 1e-3 {
        format!("{v:.6e}")
    } else {
        format!("{v:.6}")
    }
}

pub fn default_set_dir(out: &Path) -> PathBuf {
    out.join("set")
}
