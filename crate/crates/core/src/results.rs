//! Result tables: condensed per-link parameters, per-band fits, and plot dumps.
//!
//! Numbers are written with Rust's shortest round-trip `f64` formatting, so parsing
//! an emitted file reproduces the in-memory values exactly.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_normal, fit_power_law, DistanceWeighting, NormalFit, PowerLawFit};
use crate::grid::SubBand;
use crate::io::atomic_write;
use crate::metrics::{CondensedLinkParams, DelaySpread};
use crate::pdp::PowerDelayProfile;

pub const LINEAR_HEADER: &str = "frequency,alpha_lo,alpha,alpha_hi,beta_lo,beta,beta_hi";
pub const NORMAL_HEADER: &str = "frequency,mu_lo,mu,mu_hi,sigma_lo,sigma,sigma_hi";
pub const SHADOWING_HEADER: &str = "frequency,sigma,sigma_lo,sigma_hi";
pub const CONDENSED_HEADER: &str = "rx_id,distance_m,band,band_lo_hz,band_hi_hz,pl_omni_db,pl_maxdir_db,\
rmsds_omni_s,rmsds_omni_dbs,rmsds_maxdir_s,rmsds_maxdir_dbs,as_tx_az,as_rx_az,as_rx_el,\
maxdir_tx_az_deg,maxdir_rx_az_deg,maxdir_rx_coel_deg,omni_correction_db";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricId {
    PlOmni,
    PlMaxdir,
    RmsdsOmni,
    RmsdsMaxdir,
    AsTxAz,
    AsRxAz,
    AsRxEl,
}

impl MetricId {
    pub const ALL: [MetricId; 7] = [
        MetricId::PlOmni,
        MetricId::PlMaxdir,
        MetricId::RmsdsOmni,
        MetricId::RmsdsMaxdir,
        MetricId::AsTxAz,
        MetricId::AsRxAz,
        MetricId::AsRxEl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricId::PlOmni => "pl_omni",
            MetricId::PlMaxdir => "pl_maxdir",
            MetricId::RmsdsOmni => "rmsds_omni",
            MetricId::RmsdsMaxdir => "rmsds_maxdir",
            MetricId::AsTxAz => "as_tx_az",
            MetricId::AsRxAz => "as_rx_az",
            MetricId::AsRxEl => "as_rx_el",
        }
    }

    /// Value fitted for this metric: dB for path loss, dB-seconds for delay spread,
    /// the raw Fleury spread for angular spread.
    pub fn value(self, p: &CondensedLinkParams) -> f64 {
        match self {
            MetricId::PlOmni => p.pl_omni_db,
            MetricId::PlMaxdir => p.pl_maxdir_db,
            MetricId::RmsdsOmni => p.rmsds_omni.db_seconds,
            MetricId::RmsdsMaxdir => p.rmsds_maxdir.db_seconds,
            MetricId::AsTxAz => p.as_tx_az,
            MetricId::AsRxAz => p.as_rx_az,
            MetricId::AsRxEl => p.as_rx_el,
        }
    }

    /// Path loss gets a shadowing table instead of a normal fit.
    pub fn is_path_loss(self) -> bool {
        matches!(self, MetricId::PlOmni | MetricId::PlMaxdir)
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRow {
    pub frequency: String,
    pub fit: PowerLawFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalRow {
    pub frequency: String,
    pub fit: NormalFit,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitTables {
    pub linear: BTreeMap<MetricId, Vec<LinearRow>>,
    pub normal: BTreeMap<MetricId, Vec<NormalRow>>,
    /// `(metric, band, reason)` for fits that could not be computed.
    pub skipped: Vec<(MetricId, String, String)>,
}

/// Fits every metric in every band. `bands` fixes the row order.
pub fn build_fit_tables(rows: &[CondensedLinkParams], bands: &[String], weighting: &DistanceWeighting) -> FitTables {
    let mut tables = FitTables::default();
    for metric in MetricId::ALL {
        let mut linear = Vec::new();
        let mut normal = Vec::new();
        for label in bands {
            let samples: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| &r.band_label == label)
                .map(|r| (r.distance_m, metric.value(r)))
                .collect();
            match fit_power_law(&samples, weighting) {
                Ok(fit) => linear.push(LinearRow {
                    frequency: label.clone(),
                    fit,
                }),
                Err(e) => tables.skipped.push((metric, label.clone(), e.to_string())),
            }
            if !metric.is_path_loss() {
                let values: Vec<f64> = samples.iter().map(|s| s.1).collect();
                match fit_normal(&values) {
                    Ok(fit) => normal.push(NormalRow {
                        frequency: label.clone(),
                        fit,
                    }),
                    Err(e) => tables.skipped.push((metric, label.clone(), e.to_string())),
                }
            }
        }
        tables.linear.insert(metric, linear);
        if !metric.is_path_loss() {
            tables.normal.insert(metric, normal);
        }
    }
    tables
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| Num(x).to_string()).unwrap_or_default()
}

pub fn linear_table_csv(rows: &[LinearRow]) -> String {
    let mut s = format!("{LINEAR_HEADER}\n");
    for r in rows {
        let f = &r.fit;
        let ci = f.ci95.as_ref();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.frequency,
            opt(ci.map(|c| c.alpha_lo)),
            f.alpha,
            opt(ci.map(|c| c.alpha_hi)),
            opt(ci.map(|c| c.beta_lo)),
            f.beta,
            opt(ci.map(|c| c.beta_hi)),
        );
    }
    s
}

pub fn normal_table_csv(rows: &[NormalRow]) -> String {
    let mut s = format!("{NORMAL_HEADER}\n");
    for r in rows {
        let (f, c) = (&r.fit, &r.fit.ci95);
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.frequency, c.mu_lo, f.mu, c.mu_hi, c.sigma_lo, f.sigma, c.sigma_hi
        );
    }
    s
}

pub fn shadowing_table_csv(rows: &[LinearRow]) -> String {
    let mut s = format!("{SHADOWING_HEADER}\n");
    for r in rows {
        let ci = r.fit.ci95.as_ref();
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.frequency,
            r.fit.sigma_shadow,
            opt(ci.map(|c| c.sigma_lo)),
            opt(ci.map(|c| c.sigma_hi))
        );
    }
    s
}

/// One parsed row of a linear-fit table: label and the six numeric columns.
pub type LinearTableRow = (String, [Option<f64>; 6]);

pub fn parse_linear_table(text: &str) -> Result<Vec<LinearTableRow>> {
    let bad = |reason: String| Error::Format {
        file: "linear fit table".into(),
        reason,
    };
    let mut lines = text.lines();
    if lines.next() != Some(LINEAR_HEADER) {
        return Err(bad("missing or unexpected header".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(bad(format!("expected 7 fields in `{line}`")));
            }
            let mut vals = [None; 6];
            for (v, f) in vals.iter_mut().zip(&fields[1..]) {
                if !f.is_empty() {
                    *v = Some(f.parse::<f64>().map_err(|_| bad(format!("bad number `{f}`")))?);
                }
            }
            Ok((fields[0].to_string(), vals))
        })
        .collect()
}

/// Run settings recorded next to the fitted tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsMetadata {
    pub window_rmsds: String,
    pub window_path_loss: String,
    pub oversample_factor: usize,
    pub gate_delay_s: f64,
    pub threshold_below_peak_db: f64,
    pub weighting: DistanceWeighting,
    pub gain_table: Vec<(f64, f64)>,
    pub gain_correction_rule: String,
    pub all_bands_rule: String,
    pub rx_az_spread_rule: String,
    pub ci_method: String,
}

/// Writes every fit table as CSV plus `results.json` keyed by metric then band.
pub fn save_results(tables: &FitTables, metadata: &ResultsMetadata, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (metric, rows) in &tables.linear {
        atomic_write(&dir.join(format!("linear_{metric}.csv")), linear_table_csv(rows).as_bytes())?;
        if metric.is_path_loss() {
            atomic_write(
                &dir.join(format!("shadowing_{metric}.csv")),
                shadowing_table_csv(rows).as_bytes(),
            )?;
        }
    }
    for (metric, rows) in &tables.normal {
        atomic_write(&dir.join(format!("normal_{metric}.csv")), normal_table_csv(rows).as_bytes())?;
    }

    let mut fits: BTreeMap<String, BTreeMap<String, serde_json::Value>> = BTreeMap::new();
    for (metric, rows) in &tables.linear {
        for r in rows {
            let entry = fits.entry(metric.name().to_string()).or_default();
            let slot = entry
                .entry(r.frequency.clone())
                .or_insert_with(|| serde_json::json!({}));
            slot["linear"] = serde_json::to_value(&r.fit).expect("fit serializes");
        }
    }
    for (metric, rows) in &tables.normal {
        for r in rows {
            let entry = fits.entry(metric.name().to_string()).or_default();
            let slot = entry
                .entry(r.frequency.clone())
                .or_insert_with(|| serde_json::json!({}));
            slot["normal"] = serde_json::to_value(&r.fit).expect("fit serializes");
        }
    }
    let skipped: Vec<_> = tables
        .skipped
        .iter()
        .map(|(m, b, why)| serde_json::json!({"metric": m.name(), "band": b, "reason": why}))
        .collect();
    let doc = serde_json::json!({
        "metadata": metadata,
        "fits": fits,
        "skipped": skipped,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("results serialize");
    text.push('\n');
    atomic_write(&dir.join("results.json"), text.as_bytes())
}

/// Shortest round-trip decimal, in exponent form for very small or large magnitudes.
struct Num(f64);

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = self.0.abs();
        if a != 0.0 && a.is_finite() && !(1e-4..1e16).contains(&a) {
            write!(f, "{:e}", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

pub fn condensed_csv(rows: &[CondensedLinkParams]) -> String {
    let mut s = format!("{CONDENSED_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.rx_id,
            r.distance_m,
            r.band_label,
            r.band.lo_hz(),
            r.band.hi_hz(),
            r.pl_omni_db,
            r.pl_maxdir_db,
            Num(r.rmsds_omni.seconds),
            r.rmsds_omni.db_seconds,
            Num(r.rmsds_maxdir.seconds),
            r.rmsds_maxdir.db_seconds,
            r.as_tx_az,
            r.as_rx_az,
            r.as_rx_el,
            r.maxdir_beam_deg[0],
            r.maxdir_beam_deg[1],
            r.maxdir_beam_deg[2],
            r.omni_correction_db,
        );
    }
    s
}

pub fn parse_condensed_csv(text: &str) -> Result<Vec<CondensedLinkParams>> {
    let bad = |reason: String| Error::Format {
        file: "condensed parameters".into(),
        reason,
    };
    let mut lines = text.lines();
    if lines.next() != Some(CONDENSED_HEADER) {
        return Err(bad("missing or unexpected header".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 18 {
                return Err(bad(format!("expected 18 fields, got {}", f.len())));
            }
            let num = |i: usize| -> Result<f64> {
                f64::from_str(f[i]).map_err(|_| bad(format!("bad number `{}` in column {}", f[i], i + 1)))
            };
            Ok(CondensedLinkParams {
                rx_id: f[0].to_string(),
                distance_m: num(1)?,
                band_label: f[2].to_string(),
                band: SubBand::new(num(3)?, num(4)?).map_err(|e| bad(e.to_string()))?,
                pl_omni_db: num(5)?,
                pl_maxdir_db: num(6)?,
                rmsds_omni: DelaySpread {
                    seconds: num(7)?,
                    db_seconds: num(8)?,
                },
                rmsds_maxdir: DelaySpread {
                    seconds: num(9)?,
                    db_seconds: num(10)?,
                },
                as_tx_az: num(11)?,
                as_rx_az: num(12)?,
                as_rx_el: num(13)?,
                maxdir_beam_deg: [num(14)?, num(15)?, num(16)?],
                omni_correction_db: num(17)?,
            })
        })
        .collect()
}

/// `delay_s,power` from zero delay through the last kept bin; excluded bins are
/// written as zero power.
pub fn pdp_csv(pdp: &PowerDelayProfile) -> String {
    let last = (0..pdp.len()).rev().find(|&k| pdp.kept_power(k) > 0.0);
    let mut s = String::from("delay_s,power\n");
    for (k, p) in pdp.kept_powers().enumerate().take(last.map_or(0, |l| l + 1)) {
        let _ = writeln!(s, "{},{}", Num(pdp.delay(k)), Num(p));
    }
    s
}

pub fn aps_csv(angles_deg: &[f64], aps: &[f64]) -> String {
    let mut s = String::from("angle_deg,power\n");
    for (a, p) in angles_deg.iter().zip(aps) {
        let _ = writeln!(s, "{a},{}", Num(*p));
    }
    s
}
