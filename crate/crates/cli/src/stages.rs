//! Measurement-set processing stages: calibrate, pdp dumps, condense, fit, report.

use std::fs;
use std::path::{Path, PathBuf};

use midband_core::io::atomic_write;
use midband_core::metrics::marginal_aps;
use midband_core::results::{
    aps_csv, build_fit_tables, condensed_csv, parse_condensed_csv, pdp_csv, save_results, ResultsMetadata,
};
use midband_core::{
    calibrate, process_link, BandResult, CalibrationTrace, CondensedLinkParams, DistanceWeighting, Error,
    FrequencyGrid, LinkGeometry, MeasurementSet, ProcessOptions, Result, SetWriter, SpreadEnd, SubBand,
};

pub fn open_set(path: &Path) -> Result<MeasurementSet> {
    let set = MeasurementSet::open(path)?;
    if set.links().is_empty() {
        return Err(Error::invalid("measurement set", "no links"));
    }
    Ok(set)
}

/// Runs the pipeline link by link, handing each link's band results to `sink`.
pub fn for_each_link(
    set: &MeasurementSet,
    bands: &[SubBand],
    opts: &ProcessOptions,
    mut sink: impl FnMut(&LinkGeometry, &[BandResult]) -> Result<()>,
) -> Result<()> {
    for (i, geom) in set.links().iter().enumerate() {
        let tensor = calibrate(set.load_link(i)?, set.ota())?;
        let results = process_link(&tensor, geom, bands, opts)?;
        drop(tensor);
        sink(geom, &results)?;
    }
    Ok(())
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    atomic_write(path, text.as_bytes())
}

pub fn band_dir(band: &SubBand, grid: &FrequencyGrid) -> String {
    if *band == grid.span() {
        "all".to_string()
    } else {
        format!("{}-{}", band.lo_hz() / 1e9, band.hi_hz() / 1e9)
    }
}

/// PDP and angular-spectrum dumps for one link under `root/<rx>/<band>/`.
pub fn write_dumps(root: &Path, grid: &FrequencyGrid, geom: &LinkGeometry, results: &[BandResult]) -> Result<()> {
    let stem = midband_core::io::link_file_name(&geom.rx_id);
    let link_dir = root.join(stem.trim_end_matches(".bin"));
    for r in results {
        let dir = link_dir.join(band_dir(&r.params.band, grid));
        write(&dir.join("pdp_omni.csv"), &pdp_csv(&r.omni_pl.pdp))?;
        write(&dir.join("pdp_maxdir.csv"), &pdp_csv(&r.maxdir_pl))?;
        for end in [SpreadEnd::TxAz, SpreadEnd::RxAz, SpreadEnd::RxEl] {
            let (aps, angles) = marginal_aps(&r.ddaps, end);
            write(&dir.join(format!("aps_{end}.csv")), &aps_csv(&angles, &aps))?;
        }
    }
    Ok(())
}

pub fn metadata(opts: &ProcessOptions, weighting: &DistanceWeighting) -> ResultsMetadata {
    ResultsMetadata {
        window_rmsds: opts.pdp.window.to_string(),
        window_path_loss: opts.pl_window.to_string(),
        oversample_factor: opts.pdp.oversample_factor,
        gate_delay_s: opts.pdp.gate_delay_s,
        threshold_below_peak_db: opts.pdp.threshold_below_peak_db,
        weighting: *weighting,
        gain_table: opts.gains.entries().to_vec(),
        gain_correction_rule: "linear in dB at the band centre; no extrapolation".into(),
        all_bands_rule: "the full measured span processed as a single band".into(),
        rx_az_spread_rule: "rx azimuth spectrum sums the DDAPS over tx azimuth and rx co-elevation".into(),
        ci_method: "weighted least squares with Kish effective sample size; t intervals for alpha and beta, \
                    chi-square interval for sigma"
            .into(),
    }
}

/// Row labels in first-seen order.
pub fn band_labels(rows: &[CondensedLinkParams]) -> Vec<String> {
    let mut labels: Vec<String> = Vec::new();
    for r in rows {
        if !labels.contains(&r.band_label) {
            labels.push(r.band_label.clone());
        }
    }
    labels
}

pub fn write_fits(
    rows: &[CondensedLinkParams],
    labels: &[String],
    weighting: &DistanceWeighting,
    meta: &ResultsMetadata,
    dir: &Path,
) -> Result<()> {
    let tables = build_fit_tables(rows, labels, weighting);
    save_results(&tables, meta, dir)
}

/// Full pipeline: condensed parameters, dumps and fits under `out`.
pub fn process(
    set: &MeasurementSet,
    bands: &[SubBand],
    opts: &ProcessOptions,
    weighting: &DistanceWeighting,
    out: &Path,
    mut extra: impl FnMut(&LinkGeometry, &[BandResult]),
) -> Result<Vec<CondensedLinkParams>> {
    let grid = *set.grid();
    let mut rows = Vec::new();
    for_each_link(set, bands, opts, |geom, results| {
        write_dumps(&out.join("dumps"), &grid, geom, results)?;
        rows.extend(results.iter().map(|r| r.params.clone()));
        extra(geom, results);
        Ok(())
    })?;
    write(&out.join("condensed.csv"), &condensed_csv(&rows))?;
    let labels: Vec<String> = bands.iter().map(|b| b.label(&grid)).collect();
    write_fits(&rows, &labels, weighting, &metadata(opts, weighting), &out.join("fits"))?;
    Ok(rows)
}

/// Writes a copy of the set with every link divided by the calibration trace and an
/// identity trace in its place.
pub fn calibrate_set(set: &MeasurementSet, out: &Path) -> Result<()> {
    if same_dir(set.root(), out) {
        return Err(Error::invalid("output", "calibrated set must go to a different directory"));
    }
    let identity = CalibrationTrace::identity(*set.grid(), set.ota().distance_m())?;
    let mut writer = SetWriter::create(out, identity, set.angles().clone())?;
    for (i, geom) in set.links().iter().enumerate() {
        let tensor = calibrate(set.load_link(i)?, set.ota())?;
        writer.write_link(geom, &tensor)?;
    }
    writer.finish()
}

fn same_dir(a: &Path, b: &Path) -> bool {
    match (fs::canonicalize(a), fs::canonicalize(b)) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

pub fn dumps(set: &MeasurementSet, bands: &[SubBand], opts: &ProcessOptions, out: &Path) -> Result<()> {
    let grid = *set.grid();
    for_each_link(set, bands, opts, |geom, results| write_dumps(out, &grid, geom, results))
}

pub fn condense(set: &MeasurementSet, bands: &[SubBand], opts: &ProcessOptions, out: &Path) -> Result<()> {
    let mut rows = Vec::new();
    for_each_link(set, bands, opts, |_, results| {
        rows.extend(results.iter().map(|r| r.params.clone()));
        Ok(())
    })?;
    write(&condensed_path(out), &condensed_csv(&rows))
}

/// `out` itself when it names a `.csv` file, else `out/condensed.csv`.
pub fn condensed_path(out: &Path) -> PathBuf {
    if out.extension().is_some_and(|e| e == "csv") {
        out.to_path_buf()
    } else {
        out.join("condensed.csv")
    }
}

pub fn read_condensed(path: &Path) -> Result<Vec<CondensedLinkParams>> {
    let path = if path.is_dir() { path.join("condensed.csv") } else { path.to_path_buf() };
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let rows = parse_condensed_csv(&text)?;
    if rows.is_empty() {
        return Err(Error::invalid("condensed table", "no links"));
    }
    Ok(rows)
}

/// Human-readable rendering of a `results.json`.
/// Span row first, then sub-bands by lower edge.
fn band_order(label: &str) -> f64 {
    label
        .split(['-', ' '])
        .next()
        .and_then(|lo| lo.parse().ok())
        .unwrap_or(f64::NEG_INFINITY)
}

pub fn report(path: &Path) -> Result<String> {
    let path = if path.is_dir() { path.join("results.json") } else { path.to_path_buf() };
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let doc: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Format {
        file: path.clone(),
        reason: e.to_string(),
    })?;
    let fits = doc
        .get("fits")
        .and_then(|f| f.as_object())
        .ok_or_else(|| Error::Format {
            file: path.clone(),
            reason: "missing `fits` object".into(),
        })?;
    let num = |v: &serde_json::Value, k: &str| v.get(k).and_then(|x| x.as_f64());
    let cell = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
    let mut s = String::new();
    for (metric, bands) in fits {
        s.push_str(&format!("{metric}\n"));
        s.push_str(&format!(
            "  {:<12} {:>9} {:>19} {:>8} {:>17} {:>8} {:>9} {:>9}\n",
            "band", "alpha", "alpha 95% CI", "beta", "beta 95% CI", "sigma", "mu", "sd"
        ));
        let Some(bands) = bands.as_object() else { continue };
        let mut rows: Vec<_> = bands.iter().collect();
        rows.sort_by(|a, b| band_order(a.0).total_cmp(&band_order(b.0)));
        for (band, entry) in rows {
            let lin = entry.get("linear");
            let ci = lin.and_then(|l| l.get("ci95")).filter(|c| !c.is_null());
            let pair = |lo: &str, hi: &str| match ci {
                Some(c) => format!("[{}, {}]", cell(num(c, lo)), cell(num(c, hi))),
                None => "-".to_string(),
            };
            let norm = entry.get("normal");
            s.push_str(&format!(
                "  {:<12} {:>9} {:>19} {:>8} {:>17} {:>8} {:>9} {:>9}\n",
                band,
                cell(lin.and_then(|l| num(l, "alpha"))),
                pair("alpha_lo", "alpha_hi"),
                cell(lin.and_then(|l| num(l, "beta"))),
                pair("beta_lo", "beta_hi"),
                cell(lin.and_then(|l| num(l, "sigma_shadow"))),
                cell(norm.and_then(|n| num(n, "mu"))),
                cell(norm.and_then(|n| num(n, "sigma"))),
            ));
        }
    }
    if let Some(skipped) = doc.get("skipped").and_then(|v| v.as_array()).filter(|a| !a.is_empty()) {
        s.push_str("skipped\n");
        for k in skipped {
            s.push_str(&format!(
                "  {} / {}: {}\n",
                k["metric"].as_str().unwrap_or("?"),
                k["band"].as_str().unwrap_or("?"),
                k["reason"].as_str().unwrap_or("?")
            ));
        }
    }
    Ok(s)
}
