//! Measurement-set directory format.
//!
//! A set is a directory holding `manifest.json` plus one binary payload per
//! link and one for the over-the-air calibration trace. Payloads are
//! little-endian `f64` (re, im) pairs, row-major in `[tx_az][rx_az][rx_coel][f]`
//! order; the calibration payload is `[f]` only.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{AngularGrid, FrequencyGrid};
use crate::tensor::{CalibrationTrace, FrequencyScanTensor, LinkGeometry, LosClass};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub frequency: FrequencySection,
    pub angles: AngleSection,
    pub ota: OtaSection,
    pub links: Vec<LinkSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencySection {
    pub start_hz: f64,
    pub stop_hz: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngleSection {
    pub tx_az_deg: Vec<f64>,
    pub rx_az_deg: Vec<f64>,
    pub rx_coel_deg: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OtaSection {
    pub file: String,
    pub distance_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    pub rx_id: String,
    pub distance_m: f64,
    pub los_class: LosClass,
    pub file: String,
}

/// A validated measurement-set directory whose link payloads are read on demand.
#[derive(Debug, Clone)]
pub struct MeasurementSet {
    root: PathBuf,
    grid: FrequencyGrid,
    angles: AngularGrid,
    ota: CalibrationTrace,
    links: Vec<LinkGeometry>,
    files: Vec<PathBuf>,
}

impl MeasurementSet {
    /// Reads and validates the manifest and the calibration payload, and checks
    /// that every link payload exists with the declared size.
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let manifest_path = root.join(MANIFEST_FILE);
        let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Format {
            file: manifest_path.clone(),
            reason: e.to_string(),
        })?;
        if manifest.version != FORMAT_VERSION {
            return Err(Error::Version {
                file: manifest_path,
                found: manifest.version,
                expected: FORMAT_VERSION,
            });
        }
        let in_manifest = |e: Error| Error::Format {
            file: manifest_path.clone(),
            reason: e.to_string(),
        };
        let f = &manifest.frequency;
        let grid = FrequencyGrid::new(f.start_hz, f.stop_hz, f.n_points).map_err(in_manifest)?;
        let a = &manifest.angles;
        let angles = AngularGrid::new(a.tx_az_deg.clone(), a.rx_az_deg.clone(), a.rx_coel_deg.clone())
            .map_err(in_manifest)?;

        let ota_path = root.join(&manifest.ota.file);
        let ota_values = read_payload(&ota_path, grid.len())?;
        let ota = CalibrationTrace::new(grid, ota_values, manifest.ota.distance_m).map_err(in_manifest)?;

        let per_link = angles.n_beams() * grid.len();
        let mut links = Vec::with_capacity(manifest.links.len());
        let mut files = Vec::with_capacity(manifest.links.len());
        for l in &manifest.links {
            links.push(LinkGeometry::new(&l.rx_id, l.distance_m, l.los_class).map_err(in_manifest)?);
            let path = root.join(&l.file);
            check_payload_size(&path, per_link)?;
            files.push(path);
        }
        Ok(Self {
            root,
            grid,
            angles,
            ota,
            links,
            files,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn angles(&self) -> &AngularGrid {
        &self.angles
    }

    pub fn ota(&self) -> &CalibrationTrace {
        &self.ota
    }

    pub fn links(&self) -> &[LinkGeometry] {
        &self.links
    }

    /// Reads the scan tensor of link `index`.
    pub fn load_link(&self, index: usize) -> Result<FrequencyScanTensor> {
        let path = &self.files[index];
        let values = read_payload(path, self.angles.n_beams() * self.grid.len())?;
        FrequencyScanTensor::new(self.grid, self.angles.clone(), values).map_err(|e| Error::Format {
            file: path.clone(),
            reason: e.to_string(),
        })
    }
}

/// Everything in a measurement set, fully loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedSet {
    pub tensors: Vec<FrequencyScanTensor>,
    pub ota: CalibrationTrace,
    pub links: Vec<LinkGeometry>,
}

pub fn load_measurement_set(root: impl AsRef<Path>) -> Result<LoadedSet> {
    let set = MeasurementSet::open(root)?;
    let tensors = (0..set.links.len())
        .map(|i| set.load_link(i))
        .collect::<Result<Vec<_>>>()?;
    Ok(LoadedSet {
        tensors,
        ota: set.ota,
        links: set.links,
    })
}

/// Payload file name used for a link when writing a set.
pub fn link_file_name(rx_id: &str) -> String {
    let stem: String = rx_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c.to_ascii_lowercase() } else { '_' })
        .collect();
    format!("{stem}.bin")
}

/// Writes a complete measurement set. All tensors must share the calibration grid
/// and one angular grid.
pub fn save_measurement_set(
    root: impl AsRef<Path>,
    ota: &CalibrationTrace,
    links: &[(LinkGeometry, &FrequencyScanTensor)],
) -> Result<()> {
    let angles = match links.first() {
        Some((_, t)) => t.angles().clone(),
        None => return Err(Error::invalid("measurement set", "no links")),
    };
    let mut writer = SetWriter::create(root, ota.clone(), angles)?;
    for (geom, tensor) in links {
        writer.write_link(geom, tensor)?;
    }
    writer.finish()
}

/// Link-at-a-time measurement set writer; the manifest is written last by `finish`.
#[derive(Debug)]
pub struct SetWriter {
    root: PathBuf,
    ota: CalibrationTrace,
    angles: AngularGrid,
    sections: Vec<LinkSection>,
}

impl SetWriter {
    pub fn create(root: impl AsRef<Path>, ota: CalibrationTrace, angles: AngularGrid) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        Ok(Self {
            root,
            ota,
            angles,
            sections: Vec::new(),
        })
    }

    pub fn write_link(&mut self, geom: &LinkGeometry, tensor: &FrequencyScanTensor) -> Result<()> {
        if tensor.grid() != self.ota.grid() || *tensor.angles() != self.angles {
            return Err(Error::invalid(
                "measurement set",
                format!("link {} does not share the set grids", geom.rx_id),
            ));
        }
        let file = link_file_name(&geom.rx_id);
        if self.sections.iter().any(|s| s.file == file) {
            return Err(Error::invalid(
                "measurement set",
                format!("duplicate payload name {file}"),
            ));
        }
        atomic_write(&self.root.join(&file), &encode_payload(tensor.values()))?;
        self.sections.push(LinkSection {
            rx_id: geom.rx_id.clone(),
            distance_m: geom.distance_m,
            los_class: geom.los_class,
            file,
        });
        Ok(())
    }

    pub fn finish(self) -> Result<()> {
        if self.sections.is_empty() {
            return Err(Error::invalid("measurement set", "no links"));
        }
        let grid = *self.ota.grid();
        atomic_write(&self.root.join("ota.bin"), &encode_payload(self.ota.values()))?;
        let manifest = Manifest {
            version: FORMAT_VERSION,
            frequency: FrequencySection {
                start_hz: grid.start_hz(),
                stop_hz: grid.stop_hz(),
                n_points: grid.len(),
            },
            angles: AngleSection {
                tx_az_deg: self.angles.tx_az_deg.clone(),
                rx_az_deg: self.angles.rx_az_deg.clone(),
                rx_coel_deg: self.angles.rx_coel_deg.clone(),
            },
            ota: OtaSection {
                file: "ota.bin".into(),
                distance_m: self.ota.distance_m(),
            },
            links: self.sections,
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        atomic_write(&self.root.join(MANIFEST_FILE), text.as_bytes())
    }
}

pub fn encode_payload(values: &[Complex64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 16);
    for v in values {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    out
}

fn check_payload_size(path: &Path, n_complex: usize) -> Result<()> {
    let len = fs::metadata(path).map_err(|e| Error::io(path, e))?.len() as usize;
    if !len.is_multiple_of(16) || len / 16 != n_complex {
        return Err(Error::DimensionMismatch {
            file: path.to_path_buf(),
            field: "complex samples".into(),
            expected: n_complex,
            found: len / 16,
        });
    }
    Ok(())
}

fn read_payload(path: &Path, n_complex: usize) -> Result<Vec<Complex64>> {
    check_payload_size(path, n_complex)?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut values = Vec::with_capacity(n_complex);
    for (i, chunk) in bytes.chunks_exact(16).enumerate() {
        let re = f64::from_le_bytes(chunk[..8].try_into().unwrap());
        let im = f64::from_le_bytes(chunk[8..].try_into().unwrap());
        if !(re.is_finite() && im.is_finite()) {
            return Err(Error::NonFinite {
                file: path.to_path_buf(),
                index: i,
            });
        }
        values.push(Complex64::new(re, im));
    }
    Ok(values)
}

/// Writes via a sibling temporary file and a rename, so readers never see a partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid("output path", format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}
