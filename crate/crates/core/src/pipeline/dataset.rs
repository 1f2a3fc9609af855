//! Dataset manifest: the on-disk exchange format for step-response data.
//!
//! The pipeline's generator writes this layout and external datasets are
//! ingested through it, so synthetic and external data take the same path
//! through identification. Signal files are two-column CSV; the manifest
//! lists them relative to its own directory.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Result, RomError};
use crate::signals::TimeSignal;
use crate::synthaero::ParameterPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Synthetic,
    External,
}

/// One response entry in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestResponse {
    pub amplitude_deg: f64,
    pub input_csv: String,
    pub output_csv: String,
    /// Subtracted from the output before identification; set it to the
    /// pre-step trim level for raw exports that do not start at zero.
    #[serde(default)]
    pub steady_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestPoint {
    pub mach: f64,
    pub alpha0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steady_cl: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steady_cm: Option<f64>,
    pub responses: Vec<ManifestResponse>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default = "default_provenance")]
    pub provenance: Provenance,
    pub points: Vec<ManifestPoint>,
}

fn default_provenance() -> Provenance {
    Provenance::External
}

impl Manifest {
    pub fn save_json(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RomError::Dataset(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| RomError::Dataset(format!("{}: {e}", path.display())))
    }
}

/// Relative size of the small amplitude inside one parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeRole {
    Small,
    Large,
    Extra,
}

/// A validated in-memory record: one (input, output) pair at a point.
#[derive(Debug, Clone)]
pub struct DatasetRecord {
    pub point_index: usize,
    pub point: ParameterPoint,
    pub amplitude_deg: f64,
    pub role: AmplitudeRole,
    pub input: TimeSignal,
    pub output: TimeSignal,
    pub steady_offset: f64,
    pub provenance: Provenance,
}

/// Reads and validates a dataset directory containing `manifest.json`.
/// Invalid records are skipped and reported in the error list; valid ones
/// are returned in manifest order.
pub fn load_dataset(dir: &Path) -> Result<(Vec<DatasetRecord>, Vec<String>)> {
    let manifest = Manifest::load_json(&dir.join("manifest.json"))?;
    let mut records = Vec::new();
    let mut errors = Vec::new();

    for (pi, mp) in manifest.points.iter().enumerate() {
        let point = match ParameterPoint::new(mp.mach, mp.alpha0) {
            Ok(mut p) => {
                p.steady_cl = mp.steady_cl;
                p.steady_cm = mp.steady_cm;
                p
            }
            Err(e) => {
                errors.push(format!("point {pi}: {e}"));
                continue;
            }
        };
        let mut sorted: Vec<&ManifestResponse> = mp.responses.iter().collect();
        sorted.sort_by(|a, b| a.amplitude_deg.partial_cmp(&b.amplitude_deg).unwrap());
        if sorted
            .windows(2)
            .any(|w| w[1].amplitude_deg <= w[0].amplitude_deg)
            || sorted.iter().any(|r| r.amplitude_deg <= 0.0)
        {
            errors.push(format!(
                "point {pi}: amplitudes must be positive and strictly increasing"
            ));
            continue;
        }

        let mut point_records = Vec::new();
        let mut point_ok = true;
        for (ri, resp) in sorted.iter().enumerate() {
            let role = match ri {
                0 => AmplitudeRole::Small,
                1 => AmplitudeRole::Large,
                _ => AmplitudeRole::Extra,
            };
            let input = match TimeSignal::read_csv(&dir.join(&resp.input_csv)) {
                Ok(s) => s,
                Err(e) => {
                    errors.push(format!("point {pi} amplitude {}: {e}", resp.amplitude_deg));
                    point_ok = false;
                    break;
                }
            };
            let output = match TimeSignal::read_csv(&dir.join(&resp.output_csv)) {
                Ok(s) => s,
                Err(e) => {
                    errors.push(format!("point {pi} amplitude {}: {e}", resp.amplitude_deg));
                    point_ok = false;
                    break;
                }
            };
            if input.grid() != output.grid() {
                errors.push(format!(
                    "point {pi} amplitude {}: input and output grids differ",
                    resp.amplitude_deg
                ));
                point_ok = false;
                break;
            }
            if let Some(first) = point_records.first() {
                let first: &DatasetRecord = first;
                if first.input.grid() != input.grid() {
                    errors.push(format!(
                        "point {pi} amplitude {}: grid differs from the point's first response",
                        resp.amplitude_deg
                    ));
                    point_ok = false;
                    break;
                }
            }
            point_records.push(DatasetRecord {
                point_index: pi,
                point,
                amplitude_deg: resp.amplitude_deg,
                role,
                input,
                output,
                steady_offset: resp.steady_offset,
                provenance: manifest.provenance,
            });
        }
        if point_ok {
            records.extend(point_records);
        }
    }
    Ok((records, errors))
}

/// Copies an external dataset into `out_dir` in normalized form: signals
/// rewritten through the common CSV writer and a fresh manifest. Returns
/// the number of ingested records and the per-record error list.
pub fn ingest_external(input_dir: &Path, out_dir: &Path) -> Result<(usize, Vec<String>)> {
    let (records, errors) = load_dataset(input_dir)?;
    if records.is_empty() {
        return Err(RomError::Dataset(format!(
            "no valid records in {} ({} errors)",
            input_dir.display(),
            errors.len()
        )));
    }
    std::fs::create_dir_all(out_dir.join("signals"))?;

    let mut points: Vec<ManifestPoint> = Vec::new();
    let mut count = 0;
    for record in &records {
        let slug = match record.role {
            AmplitudeRole::Small => "small".to_string(),
            AmplitudeRole::Large => "large".to_string(),
            AmplitudeRole::Extra => format!("extra{}", record.amplitude_deg),
        };
        let input_rel = format!("signals/point_{:03}_{}_input.csv", record.point_index, slug);
        let output_rel = format!("signals/point_{:03}_{}_output.csv", record.point_index, slug);
        record.input.write_csv(&out_dir.join(&input_rel))?;
        record.output.write_csv(&out_dir.join(&output_rel))?;
        count += 1;

        let entry = ManifestResponse {
            amplitude_deg: record.amplitude_deg,
            input_csv: input_rel,
            output_csv: output_rel,
            steady_offset: record.steady_offset,
        };
        match points.iter_mut().find(|p| {
            p.mach == record.point.mach && p.alpha0 == record.point.alpha0
        }) {
            Some(p) => p.responses.push(entry),
            None => points.push(ManifestPoint {
                mach: record.point.mach,
                alpha0: record.point.alpha0,
                steady_cl: record.point.steady_cl,
                steady_cm: record.point.steady_cm,
                responses: vec![entry],
            }),
        }
    }
    let manifest = Manifest {
        provenance: Provenance::External,
        points,
    };
    manifest.save_json(&out_dir.join("manifest.json"))?;
    Ok((count, errors))
}
