//! Validation-report data model and the error metrics it carries.

use ndarray::Array1;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::signals::TimeSignal;

/// Relative L2 distance between a predicted vector and a reference.
pub fn relative_l2(predicted: &Array1<f64>, reference: &Array1<f64>) -> f64 {
    let num = (predicted - reference).mapv(|v| v * v).sum().sqrt();
    let den = reference.mapv(|v| v * v).sum().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Relative RMS error of `predicted` against `reference` over samples with
/// `tau >= window_start`.
pub fn relative_rms_from(
    predicted: &TimeSignal,
    reference: &TimeSignal,
    window_start: f64,
) -> f64 {
    let grid = reference.grid();
    let mut num = 0.0;
    let mut den = 0.0;
    let mut used = 0;
    for i in 0..grid.len() {
        if grid.tau(i) >= window_start {
            let d = predicted.values()[i] - reference.values()[i];
            num += d * d;
            den += reference.values()[i] * reference.values()[i];
            used += 1;
        }
    }
    if used == 0 || den == 0.0 {
        return f64::NAN;
    }
    (num / den).sqrt()
}

/// Per-validation-point errors for one interpolator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub point_index: usize,
    pub mach: f64,
    pub alpha0: f64,
    pub interpolator: String,
    /// Relative L2 error of the predicted linear kernel against the
    /// directly identified one.
    pub h1_error_l2: f64,
    pub h2_error_l2: Option<f64>,
    /// Response-reconstruction errors against the exact plant oracle;
    /// absent for external datasets, where no oracle exists.
    pub step_linear_rms: Option<f64>,
    pub step_nonlinear_rms: Option<f64>,
    pub sinusoid_linear_rms: Option<f64>,
    pub sinusoid_nonlinear_rms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolatorSummary {
    pub interpolator: String,
    pub median_h1_error_l2: f64,
    pub median_h2_error_l2: Option<f64>,
    pub median_sinusoid_linear_rms: Option<f64>,
    pub median_sinusoid_nonlinear_rms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub rows: Vec<ValidationRow>,
    pub summary: Vec<InterpolatorSummary>,
}

pub fn median(values: &mut Vec<f64>) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

impl ValidationReport {
    pub fn summarize(rows: Vec<ValidationRow>) -> Self {
        let mut names: Vec<String> = Vec::new();
        for row in &rows {
            if !names.contains(&row.interpolator) {
                names.push(row.interpolator.clone());
            }
        }
        let summary = names
            .into_iter()
            .map(|name| {
                let of = |f: &dyn Fn(&ValidationRow) -> Option<f64>| -> Option<f64> {
                    let mut vals: Vec<f64> = rows
                        .iter()
                        .filter(|r| r.interpolator == name)
                        .filter_map(f)
                        .collect();
                    if vals.is_empty() {
                        None
                    } else {
                        Some(median(&mut vals))
                    }
                };
                InterpolatorSummary {
                    interpolator: name.clone(),
                    median_h1_error_l2: of(&|r| Some(r.h1_error_l2)).unwrap_or(f64::NAN),
                    median_h2_error_l2: of(&|r| r.h2_error_l2),
                    median_sinusoid_linear_rms: of(&|r| r.sinusoid_linear_rms),
                    median_sinusoid_nonlinear_rms: of(&|r| r.sinusoid_nonlinear_rms),
                }
            })
            .collect();
        Self { rows, summary }
    }

    pub fn median_for(&self, interpolator: &str) -> Option<&InterpolatorSummary> {
        self.summary.iter().find(|s| s.interpolator == interpolator)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(
            "point_index,mach,alpha0,interpolator,h1_error_l2,h2_error_l2,\
             step_linear_rms,step_nonlinear_rms,sinusoid_linear_rms,sinusoid_nonlinear_rms\n",
        );
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.point_index,
                r.mach,
                r.alpha0,
                r.interpolator,
                r.h1_error_l2,
                opt(r.h2_error_l2),
                opt(r.step_linear_rms),
                opt(r.step_nonlinear_rms),
                opt(r.sinusoid_linear_rms),
                opt(r.sinusoid_nonlinear_rms),
            );
        }
        out
    }

    pub fn save(&self, report_dir: &Path) -> Result<()> {
        std::fs::create_dir_all(report_dir)?;
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        std::fs::write(report_dir.join("report.json"), json)?;
        std::fs::write(report_dir.join("report.csv"), self.to_csv_string())?;
        Ok(())
    }
}

/// Writes a hysteresis loop (input angle vs output) over the settled tail.
pub fn write_hysteresis_csv(
    path: &Path,
    input: &TimeSignal,
    output: &TimeSignal,
    window_start: f64,
) -> Result<()> {
    let mut text = String::from("alpha,output\n");
    let grid = input.grid();
    for i in 0..grid.len() {
        if grid.tau(i) >= window_start {
            let _ = writeln!(text, "{},{}", input.values()[i], output.values()[i]);
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}
