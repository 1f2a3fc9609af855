//! Two-step Volterra kernel identification.
//!
//! The linear kernel is identified from a small-amplitude response where the
//! system behaves linearly; higher-order diagonal kernels are corrections
//! fitted to the residual of larger-amplitude responses. Second- and
//! third-order kernels can be solved simultaneously from two residuals,
//! which separates quadratic from cubic content better than solving them
//! one amplitude at a time.
//!
//! Only diagonal higher-order kernels are supported: single step-shaped
//! identification signals cannot constrain cross-memory terms.

use ndarray::{concatenate, Array1, Array2, Axis};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::convmat::build_input_matrix;
use crate::error::{Result, RomError};
use crate::laguerre::LaguerreBasis;
use crate::linalg;
use crate::signals::TimeSignal;
use crate::synthaero::ParameterPoint;

/// An identified kernel family for one parameter point. Serializes to JSON
/// with a fixed field order and shortest round-trip number formatting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSet {
    pub memory_depth: usize,
    pub dt: f64,
    #[serde(rename = "amplitudes")]
    pub identification_amplitudes: Vec<f64>,
    h1: Vec<f64>,
    h2: Option<Vec<f64>>,
    h3: Option<Vec<f64>>,
    pub steady_offset: f64,
}

impl KernelSet {
    /// A linear-only kernel set identified at `amplitude_deg`.
    pub fn linear(
        memory_depth: usize,
        dt: f64,
        h1: Array1<f64>,
        amplitude_deg: f64,
        steady_offset: f64,
    ) -> Result<Self> {
        let set = Self {
            memory_depth,
            dt,
            identification_amplitudes: vec![amplitude_deg],
            h1: h1.to_vec(),
            h2: None,
            h3: None,
            steady_offset,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn set_second_order(&mut self, h2: Array1<f64>, amplitude_deg: f64) -> Result<()> {
        self.h2 = Some(h2.to_vec());
        self.h3 = None;
        self.identification_amplitudes.truncate(1);
        self.identification_amplitudes.push(amplitude_deg);
        self.validate()
    }

    pub fn set_second_and_third(
        &mut self,
        h2: Array1<f64>,
        h3: Array1<f64>,
        amplitude_b_deg: f64,
        amplitude_c_deg: f64,
    ) -> Result<()> {
        self.h2 = Some(h2.to_vec());
        self.h3 = Some(h3.to_vec());
        self.identification_amplitudes.truncate(1);
        self.identification_amplitudes.push(amplitude_b_deg);
        self.identification_amplitudes.push(amplitude_c_deg);
        self.validate()
    }

    /// Replaces the kernel vectors (e.g. with interpolator predictions),
    /// keeping the bookkeeping fields.
    pub fn with_kernels(&self, h1: Array1<f64>, h2: Option<Array1<f64>>) -> Result<Self> {
        let set = Self {
            memory_depth: self.memory_depth,
            dt: self.dt,
            identification_amplitudes: self.identification_amplitudes.clone(),
            h1: h1.to_vec(),
            h2: h2.map(|h| h.to_vec()),
            h3: None,
            steady_offset: self.steady_offset,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.memory_depth;
        let check = |name: &str, k: &[f64]| -> Result<()> {
            if k.len() != m {
                return Err(RomError::DimensionMismatch(format!(
                    "{name} has {} entries, memory depth is {m}",
                    k.len()
                )));
            }
            if k.iter().any(|v| !v.is_finite()) {
                return Err(RomError::InvalidArgument(format!(
                    "{name} contains non-finite entries"
                )));
            }
            Ok(())
        };
        check("h1", &self.h1)?;
        if let Some(h2) = &self.h2 {
            check("h2", h2)?;
        }
        if let Some(h3) = &self.h3 {
            check("h3", h3)?;
            if self.h2.is_none() {
                return Err(RomError::InvalidArgument(
                    "h3 requires h2 to be present".into(),
                ));
            }
        }
        let amps = &self.identification_amplitudes;
        if amps.is_empty() || amps[0] <= 0.0 || amps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(RomError::InvalidArgument(
                "identification amplitudes must be positive and strictly increasing".into(),
            ));
        }
        Ok(())
    }

    pub fn h1(&self) -> Array1<f64> {
        Array1::from_vec(self.h1.clone())
    }

    pub fn h2(&self) -> Option<Array1<f64>> {
        self.h2.as_ref().map(|v| Array1::from_vec(v.clone()))
    }

    pub fn h3(&self) -> Option<Array1<f64>> {
        self.h3.as_ref().map(|v| Array1::from_vec(v.clone()))
    }

    /// Evaluates the series response `U h1 + U_2 h2 + U_3 h3` (present terms
    /// only) to `input`.
    pub fn reconstruct(&self, input: &TimeSignal) -> Result<TimeSignal> {
        if input.len() < self.memory_depth {
            return Err(RomError::DimensionMismatch(format!(
                "input has {} samples, kernels need at least {}",
                input.len(),
                self.memory_depth
            )));
        }
        let u1 = build_input_matrix(input, self.memory_depth, 1)?;
        let mut y = u1.convolve(&self.h1())?.values().clone();
        if let Some(h2) = self.h2() {
            let u2 = build_input_matrix(input, self.memory_depth, 2)?;
            y = y + u2.convolve(&h2)?.values();
        }
        if let Some(h3) = self.h3() {
            let u3 = build_input_matrix(input, self.memory_depth, 3)?;
            y = y + u3.convolve(&h3)?.values();
        }
        TimeSignal::new(input.grid(), y)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let set: Self = serde_json::from_str(&text)?;
        set.validate()?;
        Ok(set)
    }
}

/// One identification record: an input signal and the measured response at a
/// parameter point, sharing a grid.
#[derive(Debug, Clone)]
pub struct ResponsePair {
    pub input: TimeSignal,
    pub output: TimeSignal,
    pub parameter_point: ParameterPoint,
}

impl ResponsePair {
    pub fn new(input: TimeSignal, output: TimeSignal, point: ParameterPoint) -> Result<Self> {
        if input.grid() != output.grid() {
            return Err(RomError::DimensionMismatch(
                "input and output must share the same grid".into(),
            ));
        }
        Ok(Self {
            input,
            output,
            parameter_point: point,
        })
    }
}

fn solve_full_rank(
    matrix: &Array2<f64>,
    rhs: &Array1<f64>,
    what: &str,
) -> Result<Array1<f64>> {
    let factors = linalg::svd(matrix)?;
    if factors.rank() < matrix.ncols() {
        return Err(RomError::SingularSystem(format!(
            "{what}: input matrix is rank deficient ({} of {} columns); \
             a zero or degenerate input signal cannot identify the kernel",
            factors.rank(),
            matrix.ncols()
        )));
    }
    factors.pseudo_inverse_apply(rhs)
}

/// Identifies the linear kernel from a small-amplitude response. With a
/// basis the solve happens in the Laguerre subspace and the expanded kernel
/// is returned.
pub fn identify_linear(
    pair: &ResponsePair,
    memory_depth: usize,
    basis: Option<&LaguerreBasis>,
) -> Result<Array1<f64>> {
    let u = build_input_matrix(&pair.input, memory_depth, 1)?;
    match basis {
        Some(b) => {
            let (_, kernel) = b.identify_kernel(&u, &pair.output)?;
            Ok(kernel)
        }
        None => solve_full_rank(u.data(), pair.output.values(), "linear identification"),
    }
}

fn residual_after_linear(h1: &Array1<f64>, pair: &ResponsePair, m: usize) -> Result<Array1<f64>> {
    if h1.len() != m {
        return Err(RomError::DimensionMismatch(format!(
            "h1 has {} entries, memory depth is {m}",
            h1.len()
        )));
    }
    let u = build_input_matrix(&pair.input, m, 1)?;
    let linear_part = u.convolve(h1)?;
    Ok(pair.output.values() - linear_part.values())
}

/// Identifies the diagonal second-order kernel as a correction on top of an
/// already identified `h1`, from a larger-amplitude response.
pub fn identify_second_order(
    h1: &Array1<f64>,
    pair_b: &ResponsePair,
    memory_depth: usize,
    basis: Option<&LaguerreBasis>,
) -> Result<Array1<f64>> {
    let residual = residual_after_linear(h1, pair_b, memory_depth)?;
    let u2 = build_input_matrix(&pair_b.input, memory_depth, 2)?;
    match basis {
        Some(b) => {
            let residual_signal = TimeSignal::new(pair_b.output.grid(), residual)?;
            let (_, kernel) = b.identify_kernel(&u2, &residual_signal)?;
            Ok(kernel)
        }
        None => solve_full_rank(u2.data(), &residual, "second-order identification"),
    }
}

/// Simultaneously identifies diagonal second- and third-order kernels from
/// two responses of increasing amplitude by stacking their residual systems.
pub fn identify_second_and_third(
    h1: &Array1<f64>,
    pair_b: &ResponsePair,
    pair_c: &ResponsePair,
    memory_depth: usize,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let m = memory_depth;
    if pair_b.input.grid().dt() != pair_c.input.grid().dt() {
        return Err(RomError::DimensionMismatch(
            "responses B and C must share the same time step".into(),
        ));
    }
    // Proportional quadratic and cubic blocks make the stacked system
    // singular; that happens exactly when the two inputs coincide.
    let same_len = pair_b.input.len() == pair_c.input.len();
    if same_len {
        let max_gap = pair_b
            .input
            .values()
            .iter()
            .zip(pair_c.input.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let scale = pair_c
            .input
            .values()
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        if max_gap <= 1e-12 * scale.max(1.0) {
            return Err(RomError::SingularSystem(
                "responses B and C use identical input signals; their squared and \
                 cubed input matrices are proportional and h2/h3 cannot be separated"
                    .into(),
            ));
        }
    }

    let rb = residual_after_linear(h1, pair_b, m)?;
    let rc = residual_after_linear(h1, pair_c, m)?;

    let ub2 = build_input_matrix(&pair_b.input, m, 2)?;
    let ub3 = build_input_matrix(&pair_b.input, m, 3)?;
    let uc2 = build_input_matrix(&pair_c.input, m, 2)?;
    let uc3 = build_input_matrix(&pair_c.input, m, 3)?;

    let top = concatenate(Axis(1), &[ub2.data().view(), ub3.data().view()])
        .map_err(|e| RomError::DimensionMismatch(e.to_string()))?;
    let bottom = concatenate(Axis(1), &[uc2.data().view(), uc3.data().view()])
        .map_err(|e| RomError::DimensionMismatch(e.to_string()))?;
    let stacked = concatenate(Axis(0), &[top.view(), bottom.view()])
        .map_err(|e| RomError::DimensionMismatch(e.to_string()))?;
    let rhs = concatenate(Axis(0), &[rb.view(), rc.view()])
        .map_err(|e| RomError::DimensionMismatch(e.to_string()))?;

    let solution = solve_full_rank(&stacked, &rhs, "joint second/third-order identification")?;
    let h2 = solution.slice(ndarray::s![..m]).to_owned();
    let h3 = solution.slice(ndarray::s![m..]).to_owned();
    Ok((h2, h3))
}
