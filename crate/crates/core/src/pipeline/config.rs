//! Run configuration: JSON-overridable settings for the full pipeline.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::error::{Result, RomError};
use crate::sampling::ParameterBox;
use crate::synthaero::PlantConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitFractions {
    pub train: f64,
    pub test: f64,
    pub validation: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        // 45 / 15 / 10 out of 70
        Self {
            train: 45.0 / 70.0,
            test: 15.0 / 70.0,
            validation: 10.0 / 70.0,
        }
    }
}

impl SplitFractions {
    pub fn as_tuple(&self) -> (f64, f64, f64) {
        (self.train, self.test, self.validation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub dt: f64,
    pub samples: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            dt: 0.25,
            samples: 400,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LaguerreConfig {
    pub enabled: bool,
    pub order: usize,
    /// None picks the decay-matched default for the memory depth.
    pub time_scale: Option<f64>,
}

impl Default for LaguerreConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            order: 15,
            time_scale: None,
        }
    }
}

/// Which excitation signal drives the identification responses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExcitationKind {
    Step,
    SmoothedStep { tau_ref: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExcitationConfig {
    #[serde(flatten)]
    pub kind: ExcitationKind,
    pub linear_amplitude_deg: f64,
    pub nonlinear_amplitude_deg: f64,
}

impl Default for ExcitationConfig {
    fn default() -> Self {
        Self {
            kind: ExcitationKind::Step,
            linear_amplitude_deg: 1.0,
            nonlinear_amplitude_deg: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpolatorChoice {
    Gpr,
    Fcnn,
    #[default]
    Both,
    /// Use the directly identified kernels at validation points; a baseline
    /// that isolates series-truncation error from interpolation error.
    None,
}

impl InterpolatorChoice {
    pub fn wants_gpr(&self) -> bool {
        matches!(self, InterpolatorChoice::Gpr | InterpolatorChoice::Both)
    }

    pub fn wants_fcnn(&self) -> bool {
        matches!(self, InterpolatorChoice::Fcnn | InterpolatorChoice::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Hyperparameter-search budget.
    pub trials: usize,
    /// Epoch cap for each search trial.
    pub trial_epochs: usize,
    /// Epoch cap for the final fit with the winning configuration.
    pub final_epochs: usize,
    pub patience: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            trials: 10,
            trial_epochs: 1500,
            final_epochs: 5000,
            patience: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GprFitConfig {
    pub jitter: f64,
    pub multi_starts: usize,
    pub max_iterations: usize,
    pub per_output: bool,
}

impl Default for GprFitConfig {
    fn default() -> Self {
        Self {
            jitter: 1e-8,
            multi_starts: 5,
            max_iterations: 60,
            per_output: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidationConfig {
    /// Reduced frequency of the validation sinusoid.
    pub reduced_frequency: f64,
    /// Settled periods at the end of the signal used for error metrics.
    pub settled_periods: f64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            reduced_frequency: 0.3,
            settled_periods: 2.0,
        }
    }
}

/// Full pipeline configuration. Every field has a default, so a config file
/// only needs the overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub parameter_box: ParameterBox,
    pub samples: usize,
    pub split: SplitFractions,
    pub grid: GridConfig,
    /// None uses the full response length (square solves).
    pub memory_depth: Option<usize>,
    pub laguerre: LaguerreConfig,
    pub plant: PlantConfig,
    pub interpolator: InterpolatorChoice,
    pub search: SearchConfig,
    pub gpr: GprFitConfig,
    pub excitation: ExcitationConfig,
    pub validation: ValidationConfig,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            parameter_box: ParameterBox {
                mach_range: [0.40, 0.85],
                alpha0_range: [-2.0, 8.0],
            },
            samples: 70,
            split: SplitFractions::default(),
            grid: GridConfig::default(),
            memory_depth: None,
            laguerre: LaguerreConfig::default(),
            plant: PlantConfig {
                noise_sigma: None,
                ..PlantConfig::default()
            },
            interpolator: InterpolatorChoice::Both,
            search: SearchConfig::default(),
            gpr: GprFitConfig::default(),
            excitation: ExcitationConfig::default(),
            validation: ValidationConfig::default(),
            seed: 2024,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: Self = serde_json::from_str(&text)
            .map_err(|e| RomError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn memory_depth(&self) -> usize {
        self.memory_depth.unwrap_or(self.grid.samples)
    }

    pub fn validate(&self) -> Result<()> {
        self.parameter_box.validate()?;
        self.plant.validate()?;
        if self.samples == 0 {
            return Err(RomError::Config("samples must be at least 1".into()));
        }
        if self.grid.dt <= 0.0 || self.grid.samples < 2 {
            return Err(RomError::Config("grid needs dt > 0 and at least 2 samples".into()));
        }
        let m = self.memory_depth();
        if m == 0 || m > self.grid.samples {
            return Err(RomError::Config(format!(
                "memory depth must satisfy 1 <= m <= {}, got {m}",
                self.grid.samples
            )));
        }
        if self.laguerre.enabled && (self.laguerre.order == 0 || self.laguerre.order > m) {
            return Err(RomError::Config(format!(
                "Laguerre order must satisfy 1 <= R <= {m}"
            )));
        }
        if self.excitation.linear_amplitude_deg <= 0.0
            || self.excitation.nonlinear_amplitude_deg <= self.excitation.linear_amplitude_deg
        {
            return Err(RomError::Config(
                "excitation amplitudes must be positive and strictly increasing".into(),
            ));
        }
        if self.validation.reduced_frequency <= 0.0 || self.validation.settled_periods <= 0.0 {
            return Err(RomError::Config(
                "validation signal needs positive frequency and settled periods".into(),
            ));
        }
        if self.search.trials == 0 && self.interpolator.wants_fcnn() {
            return Err(RomError::Config(
                "FCNN interpolation needs at least one search trial".into(),
            ));
        }
        Ok(())
    }
}
