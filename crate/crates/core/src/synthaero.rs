//! Synthetic aerodynamic plant: a three-lag-state ODE system with
//! parametric coefficients that produces linear and nonlinear lift
//! responses. It doubles as the data generator and as the ground-truth
//! oracle for verification.
//!
//! The lag states follow the Leishman-style indicial form
//! `dx_i/dtau = -(2V/c) b_i x_i + u` with the pitch input converted to
//! radians at this boundary, so the lift-curve slope keeps its per-radian
//! meaning. Lift output combines the states through modified Jones
//! amplitudes A_1, A_2 plus a slow A_3 mode shaped to mimic dynamic-stall
//! behavior; the nonlinear variant adds a product of the normalized second
//! and third lag states weighted by `c_nl`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, RomError};
use crate::signals::TimeSignal;

const DEG_TO_RAD: f64 = std::f64::consts::PI / 180.0;

// Calibrated parameter box of the A_3 ramp.
const A3_MACH_LO: f64 = 0.40;
const A3_MACH_SPAN: f64 = 0.45;
const A3_ALPHA_LO_DEG: f64 = -2.0;
const A3_ALPHA_SPAN_DEG: f64 = 10.0;

/// Coefficients of the synthetic plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantConfig {
    /// Incompressible lift-curve slope, per radian.
    pub cl_alpha_base: f64,
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    /// Weight of the quadratic lag-state product in the nonlinear lift.
    pub c_nl: f64,
    /// 2V/c, converts between lag-state decay rates and reduced time.
    pub velocity_ratio: f64,
    /// [min, max] range of the A_3 coefficient, both nonpositive.
    pub a3_range: [f64; 2],
    /// Output noise standard deviation; None picks the dataset default.
    pub noise_sigma: Option<f64>,
    pub seed: u64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            cl_alpha_base: 2.0 * std::f64::consts::PI,
            a1: 0.670,
            a2: 0.330,
            b1: 0.30,
            b2: 0.0455,
            b3: 0.15,
            c_nl: -0.35,
            velocity_ratio: 1.0,
            a3_range: [-0.15, 0.0],
            noise_sigma: Some(0.0),
            seed: 0,
        }
    }
}

impl PlantConfig {
    pub fn validate(&self) -> Result<()> {
        if self.b1 <= 0.0 || self.b2 <= 0.0 || self.b3 <= 0.0 {
            return Err(RomError::Config(
                "lag rates b1, b2, b3 must be positive".into(),
            ));
        }
        if self.velocity_ratio <= 0.0 {
            return Err(RomError::Config("velocity ratio must be positive".into()));
        }
        if self.a3_range[0] > self.a3_range[1] || self.a3_range[1] > 0.0 {
            return Err(RomError::Config(
                "a3_range must be [min, max] with both nonpositive".into(),
            ));
        }
        Ok(())
    }
}

/// A location in the (Mach, alpha_0) parameter space, with optional steady
/// aerodynamic features used as interpolator inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterPoint {
    pub mach: f64,
    /// Freestream angle of attack, degrees.
    pub alpha0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steady_cl: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steady_cm: Option<f64>,
}

impl ParameterPoint {
    pub fn new(mach: f64, alpha0: f64) -> Result<Self> {
        if !(mach > 0.0 && mach < 1.0) {
            return Err(RomError::InvalidArgument(format!(
                "Mach number must lie in (0, 1), got {mach}"
            )));
        }
        Ok(Self {
            mach,
            alpha0,
            steady_cl: None,
            steady_cm: None,
        })
    }
}

/// Lift-curve slope corrected for compressibility by the Prandtl-Glauert
/// factor `1 / sqrt(1 - M^2)`.
pub fn lift_slope(config: &PlantConfig, mach: f64) -> Result<f64> {
    if !(mach > 0.0 && mach < 1.0) {
        return Err(RomError::InvalidArgument(format!(
            "Prandtl-Glauert correction requires 0 < M < 1, got {mach}"
        )));
    }
    Ok(config.cl_alpha_base / (1.0 - mach * mach).sqrt())
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Smooth map of (M, alpha_0) into the configured A_3 range: zero at the
/// low corner of the box, saturating at the strongest value in the high
/// corner, nonlinear in both parameters.
pub fn a3_coefficient(config: &PlantConfig, point: &ParameterPoint) -> f64 {
    let ramp_m = smoothstep((point.mach - A3_MACH_LO) / A3_MACH_SPAN);
    let ramp_a = smoothstep((point.alpha0 - A3_ALPHA_LO_DEG) / A3_ALPHA_SPAN_DEG);
    let [a3_min, a3_max] = config.a3_range;
    a3_max + (a3_min - a3_max) * ramp_m * ramp_a
}

/// Steady lift coefficient of the linearized plant at the trim angle;
/// used as the steady feature attached to sampled points.
pub fn steady_lift(config: &PlantConfig, point: &ParameterPoint) -> Result<f64> {
    let slope = lift_slope(config, point.mach)?;
    let a3 = a3_coefficient(config, point);
    Ok(slope * point.alpha0 * DEG_TO_RAD * (config.a1 + config.a2 + a3))
}

/// Trajectories of the three lag states for `input` (degrees), integrated
/// with `refine` fourth-order Runge-Kutta substeps per grid interval and
/// linear interpolation of the input between samples. Steady state of each
/// lag state under a constant input u is `u / ((2V/c) b_i)` (radians).
pub fn lag_states(
    config: &PlantConfig,
    input: &TimeSignal,
    refine: usize,
) -> Result<[Vec<f64>; 3]> {
    config.validate()?;
    if refine == 0 {
        return Err(RomError::InvalidArgument("refine must be at least 1".into()));
    }
    let n = input.len();
    let dt = input.grid().dt();
    let u = input.values();
    let rates = [
        config.velocity_ratio * config.b1,
        config.velocity_ratio * config.b2,
        config.velocity_ratio * config.b3,
    ];

    let mut states = [
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    ];
    let mut x = [0.0f64; 3];
    for s in &mut states {
        s.push(0.0);
    }

    let h = dt / refine as f64;
    for i in 0..n - 1 {
        let u0 = u[i] * DEG_TO_RAD;
        let u1 = u[i + 1] * DEG_TO_RAD;
        for sub in 0..refine {
            // linear interpolation of u inside the interval
            let f0 = sub as f64 / refine as f64;
            let f1 = (sub as f64 + 0.5) / refine as f64;
            let f2 = (sub as f64 + 1.0) / refine as f64;
            let ua = u0 + (u1 - u0) * f0;
            let um = u0 + (u1 - u0) * f1;
            let ub = u0 + (u1 - u0) * f2;
            for (k, rate) in rates.iter().enumerate() {
                let deriv = |xv: f64, uv: f64| -rate * xv + uv;
                let k1 = deriv(x[k], ua);
                let k2 = deriv(x[k] + 0.5 * h * k1, um);
                let k3 = deriv(x[k] + 0.5 * h * k2, um);
                let k4 = deriv(x[k] + h * k3, ub);
                x[k] += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
        }
        for (k, s) in states.iter_mut().enumerate() {
            s.push(x[k]);
        }
    }
    Ok(states)
}

fn lift_output(
    config: &PlantConfig,
    slope: f64,
    a3: f64,
    states: &[Vec<f64>; 3],
    nonlinear: bool,
) -> Vec<f64> {
    let nu = config.velocity_ratio;
    (0..states[0].len())
        .map(|i| {
            // normalized lag states; each tends to the input value at steady state
            let z1 = nu * config.b1 * states[0][i];
            let z2 = nu * config.b2 * states[1][i];
            let z3 = nu * config.b3 * states[2][i];
            let mut c = config.a1 * z1 + config.a2 * z2 + a3 * z3;
            if nonlinear {
                c -= config.c_nl * z2 * z3;
            }
            slope * c
        })
        .collect()
}

fn response(
    config: &PlantConfig,
    point: &ParameterPoint,
    input: &TimeSignal,
    nonlinear: bool,
    refine: usize,
    noise_sigma: f64,
) -> Result<TimeSignal> {
    let slope = lift_slope(config, point.mach)?;
    let a3 = a3_coefficient(config, point);
    let states = lag_states(config, input, refine)?;
    let values = lift_output(config, slope, a3, &states, nonlinear);
    let signal = TimeSignal::new(input.grid(), values.into())?;
    if noise_sigma > 0.0 {
        signal.with_white_noise(noise_sigma, config.seed)
    } else {
        Ok(signal)
    }
}

/// Simulates the lift response to `input` (pitch perturbation in degrees),
/// with white noise of `noise_sigma` added when configured. Deterministic
/// for a given config and seed.
pub fn simulate(
    config: &PlantConfig,
    point: &ParameterPoint,
    input: &TimeSignal,
    nonlinear: bool,
) -> Result<TimeSignal> {
    let sigma = config.noise_sigma.unwrap_or(0.0);
    response(config, point, input, nonlinear, 1, sigma)
}

/// Verification reference: same dynamics with noise forced off and a halved
/// integrator step.
pub fn exact_response_oracle(
    config: &PlantConfig,
    point: &ParameterPoint,
    input: &TimeSignal,
    nonlinear: bool,
) -> Result<TimeSignal> {
    response(config, point, input, nonlinear, 2, 0.0)
}
