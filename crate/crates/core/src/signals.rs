//! Uniformly sampled reduced-time signals: steps, smoothed steps, sinusoids
//! and seeded white-noise injection.
//!
//! All generators are pure; the same arguments always produce the same
//! vector. Grids start at tau = 0 and step inputs are already at their
//! post-step value at sample 0.

use ndarray::Array1;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Result, RomError};

/// Uniform reduced-time grid: sample `i` sits at `tau_i = i * dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    dt: f64,
    n: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, n: usize) -> Result<Self> {
        if !dt.is_finite() || dt <= 0.0 {
            return Err(RomError::InvalidArgument(format!(
                "time step must be positive and finite, got {dt}"
            )));
        }
        if n < 2 {
            return Err(RomError::InvalidArgument(format!(
                "grid needs at least 2 samples, got {n}"
            )));
        }
        Ok(Self { dt, n })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false // n >= 2 by construction
    }

    /// Reduced time of sample `i`.
    pub fn tau(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn taus(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.tau(i))
    }

    /// Reduced time of the last sample.
    pub fn total_time(&self) -> f64 {
        self.tau(self.n - 1)
    }
}

/// A scalar signal on a [`TimeGrid`]. Pitch inputs are carried in degrees,
/// outputs in coefficient units.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal {
    grid: TimeGrid,
    values: Array1<f64>,
}

impl TimeSignal {
    pub fn new(grid: TimeGrid, values: Array1<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(RomError::DimensionMismatch(format!(
                "signal has {} values for a grid of {} samples",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(RomError::InvalidArgument(
                "signal values must all be finite".into(),
            ));
        }
        Ok(Self { grid, values })
    }

    /// Constant signal at `magnitude` from sample 0 onward.
    pub fn step(grid: TimeGrid, magnitude: f64) -> Result<Self> {
        Self::new(grid, Array1::from_elem(grid.len(), magnitude))
    }

    /// Smoothed step `magnitude * (1 - exp(-tau / tau_ref))`.
    pub fn smoothed_step(grid: TimeGrid, magnitude: f64, tau_ref: f64) -> Result<Self> {
        if !tau_ref.is_finite() || tau_ref <= 0.0 {
            return Err(RomError::InvalidArgument(format!(
                "smoothed-step reference time must be positive, got {tau_ref}"
            )));
        }
        let values = grid
            .taus()
            .map(|tau| magnitude * (1.0 - (-tau / tau_ref).exp()))
            .collect();
        Self::new(grid, values)
    }

    /// Sinusoid `mean + amplitude * sin(k * tau)` with phase zero at tau = 0;
    /// `k` is the reduced frequency.
    pub fn sinusoid(
        grid: TimeGrid,
        mean: f64,
        amplitude: f64,
        reduced_frequency: f64,
    ) -> Result<Self> {
        if amplitude < 0.0 {
            return Err(RomError::InvalidArgument(format!(
                "sinusoid amplitude must be nonnegative, got {amplitude}"
            )));
        }
        let values = grid
            .taus()
            .map(|tau| mean + amplitude * (reduced_frequency * tau).sin())
            .collect();
        Self::new(grid, values)
    }

    /// Adds i.i.d. zero-mean Gaussian noise of standard deviation `sigma`.
    /// Deterministic for a given seed.
    pub fn with_white_noise(&self, sigma: f64, seed: u64) -> Result<Self> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(RomError::InvalidArgument(format!(
                "noise standard deviation must be nonnegative, got {sigma}"
            )));
        }
        if sigma == 0.0 {
            return Ok(self.clone());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, sigma)
            .map_err(|e| RomError::InvalidArgument(format!("noise distribution: {e}")))?;
        let values = self.values.mapv(|v| v + normal.sample(&mut rng));
        Self::new(self.grid, values)
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Returns a copy with `offset` subtracted from every sample.
    pub fn minus_offset(&self, offset: f64) -> Result<Self> {
        Self::new(self.grid, self.values.mapv(|v| v - offset))
    }

    /// Two-column CSV (`tau,value`) with a one-line header.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(24 * self.len());
        out.push_str("tau,value\n");
        for (tau, v) in self.grid.taus().zip(self.values.iter()) {
            let _ = writeln!(out, "{tau},{v}");
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    /// Parses the two-column CSV layout. Accepts LF and CRLF line endings.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut taus = Vec::new();
        let mut values = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r').trim();
            if line.is_empty() {
                continue;
            }
            if lineno == 0 {
                // header; tolerate arbitrary column names
                continue;
            }
            let mut parts = line.split(',');
            let (Some(a), Some(b)) = (parts.next(), parts.next()) else {
                return Err(RomError::Dataset(format!(
                    "line {}: expected `tau,value`, got `{line}`",
                    lineno + 1
                )));
            };
            let tau: f64 = a.trim().parse().map_err(|_| {
                RomError::Dataset(format!("line {}: bad tau `{a}`", lineno + 1))
            })?;
            let v: f64 = b.trim().parse().map_err(|_| {
                RomError::Dataset(format!("line {}: bad value `{b}`", lineno + 1))
            })?;
            taus.push(tau);
            values.push(v);
        }
        if taus.len() < 2 {
            return Err(RomError::Dataset(
                "signal CSV needs at least 2 samples".into(),
            ));
        }
        let dt = taus[1] - taus[0];
        let grid = TimeGrid::new(dt, taus.len())?;
        for (i, tau) in taus.iter().enumerate() {
            if (tau - grid.tau(i)).abs() > 1e-9 * dt.max(1.0) {
                return Err(RomError::Dataset(format!(
                    "nonuniform time grid at row {}: tau {} vs expected {}",
                    i,
                    tau,
                    grid.tau(i)
                )));
            }
        }
        Self::new(grid, Array1::from_vec(values))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_csv_str(&text).map_err(|e| match e {
            RomError::Dataset(msg) => RomError::Dataset(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

/// Default noise level used when a dataset does not specify one:
/// half a percent of the signal's steady-state magnitude.
pub fn default_noise_sigma(steady_magnitude: f64) -> f64 {
    0.005 * steady_magnitude.abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn step_is_constant() {
        let grid = TimeGrid::new(1.0, 3).unwrap();
        let s = TimeSignal::step(grid, 2.0).unwrap();
        assert_eq!(s.values().as_slice().unwrap(), &[2.0, 2.0, 2.0]);

        let zero = TimeSignal::step(grid, 0.0).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn step_covers_long_simulation_horizon() {
        let grid = TimeGrid::new(0.15, 758).unwrap();
        let s = TimeSignal::step(grid, 1.0).unwrap();
        assert!(s.values().iter().all(|&v| v == 1.0));
        // 757 * 0.15 = 113.55, the usual full-development horizon
        assert_relative_eq!(grid.total_time(), 113.6, epsilon = 0.2);
    }

    #[test]
    fn smoothed_step_matches_closed_form() {
        let grid = TimeGrid::new(0.6, 2).unwrap();
        let s = TimeSignal::smoothed_step(grid, 1.0, 0.6).unwrap();
        assert_eq!(s.values()[0], 0.0);
        assert_relative_eq!(s.values()[1], 1.0 - (-1.0f64).exp(), max_relative = 1e-15);
    }

    #[test]
    fn smoothed_step_saturates() {
        let grid = TimeGrid::new(0.5, 21).unwrap(); // last sample at tau = 10
        let s = TimeSignal::smoothed_step(grid, 2.0, 0.6).unwrap();
        assert!((2.0 - s.values()[20]).abs() < 1e-6);
    }

    #[test]
    fn smoothed_step_monotone_for_positive_magnitude() {
        let grid = TimeGrid::new(0.3, 100).unwrap();
        let s = TimeSignal::smoothed_step(grid, 1.5, 0.6).unwrap();
        for w in s.values().as_slice().unwrap().windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn smoothed_step_rejects_bad_tau_ref() {
        let grid = TimeGrid::new(0.5, 4).unwrap();
        assert!(TimeSignal::smoothed_step(grid, 1.0, 0.0).is_err());
        assert!(TimeSignal::smoothed_step(grid, 1.0, -0.3).is_err());
    }

    #[test]
    fn sinusoid_phase_and_peak() {
        let k = 0.3;
        let quarter = std::f64::consts::FRAC_PI_2 / k;
        let grid = TimeGrid::new(quarter / 10.0, 11).unwrap(); // sample 10 at the peak
        let s = TimeSignal::sinusoid(grid, 0.0, 1.0, k).unwrap();
        assert_eq!(s.values()[0], 0.0);
        assert_relative_eq!(s.values()[10], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn sinusoid_respects_mean_and_amplitude_bounds() {
        let grid = TimeGrid::new(0.25, 500).unwrap();
        let s = TimeSignal::sinusoid(grid, 3.16, 4.59, 0.3).unwrap();
        let lo = s.values().iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = s.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo >= 3.16 - 4.59 - 1e-12);
        assert!(hi <= 3.16 + 4.59 + 1e-12);
        assert!(lo < -1.3 && hi > 7.6); // both extremes are actually visited
    }

    #[test]
    fn zero_noise_is_identity() {
        let grid = TimeGrid::new(0.1, 32).unwrap();
        let s = TimeSignal::sinusoid(grid, 1.0, 0.5, 0.3).unwrap();
        let noisy = s.with_white_noise(0.0, 42).unwrap();
        assert_eq!(s, noisy);
    }

    #[test]
    fn noise_statistics_match_request() {
        let grid = TimeGrid::new(1.0, 10_000).unwrap();
        let zero = TimeSignal::step(grid, 0.0).unwrap();
        let noisy = zero.with_white_noise(1.0, 7).unwrap();
        let n = noisy.len() as f64;
        let mean = noisy.values().sum() / n;
        let var = noisy.values().mapv(|v| (v - mean).powi(2)).sum() / (n - 1.0);
        assert!(mean.abs() < 3.0 / n.sqrt(), "mean {mean}");
        assert!((var.sqrt() - 1.0).abs() < 0.05, "std {}", var.sqrt());
    }

    #[test]
    fn noise_is_deterministic_per_seed() {
        let grid = TimeGrid::new(0.25, 64).unwrap();
        let s = TimeSignal::step(grid, 1.0).unwrap();
        let a = s.with_white_noise(0.01, 3).unwrap();
        let b = s.with_white_noise(0.01, 3).unwrap();
        let c = s.with_white_noise(0.01, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn csv_round_trip_and_crlf() {
        let grid = TimeGrid::new(0.25, 5).unwrap();
        let s = TimeSignal::sinusoid(grid, 0.1, 2.0, 0.3).unwrap();
        let text = s.to_csv_string();
        let back = TimeSignal::from_csv_str(&text).unwrap();
        assert_eq!(s, back);

        let crlf = text.replace('\n', "\r\n");
        let back2 = TimeSignal::from_csv_str(&crlf).unwrap();
        assert_eq!(s, back2);
    }

    #[test]
    fn csv_rejects_nonuniform_grid() {
        let text = "tau,value\n0,1\n0.5,2\n1.7,3\n";
        assert!(TimeSignal::from_csv_str(text).is_err());
    }
}
