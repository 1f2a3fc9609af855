//! Gaussian process regression from parameter-space features to kernel
//! coefficient vectors.
//!
//! The covariance is a nonnegative mix of an RBF and a Matern 5/2 term.
//! Hyperparameters maximize the log marginal likelihood under a bounded
//! quasi-Newton search with numerical gradients and seeded multi-starts.
//! By default one set of hyperparameters is shared across all output
//! columns so a single Cholesky factorization serves every coefficient;
//! per-output fitting stays switchable.

use nalgebra::{DMatrix, DVector, Dyn};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Result, RomError};
use crate::optimize::{minimize_bounded, Bounds};

/// Squared-exponential covariance `sigma_f^2 exp(-r^2 / (2 l^2))`.
pub fn rbf_kernel(x: &[f64], y: &[f64], signal_variance: f64, length_scale: f64) -> f64 {
    let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    if r2 == 0.0 {
        return signal_variance;
    }
    signal_variance * (-0.5 * r2 / (length_scale * length_scale)).exp()
}

/// Matern covariance with smoothness parameter sqrt(5):
/// `sigma_f^2 (1 + nu r / l + (nu r)^2 / (3 l^2)) exp(-nu r / l)`.
pub fn matern52_kernel(x: &[f64], y: &[f64], signal_variance: f64, length_scale: f64) -> f64 {
    let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    if r2 == 0.0 {
        return signal_variance;
    }
    let nu_r = 5.0f64.sqrt() * r2.sqrt() / length_scale;
    signal_variance * (1.0 + nu_r + nu_r * nu_r / 3.0) * (-nu_r).exp()
}

/// Amplitude and length scale of one covariance term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceTerm {
    pub signal_variance: f64,
    pub length_scale: f64,
}

/// Hyperparameters of the mixed covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GprHyperparameters {
    pub rbf: CovarianceTerm,
    pub matern: CovarianceTerm,
    /// Nonnegative mix weights, RBF first.
    pub mix_weights: [f64; 2],
}

impl Default for GprHyperparameters {
    fn default() -> Self {
        Self {
            rbf: CovarianceTerm {
                signal_variance: 1.0,
                length_scale: 1.0,
            },
            matern: CovarianceTerm {
                signal_variance: 1.0,
                length_scale: 1.0,
            },
            mix_weights: [0.5, 0.5],
        }
    }
}

impl GprHyperparameters {
    pub fn covariance(&self, x: &[f64], y: &[f64]) -> f64 {
        self.mix_weights[0] * rbf_kernel(x, y, self.rbf.signal_variance, self.rbf.length_scale)
            + self.mix_weights[1]
                * matern52_kernel(x, y, self.matern.signal_variance, self.matern.length_scale)
    }

    fn to_vector(self) -> Vec<f64> {
        vec![
            self.rbf.signal_variance.ln(),
            self.rbf.length_scale.ln(),
            self.matern.signal_variance.ln(),
            self.matern.length_scale.ln(),
            self.mix_weights[0],
            self.mix_weights[1],
        ]
    }

    fn from_vector(v: &[f64]) -> Self {
        Self {
            rbf: CovarianceTerm {
                signal_variance: v[0].exp(),
                length_scale: v[1].exp(),
            },
            matern: CovarianceTerm {
                signal_variance: v[2].exp(),
                length_scale: v[3].exp(),
            },
            mix_weights: [v[4], v[5]],
        }
    }

    fn optimizer_bounds() -> Bounds {
        Bounds {
            lo: vec![
                1e-4f64.ln(),
                1e-2f64.ln(),
                1e-4f64.ln(),
                1e-2f64.ln(),
                0.0,
                0.0,
            ],
            hi: vec![
                1e4f64.ln(),
                1e2f64.ln(),
                1e4f64.ln(),
                1e2f64.ln(),
                10.0,
                10.0,
            ],
        }
    }
}

/// Whether hyperparameters are shared across output columns or fitted
/// independently per column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HyperSharing {
    #[default]
    Shared,
    PerOutput,
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub sharing: HyperSharing,
    pub multi_starts: usize,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            sharing: HyperSharing::Shared,
            multi_starts: 5,
            max_iterations: 60,
            seed: 0,
        }
    }
}

/// Everything persisted to disk; the Gram factorization is rebuilt on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct GprModelData {
    sharing: HyperSharing,
    jitter: f64,
    feature_mean: Vec<f64>,
    feature_std: Vec<f64>,
    target_mean: Vec<f64>,
    hyperparameters: Vec<GprHyperparameters>,
    training_inputs: Vec<Vec<f64>>,
    training_targets: Vec<Vec<f64>>,
}

struct GramFactor {
    chol: nalgebra::linalg::Cholesky<f64, Dyn>,
    /// `K^{-1} Y` for the columns this factor serves.
    alpha: DMatrix<f64>,
    columns: Vec<usize>,
}

/// A fitted Gaussian process over `q` output columns.
pub struct GprModel {
    data: GprModelData,
    x_std: Vec<Vec<f64>>,
    factors: Vec<GramFactor>,
}

fn standardize_rows(inputs: &Array2<f64>, mean: &[f64], std: &[f64]) -> Vec<Vec<f64>> {
    inputs
        .rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(j, v)| (v - mean[j]) / std[j])
                .collect()
        })
        .collect()
}

fn gram_matrix(hp: &GprHyperparameters, rows: &[Vec<f64>], jitter: f64) -> DMatrix<f64> {
    let n = rows.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = hp.covariance(&rows[i], &rows[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] += jitter;
    }
    k
}

/// Cholesky with jitter escalation: multiply by 10 until success or the
/// 1e-4 ceiling is passed.
fn cholesky_with_escalation(
    hp: &GprHyperparameters,
    rows: &[Vec<f64>],
    jitter: f64,
) -> Result<(nalgebra::linalg::Cholesky<f64, Dyn>, f64)> {
    let mut current = jitter.max(1e-12);
    loop {
        let k = gram_matrix(hp, rows, current);
        if let Some(chol) = k.cholesky() {
            return Ok((chol, current));
        }
        current *= 10.0;
        if current > 1e-4 {
            return Err(RomError::Numerical(format!(
                "Gram matrix stayed indefinite up to jitter 1e-4 \
                 (n = {}, hyperparameters {hp:?})",
                rows.len()
            )));
        }
    }
}

/// Negative log marginal likelihood summed over the given target columns.
fn negative_lml(
    hp: &GprHyperparameters,
    rows: &[Vec<f64>],
    targets: &DMatrix<f64>,
    jitter: f64,
) -> f64 {
    let n = rows.len();
    let q = targets.ncols();
    let Ok((chol, _)) = cholesky_with_escalation(hp, rows, jitter) else {
        return f64::INFINITY;
    };
    let alpha = chol.solve(targets);
    let mut data_term = 0.0;
    for c in 0..q {
        data_term += targets.column(c).dot(&alpha.column(c));
    }
    let log_det: f64 = (0..n).map(|i| chol.l_dirty()[(i, i)].ln()).sum::<f64>() * 2.0;
    0.5 * data_term
        + 0.5 * q as f64 * log_det
        + 0.5 * (n * q) as f64 * (2.0 * std::f64::consts::PI).ln()
}

fn optimize_hyperparameters(
    initial: GprHyperparameters,
    rows: &[Vec<f64>],
    targets: &DMatrix<f64>,
    jitter: f64,
    options: &FitOptions,
) -> GprHyperparameters {
    let bounds = GprHyperparameters::optimizer_bounds();
    let mut best_theta = initial.to_vector();
    let mut best_value = f64::INFINITY;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);

    for start in 0..options.multi_starts.max(1) {
        let theta0: Vec<f64> = if start == 0 {
            initial.to_vector()
        } else {
            bounds
                .lo
                .iter()
                .zip(&bounds.hi)
                .map(|(&lo, &hi)| lo + rng.random::<f64>() * (hi - lo))
                .collect()
        };
        let mut objective = |theta: &[f64]| {
            negative_lml(&GprHyperparameters::from_vector(theta), rows, targets, jitter)
        };
        let result = minimize_bounded(
            &mut objective,
            &theta0,
            &bounds,
            options.max_iterations,
            1e-8,
        );
        if result.value < best_value {
            best_value = result.value;
            best_theta = result.x;
        }
    }
    GprHyperparameters::from_vector(&best_theta)
}

/// Fits a GPR model. Features are standardized and targets centered with
/// training statistics; `jitter` is the diagonal regularization added to
/// the Gram matrix.
pub fn fit(
    inputs: &Array2<f64>,
    targets: &Array2<f64>,
    initial: GprHyperparameters,
    jitter: f64,
    options: FitOptions,
) -> Result<GprModel> {
    let (n, d) = inputs.dim();
    let (nt, q) = targets.dim();
    if n == 0 || d == 0 || q == 0 {
        return Err(RomError::InvalidArgument(
            "GPR fit needs at least one row, feature and target column".into(),
        ));
    }
    if nt != n {
        return Err(RomError::DimensionMismatch(format!(
            "{n} input rows vs {nt} target rows"
        )));
    }
    if jitter < 0.0 {
        return Err(RomError::InvalidArgument("jitter must be nonnegative".into()));
    }

    let feature_mean: Vec<f64> = (0..d).map(|j| inputs.column(j).sum() / n as f64).collect();
    let feature_std: Vec<f64> = (0..d)
        .map(|j| {
            let mean = feature_mean[j];
            let var = inputs.column(j).mapv(|v| (v - mean).powi(2)).sum() / n as f64;
            let std = var.sqrt();
            if std < 1e-12 {
                1.0
            } else {
                std
            }
        })
        .collect();
    let target_mean: Vec<f64> = (0..q).map(|c| targets.column(c).sum() / n as f64).collect();

    let x_std = standardize_rows(inputs, &feature_mean, &feature_std);
    let y_centered = DMatrix::from_fn(n, q, |i, c| targets[(i, c)] - target_mean[c]);

    let data = GprModelData {
        sharing: options.sharing,
        jitter,
        feature_mean,
        feature_std,
        target_mean,
        hyperparameters: Vec::new(),
        training_inputs: inputs.rows().into_iter().map(|r| r.to_vec()).collect(),
        training_targets: targets.rows().into_iter().map(|r| r.to_vec()).collect(),
    };

    let mut model = GprModel {
        data,
        x_std,
        factors: Vec::new(),
    };

    match options.sharing {
        HyperSharing::Shared => {
            let hp = optimize_hyperparameters(initial, &model.x_std, &y_centered, jitter, &options);
            model.data.hyperparameters = vec![hp];
        }
        HyperSharing::PerOutput => {
            for c in 0..q {
                let column = DMatrix::from_fn(n, 1, |i, _| y_centered[(i, c)]);
                let opts = FitOptions {
                    seed: options.seed.wrapping_add(c as u64),
                    ..options.clone()
                };
                let hp = optimize_hyperparameters(initial, &model.x_std, &column, jitter, &opts);
                model.data.hyperparameters.push(hp);
            }
        }
    }

    model.rebuild_factors()?;
    Ok(model)
}

impl GprModel {
    fn y_centered(&self) -> DMatrix<f64> {
        let n = self.data.training_targets.len();
        let q = self.data.target_mean.len();
        DMatrix::from_fn(n, q, |i, c| {
            self.data.training_targets[i][c] - self.data.target_mean[c]
        })
    }

    fn rebuild_factors(&mut self) -> Result<()> {
        let y = self.y_centered();
        let q = y.ncols();
        self.factors.clear();
        match self.data.sharing {
            HyperSharing::Shared => {
                let hp = self.data.hyperparameters[0];
                let (chol, _) = cholesky_with_escalation(&hp, &self.x_std, self.data.jitter)?;
                let alpha = chol.solve(&y);
                self.factors.push(GramFactor {
                    chol,
                    alpha,
                    columns: (0..q).collect(),
                });
            }
            HyperSharing::PerOutput => {
                for c in 0..q {
                    let hp = self.data.hyperparameters[c];
                    let (chol, _) = cholesky_with_escalation(&hp, &self.x_std, self.data.jitter)?;
                    let column = DMatrix::from_fn(y.nrows(), 1, |i, _| y[(i, c)]);
                    let alpha = chol.solve(&column);
                    self.factors.push(GramFactor {
                        chol,
                        alpha,
                        columns: vec![c],
                    });
                }
            }
        }
        Ok(())
    }

    pub fn sharing(&self) -> HyperSharing {
        self.data.sharing
    }

    pub fn hyperparameters(&self) -> &[GprHyperparameters] {
        &self.data.hyperparameters
    }

    pub fn jitter(&self) -> f64 {
        self.data.jitter
    }

    pub fn num_outputs(&self) -> usize {
        self.data.target_mean.len()
    }

    pub fn num_features(&self) -> usize {
        self.data.feature_mean.len()
    }

    fn standardize_query(&self, query: &Array1<f64>) -> Result<Vec<f64>> {
        if query.len() != self.num_features() {
            return Err(RomError::DimensionMismatch(format!(
                "query has {} features, model expects {}",
                query.len(),
                self.num_features()
            )));
        }
        Ok(query
            .iter()
            .enumerate()
            .map(|(j, v)| (v - self.data.feature_mean[j]) / self.data.feature_std[j])
            .collect())
    }

    /// Posterior mean and variance per output column. Variances are clamped
    /// at zero after floating-point cancellation.
    pub fn predict(&self, query: &Array1<f64>) -> Result<(Array1<f64>, Array1<f64>)> {
        let xq = self.standardize_query(query)?;
        let q = self.num_outputs();
        let n = self.x_std.len();
        let mut mean = Array1::zeros(q);
        let mut variance = Array1::zeros(q);
        for (fi, factor) in self.factors.iter().enumerate() {
            let hp = match self.data.sharing {
                HyperSharing::Shared => self.data.hyperparameters[0],
                HyperSharing::PerOutput => self.data.hyperparameters[fi],
            };
            let k_star = DVector::from_fn(n, |i, _| hp.covariance(&self.x_std[i], &xq));
            let v = factor.chol.solve(&k_star);
            let prior = hp.covariance(&xq, &xq);
            let var = (prior - k_star.dot(&v)).max(0.0);
            for (local, &c) in factor.columns.iter().enumerate() {
                mean[c] = k_star.dot(&factor.alpha.column(local)) + self.data.target_mean[c];
                variance[c] = var;
            }
        }
        Ok((mean, variance))
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(&self.data)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let data: GprModelData = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let n = data.training_inputs.len();
        if n == 0 || data.hyperparameters.is_empty() {
            return Err(RomError::Dataset("empty GPR model file".into()));
        }
        let inputs = Array2::from_shape_fn((n, data.feature_mean.len()), |(i, j)| {
            data.training_inputs[i][j]
        });
        let x_std = standardize_rows(&inputs, &data.feature_mean, &data.feature_std);
        let mut model = GprModel {
            data,
            x_std,
            factors: Vec::new(),
        };
        model.rebuild_factors()?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::{array, Array2};

    fn options(seed: u64) -> FitOptions {
        FitOptions {
            multi_starts: 3,
            max_iterations: 40,
            seed,
            ..FitOptions::default()
        }
    }

    #[test]
    fn rbf_values() {
        let sf2 = 2.3;
        assert_eq!(rbf_kernel(&[0.4, -1.0], &[0.4, -1.0], sf2, 0.7), sf2);
        // distance equal to the length scale
        let v = rbf_kernel(&[0.0], &[0.7], 1.0, 0.7);
        assert_relative_eq!(v, (-0.5f64).exp(), max_relative = 1e-12);
        assert!(rbf_kernel(&[0.0], &[100.0], 1.0, 0.5) < 1e-300);
    }

    #[test]
    fn matern_values() {
        let sf2 = 1.7;
        assert_eq!(matern52_kernel(&[1.0, 2.0], &[1.0, 2.0], sf2, 0.3), sf2);
        let s5 = 5.0f64.sqrt();
        let expected = (1.0 + s5 + s5 * s5 / 3.0) * (-s5).exp();
        let v = matern52_kernel(&[0.0], &[0.4], 1.0, 0.4);
        assert_relative_eq!(v, expected, max_relative = 1e-12);
        assert_relative_eq!(v, 0.52399, max_relative = 1e-4);
    }

    #[test]
    fn matern_monotone_decreasing() {
        let mut last = f64::INFINITY;
        for i in 0..200 {
            let r = i as f64 * 0.05;
            let v = matern52_kernel(&[0.0], &[r], 1.3, 0.8);
            assert!(v <= last);
            last = v;
        }
    }

    #[test]
    fn single_point_interpolates() {
        let x = array![[0.3, 0.9]];
        let y = array![[2.5, -0.7]];
        let model = fit(&x, &y, GprHyperparameters::default(), 1e-10, options(0)).unwrap();
        let (mean, var) = model.predict(&array![0.3, 0.9]).unwrap();
        assert_relative_eq!(mean[0], 2.5, max_relative = 1e-8);
        assert_relative_eq!(mean[1], -0.7, max_relative = 1e-8);
        assert!(var[0] >= 0.0);
    }

    #[test]
    fn noise_free_interpolation_at_training_inputs() {
        let x = array![[0.0], [0.35], [0.8], [1.3], [2.0]];
        let y = Array2::from_shape_fn((5, 2), |(i, c)| {
            let t: f64 = x[(i, 0)];
            if c == 0 {
                (1.3 * t).sin()
            } else {
                0.5 * t * t - t
            }
        });
        let model = fit(&x, &y, GprHyperparameters::default(), 1e-10, options(1)).unwrap();
        for i in 0..5 {
            let (mean, _) = model.predict(&array![x[(i, 0)]]).unwrap();
            for c in 0..2 {
                assert!(
                    (mean[c] - y[(i, c)]).abs() < 1e-6,
                    "row {i} col {c}: {} vs {}",
                    mean[c],
                    y[(i, c)]
                );
            }
        }
    }

    #[test]
    fn far_query_reverts_to_prior_mean() {
        let x = array![[0.0], [0.5], [1.0]];
        let y = array![[1.0], [2.0], [3.0]];
        let model = fit(&x, &y, GprHyperparameters::default(), 1e-8, options(2)).unwrap();
        let (mean, var) = model.predict(&array![1.0e6]).unwrap();
        // centered prior reverts to the target mean
        assert_relative_eq!(mean[0], 2.0, max_relative = 1e-6);
        let hp = model.hyperparameters()[0];
        let prior = hp.covariance(&[0.0], &[0.0]);
        assert_relative_eq!(var[0], prior, max_relative = 1e-6);
    }

    #[test]
    fn posterior_variance_bounded_by_prior() {
        let x = array![[0.0], [0.4], [1.1], [1.9]];
        let y = array![[0.3], [-0.2], [0.8], [0.1]];
        let model = fit(&x, &y, GprHyperparameters::default(), 1e-9, options(3)).unwrap();
        let hp = model.hyperparameters()[0];
        let prior = hp.covariance(&[0.0], &[0.0]);
        for i in 0..40 {
            let q = -1.0 + 0.1 * i as f64;
            let (_, var) = model.predict(&array![q]).unwrap();
            assert!(var[0] <= prior + 1e-9);
        }
    }

    #[test]
    fn duplicate_inputs_survive_with_jitter() {
        let x = array![[1.0, 2.0], [1.0, 2.0], [3.0, 1.0]];
        let y = array![[0.5], [0.7], [1.0]];
        let model = fit(&x, &y, GprHyperparameters::default(), 1e-8, options(4)).unwrap();
        let (mean, _) = model.predict(&array![1.0, 2.0]).unwrap();
        assert!(mean[0].is_finite());
    }

    #[test]
    fn fit_beats_generating_hyperparameters() {
        // draw targets from the model's own prior, then check the fitted
        // likelihood is at least as good as the generator's
        let n = 12;
        let x = Array2::from_shape_fn((n, 1), |(i, _)| i as f64 * 0.3);
        let truth = GprHyperparameters {
            rbf: CovarianceTerm {
                signal_variance: 1.5,
                length_scale: 0.8,
            },
            matern: CovarianceTerm {
                signal_variance: 0.5,
                length_scale: 1.2,
            },
            mix_weights: [1.0, 1.0],
        };
        let rows = standardize_rows(
            &x,
            &[x.column(0).sum() / n as f64],
            &[{
                let m = x.column(0).sum() / n as f64;
                (x.column(0).mapv(|v| (v - m).powi(2)).sum() / n as f64).sqrt()
            }],
        );
        let k = gram_matrix(&truth, &rows, 1e-10);
        let chol = k.cholesky().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let z = DVector::from_fn(n, |_, _| {
            // Box-Muller from uniform draws keeps this oracle self-contained
            let u1: f64 = rng.random::<f64>().max(1e-12);
            let u2: f64 = rng.random();
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        });
        let sample = chol.l() * z;
        let y = Array2::from_shape_fn((n, 1), |(i, _)| sample[i]);

        let model = fit(&x, &y, GprHyperparameters::default(), 1e-10, options(5)).unwrap();
        let y_centered = DMatrix::from_fn(n, 1, |i, _| y[(i, 0)] - y.column(0).sum() / n as f64);
        let fitted_nlml = negative_lml(&model.hyperparameters()[0], &rows, &y_centered, 1e-10);
        let truth_nlml = negative_lml(&truth, &rows, &y_centered, 1e-10);
        assert!(
            fitted_nlml <= truth_nlml + 1e-6,
            "fitted {fitted_nlml} vs truth {truth_nlml}"
        );
    }

    #[test]
    fn predictions_invariant_under_training_permutation() {
        let x = array![[0.0, 1.0], [0.5, 0.2], [1.0, -0.4], [1.5, 0.9]];
        let y = array![[0.1], [0.5], [-0.3], [0.8]];
        let perm = [2usize, 0, 3, 1];
        let xp = Array2::from_shape_fn((4, 2), |(i, j)| x[(perm[i], j)]);
        let yp = Array2::from_shape_fn((4, 1), |(i, j)| y[(perm[i], j)]);

        let hp = GprHyperparameters::default();
        let opts = FitOptions {
            multi_starts: 1,
            max_iterations: 0, // keep the initial hyperparameters
            ..options(6)
        };
        let a = fit(&x, &y, hp, 1e-9, opts.clone()).unwrap();
        let b = fit(&xp, &yp, hp, 1e-9, opts).unwrap();
        for i in 0..10 {
            let q = array![0.15 * i as f64, 0.3 - 0.05 * i as f64];
            let (ma, _) = a.predict(&q).unwrap();
            let (mb, _) = b.predict(&q).unwrap();
            assert_relative_eq!(ma[0], mb[0], max_relative = 1e-9, epsilon = 1e-12);
        }
    }

    #[test]
    fn per_output_mode_fits_each_column() {
        let x = array![[0.0], [0.5], [1.0], [1.5], [2.0], [2.5]];
        let y = Array2::from_shape_fn((6, 2), |(i, c)| {
            let t: f64 = x[(i, 0)];
            if c == 0 {
                (4.0 * t).sin()
            } else {
                0.02 * t
            }
        });
        let opts = FitOptions {
            sharing: HyperSharing::PerOutput,
            ..options(8)
        };
        let model = fit(&x, &y, GprHyperparameters::default(), 1e-9, opts).unwrap();
        assert_eq!(model.hyperparameters().len(), 2);
        for i in 0..6 {
            let (mean, _) = model.predict(&array![x[(i, 0)]]).unwrap();
            for c in 0..2 {
                assert!((mean[c] - y[(i, c)]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let x = array![[0.0, 0.2], [0.7, -0.1], [1.4, 0.5]];
        let y = array![[1.0, 0.0], [0.2, 0.4], [-0.6, 1.1]];
        let model = fit(&x, &y, GprHyperparameters::default(), 1e-9, options(9)).unwrap();
        let path = dir.path().join("gpr.json");
        model.save_json(&path).unwrap();
        let loaded = GprModel::load_json(&path).unwrap();
        let q = array![0.4, 0.1];
        let (m1, v1) = model.predict(&q).unwrap();
        let (m2, v2) = loaded.predict(&q).unwrap();
        for c in 0..2 {
            assert_relative_eq!(m1[c], m2[c], max_relative = 1e-12);
            assert_relative_eq!(v1[c], v2[c], max_relative = 1e-12, epsilon = 1e-15);
        }
    }
}
