//! Fully connected neural network regressor trained with Adam on an MSE
//! loss, with early stopping on a held-out test subset and a Bayesian
//! hyperparameter search over a fixed grid.
//!
//! Inputs and targets are standardized with training-subset statistics; the
//! output layer is linear so kernel coefficients stay unconstrained reals.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Result, RomError};
use crate::gpr::{self, GprHyperparameters};
use crate::optimize::{normal_cdf, normal_pdf};
use crate::sampling::lhs_unit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    PRelu,
}

impl Activation {
    fn apply(self, z: f64, slope: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::PRelu => {
                if z > 0.0 {
                    z
                } else {
                    slope * z
                }
            }
        }
    }

    fn derivative(self, z: f64, slope: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::PRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
        }
    }
}

/// One point of the hyperparameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub learning_rate: f64,
    pub hidden_layers: usize,
    pub neurons_per_layer: usize,
    pub batch_size: usize,
    pub activation: Activation,
}

/// Discrete design space of the search. Every proposal lies exactly on
/// this grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperparameterSpace {
    pub learning_rates: Vec<f64>,
    pub hidden_layers: Vec<usize>,
    pub neurons_per_layer: Vec<usize>,
    pub batch_sizes: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl Default for HyperparameterSpace {
    fn default() -> Self {
        Self {
            // 1e-6 to 1e-4 in steps of 5e-6
            learning_rates: (0..20).map(|k| 1e-6 + k as f64 * 5e-6).collect(),
            hidden_layers: (1..=8).collect(),
            // 4 to 204 in steps of 8
            neurons_per_layer: (0..=25).map(|k| 4 + 8 * k).collect(),
            batch_sizes: (1..=8).collect(),
            activations: vec![Activation::Tanh, Activation::Relu, Activation::PRelu],
        }
    }
}

impl HyperparameterSpace {
    fn axis_lengths(&self) -> [usize; 5] {
        [
            self.learning_rates.len(),
            self.hidden_layers.len(),
            self.neurons_per_layer.len(),
            self.batch_sizes.len(),
            self.activations.len(),
        ]
    }

    fn at(&self, idx: [usize; 5]) -> Hyperparameters {
        Hyperparameters {
            learning_rate: self.learning_rates[idx[0]],
            hidden_layers: self.hidden_layers[idx[1]],
            neurons_per_layer: self.neurons_per_layer[idx[2]],
            batch_size: self.batch_sizes[idx[3]],
            activation: self.activations[idx[4]],
        }
    }

    pub fn contains(&self, hp: &Hyperparameters) -> bool {
        self.learning_rates.iter().any(|&v| v == hp.learning_rate)
            && self.hidden_layers.contains(&hp.hidden_layers)
            && self.neurons_per_layer.contains(&hp.neurons_per_layer)
            && self.batch_sizes.contains(&hp.batch_size)
            && self.activations.contains(&hp.activation)
    }

    /// Encodes a grid index as GP features: four normalized axes plus a
    /// one-hot activation block.
    fn encode(&self, idx: [usize; 5]) -> Vec<f64> {
        let lens = self.axis_lengths();
        let mut features = Vec::with_capacity(4 + lens[4]);
        for a in 0..4 {
            let denom = (lens[a] - 1).max(1) as f64;
            features.push(idx[a] as f64 / denom);
        }
        for a in 0..lens[4] {
            features.push(if a == idx[4] { 1.0 } else { 0.0 });
        }
        features
    }
}

/// Network parameters plus standardization constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcnnModel {
    layer_sizes: Vec<usize>,
    activation: Activation,
    /// Row-major (out x in) weight blocks, one per layer.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    /// One learnable slope per hidden layer; used by PRelu.
    prelu_slopes: Vec<f64>,
    x_mean: Vec<f64>,
    x_std: Vec<f64>,
    y_mean: Vec<f64>,
    y_std: Vec<f64>,
}

fn mean_std_columns(data: &Array2<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = data.nrows().max(1) as f64;
    let mut means = Vec::with_capacity(data.ncols());
    let mut stds = Vec::with_capacity(data.ncols());
    for col in data.columns() {
        let mean = col.sum() / n;
        let var = col.mapv(|v| (v - mean).powi(2)).sum() / n;
        means.push(mean);
        let std = var.sqrt();
        stds.push(if std < 1e-12 { 1.0 } else { std });
    }
    (means, stds)
}

impl FcnnModel {
    /// A network with seeded uniform weights scaled by `1/sqrt(fan_in)`,
    /// identity standardization.
    pub fn with_random_weights(
        layer_sizes: Vec<usize>,
        activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.iter().any(|&s| s == 0) {
            return Err(RomError::InvalidArgument(
                "network needs input and output layers of nonzero width".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let scale = 1.0 / (fan_in as f64).sqrt();
            let w: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * scale)
                .collect();
            weights.push(w);
            biases.push(vec![0.0; fan_out]);
        }
        let hidden_count = layer_sizes.len() - 2;
        let d = layer_sizes[0];
        let q = layer_sizes[layer_sizes.len() - 1];
        Ok(Self {
            layer_sizes,
            activation,
            weights,
            biases,
            prelu_slopes: vec![0.25; hidden_count],
            x_mean: vec![0.0; d],
            x_std: vec![1.0; d],
            y_mean: vec![0.0; q],
            y_std: vec![1.0; q],
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Row-major view of one weight block, shape (out, in).
    fn weight_view(&self, layer: usize) -> ndarray::ArrayView2<'_, f64> {
        ndarray::ArrayView2::from_shape(
            (self.layer_sizes[layer + 1], self.layer_sizes[layer]),
            &self.weights[layer],
        )
        .expect("weight block shape")
    }

    /// Layer-by-layer affine map plus activation in standardized space;
    /// the output layer stays linear. Returns pre-activations and layer
    /// outputs for backpropagation.
    fn forward_cached(&self, x: &Array2<f64>) -> (Vec<Array2<f64>>, Vec<Array2<f64>>) {
        let mut zs = Vec::with_capacity(self.num_layers());
        let mut acts = Vec::with_capacity(self.num_layers() + 1);
        acts.push(x.clone());
        for layer in 0..self.num_layers() {
            let prev = &acts[layer];
            let bias = ndarray::ArrayView1::from(&self.biases[layer][..]);
            let z = prev.dot(&self.weight_view(layer).t()) + bias;
            let is_output = layer == self.num_layers() - 1;
            let out = if is_output {
                z.clone()
            } else {
                let slope = self.prelu_slopes[layer];
                z.mapv(|v| self.activation.apply(v, slope))
            };
            zs.push(z);
            acts.push(out);
        }
        (zs, acts)
    }

    /// Forward pass of a single standardized feature vector.
    pub fn forward(&self, features: &Array1<f64>) -> Result<Array1<f64>> {
        if features.len() != self.layer_sizes[0] {
            return Err(RomError::DimensionMismatch(format!(
                "input has {} features, network expects {}",
                features.len(),
                self.layer_sizes[0]
            )));
        }
        let x = features.clone().insert_axis(Axis(0));
        let (_, acts) = self.forward_cached(&x);
        Ok(acts.last().unwrap().row(0).to_owned())
    }

    /// Standardize, run the network, de-standardize.
    pub fn predict(&self, query: &Array1<f64>) -> Result<Array1<f64>> {
        let std_in: Array1<f64> = query
            .iter()
            .enumerate()
            .map(|(j, v)| (v - self.x_mean[j]) / self.x_std[j])
            .collect();
        let raw = self.forward(&std_in)?;
        Ok(raw
            .iter()
            .enumerate()
            .map(|(c, v)| v * self.y_std[c] + self.y_mean[c])
            .collect())
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let model: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if model.layer_sizes.len() < 2 {
            return Err(RomError::Dataset("malformed network file".into()));
        }
        Ok(model)
    }

    fn params_finite(&self) -> bool {
        self.weights.iter().flatten().all(|v| v.is_finite())
            && self.biases.iter().flatten().all(|v| v.is_finite())
            && self.prelu_slopes.iter().all(|v| v.is_finite())
    }
}

/// Parameter-shaped gradient (or optimizer moment) storage.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub prelu_slopes: Vec<f64>,
}

impl Gradients {
    fn zeros_like(model: &FcnnModel) -> Self {
        Self {
            weights: model.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            prelu_slopes: vec![0.0; model.prelu_slopes.len()],
        }
    }
}

/// MSE loss over a standardized batch and its gradient with respect to all
/// parameters, by backpropagation.
pub fn mse_loss_and_gradients(
    model: &FcnnModel,
    x: &Array2<f64>,
    y: &Array2<f64>,
) -> Result<(f64, Gradients)> {
    if x.nrows() != y.nrows() {
        return Err(RomError::DimensionMismatch(format!(
            "{} input rows vs {} target rows",
            x.nrows(),
            y.nrows()
        )));
    }
    let (zs, acts) = model.forward_cached(x);
    let pred = acts.last().unwrap();
    let diff = pred - y;
    let b = x.nrows() as f64;
    let q = y.ncols() as f64;
    let loss = diff.mapv(|v| v * v).sum() / (b * q);

    let mut grads = Gradients::zeros_like(model);
    let mut delta = diff.mapv(|v| 2.0 * v / (b * q));
    for layer in (0..model.num_layers()).rev() {
        let prev = &acts[layer];
        let dw = delta.t().dot(prev); // (out, in)
        grads.weights[layer].copy_from_slice(dw.as_slice().expect("contiguous gradient"));
        for (slot, col) in grads.biases[layer].iter_mut().zip(delta.columns()) {
            *slot = col.sum();
        }
        if layer > 0 {
            // pull the delta through the weights, then the activation
            let upstream = delta.dot(&model.weight_view(layer));
            let hidden = layer - 1;
            let slope = model.prelu_slopes[hidden];
            let z = &zs[hidden];
            if model.activation == Activation::PRelu {
                let mut slope_acc = 0.0;
                for (u, zv) in upstream.iter().zip(z.iter()) {
                    if *zv <= 0.0 {
                        slope_acc += u * zv;
                    }
                }
                grads.prelu_slopes[hidden] = slope_acc;
            }
            delta = Array2::from_shape_fn(upstream.dim(), |(row, i)| {
                upstream[(row, i)] * model.activation.derivative(z[(row, i)], slope)
            });
        }
    }
    Ok((loss, grads))
}

/// Plain MSE in standardized space, for verification.
pub fn mse_loss(model: &FcnnModel, x: &Array2<f64>, y: &Array2<f64>) -> f64 {
    let (_, acts) = model.forward_cached(x);
    let diff = acts.last().unwrap() - y;
    diff.mapv(|v| v * v).sum() / (x.nrows() as f64 * y.ncols() as f64)
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub max_epochs: usize,
    /// Epochs without test-MSE improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            max_epochs: 5000,
            patience: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub best_epoch: usize,
    /// Standardized-space MSE of the returned snapshot on the test subset.
    pub best_test_mse: f64,
    pub final_train_mse: f64,
}

struct AdamState {
    m: Gradients,
    v: Gradients,
    step: usize,
}

fn adam_update(model: &mut FcnnModel, grads: &Gradients, state: &mut AdamState, lr: f64) {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;
    state.step += 1;
    let t = state.step as f64;
    let corr1 = 1.0 - BETA1.powf(t);
    let corr2 = 1.0 - BETA2.powf(t);
    let apply = |param: &mut f64, grad: f64, m: &mut f64, v: &mut f64| {
        *m = BETA1 * *m + (1.0 - BETA1) * grad;
        *v = BETA2 * *v + (1.0 - BETA2) * grad * grad;
        let m_hat = *m / corr1;
        let v_hat = *v / corr2;
        *param -= lr * m_hat / (v_hat.sqrt() + EPS);
    };
    for layer in 0..model.weights.len() {
        for i in 0..model.weights[layer].len() {
            apply(
                &mut model.weights[layer][i],
                grads.weights[layer][i],
                &mut state.m.weights[layer][i],
                &mut state.v.weights[layer][i],
            );
        }
        for i in 0..model.biases[layer].len() {
            apply(
                &mut model.biases[layer][i],
                grads.biases[layer][i],
                &mut state.m.biases[layer][i],
                &mut state.v.biases[layer][i],
            );
        }
    }
    for i in 0..model.prelu_slopes.len() {
        apply(
            &mut model.prelu_slopes[i],
            grads.prelu_slopes[i],
            &mut state.m.prelu_slopes[i],
            &mut state.v.prelu_slopes[i],
        );
    }
}

fn standardize_matrix(data: &Array2<f64>, mean: &[f64], std: &[f64]) -> Array2<f64> {
    Array2::from_shape_fn(data.dim(), |(i, j)| (data[(i, j)] - mean[j]) / std[j])
}

/// Trains a network on the train subset with early stopping on the test
/// subset, returning the best-test-MSE snapshot. Deterministic per seed.
pub fn train(
    train_x: &Array2<f64>,
    train_y: &Array2<f64>,
    test_x: &Array2<f64>,
    test_y: &Array2<f64>,
    hp: &Hyperparameters,
    options: &TrainOptions,
) -> Result<(FcnnModel, TrainReport)> {
    let n = train_x.nrows();
    if n < 2 {
        return Err(RomError::Training(format!(
            "need at least 2 training rows, got {n}"
        )));
    }
    if train_x.nrows() != train_y.nrows() || test_x.nrows() != test_y.nrows() {
        return Err(RomError::DimensionMismatch(
            "feature and target row counts differ".into(),
        ));
    }
    let d = train_x.ncols();
    let q = train_y.ncols();

    let (x_mean, x_std) = mean_std_columns(train_x);
    let (y_mean, y_std) = mean_std_columns(train_y);
    let xs = standardize_matrix(train_x, &x_mean, &x_std);
    let ys = standardize_matrix(train_y, &y_mean, &y_std);
    let (xt, yt) = if test_x.nrows() > 0 {
        (
            standardize_matrix(test_x, &x_mean, &x_std),
            standardize_matrix(test_y, &y_mean, &y_std),
        )
    } else {
        (xs.clone(), ys.clone())
    };

    let mut sizes = vec![d];
    sizes.extend(std::iter::repeat(hp.neurons_per_layer).take(hp.hidden_layers));
    sizes.push(q);
    let mut model = FcnnModel::with_random_weights(sizes, hp.activation, options.seed)?;
    model.x_mean = x_mean;
    model.x_std = x_std;
    model.y_mean = y_mean;
    model.y_std = y_std;

    let mut adam = AdamState {
        m: Gradients::zeros_like(&model),
        v: Gradients::zeros_like(&model),
        step: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed.wrapping_add(0x5106_f1e5));
    let mut order: Vec<usize> = (0..n).collect();
    let batch = hp.batch_size.max(1).min(n);

    let mut best = model.clone();
    let mut best_test = f64::INFINITY;
    let mut best_epoch = 0;
    let mut stale = 0;
    let mut epochs_run = 0;
    let mut final_train_mse = f64::NAN;

    for epoch in 0..options.max_epochs {
        epochs_run = epoch + 1;
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0.0;
        for chunk in order.chunks(batch) {
            let bx = Array2::from_shape_fn((chunk.len(), d), |(r, c)| xs[(chunk[r], c)]);
            let by = Array2::from_shape_fn((chunk.len(), q), |(r, c)| ys[(chunk[r], c)]);
            let (loss, grads) = mse_loss_and_gradients(&model, &bx, &by)?;
            if !loss.is_finite() {
                return Err(RomError::Training(format!(
                    "loss became non-finite at epoch {epoch}"
                )));
            }
            adam_update(&mut model, &grads, &mut adam, hp.learning_rate);
            epoch_loss += loss;
            batches += 1.0;
        }
        if !model.params_finite() {
            return Err(RomError::Training(format!(
                "parameters became non-finite at epoch {epoch}"
            )));
        }
        final_train_mse = epoch_loss / batches;

        let test_mse = mse_loss(&model, &xt, &yt);
        if test_mse < best_test {
            best_test = test_mse;
            best = model.clone();
            best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale > options.patience {
                break;
            }
        }
    }

    Ok((
        best,
        TrainReport {
            epochs_run,
            best_epoch,
            best_test_mse: best_test,
            final_train_mse,
        },
    ))
}

/// One evaluated configuration of the search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchTrial {
    pub hyperparameters: Hyperparameters,
    /// Test MSE; infinity marks a failed training run.
    pub objective: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: Hyperparameters,
    pub best_objective: f64,
    pub trials: Vec<SearchTrial>,
}

fn random_index(space: &HyperparameterSpace, rng: &mut ChaCha8Rng) -> [usize; 5] {
    let lens = space.axis_lengths();
    let mut idx = [0usize; 5];
    for a in 0..5 {
        idx[a] = (rng.random::<f64>() * lens[a] as f64) as usize % lens[a];
    }
    idx
}

/// Sequential model-based hyperparameter search: a seeded quasi-random
/// design first, then expected-improvement proposals from a GP surrogate
/// over the encoded grid. Failed trials score infinity and the search
/// continues.
pub fn bayesian_search(
    space: &HyperparameterSpace,
    objective: &mut dyn FnMut(&Hyperparameters) -> Result<f64>,
    trials: usize,
    seed: u64,
) -> Result<SearchResult> {
    if trials == 0 {
        return Err(RomError::InvalidArgument(
            "search needs at least one trial".into(),
        ));
    }
    let lens = space.axis_lengths();
    let mut evaluated: Vec<([usize; 5], f64)> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);

    let mut run_trial = |idx: [usize; 5],
                         evaluated: &mut Vec<([usize; 5], f64)>,
                         seen: &mut std::collections::BTreeSet<[usize; 5]>|
     -> Result<()> {
        let hp = space.at(idx);
        let score = match objective(&hp) {
            Ok(v) if v.is_finite() => v,
            Ok(_) => f64::INFINITY,
            Err(RomError::Training(_)) | Err(RomError::Numerical(_)) => f64::INFINITY,
            Err(other) => return Err(other),
        };
        evaluated.push((idx, score));
        seen.insert(idx);
        Ok(())
    };

    // quasi-random initial design, snapped to the grid
    let initial = (trials / 5).max(5).min(trials);
    for unit in lhs_unit(initial, 5, seed) {
        let mut idx = [0usize; 5];
        for a in 0..5 {
            idx[a] = ((unit[a] * lens[a] as f64) as usize).min(lens[a] - 1);
        }
        let mut guard = 0;
        while seen.contains(&idx) && guard < 200 {
            idx = random_index(space, &mut rng);
            guard += 1;
        }
        run_trial(idx, &mut evaluated, &mut seen)?;
    }

    while evaluated.len() < trials {
        let finite: Vec<&([usize; 5], f64)> =
            evaluated.iter().filter(|(_, s)| s.is_finite()).collect();
        let proposal = if finite.len() >= 3 {
            propose_by_expected_improvement(space, &finite, &seen, &mut rng, seed)
        } else {
            None
        };
        let idx = proposal.unwrap_or_else(|| {
            let mut idx = random_index(space, &mut rng);
            let mut guard = 0;
            while seen.contains(&idx) && guard < 200 {
                idx = random_index(space, &mut rng);
                guard += 1;
            }
            idx
        });
        run_trial(idx, &mut evaluated, &mut seen)?;
    }

    let (best_idx, best_objective) = evaluated
        .iter()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .map(|(i, s)| (*i, *s))
        .unwrap();
    Ok(SearchResult {
        best: space.at(best_idx),
        best_objective,
        trials: evaluated
            .iter()
            .map(|(i, s)| SearchTrial {
                hyperparameters: space.at(*i),
                objective: *s,
            })
            .collect(),
    })
}

fn propose_by_expected_improvement(
    space: &HyperparameterSpace,
    finite: &[&([usize; 5], f64)],
    seen: &std::collections::BTreeSet<[usize; 5]>,
    rng: &mut ChaCha8Rng,
    seed: u64,
) -> Option<[usize; 5]> {
    let d = space.encode([0; 5]).len();
    let n = finite.len();
    let x = Array2::from_shape_fn((n, d), |(i, j)| space.encode(finite[i].0)[j]);
    // log scale keeps the surrogate stable across orders of magnitude
    let y = Array2::from_shape_fn((n, 1), |(i, _)| finite[i].1.max(1e-300).ln());
    let options = gpr::FitOptions {
        multi_starts: 2,
        max_iterations: 25,
        seed,
        ..gpr::FitOptions::default()
    };
    let model = gpr::fit(&x, &y, GprHyperparameters::default(), 1e-6, options).ok()?;

    let best = finite
        .iter()
        .map(|(_, s)| s.max(1e-300).ln())
        .fold(f64::INFINITY, f64::min);
    let xi = 0.01;

    let mut best_idx = None;
    let mut best_ei = -1.0;
    for _ in 0..2048 {
        let idx = random_index(space, rng);
        if seen.contains(&idx) {
            continue;
        }
        let features = Array1::from_vec(space.encode(idx));
        let Ok((mean, var)) = model.predict(&features) else {
            continue;
        };
        let sigma = var[0].max(0.0).sqrt();
        let ei = if sigma < 1e-12 {
            0.0
        } else {
            let z = (best - mean[0] - xi) / sigma;
            (best - mean[0] - xi) * normal_cdf(z) + sigma * normal_pdf(z)
        };
        if ei > best_ei {
            best_ei = ei;
            best_idx = Some(idx);
        }
    }
    best_idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn space() -> HyperparameterSpace {
        HyperparameterSpace::default()
    }

    #[test]
    fn table_grid_shape() {
        let s = space();
        assert_eq!(s.learning_rates.len(), 20);
        assert!((s.learning_rates[0] - 1e-6).abs() < 1e-18);
        assert!((s.learning_rates[19] - 9.6e-5).abs() < 1e-12);
        assert_eq!(s.hidden_layers, (1..=8).collect::<Vec<_>>());
        assert_eq!(s.neurons_per_layer.first(), Some(&4));
        assert_eq!(s.neurons_per_layer.last(), Some(&204));
        assert_eq!(s.neurons_per_layer.len(), 26);
        assert_eq!(s.batch_sizes.len(), 8);
        assert_eq!(s.activations.len(), 3);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let mut model =
            FcnnModel::with_random_weights(vec![3, 4, 2], Activation::Tanh, 1).unwrap();
        for w in &mut model.weights {
            w.iter_mut().for_each(|v| *v = 0.0);
        }
        let out = model.forward(&array![0.3, -0.7, 1.1]).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn relu_passthrough_reproduces_affine_map() {
        let mut model = FcnnModel::with_random_weights(vec![2, 2, 2], Activation::Relu, 2).unwrap();
        // identity-like first layer, known second layer
        model.weights[0] = vec![1.0, 0.0, 0.0, 1.0];
        model.biases[0] = vec![0.5, 0.5]; // keeps relu in its active region
        model.weights[1] = vec![2.0, -1.0, 0.25, 1.5];
        model.biases[1] = vec![0.1, -0.2];
        let out = model.forward(&array![0.4, 0.9]).unwrap();
        let h = [0.4 + 0.5, 0.9 + 0.5];
        let expect = [
            2.0 * h[0] - 1.0 * h[1] + 0.1,
            0.25 * h[0] + 1.5 * h[1] - 0.2,
        ];
        assert!((out[0] - expect[0]).abs() < 1e-12);
        assert!((out[1] - expect[1]).abs() < 1e-12);
    }

    /// Independent forward evaluation with plain nested loops.
    fn forward_oracle(model: &FcnnModel, x: &[f64]) -> Vec<f64> {
        let mut current = x.to_vec();
        for layer in 0..model.layer_sizes.len() - 1 {
            let fan_in = model.layer_sizes[layer];
            let fan_out = model.layer_sizes[layer + 1];
            let mut next = vec![0.0; fan_out];
            for (o, slot) in next.iter_mut().enumerate() {
                let mut acc = model.biases[layer][o];
                for (i, v) in current.iter().enumerate() {
                    acc += model.weights[layer][o * fan_in + i] * v;
                }
                *slot = acc;
            }
            if layer + 2 < model.layer_sizes.len() {
                let slope = model.prelu_slopes[layer];
                for v in &mut next {
                    *v = model.activation.apply(*v, slope);
                }
            }
            current = next;
        }
        current
    }

    #[test]
    fn forward_matches_hand_rolled_oracle() {
        for (seed, act) in [(3, Activation::Tanh), (4, Activation::Relu), (5, Activation::PRelu)]
        {
            let model = FcnnModel::with_random_weights(vec![3, 5, 4, 2], act, seed).unwrap();
            let x = array![0.3, -1.2, 0.8];
            let got = model.forward(&x).unwrap();
            let expect = forward_oracle(&model, x.as_slice().unwrap());
            for (g, e) in got.iter().zip(expect.iter()) {
                assert!((g - e).abs() < 1e-12);
            }
        }
    }

    /// Central-difference gradient of the standardized-space MSE.
    fn finite_difference_check(model: &mut FcnnModel, x: &Array2<f64>, y: &Array2<f64>) -> f64 {
        let (_, grads) = mse_loss_and_gradients(model, x, y).unwrap();
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        let mut check = |analytic: f64, read: &mut dyn FnMut(&mut FcnnModel) -> &mut f64| {
            let mut m = model.clone();
            let orig = *read(&mut m);
            *read(&mut m) = orig + h;
            let up = mse_loss(&m, x, y);
            *read(&mut m) = orig - h;
            let down = mse_loss(&m, x, y);
            let numeric = (up - down) / (2.0 * h);
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((analytic - numeric).abs() / denom);
        };
        for layer in 0..model.weights.len() {
            for i in 0..model.weights[layer].len() {
                let g = grads.weights[layer][i];
                check(g, &mut |m| &mut m.weights[layer][i]);
            }
            for i in 0..model.biases[layer].len() {
                let g = grads.biases[layer][i];
                check(g, &mut |m| &mut m.biases[layer][i]);
            }
        }
        for i in 0..model.prelu_slopes.len() {
            let g = grads.prelu_slopes[i];
            check(g, &mut |m| &mut m.prelu_slopes[i]);
        }
        worst
    }

    #[test]
    fn backprop_matches_finite_differences() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for act in [Activation::Tanh, Activation::Relu, Activation::PRelu] {
            let mut model = FcnnModel::with_random_weights(vec![2, 5, 3], act, 77).unwrap();
            let x = Array2::from_shape_fn((4, 2), |_| rng.random::<f64>() * 2.0 - 1.0);
            let y = Array2::from_shape_fn((4, 3), |_| rng.random::<f64>() * 2.0 - 1.0);
            let worst = finite_difference_check(&mut model, &x, &y);
            assert!(worst < 1e-5, "{act:?}: worst relative error {worst}");
        }
    }

    #[test]
    fn constant_zero_targets_are_learned_quickly() {
        let x = Array2::from_shape_fn((45, 2), |(i, j)| (i as f64 * 0.37 + j as f64).sin());
        let y = Array2::zeros((45, 3));
        let hp = Hyperparameters {
            learning_rate: 1e-3,
            hidden_layers: 1,
            neurons_per_layer: 4,
            batch_size: 1,
            activation: Activation::Tanh,
        };
        let opts = TrainOptions {
            max_epochs: 200,
            patience: 200,
            seed: 5,
        };
        let (model, report) = train(&x, &y, &x, &y, &hp, &opts).unwrap();
        assert!(
            report.best_test_mse < 1e-6,
            "mse {}",
            report.best_test_mse
        );
        let p = model.predict(&array![0.2, 0.4]).unwrap();
        assert!(p.iter().all(|v| v.abs() < 1e-2));
    }

    #[test]
    fn linear_map_reaches_regression_floor() {
        // targets from a noiseless linear map; a 1-hidden-layer net must
        // land close to the exact-regression floor of zero
        let a = [[0.7, -0.3], [0.2, 1.1], [-0.5, 0.4]];
        let x = Array2::from_shape_fn((40, 2), |(i, j)| ((i * 7 + j * 3) as f64 * 0.13).sin());
        let y = Array2::from_shape_fn((40, 3), |(i, c)| {
            a[c][0] * x[(i, 0)] + a[c][1] * x[(i, 1)]
        });
        let hp = Hyperparameters {
            learning_rate: 9.6e-5,
            hidden_layers: 1,
            neurons_per_layer: 28,
            batch_size: 2,
            activation: Activation::Tanh,
        };
        let opts = TrainOptions {
            max_epochs: 4000,
            patience: 400,
            seed: 3,
        };
        let (_, report) = train(&x, &y, &x, &y, &hp, &opts).unwrap();
        assert!(report.best_test_mse < 1e-4, "mse {}", report.best_test_mse);
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let x = Array2::from_shape_fn((10, 2), |(i, j)| (i + j) as f64 * 0.1);
        let y = Array2::from_shape_fn((10, 1), |(i, _)| (i as f64 * 0.3).cos());
        let hp = Hyperparameters {
            learning_rate: 5.1e-5,
            hidden_layers: 2,
            neurons_per_layer: 12,
            batch_size: 3,
            activation: Activation::PRelu,
        };
        let opts = TrainOptions {
            max_epochs: 50,
            patience: 50,
            seed: 9,
        };
        let (a, _) = train(&x, &y, &x, &y, &hp, &opts).unwrap();
        let (b, _) = train(&x, &y, &x, &y, &hp, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn standardization_round_trip() {
        let x = Array2::from_shape_fn((12, 2), |(i, j)| i as f64 + 10.0 * j as f64);
        let y = Array2::from_shape_fn((12, 1), |(i, _)| 100.0 + 3.0 * i as f64);
        let hp = Hyperparameters {
            learning_rate: 9.6e-5,
            hidden_layers: 1,
            neurons_per_layer: 8,
            batch_size: 4,
            activation: Activation::Tanh,
        };
        let opts = TrainOptions {
            max_epochs: 10,
            patience: 10,
            seed: 2,
        };
        let (model, _) = train(&x, &y, &x, &y, &hp, &opts).unwrap();
        let q = array![5.0, 10.0];
        let std_q: Array1<f64> = q
            .iter()
            .enumerate()
            .map(|(j, v)| (v - model.x_mean[j]) / model.x_std[j])
            .collect();
        let raw = model.forward(&std_q).unwrap();
        let manual: Array1<f64> = raw
            .iter()
            .enumerate()
            .map(|(c, v)| v * model.y_std[c] + model.y_mean[c])
            .collect();
        let direct = model.predict(&q).unwrap();
        for (a, b) in manual.iter().zip(direct.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn search_single_trial_returns_it() {
        let s = space();
        let mut calls = 0;
        let mut objective = |_: &Hyperparameters| {
            calls += 1;
            Ok(0.5)
        };
        let result = bayesian_search(&s, &mut objective, 1, 4).unwrap();
        assert_eq!(calls, 1);
        assert_eq!(result.trials.len(), 1);
        assert!(s.contains(&result.best));
    }

    #[test]
    fn search_is_deterministic_and_on_grid() {
        let s = space();
        // smooth deterministic objective over the encoded grid
        let mut objective = |hp: &Hyperparameters| {
            Ok((hp.learning_rate * 1e5 - 5.0).powi(2)
                + (hp.hidden_layers as f64 - 3.0).powi(2)
                + (hp.neurons_per_layer as f64 / 50.0 - 1.0).powi(2)
                + hp.batch_size as f64 * 0.01)
        };
        let a = bayesian_search(&s, &mut objective.clone(), 12, 7).unwrap();
        let b = bayesian_search(&s, &mut objective, 12, 7).unwrap();
        assert_eq!(a.best, b.best);
        assert_eq!(a.trials.len(), b.trials.len());
        for (ta, tb) in a.trials.iter().zip(&b.trials) {
            assert_eq!(ta.hyperparameters, tb.hyperparameters);
            assert!(s.contains(&ta.hyperparameters));
        }
    }

    #[test]
    fn failed_trials_score_infinity_and_search_continues() {
        let s = space();
        let mut n = 0;
        let mut objective = |_: &Hyperparameters| {
            n += 1;
            if n % 2 == 0 {
                Err(RomError::Training("synthetic failure".into()))
            } else {
                Ok(n as f64)
            }
        };
        let result = bayesian_search(&s, &mut objective, 6, 1).unwrap();
        assert_eq!(result.trials.len(), 6);
        assert!(result.trials.iter().any(|t| t.objective.is_infinite()));
        assert!(result.best_objective.is_finite());
    }

    #[test]
    fn model_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let model = FcnnModel::with_random_weights(vec![3, 6, 2], Activation::PRelu, 8).unwrap();
        let path = dir.path().join("net.json");
        model.save_json(&path).unwrap();
        let back = FcnnModel::load_json(&path).unwrap();
        assert_eq!(model, back);
    }
}
