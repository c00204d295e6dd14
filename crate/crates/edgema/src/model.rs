//! Lightweight classification models and importance-weighted fine-tuning.
//!
//! Fine-tuning is subset-restricted gradient descent: a fresh random subset
//! of parameter indices is drawn per call, and only those coordinates move
//! across the configured iterations. Everything else stays bit-identical.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label_shift::ImportanceWeights;
use crate::util::{argmax_tie_low, read_json_file, write_json_file};

/// Default fraction of parameters retrained per fine-tuning phase.
pub const DEFAULT_FINETUNE_FRACTION: f64 = 0.2;
/// Default number of fine-tuning iterations.
pub const DEFAULT_FINETUNE_ITERATIONS: usize = 8;
/// Default fine-tuning learning rate.
pub const DEFAULT_LEARNING_RATE: f64 = 0.05;

/// A classifier with a flat parameter vector, scores per class, and a
/// weighted cross-entropy objective with sparse gradients.
pub trait LightweightModel {
    fn input_dim(&self) -> usize;
    fn num_classes(&self) -> usize;
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];

    /// Raw per-class scores for one feature row.
    fn predict_scores(&self, features: &[f64]) -> Vec<f64>;

    /// Argmax class; ties resolve to the lower index.
    fn predict(&self, features: &[f64]) -> usize {
        argmax_tie_low(&self.predict_scores(features))
    }

    /// Mean over samples of weights[y] * cross_entropy(scores(x), y).
    fn weighted_loss(
        &self,
        features: &[Vec<f64>],
        labels: &[usize],
        weights: &ImportanceWeights,
    ) -> Result<f64> {
        validate_dataset(self, features, labels, weights)?;
        let mut total = 0.0;
        for (x, &y) in features.iter().zip(labels) {
            let scores = self.predict_scores(x);
            total += weights.get(y) * cross_entropy(&scores, y);
        }
        Ok(total / features.len() as f64)
    }

    /// Gradient of the weighted loss restricted to `subset`, one entry per
    /// subset index, accumulated over samples in order.
    fn gradient(
        &self,
        features: &[Vec<f64>],
        labels: &[usize],
        weights: &ImportanceWeights,
        subset: &[usize],
    ) -> Vec<f64>;
}

fn validate_dataset<M: LightweightModel + ?Sized>(
    model: &M,
    features: &[Vec<f64>],
    labels: &[usize],
    weights: &ImportanceWeights,
) -> Result<()> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(Error::invalid(
            "dataset needs matching, non-empty features and labels",
        ));
    }
    let k = model.num_classes();
    if weights.len() != k {
        return Err(Error::invalid(format!(
            "expected {k} importance weights, got {}",
            weights.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
        return Err(Error::invalid(format!(
            "label {bad} out of range for {k} classes"
        )));
    }
    let dim = model.input_dim();
    if features.iter().any(|f| f.len() != dim) {
        return Err(Error::invalid(format!(
            "feature rows must have dimension {dim}"
        )));
    }
    Ok(())
}

/// -ln softmax(scores)[y], computed through log-sum-exp.
fn cross_entropy(scores: &[f64], y: usize) -> f64 {
    log_sum_exp(scores) - scores[y]
}

fn log_sum_exp(scores: &[f64]) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = scores.iter().map(|s| (s - max).exp()).sum();
    max + sum.ln()
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Linear softmax classifier: scores = W x + b, with W and b flattened into
/// one parameter vector (K*F weights row-major, then K biases).
#[derive(Clone, Debug, PartialEq)]
pub struct SoftmaxModel {
    input_dim: usize,
    classes: usize,
    params: Vec<f64>,
}

impl SoftmaxModel {
    pub fn new_zeroed(input_dim: usize, classes: usize) -> Result<Self> {
        if input_dim == 0 || classes < 2 {
            return Err(Error::invalid(
                "softmax model needs input_dim >= 1 and classes >= 2",
            ));
        }
        Ok(Self {
            input_dim,
            classes,
            params: vec![0.0; classes * input_dim + classes],
        })
    }

    pub fn from_params(input_dim: usize, classes: usize, params: Vec<f64>) -> Result<Self> {
        let expected = classes * input_dim + classes;
        if params.len() != expected {
            return Err(Error::invalid(format!(
                "expected {expected} parameters, got {}",
                params.len()
            )));
        }
        Ok(Self {
            input_dim,
            classes,
            params,
        })
    }

    fn full_gradient(
        &self,
        features: &[Vec<f64>],
        labels: &[usize],
        weights: &ImportanceWeights,
    ) -> Vec<f64> {
        let (f, k) = (self.input_dim, self.classes);
        let mut grad = vec![0.0; self.params.len()];
        for (x, &y) in features.iter().zip(labels) {
            let probs = softmax(&self.predict_scores(x));
            let wy = weights.get(y);
            for c in 0..k {
                let delta = wy * (probs[c] - if c == y { 1.0 } else { 0.0 });
                let row = c * f;
                for (g, xv) in grad[row..row + f].iter_mut().zip(x) {
                    *g += delta * xv;
                }
                grad[k * f + c] += delta;
            }
        }
        let n = features.len() as f64;
        for g in grad.iter_mut() {
            *g /= n;
        }
        grad
    }
}

impl LightweightModel for SoftmaxModel {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn num_classes(&self) -> usize {
        self.classes
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn predict_scores(&self, features: &[f64]) -> Vec<f64> {
        let (f, k) = (self.input_dim, self.classes);
        (0..k)
            .map(|c| {
                let row = &self.params[c * f..(c + 1) * f];
                let dot: f64 = row.iter().zip(features).map(|(w, x)| w * x).sum();
                dot + self.params[k * f + c]
            })
            .collect()
    }

    fn gradient(
        &self,
        features: &[Vec<f64>],
        labels: &[usize],
        weights: &ImportanceWeights,
        subset: &[usize],
    ) -> Vec<f64> {
        let full = self.full_gradient(features, labels, weights);
        subset.iter().map(|&i| full[i]).collect()
    }
}

/// One-hidden-layer tanh network behind the same interface, for non-convex
/// smoke tests. Parameter layout: W1 (H*F), b1 (H), W2 (K*H), b2 (K).
#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    input_dim: usize,
    hidden: usize,
    classes: usize,
    params: Vec<f64>,
}

/// Default hidden width of the MLP surrogate.
pub const DEFAULT_HIDDEN_WIDTH: usize = 32;

impl MlpModel {
    pub fn new_random(input_dim: usize, classes: usize, hidden: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || classes < 2 || hidden == 0 {
            return Err(Error::invalid(
                "mlp model needs input_dim >= 1, classes >= 2 and hidden >= 1",
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let count = hidden * input_dim + hidden + classes * hidden + classes;
        let scale = (6.0 / (input_dim + hidden) as f64).sqrt();
        let params = (0..count)
            .map(|_| (rand::Rng::random::<f64>(&mut rng) * 2.0 - 1.0) * scale)
            .collect();
        Ok(Self {
            input_dim,
            hidden,
            classes,
            params,
        })
    }

    pub fn from_params(
        input_dim: usize,
        classes: usize,
        hidden: usize,
        params: Vec<f64>,
    ) -> Result<Self> {
        let expected = hidden * input_dim + hidden + classes * hidden + classes;
        if params.len() != expected {
            return Err(Error::invalid(format!(
                "expected {expected} parameters, got {}",
                params.len()
            )));
        }
        Ok(Self {
            input_dim,
            hidden,
            classes,
            params,
        })
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    fn layout(&self) -> (usize, usize, usize) {
        let w1 = self.hidden * self.input_dim;
        let b1 = w1 + self.hidden;
        let w2 = b1 + self.classes * self.hidden;
        (w1, b1, w2) // starts of b1, w2, b2 regions
    }

    fn hidden_activations(&self, features: &[f64]) -> Vec<f64> {
        let (w1_end, _, _) = self.layout();
        (0..self.hidden)
            .map(|h| {
                let row = &self.params[h * self.input_dim..(h + 1) * self.input_dim];
                let dot: f64 = row.iter().zip(features).map(|(w, x)| w * x).sum();
                (dot + self.params[w1_end + h]).tanh()
            })
            .collect()
    }

    fn full_gradient(
        &self,
        features: &[Vec<f64>],
        labels: &[usize],
        weights: &ImportanceWeights,
    ) -> Vec<f64> {
        let (b1_at, w2_at, b2_at) = self.layout();
        let (h_n, k) = (self.hidden, self.classes);
        let mut grad = vec![0.0; self.params.len()];
        for (x, &y) in features.iter().zip(labels) {
            let hidden = self.hidden_activations(x);
            let probs = softmax(&self.predict_scores(x));
            let wy = weights.get(y);
            // Output layer.
            let mut delta_out = vec![0.0; k];
            for c in 0..k {
                delta_out[c] = wy * (probs[c] - if c == y { 1.0 } else { 0.0 });
                for (g, hv) in grad[w2_at + c * h_n..w2_at + (c + 1) * h_n]
                    .iter_mut()
                    .zip(&hidden)
                {
                    *g += delta_out[c] * hv;
                }
                grad[b2_at + c] += delta_out[c];
            }
            // Hidden layer through tanh'.
            for h in 0..h_n {
                let mut back = 0.0;
                for (c, d) in delta_out.iter().enumerate() {
                    back += d * self.params[w2_at + c * h_n + h];
                }
                let dtanh = 1.0 - hidden[h] * hidden[h];
                let delta_h = back * dtanh;
                for (g, xv) in grad[h * self.input_dim..(h + 1) * self.input_dim]
                    .iter_mut()
                    .zip(x)
                {
                    *g += delta_h * xv;
                }
                grad[b1_at + h] += delta_h;
            }
        }
        let n = features.len() as f64;
        for g in grad.iter_mut() {
            *g /= n;
        }
        grad
    }
}

impl LightweightModel for MlpModel {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn num_classes(&self) -> usize {
        self.classes
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn predict_scores(&self, features: &[f64]) -> Vec<f64> {
        let (_, w2_at, b2_at) = self.layout();
        let hidden = self.hidden_activations(features);
        (0..self.classes)
            .map(|c| {
                let row = &self.params[w2_at + c * self.hidden..w2_at + (c + 1) * self.hidden];
                let dot: f64 = row.iter().zip(&hidden).map(|(w, h)| w * h).sum();
                dot + self.params[b2_at + c]
            })
            .collect()
    }

    fn gradient(
        &self,
        features: &[Vec<f64>],
        labels: &[usize],
        weights: &ImportanceWeights,
        subset: &[usize],
    ) -> Vec<f64> {
        let full = self.full_gradient(features, labels, weights);
        subset.iter().map(|&i| full[i]).collect()
    }
}

/// Either built-in model, as stored in checkpoints.
#[derive(Clone, Debug, PartialEq)]
pub enum BuiltinModel {
    Softmax(SoftmaxModel),
    Mlp(MlpModel),
}

impl LightweightModel for BuiltinModel {
    fn input_dim(&self) -> usize {
        match self {
            BuiltinModel::Softmax(m) => m.input_dim(),
            BuiltinModel::Mlp(m) => m.input_dim(),
        }
    }

    fn num_classes(&self) -> usize {
        match self {
            BuiltinModel::Softmax(m) => m.num_classes(),
            BuiltinModel::Mlp(m) => m.num_classes(),
        }
    }

    fn params(&self) -> &[f64] {
        match self {
            BuiltinModel::Softmax(m) => m.params(),
            BuiltinModel::Mlp(m) => m.params(),
        }
    }

    fn params_mut(&mut self) -> &mut [f64] {
        match self {
            BuiltinModel::Softmax(m) => m.params_mut(),
            BuiltinModel::Mlp(m) => m.params_mut(),
        }
    }

    fn predict_scores(&self, features: &[f64]) -> Vec<f64> {
        match self {
            BuiltinModel::Softmax(m) => m.predict_scores(features),
            BuiltinModel::Mlp(m) => m.predict_scores(features),
        }
    }

    fn gradient(
        &self,
        features: &[Vec<f64>],
        labels: &[usize],
        weights: &ImportanceWeights,
        subset: &[usize],
    ) -> Vec<f64> {
        match self {
            BuiltinModel::Softmax(m) => m.gradient(features, labels, weights, subset),
            BuiltinModel::Mlp(m) => m.gradient(features, labels, weights, subset),
        }
    }
}

/// Fine-tuning settings: the parameter fraction, iteration count, step size
/// and the seed that draws the parameter subset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FineTuneConfig {
    pub fraction: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for FineTuneConfig {
    fn default() -> Self {
        Self {
            fraction: DEFAULT_FINETUNE_FRACTION,
            iterations: DEFAULT_FINETUNE_ITERATIONS,
            learning_rate: DEFAULT_LEARNING_RATE,
            seed: 0,
        }
    }
}

/// ceil(fraction * P) distinct parameter indices drawn uniformly without
/// replacement, returned in ascending order. `fraction` is expected in
/// (0, 1]; the count is clamped into 1..=P.
pub fn select_parameter_subset<M: LightweightModel + ?Sized>(
    model: &M,
    fraction: f64,
    seed: u64,
) -> Vec<usize> {
    let total = model.params().len();
    let count = ((fraction * total as f64).ceil() as usize).clamp(1, total);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, total, count).into_vec();
    picked.sort_unstable();
    picked
}

/// Run `cfg.iterations` gradient steps on the weighted loss, restricted to a
/// subset of ceil(fraction * P) parameters drawn fresh from `cfg.seed`.
/// Returns the adapted model; the input model is untouched and parameters
/// outside the subset are bit-identical.
pub fn fine_tune<M: LightweightModel + Clone>(
    model: &M,
    features: &[Vec<f64>],
    labels: &[usize],
    weights: &ImportanceWeights,
    cfg: &FineTuneConfig,
) -> Result<M> {
    if cfg.fraction.is_nan() || cfg.fraction <= 0.0 || cfg.fraction > 1.0 {
        return Err(Error::invalid(format!(
            "fine-tune fraction must be in (0, 1], got {}",
            cfg.fraction
        )));
    }
    if cfg.iterations == 0 {
        return Err(Error::invalid("fine-tune needs at least one iteration"));
    }
    if !cfg.learning_rate.is_finite() || cfg.learning_rate <= 0.0 {
        return Err(Error::invalid("learning rate must be positive and finite"));
    }
    validate_dataset(model, features, labels, weights)?;

    let subset = select_parameter_subset(model, cfg.fraction, cfg.seed);
    let mut adapted = model.clone();
    for iteration in 0..cfg.iterations {
        let grad = adapted.gradient(features, labels, weights, &subset);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite { iteration });
        }
        let params = adapted.params_mut();
        for (&slot, g) in subset.iter().zip(&grad) {
            params[slot] -= cfg.learning_rate * g;
        }
    }
    Ok(adapted)
}

/// Train a softmax model from zero-initialized parameters with plain
/// unweighted full-batch gradient descent.
pub fn train_softmax(
    features: &[Vec<f64>],
    labels: &[usize],
    classes: usize,
    iterations: usize,
    learning_rate: f64,
) -> Result<SoftmaxModel> {
    let dim = features
        .first()
        .ok_or_else(|| Error::invalid("cannot train on an empty dataset"))?
        .len();
    let model = SoftmaxModel::new_zeroed(dim, classes)?;
    let cfg = FineTuneConfig {
        fraction: 1.0,
        iterations,
        learning_rate,
        seed: 0,
    };
    fine_tune(
        &model,
        features,
        labels,
        &ImportanceWeights::ones(classes),
        &cfg,
    )
}

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointDims {
    input: usize,
    classes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hidden: Option<usize>,
}

/// On-disk model checkpoint: {version, kind, dims, params}. Parameters are
/// decimal-encoded JSON numbers, which round-trip f64 exactly.
#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    kind: String,
    dims: CheckpointDims,
    params: Vec<f64>,
}

pub fn save_checkpoint(model: &BuiltinModel, path: &Path) -> Result<()> {
    let file = match model {
        BuiltinModel::Softmax(m) => CheckpointFile {
            version: CHECKPOINT_VERSION,
            kind: "softmax".to_string(),
            dims: CheckpointDims {
                input: m.input_dim(),
                classes: m.num_classes(),
                hidden: None,
            },
            params: m.params().to_vec(),
        },
        BuiltinModel::Mlp(m) => CheckpointFile {
            version: CHECKPOINT_VERSION,
            kind: "mlp".to_string(),
            dims: CheckpointDims {
                input: m.input_dim(),
                classes: m.num_classes(),
                hidden: Some(m.hidden()),
            },
            params: m.params().to_vec(),
        },
    };
    write_json_file(&file, path)
}

pub fn load_checkpoint(path: &Path) -> Result<BuiltinModel> {
    let file: CheckpointFile = read_json_file(path)?;
    if file.version != CHECKPOINT_VERSION {
        return Err(Error::malformed(
            path,
            format!("unsupported checkpoint version {}", file.version),
        ));
    }
    match file.kind.as_str() {
        "softmax" => Ok(BuiltinModel::Softmax(
            SoftmaxModel::from_params(file.dims.input, file.dims.classes, file.params)
                .map_err(|e| Error::malformed(path, e.to_string()))?,
        )),
        "mlp" => {
            let hidden = file
                .dims
                .hidden
                .ok_or_else(|| Error::malformed(path, "mlp checkpoint lacks hidden width"))?;
            Ok(BuiltinModel::Mlp(
                MlpModel::from_params(file.dims.input, file.dims.classes, hidden, file.params)
                    .map_err(|e| Error::malformed(path, e.to_string()))?,
            ))
        }
        other => Err(Error::malformed(
            path,
            format!("unknown checkpoint kind {other:?}"),
        )),
    }
}
