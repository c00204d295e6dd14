//! AdaBoost over decision stumps, used to score feature importance and pick
//! the subset the domain classifier trains on.
//!
//! Each round normalizes sample weights, fits the single best stump across
//! all features, credits that feature's importance score with the round's
//! alpha, and up-weights misclassified samples. Multiclass rounds use the
//! SAMME alpha with the ln(K-1) term.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::{read_json_file, write_json_file};

/// Smallest weighted error used when a round is perfect.
pub const MIN_ROUND_ERROR: f64 = 1e-10;
/// Default number of boosting rounds.
pub const DEFAULT_ROUNDS: usize = 100;
/// Default size of the selected feature subset.
pub const DEFAULT_TOP_K: usize = 6;

/// A labeled feature row with a non-negative sample weight.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedSample {
    pub features: Vec<f64>,
    pub label: usize,
    pub weight: f64,
}

impl WeightedSample {
    pub fn new(features: Vec<f64>, label: usize) -> Self {
        Self {
            features,
            label,
            weight: 1.0,
        }
    }
}

/// Axis-aligned weak learner: predicts `left_class` when the feature value
/// is <= threshold, else `right_class`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stump {
    pub feature_index: usize,
    pub threshold: f64,
    pub left_class: usize,
    pub right_class: usize,
}

impl Stump {
    pub fn predict(&self, features: &[f64]) -> usize {
        if features[self.feature_index] <= self.threshold {
            self.left_class
        } else {
            self.right_class
        }
    }
}

/// One retained boosting round.
#[derive(Clone, Debug, PartialEq)]
pub struct BoostRound {
    pub stump: Stump,
    pub alpha: f64,
}

/// Per-feature importance scores accumulated over rounds.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureImportance {
    pub scores: Vec<f64>,
}

/// The trained ensemble plus the importance vector it produced.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaBoostEnsemble {
    pub rounds: Vec<BoostRound>,
    pub importance: FeatureImportance,
}

/// How a retained round credits its chosen feature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImportanceMode {
    /// Add the round's alpha (weights rounds by classifier quality).
    Alpha,
    /// Add 1 per round.
    Count,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaBoostConfig {
    pub rounds: usize,
    pub importance_mode: ImportanceMode,
}

impl Default for AdaBoostConfig {
    fn default() -> Self {
        Self {
            rounds: DEFAULT_ROUNDS,
            importance_mode: ImportanceMode::Alpha,
        }
    }
}

/// Fit the best stump on one feature: the threshold is chosen among
/// midpoints of consecutive distinct sorted values, each side predicting its
/// weighted-majority class. Returns the stump and its weighted error.
///
/// If every value of the feature is identical the stump degenerates to the
/// global weighted-majority class on both sides.
pub fn fit_stump(samples: &[WeightedSample], feature_index: usize) -> Result<(Stump, f64)> {
    if samples.is_empty() {
        return Err(Error::invalid("cannot fit a stump on an empty dataset"));
    }
    let dim = samples[0].features.len();
    if feature_index >= dim {
        return Err(Error::invalid(format!(
            "feature index {feature_index} out of range for {dim} features"
        )));
    }
    let classes = 1 + samples.iter().map(|s| s.label).max().unwrap();
    let values: Vec<f64> = samples.iter().map(|s| s.features[feature_index]).collect();
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let weights: Vec<f64> = samples.iter().map(|s| s.weight).collect();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    Ok(stump_scan(
        feature_index,
        &order,
        &values,
        &labels,
        &weights,
        classes,
    ))
}

/// Sweep the sorted order of one feature and return the best stump on it.
fn stump_scan(
    feature_index: usize,
    order: &[usize],
    values: &[f64],
    labels: &[usize],
    weights: &[f64],
    classes: usize,
) -> (Stump, f64) {
    let total_by_class = {
        let mut t = vec![0.0; classes];
        for (&y, &w) in labels.iter().zip(weights) {
            t[y] += w;
        }
        t
    };
    let total: f64 = total_by_class.iter().sum();
    let majority = weighted_argmax(&total_by_class);

    let mut left = vec![0.0; classes];
    let mut best: Option<(f64, Stump)> = None;
    for w in order.windows(2) {
        let (cur, next) = (w[0], w[1]);
        left[labels[cur]] += weights[cur];
        if values[cur] == values[next] {
            continue;
        }
        let threshold = 0.5 * (values[cur] + values[next]);
        let left_class = weighted_argmax(&left);
        let right_class = {
            let mut best_c = 0;
            let mut best_w = total_by_class[0] - left[0];
            for c in 1..classes {
                let w = total_by_class[c] - left[c];
                if w > best_w {
                    best_w = w;
                    best_c = c;
                }
            }
            best_c
        };
        let right_majority_weight = total_by_class[right_class] - left[right_class];
        let error = total - left[left_class] - right_majority_weight;
        if best.as_ref().is_none_or(|(e, _)| error < *e) {
            best = Some((
                error,
                Stump {
                    feature_index,
                    threshold,
                    left_class,
                    right_class,
                },
            ));
        }
    }

    match best {
        Some((error, stump)) => (stump, error),
        None => {
            // All values identical: global majority on both sides.
            let stump = Stump {
                feature_index,
                threshold: values[order[0]],
                left_class: majority,
                right_class: majority,
            };
            (stump, total - total_by_class[majority])
        }
    }
}

fn weighted_argmax(weights: &[f64]) -> usize {
    let mut best = 0;
    for (c, w) in weights.iter().enumerate().skip(1) {
        if *w > weights[best] {
            best = c;
        }
    }
    best
}

/// Run `config.rounds` boosting rounds over all features.
///
/// Per round: normalize weights, pick the stump with least weighted error
/// over all features (ties by lower feature index, then lower threshold),
/// credit the feature's importance with alpha = ln((1-E)/E) + ln(K-1), and
/// multiply misclassified sample weights by exp(alpha). A round with
/// E >= 1 - 1/K is discarded and training stops.
pub fn train_adaboost(
    samples: &[WeightedSample],
    config: &AdaBoostConfig,
) -> Result<AdaBoostEnsemble> {
    if samples.is_empty() {
        return Err(Error::invalid("cannot train AdaBoost on an empty dataset"));
    }
    if config.rounds == 0 {
        return Err(Error::invalid("AdaBoost needs at least one round"));
    }
    let dim = samples[0].features.len();
    if samples.iter().any(|s| s.features.len() != dim) {
        return Err(Error::invalid("inconsistent feature dimensions"));
    }
    if samples.iter().any(|s| s.weight.is_nan() || s.weight < 0.0) {
        return Err(Error::invalid("sample weights must be non-negative"));
    }
    let classes = 1 + samples.iter().map(|s| s.label).max().unwrap();
    let mut present = vec![false; classes];
    for s in samples {
        present[s.label] = true;
    }
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::invalid("AdaBoost needs at least two classes"));
    }

    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    // Column views plus per-feature sorted orders; the order never changes
    // across rounds, only the weights do.
    let columns: Vec<Vec<f64>> = (0..dim)
        .map(|j| samples.iter().map(|s| s.features[j]).collect())
        .collect();
    let orders: Vec<Vec<usize>> = columns
        .iter()
        .map(|col| {
            let mut order: Vec<usize> = (0..samples.len()).collect();
            order.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
            order
        })
        .collect();

    let mut weights: Vec<f64> = samples.iter().map(|s| s.weight).collect();
    let stop_error = 1.0 - 1.0 / classes as f64;
    let multiclass_bonus = ((classes - 1) as f64).ln();

    let mut rounds = Vec::new();
    let mut scores = vec![0.0; dim];
    for _ in 0..config.rounds {
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid("sample weights sum to zero"));
        }
        for w in weights.iter_mut() {
            *w /= total;
        }

        let mut best: Option<(f64, Stump)> = None;
        for j in 0..dim {
            let (stump, error) = stump_scan(j, &orders[j], &columns[j], &labels, &weights, classes);
            if best.as_ref().is_none_or(|(e, _)| error < *e) {
                best = Some((error, stump));
            }
        }
        let (error, stump) = best.expect("at least one feature");

        if error >= stop_error {
            break;
        }
        let clamped = error.max(MIN_ROUND_ERROR);
        let alpha = ((1.0 - clamped) / clamped).ln() + multiclass_bonus;
        scores[stump.feature_index] += match config.importance_mode {
            ImportanceMode::Alpha => alpha,
            ImportanceMode::Count => 1.0,
        };

        let boost = alpha.exp();
        for (i, sample) in samples.iter().enumerate() {
            if stump.predict(&sample.features) != labels[i] {
                weights[i] *= boost;
            }
        }
        rounds.push(BoostRound { stump, alpha });
    }

    Ok(AdaBoostEnsemble {
        rounds,
        importance: FeatureImportance { scores },
    })
}

/// Indices of the k largest scores, ties broken by lower index; the result
/// is ordered by descending score.
pub fn select_top_k(importance: &FeatureImportance, k: usize) -> Result<Vec<usize>> {
    let n = importance.scores.len();
    if k == 0 || k > n {
        return Err(Error::invalid(format!(
            "top-k must be in 1..={n}, got {k}"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    indices.sort_by(|&a, &b| {
        importance.scores[b]
            .total_cmp(&importance.scores[a])
            .then(a.cmp(&b))
    });
    indices.truncate(k);
    Ok(indices)
}

/// Serialized form of an importance vector and its selected subset.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SelectionFile {
    pub version: u32,
    pub scores: Vec<f64>,
    pub selected: Vec<usize>,
}

pub const SELECTION_FILE_VERSION: u32 = 1;

impl SelectionFile {
    pub fn new(importance: &FeatureImportance, selected: Vec<usize>) -> Self {
        Self {
            version: SELECTION_FILE_VERSION,
            scores: importance.scores.clone(),
            selected,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json_file(self, path)
    }

    pub fn load(path: &Path) -> Result<SelectionFile> {
        let file: SelectionFile = read_json_file(path)?;
        if file.version != SELECTION_FILE_VERSION {
            return Err(Error::malformed(
                path,
                format!("unsupported selection file version {}", file.version),
            ));
        }
        Ok(file)
    }
}
