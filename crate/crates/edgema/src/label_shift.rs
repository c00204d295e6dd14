//! Label-distribution shift machinery: predicted-label distributions, the
//! classifier confusion matrix, importance-weight recovery by solving
//! C w = q, and the KL gate that decides whether a shift warrants
//! retraining.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LightweightModel;

/// Additive smoothing applied to both distributions before the KL sum.
pub const KL_EPSILON: f64 = 1e-6;
/// Ridge term stabilizing the confusion-system solve.
pub const RIDGE_LAMBDA: f64 = 1e-6;
/// Default upper clip for importance weights.
pub const DEFAULT_WEIGHT_CAP: f64 = 10.0;
/// Default KL gate threshold, in nats.
pub const DEFAULT_KL_THRESHOLD: f64 = 0.1;

/// A probability vector over K classes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelDistribution {
    probs: Vec<f64>,
}

impl LabelDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("distribution must have at least one class"));
        }
        if probs.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(Error::invalid("distribution entries must be finite and >= 0"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "distribution must sum to 1 (got {sum})"
            )));
        }
        Ok(Self { probs })
    }

    /// Normalized counts over `k` classes.
    pub fn from_counts(counts: &[usize], k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("distribution needs at least one class"));
        }
        let mut bins = vec![0usize; k];
        for &c in counts {
            if c >= k {
                return Err(Error::invalid(format!("label {c} out of range for k={k}")));
            }
            bins[c] += 1;
        }
        let n = counts.len();
        if n == 0 {
            return Err(Error::invalid("cannot estimate a distribution from zero samples"));
        }
        Ok(Self {
            probs: bins.iter().map(|&b| b as f64 / n as f64).collect(),
        })
    }

    pub fn uniform(k: usize) -> Self {
        Self {
            probs: vec![1.0 / k as f64; k],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, class: usize) -> f64 {
        self.probs[class]
    }
}

/// Joint confusion matrix of a classifier on source data:
/// entry (i, j) = P(h(x) = i, y = j). Rows sum to the predicted-label
/// distribution, columns to the true class priors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    k: usize,
    joint: Vec<f64>, // row-major, [pred * k + true]
}

impl ConfusionMatrix {
    pub fn new(k: usize, joint: Vec<f64>) -> Result<Self> {
        if k == 0 || joint.len() != k * k {
            return Err(Error::invalid("confusion matrix must be k x k with k >= 1"));
        }
        if joint.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(Error::invalid("confusion entries must be finite and >= 0"));
        }
        let sum: f64 = joint.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "confusion matrix must sum to 1 (got {sum})"
            )));
        }
        Ok(Self { k, joint })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// P(h = pred, y = truth).
    pub fn joint(&self, pred: usize, truth: usize) -> f64 {
        self.joint[pred * self.k + truth]
    }

    /// Predicted-label marginal, P(h = i).
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.k)
            .map(|i| (0..self.k).map(|j| self.joint(i, j)).sum())
            .collect()
    }

    /// True-class priors, P(y = j).
    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.k)
            .map(|j| (0..self.k).map(|i| self.joint(i, j)).sum())
            .collect()
    }
}

/// Per-class ratios P_T(y) / P_S(y), clipped into [0, cap]. These are
/// ratios, not probabilities; they are never renormalized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ImportanceWeights {
    weights: Vec<f64>,
}

impl ImportanceWeights {
    pub fn ones(k: usize) -> Self {
        Self {
            weights: vec![1.0; k],
        }
    }

    pub fn from_values(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(Error::invalid("importance weights must be finite and >= 0"));
        }
        Ok(Self { weights })
    }

    pub fn values(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn get(&self, class: usize) -> f64 {
        self.weights[class]
    }
}

/// Fraction of predictions equal to each class: the vector
/// [ count(pred == i) / N ] for i in 0..k.
pub fn estimate_predicted_distribution(
    predictions: &[usize],
    k: usize,
) -> Result<LabelDistribution> {
    if predictions.is_empty() {
        return Err(Error::invalid(
            "cannot estimate a distribution from zero predictions",
        ));
    }
    LabelDistribution::from_counts(predictions, k)
}

/// Joint confusion estimate of `model` on a labeled holdout:
/// entry (i, j) = #\{h(x) = i and y = j\} / N.
///
/// Every class must appear at least once among the true labels, otherwise
/// the importance weights would be unidentifiable.
pub fn estimate_confusion<M: LightweightModel + ?Sized>(
    model: &M,
    features: &[Vec<f64>],
    labels: &[usize],
    k: usize,
) -> Result<ConfusionMatrix> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(Error::invalid(
            "confusion estimation needs matching, non-empty features and labels",
        ));
    }
    let mut present = vec![false; k];
    for &y in labels {
        if y >= k {
            return Err(Error::invalid(format!("label {y} out of range for k={k}")));
        }
        present[y] = true;
    }
    if let Some(missing) = present.iter().position(|&p| !p) {
        return Err(Error::MissingClass(missing));
    }
    let n = features.len() as f64;
    let mut joint = vec![0.0; k * k];
    for (row, &y) in features.iter().zip(labels) {
        let pred = model.predict(row);
        if pred >= k {
            return Err(Error::invalid(format!(
                "model predicted class {pred}, outside k={k}"
            )));
        }
        joint[pred * k + y] += 1.0 / n;
    }
    ConfusionMatrix::new(k, joint)
}

/// Solve C w = q for the per-class importance ratios by ridge least squares
/// (lambda = [`RIDGE_LAMBDA`]), then clip the solution into [0, cap].
pub fn compute_importance_weights(
    confusion: &ConfusionMatrix,
    q: &LabelDistribution,
    cap: f64,
) -> Result<ImportanceWeights> {
    let k = confusion.k();
    if q.len() != k {
        return Err(Error::invalid(format!(
            "dimension mismatch: confusion is {k}x{k}, q has {}",
            q.len()
        )));
    }
    if cap.is_nan() || cap <= 0.0 {
        return Err(Error::invalid("weight cap must be positive"));
    }

    // Normal equations: (C^T C + lambda I) w = C^T q.
    let mut a = vec![0.0; k * k];
    let mut b = vec![0.0; k];
    for r in 0..k {
        for c in 0..k {
            let mut sum = 0.0;
            for i in 0..k {
                sum += confusion.joint(i, r) * confusion.joint(i, c);
            }
            a[r * k + c] = sum;
        }
        a[r * k + r] += RIDGE_LAMBDA;
        b[r] = (0..k).map(|i| confusion.joint(i, r) * q.get(i)).sum();
    }

    let solution = solve_linear_system(&mut a, &mut b, k)?;
    let clipped = solution.into_iter().map(|w| w.clamp(0.0, cap)).collect();
    ImportanceWeights::from_values(clipped)
}

/// Gaussian elimination with partial pivoting. Errors if the pivot spread
/// indicates numerical rank deficiency.
fn solve_linear_system(a: &mut [f64], b: &mut [f64], k: usize) -> Result<Vec<f64>> {
    let mut max_pivot = 0.0f64;
    let mut min_pivot = f64::INFINITY;
    for col in 0..k {
        let pivot_row = (col..k)
            .max_by(|&r1, &r2| a[r1 * k + col].abs().total_cmp(&a[r2 * k + col].abs()))
            .expect("non-empty range");
        if pivot_row != col {
            for j in 0..k {
                a.swap(col * k + j, pivot_row * k + j);
            }
            b.swap(col, pivot_row);
        }
        let pivot = a[col * k + col];
        max_pivot = max_pivot.max(pivot.abs());
        min_pivot = min_pivot.min(pivot.abs());
        if pivot.abs() < max_pivot * 1e-12 || pivot == 0.0 {
            return Err(Error::IllConditioned {
                condition: if min_pivot > 0.0 {
                    max_pivot / min_pivot
                } else {
                    f64::INFINITY
                },
            });
        }
        for row in col + 1..k {
            let factor = a[row * k + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for j in col..k {
                a[row * k + j] -= factor * a[col * k + j];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; k];
    for col in (0..k).rev() {
        let mut sum = b[col];
        for j in col + 1..k {
            sum -= a[col * k + j] * x[j];
        }
        x[col] = sum / a[col * k + col];
    }
    Ok(x)
}

/// KL divergence sum p_i ln(p_i / m_i) in nats, with epsilon smoothing on
/// both distributions followed by renormalization, so disjoint support stays
/// finite.
///
/// # Panics
/// If the distributions have different lengths.
pub fn kl_divergence(p: &LabelDistribution, m: &LabelDistribution) -> f64 {
    assert_eq!(
        p.len(),
        m.len(),
        "kl_divergence requires equal-length distributions"
    );
    let smooth = |d: &LabelDistribution| -> Vec<f64> {
        let total: f64 = d.probs().iter().sum::<f64>() + d.len() as f64 * KL_EPSILON;
        d.probs().iter().map(|&x| (x + KL_EPSILON) / total).collect()
    };
    let ps = smooth(p);
    let ms = smooth(m);
    ps.iter()
        .zip(&ms)
        .map(|(&pi, &mi)| if pi > 0.0 { pi * (pi / mi).ln() } else { 0.0 })
        .sum()
}

/// Whether a measured divergence warrants adaptation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShiftDecision {
    /// The model still matches; keep serving it.
    Lag,
    /// The shift is malignant; retrain.
    Adapt,
}

/// Lag iff d < threshold; the boundary d == threshold adapts.
pub fn shift_gate(d: f64, threshold: f64) -> ShiftDecision {
    if d < threshold {
        ShiftDecision::Lag
    } else {
        ShiftDecision::Adapt
    }
}
