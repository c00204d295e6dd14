//! Random-forest domain classifier: CART trees with Gini splits, trained on
//! bootstrap samples over a selected feature subset, voting per frame. A
//! batch's domain is the majority over its trailing frames.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureGrid;
use crate::frame::GrayFrame;
use crate::util::{argmax_count_tie_low, mix_seed, read_json_file, write_json_file};

/// Default number of trees.
pub const DEFAULT_TREES: usize = 32;
/// Default number of trailing frames examined per batch.
pub const DEFAULT_DOMAIN_CHECK_FRAMES: usize = 10;

const MAX_DEPTH: usize = 16;
const MIN_SAMPLES_SPLIT: usize = 2;

/// A CART node: either an axis-aligned split or a leaf with the class
/// counts of the training samples that reached it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature_index: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        class_counts: Vec<u64>,
    },
}

impl TreeNode {
    fn classify(&self, features: &[f64]) -> usize {
        match self {
            TreeNode::Split {
                feature_index,
                threshold,
                left,
                right,
            } => {
                if features[*feature_index] <= *threshold {
                    left.classify(features)
                } else {
                    right.classify(features)
                }
            }
            TreeNode::Leaf { class_counts } => argmax_count_tie_low(class_counts),
        }
    }

    fn max_feature_index(&self) -> usize {
        match self {
            TreeNode::Split {
                feature_index,
                left,
                right,
                ..
            } => (*feature_index)
                .max(left.max_feature_index())
                .max(right.max_feature_index()),
            TreeNode::Leaf { .. } => 0,
        }
    }
}

/// Training parameters. `bootstrap` and `feature_subsample` exist as hooks
/// so a single tree can be compared against a plain CART.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForestParams {
    pub trees: usize,
    pub seed: u64,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub bootstrap: bool,
    pub feature_subsample: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            trees: DEFAULT_TREES,
            seed: 0,
            max_depth: MAX_DEPTH,
            min_samples_split: MIN_SAMPLES_SPLIT,
            bootstrap: true,
            feature_subsample: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    version: u32,
    seed: u64,
    feature_subset: Vec<usize>,
    domain_labels: Vec<String>,
    trees: Vec<TreeNode>,
}

pub const FOREST_FILE_VERSION: u32 = 1;

/// Outcome of classifying a batch from its trailing frames.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainDecision {
    /// Index into the forest's domain labels, from the frame-level majority.
    pub domain: usize,
    /// Tree votes per domain, aggregated over the inspected frames.
    pub votes: Vec<u64>,
    pub frames_used: usize,
}

struct TreeContext<'a> {
    features: &'a [Vec<f64>],
    labels: &'a [usize],
    subset: &'a [usize],
    classes: usize,
    params: ForestParams,
}

/// Train `params.trees` CART trees, each on its own bootstrap sample drawn
/// from a per-tree seeded generator, splitting by Gini impurity over a
/// random ceil(sqrt(F)) feature subset per node.
pub fn train_forest(
    features: &[Vec<f64>],
    labels: &[usize],
    feature_subset: &[usize],
    domain_labels: Vec<String>,
    params: &ForestParams,
) -> Result<RandomForest> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(Error::invalid(
            "forest training needs matching, non-empty features and labels",
        ));
    }
    if params.trees == 0 {
        return Err(Error::invalid("forest needs at least one tree"));
    }
    if feature_subset.is_empty() {
        return Err(Error::invalid("feature subset must not be empty"));
    }
    if domain_labels.is_empty() {
        return Err(Error::invalid("domain label list must not be empty"));
    }
    let dim = features[0].len();
    if features.iter().any(|f| f.len() != dim) {
        return Err(Error::invalid("inconsistent feature dimensions"));
    }
    if let Some(&bad) = feature_subset.iter().find(|&&j| j >= dim) {
        return Err(Error::invalid(format!(
            "feature subset index {bad} out of range for {dim} features"
        )));
    }
    let classes = domain_labels.len();
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::invalid(format!(
            "label {bad} out of range for {classes} domains"
        )));
    }

    let ctx = TreeContext {
        features,
        labels,
        subset: feature_subset,
        classes,
        params: *params,
    };
    let n = features.len();
    let trees = (0..params.trees)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(params.seed, t as u64));
            let mut indices: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            build_tree(&ctx, &mut indices, 0, &mut rng)
        })
        .collect();

    Ok(RandomForest {
        version: FOREST_FILE_VERSION,
        seed: params.seed,
        feature_subset: feature_subset.to_vec(),
        domain_labels,
        trees,
    })
}

fn class_counts(ctx: &TreeContext, indices: &[usize]) -> Vec<u64> {
    let mut counts = vec![0u64; ctx.classes];
    for &i in indices {
        counts[ctx.labels[i]] += 1;
    }
    counts
}

fn gini(counts: &[u64], total: f64) -> f64 {
    let mut sum_sq = 0.0;
    for &c in counts {
        let p = c as f64 / total;
        sum_sq += p * p;
    }
    1.0 - sum_sq
}

fn build_tree(
    ctx: &TreeContext,
    indices: &mut [usize],
    depth: usize,
    rng: &mut ChaCha8Rng,
) -> TreeNode {
    let counts = class_counts(ctx, indices);
    let n = indices.len();
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
    if pure || n < ctx.params.min_samples_split || depth >= ctx.params.max_depth {
        return TreeNode::Leaf {
            class_counts: counts,
        };
    }

    // Candidate features for this node, in ascending original index so the
    // lowest-index tie-break is independent of sampling order.
    let m = ctx.subset.len();
    let mut candidates: Vec<usize> = if ctx.params.feature_subsample {
        let mtry = (m as f64).sqrt().ceil() as usize;
        rand::seq::index::sample(rng, m, mtry.min(m))
            .into_iter()
            .map(|pos| ctx.subset[pos])
            .collect()
    } else {
        ctx.subset.to_vec()
    };
    candidates.sort_unstable();

    let mut best: Option<(f64, usize, f64)> = None; // (weighted gini, feature, threshold)
    for &feature in &candidates {
        indices.sort_by(|&a, &b| {
            ctx.features[a][feature]
                .total_cmp(&ctx.features[b][feature])
                .then(a.cmp(&b))
        });
        let mut left = vec![0u64; ctx.classes];
        let mut right = counts.clone();
        for pos in 0..n - 1 {
            let (cur, next) = (indices[pos], indices[pos + 1]);
            let y = ctx.labels[cur];
            left[y] += 1;
            right[y] -= 1;
            let (v_cur, v_next) = (ctx.features[cur][feature], ctx.features[next][feature]);
            if v_cur == v_next {
                continue;
            }
            let nl = (pos + 1) as f64;
            let nr = (n - pos - 1) as f64;
            let weighted =
                (nl * gini(&left, nl) + nr * gini(&right, nr)) / n as f64;
            let better = match best {
                None => true,
                Some((g, f, t)) => {
                    weighted < g
                        || (weighted == g
                            && (feature < f
                                || (feature == f && 0.5 * (v_cur + v_next) < t)))
                }
            };
            if better {
                best = Some((weighted, feature, 0.5 * (v_cur + v_next)));
            }
        }
    }

    let Some((_, feature, threshold)) = best else {
        // Every candidate feature is constant within this node.
        return TreeNode::Leaf {
            class_counts: counts,
        };
    };

    let (mut left_idx, mut right_idx): (Vec<usize>, Vec<usize>) = indices
        .iter()
        .partition(|&&i| ctx.features[i][feature] <= threshold);
    let left = build_tree(ctx, &mut left_idx, depth + 1, rng);
    let right = build_tree(ctx, &mut right_idx, depth + 1, rng);
    TreeNode::Split {
        feature_index: feature,
        threshold,
        left: Box::new(left),
        right: Box::new(right),
    }
}

impl RandomForest {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn feature_subset(&self) -> &[usize] {
        &self.feature_subset
    }

    pub fn domain_labels(&self) -> &[String] {
        &self.domain_labels
    }

    pub fn trees(&self) -> &[TreeNode] {
        &self.trees
    }

    pub fn num_domains(&self) -> usize {
        self.domain_labels.len()
    }

    /// Classify one feature vector: each tree votes its leaf's majority
    /// class; the result is the vote majority with ties to the lower index.
    pub fn predict(&self, features: &[f64]) -> Result<(usize, Vec<u64>)> {
        let needed = self
            .trees
            .iter()
            .map(|t| t.max_feature_index())
            .max()
            .unwrap_or(0)
            .max(self.feature_subset.iter().copied().max().unwrap_or(0));
        if features.len() <= needed {
            return Err(Error::invalid(format!(
                "feature vector of length {} does not cover feature index {needed}",
                features.len()
            )));
        }
        let mut votes = vec![0u64; self.num_domains()];
        for tree in &self.trees {
            votes[tree.classify(features)] += 1;
        }
        Ok((argmax_count_tie_low(&votes), votes))
    }

    /// Classify each of the last `min(check_frames, n)` feature rows and
    /// return the frame-level majority domain. `votes` aggregates the
    /// per-tree votes of every inspected frame.
    pub fn detect_domain_from_features(
        &self,
        rows: &[Vec<f64>],
        check_frames: usize,
    ) -> Result<DomainDecision> {
        if rows.is_empty() {
            return Err(Error::invalid("cannot detect a domain from an empty batch"));
        }
        if check_frames == 0 {
            return Err(Error::invalid("domain check needs at least one frame"));
        }
        let used = check_frames.min(rows.len());
        let mut tree_votes = vec![0u64; self.num_domains()];
        let mut frame_votes = vec![0u64; self.num_domains()];
        for row in &rows[rows.len() - used..] {
            let (domain, votes) = self.predict(row)?;
            frame_votes[domain] += 1;
            for (t, v) in tree_votes.iter_mut().zip(&votes) {
                *t += v;
            }
        }
        Ok(DomainDecision {
            domain: argmax_count_tie_low(&frame_votes),
            votes: tree_votes,
            frames_used: used,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json_file(self, path)
    }

    pub fn load(path: &Path) -> Result<RandomForest> {
        let forest: RandomForest = read_json_file(path)?;
        if forest.version != FOREST_FILE_VERSION {
            return Err(Error::malformed(
                path,
                format!("unsupported forest file version {}", forest.version),
            ));
        }
        Ok(forest)
    }
}

/// Extract features from the last `min(check_frames, n)` frames and
/// classify the batch's domain.
pub fn detect_domain(
    forest: &RandomForest,
    frames: &[GrayFrame],
    grid: &FeatureGrid,
    levels: usize,
    check_frames: usize,
) -> Result<DomainDecision> {
    if frames.is_empty() {
        return Err(Error::invalid("cannot detect a domain from an empty batch"));
    }
    let used = check_frames.min(frames.len()).max(1);
    let rows = frames[frames.len() - used..]
        .iter()
        .map(|f| crate::features::extract_values(f, grid, levels))
        .collect::<Result<Vec<_>>>()?;
    forest.detect_domain_from_features(&rows, used)
}

/// Fraction of correct predictions on a labeled set.
pub fn evaluate_forest(
    forest: &RandomForest,
    features: &[Vec<f64>],
    labels: &[usize],
) -> Result<f64> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(Error::invalid(
            "evaluation needs matching, non-empty features and labels",
        ));
    }
    let mut correct = 0usize;
    for (row, &y) in features.iter().zip(labels) {
        if forest.predict(row)?.0 == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / features.len() as f64)
}

/// Train `restarts` forests with consecutive seeds and keep the one with the
/// best accuracy on the evaluation split (ties keep the earliest seed).
#[allow(clippy::too_many_arguments)]
pub fn train_best_forest(
    train_features: &[Vec<f64>],
    train_labels: &[usize],
    eval_features: &[Vec<f64>],
    eval_labels: &[usize],
    feature_subset: &[usize],
    domain_labels: Vec<String>,
    params: &ForestParams,
    restarts: usize,
) -> Result<(RandomForest, f64)> {
    if restarts == 0 {
        return Err(Error::invalid("at least one restart is required"));
    }
    let mut best: Option<(RandomForest, f64)> = None;
    for r in 0..restarts {
        let mut p = *params;
        p.seed = params.seed.wrapping_add(r as u64);
        let forest = train_forest(
            train_features,
            train_labels,
            feature_subset,
            domain_labels.clone(),
            &p,
        )?;
        let acc = evaluate_forest(&forest, eval_features, eval_labels)?;
        if best.as_ref().is_none_or(|(_, b)| acc > *b) {
            best = Some((forest, acc));
        }
    }
    Ok(best.expect("restarts >= 1"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn separable_dataset(n_per: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for class in 0..2usize {
            for _ in 0..n_per {
                let base = class as f64 * 10.0;
                features.push(vec![base + rng.random::<f64>(), rng.random::<f64>()]);
                labels.push(class);
            }
        }
        (features, labels)
    }

    #[test]
    fn separable_data_trains_to_perfect_accuracy() {
        let (features, labels) = separable_dataset(30);
        let forest = train_forest(
            &features,
            &labels,
            &[0, 1],
            vec!["a".into(), "b".into()],
            &ForestParams {
                trees: 8,
                seed: 3,
                ..ForestParams::default()
            },
        )
        .unwrap();
        assert_eq!(evaluate_forest(&forest, &features, &labels).unwrap(), 1.0);
    }

    #[test]
    fn same_seed_gives_identical_forest() {
        let (features, labels) = separable_dataset(20);
        let params = ForestParams {
            trees: 6,
            seed: 42,
            ..ForestParams::default()
        };
        let a = train_forest(&features, &labels, &[0, 1], vec!["a".into(), "b".into()], &params)
            .unwrap();
        let b = train_forest(&features, &labels, &[0, 1], vec!["a".into(), "b".into()], &params)
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_class_collapses_to_leaves() {
        let features = vec![vec![0.0], vec![1.0], vec![2.0]];
        let labels = vec![1, 1, 1];
        let forest = train_forest(
            &features,
            &labels,
            &[0],
            vec!["a".into(), "b".into()],
            &ForestParams {
                trees: 2,
                ..ForestParams::default()
            },
        )
        .unwrap();
        for tree in forest.trees() {
            assert!(matches!(tree, TreeNode::Leaf { .. }));
        }
        assert_eq!(forest.predict(&[5.0]).unwrap().0, 1);
    }

    /// Standalone CART used as an oracle: exhaustive over all features and
    /// all midpoints, same stopping and tie-break rules as the contract.
    #[allow(clippy::needless_range_loop)]
    fn cart_oracle(
        features: &[Vec<f64>],
        labels: &[usize],
        indices: &[usize],
        classes: usize,
        depth: usize,
    ) -> TreeNode {
        let mut counts = vec![0u64; classes];
        for &i in indices {
            counts[labels[i]] += 1;
        }
        let n = indices.len();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || n < 2 || depth >= 16 {
            return TreeNode::Leaf {
                class_counts: counts,
            };
        }
        let dim = features[0].len();
        let mut best: Option<(f64, usize, f64)> = None;
        for f in 0..dim {
            let mut vals: Vec<f64> = indices.iter().map(|&i| features[i][f]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let thr = 0.5 * (w[0] + w[1]);
                let mut lc = vec![0u64; classes];
                let mut rc = vec![0u64; classes];
                for &i in indices {
                    if features[i][f] <= thr {
                        lc[labels[i]] += 1;
                    } else {
                        rc[labels[i]] += 1;
                    }
                }
                let nl: u64 = lc.iter().sum();
                let nr: u64 = rc.iter().sum();
                if nl == 0 || nr == 0 {
                    continue;
                }
                let weighted = (nl as f64 * gini(&lc, nl as f64)
                    + nr as f64 * gini(&rc, nr as f64))
                    / n as f64;
                let better = match best {
                    None => true,
                    Some((g, bf, bt)) => {
                        weighted < g || (weighted == g && (f < bf || (f == bf && thr < bt)))
                    }
                };
                if better {
                    best = Some((weighted, f, thr));
                }
            }
        }
        let Some((_, f, thr)) = best else {
            return TreeNode::Leaf {
                class_counts: counts,
            };
        };
        let (li, ri): (Vec<usize>, Vec<usize>) =
            indices.iter().partition(|&&i| features[i][f] <= thr);
        TreeNode::Split {
            feature_index: f,
            threshold: thr,
            left: Box::new(cart_oracle(features, labels, &li, classes, depth + 1)),
            right: Box::new(cart_oracle(features, labels, &ri, classes, depth + 1)),
        }
    }

    #[test]
    fn single_tree_without_bootstrap_matches_cart_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..10 {
            let n = rng.random_range(10..50);
            let dim = rng.random_range(1..4usize);
            let classes = 3;
            let features: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..dim).map(|_| rng.random_range(0..8) as f64).collect())
                .collect();
            let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
            let subset: Vec<usize> = (0..dim).collect();
            let forest = train_forest(
                &features,
                &labels,
                &subset,
                (0..classes).map(|c| format!("d{c}")).collect(),
                &ForestParams {
                    trees: 1,
                    bootstrap: false,
                    feature_subsample: false,
                    seed: trial,
                    ..ForestParams::default()
                },
            )
            .unwrap();
            let indices: Vec<usize> = (0..n).collect();
            let oracle = cart_oracle(&features, &labels, &indices, classes, 0);
            for row in &features {
                assert_eq!(
                    forest.predict(row).unwrap().0,
                    oracle.classify(row),
                    "trial {trial}"
                );
            }
        }
    }

    #[test]
    fn bootstrap_unique_fraction_near_one_minus_inv_e() {
        let n = 10_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(5, 0));
        let mut seen = vec![false; n];
        for _ in 0..n {
            seen[rng.random_range(0..n)] = true;
        }
        let unique = seen.iter().filter(|&&s| s).count() as f64 / n as f64;
        let expected = 1.0 - (-1.0f64).exp();
        assert!(
            (unique - expected).abs() < 0.02,
            "unique fraction {unique} vs {expected}"
        );
    }

    #[test]
    fn sample_counts_strictly_decrease_along_paths() {
        fn check(node: &TreeNode, features: &[Vec<f64>], indices: &[usize]) {
            if let TreeNode::Split {
                feature_index,
                threshold,
                left,
                right,
            } = node
            {
                let (li, ri): (Vec<usize>, Vec<usize>) = indices
                    .iter()
                    .partition(|&&i| features[i][*feature_index] <= *threshold);
                assert!(!li.is_empty() && !ri.is_empty());
                assert!(li.len() < indices.len());
                assert!(ri.len() < indices.len());
                check(left, features, &li);
                check(right, features, &ri);
            }
        }
        let (features, labels) = separable_dataset(25);
        let forest = train_forest(
            &features,
            &labels,
            &[0, 1],
            vec!["a".into(), "b".into()],
            &ForestParams {
                trees: 1,
                bootstrap: false,
                feature_subsample: false,
                ..ForestParams::default()
            },
        )
        .unwrap();
        let indices: Vec<usize> = (0..features.len()).collect();
        check(&forest.trees()[0], &features, &indices);
    }

    #[test]
    fn prediction_invariant_under_tree_reordering() {
        let (features, labels) = separable_dataset(20);
        let forest = train_forest(
            &features,
            &labels,
            &[0, 1],
            vec!["a".into(), "b".into()],
            &ForestParams {
                trees: 7,
                seed: 2,
                ..ForestParams::default()
            },
        )
        .unwrap();
        let mut reordered = forest.clone();
        reordered.trees.reverse();
        for row in &features {
            assert_eq!(
                forest.predict(row).unwrap(),
                reordered.predict(row).unwrap()
            );
        }
    }

    #[test]
    fn tie_votes_resolve_to_lower_domain() {
        // Two single-leaf trees voting for different classes.
        let forest = RandomForest {
            version: FOREST_FILE_VERSION,
            seed: 0,
            feature_subset: vec![0],
            domain_labels: vec!["a".into(), "b".into()],
            trees: vec![
                TreeNode::Leaf {
                    class_counts: vec![1, 0],
                },
                TreeNode::Leaf {
                    class_counts: vec![0, 1],
                },
            ],
        };
        let (winner, votes) = forest.predict(&[0.0]).unwrap();
        assert_eq!(votes, vec![1, 1]);
        assert_eq!(winner, 0);
    }

    #[test]
    fn detect_domain_clamps_and_accounts_votes() {
        let (features, labels) = separable_dataset(20);
        let forest = train_forest(
            &features,
            &labels,
            &[0, 1],
            vec!["a".into(), "b".into()],
            &ForestParams {
                trees: 5,
                seed: 8,
                ..ForestParams::default()
            },
        )
        .unwrap();
        // Batch of 4 rows, check window of 10: uses all 4.
        let rows: Vec<Vec<f64>> = features[..4].to_vec();
        let decision = forest.detect_domain_from_features(&rows, 10).unwrap();
        assert_eq!(decision.frames_used, 4);
        let total: u64 = decision.votes.iter().sum();
        assert_eq!(total, 4 * 5);
        assert_eq!(decision.domain, 0);
    }

    #[test]
    fn detect_domain_takes_frame_level_majority() {
        // One split tree: feature 0 <= 0.5 votes domain 0, else domain 1.
        let forest = RandomForest {
            version: FOREST_FILE_VERSION,
            seed: 0,
            feature_subset: vec![0],
            domain_labels: vec!["a".into(), "b".into()],
            trees: vec![TreeNode::Split {
                feature_index: 0,
                threshold: 0.5,
                left: Box::new(TreeNode::Leaf {
                    class_counts: vec![3, 0],
                }),
                right: Box::new(TreeNode::Leaf {
                    class_counts: vec![0, 3],
                }),
            }],
        };
        // 7 frames land on domain 0, 3 on domain 1.
        let mut rows = vec![vec![0.0]; 7];
        rows.extend(vec![vec![1.0]; 3]);
        let decision = forest.detect_domain_from_features(&rows, 10).unwrap();
        assert_eq!(decision.domain, 0);
        assert_eq!(decision.frames_used, 10);
        assert_eq!(decision.votes, vec![7, 3]);
    }

    #[test]
    fn forest_round_trips_through_json() {
        let (features, labels) = separable_dataset(15);
        let forest = train_forest(
            &features,
            &labels,
            &[0, 1],
            vec!["a".into(), "b".into()],
            &ForestParams {
                trees: 4,
                seed: 11,
                ..ForestParams::default()
            },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("forest.json");
        forest.save(&path).unwrap();
        let loaded = RandomForest::load(&path).unwrap();
        assert_eq!(forest, loaded);
        for row in &features {
            assert_eq!(forest.predict(row).unwrap(), loaded.predict(row).unwrap());
        }
    }

    #[test]
    fn evaluate_on_constant_predictor_is_prior() {
        let forest = RandomForest {
            version: FOREST_FILE_VERSION,
            seed: 0,
            feature_subset: vec![0],
            domain_labels: (0..4).map(|c| format!("d{c}")).collect(),
            trees: vec![TreeNode::Leaf {
                class_counts: vec![1, 0, 0, 0],
            }],
        };
        let features: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64]).collect();
        let labels: Vec<usize> = (0..40).map(|i| i % 4).collect();
        let acc = evaluate_forest(&forest, &features, &labels).unwrap();
        assert_eq!(acc, 0.25);
    }
}
