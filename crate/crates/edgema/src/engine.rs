//! The adaptive streaming loop: buffer batches, detect domain shift from
//! trailing frames, gate label shift by KL divergence, fine-tune with
//! importance weights, and swap the active model between batches.
//!
//! Per batch: (a) run inference on every frame with the active model;
//! (b) classify the batch's domain from its trailing frames — on a change,
//! load that domain's profile, estimate the predicted label distribution
//! with the profile's checkpoint, compute importance weights and fine-tune
//! it; (c) otherwise compare the batch's predicted distribution against the
//! one at the last adaptation and fine-tune only when the KL divergence
//! crosses the threshold. Benign shifts lag.

use std::borrow::Cow;
use std::path::Path;
use std::sync::{Arc, RwLock};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_values, FeatureGrid, GridKind, Standardizer, DEFAULT_LEVELS};
use crate::forest::{
    train_forest, ForestParams, RandomForest, DEFAULT_DOMAIN_CHECK_FRAMES, DEFAULT_TREES,
};
use crate::frame::{Frame, GrayFrame};
use crate::label_shift::{
    compute_importance_weights, estimate_confusion, estimate_predicted_distribution,
    kl_divergence, shift_gate, ConfusionMatrix, ImportanceWeights, LabelDistribution,
    ShiftDecision, DEFAULT_KL_THRESHOLD, DEFAULT_WEIGHT_CAP,
};
use crate::manifest::{read_manifest, resolve_frame_path, ManifestRecord};
use crate::model::{
    fine_tune, load_checkpoint, BuiltinModel, FineTuneConfig, LightweightModel,
    DEFAULT_FINETUNE_FRACTION, DEFAULT_FINETUNE_ITERATIONS, DEFAULT_LEARNING_RATE,
};
use crate::pnm::read_frame;
use crate::util::{mix_seed, percentile_sorted, read_json_file, write_json_file};

/// Default frames per batch (about ten seconds at 25 fps).
pub const DEFAULT_BATCH_SIZE: usize = 250;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinetuneSettings {
    pub fraction: f64,
    pub iterations: usize,
    pub learning_rate: f64,
}

impl Default for FinetuneSettings {
    fn default() -> Self {
        Self {
            fraction: DEFAULT_FINETUNE_FRACTION,
            iterations: DEFAULT_FINETUNE_ITERATIONS,
            learning_rate: DEFAULT_LEARNING_RATE,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlcmSettings {
    pub levels: usize,
    pub grid: GridKind,
}

impl Default for GlcmSettings {
    fn default() -> Self {
        Self {
            levels: DEFAULT_LEVELS,
            grid: GridKind::Reduced,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestSettings {
    pub trees: usize,
    pub seed: u64,
}

impl Default for ForestSettings {
    fn default() -> Self {
        Self {
            trees: DEFAULT_TREES,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SeedSettings {
    pub engine: u64,
}

/// Where the reference distribution P_M starts before any adaptation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PmInit {
    /// The starting domain's source prior.
    SourcePrior,
    /// The first batch's own predicted distribution (first batch never
    /// triggers a label-shift adaptation).
    FirstBatch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(rename = "kl_threshold_D", default = "default_kl_threshold")]
    pub kl_threshold: f64,
    #[serde(default = "default_check_frames")]
    pub domain_check_frames: usize,
    #[serde(default)]
    pub finetune: FinetuneSettings,
    #[serde(default)]
    pub glcm: GlcmSettings,
    #[serde(default)]
    pub forest: ForestSettings,
    #[serde(default)]
    pub seeds: SeedSettings,
    /// Consume every n-th manifest frame (1 = all frames).
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default = "default_pm_init")]
    pub pm_init: PmInit,
    /// When true (the default), timing columns are reported as zero so
    /// replays are byte-reproducible; set false for wall-clock numbers.
    #[serde(default = "default_deterministic_timing")]
    pub deterministic_timing: bool,
}

fn default_batch_size() -> usize {
    DEFAULT_BATCH_SIZE
}

fn default_kl_threshold() -> f64 {
    DEFAULT_KL_THRESHOLD
}

fn default_check_frames() -> usize {
    DEFAULT_DOMAIN_CHECK_FRAMES
}

fn default_stride() -> usize {
    1
}

fn default_pm_init() -> PmInit {
    PmInit::SourcePrior
}

fn default_deterministic_timing() -> bool {
    true
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            batch_size: DEFAULT_BATCH_SIZE,
            kl_threshold: DEFAULT_KL_THRESHOLD,
            domain_check_frames: DEFAULT_DOMAIN_CHECK_FRAMES,
            finetune: FinetuneSettings::default(),
            glcm: GlcmSettings::default(),
            forest: ForestSettings::default(),
            seeds: SeedSettings::default(),
            stride: 1,
            pm_init: PmInit::SourcePrior,
            deterministic_timing: true,
        }
    }
}

impl EngineConfig {
    pub fn load(path: &Path) -> Result<EngineConfig> {
        let config: EngineConfig = read_json_file(path)?;
        config.validate().map_err(|e| match e {
            Error::InvalidInput(m) => Error::malformed(path, m),
            other => other,
        })?;
        Ok(config)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json_file(self, path)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        if self.kl_threshold.is_nan() || self.kl_threshold < 0.0 {
            return Err(Error::invalid("kl_threshold_D must be >= 0"));
        }
        if self.domain_check_frames == 0 {
            return Err(Error::invalid("domain_check_frames must be >= 1"));
        }
        let fraction = self.finetune.fraction;
        if fraction.is_nan() || fraction <= 0.0 || fraction > 1.0 {
            return Err(Error::invalid("finetune.fraction must be in (0, 1]"));
        }
        if self.finetune.iterations == 0 {
            return Err(Error::invalid("finetune.iterations must be >= 1"));
        }
        let lr = self.finetune.learning_rate;
        if lr.is_nan() || lr <= 0.0 {
            return Err(Error::invalid("finetune.learning_rate must be > 0"));
        }
        if !(2..=256).contains(&self.glcm.levels) {
            return Err(Error::invalid("glcm.levels must be in 2..=256"));
        }
        if self.forest.trees == 0 {
            return Err(Error::invalid("forest.trees must be >= 1"));
        }
        if self.stride == 0 {
            return Err(Error::invalid("stride must be >= 1"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Stream batches
// ---------------------------------------------------------------------------

/// One frame of the stream with its metadata. Ground-truth label and domain
/// are optional; they only feed evaluation columns.
#[derive(Clone, Debug)]
pub struct StreamFrame {
    pub frame: Frame,
    pub timestamp: f64,
    pub label: Option<usize>,
    pub domain: Option<String>,
}

/// A buffered batch of consecutive frames.
#[derive(Clone, Debug)]
pub struct StreamBatch {
    pub index: usize,
    pub frames: Vec<StreamFrame>,
}

impl StreamBatch {
    pub fn new(index: usize, frames: Vec<StreamFrame>) -> Result<StreamBatch> {
        if frames.is_empty() {
            return Err(Error::invalid("a stream batch must contain frames"));
        }
        if frames
            .windows(2)
            .any(|w| w[1].timestamp < w[0].timestamp)
        {
            return Err(Error::invalid("batch timestamps must be non-decreasing"));
        }
        Ok(StreamBatch { index, frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Domain profiles and the registry
// ---------------------------------------------------------------------------

/// Everything the engine needs about one registered domain: its training
/// set in model space, the feature scaler that defines that space, the
/// source label prior, the checkpoint's confusion matrix, and the
/// checkpoint itself.
#[derive(Clone, Debug)]
pub struct DomainProfile<M> {
    pub id: String,
    pub train_features: Vec<Vec<f64>>,
    pub train_labels: Vec<usize>,
    pub scaler: Standardizer,
    pub source_prior: LabelDistribution,
    pub confusion: ConfusionMatrix,
    pub checkpoint: M,
}

/// Default fraction of a domain's manifest held out for the confusion
/// estimate.
pub const DEFAULT_HOLDOUT_FRACTION: f64 = 0.2;

impl<M: LightweightModel + Clone> DomainProfile<M> {
    /// Split raw features into a leading training part and a trailing
    /// holdout, fit the scaler on the training part, and estimate the
    /// checkpoint's confusion on the held-out remainder.
    pub fn build(
        id: impl Into<String>,
        raw_features: Vec<Vec<f64>>,
        labels: Vec<usize>,
        holdout_fraction: f64,
        checkpoint: M,
    ) -> Result<DomainProfile<M>> {
        if raw_features.len() != labels.len() || raw_features.is_empty() {
            return Err(Error::invalid(
                "profile needs matching, non-empty features and labels",
            ));
        }
        if holdout_fraction.is_nan() || holdout_fraction <= 0.0 || holdout_fraction >= 1.0 {
            return Err(Error::invalid("holdout fraction must be in (0, 1)"));
        }
        let n = raw_features.len();
        let holdout = ((holdout_fraction * n as f64).floor() as usize).max(1);
        if holdout >= n {
            return Err(Error::invalid(
                "holdout split leaves no training samples",
            ));
        }
        let split = n - holdout;
        let k = checkpoint.num_classes();
        if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
            return Err(Error::invalid(format!(
                "label {bad} out of range for {k} classes"
            )));
        }
        if checkpoint.input_dim() != raw_features[0].len() {
            return Err(Error::IncompatibleModel {
                expected: checkpoint.input_dim(),
                actual: raw_features[0].len(),
            });
        }

        let scaler = Standardizer::fit(&raw_features[..split])?;
        let train_features = scaler.apply_all(&raw_features[..split]);
        let holdout_features = scaler.apply_all(&raw_features[split..]);
        let train_labels = labels[..split].to_vec();
        let holdout_labels = &labels[split..];

        let source_prior = LabelDistribution::from_counts(&train_labels, k)?;
        let confusion = estimate_confusion(&checkpoint, &holdout_features, holdout_labels, k)?;

        Ok(DomainProfile {
            id: id.into(),
            train_features,
            train_labels,
            scaler,
            source_prior,
            confusion,
            checkpoint,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RegistryDomainEntry {
    id: String,
    manifest: String,
    checkpoint: String,
    #[serde(default = "default_holdout_fraction")]
    holdout_fraction: f64,
}

fn default_holdout_fraction() -> f64 {
    DEFAULT_HOLDOUT_FRACTION
}

/// On-disk registry: the list of domain profiles, an optional pre-trained
/// forest, and an optional starting domain (defaults to the first entry).
#[derive(Debug, Serialize, Deserialize)]
struct RegistryFile {
    version: u32,
    #[serde(default)]
    start: Option<String>,
    #[serde(default)]
    forest: Option<String>,
    domains: Vec<RegistryDomainEntry>,
}

pub const REGISTRY_FILE_VERSION: u32 = 1;

/// A loaded registry ready to drive an engine.
pub struct Registry {
    pub profiles: Vec<DomainProfile<BuiltinModel>>,
    pub forest: RandomForest,
    pub start: usize,
}

/// Load a registry file: per domain, extract features from its manifest,
/// build the profile around its checkpoint, and either load the referenced
/// forest or train one on the domains' raw features (AdaBoost selection of
/// the top 6 features, then `config.forest` trees).
pub fn load_registry(path: &Path, config: &EngineConfig) -> Result<Registry> {
    let file: RegistryFile = read_json_file(path)?;
    if file.version != REGISTRY_FILE_VERSION {
        return Err(Error::malformed(
            path,
            format!("unsupported registry version {}", file.version),
        ));
    }
    if file.domains.is_empty() {
        return Err(Error::malformed(path, "registry has no domains"));
    }
    let base = crate::manifest::manifest_dir(path);
    let grid = config.glcm.grid.grid();

    let mut profiles = Vec::with_capacity(file.domains.len());
    let mut all_raw: Vec<Vec<f64>> = Vec::new();
    let mut all_domains: Vec<usize> = Vec::new();
    for (index, entry) in file.domains.iter().enumerate() {
        let manifest_path = base.join(&entry.manifest);
        let records = read_manifest(&manifest_path)?;
        if records.is_empty() {
            return Err(Error::malformed(&manifest_path, "manifest is empty"));
        }
        let mut raw = Vec::with_capacity(records.len());
        let mut labels = Vec::with_capacity(records.len());
        for record in &records {
            let frame = read_frame(&resolve_frame_path(&manifest_path, record))?.into_gray();
            raw.push(extract_values(&frame, &grid, config.glcm.levels)?);
            labels.push(record.label);
        }
        all_raw.extend(raw.iter().cloned());
        all_domains.extend(std::iter::repeat_n(index, raw.len()));

        let checkpoint = load_checkpoint(&base.join(&entry.checkpoint))?;
        profiles.push(DomainProfile::build(
            entry.id.clone(),
            raw,
            labels,
            entry.holdout_fraction,
            checkpoint,
        )?);
    }

    let forest = match &file.forest {
        Some(rel) => RandomForest::load(&base.join(rel))?,
        None => {
            // A single-domain registry needs no feature selection; the
            // forest degenerates to constant leaves.
            let subset = if file.domains.len() >= 2 {
                let samples: Vec<crate::boost::WeightedSample> = all_raw
                    .iter()
                    .zip(&all_domains)
                    .map(|(row, &d)| crate::boost::WeightedSample::new(row.clone(), d))
                    .collect();
                let ensemble = crate::boost::train_adaboost(
                    &samples,
                    &crate::boost::AdaBoostConfig::default(),
                )?;
                let k = crate::boost::DEFAULT_TOP_K.min(all_raw[0].len());
                crate::boost::select_top_k(&ensemble.importance, k)?
            } else {
                (0..all_raw[0].len()).collect()
            };
            train_forest(
                &all_raw,
                &all_domains,
                &subset,
                file.domains.iter().map(|d| d.id.clone()).collect(),
                &ForestParams {
                    trees: config.forest.trees,
                    seed: config.forest.seed,
                    ..ForestParams::default()
                },
            )?
        }
    };

    let start = match &file.start {
        Some(id) => profiles
            .iter()
            .position(|p| &p.id == id)
            .ok_or_else(|| Error::UnknownDomain(id.clone()))?,
        None => 0,
    };

    Ok(Registry {
        profiles,
        forest,
        start,
    })
}

// ---------------------------------------------------------------------------
// The active-model slot
// ---------------------------------------------------------------------------

/// Shared slot holding the model that serves inference. Readers take a
/// snapshot and serve entire frames from it; `replace` swaps the slot
/// atomically, so inference running through a swap completes on the model
/// version it started with.
#[derive(Debug)]
pub struct ModelSlot<M> {
    inner: Arc<RwLock<Arc<M>>>,
}

impl<M> Clone for ModelSlot<M> {
    fn clone(&self) -> Self {
        Self {
            inner: Arc::clone(&self.inner),
        }
    }
}

impl<M> ModelSlot<M> {
    pub fn new(model: M) -> Self {
        Self {
            inner: Arc::new(RwLock::new(Arc::new(model))),
        }
    }

    pub fn snapshot(&self) -> Arc<M> {
        Arc::clone(&self.inner.read().expect("model slot poisoned"))
    }

    pub fn replace(&self, model: M) {
        *self.inner.write().expect("model slot poisoned") = Arc::new(model);
    }
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// What the engine decided for a batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Lag,
    AdaptDomain,
    AdaptLabels,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Lag => "lag",
            Decision::AdaptDomain => "adapt_domain",
            Decision::AdaptLabels => "adapt_labels",
        }
    }
}

/// Per-batch outcome record; the metrics CSV is a projection of this.
#[derive(Clone, Debug, Serialize)]
pub struct BatchReport {
    pub batch_index: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub domain_pred: String,
    pub domain_true: Option<String>,
    pub domain_changed: bool,
    /// Predicted label distribution used for this batch's decision.
    pub q: LabelDistribution,
    pub kl: Option<f64>,
    pub decision: Decision,
    pub finetune_ms: Option<f64>,
    pub top1_acc: Option<f64>,
    pub frames: usize,
    pub frames_labeled: usize,
    pub frames_correct: usize,
    pub infer_ms_p50: f64,
    pub infer_ms_p95: f64,
    /// Populated when the batch hit a fail-static error (unknown domain,
    /// failed fine-tune); the previous model kept serving.
    pub error: Option<String>,
}

// ---------------------------------------------------------------------------
// The engine
// ---------------------------------------------------------------------------

/// Live loop state: the current domain, the serving model, the reference
/// distribution P_M from the last adaptation, and the last weights used.
pub struct EngineState<M> {
    pub domain: usize,
    pub slot: ModelSlot<M>,
    pub p_m: LabelDistribution,
    pub last_weights: Option<ImportanceWeights>,
}

pub struct Engine<M: LightweightModel + Clone> {
    config: EngineConfig,
    grid: FeatureGrid,
    forest: RandomForest,
    profiles: Vec<DomainProfile<M>>,
    state: EngineState<M>,
    static_mode: bool,
    batches_processed: usize,
}

impl Engine<BuiltinModel> {
    pub fn from_registry(
        config: EngineConfig,
        registry: Registry,
        static_mode: bool,
    ) -> Result<Self> {
        Engine::new(
            config,
            registry.profiles,
            registry.forest,
            registry.start,
            static_mode,
        )
    }
}

impl<M: LightweightModel + Clone> Engine<M> {
    pub fn new(
        config: EngineConfig,
        profiles: Vec<DomainProfile<M>>,
        forest: RandomForest,
        start: usize,
        static_mode: bool,
    ) -> Result<Self> {
        config.validate()?;
        if profiles.is_empty() {
            return Err(Error::invalid("engine needs at least one domain profile"));
        }
        if start >= profiles.len() {
            return Err(Error::invalid(format!(
                "start profile {start} out of range for {} profiles",
                profiles.len()
            )));
        }
        let k = profiles[start].checkpoint.num_classes();
        if profiles
            .iter()
            .any(|p| p.checkpoint.num_classes() != k)
        {
            return Err(Error::invalid(
                "all domain checkpoints must share one class set",
            ));
        }
        let slot = ModelSlot::new(profiles[start].checkpoint.clone());
        let p_m = profiles[start].source_prior.clone();
        Ok(Self {
            grid: config.glcm.grid.grid(),
            config,
            forest,
            profiles,
            state: EngineState {
                domain: start,
                slot,
                p_m,
                last_weights: None,
            },
            static_mode,
            batches_processed: 0,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn state(&self) -> &EngineState<M> {
        &self.state
    }

    pub fn current_domain_id(&self) -> &str {
        &self.profiles[self.state.domain].id
    }

    pub fn active_model(&self) -> Arc<M> {
        self.state.slot.snapshot()
    }

    /// Replace the active model between batches. The new model must match
    /// the current one's dimensions.
    pub fn swap_model(&mut self, model: M) -> Result<()> {
        let current = self.state.slot.snapshot();
        if model.input_dim() != current.input_dim()
            || model.num_classes() != current.num_classes()
        {
            return Err(Error::IncompatibleModel {
                expected: current.input_dim(),
                actual: model.input_dim(),
            });
        }
        self.state.slot.replace(model);
        Ok(())
    }

    fn finetune_config(&self, batch_index: usize) -> FineTuneConfig {
        FineTuneConfig {
            fraction: self.config.finetune.fraction,
            iterations: self.config.finetune.iterations,
            learning_rate: self.config.finetune.learning_rate,
            seed: mix_seed(self.config.seeds.engine, batch_index as u64 + 1),
        }
    }

    fn elapsed_ms(&self, start: Instant) -> f64 {
        if self.config.deterministic_timing {
            0.0
        } else {
            start.elapsed().as_secs_f64() * 1000.0
        }
    }

    /// Run the two-phase loop on one batch and report what happened.
    pub fn process_batch(&mut self, batch: &StreamBatch) -> Result<BatchReport> {
        if batch.frames.is_empty() {
            return Err(Error::invalid("cannot process an empty batch"));
        }
        let k = self.profiles[self.state.domain].checkpoint.num_classes();
        let first_batch = self.batches_processed == 0;
        self.batches_processed += 1;

        // (a) Inference on every frame with the active model.
        let model = self.state.slot.snapshot();
        let scaler = self.profiles[self.state.domain].scaler.clone();
        let mut raw_rows = Vec::with_capacity(batch.frames.len());
        let mut predictions = Vec::with_capacity(batch.frames.len());
        let mut latencies = Vec::with_capacity(batch.frames.len());
        for stream_frame in &batch.frames {
            let started = Instant::now();
            let gray: Cow<GrayFrame> = match &stream_frame.frame {
                Frame::Gray(g) => Cow::Borrowed(g),
                Frame::Rgb(rgb) => Cow::Owned(rgb.to_grayscale()),
            };
            let raw = extract_values(&gray, &self.grid, self.config.glcm.levels)?;
            let prediction = model.predict(&scaler.apply(&raw));
            latencies.push(self.elapsed_ms(started));
            raw_rows.push(raw);
            predictions.push(prediction);
        }
        latencies.sort_by(f64::total_cmp);

        let frames_labeled = batch.frames.iter().filter(|f| f.label.is_some()).count();
        let frames_correct = batch
            .frames
            .iter()
            .zip(&predictions)
            .filter(|(f, &p)| f.label == Some(p))
            .count();
        let q_active = estimate_predicted_distribution(&predictions, k)?;

        let mut report = BatchReport {
            batch_index: batch.index,
            t_start: batch.frames.first().expect("non-empty").timestamp,
            t_end: batch.frames.last().expect("non-empty").timestamp,
            domain_pred: self.profiles[self.state.domain].id.clone(),
            domain_true: majority_domain(batch),
            domain_changed: false,
            q: q_active.clone(),
            kl: None,
            decision: Decision::Lag,
            finetune_ms: None,
            top1_acc: (frames_labeled > 0)
                .then(|| frames_correct as f64 / frames_labeled as f64),
            frames: batch.frames.len(),
            frames_labeled,
            frames_correct,
            infer_ms_p50: percentile_sorted(&latencies, 50.0),
            infer_ms_p95: percentile_sorted(&latencies, 95.0),
            error: None,
        };

        if self.static_mode {
            return Ok(report);
        }

        // (b) Domain detection on the trailing frames.
        let decision = self
            .forest
            .detect_domain_from_features(&raw_rows, self.config.domain_check_frames)?;
        let detected_label = self.forest.domain_labels()[decision.domain].clone();
        report.domain_pred = detected_label.clone();

        if detected_label != self.profiles[self.state.domain].id {
            report.domain_changed = true;
            let Some(target) = self.profiles.iter().position(|p| p.id == detected_label)
            else {
                report.error = Some(Error::UnknownDomain(detected_label).to_string());
                return Ok(report);
            };
            report.decision = Decision::AdaptDomain;

            // Estimate the batch's label distribution with the profile's
            // own checkpoint: the confusion matrix being inverted is that
            // checkpoint's.
            let profile = &self.profiles[target];
            let h0_predictions: Vec<usize> = raw_rows
                .iter()
                .map(|raw| profile.checkpoint.predict(&profile.scaler.apply(raw)))
                .collect();
            let q_h0 = estimate_predicted_distribution(&h0_predictions, k)?;
            report.q = q_h0.clone();

            match compute_importance_weights(&profile.confusion, &q_h0, DEFAULT_WEIGHT_CAP) {
                Ok(weights) => {
                    let started = Instant::now();
                    match fine_tune(
                        &profile.checkpoint,
                        &profile.train_features,
                        &profile.train_labels,
                        &weights,
                        &self.finetune_config(batch.index),
                    ) {
                        Ok(adapted) => {
                            report.finetune_ms = Some(self.elapsed_ms(started));
                            self.state.slot.replace(adapted);
                            self.state.domain = target;
                            self.state.p_m = q_h0;
                            self.state.last_weights = Some(weights);
                        }
                        Err(e) => report.error = Some(e.to_string()),
                    }
                }
                Err(e) => report.error = Some(e.to_string()),
            }
            return Ok(report);
        }

        // (c) Label-shift gate within the same domain.
        if first_batch && self.config.pm_init == PmInit::FirstBatch {
            self.state.p_m = q_active.clone();
        }
        let d = kl_divergence(&q_active, &self.state.p_m);
        report.kl = Some(d);
        if shift_gate(d, self.config.kl_threshold) == ShiftDecision::Lag {
            return Ok(report);
        }

        report.decision = Decision::AdaptLabels;
        let profile = &self.profiles[self.state.domain];
        match compute_importance_weights(&profile.confusion, &q_active, DEFAULT_WEIGHT_CAP) {
            Ok(weights) => {
                let started = Instant::now();
                match fine_tune(
                    model.as_ref(),
                    &profile.train_features,
                    &profile.train_labels,
                    &weights,
                    &self.finetune_config(batch.index),
                ) {
                    Ok(adapted) => {
                        report.finetune_ms = Some(self.elapsed_ms(started));
                        self.state.slot.replace(adapted);
                        self.state.p_m = q_active;
                        self.state.last_weights = Some(weights);
                    }
                    Err(e) => report.error = Some(e.to_string()),
                }
            }
            Err(e) => report.error = Some(e.to_string()),
        }
        Ok(report)
    }
}

/// Most frequent ground-truth domain of the batch, ties to the
/// lexicographically smallest name.
fn majority_domain(batch: &StreamBatch) -> Option<String> {
    let mut counts: std::collections::BTreeMap<&str, usize> = std::collections::BTreeMap::new();
    for frame in &batch.frames {
        if let Some(d) = &frame.domain {
            *counts.entry(d).or_insert(0) += 1;
        }
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(a.0)))
        .map(|(name, _)| name.to_string())
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Default)]
pub struct ReplayOptions {
    /// Disable all adaptation: the starting checkpoint serves every batch.
    pub static_mode: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReplaySummary {
    pub batches: usize,
    pub adapt_domain: usize,
    pub adapt_labels: usize,
    pub lag: usize,
    pub mean_top1: Option<f64>,
    pub config_echo: serde_json::Value,
}

pub struct ReplayOutcome {
    pub reports: Vec<BatchReport>,
    pub summary: ReplaySummary,
}

/// Partition the stream manifest into consecutive batches and fold the
/// engine over them.
pub fn run_replay(
    stream_manifest: &Path,
    config: &EngineConfig,
    registry_path: &Path,
    options: ReplayOptions,
) -> Result<ReplayOutcome> {
    config.validate()?;
    let registry = load_registry(registry_path, config)?;
    let engine = Engine::from_registry(config.clone(), registry, options.static_mode)?;
    let records = read_manifest(stream_manifest)?;
    let strided: Vec<&ManifestRecord> = records.iter().step_by(config.stride).collect();
    if strided.is_empty() {
        return Err(Error::malformed(stream_manifest, "stream manifest is empty"));
    }
    if strided
        .windows(2)
        .any(|w| w[1].timestamp < w[0].timestamp)
    {
        return Err(Error::malformed(
            stream_manifest,
            "stream timestamps must be non-decreasing",
        ));
    }
    run_replay_records(engine, stream_manifest, &strided, config, options)
}

fn run_replay_records<M: LightweightModel + Clone>(
    mut engine: Engine<M>,
    stream_manifest: &Path,
    records: &[&ManifestRecord],
    config: &EngineConfig,
    options: ReplayOptions,
) -> Result<ReplayOutcome> {
    let mut reports = Vec::new();
    for (index, chunk) in records.chunks(config.batch_size).enumerate() {
        let mut frames = Vec::with_capacity(chunk.len());
        for record in chunk {
            let frame = read_frame(&resolve_frame_path(stream_manifest, record))?;
            frames.push(StreamFrame {
                frame,
                timestamp: record.timestamp,
                label: Some(record.label),
                domain: record.domain.clone(),
            });
        }
        let batch = StreamBatch::new(index, frames)?;
        reports.push(engine.process_batch(&batch)?);
    }
    let summary = summarize(&reports, config, options);
    Ok(ReplayOutcome { reports, summary })
}

fn summarize(
    reports: &[BatchReport],
    config: &EngineConfig,
    options: ReplayOptions,
) -> ReplaySummary {
    let mut counts = (0usize, 0usize, 0usize); // domain, labels, lag
    let mut labeled = 0usize;
    let mut correct = 0usize;
    for report in reports {
        match report.decision {
            Decision::AdaptDomain => counts.0 += 1,
            Decision::AdaptLabels => counts.1 += 1,
            Decision::Lag => counts.2 += 1,
        }
        labeled += report.frames_labeled;
        correct += report.frames_correct;
    }
    let mut config_echo = serde_json::to_value(config).expect("config serializes");
    config_echo
        .as_object_mut()
        .expect("config is an object")
        .insert("static_mode".to_string(), options.static_mode.into());
    ReplaySummary {
        batches: reports.len(),
        adapt_domain: counts.0,
        adapt_labels: counts.1,
        lag: counts.2,
        mean_top1: (labeled > 0).then(|| correct as f64 / labeled as f64),
        config_echo,
    }
}

/// Metrics CSV header, in the exact column order of [`write_metrics_csv`].
pub const METRICS_CSV_HEADER: &str = "batch_index,t_start,t_end,domain_pred,domain_true,\
domain_changed,kl,decision,finetune_ms,top1_acc,frames,infer_ms_p50,infer_ms_p95";

pub fn metrics_csv(reports: &[BatchReport]) -> String {
    let mut out = String::from(METRICS_CSV_HEADER);
    out.push('\n');
    for r in reports {
        let opt = |v: Option<f64>, digits: usize| match v {
            Some(x) => format!("{x:.digits$}"),
            None => String::new(),
        };
        out.push_str(&format!(
            "{},{:.3},{:.3},{},{},{},{},{},{},{},{},{:.3},{:.3}\n",
            r.batch_index,
            r.t_start,
            r.t_end,
            r.domain_pred,
            r.domain_true.as_deref().unwrap_or(""),
            r.domain_changed,
            opt(r.kl, 6),
            r.decision.as_str(),
            opt(r.finetune_ms, 3),
            opt(r.top1_acc, 4),
            r.frames,
            r.infer_ms_p50,
            r.infer_ms_p95,
        ));
    }
    out
}

pub fn write_metrics_csv(reports: &[BatchReport], path: &Path) -> Result<()> {
    std::fs::write(path, metrics_csv(reports)).map_err(|e| Error::io(path, e))
}

pub fn write_summary(summary: &ReplaySummary, path: &Path) -> Result<()> {
    write_json_file(summary, path)
}
