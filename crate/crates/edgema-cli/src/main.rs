//! Command-line surface: synthetic stream generation, feature extraction,
//! feature selection, domain-classifier training and evaluation, model
//! training, and the replay simulator.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use edgema::boost::{select_top_k, train_adaboost, AdaBoostConfig, SelectionFile, WeightedSample};
use edgema::dataset::FeatureSet;
use edgema::engine::{
    run_replay, write_metrics_csv, write_summary, EngineConfig, ReplayOptions,
};
use edgema::features::GridKind;
use edgema::forest::{evaluate_forest, train_forest, ForestParams, RandomForest};
use edgema::model::{save_checkpoint, train_softmax, BuiltinModel};
use edgema::synth::{synth_generate, SynthSpec};

/// Environment variable overriding the replay config's seeds (both
/// `seeds.engine` and `forest.seed`), for CI reproducibility.
const SEED_ENV_VAR: &str = "EDGEMA_SEED";

#[derive(Parser)]
#[command(
    name = "edgema",
    version,
    about = "Drift-adaptive streaming inference: dataset tools and replay simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-domain frame stream from a spec file.
    Synth {
        /// Synthesis spec (JSON).
        #[arg(long)]
        spec: PathBuf,
        /// Output directory for frames and manifest.jsonl.
        #[arg(long)]
        out: PathBuf,
    },
    /// Feature operations.
    #[command(subcommand)]
    Features(FeaturesCommand),
    /// Score features with AdaBoost and select the top-k subset.
    Select {
        /// Extracted features (JSON, from `features extract`).
        #[arg(long)]
        features: PathBuf,
        /// Boosting rounds.
        #[arg(long, default_value_t = 100)]
        rounds: usize,
        /// Size of the selected subset.
        #[arg(long = "top-k", default_value_t = 6)]
        top_k: usize,
        /// Output selection file (JSON).
        #[arg(long)]
        out: PathBuf,
    },
    /// Domain-classifier operations.
    #[command(subcommand)]
    Domain(DomainCommand),
    /// Model operations.
    #[command(subcommand)]
    Model(ModelCommand),
    /// Replay a frame stream through the adaptive engine.
    Replay(ReplayArgs),
}

#[derive(Subcommand)]
enum FeaturesCommand {
    /// Extract texture features for every frame of a manifest.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        /// Offset grid: `full` (720 features) or `reduced` (48).
        #[arg(long, value_enum, default_value_t = GridArg::Reduced)]
        grid: GridArg,
        /// Gray-level quantization.
        #[arg(long, default_value_t = 32)]
        levels: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum DomainCommand {
    /// Train the random-forest domain classifier on selected features.
    Train {
        /// Extracted features (JSON) with domain tags.
        #[arg(long)]
        features: PathBuf,
        /// Selection file from `select`.
        #[arg(long)]
        subset: PathBuf,
        #[arg(long, default_value_t = 32)]
        trees: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a trained forest on a labeled manifest.
    Eval {
        #[arg(long)]
        forest: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value_t = GridArg::Reduced)]
        grid: GridArg,
        #[arg(long, default_value_t = 32)]
        levels: usize,
    },
}

#[derive(Subcommand)]
enum ModelCommand {
    /// Train the built-in softmax classifier on a manifest's texture
    /// features and write a checkpoint.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = GridArg::Reduced)]
        grid: GridArg,
        #[arg(long, default_value_t = 32)]
        levels: usize,
        /// Trailing fraction of the manifest reserved for confusion
        /// estimation; training uses the leading remainder.
        #[arg(long, default_value_t = 0.2)]
        holdout: f64,
        #[arg(long, default_value_t = 300)]
        iters: usize,
        #[arg(long, default_value_t = 0.1)]
        lr: f64,
    },
}

#[derive(Args)]
struct ReplayArgs {
    /// Stream manifest (JSONL).
    #[arg(long)]
    stream: PathBuf,
    /// Engine config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Domain registry (JSON).
    #[arg(long)]
    registry: PathBuf,
    /// Metrics CSV output.
    #[arg(long)]
    out: PathBuf,
    /// Summary JSON output.
    #[arg(long)]
    summary: PathBuf,
    /// Disable all adaptation (baseline mode).
    #[arg(long = "static")]
    static_mode: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum GridArg {
    Full,
    Reduced,
}

impl From<GridArg> for GridKind {
    fn from(arg: GridArg) -> GridKind {
        match arg {
            GridArg::Full => GridKind::Full,
            GridArg::Reduced => GridKind::Reduced,
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Synth { spec, out } => {
            let spec = SynthSpec::load(&spec)?;
            let records = synth_generate(&spec, &out)?;
            println!(
                "wrote {} frames to {} (manifest.jsonl included)",
                records.len(),
                out.display()
            );
        }
        Command::Features(FeaturesCommand::Extract {
            manifest,
            grid,
            levels,
            out,
        }) => {
            let set = FeatureSet::extract_from_manifest(&manifest, grid.into(), levels)?;
            set.save(&out)?;
            println!(
                "extracted {} features for {} frames -> {}",
                set.descriptors.len(),
                set.records.len(),
                out.display()
            );
        }
        Command::Select {
            features,
            rounds,
            top_k,
            out,
        } => {
            let set = FeatureSet::load(&features)?;
            let (domains, domain_indices) = set
                .domain_classes()
                .context("feature records need domain tags for selection")?;
            let samples: Vec<WeightedSample> = set
                .records
                .iter()
                .zip(&domain_indices)
                .map(|(r, &d)| WeightedSample::new(r.values.clone(), d))
                .collect();
            let ensemble = train_adaboost(
                &samples,
                &AdaBoostConfig {
                    rounds,
                    ..AdaBoostConfig::default()
                },
            )?;
            let selected = select_top_k(&ensemble.importance, top_k)?;
            SelectionFile::new(&ensemble.importance, selected.clone()).save(&out)?;
            println!(
                "scored {} features over {} domains; selected {:?} -> {}",
                set.descriptors.len(),
                domains.len(),
                selected,
                out.display()
            );
        }
        Command::Domain(DomainCommand::Train {
            features,
            subset,
            trees,
            seed,
            out,
        }) => {
            let set = FeatureSet::load(&features)?;
            let selection = SelectionFile::load(&subset)?;
            let (domains, domain_indices) = set
                .domain_classes()
                .context("feature records need domain tags for forest training")?;
            let rows = set.feature_rows();
            let forest = train_forest(
                &rows,
                &domain_indices,
                &selection.selected,
                domains,
                &ForestParams {
                    trees,
                    seed,
                    ..ForestParams::default()
                },
            )?;
            forest.save(&out)?;
            println!(
                "trained {trees} trees on {} samples -> {}",
                rows.len(),
                out.display()
            );
        }
        Command::Domain(DomainCommand::Eval {
            forest,
            manifest,
            grid,
            levels,
        }) => {
            let forest = RandomForest::load(&forest)?;
            let set = FeatureSet::extract_from_manifest(&manifest, grid.into(), levels)?;
            let (domains, domain_indices) = set
                .domain_classes()
                .context("evaluation manifest needs domain tags")?;
            for name in &domains {
                if !forest.domain_labels().contains(name) {
                    bail!("domain {name:?} is not known to the forest");
                }
            }
            // Map manifest domain indices onto the forest's label order.
            let mapped: Vec<usize> = domain_indices
                .iter()
                .map(|&d| {
                    forest
                        .domain_labels()
                        .iter()
                        .position(|n| n == &domains[d])
                        .expect("checked above")
                })
                .collect();
            let rows = set.feature_rows();
            let accuracy = evaluate_forest(&forest, &rows, &mapped)?;
            let correct = (accuracy * rows.len() as f64).round() as usize;
            println!("accuracy {accuracy:.4} ({correct}/{})", rows.len());
        }
        Command::Model(ModelCommand::Train {
            manifest,
            out,
            grid,
            levels,
            holdout,
            iters,
            lr,
        }) => {
            if !(holdout > 0.0 && holdout < 1.0) {
                bail!("--holdout must be in (0, 1)");
            }
            let set = FeatureSet::extract_from_manifest(&manifest, grid.into(), levels)?;
            let rows = set.feature_rows();
            let labels = set.labels();
            let classes = 1 + labels.iter().copied().max().unwrap_or(0);
            if classes < 2 {
                bail!("model training needs at least two classes");
            }
            // Train on the leading split only; the trailing holdout stays
            // clean for the registry's confusion estimate.
            let n = rows.len();
            let holdout_len = ((holdout * n as f64).floor() as usize).max(1);
            if holdout_len >= n {
                bail!("holdout split leaves no training samples");
            }
            let split = n - holdout_len;
            let scaler = edgema::features::Standardizer::fit(&rows[..split])?;
            let scaled = scaler.apply_all(&rows[..split]);
            let model = train_softmax(&scaled, &labels[..split], classes, iters, lr)?;
            let train_acc = {
                let correct = scaled
                    .iter()
                    .zip(&labels[..split])
                    .filter(|(row, &y)| {
                        edgema::model::LightweightModel::predict(&model, row) == y
                    })
                    .count();
                correct as f64 / split as f64
            };
            save_checkpoint(&BuiltinModel::Softmax(model), &out)?;
            println!(
                "trained softmax on {split} frames ({classes} classes), train accuracy {train_acc:.4} -> {}",
                out.display()
            );
        }
        Command::Replay(args) => {
            let mut config = EngineConfig::load(&args.config)?;
            if let Ok(seed_text) = std::env::var(SEED_ENV_VAR) {
                let seed: u64 = seed_text
                    .parse()
                    .with_context(|| format!("{SEED_ENV_VAR} must be an unsigned integer"))?;
                config.seeds.engine = seed;
                config.forest.seed = seed;
            }
            let outcome = run_replay(
                &args.stream,
                &config,
                &args.registry,
                ReplayOptions {
                    static_mode: args.static_mode,
                },
            )?;
            write_metrics_csv(&outcome.reports, &args.out)?;
            write_summary(&outcome.summary, &args.summary)?;
            let s = &outcome.summary;
            println!(
                "replayed {} batches: {} adapt_domain, {} adapt_labels, {} lag, mean top-1 {}",
                s.batches,
                s.adapt_domain,
                s.adapt_labels,
                s.lag,
                s.mean_top1
                    .map(|a| format!("{a:.4}"))
                    .unwrap_or_else(|| "n/a".to_string()),
            );
        }
    }
    Ok(())
}
