//! Shared fixtures: a four-domain synthetic world (day/dusk/night/rain over
//! stripes/checker/blobs textures) and helpers to train its per-domain
//! checkpoints and registry files.

// Each test binary compiles this module separately and uses its own slice.
#![allow(dead_code)]

use std::path::Path;

use edgema::dataset::FeatureSet;
use edgema::features::{GridKind, Standardizer};
use edgema::model::{save_checkpoint, train_softmax, BuiltinModel};
use edgema::synth::{synth_generate, DomainSpec, SegmentSpec, SynthSpec, TextureClass};

pub const DOMAIN_NAMES: [&str; 4] = ["day", "dusk", "night", "rain"];

pub fn domains() -> Vec<DomainSpec> {
    vec![
        DomainSpec {
            name: Some("day".into()),
            gain: 1.0,
            noise_sigma: 2.0,
            gamma: 1.0,
        },
        DomainSpec {
            name: Some("dusk".into()),
            gain: 0.6,
            noise_sigma: 6.0,
            gamma: 1.4,
        },
        DomainSpec {
            name: Some("night".into()),
            gain: 0.35,
            noise_sigma: 12.0,
            gamma: 2.0,
        },
        DomainSpec {
            name: Some("rain".into()),
            gain: 0.85,
            noise_sigma: 22.0,
            gamma: 0.8,
        },
    ]
}

pub fn classes() -> Vec<TextureClass> {
    vec![
        TextureClass::Stripes { period: 8.0 },
        TextureClass::Checker { size: 6 },
        TextureClass::Blobs { density: 0.03 },
    ]
}

/// One balanced segment per domain.
pub fn balanced_spec(seed: u64, frames_per_domain: usize) -> SynthSpec {
    SynthSpec {
        width: 64,
        height: 64,
        fps: 25.0,
        domains: domains(),
        classes: classes(),
        frames_per_segment: frames_per_domain,
        schedule: (0..4)
            .map(|d| SegmentSpec {
                domain: d,
                class_mix: vec![1.0 / 3.0; 3],
                frames: None,
            })
            .collect(),
        seed,
    }
}

/// Eight segments: four domain transitions, each followed by a label-mix
/// shift inside the domain.
pub fn drifting_spec(seed: u64, frames_per_segment: usize) -> SynthSpec {
    let mixes: [(usize, [f64; 3]); 8] = [
        (0, [0.70, 0.20, 0.10]),
        (0, [0.10, 0.20, 0.70]),
        (1, [0.60, 0.30, 0.10]),
        (1, [0.10, 0.60, 0.30]),
        (2, [0.50, 0.25, 0.25]),
        (2, [0.05, 0.15, 0.80]),
        (3, [0.30, 0.40, 0.30]),
        (3, [0.80, 0.10, 0.10]),
    ];
    SynthSpec {
        width: 64,
        height: 64,
        fps: 25.0,
        domains: domains(),
        classes: classes(),
        frames_per_segment,
        schedule: mixes
            .iter()
            .map(|&(d, mix)| SegmentSpec {
                domain: d,
                class_mix: mix.to_vec(),
                frames: None,
            })
            .collect(),
        seed,
    }
}

/// Generate one domain's training manifest under `root/train_d{d}` and
/// train its softmax checkpoint on the leading (1 - holdout) split,
/// standardized the same way the engine's profile will.
pub fn build_domain_checkpoint(root: &Path, d: usize, seed: u64, frames: usize) -> String {
    let train_dir = root.join(format!("train_d{d}"));
    let spec = SynthSpec {
        schedule: vec![SegmentSpec {
            domain: d,
            class_mix: vec![1.0 / 3.0; 3],
            frames: Some(frames),
        }],
        ..balanced_spec(seed, frames)
    };
    synth_generate(&spec, &train_dir).unwrap();
    let set = FeatureSet::extract_from_manifest(
        &train_dir.join("manifest.jsonl"),
        GridKind::Reduced,
        32,
    )
    .unwrap();
    let rows = set.feature_rows();
    let labels = set.labels();
    let n = rows.len();
    let split = n - ((0.2 * n as f64).floor() as usize).max(1);
    let scaler = Standardizer::fit(&rows[..split]).unwrap();
    let scaled = scaler.apply_all(&rows[..split]);
    let model = train_softmax(&scaled, &labels[..split], 3, 300, 0.1).unwrap();
    let ckpt = format!("d{d}.ckpt.json");
    save_checkpoint(&BuiltinModel::Softmax(model), &root.join(&ckpt)).unwrap();
    ckpt
}

/// Write a registry covering all four domains, starting at "day".
pub fn build_registry(root: &Path, seed: u64, frames_per_domain: usize) -> std::path::PathBuf {
    let mut entries = Vec::new();
    for (d, name) in DOMAIN_NAMES.iter().enumerate() {
        let ckpt = build_domain_checkpoint(root, d, seed.wrapping_add(d as u64 * 17), frames_per_domain);
        entries.push(serde_json::json!({
            "id": name,
            "manifest": format!("train_d{d}/manifest.jsonl"),
            "checkpoint": ckpt,
            "holdout_fraction": 0.2,
        }));
    }
    let registry_path = root.join("registry.json");
    std::fs::write(
        &registry_path,
        serde_json::to_string_pretty(&serde_json::json!({
            "version": 1,
            "start": "day",
            "domains": entries,
        }))
        .unwrap(),
    )
    .unwrap();
    registry_path
}
