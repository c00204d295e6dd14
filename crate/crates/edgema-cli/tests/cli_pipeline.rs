//! The full command pipeline end to end: synth -> features extract ->
//! select -> domain train/eval -> model train -> replay, plus error exits.

use std::path::Path;
use std::process::Command;

use edgema::forest::RandomForest;

fn edgema_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_edgema"))
}

fn run_ok(args: &[&dyn AsRef<std::ffi::OsStr>]) -> String {
    let mut cmd = edgema_bin();
    for a in args {
        cmd.arg(a.as_ref());
    }
    let output = cmd.output().expect("spawn edgema");
    assert!(
        output.status.success(),
        "command failed: {}\nstderr: {}",
        args.iter()
            .map(|a| a.as_ref().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join(" "),
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn write_spec(path: &Path, seed: u64) {
    let spec = serde_json::json!({
        "width": 48,
        "height": 48,
        "domains": [
            {"name": "day", "gain": 1.0, "noise_sigma": 2.0, "gamma": 1.0},
            {"name": "night", "gain": 0.35, "noise_sigma": 12.0, "gamma": 2.0},
        ],
        "classes": [
            {"kind": "stripes", "period": 8.0},
            {"kind": "checker", "size": 6},
        ],
        "frames_per_segment": 80,
        "schedule": [
            {"domain": 0, "class_mix": [0.5, 0.5]},
            {"domain": 1, "class_mix": [0.5, 0.5]},
        ],
        "seed": seed,
    });
    std::fs::write(path, serde_json::to_string_pretty(&spec).unwrap()).unwrap();
}

#[test]
fn pipeline_from_synth_to_forest_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("spec.json");
    write_spec(&spec_path, 5);

    let frames_dir = dir.path().join("frames");
    let out = run_ok(&[&"synth", &"--spec", &spec_path, &"--out", &frames_dir]);
    assert!(out.contains("160 frames"), "stdout: {out}");
    let manifest = frames_dir.join("manifest.jsonl");

    let feats = dir.path().join("feats.json");
    let out = run_ok(&[
        &"features",
        &"extract",
        &"--manifest",
        &manifest,
        &"--grid",
        &"reduced",
        &"--levels",
        &"32",
        &"--out",
        &feats,
    ]);
    assert!(out.contains("48 features"), "stdout: {out}");
    let set = edgema::dataset::FeatureSet::load(&feats).unwrap();
    assert!(set.records.iter().all(|r| r.values.len() == 48));

    let subset = dir.path().join("subset.json");
    run_ok(&[
        &"select",
        &"--features",
        &feats,
        &"--rounds",
        &"40",
        &"--top-k",
        &"6",
        &"--out",
        &subset,
    ]);
    let selection = edgema::boost::SelectionFile::load(&subset).unwrap();
    assert_eq!(selection.selected.len(), 6);
    assert_eq!(selection.scores.len(), 48);

    let forest_path = dir.path().join("forest.json");
    run_ok(&[
        &"domain",
        &"train",
        &"--features",
        &feats,
        &"--subset",
        &subset,
        &"--trees",
        &"16",
        &"--seed",
        &"9",
        &"--out",
        &forest_path,
    ]);

    // Reloading the forest gives identical predictions on a fixed set.
    let forest = RandomForest::load(&forest_path).unwrap();
    let reloaded = RandomForest::load(&forest_path).unwrap();
    for record in &set.records {
        assert_eq!(
            forest.predict(&record.values).unwrap(),
            reloaded.predict(&record.values).unwrap()
        );
    }

    // Eval on a freshly generated set from another seed.
    let spec2 = dir.path().join("spec2.json");
    write_spec(&spec2, 6);
    let test_dir = dir.path().join("test-frames");
    run_ok(&[&"synth", &"--spec", &spec2, &"--out", &test_dir]);
    let out = run_ok(&[
        &"domain",
        &"eval",
        &"--forest",
        &forest_path,
        &"--manifest",
        &test_dir.join("manifest.jsonl"),
    ]);
    assert!(out.starts_with("accuracy "), "stdout: {out}");
    let accuracy: f64 = out
        .split_whitespace()
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!(accuracy > 0.9, "detector accuracy {accuracy}");
}

#[test]
fn model_train_writes_loadable_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("spec.json");
    write_spec(&spec_path, 8);
    let frames_dir = dir.path().join("frames");
    run_ok(&[&"synth", &"--spec", &spec_path, &"--out", &frames_dir]);

    let ckpt = dir.path().join("ckpt.json");
    let out = run_ok(&[
        &"model",
        &"train",
        &"--manifest",
        &frames_dir.join("manifest.jsonl"),
        &"--out",
        &ckpt,
    ]);
    assert!(out.contains("trained softmax"), "stdout: {out}");
    let model = edgema::model::load_checkpoint(&ckpt).unwrap();
    assert_eq!(edgema::model::LightweightModel::input_dim(&model), 48);
    assert_eq!(edgema::model::LightweightModel::num_classes(&model), 2);
}

#[test]
fn errors_exit_nonzero_with_one_line_diagnostic() {
    let output = edgema_bin()
        .args(["features", "extract", "--manifest", "/nonexistent/m.jsonl", "--out", "/tmp/x.json"])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.starts_with("error: "), "stderr: {stderr}");
    assert_eq!(stderr.trim_end().lines().count(), 1, "stderr: {stderr}");

    // Malformed manifests carry their line number.
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("bad.jsonl");
    std::fs::write(&manifest, "{\"path\":\"a.pgm\",\"label\":0,\"timestamp\":0.0}\nnot json\n")
        .unwrap();
    let output = edgema_bin()
        .args(["features", "extract"])
        .arg("--manifest")
        .arg(&manifest)
        .arg("--out")
        .arg(dir.path().join("x.json"))
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains(":2:"), "stderr should name line 2: {stderr}");
}

#[test]
fn seed_env_var_overrides_config_seeds() {
    // Indirect check through the config echo: EDGEMA_SEED must land in
    // both seeds.engine and forest.seed.
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("spec.json");
    write_spec(&spec_path, 21);
    let frames_dir = dir.path().join("frames");
    run_ok(&[&"synth", &"--spec", &spec_path, &"--out", &frames_dir]);

    // One-domain registry over the same frames.
    let ckpt = dir.path().join("ckpt.json");
    run_ok(&[
        &"model",
        &"train",
        &"--manifest",
        &frames_dir.join("manifest.jsonl"),
        &"--out",
        &ckpt,
    ]);
    // Use a day-only manifest so one profile covers the stream.
    let day_spec = dir.path().join("day.json");
    let mut spec: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&spec_path).unwrap()).unwrap();
    spec["schedule"] = serde_json::json!([{"domain": 0, "class_mix": [0.5, 0.5]}]);
    std::fs::write(&day_spec, serde_json::to_string(&spec).unwrap()).unwrap();
    let day_dir = dir.path().join("day-frames");
    run_ok(&[&"synth", &"--spec", &day_spec, &"--out", &day_dir]);
    let day_ckpt = dir.path().join("day.ckpt.json");
    run_ok(&[
        &"model",
        &"train",
        &"--manifest",
        &day_dir.join("manifest.jsonl"),
        &"--out",
        &day_ckpt,
    ]);

    let registry = dir.path().join("registry.json");
    std::fs::write(
        &registry,
        serde_json::to_string_pretty(&serde_json::json!({
            "version": 1,
            "domains": [{
                "id": "day",
                "manifest": "day-frames/manifest.jsonl",
                "checkpoint": "day.ckpt.json",
            }],
        }))
        .unwrap(),
    )
    .unwrap();
    let config = dir.path().join("config.json");
    edgema::engine::EngineConfig {
        batch_size: 40,
        ..Default::default()
    }
    .save(&config)
    .unwrap();

    let summary_path = dir.path().join("summary.json");
    let output = edgema_bin()
        .env("EDGEMA_SEED", "4242")
        .arg("replay")
        .arg("--stream")
        .arg(day_dir.join("manifest.jsonl"))
        .arg("--config")
        .arg(&config)
        .arg("--registry")
        .arg(&registry)
        .arg("--out")
        .arg(dir.path().join("m.csv"))
        .arg("--summary")
        .arg(&summary_path)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&summary_path).unwrap()).unwrap();
    assert_eq!(summary["config_echo"]["seeds"]["engine"], 4242);
    assert_eq!(summary["config_echo"]["forest"]["seed"], 4242);
    assert_eq!(summary["config_echo"]["static_mode"], false);
}
