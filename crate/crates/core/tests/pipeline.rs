//! Training and evaluation plumbing on small synthetic corpora.

use std::path::Path;

use sasn::numerics::{init_parameters, rng_from_seed};
use sasn::trainer::{
    assemble_batch, evaluate, synth_dataset, train, train_step, FeaturePool, Manifest,
    ManifestEntry, TrainConfig,
};

fn tiny_config() -> TrainConfig {
    TrainConfig {
        speakers_per_batch: 2,
        utterances_per_speaker: 2,
        crop_frames: 30,
        d_a: 8,
        d_r: 2,
        steps: 3,
        ..TrainConfig::default()
    }
}

fn tiny_corpus(dir: &Path, speakers: usize, utts: usize) -> Manifest {
    synth_dataset(dir, speakers, utts, 0.5, &mut rng_from_seed(11)).unwrap();
    Manifest::load(dir.join("manifest.jsonl")).unwrap()
}

#[test]
fn zero_learning_rate_leaves_parameters_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let pool = FeaturePool::from_manifest(&tiny_corpus(dir.path(), 2, 2)).unwrap();
    let cfg = TrainConfig {
        lr: 0.0,
        ..tiny_config()
    };
    let mut rng = rng_from_seed(3);
    let mut params = init_parameters(cfg.d_a, cfg.d_r, &mut rng).unwrap();
    let before = params.clone();
    let batch = assemble_batch(&pool, &cfg, &mut rng).unwrap();
    let loss = train_step(&batch.crops, &mut params, &cfg).unwrap();
    assert!(loss.is_finite() && loss > 0.0);
    for ((_, a), (_, b)) in params.iter().zip(before.iter()) {
        assert!(a
            .iter()
            .zip(b.iter())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

#[test]
fn training_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let pool = FeaturePool::from_manifest(&tiny_corpus(dir.path(), 3, 3)).unwrap();
    let a = train(&pool, &tiny_config()).unwrap();
    let b = train(&pool, &tiny_config()).unwrap();
    assert_eq!(a.losses, b.losses);
    assert_eq!(a.params, b.params);
    let c = train(
        &pool,
        &TrainConfig {
            seed: 2,
            ..tiny_config()
        },
    )
    .unwrap();
    assert_ne!(a.losses, c.losses);
}

#[test]
fn too_few_speakers_for_batch() {
    let dir = tempfile::tempdir().unwrap();
    let pool = FeaturePool::from_manifest(&tiny_corpus(dir.path(), 2, 2)).unwrap();
    let cfg = TrainConfig {
        speakers_per_batch: 3,
        ..tiny_config()
    };
    assert!(train(&pool, &cfg).is_err());
}

#[test]
fn two_by_two_evaluation_counts() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = tiny_corpus(dir.path(), 2, 2);
    let params = init_parameters(8, 2, &mut rng_from_seed(0)).unwrap();
    let eval = evaluate(&manifest, &params, Default::default()).unwrap();
    assert_eq!(eval.scores.target.len(), 2);
    assert_eq!(eval.scores.impostor.len(), 2);
    assert_eq!(eval.speakers, vec!["spk000", "spk001"]);
}

#[test]
fn identical_audio_scores_at_scale_plus_bias() {
    let dir = tempfile::tempdir().unwrap();
    tiny_corpus(dir.path(), 2, 3);
    // every utterance of spk000 becomes a copy of its first one
    let src = dir.path().join("spk000/utt000.wav");
    for u in 1..3 {
        std::fs::copy(&src, dir.path().join(format!("spk000/utt{u:03}.wav"))).unwrap();
    }
    let manifest = Manifest::load(dir.path().join("manifest.jsonl")).unwrap();
    let params = init_parameters(8, 2, &mut rng_from_seed(0)).unwrap();
    let eval = evaluate(&manifest, &params, Default::default()).unwrap();
    let expected = params.sim_w() + params.sim_b();
    // spk000 has 2 test utterances (first of 3 enrolls)
    let spk0_targets = &eval.scores.target[..2];
    for s in spk0_targets {
        assert!((s - expected).abs() < 1e-12, "{s} vs {expected}");
    }
}

#[test]
fn evaluation_skips_singletons_and_needs_two_speakers() {
    let dir = tempfile::tempdir().unwrap();
    tiny_corpus(dir.path(), 3, 2);
    let base = dir.path();
    let entry = |spk: &str, utt: &str| ManifestEntry {
        speaker: spk.into(),
        path: base.join(spk).join(utt),
    };
    let params = init_parameters(8, 2, &mut rng_from_seed(0)).unwrap();
    let three = Manifest::new(vec![
        entry("spk000", "utt000.wav"),
        entry("spk000", "utt001.wav"),
        entry("spk001", "utt000.wav"),
        entry("spk001", "utt001.wav"),
        entry("spk002", "utt000.wav"),
    ])
    .unwrap();
    let eval = evaluate(&three, &params, Default::default()).unwrap();
    assert_eq!(eval.speakers.len(), 2);

    let one = Manifest::new(vec![
        entry("spk000", "utt000.wav"),
        entry("spk000", "utt001.wav"),
        entry("spk001", "utt000.wav"),
    ])
    .unwrap();
    assert!(evaluate(&one, &params, Default::default()).is_err());
}

#[test]
fn synthetic_corpus_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    tiny_corpus(a.path(), 2, 2);
    tiny_corpus(b.path(), 2, 2);
    for rel in [
        "spk000/utt000.wav",
        "spk001/utt001.wav",
        "manifest.jsonl",
        "train.jsonl",
        "heldout.jsonl",
    ] {
        assert_eq!(
            std::fs::read(a.path().join(rel)).unwrap(),
            std::fs::read(b.path().join(rel)).unwrap(),
            "{rel}"
        );
    }
    let text = std::fs::read_to_string(a.path().join("manifest.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.starts_with(r#"{"speaker":"spk000","path":"spk000/utt000.wav"}"#));
}
