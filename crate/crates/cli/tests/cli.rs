use std::path::Path;
use std::process::{Command, Output};

fn sasn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sasn"))
        .args(args)
        .env_remove("SASN_SEED")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn param_count_defaults_and_config() {
    let o = sasn(&["param-count"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "1942018");

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("nobias.cfg");
    std::fs::write(&cfg, "include_biases = false\n").unwrap();
    let o = sasn(&["param-count", "--config", p(&cfg)]);
    assert_eq!(stdout(&o).trim(), "1940482");
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(sasn(&["dance"]).status.code(), Some(2));
    assert_eq!(sasn(&["param-count", "--bogus"]).status.code(), Some(2));
    assert_eq!(
        sasn(&["featurize", "--wav", "x.wav"]).status.code(),
        Some(2)
    );
}

#[test]
fn operational_errors_exit_1_with_one_line() {
    let o = sasn(&[
        "featurize",
        "--wav",
        "/nonexistent/a.wav",
        "--out",
        "/tmp/x.sasf",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert_eq!(err.trim().lines().count(), 1, "{err}");
    assert!(err.starts_with("error:"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "d_q = 3\n").unwrap();
    assert_eq!(
        sasn(&["param-count", "--config", p(&cfg)]).status.code(),
        Some(1)
    );
}

#[test]
fn help_lists_every_flag() {
    let cases: &[(&str, &[&str])] = &[
        ("featurize", &["--wav", "--out"]),
        (
            "synth-data",
            &["--speakers", "--utts", "--seconds", "--out", "--seed"],
        ),
        ("train", &["--manifest", "--config", "--out-checkpoint"]),
        (
            "evaluate",
            &["--manifest", "--checkpoint", "--config", "--scores-out"],
        ),
        ("embed", &["--manifest", "--checkpoint", "--out"]),
        (
            "verify",
            &["--enroll", "--test", "--checkpoint", "--threshold"],
        ),
        ("grad-check", &["--config", "--seed", "--probes"]),
        ("param-count", &["--config"]),
    ];
    for (cmd, flags) in cases {
        let o = sasn(&[cmd, "--help"]);
        assert!(o.status.success());
        let text = stdout(&o);
        for f in *flags {
            assert!(text.contains(f), "{cmd} --help lacks {f}");
        }
    }
}

#[test]
fn grad_check_on_desk_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("desk.cfg");
    std::fs::write(&cfg, "d_a = 16\nd_r = 3\n").unwrap();
    let o = sasn(&["grad-check", "--config", p(&cfg), "--seed", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let line = stdout(&o);
    let value: f64 = line
        .split_whitespace()
        .find_map(|t| t.strip_prefix("max_rel_error="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(value < 1e-5, "{line}");
}

#[test]
fn featurize_writes_cache() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("a.wav");
    let samples: Vec<f64> = (0..4000).map(|n| (n as f64 * 0.05).sin() * 0.3).collect();
    sasn::features::write_wav(&wav, &samples).unwrap();
    let out = dir.path().join("a.sasf");
    let o = sasn(&["featurize", "--wav", p(&wav), "--out", p(&out)]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "23 frames");
    let feats = sasn::features::read_feature_cache(&out).unwrap();
    assert_eq!(feats.frame_count(), 23);
}

#[test]
fn synth_train_evaluate_embed_verify() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let o = sasn(&[
        "synth-data",
        "--speakers",
        "4",
        "--utts",
        "8",
        "--seconds",
        "3",
        "--out",
        p(&data),
        "--seed",
        "1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("32 utterances"));

    let ckpt = dir.path().join("model.sasn");
    let o = sasn(&[
        "train",
        "--manifest",
        p(&data.join("train.jsonl")),
        "--out-checkpoint",
        p(&ckpt),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("steps=300"));

    let scores = dir.path().join("scores.txt");
    let o = sasn(&[
        "evaluate",
        "--manifest",
        p(&data.join("heldout.jsonl")),
        "--checkpoint",
        p(&ckpt),
        "--scores-out",
        p(&scores),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let line = stdout(&o);
    let eer: f64 = line
        .split_whitespace()
        .find_map(|t| t.strip_prefix("EER="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(eer < 0.05, "{line}");
    let trials = sasn::metrics::read_score_file(&scores).unwrap();
    // 4 speakers × 2 test utterances, each scored against 4 centroids
    assert_eq!((trials.target.len(), trials.impostor.len()), (8, 24));

    let emb = dir.path().join("emb.tsv");
    let o = sasn(&[
        "embed",
        "--manifest",
        p(&data.join("heldout.jsonl")),
        "--checkpoint",
        p(&ckpt),
        "--out",
        p(&emb),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&emb).unwrap();
    assert_eq!(text.lines().count(), 16);
    assert!(text.lines().all(|l| l.split('\t').count() == 1025));

    let spk0 = data.join("spk000");
    let spk1 = data.join("spk001");
    let enroll = [
        p(&spk0.join("utt000.wav")).to_string(),
        p(&spk0.join("utt001.wav")).to_string(),
    ];
    let verify = |test: &Path, threshold: &str| {
        stdout(&sasn(&[
            "verify",
            "--enroll",
            &enroll[0],
            &enroll[1],
            "--test",
            p(test),
            "--checkpoint",
            p(&ckpt),
            "--threshold",
            threshold,
        ]))
    };
    let same = verify(&spk0.join("utt007.wav"), "0");
    let other = verify(&spk1.join("utt007.wav"), "0");
    let score = |s: &str| -> f64 {
        s.split_whitespace()
            .next()
            .unwrap()
            .strip_prefix("score=")
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!(score(&same) > score(&other), "{same} / {other}");
    assert!(verify(&spk0.join("utt007.wav"), "1e9").contains("reject"));
    assert!(verify(&spk0.join("utt007.wav"), "-1e9").contains("accept"));
}

#[test]
fn seed_env_changes_training() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert!(sasn(&[
        "synth-data",
        "--speakers",
        "2",
        "--utts",
        "3",
        "--seconds",
        "1",
        "--out",
        p(&data)
    ])
    .status
    .success());
    let cfg = dir.path().join("tiny.cfg");
    std::fs::write(&cfg, "speakers_per_batch = 2\nutterances_per_speaker = 2\nd_a = 8\nd_r = 2\nsteps = 2\ncrop_frames = 20\n").unwrap();
    let train = |out: &Path, seed: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_sasn"));
        c.args([
            "train",
            "--manifest",
            p(&data.join("manifest.jsonl")),
            "--config",
            p(&cfg),
            "--out-checkpoint",
            p(out),
        ]);
        c.env_remove("SASN_SEED").env("RUST_LOG", "warn");
        if let Some(s) = seed {
            c.env("SASN_SEED", s);
        }
        assert!(c.status().unwrap().success());
        std::fs::read(out).unwrap()
    };
    let a = train(&dir.path().join("a"), None);
    let b = train(&dir.path().join("b"), None);
    let c = train(&dir.path().join("c"), Some("99"));
    assert_eq!(a, b);
    assert_ne!(a, c);
    let d = train(&dir.path().join("d"), Some("1"));
    assert_eq!(a, d);
}
