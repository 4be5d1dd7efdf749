//! `sasn` command-line front end.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use log::info;

use sasn::attention::AttentionMode;
use sasn::encoder::param_count;
use sasn::features::{featurize_wav, write_feature_cache};
use sasn::metrics::write_score_file;
use sasn::model::embed;
use sasn::numerics::{load_checkpoint, rng_from_seed, save_checkpoint, ParameterStore};
use sasn::scoring::{centroid, score};
use sasn::trainer::{
    batch_grad_check, evaluate, synth_dataset, FeaturePool, Manifest, TrainConfig, TrainOutcome,
    CHECK_PROBES,
};

const SEED_ENV: &str = "SASN_SEED";
const GRAD_TOL: f64 = 1e-4;

#[derive(Parser)]
#[command(name = "sasn", version, about = "Self-attentive speaker verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the log-mel feature cache of one WAV file.
    Featurize {
        #[arg(long)]
        wav: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic multi-speaker corpus with manifests.
    SynthData {
        #[arg(long, default_value_t = 4)]
        speakers: usize,
        #[arg(long, default_value_t = 8)]
        utts: usize,
        #[arg(long, default_value_t = 3.0)]
        seconds: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Train from a manifest and write a checkpoint.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        /// `key = value` config file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_checkpoint: PathBuf,
    },
    /// Score enrollment/test trials and print EER, minDCF and AUC.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write `label<TAB>score` trial lines here.
        #[arg(long)]
        scores_out: Option<PathBuf>,
    },
    /// Write one tab-separated embedding per manifest entry.
    Embed {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a test WAV against the centroid of enrollment WAVs.
    Verify {
        #[arg(long, num_args = 1.., required = true)]
        enroll: Vec<PathBuf>,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Accept when score >= threshold.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        threshold: f64,
    },
    /// Compare analytic and finite-difference gradients of the full loss.
    GradCheck {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = CHECK_PROBES)]
        probes: usize,
    },
    /// Print the exact trainable parameter count.
    ParamCount {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> anyhow::Result<TrainConfig> {
    let mut cfg = match path {
        Some(p) => {
            TrainConfig::load(p).with_context(|| format!("loading config {}", p.display()))?
        }
        None => TrainConfig::default(),
    };
    if let Ok(raw) = std::env::var(SEED_ENV) {
        cfg.seed = raw
            .trim()
            .parse()
            .with_context(|| format!("{SEED_ENV}={raw:?} is not an unsigned integer"))?;
    }
    Ok(cfg)
}

fn load_params(path: &Path) -> anyhow::Result<ParameterStore> {
    load_checkpoint(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

fn check_shape(params: &ParameterStore, cfg: &TrainConfig) -> anyhow::Result<()> {
    if (params.d_a(), params.d_r()) != (cfg.d_a, cfg.d_r) {
        bail!(
            "checkpoint has d_a={}, d_r={} but config says d_a={}, d_r={}",
            params.d_a(),
            params.d_r(),
            cfg.d_a,
            cfg.d_r
        );
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Featurize { wav, out } => {
            let feats = featurize_wav(&wav)?;
            write_feature_cache(&out, &feats)?;
            writeln!(stdout, "{} frames", feats.frame_count())?;
        }
        Command::SynthData {
            speakers,
            utts,
            seconds,
            out,
            seed,
        } => {
            let report = synth_dataset(&out, speakers, utts, seconds, &mut rng_from_seed(seed))?;
            writeln!(
                stdout,
                "wrote {} utterances ({} train, {} heldout) to {}",
                report.manifest.len(),
                report.train.len(),
                report.heldout.len(),
                out.display()
            )?;
            if let (Some(min), Some(across)) = (report.within_min, report.across_mean) {
                info!("profile cosine: same-speaker min {min:.4}, cross-speaker mean {across:.4}");
            }
        }
        Command::Train {
            manifest,
            config,
            out_checkpoint,
        } => {
            let cfg = load_config(config.as_deref())?;
            let manifest = Manifest::load(&manifest)?;
            let outcome = TrainOutcome::from_manifest(&manifest, &cfg)?;
            save_checkpoint(&out_checkpoint, &outcome.params)?;
            let first = outcome.losses.first().copied().unwrap_or(f64::NAN);
            let last = outcome.losses.last().copied().unwrap_or(f64::NAN);
            writeln!(
                stdout,
                "steps={} initial_loss={first:.6} final_loss={last:.6}",
                cfg.steps
            )?;
        }
        Command::Evaluate {
            manifest,
            checkpoint,
            config,
            scores_out,
        } => {
            let cfg = load_config(config.as_deref())?;
            let params = load_params(&checkpoint)?;
            check_shape(&params, &cfg)?;
            let eval = evaluate(&Manifest::load(&manifest)?, &params, cfg.attention)?;
            info!(
                "{} speakers, {} target / {} impostor trials, EER threshold {:.6}",
                eval.speakers.len(),
                eval.scores.target.len(),
                eval.scores.impostor.len(),
                eval.report.eer_threshold
            );
            if let Some(path) = scores_out {
                write_score_file(&path, &eval.scores)?;
            }
            writeln!(stdout, "{}", eval.report)?;
        }
        Command::Embed {
            manifest,
            checkpoint,
            out,
        } => {
            let params = load_params(&checkpoint)?;
            let manifest = Manifest::load(&manifest)?;
            let pool = FeaturePool::from_manifest(&manifest)?;
            let mut text = String::new();
            for spk in &pool.speakers {
                for (path, feats) in &spk.utterances {
                    let e = embed(feats, &params, AttentionMode::Single)?;
                    text.push_str(&path.display().to_string());
                    for v in e.as_slice() {
                        write!(text, "\t{v}")?;
                    }
                    text.push('\n');
                }
            }
            std::fs::write(&out, text).with_context(|| format!("writing {}", out.display()))?;
        }
        Command::Verify {
            enroll,
            test,
            checkpoint,
            threshold,
        } => {
            let params = load_params(&checkpoint)?;
            let embed_wav = |p: &Path| -> anyhow::Result<_> {
                let feats = featurize_wav(p)?;
                Ok(embed(&feats, &params, AttentionMode::Single)?)
            };
            let enrolled = enroll
                .iter()
                .map(|p| embed_wav(p))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let c = centroid(&enrolled)?;
            let s = score(&params, &embed_wav(&test)?, &c);
            let decision = if s >= threshold { "accept" } else { "reject" };
            writeln!(stdout, "score={s:.6} {decision}")?;
        }
        Command::GradCheck {
            config,
            seed,
            probes,
        } => {
            let cfg = load_config(config.as_deref())?;
            let seed = seed.unwrap_or(cfg.seed);
            let report = batch_grad_check(&cfg, seed, probes)?;
            let max = report.max_rel_error();
            writeln!(
                stdout,
                "max_rel_error={max:.3e} raw_rel_error={:.3e} probes={} within_noise={} mode={}",
                report.raw_max_rel_error(),
                report.probes.len(),
                report.within_noise(),
                cfg.attention
            )?;
            if !report.passes(GRAD_TOL) {
                if let Some(p) = report.worst() {
                    log::error!(
                        "worst probe {} {:?}: analytic {:e}, numeric {:e}",
                        p.tensor.name(),
                        p.index,
                        p.analytic,
                        p.numeric
                    );
                }
                bail!("gradient check failed (tolerance {GRAD_TOL:e})");
            }
        }
        Command::ParamCount { config } => {
            let cfg = load_config(config.as_deref())?;
            writeln!(
                stdout,
                "{}",
                param_count(cfg.d_a, cfg.d_r, cfg.include_biases)
            )?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
