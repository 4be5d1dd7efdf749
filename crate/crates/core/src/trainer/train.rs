use log::info;

use super::{assemble_batch, FeaturePool, Manifest, TrainConfig};
use crate::features::FeatureMatrix;
use crate::model::batch_loss;
use crate::numerics::{init_parameters, rng_from_seed, sgd_step, Gradients, ParameterStore};
use crate::{Error, Result};

/// One forward/backward/update on a speaker-major batch of crops. Returns
/// the loss before the update; parameters are untouched on error.
pub fn train_step(
    crops: &[FeatureMatrix],
    params: &mut ParameterStore,
    cfg: &TrainConfig,
) -> Result<f64> {
    let mut grads = Gradients::zeros_like(params);
    let out = batch_loss(
        crops,
        cfg.speakers_per_batch,
        cfg.utterances_per_speaker,
        params,
        cfg.attention,
        cfg.alpha,
        Some(&mut grads),
    )?;
    if !out.loss.is_finite() {
        return Err(Error::NonFiniteLoss(out.loss));
    }
    sgd_step(params, &grads, cfg.lr)?;
    Ok(out.loss)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ParameterStore,
    /// Pre-update loss of every step.
    pub losses: Vec<f64>,
}

/// Initializes from `cfg.seed` and runs `cfg.steps` SGD steps. The same
/// generator drives initialization and batch sampling.
pub fn train(pool: &FeaturePool, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut rng = rng_from_seed(cfg.seed);
    let mut params = init_parameters(cfg.d_a, cfg.d_r, &mut rng)?;
    params.include_biases = cfg.include_biases;
    let mut losses = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let batch = assemble_batch(pool, cfg, &mut rng)?;
        let loss = train_step(&batch.crops, &mut params, cfg)?;
        if step % 25 == 0 || step + 1 == cfg.steps {
            info!(
                "step {step:>5}  loss {loss:.6}  sim_w {:.4}",
                params.sim_w()
            );
        }
        losses.push(loss);
    }
    Ok(TrainOutcome { params, losses })
}

impl TrainOutcome {
    pub fn from_manifest(manifest: &Manifest, cfg: &TrainConfig) -> Result<Self> {
        train(&FeaturePool::from_manifest(manifest)?, cfg)
    }
}
