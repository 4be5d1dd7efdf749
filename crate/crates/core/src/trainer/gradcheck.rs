use ndarray::Array2;
use rand::Rng as _;

use super::TrainConfig;
use crate::features::FeatureMatrix;
use crate::model::batch_loss;
use crate::numerics::{
    finite_diff_check, init_parameters, rng_from_seed, GradCheckReport, Gradients, ParameterStore,
};
use crate::{Result, N_MELS};

pub const CHECK_FRAMES: usize = 20;
pub const CHECK_EPS: f64 = 1e-5;
pub const CHECK_PROBES: usize = 240;

/// Finite-difference check of the full loss on a 2-speaker × 2-utterance
/// batch of random 20-frame crops, using the model sizes, attention mode,
/// penalty weight and bias setting from `cfg`. Batch sizes in `cfg` are
/// ignored. Everything is drawn from `seed`.
pub fn batch_grad_check(cfg: &TrainConfig, seed: u64, n_probe: usize) -> Result<GradCheckReport> {
    let mut rng = rng_from_seed(seed);
    let mut params = init_parameters(cfg.d_a, cfg.d_r, &mut rng)?;
    params.include_biases = cfg.include_biases;
    let crops = (0..4)
        .map(|_| {
            FeatureMatrix::new(Array2::from_shape_fn((N_MELS, CHECK_FRAMES), |_| {
                rng.random_range(-2.0..2.0)
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    let loss = |p: &ParameterStore, g: Option<&mut Gradients>| {
        batch_loss(&crops, 2, 2, p, cfg.attention, cfg.alpha, g).map(|b| b.loss)
    };
    finite_diff_check(loss, &params, CHECK_EPS, n_probe, &mut rng)
}
