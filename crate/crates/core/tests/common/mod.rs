#![allow(dead_code)]

use ndarray::Array2;
use rand::Rng;
use sasn::attention::AttentionMode;
use sasn::features::FeatureMatrix;
use sasn::model::batch_loss;
use sasn::numerics::{
    finite_diff_check, init_parameters, rng_from_seed, GradCheckReport, Gradients, ParameterStore,
};
use sasn::N_MELS;

pub fn random_crops(n: usize, frames: usize, seed: u64) -> Vec<FeatureMatrix> {
    let mut rng = rng_from_seed(seed);
    (0..n)
        .map(|_| {
            FeatureMatrix::new(Array2::from_shape_fn((N_MELS, frames), |_| {
                rng.random_range(-2.0..2.0)
            }))
            .unwrap()
        })
        .collect()
}

/// Finite-difference check of the full loss on a 2×2 batch of 20-frame crops.
pub fn grad_check(
    mode: AttentionMode,
    d_a: usize,
    d_r: usize,
    alpha: f64,
    include_biases: bool,
    probes: usize,
    seed: u64,
) -> GradCheckReport {
    let mut params = init_parameters(d_a, d_r, &mut rng_from_seed(seed)).unwrap();
    params.include_biases = include_biases;
    let data = random_crops(4, 20, seed + 100);
    let loss = |p: &ParameterStore, g: Option<&mut Gradients>| {
        batch_loss(&data, 2, 2, p, mode, alpha, g).map(|b| b.loss)
    };
    finite_diff_check(loss, &params, 1e-5, probes, &mut rng_from_seed(seed + 7)).unwrap()
}
