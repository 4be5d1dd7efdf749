//! Parameter storage, initialization, SGD, checkpoints and finite-difference
//! gradient verification. Everything is `f64`.

pub mod checkpoint;
pub mod gradcheck;
pub mod params;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use gradcheck::{finite_diff_check, GradCheckReport, Probe, NOISE_FACTOR};
pub use params::{init_parameters, sgd_step, Gradients, ParamId, ParameterStore, SIM_W_MIN};

use rand::SeedableRng;

/// Deterministic generator used for initialization, batch sampling and probes.
pub type Rng = rand_chacha::ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
