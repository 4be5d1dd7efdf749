//! Dataset manifests, batch assembly, the SGD training loop, trial
//! evaluation and a synthetic speaker corpus for desk-scale experiments.

mod batch;
mod config;
mod evaluate;
mod gradcheck;
mod manifest;
mod synth;
mod train;

pub use batch::{assemble_batch, Batch, FeaturePool, SpeakerFeatures};
pub use config::TrainConfig;
pub use evaluate::{evaluate, evaluate_pool, Evaluation};
pub use gradcheck::{batch_grad_check, CHECK_EPS, CHECK_FRAMES, CHECK_PROBES};
pub use manifest::{Manifest, ManifestEntry};
pub use synth::{synth_dataset, SynthReport};
pub use train::{train, train_step, TrainOutcome};
