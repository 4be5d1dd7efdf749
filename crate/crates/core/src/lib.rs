//! Text-independent speaker verification with a shallow TDNN encoder,
//! self-attentive pooling and a centroid-based batch loss.
//!
//! The pipeline runs, in order:
//!
//! 1. [`features`]: 16 kHz PCM audio to 40-band log-mel matrices.
//! 2. [`encoder`]: three spliced TDNN layers mapping `40×T` to `512×(T−14)`.
//! 3. [`attention`]: multi-head self-attention over frames, optional second
//!    attention over heads, then mean/std pooling into a 1024-dim embedding.
//! 4. [`scoring`]: speaker centroids, the scaled-cosine similarity matrix and
//!    the softmax-over-speakers loss with an attention redundancy penalty.
//! 5. [`trainer`]: batch assembly, SGD training and trial evaluation, scored
//!    by [`metrics`] (EER, minDCF, AUC).
//!
//! All gradients are derived by hand and checked against central finite
//! differences in [`numerics::gradcheck`].

pub mod attention;
pub mod encoder;
pub mod error;
pub mod features;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod repro;
pub mod scoring;
pub mod trainer;

pub use error::{Error, Result};

/// Number of log-mel bands fed to the encoder.
pub const N_MELS: usize = 40;
/// Width of every TDNN layer and of each attention head vector.
pub const HIDDEN: usize = 512;
/// Length of the pooled utterance embedding (mean and std halves).
pub const EMBED_DIM: usize = 2 * HIDDEN;
