//! End-to-end forward and backward passes: features → TDNN → attention →
//! pooling → similarity matrix → loss.

use crate::attention::{
    attention_penalty, attention_penalty_grad, double_attention_backward, double_attention_cached,
    single_attention_backward, single_attention_cached, stats_pool, stats_pool_backward,
    AttentionMaps, AttentionMode, DoubleCache, Embedding, HeadMatrix, SingleCache,
};
use crate::encoder::{tdnn_backward, tdnn_forward_cached, FrameRepresentation, TdnnCache};
use crate::features::FeatureMatrix;
use crate::numerics::{Gradients, ParameterStore};
use crate::scoring::{
    ge2e_loss, ge2e_loss_grad, similarity_backward, similarity_matrix_cached, EmbeddingBatch,
    SimilarityMatrix,
};
use crate::{Error, Result};

/// Forward state of one utterance, sufficient for its backward pass.
#[derive(Debug, Clone)]
pub struct UtteranceForward {
    pub frames: FrameRepresentation,
    pub maps: AttentionMaps,
    pub heads: HeadMatrix,
    pub embedding: Embedding,
    pub penalty: f64,
    tdnn: TdnnCache,
    single: SingleCache,
    double: Option<DoubleCache>,
}

pub fn forward_utterance(
    features: &FeatureMatrix,
    params: &ParameterStore,
    mode: AttentionMode,
) -> Result<UtteranceForward> {
    let (frames, tdnn) = tdnn_forward_cached(features, params)?;
    let (mut maps, single_heads, single) = single_attention_cached(&frames, params)?;
    let penalty = attention_penalty(maps.single.view());
    let (heads, double) = match mode {
        AttentionMode::Single => (single_heads, None),
        AttentionMode::Double => {
            let (weights, heads, cache) = double_attention_cached(&single_heads, params);
            maps.double = Some(weights);
            (heads, Some(cache))
        }
    };
    let embedding = stats_pool(&heads);
    Ok(UtteranceForward {
        frames,
        maps,
        heads,
        embedding,
        penalty,
        tdnn,
        single,
        double,
    })
}

/// Inference-only embedding of one utterance.
pub fn embed(
    features: &FeatureMatrix,
    params: &ParameterStore,
    mode: AttentionMode,
) -> Result<Embedding> {
    forward_utterance(features, params, mode).map(|f| f.embedding)
}

/// Backpropagates `dL/de` plus `penalty_weight · dP/dA` into `grads`.
pub fn backward_utterance(
    fwd: &UtteranceForward,
    d_embedding: &ndarray::Array1<f64>,
    penalty_weight: f64,
    params: &ParameterStore,
    grads: &mut Gradients,
) {
    let mut d_heads = stats_pool_backward(&fwd.heads, &fwd.embedding, d_embedding);
    if let Some(cache) = &fwd.double {
        d_heads = double_attention_backward(cache, &d_heads, params, grads);
    }
    let d_weights = (penalty_weight != 0.0)
        .then(|| attention_penalty_grad(fwd.maps.single.view()) * penalty_weight);
    let d_frames = single_attention_backward(
        &fwd.single,
        &fwd.frames,
        &d_heads,
        d_weights.as_ref(),
        params,
        grads,
    );
    tdnn_backward(&fwd.tdnn, d_frames, params, grads);
}

#[derive(Debug, Clone)]
pub struct BatchLoss {
    pub loss: f64,
    /// Mean redundancy penalty over the batch, before weighting.
    pub penalty: f64,
    pub similarity: SimilarityMatrix,
}

/// Loss over `speakers × utterances` crops laid out speaker-major. When
/// `grads` is given, the full analytic gradient is accumulated into it.
pub fn batch_loss(
    crops: &[FeatureMatrix],
    speakers: usize,
    utterances: usize,
    params: &ParameterStore,
    mode: AttentionMode,
    alpha: f64,
    grads: Option<&mut Gradients>,
) -> Result<BatchLoss> {
    if crops.len() != speakers * utterances {
        return Err(Error::InvalidDimension(format!(
            "expected {} crops for a {speakers}×{utterances} batch, got {}",
            speakers * utterances,
            crops.len()
        )));
    }
    let forwards = crops
        .iter()
        .map(|c| forward_utterance(c, params, mode))
        .collect::<Result<Vec<_>>>()?;
    let batch = EmbeddingBatch::new(
        speakers,
        utterances,
        forwards.iter().map(|f| f.embedding.clone()).collect(),
    )?;
    let (similarity, cache) = similarity_matrix_cached(&batch, params)?;
    let count = forwards.len() as f64;
    let penalty = forwards.iter().map(|f| f.penalty).sum::<f64>() / count;
    let loss = ge2e_loss(&similarity, utterances, penalty, alpha);

    if let Some(grads) = grads {
        let d_s = ge2e_loss_grad(&similarity, utterances);
        let d_emb = similarity_backward(&batch, &cache, &d_s, params, grads);
        for (fwd, d_e) in forwards.iter().zip(&d_emb) {
            backward_utterance(fwd, d_e, alpha / count, params, grads);
        }
    }
    Ok(BatchLoss {
        loss,
        penalty,
        similarity,
    })
}
