//! Speaker centroids, the scaled-cosine similarity matrix and the batch loss.
//!
//! For a batch of `N` speakers with `M` utterances each, row `j*M + i` of the
//! similarity matrix scores utterance `i` of speaker `j` against every speaker
//! centroid. The own-speaker column uses the centroid computed without that
//! utterance.

use ndarray::{Array1, Array2, ArrayView1};

use crate::attention::Embedding;
use crate::numerics::{Gradients, ParamId, ParameterStore};
use crate::{Error, Result};

pub const COS_EPS: f64 = 1e-12;

/// `N×M` utterance embeddings stored speaker-major.
#[derive(Debug, Clone)]
pub struct EmbeddingBatch {
    speakers: usize,
    utterances: usize,
    embeddings: Vec<Embedding>,
}

impl EmbeddingBatch {
    pub fn new(speakers: usize, utterances: usize, embeddings: Vec<Embedding>) -> Result<Self> {
        if speakers < 2 || utterances < 2 {
            return Err(Error::InvalidDimension(format!(
                "batch needs at least 2 speakers and 2 utterances each, got {speakers}×{utterances}"
            )));
        }
        if embeddings.len() != speakers * utterances {
            return Err(Error::InvalidDimension(format!(
                "expected {} embeddings, got {}",
                speakers * utterances,
                embeddings.len()
            )));
        }
        let dim = embeddings[0].0.len();
        if embeddings.iter().any(|e| e.0.len() != dim) {
            return Err(Error::InvalidDimension("embedding lengths differ".into()));
        }
        Ok(Self {
            speakers,
            utterances,
            embeddings,
        })
    }

    pub fn speakers(&self) -> usize {
        self.speakers
    }

    pub fn utterances(&self) -> usize {
        self.utterances
    }

    pub fn get(&self, speaker: usize, utterance: usize) -> &Embedding {
        &self.embeddings[speaker * self.utterances + utterance]
    }

    pub fn speaker(&self, speaker: usize) -> &[Embedding] {
        &self.embeddings[speaker * self.utterances..(speaker + 1) * self.utterances]
    }
}

pub fn centroid(embeddings: &[Embedding]) -> Result<Embedding> {
    let first = embeddings.first().ok_or(Error::Empty("centroid input"))?;
    let mut sum = first.0.clone();
    for e in &embeddings[1..] {
        sum += &e.0;
    }
    Ok(Embedding(sum / embeddings.len() as f64))
}

/// Mean of all embeddings except `excluded`.
pub fn leave_one_out_centroid(embeddings: &[Embedding], excluded: usize) -> Result<Embedding> {
    if embeddings.len() < 2 {
        return Err(Error::SingletonExclusion);
    }
    if excluded >= embeddings.len() {
        return Err(Error::InvalidDimension(format!(
            "excluded index {excluded} out of range for {} embeddings",
            embeddings.len()
        )));
    }
    let dim = embeddings[0].0.len();
    let mut sum = Array1::zeros(dim);
    for (i, e) in embeddings.iter().enumerate() {
        if i != excluded {
            sum += &e.0;
        }
    }
    Ok(Embedding(sum / (embeddings.len() - 1) as f64))
}

fn norm(v: ArrayView1<'_, f64>) -> f64 {
    v.dot(&v).sqrt()
}

pub fn cosine(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.dot(&b) / (norm(a).max(COS_EPS) * norm(b).max(COS_EPS))
}

/// Scaled cosine score `w·cos(a, b) + b` with the store's similarity scalars.
pub fn score(params: &ParameterStore, a: &Embedding, b: &Embedding) -> f64 {
    params.sim_w() * cosine(a.0.view(), b.0.view()) + params.sim_b()
}

/// `(N·M)×N` matrix of scaled cosine similarities.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix(pub Array2<f64>);

/// Centroids and cosines kept for the backward pass.
#[derive(Debug, Clone)]
pub struct SimilarityCache {
    full: Vec<Array1<f64>>,
    own: Vec<Array1<f64>>,
    cosines: Array2<f64>,
}

impl SimilarityCache {
    fn centroid_for(&self, row: usize, speaker: usize, utterances: usize) -> &Array1<f64> {
        if row / utterances == speaker {
            &self.own[row]
        } else {
            &self.full[speaker]
        }
    }
}

pub fn similarity_matrix(
    batch: &EmbeddingBatch,
    params: &ParameterStore,
) -> Result<SimilarityMatrix> {
    similarity_matrix_cached(batch, params).map(|(s, _)| s)
}

pub fn similarity_matrix_cached(
    batch: &EmbeddingBatch,
    params: &ParameterStore,
) -> Result<(SimilarityMatrix, SimilarityCache)> {
    let (n, m) = (batch.speakers, batch.utterances);
    for j in 0..n {
        for i in 0..m {
            if norm(batch.get(j, i).0.view()) == 0.0 {
                return Err(Error::ZeroNorm {
                    speaker: j,
                    utterance: i,
                });
            }
        }
    }
    let full: Vec<Array1<f64>> = (0..n)
        .map(|k| centroid(batch.speaker(k)).map(|c| c.0))
        .collect::<Result<_>>()?;
    if let Some(k) = full.iter().position(|c| norm(c.view()) == 0.0) {
        return Err(Error::ZeroNormCentroid(k));
    }
    let mut own = Vec::with_capacity(n * m);
    for j in 0..n {
        for i in 0..m {
            let c = leave_one_out_centroid(batch.speaker(j), i)?.0;
            if norm(c.view()) == 0.0 {
                return Err(Error::ZeroNorm {
                    speaker: j,
                    utterance: i,
                });
            }
            own.push(c);
        }
    }
    let mut cache = SimilarityCache {
        full,
        own,
        cosines: Array2::zeros((n * m, n)),
    };
    for row in 0..n * m {
        let e = &batch.embeddings[row].0;
        for k in 0..n {
            cache.cosines[[row, k]] = cosine(e.view(), cache.centroid_for(row, k, m).view());
        }
    }
    let (w, b) = (params.sim_w(), params.sim_b());
    let s = cache.cosines.mapv(|c| w * c + b);
    Ok((SimilarityMatrix(s), cache))
}

/// Chains `dL/dS` to per-embedding gradients; accumulates `sim_w` and `sim_b`.
pub fn similarity_backward(
    batch: &EmbeddingBatch,
    cache: &SimilarityCache,
    d_s: &Array2<f64>,
    params: &ParameterStore,
    grads: &mut Gradients,
) -> Vec<Array1<f64>> {
    let (n, m) = (batch.speakers, batch.utterances);
    let w = params.sim_w();
    grads.get_mut(ParamId::SimW)[[0, 0]] += (d_s * &cache.cosines).sum();
    grads.get_mut(ParamId::SimB)[[0, 0]] += d_s.sum();

    let dim = batch.embeddings[0].0.len();
    let mut d_emb = vec![Array1::zeros(dim); n * m];
    let mut d_full = vec![Array1::<f64>::zeros(dim); n];
    for row in 0..n * m {
        let e = &batch.embeddings[row].0;
        let e_norm = norm(e.view()).max(COS_EPS);
        for k in 0..n {
            let g = d_s[[row, k]] * w;
            if g == 0.0 {
                continue;
            }
            let c = cache.centroid_for(row, k, m);
            let c_norm = norm(c.view()).max(COS_EPS);
            let cos = cache.cosines[[row, k]];
            // d cos / d e = c/(|e||c|) - cos e/|e|^2, symmetric for c
            d_emb[row].scaled_add(g / (e_norm * c_norm), c);
            d_emb[row].scaled_add(-g * cos / (e_norm * e_norm), e);
            let mut d_c = c * (-g * cos / (c_norm * c_norm));
            d_c.scaled_add(g / (e_norm * c_norm), e);
            if row / m == k {
                // leave-one-out centroid over the other M-1 utterances
                let share = 1.0 / (m - 1) as f64;
                for l in 0..m {
                    if k * m + l != row {
                        d_emb[k * m + l].scaled_add(share, &d_c);
                    }
                }
            } else {
                d_full[k] += &d_c;
            }
        }
    }
    for (k, d_c) in d_full.iter().enumerate() {
        for l in 0..m {
            d_emb[k * m + l].scaled_add(1.0 / m as f64, d_c);
        }
    }
    d_emb
}

/// `Σ_ji [−S_ji,j + log Σ_k exp S_ji,k] + alpha·penalty`, for `N×M` rows laid
/// out speaker-major. `penalty` is the mean per-utterance penalty.
pub fn ge2e_loss(s: &SimilarityMatrix, utterances: usize, penalty: f64, alpha: f64) -> f64 {
    let mut total = 0.0;
    for (row, values) in s.0.rows().into_iter().enumerate() {
        total += log_sum_exp(values) - values[row / utterances];
    }
    total + alpha * penalty
}

/// Per-row contribution of one similarity row with target column `target`.
pub fn row_loss(values: ArrayView1<'_, f64>, target: usize) -> f64 {
    log_sum_exp(values) - values[target]
}

pub fn log_sum_exp(values: ArrayView1<'_, f64>) -> f64 {
    let max = values.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `dL/dS`: row softmax minus the one-hot target.
pub fn ge2e_loss_grad(s: &SimilarityMatrix, utterances: usize) -> Array2<f64> {
    let mut d = s.0.clone();
    for (row, mut values) in d.rows_mut().into_iter().enumerate() {
        let max = values.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        values.mapv_inplace(|v| (v - max).exp());
        let total = values.sum();
        values.mapv_inplace(|v| v / total);
        values[row / utterances] -= 1.0;
    }
    d
}
