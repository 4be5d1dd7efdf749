//! Self-attentive pooling of frame representations into a fixed embedding.
//!
//! Single attention scores every frame per head with a two-layer ReLU MLP,
//! softmaxes over time and takes the weighted sum of frames. Each head
//! vector is then L2-normalized. The optional second attention softmaxes
//! over heads and rescales each head column before renormalizing. Mean and
//! standard deviation across heads form the 1024-dim embedding.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::encoder::FrameRepresentation;
use crate::numerics::{Gradients, ParamId, ParameterStore};
use crate::{Error, Result};

pub const NORM_EPS: f64 = 1e-12;
pub const STD_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AttentionMode {
    #[default]
    Single,
    Double,
}

impl FromStr for AttentionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(AttentionMode::Single),
            "double" => Ok(AttentionMode::Double),
            other => Err(Error::InvalidConfig(format!(
                "attention mode must be single or double, got {other:?}"
            ))),
        }
    }
}

impl fmt::Display for AttentionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttentionMode::Single => "single",
            AttentionMode::Double => "double",
        })
    }
}

/// Frame weights per head (`T'×d_r`) and, in double mode, head weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMaps {
    pub single: Array2<f64>,
    pub double: Option<Array1<f64>>,
}

/// `512×d_r` matrix of unit-norm head vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadMatrix(pub Array2<f64>);

/// Pooled utterance vector: per-row means then per-row standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(pub Array1<f64>);

impl Embedding {
    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice().expect("embedding is contiguous")
    }
}

/// Column-wise softmax with max subtraction.
pub fn softmax_columns(scores: &Array2<f64>) -> Array2<f64> {
    let mut out = scores.clone();
    for mut col in out.columns_mut() {
        let max = col.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        col.mapv_inplace(|v| (v - max).exp());
        let total = col.sum();
        col.mapv_inplace(|v| v / total);
    }
    out
}

pub fn softmax(scores: &Array1<f64>) -> Array1<f64> {
    let max = scores.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let e = scores.mapv(|s| (s - max).exp());
    let total = e.sum();
    e / total
}

/// Divides every column by `max(‖col‖, 1e-12)`; also returns those norms.
pub fn normalize_columns(x: &Array2<f64>) -> (Array2<f64>, Array1<f64>) {
    let norms = x
        .map_axis(Axis(0), |c| c.dot(&c).sqrt())
        .mapv(|n| n.max(NORM_EPS));
    let y = x / &norms.view().insert_axis(Axis(0));
    (y, norms)
}

fn normalize_columns_backward(
    y: &Array2<f64>,
    norms: &Array1<f64>,
    dy: &Array2<f64>,
) -> Array2<f64> {
    let mut dx = dy.clone();
    for (c, (mut dcol, ycol)) in dx.columns_mut().into_iter().zip(y.columns()).enumerate() {
        let n = norms[c];
        if n > NORM_EPS {
            let proj = ycol.dot(&dcol);
            dcol.zip_mut_with(&ycol, |d, &yv| *d -= yv * proj);
        }
        dcol.mapv_inplace(|d| d / n);
    }
    dx
}

#[derive(Debug, Clone)]
pub struct SingleCache {
    pre_relu: Array2<f64>,
    hidden: Array2<f64>,
    weights: Array2<f64>,
    heads: Array2<f64>,
    norms: Array1<f64>,
}

pub fn single_attention(
    h: &FrameRepresentation,
    params: &ParameterStore,
) -> Result<(AttentionMaps, HeadMatrix)> {
    single_attention_cached(h, params).map(|(m, e, _)| (m, e))
}

pub fn single_attention_cached(
    h: &FrameRepresentation,
    params: &ParameterStore,
) -> Result<(AttentionMaps, HeadMatrix, SingleCache)> {
    if h.frames() == 0 {
        return Err(Error::Empty("frame representation"));
    }
    let pre_relu = h.0.t().dot(params.get(ParamId::AttnW1));
    let hidden = pre_relu.mapv(|v| v.max(0.0));
    let scores = hidden.dot(params.get(ParamId::AttnW2));
    let weights = softmax_columns(&scores);
    let pooled = h.0.dot(&weights);
    let (heads, norms) = normalize_columns(&pooled);
    let maps = AttentionMaps {
        single: weights.clone(),
        double: None,
    };
    let cache = SingleCache {
        pre_relu,
        hidden,
        weights,
        heads: heads.clone(),
        norms,
    };
    Ok((maps, HeadMatrix(heads), cache))
}

/// Returns `dL/dH` and accumulates into `attn_w1`/`attn_w2`. `d_weights` is an
/// extra gradient on the frame-weight matrix (from the redundancy penalty).
pub fn single_attention_backward(
    cache: &SingleCache,
    h: &FrameRepresentation,
    d_heads: &Array2<f64>,
    d_weights: Option<&Array2<f64>>,
    params: &ParameterStore,
    grads: &mut Gradients,
) -> Array2<f64> {
    let d_pooled = normalize_columns_backward(&cache.heads, &cache.norms, d_heads);
    let mut d_a = h.0.t().dot(&d_pooled);
    if let Some(extra) = d_weights {
        d_a += extra;
    }
    let mut d_h = d_pooled.dot(&cache.weights.t());

    let mut d_scores = &cache.weights * &d_a;
    let col_dots = d_scores.sum_axis(Axis(0));
    d_scores -= &(&cache.weights * &col_dots.view().insert_axis(Axis(0)));

    *grads.get_mut(ParamId::AttnW2) += &cache.hidden.t().dot(&d_scores);
    let mut d_pre = d_scores.dot(&params.get(ParamId::AttnW2).t());
    ndarray::Zip::from(&mut d_pre)
        .and(&cache.pre_relu)
        .for_each(|g, &z| {
            if z <= 0.0 {
                *g = 0.0;
            }
        });
    *grads.get_mut(ParamId::AttnW1) += &h.0.dot(&d_pre);
    d_h += &params.get(ParamId::AttnW1).dot(&d_pre.t());
    d_h
}

#[derive(Debug, Clone)]
pub struct DoubleCache {
    input: Array2<f64>,
    head_weights: Array1<f64>,
    output: Array2<f64>,
    norms: Array1<f64>,
}

pub fn double_attention(
    e_single: &HeadMatrix,
    params: &ParameterStore,
) -> (Array1<f64>, HeadMatrix) {
    let (w, e, _) = double_attention_cached(e_single, params);
    (w, e)
}

pub fn double_attention_cached(
    e_single: &HeadMatrix,
    params: &ParameterStore,
) -> (Array1<f64>, HeadMatrix, DoubleCache) {
    let w3 = params.get(ParamId::AttnW3).column(0).to_owned();
    let scores = e_single.0.t().dot(&w3);
    let head_weights = softmax(&scores);
    // tiling the d_r head weights over all 512 rows
    let scaled = &e_single.0 * &head_weights.view().insert_axis(Axis(0));
    let (output, norms) = normalize_columns(&scaled);
    let cache = DoubleCache {
        input: e_single.0.clone(),
        head_weights: head_weights.clone(),
        output: output.clone(),
        norms,
    };
    (head_weights, HeadMatrix(output), cache)
}

/// Returns `dL/dE_single` and accumulates into `attn_w3`.
pub fn double_attention_backward(
    cache: &DoubleCache,
    d_out: &Array2<f64>,
    params: &ParameterStore,
    grads: &mut Gradients,
) -> Array2<f64> {
    let d_scaled = normalize_columns_backward(&cache.output, &cache.norms, d_out);
    let a = &cache.head_weights;
    let mut d_input = &d_scaled * &a.view().insert_axis(Axis(0));
    let d_a = (&d_scaled * &cache.input).sum_axis(Axis(0));
    let d_scores = a * &(&d_a - a.dot(&d_a));
    grads
        .get_mut(ParamId::AttnW3)
        .column_mut(0)
        .scaled_add(1.0, &cache.input.dot(&d_scores));
    // scores = E^T w3, so dE += w3 d_scores^T
    let w3 = params.get(ParamId::AttnW3).column(0);
    for (mut row, &w) in d_input.rows_mut().into_iter().zip(w3.iter()) {
        row.scaled_add(w, &d_scores);
    }
    d_input
}

/// Mean and population std (`sqrt(max(var, 0) + 1e-12)`) across heads, per row.
pub fn stats_pool(e: &HeadMatrix) -> Embedding {
    let (rows, heads) = e.0.dim();
    let mut out = Array1::zeros(2 * rows);
    for (r, row) in e.0.rows().into_iter().enumerate() {
        let mean = row.sum() / heads as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / heads as f64;
        out[r] = mean;
        out[rows + r] = (var.max(0.0) + STD_EPS).sqrt();
    }
    Embedding(out)
}

pub fn stats_pool_backward(
    e: &HeadMatrix,
    pooled: &Embedding,
    d_embedding: &Array1<f64>,
) -> Array2<f64> {
    let (rows, heads) = e.0.dim();
    let n = heads as f64;
    let mut d_e = Array2::zeros((rows, heads));
    for (r, (mut d_row, row)) in d_e.rows_mut().into_iter().zip(e.0.rows()).enumerate() {
        let mean = pooled.0[r];
        let std = pooled.0[rows + r];
        let d_mean = d_embedding[r];
        let d_std = d_embedding[rows + r];
        for (d, &v) in d_row.iter_mut().zip(row.iter()) {
            *d = d_mean / n + d_std * (v - mean) / (n * std);
        }
    }
    d_e
}

/// Redundancy penalty `‖AᵀA − I‖_F²` on the frame-weight matrix.
pub fn attention_penalty(weights: ArrayView2<'_, f64>) -> f64 {
    let mut gram = weights.t().dot(&weights);
    gram.diag_mut().mapv_inplace(|v| v - 1.0);
    gram.iter().map(|v| v * v).sum()
}

/// `dP/dA = 4 A (AᵀA − I)`.
pub fn attention_penalty_grad(weights: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut gram = weights.t().dot(&weights);
    gram.diag_mut().mapv_inplace(|v| v - 1.0);
    weights.dot(&gram) * 4.0
}
