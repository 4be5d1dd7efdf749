//! Three-layer TDNN: each layer splices frames at fixed offsets, applies an
//! affine map and a ReLU.
//!
//! | layer | offsets       | in × out   | receptive field |
//! |-------|---------------|------------|-----------------|
//! | 1     | −2, −1, 0, 1, 2 | 200 × 512 | 5               |
//! | 2     | −2, 0, 2      | 1536 × 512 | 9               |
//! | 3     | −3, 0, 3      | 1536 × 512 | 15              |

use ndarray::{s, Array2, ArrayView2, Axis};

use crate::features::FeatureMatrix;
use crate::numerics::{Gradients, ParamId, ParameterStore};
use crate::{Error, Result, HIDDEN};

pub const LAYER1_OFFSETS: &[isize] = &[-2, -1, 0, 1, 2];
pub const LAYER2_OFFSETS: &[isize] = &[-2, 0, 2];
pub const LAYER3_OFFSETS: &[isize] = &[-3, 0, 3];

pub const LAYERS: [(&[isize], ParamId, ParamId); 3] = [
    (LAYER1_OFFSETS, ParamId::Tdnn1W, ParamId::Tdnn1B),
    (LAYER2_OFFSETS, ParamId::Tdnn2W, ParamId::Tdnn2B),
    (LAYER3_OFFSETS, ParamId::Tdnn3W, ParamId::Tdnn3B),
];

/// Frames consumed by the whole stack for a single output frame.
pub const RECEPTIVE_FIELD: usize = 15;

fn span(offsets: &[isize]) -> usize {
    let lo = offsets.iter().min().copied().unwrap_or(0);
    let hi = offsets.iter().max().copied().unwrap_or(0);
    (hi - lo) as usize
}

/// Receptive field after each layer (5, 9, 15).
pub fn cumulative_receptive_fields() -> [usize; 3] {
    let mut acc = 1;
    LAYERS.map(|(offsets, _, _)| {
        acc += span(offsets);
        acc
    })
}

/// `512×T'` post-ReLU frame representation.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRepresentation(pub Array2<f64>);

impl FrameRepresentation {
    pub fn frames(&self) -> usize {
        self.0.ncols()
    }
}

/// Stacks `x[:, t + o - min(offsets)]` for each offset `o` into output column `t`.
pub fn splice(x: ArrayView2<'_, f64>, offsets: &[isize]) -> Result<Array2<f64>> {
    if offsets.is_empty() {
        return Err(Error::InvalidDimension("empty offset set".into()));
    }
    let (dim, width) = x.dim();
    let reach = span(offsets);
    if width <= reach {
        return Err(Error::BelowReceptiveField {
            frames: width,
            required: reach + 1,
        });
    }
    let lo = *offsets.iter().min().unwrap();
    let out_width = width - reach;
    let mut out = Array2::zeros((dim * offsets.len(), out_width));
    for (k, &o) in offsets.iter().enumerate() {
        let start = (o - lo) as usize;
        out.slice_mut(s![k * dim..(k + 1) * dim, ..])
            .assign(&x.slice(s![.., start..start + out_width]));
    }
    Ok(out)
}

/// Adjoint of [`splice`]: scatters spliced gradients back onto input columns.
pub fn splice_backward(
    d_spliced: ArrayView2<'_, f64>,
    offsets: &[isize],
    width: usize,
) -> Array2<f64> {
    let dim = d_spliced.nrows() / offsets.len();
    let out_width = d_spliced.ncols();
    let lo = *offsets.iter().min().unwrap();
    let mut dx = Array2::zeros((dim, width));
    for (k, &o) in offsets.iter().enumerate() {
        let start = (o - lo) as usize;
        let mut dst = dx.slice_mut(s![.., start..start + out_width]);
        dst += &d_spliced.slice(s![k * dim..(k + 1) * dim, ..]);
    }
    dx
}

/// Intermediates kept for the backward pass.
#[derive(Debug, Clone)]
pub struct TdnnCache {
    spliced: Vec<Array2<f64>>,
    outputs: Vec<Array2<f64>>,
}

fn check_input(features: &FeatureMatrix) -> Result<()> {
    if features.frame_count() < RECEPTIVE_FIELD {
        return Err(Error::BelowReceptiveField {
            frames: features.frame_count(),
            required: RECEPTIVE_FIELD,
        });
    }
    Ok(())
}

pub fn tdnn_forward(
    features: &FeatureMatrix,
    params: &ParameterStore,
) -> Result<FrameRepresentation> {
    tdnn_forward_cached(features, params).map(|(h, _)| h)
}

pub fn tdnn_forward_cached(
    features: &FeatureMatrix,
    params: &ParameterStore,
) -> Result<(FrameRepresentation, TdnnCache)> {
    check_input(features)?;
    let mut cache = TdnnCache {
        spliced: Vec::with_capacity(3),
        outputs: Vec::with_capacity(3),
    };
    let mut x = features.values().to_owned();
    for (offsets, w_id, b_id) in LAYERS {
        let spliced = splice(x.view(), offsets)?;
        let mut z = params.get(w_id).dot(&spliced);
        z += params.get(b_id);
        z.mapv_inplace(|v| v.max(0.0));
        cache.spliced.push(spliced);
        cache.outputs.push(z.clone());
        x = z;
    }
    debug_assert_eq!(x.nrows(), HIDDEN);
    Ok((FrameRepresentation(x), cache))
}

/// Accumulates weight and bias gradients for `dL/dH`. The input gradient of
/// the first layer is not needed and is skipped.
pub fn tdnn_backward(
    cache: &TdnnCache,
    d_h: Array2<f64>,
    params: &ParameterStore,
    grads: &mut Gradients,
) {
    let mut d_out = d_h;
    for layer in (0..LAYERS.len()).rev() {
        let (offsets, w_id, b_id) = LAYERS[layer];
        let mut d_z = d_out;
        ndarray::Zip::from(&mut d_z)
            .and(&cache.outputs[layer])
            .for_each(|g, &h| {
                if h <= 0.0 {
                    *g = 0.0;
                }
            });
        ndarray::linalg::general_mat_mul(
            1.0,
            &d_z,
            &cache.spliced[layer].t(),
            1.0,
            grads.get_mut(w_id),
        );
        let db = d_z.sum_axis(Axis(1)).insert_axis(Axis(1));
        *grads.get_mut(b_id) += &db;
        if layer == 0 {
            break;
        }
        let d_spliced = params.get(w_id).t().dot(&d_z);
        let width = cache.outputs[layer - 1].ncols();
        d_out = splice_backward(d_spliced.view(), offsets, width);
    }
}

/// Exact number of trainable scalars for the given attention sizes.
pub fn param_count(d_a: usize, d_r: usize, include_biases: bool) -> usize {
    ParamId::ALL
        .iter()
        .filter(|id| include_biases || !id.is_tdnn_bias())
        .map(|id| {
            let (r, c) = id.shape(d_a, d_r);
            r * c
        })
        .sum()
}
