use ndarray::Array2;
use rand::distr::{Distribution, Uniform};

use super::Rng;
use crate::{Error, Result, HIDDEN, N_MELS};

/// Lower bound enforced on the similarity scale after every update.
pub const SIM_W_MIN: f64 = 1e-6;
pub const SIM_W_INIT: f64 = 10.0;
pub const SIM_B_INIT: f64 = -5.0;

/// Trainable tensors, in checkpoint order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamId {
    Tdnn1W,
    Tdnn1B,
    Tdnn2W,
    Tdnn2B,
    Tdnn3W,
    Tdnn3B,
    AttnW1,
    AttnW2,
    AttnW3,
    SimW,
    SimB,
}

impl ParamId {
    pub const ALL: [ParamId; 11] = [
        ParamId::Tdnn1W,
        ParamId::Tdnn1B,
        ParamId::Tdnn2W,
        ParamId::Tdnn2B,
        ParamId::Tdnn3W,
        ParamId::Tdnn3B,
        ParamId::AttnW1,
        ParamId::AttnW2,
        ParamId::AttnW3,
        ParamId::SimW,
        ParamId::SimB,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamId::Tdnn1W => "tdnn1_w",
            ParamId::Tdnn1B => "tdnn1_b",
            ParamId::Tdnn2W => "tdnn2_w",
            ParamId::Tdnn2B => "tdnn2_b",
            ParamId::Tdnn3W => "tdnn3_w",
            ParamId::Tdnn3B => "tdnn3_b",
            ParamId::AttnW1 => "attn_w1",
            ParamId::AttnW2 => "attn_w2",
            ParamId::AttnW3 => "attn_w3",
            ParamId::SimW => "sim_w",
            ParamId::SimB => "sim_b",
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    pub fn is_tdnn_bias(self) -> bool {
        matches!(self, ParamId::Tdnn1B | ParamId::Tdnn2B | ParamId::Tdnn3B)
    }

    /// Storage shape. Biases are `512×1` columns and scalars `1×1`.
    pub fn shape(self, d_a: usize, d_r: usize) -> (usize, usize) {
        match self {
            ParamId::Tdnn1W => (HIDDEN, 5 * N_MELS),
            ParamId::Tdnn2W | ParamId::Tdnn3W => (HIDDEN, 3 * HIDDEN),
            ParamId::Tdnn1B | ParamId::Tdnn2B | ParamId::Tdnn3B => (HIDDEN, 1),
            ParamId::AttnW1 => (HIDDEN, d_a),
            ParamId::AttnW2 => (d_a, d_r),
            ParamId::AttnW3 => (HIDDEN, 1),
            ParamId::SimW | ParamId::SimB => (1, 1),
        }
    }
}

/// All model tensors. Shapes are fixed at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterStore {
    d_a: usize,
    d_r: usize,
    /// When false the TDNN biases stay at zero and are not trained or counted.
    pub include_biases: bool,
    tensors: Vec<Array2<f64>>,
}

impl ParameterStore {
    pub fn zeros(d_a: usize, d_r: usize) -> Result<Self> {
        if d_a == 0 || d_r == 0 {
            return Err(Error::InvalidDimension(format!(
                "d_a and d_r must be positive (got d_a={d_a}, d_r={d_r})"
            )));
        }
        let tensors = ParamId::ALL
            .iter()
            .map(|id| Array2::zeros(id.shape(d_a, d_r)))
            .collect();
        Ok(Self {
            d_a,
            d_r,
            include_biases: true,
            tensors,
        })
    }

    pub fn d_a(&self) -> usize {
        self.d_a
    }

    pub fn d_r(&self) -> usize {
        self.d_r
    }

    pub fn get(&self, id: ParamId) -> &Array2<f64> {
        &self.tensors[id.index()]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Array2<f64> {
        &mut self.tensors[id.index()]
    }

    pub fn sim_w(&self) -> f64 {
        self.get(ParamId::SimW)[[0, 0]]
    }

    pub fn sim_b(&self) -> f64 {
        self.get(ParamId::SimB)[[0, 0]]
    }

    pub fn set_sim(&mut self, w: f64, b: f64) {
        self.get_mut(ParamId::SimW)[[0, 0]] = w;
        self.get_mut(ParamId::SimB)[[0, 0]] = b;
    }

    /// Tensors that SGD updates.
    pub fn trainable(&self) -> impl Iterator<Item = ParamId> + '_ {
        ParamId::ALL
            .into_iter()
            .filter(move |id| self.include_biases || !id.is_tdnn_bias())
    }

    pub fn trainable_count(&self) -> usize {
        self.trainable().map(|id| self.get(id).len()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Array2<f64>)> {
        ParamId::ALL.into_iter().zip(&self.tensors)
    }
}

/// One gradient tensor per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    tensors: Vec<Array2<f64>>,
}

impl Gradients {
    pub fn zeros_like(params: &ParameterStore) -> Self {
        Self {
            tensors: params
                .tensors
                .iter()
                .map(|t| Array2::zeros(t.dim()))
                .collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &Array2<f64> {
        &self.tensors[id.index()]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Array2<f64> {
        &mut self.tensors[id.index()]
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            *a += b;
        }
    }
}

/// Fan-based uniform initialization: weights in `[-s, s]` with
/// `s = sqrt(6 / (fan_in + fan_out))`, zero biases, `sim_w = 10`, `sim_b = -5`.
pub fn init_parameters(d_a: usize, d_r: usize, rng: &mut Rng) -> Result<ParameterStore> {
    let mut store = ParameterStore::zeros(d_a, d_r)?;
    for id in ParamId::ALL {
        let (fan_out, fan_in) = match id {
            ParamId::Tdnn1W | ParamId::Tdnn2W | ParamId::Tdnn3W => id.shape(d_a, d_r),
            // used as H^T W, so rows are the input side
            ParamId::AttnW1 | ParamId::AttnW2 | ParamId::AttnW3 => {
                let (r, c) = id.shape(d_a, d_r);
                (c, r)
            }
            _ => continue,
        };
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound)
            .map_err(|e| Error::InvalidDimension(e.to_string()))?;
        store
            .get_mut(id)
            .iter_mut()
            .for_each(|v| *v = dist.sample(rng));
    }
    store.set_sim(SIM_W_INIT, SIM_B_INIT);
    Ok(store)
}

/// Plain SGD, `p <- p - lr * g`, followed by `sim_w <- max(sim_w, 1e-6)`.
/// Nothing is modified if any trainable gradient is non-finite.
pub fn sgd_step(params: &mut ParameterStore, grads: &Gradients, lr: f64) -> Result<()> {
    let ids: Vec<ParamId> = params.trainable().collect();
    if let Some(bad) = ids
        .iter()
        .find(|&&id| grads.get(id).iter().any(|g| !g.is_finite()))
    {
        return Err(Error::NonFiniteGradient(bad.name()));
    }
    for id in ids {
        params.get_mut(id).scaled_add(-lr, grads.get(id));
    }
    let w = params.sim_w().max(SIM_W_MIN);
    params.get_mut(ParamId::SimW)[[0, 0]] = w;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng_from_seed;

    #[test]
    fn init_shapes_and_similarity_scalars() {
        let mut rng = rng_from_seed(3);
        let p = init_parameters(512, 5, &mut rng).unwrap();
        assert_eq!(p.get(ParamId::AttnW2).dim(), (512, 5));
        assert_eq!(p.get(ParamId::Tdnn1W).dim(), (512, 200));
        assert_eq!(p.get(ParamId::Tdnn3W).dim(), (512, 1536));
        assert_eq!(p.sim_w(), 10.0);
        assert_eq!(p.sim_b(), -5.0);
        assert!(p.get(ParamId::Tdnn2B).iter().all(|&b| b == 0.0));
        let bound = (6.0f64 / (200.0 + 512.0)).sqrt();
        let w = p.get(ParamId::Tdnn1W);
        assert!(w.iter().all(|v| v.abs() <= bound));
        assert!(w.iter().any(|v| v.abs() > 0.9 * bound));
    }

    #[test]
    fn init_is_deterministic() {
        let a = init_parameters(16, 3, &mut rng_from_seed(9)).unwrap();
        let b = init_parameters(16, 3, &mut rng_from_seed(9)).unwrap();
        let c = init_parameters(16, 3, &mut rng_from_seed(10)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn init_rejects_zero_dims() {
        assert!(init_parameters(0, 5, &mut rng_from_seed(0)).is_err());
        assert!(init_parameters(4, 0, &mut rng_from_seed(0)).is_err());
    }

    #[test]
    fn sgd_arithmetic() {
        let mut p = ParameterStore::zeros(2, 2).unwrap();
        p.get_mut(ParamId::AttnW2)[[0, 0]] = 1.0;
        p.set_sim(10.0, -5.0);
        let mut g = Gradients::zeros_like(&p);
        g.get_mut(ParamId::AttnW2)[[0, 0]] = 0.5;
        sgd_step(&mut p, &g, 0.01).unwrap();
        assert_eq!(p.get(ParamId::AttnW2)[[0, 0]], 0.995);

        let before = p.clone();
        let zero = Gradients::zeros_like(&p);
        sgd_step(&mut p, &zero, 0.01).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn sgd_clamps_similarity_scale() {
        let mut p = ParameterStore::zeros(2, 2).unwrap();
        p.set_sim(0.3, 0.0);
        let mut g = Gradients::zeros_like(&p);
        g.get_mut(ParamId::SimW)[[0, 0]] = 50.0;
        sgd_step(&mut p, &g, 0.01).unwrap();
        assert_eq!(p.sim_w(), SIM_W_MIN);
    }

    #[test]
    fn sgd_rejects_non_finite_gradient() {
        let mut p = ParameterStore::zeros(2, 2).unwrap();
        let before = p.clone();
        let mut g = Gradients::zeros_like(&p);
        g.get_mut(ParamId::SimW)[[0, 0]] = -1.0;
        g.get_mut(ParamId::AttnW1)[[1, 1]] = f64::NAN;
        let err = sgd_step(&mut p, &g, 0.1).unwrap_err();
        assert!(err.to_string().contains("attn_w1"));
        assert_eq!(p, before);
    }

    #[test]
    fn frozen_biases_are_not_updated() {
        let mut p = ParameterStore::zeros(2, 2).unwrap();
        p.include_biases = false;
        p.set_sim(1.0, 0.0);
        let mut g = Gradients::zeros_like(&p);
        g.get_mut(ParamId::Tdnn1B).fill(1.0);
        g.get_mut(ParamId::Tdnn1W).fill(1.0);
        sgd_step(&mut p, &g, 0.1).unwrap();
        assert!(p.get(ParamId::Tdnn1B).iter().all(|&b| b == 0.0));
        assert!(p.get(ParamId::Tdnn1W).iter().all(|&w| w == -0.1));
    }

    #[test]
    fn step_then_reverse_step_restores() {
        let mut rng = rng_from_seed(1);
        let mut p = init_parameters(8, 2, &mut rng).unwrap();
        let start = p.clone();
        let mut g = Gradients::zeros_like(&p);
        for id in ParamId::ALL {
            let q = init_parameters(8, 2, &mut rng).unwrap();
            g.get_mut(id).assign(q.get(id));
        }
        g.get_mut(ParamId::SimW)[[0, 0]] = 0.3;
        sgd_step(&mut p, &g, 0.05).unwrap();
        sgd_step(&mut p, &g, -0.05).unwrap();
        for id in ParamId::ALL {
            for (a, b) in p.get(id).iter().zip(start.get(id)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
