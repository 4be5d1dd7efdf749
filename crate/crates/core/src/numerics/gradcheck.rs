//! Central finite-difference verification of analytic gradients.

use rand::Rng as _;

use super::{Gradients, ParamId, ParameterStore, Rng};
use crate::Result;

/// Floor on the relative-error denominator.
pub const REL_DENOM_FLOOR: f64 = 1e-12;

/// Multiple of `f64::EPSILON * max(1, |L|) / eps` taken as the absolute
/// rounding floor of a central difference. On the full loss the observed
/// discrepancy is 4–10 units of this on all but rare probes.
pub const NOISE_FACTOR: f64 = 32.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub tensor: ParamId,
    pub index: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
}

impl Probe {
    pub fn abs_error(&self) -> f64 {
        (self.analytic - self.numeric).abs()
    }

    fn scale(&self) -> f64 {
        self.analytic
            .abs()
            .max(self.numeric.abs())
            .max(REL_DENOM_FLOOR)
    }

    /// `|a - n| / max(|a|, |n|, 1e-12)`.
    pub fn rel_error(&self) -> f64 {
        self.abs_error() / self.scale()
    }

    /// Relative error left after discounting `noise_floor` of absolute error.
    pub fn rel_error_beyond(&self, noise_floor: f64) -> f64 {
        (self.abs_error() - noise_floor).max(0.0) / self.scale()
    }
}

/// Probe results plus the absolute rounding floor of the central differences
/// that produced them.
#[derive(Debug, Clone, Default)]
pub struct GradCheckReport {
    pub probes: Vec<Probe>,
    pub noise_floor: f64,
}

impl GradCheckReport {
    /// Plain relative error over all probes. Dominated by rounding noise on
    /// coordinates whose gradient is within a few decades of `noise_floor`.
    pub fn raw_max_rel_error(&self) -> f64 {
        self.probes.iter().map(Probe::rel_error).fold(0.0, f64::max)
    }

    /// Largest relative error once `noise_floor` is discounted, i.e. the
    /// smallest `tol` with `|a - n| <= noise_floor + tol * max(|a|, |n|)`
    /// on every probe.
    pub fn max_rel_error(&self) -> f64 {
        self.probes
            .iter()
            .map(|p| p.rel_error_beyond(self.noise_floor))
            .fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error() < tol
    }

    pub fn worst(&self) -> Option<&Probe> {
        self.probes.iter().max_by(|a, b| {
            a.rel_error_beyond(self.noise_floor)
                .total_cmp(&b.rel_error_beyond(self.noise_floor))
        })
    }

    /// Probes whose whole discrepancy is within the rounding floor.
    pub fn within_noise(&self) -> usize {
        self.probes
            .iter()
            .filter(|p| p.abs_error() <= self.noise_floor)
            .count()
    }

    pub fn is_empty(&self) -> bool {
        self.probes.is_empty()
    }
}

/// Compares analytic gradients against `(L(p+eps) - L(p-eps)) / 2eps` on
/// `n_probe` random coordinates.
///
/// `loss_fn(params, Some(grads))` must return the loss and accumulate the
/// analytic gradient into `grads`; with `None` it only returns the loss.
/// Probes cycle through the trainable tensors so that every tensor is
/// exercised, with a uniformly random coordinate inside each.
pub fn finite_diff_check<F>(
    mut loss_fn: F,
    params: &ParameterStore,
    eps: f64,
    n_probe: usize,
    rng: &mut Rng,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParameterStore, Option<&mut Gradients>) -> Result<f64>,
{
    if n_probe == 0 {
        return Ok(GradCheckReport::default());
    }
    let mut grads = Gradients::zeros_like(params);
    let base = loss_fn(params, Some(&mut grads))?;
    let noise_floor = NOISE_FACTOR * f64::EPSILON * base.abs().max(1.0) / eps;

    let tensors: Vec<ParamId> = params.trainable().collect();
    let mut work = params.clone();
    let mut probes = Vec::with_capacity(n_probe);
    for k in 0..n_probe {
        let id = tensors[k % tensors.len()];
        let (rows, cols) = params.get(id).dim();
        let index = (rng.random_range(0..rows), rng.random_range(0..cols));
        let original = params.get(id)[index];

        work.get_mut(id)[index] = original + eps;
        let plus = loss_fn(&work, None)?;
        work.get_mut(id)[index] = original - eps;
        let minus = loss_fn(&work, None)?;
        work.get_mut(id)[index] = original;

        probes.push(Probe {
            tensor: id,
            index,
            analytic: grads.get(id)[index],
            numeric: (plus - minus) / (2.0 * eps),
        });
    }
    Ok(GradCheckReport {
        probes,
        noise_floor,
    })
}
