//! Latent variables of the spike-and-slab prior that are optimized online
//! rather than sampled: slab-membership probabilities `rho`, the expected
//! penalties `kappa0` / `kappa1`, the per-layer inclusion rate `delta`, and the
//! global scale `sigma`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SsglError};
use crate::params::Layout;
use crate::prior::PriorConfig;
use crate::real::Real;

/// Lower clamp for `delta`; the upper clamp is `1 - DELTA_MIN`.
pub const DELTA_MIN: f64 = 1e-6;

/// Latent variables of one sparse layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerLatent<T> {
    pub rho: Vec<T>,
    pub kappa0: Vec<T>,
    pub kappa1: Vec<T>,
    pub delta: T,
}

impl<T: Real> LayerLatent<T> {
    /// Layer state with every `rho` set to `rho` and consistent kappas.
    pub fn uniform(len: usize, rho: T, delta: T, cfg: &PriorConfig<T>) -> Self {
        Self {
            rho: vec![rho; len],
            kappa0: vec![(T::one() - rho) / cfg.v0; len],
            kappa1: vec![rho / cfg.v1; len],
            delta,
        }
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }
}

/// The full latent state `(rho, kappa, sigma, delta)` of one chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentState<T> {
    /// One entry per sparse layer, in layout order.
    pub layers: Vec<LayerLatent<T>>,
    pub sigma: T,
}

/// EM-optimal latent values given the current parameters; blended into the
/// state with the stochastic-approximation step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentProposal<T> {
    pub layers: Vec<LayerLatent<T>>,
    pub sigma: T,
}

impl<T: Real> LatentState<T> {
    /// State with a uniform `rho` for every sparse coordinate.
    pub fn uniform(layout: &Layout, rho: T, sigma: T, delta: T, cfg: &PriorConfig<T>) -> Self {
        Self {
            layers: layout.sparse_layers().map(|l| LayerLatent::uniform(l.len, rho, delta, cfg)).collect(),
            sigma,
        }
    }

    pub fn from_proposal(p: LatentProposal<T>) -> Self {
        Self { layers: p.layers, sigma: p.sigma }
    }

    /// Checks every bound the state must satisfy.
    pub fn check_bounds(&self, cfg: &PriorConfig<T>) -> Result<()> {
        check_layers(&self.layers, self.sigma, cfg)
    }

    /// Sum of sparse-layer widths covered by this state.
    pub fn sparse_len(&self) -> usize {
        self.layers.iter().map(LayerLatent::len).sum()
    }
}

impl<T: Real> LatentProposal<T> {
    pub fn check_bounds(&self, cfg: &PriorConfig<T>) -> Result<()> {
        check_layers(&self.layers, self.sigma, cfg)
    }
}

fn check_layers<T: Real>(layers: &[LayerLatent<T>], sigma: T, cfg: &PriorConfig<T>) -> Result<()> {
    let fail = |what: String| Err(SsglError::Internal(format!("latent bound violated: {what}")));
    if !(sigma > T::zero() && sigma.is_finite()) {
        return fail(format!("sigma = {sigma}"));
    }
    let k0_max = T::one() / cfg.v0;
    let k1_max = T::one() / cfg.v1;
    let d_min = T::lit(DELTA_MIN);
    for (l, layer) in layers.iter().enumerate() {
        if !(layer.delta >= d_min && layer.delta <= T::one() - d_min) {
            return fail(format!("delta[{l}] = {}", layer.delta));
        }
        for j in 0..layer.len() {
            let (r, k0, k1) = (layer.rho[j], layer.kappa0[j], layer.kappa1[j]);
            if !(r >= T::zero() && r <= T::one()) {
                return fail(format!("rho[{l}][{j}] = {r}"));
            }
            if !(k0 >= T::zero() && k0 <= k0_max) {
                return fail(format!("kappa0[{l}][{j}] = {k0}"));
            }
            if !(k1 >= T::zero() && k1 <= k1_max) {
                return fail(format!("kappa1[{l}][{j}] = {k1}"));
            }
        }
    }
    Ok(())
}
