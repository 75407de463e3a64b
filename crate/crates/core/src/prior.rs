//! Spike-and-slab Gaussian-Laplace prior: component densities, the adaptive
//! log-posterior `Q1` with its gradient, and the closed-form latent updates.
//!
//! For a sparse weight `beta` the prior mixes a Laplace spike with scale
//! `sigma * v0` and a Gaussian slab with variance `sigma^2 * v1`. The binary
//! membership is never sampled; only its conditional expectation `rho` is
//! tracked. Non-sparse weights get plain Gaussian decay with scale `sigma0`.

use serde::{Deserialize, Serialize};

use crate::data::Minibatch;
use crate::error::{domain, Result, SsglError};
use crate::latent::{LatentProposal, LatentState, LayerLatent, DELTA_MIN};
use crate::models::{Model, Task};
use crate::params::ParamVector;
use crate::real::{sign0, sigmoid, Real};

/// Second shape of the Beta prior on `delta`: either a fixed value or the
/// width of the sparse layer it belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BetaShape<T> {
    Fixed(T),
    LayerWidth(LayerWidth),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayerWidth {
    LayerWidth,
}

/// Fixed hyperparameters of the hierarchical prior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig<T> {
    /// Spike scale multiplier.
    pub v0: T,
    /// Slab variance multiplier.
    pub v1: T,
    /// Beta prior shapes on `delta`.
    pub a: T,
    pub b: BetaShape<T>,
    /// Inverse-gamma shape and scale on `sigma^2`.
    pub nu: T,
    pub lambda: T,
    /// Weight-decay scale for non-sparse layers.
    pub sigma0: T,
}

impl<T: Real> PriorConfig<T> {
    /// `v1 = 10`, `a = nu = lambda = 1`, `b = layer width`, `sigma0 = 1`.
    pub fn simulation(v0: T) -> Self {
        Self {
            v0,
            v1: T::lit(10.0),
            a: T::one(),
            b: BetaShape::LayerWidth(LayerWidth::LayerWidth),
            nu: T::one(),
            lambda: T::one(),
            sigma0: T::one(),
        }
    }

    /// `b` for a sparse layer of width `p_l`.
    pub fn b_for(&self, p_l: usize) -> T {
        match self.b {
            BetaShape::Fixed(b) => b,
            BetaShape::LayerWidth(_) => T::lit(p_l as f64),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [("v0", self.v0), ("v1", self.v1), ("a", self.a), ("nu", self.nu), ("lambda", self.lambda), ("sigma0", self.sigma0)];
        for (name, v) in fields {
            if !(v > T::zero() && v.is_finite()) {
                return Err(SsglError::Config(format!("prior `{name}` must be positive and finite, got {v}")));
            }
        }
        if let BetaShape::Fixed(b) = self.b {
            if !(b > T::zero() && b.is_finite()) {
                return Err(SsglError::Config(format!("prior `b` must be positive and finite, got {b}")));
            }
        }
        Ok(())
    }
}

/// `log[(1 / (2 scale)) exp(-|x| / scale)]`
pub fn laplace_log_density<T: Real>(x: T, scale: T) -> Result<T> {
    if !(scale > T::zero()) {
        return domain(format!("laplace scale must be positive, got {scale}"));
    }
    Ok(-(T::lit(2.0) * scale).ln() - x.abs() / scale)
}

/// Log-density of a zero-mean Gaussian with the given variance.
pub fn normal_log_density<T: Real>(x: T, variance: T) -> Result<T> {
    if !(variance > T::zero()) {
        return domain(format!("normal variance must be positive, got {variance}"));
    }
    Ok(-T::lit(0.5) * (T::lit(std::f64::consts::TAU) * variance).ln() - x * x / (T::lit(2.0) * variance))
}

fn check_sigma_delta<T: Real>(sigma: T, delta: T) -> Result<()> {
    if !(sigma > T::zero() && sigma.is_finite()) {
        return domain(format!("sigma must be positive, got {sigma}"));
    }
    if !(delta > T::zero() && delta < T::one()) {
        return domain(format!("delta must lie in (0, 1), got {delta}"));
    }
    Ok(())
}

/// Writes the slab-membership probabilities of one layer into `out`.
///
/// `rho = a / (a + b)` with `a` the slab density times `delta` and `b` the
/// spike density times `1 - delta`, evaluated as the logistic of
/// `log a - log b`.
pub fn update_rho_into<T: Real>(beta_l: &[T], sigma: T, delta: T, cfg: &PriorConfig<T>, out: &mut [T]) -> Result<()> {
    check_sigma_delta(sigma, delta)?;
    if out.len() != beta_l.len() {
        return Err(SsglError::Shape("rho buffer length differs from layer".into()));
    }
    let slab_var = sigma * sigma * cfg.v1;
    let spike_scale = sigma * cfg.v0;
    // log a - log b = offset - beta^2 / (2 slab_var) + |beta| / spike_scale
    let offset = -T::lit(0.5) * (T::lit(std::f64::consts::TAU) * slab_var).ln() + delta.ln()
        + (T::lit(2.0) * spike_scale).ln()
        - (-delta).ln_1p();
    let inv_two_var = T::one() / (T::lit(2.0) * slab_var);
    let inv_scale = T::one() / spike_scale;
    for (r, &b) in out.iter_mut().zip(beta_l) {
        if !b.is_finite() {
            return Err(SsglError::NonFinite(format!("beta = {b} in rho update")));
        }
        let log_odds = offset - b * b * inv_two_var + b.abs() * inv_scale;
        *r = sigmoid(log_odds);
    }
    Ok(())
}

pub fn update_rho<T: Real>(beta_l: &[T], sigma: T, delta: T, cfg: &PriorConfig<T>) -> Result<Vec<T>> {
    let mut out = vec![T::zero(); beta_l.len()];
    update_rho_into(beta_l, sigma, delta, cfg, &mut out)?;
    Ok(out)
}

/// Expected penalties `kappa0 = (1 - rho) / v0` and `kappa1 = rho / v1`.
pub fn update_kappa<T: Real>(rho_l: &[T], cfg: &PriorConfig<T>) -> Result<(Vec<T>, Vec<T>)> {
    let mut k0 = vec![T::zero(); rho_l.len()];
    let mut k1 = vec![T::zero(); rho_l.len()];
    update_kappa_into(rho_l, cfg, &mut k0, &mut k1)?;
    Ok((k0, k1))
}

pub fn update_kappa_into<T: Real>(rho_l: &[T], cfg: &PriorConfig<T>, kappa0: &mut [T], kappa1: &mut [T]) -> Result<()> {
    let inv_v0 = T::one() / cfg.v0;
    let inv_v1 = T::one() / cfg.v1;
    for ((&r, k0), k1) in rho_l.iter().zip(kappa0.iter_mut()).zip(kappa1.iter_mut()) {
        if !(r >= T::zero() && r <= T::one()) {
            return domain(format!("rho must lie in [0, 1], got {r}"));
        }
        *k0 = (T::one() - r) * inv_v0;
        *k1 = r * inv_v1;
    }
    Ok(())
}

/// Data-dependent input to the `sigma` update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SigmaData<T> {
    /// Minibatch sum of squared residuals, batch size `n`, and data size `N`.
    Regression { sse: T, batch: usize, total: usize },
    Classification,
}

impl<T: Real> SigmaData<T> {
    pub fn task(&self) -> Task {
        match self {
            SigmaData::Regression { .. } => Task::Regression,
            SigmaData::Classification => Task::Classification,
        }
    }
}

/// Coefficients of `-A log sigma - B / sigma - C / (2 sigma^2)`, the part of
/// `Q1` that depends on `sigma`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmaQuadratic<T> {
    pub a: T,
    pub b: T,
    pub c: T,
}

impl<T: Real> SigmaQuadratic<T> {
    /// Unique positive root of `-A s^2 + B s + C = 0`.
    pub fn positive_root(&self) -> Result<T> {
        if !(self.a > T::zero()) {
            return Err(SsglError::Internal(format!("sigma quadratic leading coefficient {} <= 0", self.a)));
        }
        let disc = self.b * self.b + T::lit(4.0) * self.a * self.c;
        if !(disc >= T::zero()) {
            return Err(SsglError::Internal(format!("negative discriminant {disc} in sigma update")));
        }
        let root = (self.b + disc.sqrt()) / (T::lit(2.0) * self.a);
        if !(root > T::zero() && root.is_finite()) {
            return Err(SsglError::Internal(format!("sigma update produced {root}")));
        }
        Ok(root)
    }
}

/// Assembles the `sigma` quadratic from the parameters, kappas and data term.
pub fn sigma_quadratic<T: Real>(
    beta: &ParamVector<T>,
    kappas: &[LayerLatent<T>],
    data: SigmaData<T>,
    cfg: &PriorConfig<T>,
) -> Result<SigmaQuadratic<T>> {
    let layout = beta.layout();
    if layout.num_sparse_layers() != kappas.len() {
        return Err(SsglError::Shape(format!(
            "{} sparse layers but {} kappa blocks",
            layout.num_sparse_layers(),
            kappas.len()
        )));
    }
    let mut l1 = T::zero();
    let mut quad = T::zero();
    for (layer, lat) in beta.sparse_slices().zip(kappas) {
        if layer.len() != lat.len() {
            return Err(SsglError::Shape("kappa block width differs from layer".into()));
        }
        for ((&b, &k0), &k1) in layer.iter().zip(&lat.kappa0).zip(&lat.kappa1) {
            l1 = l1 + k0 * b.abs();
            quad = quad + k1 * b * b;
        }
    }
    let p = T::lit(layout.sparse_len() as f64);
    let nu_lambda = cfg.nu * cfg.lambda;
    let base = p + cfg.nu + T::lit(2.0);
    let (a, c) = match data {
        SigmaData::Regression { sse, batch, total } => {
            if batch == 0 {
                return Err(SsglError::Shape("empty minibatch in sigma update".into()));
            }
            let scaled = T::lit(total as f64 / batch as f64) * sse;
            (T::lit(total as f64) + base, scaled + quad + nu_lambda)
        }
        SigmaData::Classification => (base, quad + nu_lambda),
    };
    Ok(SigmaQuadratic { a, b: l1, c })
}

/// Closed-form maximizer of `Q1` over `sigma`.
pub fn update_sigma<T: Real>(
    beta: &ParamVector<T>,
    kappas: &[LayerLatent<T>],
    data: SigmaData<T>,
    cfg: &PriorConfig<T>,
) -> Result<T> {
    sigma_quadratic(beta, kappas, data, cfg)?.positive_root()
}

/// Unclamped maximizer of `Q2` over `delta` for one layer.
pub fn delta_closed_form<T: Real>(rho_l: &[T], cfg: &PriorConfig<T>) -> Result<T> {
    let p_l = rho_l.len();
    let b = cfg.b_for(p_l);
    let denom = cfg.a + b + T::lit(p_l as f64) - T::lit(2.0);
    if !(denom > T::zero()) {
        return Err(SsglError::Config(format!("a + b + p_l - 2 = {denom} must be positive")));
    }
    let mass: T = rho_l.iter().copied().sum();
    Ok((mass + cfg.a - T::one()) / denom)
}

/// Closed-form `delta` update clamped to `[DELTA_MIN, 1 - DELTA_MIN]`.
pub fn update_delta<T: Real>(rho_l: &[T], cfg: &PriorConfig<T>) -> Result<T> {
    let lo = T::lit(DELTA_MIN);
    Ok(delta_closed_form(rho_l, cfg)?.max(lo).min(T::one() - lo))
}

/// `(1 - omega) * current + omega * proposal`, componentwise.
pub fn sa_blend<T: Real>(current: &LatentState<T>, proposal: &LatentProposal<T>, omega: T) -> Result<LatentState<T>> {
    let mut out = current.clone();
    sa_blend_in_place(&mut out, proposal, omega)?;
    Ok(out)
}

#[inline]
fn blend<T: Real>(c: T, p: T, omega: T) -> T {
    // The result of a convex combination must stay between its endpoints even
    // after rounding; omega = 1 reproduces the proposal exactly.
    let v = (T::one() - omega) * c + omega * p;
    v.max(c.min(p)).min(c.max(p))
}

pub fn sa_blend_in_place<T: Real>(state: &mut LatentState<T>, proposal: &LatentProposal<T>, omega: T) -> Result<()> {
    if !(omega > T::zero() && omega <= T::one()) {
        return domain(format!("sa step must lie in (0, 1], got {omega}"));
    }
    if state.layers.len() != proposal.layers.len() {
        return Err(SsglError::Shape("latent state and proposal have different layer counts".into()));
    }
    for (cur, prop) in state.layers.iter_mut().zip(&proposal.layers) {
        if cur.len() != prop.len() {
            return Err(SsglError::Shape("latent layer widths differ".into()));
        }
        for (c, &p) in cur.rho.iter_mut().zip(&prop.rho) {
            *c = blend(*c, p, omega);
        }
        for (c, &p) in cur.kappa0.iter_mut().zip(&prop.kappa0) {
            *c = blend(*c, p, omega);
        }
        for (c, &p) in cur.kappa1.iter_mut().zip(&prop.kappa1) {
            *c = blend(*c, p, omega);
        }
        cur.delta = blend(cur.delta, prop.delta, omega);
    }
    state.sigma = blend(state.sigma, proposal.sigma, omega);
    Ok(())
}

/// Computes the EM-optimal latent values at `beta` given the current state:
/// `rho` from `(beta, sigma, delta)`, kappas from that `rho`, `sigma` from
/// `beta` and those kappas, and `delta` from that `rho`.
pub fn propose_latent<T: Real>(
    beta: &ParamVector<T>,
    current: &LatentState<T>,
    batch: &Minibatch<'_, T>,
    model: &Model,
    cfg: &PriorConfig<T>,
) -> Result<LatentProposal<T>> {
    let mut proposal = LatentProposal { layers: current.layers.clone(), sigma: current.sigma };
    propose_latent_into(beta, current, batch, model, cfg, &mut proposal)?;
    Ok(proposal)
}

/// Allocation-free form of [`propose_latent`]; `out` must already have the
/// shape of `current`.
pub fn propose_latent_into<T: Real>(
    beta: &ParamVector<T>,
    current: &LatentState<T>,
    batch: &Minibatch<'_, T>,
    model: &Model,
    cfg: &PriorConfig<T>,
    out: &mut LatentProposal<T>,
) -> Result<()> {
    if out.layers.len() != current.layers.len() || current.layers.len() != beta.layout().num_sparse_layers() {
        return Err(SsglError::Shape("latent state does not match the sparse layout".into()));
    }
    for ((slice, cur), prop) in beta.sparse_slices().zip(&current.layers).zip(out.layers.iter_mut()) {
        update_rho_into(slice, current.sigma, cur.delta, cfg, &mut prop.rho)?;
        update_kappa_into(&prop.rho, cfg, &mut prop.kappa0, &mut prop.kappa1)?;
        prop.delta = update_delta(&prop.rho, cfg)?;
    }
    out.sigma = update_sigma(beta, &out.layers, sigma_data(beta, batch, model)?, cfg)?;
    Ok(())
}

fn sigma_data<T: Real>(beta: &ParamVector<T>, batch: &Minibatch<'_, T>, model: &Model) -> Result<SigmaData<T>> {
    Ok(match model.task() {
        Task::Regression => SigmaData::Regression {
            sse: model.sum_squared_residuals(beta.values(), batch)?,
            batch: batch.len(),
            total: batch.data.len(),
        },
        Task::Classification => SigmaData::Classification,
    })
}

/// Sequential stochastic-approximation update of the latent state in place.
///
/// Each quantity is proposed from the already-updated ones before it:
/// `rho` from `(beta, sigma, delta)`, then the kappas from the new `rho`,
/// `sigma` from `beta` and the new kappas, and `delta` from the new `rho`.
/// Every proposal is blended with step `omega`; `omega = 1` gives the EM
/// update. `scratch` holds the `rho` proposals and must match the layout.
pub fn sa_update_latent<T: Real>(
    beta: &ParamVector<T>,
    state: &mut LatentState<T>,
    batch: &Minibatch<'_, T>,
    model: &Model,
    cfg: &PriorConfig<T>,
    omega: T,
    scratch: &mut LatentProposal<T>,
) -> Result<()> {
    if !(omega > T::zero() && omega <= T::one()) {
        return domain(format!("sa step must lie in (0, 1], got {omega}"));
    }
    check_latent_shape(beta, state)?;
    if scratch.layers.len() != state.layers.len() || scratch.layers.iter().zip(&state.layers).any(|(s, c)| s.len() != c.len()) {
        return Err(SsglError::Shape("scratch latent does not match the sparse layout".into()));
    }
    let sigma = state.sigma;
    for ((slice, cur), prop) in beta.sparse_slices().zip(state.layers.iter_mut()).zip(scratch.layers.iter_mut()) {
        update_rho_into(slice, sigma, cur.delta, cfg, &mut prop.rho)?;
        for (c, &p) in cur.rho.iter_mut().zip(&prop.rho) {
            *c = blend(*c, p, omega);
        }
        update_kappa_into(&cur.rho, cfg, &mut prop.kappa0, &mut prop.kappa1)?;
        for (c, &p) in cur.kappa0.iter_mut().zip(&prop.kappa0) {
            *c = blend(*c, p, omega);
        }
        for (c, &p) in cur.kappa1.iter_mut().zip(&prop.kappa1) {
            *c = blend(*c, p, omega);
        }
    }
    let proposed = update_sigma(beta, &state.layers, sigma_data(beta, batch, model)?, cfg)?;
    state.sigma = blend(state.sigma, proposed, omega);
    for cur in state.layers.iter_mut() {
        let proposed = update_delta(&cur.rho, cfg)?;
        cur.delta = blend(cur.delta, proposed, omega);
    }
    Ok(())
}

/// The adaptive log-posterior `Q1` on a minibatch:
///
/// `(N/n) log p(B | beta) - sum_C beta^2 / (2 sigma0^2) - ((p + nu + 2)/2) log sigma^2
///  - sum_X [|beta| kappa0 / sigma + beta^2 kappa1 / (2 sigma^2)] - nu lambda / (2 sigma^2)`
///
/// with `p` the number of sparse parameters.
pub fn q1_log_posterior<T: Real>(
    beta: &ParamVector<T>,
    latent: &LatentState<T>,
    batch: &Minibatch<'_, T>,
    model: &Model,
    cfg: &PriorConfig<T>,
) -> Result<T> {
    let sigma = latent.sigma;
    if !(sigma > T::zero()) {
        return domain(format!("sigma must be positive, got {sigma}"));
    }
    check_latent_shape(beta, latent)?;
    let two = T::lit(2.0);
    let var = sigma * sigma;
    let loglik = batch.scale() * model.log_likelihood(beta.values(), batch, sigma)?;

    let dense: T = beta
        .layout()
        .dense_layers()
        .flat_map(|l| &beta.values()[l.range()])
        .map(|&b| b * b)
        .sum::<T>()
        / (two * cfg.sigma0 * cfg.sigma0);

    let mut sparse = T::zero();
    for (slice, lat) in beta.sparse_slices().zip(&latent.layers) {
        for ((&b, &k0), &k1) in slice.iter().zip(&lat.kappa0).zip(&lat.kappa1) {
            sparse = sparse + b.abs() * k0 / sigma + b * b * k1 / (two * var);
        }
    }
    let p = T::lit(beta.layout().sparse_len() as f64);
    let normalizer = (p + cfg.nu + two) / two * var.ln();
    Ok(loglik - dense - normalizer - sparse - cfg.nu * cfg.lambda / (two * var))
}

fn check_latent_shape<T: Real>(beta: &ParamVector<T>, latent: &LatentState<T>) -> Result<()> {
    let layout = beta.layout();
    if layout.num_sparse_layers() != latent.layers.len()
        || layout.sparse_layers().zip(&latent.layers).any(|(l, lat)| l.len != lat.len())
    {
        return Err(SsglError::Shape("latent state does not match the sparse layout".into()));
    }
    Ok(())
}

/// Gradient of [`q1_log_posterior`] with respect to `beta`. Masked
/// coordinates get zero; the Laplace term uses `sign(0) = 0`.
pub fn q1_grad_beta<T: Real>(
    beta: &ParamVector<T>,
    latent: &LatentState<T>,
    batch: &Minibatch<'_, T>,
    model: &Model,
    cfg: &PriorConfig<T>,
) -> Result<Vec<T>> {
    let mut grad = vec![T::zero(); beta.len()];
    q1_grad_into(beta, latent, batch, model, cfg, &mut grad)?;
    Ok(grad)
}

/// Writes the gradient of `Q1` into `grad` (overwriting it).
pub fn q1_grad_into<T: Real>(
    beta: &ParamVector<T>,
    latent: &LatentState<T>,
    batch: &Minibatch<'_, T>,
    model: &Model,
    cfg: &PriorConfig<T>,
    grad: &mut [T],
) -> Result<()> {
    let sigma = latent.sigma;
    if !(sigma > T::zero()) {
        return domain(format!("sigma must be positive, got {sigma}"));
    }
    check_latent_shape(beta, latent)?;
    grad.iter_mut().for_each(|g| *g = T::zero());
    model.accumulate_grad(beta.values(), batch, sigma, batch.scale(), grad)?;

    let values = beta.values();
    let inv_decay = T::one() / (cfg.sigma0 * cfg.sigma0);
    for layer in beta.layout().dense_layers() {
        for i in layer.range() {
            grad[i] = grad[i] - values[i] * inv_decay;
        }
    }
    let inv_sigma = T::one() / sigma;
    let inv_var = inv_sigma * inv_sigma;
    for (layer, lat) in beta.layout().sparse_layers().zip(&latent.layers) {
        let range = layer.range();
        let g = &mut grad[range.clone()];
        let b = &values[range];
        for j in 0..g.len() {
            g[j] = g[j] - lat.kappa0[j] * sign0(b[j]) * inv_sigma - lat.kappa1[j] * b[j] * inv_var;
        }
    }
    for (g, &keep) in grad.iter_mut().zip(beta.mask()) {
        if !keep {
            *g = T::zero();
        }
    }
    Ok(())
}
