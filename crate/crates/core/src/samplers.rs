//! Stochastic-gradient Langevin and Hamiltonian transition kernels, and the
//! adaptive chain that interleaves them with latent-variable updates.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Minibatch};
use crate::error::{Result, SsglError};
use crate::latent::{LatentProposal, LatentState};
use crate::models::Model;
use crate::params::ParamVector;
use crate::prior::{q1_grad_into, sa_update_latent, update_rho, PriorConfig};
use crate::pruning::{prune_bottom, PruneSchedule};
use crate::real::Real;
use crate::schedule::Schedules;

/// Chains abort once any coordinate exceeds this magnitude.
pub const DIVERGENCE_BOUND: f64 = 1e10;

fn check_grad<T: Real>(grad: &[T]) -> Result<()> {
    match grad.iter().position(|g| !g.is_finite()) {
        Some(i) => Err(SsglError::NonFinite(format!("gradient coordinate {i}"))),
        None => Ok(()),
    }
}

/// One Langevin step: `beta += eps * grad + N(0, 2 eps / tau)`.
///
/// An infinite `tau` disables the noise, leaving plain gradient ascent.
/// Masked coordinates stay at zero.
pub fn sgld_step<T: Real, R: Rng + ?Sized>(
    beta: &mut ParamVector<T>,
    grad: &[T],
    eps: T,
    tau: T,
    rng: &mut R,
) -> Result<()> {
    if !(eps > T::zero() && tau > T::zero()) {
        return Err(SsglError::Domain(format!("sgld needs eps > 0 and tau > 0, got eps = {eps}, tau = {tau}")));
    }
    if grad.len() != beta.len() {
        return Err(SsglError::Shape("gradient length differs from parameters".into()));
    }
    check_grad(grad)?;
    let noise_sd = if tau.is_finite() { (T::lit(2.0) * eps / tau).sqrt() } else { T::zero() };
    let values = beta.values_mut();
    if noise_sd > T::zero() {
        for (b, &g) in values.iter_mut().zip(grad) {
            *b = *b + eps * g + noise_sd * T::standard_normal(rng);
        }
    } else {
        for (b, &g) in values.iter_mut().zip(grad) {
            *b = *b + eps * g;
        }
    }
    beta.apply_mask();
    Ok(())
}

/// Momentum, friction `C` and gradient-noise estimate `B_hat` of SGHMC.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SghmcState<T> {
    pub momentum: Vec<T>,
    pub friction: T,
    pub noise_estimate: T,
}

impl<T: Real> SghmcState<T> {
    pub fn new(len: usize, friction: T, noise_estimate: T) -> Result<Self> {
        if !(friction > T::zero() && noise_estimate >= T::zero() && noise_estimate <= friction) {
            return Err(SsglError::Config(format!(
                "sghmc needs friction > 0 and 0 <= B_hat <= friction, got C = {friction}, B_hat = {noise_estimate}"
            )));
        }
        Ok(Self { momentum: vec![T::zero(); len], friction, noise_estimate })
    }

    /// Friction matching an SGD-with-momentum setting: with step `eps`,
    /// momentum coefficient `mu = 1 - eps * C`.
    pub fn friction_for_momentum(eps: T, momentum: T) -> T {
        (T::one() - momentum) / eps
    }
}

/// One discretized SGHMC step:
/// `r' = (1 - eps C) r + eps grad + N(0, 2 (C - B_hat) eps / tau)`, `beta' = beta + eps r'`.
///
/// In the SGD-with-momentum parameterization `v = eps r` this reads
/// `v' = mu v + eps^2 grad + noise`, `beta' = beta + v'` with `mu = 1 - eps C`.
pub fn sghmc_step<T: Real, R: Rng + ?Sized>(
    beta: &mut ParamVector<T>,
    state: &mut SghmcState<T>,
    grad: &[T],
    eps: T,
    tau: T,
    rng: &mut R,
) -> Result<()> {
    if !(eps > T::zero() && tau > T::zero()) {
        return Err(SsglError::Domain(format!("sghmc needs eps > 0 and tau > 0, got eps = {eps}, tau = {tau}")));
    }
    if grad.len() != beta.len() || state.momentum.len() != beta.len() {
        return Err(SsglError::Shape("sghmc buffers differ in length from parameters".into()));
    }
    check_grad(grad)?;
    let mu = T::one() - eps * state.friction;
    if mu < T::zero() {
        return Err(SsglError::Stability(format!(
            "eps * C = {} exceeds 1; reduce the step or the friction",
            eps * state.friction
        )));
    }
    let excess = state.friction - state.noise_estimate;
    let noise_sd =
        if tau.is_finite() && excess > T::zero() { (T::lit(2.0) * excess * eps / tau).sqrt() } else { T::zero() };
    let (values, mask) = beta.values_and_mask_mut();
    for i in 0..values.len() {
        let noise = if noise_sd > T::zero() { noise_sd * T::standard_normal(rng) } else { T::zero() };
        if !mask[i] {
            state.momentum[i] = T::zero();
            continue;
        }
        let r = mu * state.momentum[i] + eps * grad[i] + noise;
        state.momentum[i] = r;
        values[i] = values[i] + eps * r;
    }
    beta.apply_mask();
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "SGLD")]
    Sgld,
    #[serde(rename = "SGLD-SA")]
    SgldSa,
    #[serde(rename = "SGLD-EM")]
    SgldEm,
    #[serde(rename = "SGHMC")]
    Sghmc,
    #[serde(rename = "SGHMC-SA")]
    SghmcSa,
    #[serde(rename = "SGHMC-EM")]
    SghmcEm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kernel {
    Langevin,
    Hamiltonian,
}

/// How the latent variables evolve during a chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LatentMode {
    /// Held at their initial values.
    Fixed,
    /// Blended with the stochastic-approximation step.
    StochasticApproximation,
    /// Replaced by the proposal every iteration (step fixed at 1).
    Em,
}

impl Variant {
    pub const ALL: [Variant; 6] =
        [Variant::Sgld, Variant::SgldSa, Variant::SgldEm, Variant::Sghmc, Variant::SghmcSa, Variant::SghmcEm];

    pub fn kernel(self) -> Kernel {
        match self {
            Variant::Sgld | Variant::SgldSa | Variant::SgldEm => Kernel::Langevin,
            _ => Kernel::Hamiltonian,
        }
    }

    pub fn latent_mode(self) -> LatentMode {
        match self {
            Variant::Sgld | Variant::Sghmc => LatentMode::Fixed,
            Variant::SgldSa | Variant::SghmcSa => LatentMode::StochasticApproximation,
            Variant::SgldEm | Variant::SghmcEm => LatentMode::Em,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Sgld => "SGLD",
            Variant::SgldSa => "SGLD-SA",
            Variant::SgldEm => "SGLD-EM",
            Variant::Sghmc => "SGHMC",
            Variant::SghmcSa => "SGHMC-SA",
            Variant::SghmcEm => "SGHMC-EM",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name().eq_ignore_ascii_case(s.trim()))
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Starting value of the parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BetaInit {
    Zeros,
    /// Independent `N(0, sd^2)` draws from the chain stream.
    Normal { sd: f64 },
}

/// Starting value of `rho` (the kappas follow from it).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RhoInit {
    Constant { value: f64 },
    /// Slab probabilities of the initial parameters under the initial
    /// `sigma` and `delta`.
    FromBeta,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    pub beta: BetaInit,
    pub rho: RhoInit,
    pub sigma: f64,
    pub delta: f64,
}

impl InitConfig {
    /// Draws the initial parameters and builds the matching latent state.
    pub fn materialize<T: Real, R: Rng + ?Sized>(
        &self,
        model: &Model,
        cfg: &PriorConfig<T>,
        rng: &mut R,
    ) -> Result<(ParamVector<T>, LatentState<T>)> {
        if !(self.sigma > 0.0 && self.delta > 0.0 && self.delta < 1.0) {
            return Err(SsglError::Config(format!(
                "initial sigma must be positive and delta in (0, 1); got sigma = {}, delta = {}",
                self.sigma, self.delta
            )));
        }
        let mut beta = ParamVector::zeros(model.layout()?);
        if let BetaInit::Normal { sd } = self.beta {
            let sd = T::lit(sd);
            beta.values_mut().iter_mut().for_each(|b| *b = sd * T::standard_normal(rng));
        }
        let (sigma, delta) = (T::lit(self.sigma), T::lit(self.delta));
        let mut latent = LatentState::uniform(beta.layout(), T::zero(), sigma, delta, cfg);
        match self.rho {
            RhoInit::Constant { value } => {
                if !(0.0..=1.0).contains(&value) {
                    return Err(SsglError::Config(format!("initial rho must lie in [0, 1], got {value}")));
                }
                latent = LatentState::uniform(beta.layout(), T::lit(value), sigma, delta, cfg);
            }
            RhoInit::FromBeta => {
                for (slice, layer) in beta.sparse_slices().zip(latent.layers.iter_mut()) {
                    layer.rho = update_rho(slice, sigma, delta, cfg)?;
                    let (k0, k1) = crate::prior::update_kappa(&layer.rho, cfg)?;
                    layer.kappa0 = k0;
                    layer.kappa1 = k1;
                }
            }
        }
        Ok((beta, latent))
    }
}

/// Friction settings for the Hamiltonian kernel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SghmcParams {
    pub friction: f64,
    #[serde(default)]
    pub noise_estimate: f64,
}

/// Everything a chain needs besides the data and the random stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub variant: Variant,
    pub iters: u64,
    pub batch_size: usize,
    pub schedules: Schedules,
    pub init: InitConfig,
    #[serde(default)]
    pub sghmc: Option<SghmcParams>,
    #[serde(default)]
    pub prune: Option<PruneSchedule>,
    /// Coordinates whose values are written to the trace records.
    #[serde(default)]
    pub traced: Vec<usize>,
    /// Keep every retained sample (needed for posterior-predictive averages).
    #[serde(default = "default_true")]
    pub keep_samples: bool,
}

fn default_true() -> bool {
    true
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedules.validate()?;
        if self.batch_size == 0 {
            return Err(SsglError::Config("batch size must be positive".into()));
        }
        if self.variant.kernel() == Kernel::Hamiltonian && self.sghmc.is_none() {
            return Err(SsglError::Config(format!("{} needs `sghmc` friction settings", self.variant)));
        }
        if let Some(p) = &self.prune {
            p.validate()?;
        }
        Ok(())
    }
}

/// A periodic record of traced coordinates and the global latent scalars.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord<T> {
    pub iteration: u64,
    pub coords: Vec<T>,
    pub sigma: T,
    pub deltas: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainTrace<T> {
    /// Retained post-burn-in samples (empty when `keep_samples` is off).
    pub samples: Vec<Vec<T>>,
    /// Running mean of the retained samples.
    pub mean: Vec<T>,
    pub retained: usize,
    pub iterations: u64,
    pub records: Vec<TraceRecord<T>>,
    pub final_beta: ParamVector<T>,
    pub final_latent: LatentState<T>,
}

impl<T: Real> ChainTrace<T> {
    fn new(beta: &ParamVector<T>, latent: &LatentState<T>) -> Self {
        Self {
            samples: Vec::new(),
            mean: vec![T::zero(); beta.len()],
            retained: 0,
            iterations: 0,
            records: Vec::new(),
            final_beta: beta.clone(),
            final_latent: latent.clone(),
        }
    }

    fn retain(&mut self, values: &[T], keep: bool) {
        self.retained += 1;
        let w = T::one() / T::lit(self.retained as f64);
        for (m, &v) in self.mean.iter_mut().zip(values) {
            *m = *m + (v - *m) * w;
        }
        if keep {
            self.samples.push(values.to_vec());
        }
    }

    fn record(&mut self, iteration: u64, traced: &[usize], beta: &ParamVector<T>, latent: &LatentState<T>) {
        self.records.push(TraceRecord {
            iteration,
            coords: traced.iter().map(|&i| beta.values()[i]).collect(),
            sigma: latent.sigma,
            deltas: latent.layers.iter().map(|l| l.delta).collect(),
        });
    }
}

/// Number of samples retained after `k` iterations.
pub fn retained_count(k: u64, burn_in: u64, thinning: u64) -> u64 {
    k.saturating_sub(burn_in) / thinning.max(1)
}

/// Runs one chain: minibatch gradient of `Q1`, a sampler step, the latent
/// update for the adaptive variants, optional pruning, and thinned recording.
pub fn run_chain<T: Real, R: Rng + ?Sized>(
    model: &Model,
    data: &Dataset<T>,
    prior: &PriorConfig<T>,
    cfg: &ChainConfig,
    rng: &mut R,
) -> Result<ChainTrace<T>> {
    run_chain_observed(model, data, prior, cfg, rng, |_, _, _| Ok(()))
}

/// [`run_chain`] with a callback after every iteration, given the iteration
/// index and the state at the end of it. An error from the callback stops
/// the chain and is returned.
pub fn run_chain_observed<T, R, F>(
    model: &Model,
    data: &Dataset<T>,
    prior: &PriorConfig<T>,
    cfg: &ChainConfig,
    rng: &mut R,
    mut observe: F,
) -> Result<ChainTrace<T>>
where
    T: Real,
    R: Rng + ?Sized,
    F: FnMut(u64, &ParamVector<T>, &LatentState<T>) -> Result<()>,
{
    cfg.validate()?;
    prior.validate()?;
    if data.dim() != model.input_dim() {
        return Err(SsglError::Shape(format!("model expects {} features, data has {}", model.input_dim(), data.dim())));
    }
    if let Some(&bad) = cfg.traced.iter().find(|&&i| i >= model.num_params()) {
        return Err(SsglError::Config(format!("traced coordinate {bad} out of range")));
    }
    let (mut beta, mut latent) = cfg.init.materialize(model, prior, rng)?;
    let mut trace = ChainTrace::new(&beta, &latent);
    trace.record(0, &cfg.traced, &beta, &latent);
    if cfg.iters == 0 {
        trace.retain(&beta.values().to_vec(), true);
        return Ok(trace);
    }

    let mut hmc = match (cfg.variant.kernel(), cfg.sghmc) {
        (Kernel::Hamiltonian, Some(p)) => {
            Some(SghmcState::new(beta.len(), T::lit(p.friction), T::lit(p.noise_estimate))?)
        }
        _ => None,
    };
    let mode = cfg.variant.latent_mode();
    let mut grad = vec![T::zero(); beta.len()];
    let mut scratch = LatentProposal { layers: latent.layers.clone(), sigma: latent.sigma };
    let sched = &cfg.schedules;

    for k in 1..=cfg.iters {
        let idx = data.sample_indices(cfg.batch_size, rng);
        let batch = Minibatch::new(data, &idx);
        let diverged = |e: SsglError| SsglError::Diverged { iteration: k, detail: e.to_string() };

        q1_grad_into(&beta, &latent, &batch, model, prior, &mut grad).map_err(diverged)?;
        let eps = T::lit(sched.lr.at(k));
        let tau = T::lit(sched.inv_temp.at(k));
        match hmc.as_mut() {
            Some(state) => sghmc_step(&mut beta, state, &grad, eps, tau, rng),
            None => sgld_step(&mut beta, &grad, eps, tau, rng),
        }
        .map_err(|e| match e {
            SsglError::NonFinite(_) => diverged(e),
            other => other,
        })?;
        if !beta.all_finite() || beta.max_abs() > T::lit(DIVERGENCE_BOUND) {
            return Err(SsglError::Diverged {
                iteration: k,
                detail: format!("max |beta| = {} exceeds {DIVERGENCE_BOUND:e}", beta.max_abs()),
            });
        }

        if mode != LatentMode::Fixed {
            let omega = match mode {
                LatentMode::Em => T::one(),
                _ => T::lit(sched.sa_step.at(k + 1)),
            };
            sa_update_latent(&beta, &mut latent, &batch, model, prior, omega, &mut scratch).map_err(diverged)?;
        }

        if let Some(p) = &cfg.prune {
            if p.is_event(k) {
                prune_bottom(&mut beta, p.sparse_rate(k), p.per_layer)?;
            }
        }

        observe(k, &beta, &latent)?;
        if k % sched.thinning == 0 {
            trace.record(k, &cfg.traced, &beta, &latent);
        }
        if k > sched.burn_in && (k - sched.burn_in) % sched.thinning == 0 {
            trace.retain(beta.values(), cfg.keep_samples);
        }
    }
    trace.iterations = cfg.iters;
    trace.final_beta = beta;
    trace.final_latent = latent;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Layout;
    use crate::rng::stream_rng;

    fn params(v: Vec<f64>) -> ParamVector<f64> {
        ParamVector::from_values(Layout::single_sparse(v.len()).unwrap(), v).unwrap()
    }

    #[test]
    fn sgld_without_noise_is_gradient_ascent() {
        let mut p = params(vec![1.0, 2.0]);
        sgld_step(&mut p, &[1.0, -1.0], 0.1, f64::INFINITY, &mut stream_rng(0, 1)).unwrap();
        assert_eq!(p.values(), &[1.1, 1.9]);
    }

    #[test]
    fn sgld_tiny_step_moves_by_noise_scale() {
        let mut p = params(vec![0.0; 1000]);
        let eps = 1e-30;
        sgld_step(&mut p, &vec![0.0; 1000], eps, 1.0, &mut stream_rng(0, 1)).unwrap();
        let rms = (p.values().iter().map(|v| v * v).sum::<f64>() / 1000.0).sqrt();
        let scale = (2.0 * eps).sqrt();
        assert!(rms > 0.8 * scale && rms < 1.2 * scale, "rms {rms} vs {scale}");
    }

    #[test]
    fn sgld_rejects_nonfinite_gradient_and_bad_eps() {
        let mut p = params(vec![0.0]);
        let mut rng = stream_rng(0, 1);
        assert!(matches!(sgld_step(&mut p, &[f64::NAN], 0.1, 1.0, &mut rng), Err(SsglError::NonFinite(_))));
        assert!(sgld_step(&mut p, &[0.0], 0.0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn sghmc_fixed_point_without_noise() {
        let mut p = params(vec![0.5, -0.5]);
        let mut s = SghmcState::new(2, 1.0, 0.0).unwrap();
        sghmc_step(&mut p, &mut s, &[0.0, 0.0], 0.1, f64::INFINITY, &mut stream_rng(0, 1)).unwrap();
        assert_eq!(p.values(), &[0.5, -0.5]);
        assert_eq!(s.momentum, vec![0.0, 0.0]);
    }

    #[test]
    fn sghmc_full_friction_resets_momentum() {
        let mut p = params(vec![0.0]);
        let mut s = SghmcState::new(1, 10.0, 0.0).unwrap();
        s.momentum[0] = 5.0;
        sghmc_step(&mut p, &mut s, &[2.0], 0.1, f64::INFINITY, &mut stream_rng(0, 1)).unwrap();
        assert!((s.momentum[0] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn sghmc_rejects_step_beyond_friction() {
        let mut p = params(vec![0.0]);
        let mut s = SghmcState::new(1, 20.0, 0.0).unwrap();
        let r = sghmc_step(&mut p, &mut s, &[0.0], 0.1, 1.0, &mut stream_rng(0, 1));
        assert!(matches!(r, Err(SsglError::Stability(_))));
    }

    #[test]
    fn sghmc_with_noise_estimate_equal_to_friction_is_deterministic() {
        let mut a = params(vec![0.3]);
        let mut sa = SghmcState::new(1, 2.0, 2.0).unwrap();
        sghmc_step(&mut a, &mut sa, &[1.0], 0.1, 1.0, &mut stream_rng(0, 1)).unwrap();
        let mut b = params(vec![0.3]);
        let mut sb = SghmcState::new(1, 2.0, 2.0).unwrap();
        sghmc_step(&mut b, &mut sb, &[1.0], 0.1, f64::INFINITY, &mut stream_rng(9, 9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn masked_coordinates_stay_zero_in_both_kernels() {
        let mut rng = stream_rng(3, 1);
        let mut p = params(vec![1.0, 1.0, 1.0]);
        p.set_mask(vec![true, false, true]).unwrap();
        let mut s = SghmcState::new(3, 1.0, 0.0).unwrap();
        for _ in 0..100 {
            sgld_step(&mut p, &[1.0, 1.0, 1.0], 0.01, 1.0, &mut rng).unwrap();
            sghmc_step(&mut p, &mut s, &[1.0, 1.0, 1.0], 0.01, 1.0, &mut rng).unwrap();
            assert_eq!(p.values()[1], 0.0);
            assert_eq!(s.momentum[1], 0.0);
        }
    }

    #[test]
    fn retained_count_formula() {
        assert_eq!(retained_count(1000, 500, 100), 5);
        assert_eq!(retained_count(400, 500, 100), 0);
        assert_eq!(retained_count(599, 500, 100), 0);
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(Variant::parse(v.name()), Some(v));
        }
        assert_eq!(Variant::parse("sgld-sa"), Some(Variant::SgldSa));
        assert_eq!(Variant::parse("nope"), None);
    }
}
