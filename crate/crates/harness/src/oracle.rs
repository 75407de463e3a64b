//! Numerical self-checks run by `ssgl validate`: closed-form latent updates
//! against direct maximization, analytic gradients against finite
//! differences, and sampler noise against its target law.

use std::time::Instant;

use rand::Rng;
use ssgl::prior::{delta_closed_form, q1_grad_beta, q1_log_posterior, SigmaData};
use ssgl::rng::{stream_rng, ChainRng};
use ssgl::samplers::{sghmc_step, sgld_step};
use ssgl::{
    Activation, BetaShape, Dataset, LatentState, LayerLatent, Matrix, Minibatch, Model, ParamVector, PriorConfig,
    SghmcState, Targets,
};

use crate::error::{HarnessError, Result};

pub const ORACLES: [&str; 5] = ["sigma", "delta", "gradient", "noise", "harmonic"];

/// Signature of a `sigma` update, so a deliberately wrong one can be checked.
pub type SigmaUpdate = fn(&ParamVector, &[LayerLatent], SigmaData<f64>, &PriorConfig) -> ssgl::Result<f64>;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Clone, Copy)]
pub struct OracleSuite {
    pub seed: u64,
    pub sigma_update: SigmaUpdate,
}

impl Default for OracleSuite {
    fn default() -> Self {
        Self { seed: 0, sigma_update: ssgl::prior::update_sigma::<f64> }
    }
}

/// Maximizes a unimodal `f` on `[lo, hi]` by golden-section search.
pub fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iters {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    (lo + hi) / 2.0
}

fn normal(rng: &mut ChainRng) -> f64 {
    <f64 as ssgl::Real>::standard_normal(rng)
}

fn nonzero(rng: &mut ChainRng) -> f64 {
    let m = rng.random_range(0.05..1.5);
    if rng.random_bool(0.5) {
        m
    } else {
        -m
    }
}

fn random_prior(rng: &mut ChainRng) -> PriorConfig {
    PriorConfig {
        v0: rng.random_range(0.005..0.5),
        v1: rng.random_range(1.0..20.0),
        a: rng.random_range(1.0..5.0),
        b: BetaShape::Fixed(rng.random_range(1.5..50.0)),
        nu: rng.random_range(0.5..5.0),
        lambda: rng.random_range(0.5..5.0),
        sigma0: rng.random_range(0.5..3.0),
    }
}

fn random_latent(model: &Model, cfg: &PriorConfig, rng: &mut ChainRng) -> LatentState {
    let layout = model.layout().expect("valid model");
    let layers = layout
        .sparse_layers()
        .map(|l| {
            let rho: Vec<f64> = (0..l.len).map(|_| rng.random::<f64>()).collect();
            LayerLatent {
                kappa0: rho.iter().map(|r| (1.0 - r) / cfg.v0).collect(),
                kappa1: rho.iter().map(|r| r / cfg.v1).collect(),
                rho,
                delta: rng.random_range(0.05..0.95),
            }
        })
        .collect();
    LatentState { layers, sigma: rng.random_range(0.5..2.5) }
}

fn random_data(model: &Model, n: usize, rng: &mut ChainRng) -> Dataset {
    let p = model.input_dim();
    let x = Matrix::from_row_major(n, p, (0..n * p).map(|_| normal(rng)).collect()).expect("shape");
    let targets = match model.num_classes() {
        Some(k) => Targets::Class { labels: (0..n).map(|_| rng.random_range(0..k)).collect(), classes: k },
        None => Targets::Real((0..n).map(|_| 2.0 * normal(rng)).collect()),
    };
    Dataset::new(x, targets).expect("consistent data")
}

fn timed(name: &'static str, f: impl FnOnce() -> (bool, String)) -> OracleOutcome {
    let start = Instant::now();
    let (passed, detail) = f();
    OracleOutcome { name, passed, detail, seconds: start.elapsed().as_secs_f64() }
}

impl OracleSuite {
    /// Runs the named oracles (all when `only` is empty) in a fixed order.
    pub fn run(&self, only: &[String]) -> Result<Vec<OracleOutcome>> {
        if let Some(bad) = only.iter().find(|n| !ORACLES.contains(&n.as_str())) {
            return Err(HarnessError::Config(format!("unknown oracle `{bad}`; expected one of {}", ORACLES.join(", "))));
        }
        let wanted = |n: &str| only.is_empty() || only.iter().any(|o| o == n);
        let mut out = Vec::new();
        for name in ORACLES {
            if !wanted(name) {
                continue;
            }
            out.push(match name {
                "sigma" => timed(name, || self.sigma()),
                "delta" => timed(name, || self.delta()),
                "gradient" => timed(name, || self.gradient()),
                "noise" => timed(name, || self.noise()),
                _ => timed(name, || self.harmonic()),
            });
        }
        Ok(out)
    }

    /// Closed-form `sigma` against golden-section maximization of `Q1` over
    /// `log sigma`, 100 instances with p = 20; relative tolerance 1e-6.
    pub fn sigma(&self) -> (bool, String) {
        let mut rng = stream_rng(self.seed, 101);
        let mut worst = 0.0f64;
        for case in 0..100 {
            let n = rng.random_range(5..30);
            let model = Model::Linear { dim: 20 };
            let data = random_data(&model, n, &mut rng);
            let cfg = random_prior(&mut rng);
            let values = (0..20).map(|_| nonzero(&mut rng)).collect();
            let beta = ParamVector::from_values(model.layout().expect("valid"), values).expect("shape");
            let latent = random_latent(&model, &cfg, &mut rng);
            let size = rng.random_range(1..=n);
            let idx = data.sample_indices(size, &mut rng);
            let batch = Minibatch::new(&data, &idx);
            let eval = || -> ssgl::Result<(f64, f64)> {
                let sse = model.sum_squared_residuals(beta.values(), &batch)?;
                let closed = (self.sigma_update)(&beta, &latent.layers, SigmaData::Regression { sse, batch: size, total: n }, &cfg)?;
                let q1 = |s: f64| {
                    let mut l = latent.clone();
                    l.sigma = s;
                    q1_log_posterior(&beta, &l, &batch, &model, &cfg).unwrap_or(f64::NEG_INFINITY)
                };
                let numeric = golden_max(|ls| q1(ls.exp()), 1e-6f64.ln(), 1e3f64.ln(), 200).exp();
                Ok((closed, numeric))
            };
            match eval() {
                Ok((closed, numeric)) => {
                    let rel = ((closed - numeric) / numeric).abs();
                    worst = worst.max(if rel.is_nan() { f64::INFINITY } else { rel });
                }
                Err(e) => return (false, format!("case {case}: {e}")),
            }
        }
        (worst < 1e-6, format!("max relative error {worst:.2e} over 100 instances (tolerance 1e-6)"))
    }

    /// Closed-form `delta` against numeric maximization of `Q2`, 100
    /// instances with `p_l = 50`; absolute tolerance 1e-8.
    pub fn delta(&self) -> (bool, String) {
        let mut rng = stream_rng(self.seed, 102);
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let p = 50;
            let cfg = random_prior(&mut rng);
            let b = match cfg.b {
                BetaShape::Fixed(b) => b,
                BetaShape::LayerWidth(_) => p as f64,
            };
            let rho: Vec<f64> = (0..p).map(|_| rng.random::<f64>()).collect();
            let s: f64 = rho.iter().sum();
            let up = s + cfg.a - 1.0;
            let down = p as f64 + b - 1.0 - s;
            let q2 = |d: f64| up * d.ln() + down * (1.0 - d).ln();
            let rough = golden_max(q2, 1e-9, 1.0 - 1e-9, 200);
            // refine on a relative offset, where Q2 differences carry no cancellation
            let shift = |t: f64| up * t.ln_1p() + down * (-rough * t / (1.0 - rough)).ln_1p();
            let numeric = rough * (1.0 + golden_max(shift, -1e-4, 1e-4, 200));
            let closed = match delta_closed_form(&rho, &cfg) {
                Ok(d) => d,
                Err(e) => return (false, e.to_string()),
            };
            worst = worst.max((closed - numeric).abs());
        }
        (worst < 1e-8, format!("max absolute error {worst:.2e} over 100 instances (tolerance 1e-8)"))
    }

    /// Analytic `Q1` gradients against central differences (step 1e-6) for
    /// every model kind; relative tolerance 1e-5 with the scale floored at 1.
    pub fn gradient(&self) -> (bool, String) {
        let mut rng = stream_rng(self.seed, 103);
        let models = [
            Model::Linear { dim: 20 },
            Model::Logistic { dim: 20 },
            Model::Softmax { dim: 8, classes: 3 },
            Model::Mlp { dim: 6, hidden: 50, activation: Activation::Tanh },
        ];
        let mut worst = 0.0f64;
        for model in models {
            for _ in 0..5 {
                let data = random_data(&model, 10, &mut rng);
                let cfg = random_prior(&mut rng);
                let values = (0..model.num_params()).map(|_| nonzero(&mut rng)).collect();
                let beta = ParamVector::from_values(model.layout().expect("valid"), values).expect("shape");
                let latent = random_latent(&model, &cfg, &mut rng);
                let idx = data.all_indices();
                let batch = Minibatch::new(&data, &idx);
                let analytic = match q1_grad_beta(&beta, &latent, &batch, &model, &cfg) {
                    Ok(g) => g,
                    Err(e) => return (false, e.to_string()),
                };
                let h = 1e-6;
                let mut work = beta.clone();
                for (i, &a) in analytic.iter().enumerate() {
                    let x = beta.values()[i];
                    let mut at = |v: f64| {
                        work.values_mut()[i] = v;
                        q1_log_posterior(&work, &latent, &batch, &model, &cfg).unwrap_or(f64::NAN)
                    };
                    let fd = (at(x + h) - at(x - h)) / (2.0 * h);
                    work.values_mut()[i] = x;
                    let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1.0);
                    worst = worst.max(if rel.is_nan() { f64::INFINITY } else { rel });
                }
            }
        }
        (worst < 1e-5, format!("max relative error {worst:.2e} over 4 model kinds (tolerance 1e-5)"))
    }

    /// SGLD increments with zero gradient: variance within 5% of `2 eps / tau`.
    pub fn noise(&self) -> (bool, String) {
        let mut rng = stream_rng(self.seed, 104);
        let (eps, tau, steps) = (1e-3, 2.0, 100_000);
        let layout = ssgl::Layout::single_sparse(1).expect("layout");
        let mut beta = ParamVector::zeros(layout);
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..steps {
            let before = beta.values()[0];
            if let Err(e) = sgld_step(&mut beta, &[0.0], eps, tau, &mut rng) {
                return (false, e.to_string());
            }
            let d = beta.values()[0] - before;
            sum += d;
            sq += d * d;
        }
        let n = steps as f64;
        let var = (sq - sum * sum / n) / (n - 1.0);
        let target = 2.0 * eps / tau;
        let rel = (var / target - 1.0).abs();
        (rel < 0.05, format!("increment variance {var:.4e} vs {target:.4e} (relative {rel:.3}, tolerance 0.05)"))
    }

    /// SGHMC on the potential `-beta^2 / 2` at `tau = 1`: stationary variance
    /// within 10% of 1 over 1e6 steps.
    pub fn harmonic(&self) -> (bool, String) {
        let mut rng = stream_rng(self.seed, 105);
        let (eps, steps, burn) = (0.05, 1_000_000, 10_000);
        let layout = ssgl::Layout::single_sparse(1).expect("layout");
        let mut beta = ParamVector::zeros(layout);
        let mut state = match SghmcState::new(1, 1.0, 0.0) {
            Ok(s) => s,
            Err(e) => return (false, e.to_string()),
        };
        let (mut sum, mut sq, mut n) = (0.0, 0.0, 0.0);
        for k in 0..steps + burn {
            let g = [-beta.values()[0]];
            if let Err(e) = sghmc_step(&mut beta, &mut state, &g, eps, 1.0, &mut rng) {
                return (false, e.to_string());
            }
            if k >= burn {
                let b = beta.values()[0];
                sum += b;
                sq += b * b;
                n += 1.0;
            }
        }
        let var = sq / n - (sum / n) * (sum / n);
        let rel = (var - 1.0).abs();
        (rel < 0.1, format!("stationary variance {var:.4} vs 1 (tolerance 0.1)"))
    }
}
