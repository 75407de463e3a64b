#![allow(dead_code)]

use rand::Rng;
use ssgl::data::{Dataset, Matrix, Targets};
use ssgl::latent::{LatentState, LayerLatent};
use ssgl::params::ParamVector;
use ssgl::prior::PriorConfig;
use ssgl::rng::{stream_rng, ChainRng};
use ssgl::{BetaShape, Model};

pub fn rng(seed: u64) -> ChainRng {
    stream_rng(seed, 99)
}

/// Maximizes a unimodal `f` on `[lo, hi]`.
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

/// Central finite difference of `f` along every coordinate of `x`.
pub fn fd_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut work = x.to_vec();
    (0..x.len())
        .map(|i| {
            work[i] = x[i] + h;
            let up = f(&work);
            work[i] = x[i] - h;
            let down = f(&work);
            work[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Relative error with the denominator floored at 1.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

pub fn normal(rng: &mut impl Rng) -> f64 {
    rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng)
}

/// Value drawn away from zero: sign * U(0.05, 1.5).
pub fn nonzero(rng: &mut impl Rng) -> f64 {
    let m = rng.random_range(0.05..1.5);
    if rng.random_bool(0.5) {
        m
    } else {
        -m
    }
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix<f64> {
    Matrix::from_row_major(rows, cols, (0..rows * cols).map(|_| normal(rng)).collect()).unwrap()
}

pub fn random_regression(n: usize, p: usize, rng: &mut impl Rng) -> Dataset<f64> {
    let x = random_matrix(n, p, rng);
    let y = (0..n).map(|_| 2.0 * normal(rng)).collect();
    Dataset::new(x, Targets::Real(y)).unwrap()
}

pub fn random_classes(n: usize, p: usize, classes: usize, rng: &mut impl Rng) -> Dataset<f64> {
    let x = random_matrix(n, p, rng);
    let labels = (0..n).map(|_| rng.random_range(0..classes)).collect();
    Dataset::new(x, Targets::Class { labels, classes }).unwrap()
}

pub fn random_prior(rng: &mut impl Rng) -> PriorConfig<f64> {
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

/// Latent state with independent uniform `rho` and matching kappas.
pub fn random_latent(model: &Model, cfg: &PriorConfig<f64>, rng: &mut impl Rng) -> LatentState<f64> {
    let layout = model.layout().unwrap();
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

pub fn random_params(model: &Model, rng: &mut impl Rng) -> ParamVector<f64> {
    let layout = model.layout().unwrap();
    let values = (0..layout.len()).map(|_| nonzero(rng)).collect();
    ParamVector::from_values(layout, values).unwrap()
}
