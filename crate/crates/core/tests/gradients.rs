mod common;

use common::*;
use rand::Rng;
use ssgl::data::{Dataset, Minibatch};
use ssgl::params::ParamVector;
use ssgl::prior::{q1_grad_beta, q1_log_posterior};
use ssgl::{Activation, Model};

const H: f64 = 1e-6;
const TOL: f64 = 1e-5;

fn check_model_grad(model: &Model, data: &Dataset<f64>, beta: &[f64], sigma: f64) {
    let idx = data.all_indices();
    let batch = Minibatch::new(data, &idx);
    let analytic = model.log_likelihood_grad(beta, &batch, sigma).unwrap();
    let numeric = fd_grad(|b| model.log_likelihood(b, &batch, sigma).unwrap(), beta, H);
    for (i, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
        assert!(rel_err(*a, *n) < TOL, "{model:?} coordinate {i}: analytic {a} numeric {n}");
    }
}

#[test]
fn linear_gradient_matches_finite_differences() {
    let mut r = rng(10);
    for _ in 0..10 {
        let data = random_regression(10, 20, &mut r);
        let beta: Vec<f64> = (0..20).map(|_| nonzero(&mut r)).collect();
        check_model_grad(&Model::Linear { dim: 20 }, &data, &beta, r.random_range(0.5..2.0));
    }
}

#[test]
fn linear_gradient_has_textbook_form() {
    let mut r = rng(11);
    let data = random_regression(8, 5, &mut r);
    let beta: Vec<f64> = (0..5).map(|_| nonzero(&mut r)).collect();
    let idx = data.all_indices();
    let batch = Minibatch::new(&data, &idx);
    let sigma = 1.7;
    let g = Model::Linear { dim: 5 }.log_likelihood_grad(&beta, &batch, sigma).unwrap();
    let ssgl::data::Targets::Real(y) = data.targets() else { unreachable!() };
    for j in 0..5 {
        let expected: f64 = (0..8)
            .map(|i| {
                let x = data.features().row(i);
                let fit: f64 = x.iter().zip(&beta).map(|(a, b)| a * b).sum();
                x[j] * (y[i] - fit)
            })
            .sum::<f64>()
            / (sigma * sigma);
        assert!((g[j] - expected).abs() < 1e-12);
    }
}

#[test]
fn logistic_gradient_matches_finite_differences() {
    let mut r = rng(12);
    for _ in 0..10 {
        let data = random_classes(30, 20, 2, &mut r);
        let beta: Vec<f64> = (0..20).map(|_| nonzero(&mut r)).collect();
        check_model_grad(&Model::Logistic { dim: 20 }, &data, &beta, 1.0);
    }
}

#[test]
fn softmax_gradient_matches_finite_differences() {
    let mut r = rng(13);
    for _ in 0..10 {
        let model = Model::Softmax { dim: 8, classes: 4 };
        let data = random_classes(25, 8, 4, &mut r);
        let beta: Vec<f64> = (0..model.num_params()).map(|_| nonzero(&mut r)).collect();
        check_model_grad(&model, &data, &beta, 1.0);
    }
}

/// Redraws parameters until no hidden pre-activation sits within `margin` of the kink.
fn mlp_params_off_kinks(model: &Model, data: &Dataset<f64>, r: &mut impl Rng, margin: f64) -> Vec<f64> {
    let Model::Mlp { dim, hidden, .. } = *model else { unreachable!() };
    loop {
        let beta: Vec<f64> = (0..model.num_params()).map(|_| 0.3 * nonzero(r)).collect();
        let ok = data.features().iter_rows().all(|x| {
            (0..hidden).all(|h| {
                let pre: f64 = x.iter().zip(&beta[h * dim..(h + 1) * dim]).map(|(a, b)| a * b).sum::<f64>()
                    + beta[hidden * dim + h];
                pre.abs() > margin
            })
        });
        if ok {
            return beta;
        }
    }
}

#[test]
fn mlp_gradient_matches_finite_differences() {
    let mut r = rng(14);
    for activation in [Activation::Tanh, Activation::Relu] {
        for _ in 0..3 {
            let model = Model::Mlp { dim: 6, hidden: 50, activation };
            let data = random_regression(4, 6, &mut r);
            let beta = mlp_params_off_kinks(&model, &data, &mut r, 1e-3);
            check_model_grad(&model, &data, &beta, 1.3);
        }
    }
}

#[test]
fn q1_gradient_matches_finite_differences() {
    let mut r = rng(15);
    let models = [
        Model::Linear { dim: 20 },
        Model::Logistic { dim: 20 },
        Model::Softmax { dim: 5, classes: 3 },
        Model::Mlp { dim: 4, hidden: 6, activation: Activation::Tanh },
    ];
    for model in models {
        for _ in 0..5 {
            let data = match model.num_classes() {
                Some(k) => random_classes(10, model.input_dim(), k, &mut r),
                None => random_regression(10, model.input_dim(), &mut r),
            };
            let cfg = random_prior(&mut r);
            let beta = random_params(&model, &mut r);
            let latent = random_latent(&model, &cfg, &mut r);
            let idx = data.sample_indices(6, &mut r);
            let batch = Minibatch::new(&data, &idx);
            let analytic = q1_grad_beta(&beta, &latent, &batch, &model, &cfg).unwrap();
            let layout = beta.layout().clone();
            let numeric = fd_grad(
                |b| {
                    let p = ParamVector::from_values(layout.clone(), b.to_vec()).unwrap();
                    q1_log_posterior(&p, &latent, &batch, &model, &cfg).unwrap()
                },
                beta.values(),
                H,
            );
            for (i, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
                assert!(rel_err(*a, *n) < TOL, "{model:?} coordinate {i}: analytic {a} numeric {n}");
            }
        }
    }
}
