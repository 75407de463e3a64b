//! Likelihood models: the mapping from features and parameters to a
//! regression mean or class scores, with log-likelihoods and exact gradients.
//!
//! Classification likelihoods do not involve `sigma`; it only enters through
//! the prior. Regression likelihoods are Gaussian with variance `sigma^2`.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Matrix, Minibatch, Targets};
use crate::error::{Result, SsglError};
use crate::params::{LayerKind, Layout, ParamVector};
use crate::real::{dot, sigmoid, softplus, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply<T: Real>(self, x: T) -> T {
        match self {
            Activation::Relu => x.max(T::zero()),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative given the pre-activation; ReLU uses 0 at the kink.
    #[inline]
    fn derivative<T: Real>(self, pre: T) -> T {
        match self {
            Activation::Relu => {
                if pre > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => {
                let t = pre.tanh();
                T::one() - t * t
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Regression,
    Classification,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Model {
    /// `psi(x) = x . beta`, one sparse layer of width `dim`.
    Linear { dim: usize },
    /// Binary logistic regression with logit `x . beta`, one sparse layer.
    Logistic { dim: usize },
    /// Multinomial logit with a sparse `classes x dim` weight layer and a
    /// non-sparse bias per class.
    Softmax { dim: usize, classes: usize },
    /// One hidden layer regression network. Weights are sparse layers,
    /// biases are non-sparse.
    Mlp { dim: usize, hidden: usize, activation: Activation },
}

/// Model outputs for a set of rows.
#[derive(Clone, Debug, PartialEq)]
pub enum Predictions<T> {
    /// Regression means, one per row.
    Mean(Vec<T>),
    /// Class probabilities, one row per observation.
    Probs(Matrix<T>),
}

impl Model {
    pub fn task(&self) -> Task {
        match self {
            Model::Linear { .. } | Model::Mlp { .. } => Task::Regression,
            Model::Logistic { .. } | Model::Softmax { .. } => Task::Classification,
        }
    }

    pub fn input_dim(&self) -> usize {
        match *self {
            Model::Linear { dim } | Model::Logistic { dim } | Model::Softmax { dim, .. } | Model::Mlp { dim, .. } => dim,
        }
    }

    pub fn num_classes(&self) -> Option<usize> {
        match *self {
            Model::Logistic { .. } => Some(2),
            Model::Softmax { classes, .. } => Some(classes),
            _ => None,
        }
    }

    pub fn num_params(&self) -> usize {
        match *self {
            Model::Linear { dim } | Model::Logistic { dim } => dim,
            Model::Softmax { dim, classes } => classes * dim + classes,
            Model::Mlp { dim, hidden, .. } => hidden * dim + hidden + hidden + 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim() == 0 {
            return Err(SsglError::Config("model input dimension must be positive".into()));
        }
        match *self {
            Model::Softmax { classes, .. } if classes < 2 => {
                Err(SsglError::Config("softmax needs at least two classes".into()))
            }
            Model::Mlp { hidden: 0, .. } => Err(SsglError::Config("mlp needs at least one hidden unit".into())),
            _ => Ok(()),
        }
    }

    /// Parameter layout binding model parameters to sparse / non-sparse layers.
    pub fn layout(&self) -> Result<Layout> {
        self.validate()?;
        match *self {
            Model::Linear { dim } | Model::Logistic { dim } => Layout::single_sparse(dim),
            Model::Softmax { dim, classes } => Layout::contiguous([
                ("weights", classes * dim, LayerKind::Sparse),
                ("bias", classes, LayerKind::NonSparse),
            ]),
            Model::Mlp { dim, hidden, .. } => Layout::contiguous([
                ("hidden.weight", hidden * dim, LayerKind::Sparse),
                ("hidden.bias", hidden, LayerKind::NonSparse),
                ("output.weight", hidden, LayerKind::Sparse),
                ("output.bias", 1, LayerKind::NonSparse),
            ]),
        }
    }

    fn check(&self, beta: &[impl Sized], features: usize) -> Result<()> {
        if beta.len() != self.num_params() {
            return Err(SsglError::Shape(format!(
                "model expects {} parameters, got {}",
                self.num_params(),
                beta.len()
            )));
        }
        if features != self.input_dim() {
            return Err(SsglError::Shape(format!(
                "model expects {} features, data has {}",
                self.input_dim(),
                features
            )));
        }
        Ok(())
    }

    fn check_targets<T: Real>(&self, targets: &Targets<T>) -> Result<()> {
        match (self.task(), targets) {
            (Task::Regression, Targets::Real(_)) => Ok(()),
            (Task::Classification, Targets::Class { classes, .. }) if Some(*classes) == self.num_classes() => Ok(()),
            _ => Err(SsglError::Shape(format!("targets do not match model {self:?}"))),
        }
    }

    /// Regression mean for one row.
    #[inline]
    fn regress<T: Real>(&self, beta: &[T], x: &[T], hidden_buf: &mut Vec<T>) -> T {
        match *self {
            Model::Linear { .. } => dot(x, beta),
            Model::Mlp { dim, hidden, activation } => {
                let (w1, rest) = beta.split_at(hidden * dim);
                let (b1, rest) = rest.split_at(hidden);
                let (w2, b2) = rest.split_at(hidden);
                hidden_buf.clear();
                hidden_buf.extend((0..hidden).map(|h| dot(&w1[h * dim..(h + 1) * dim], x) + b1[h]));
                hidden_buf.iter().zip(w2).fold(b2[0], |acc, (&pre, &w)| acc + w * activation.apply(pre))
            }
            _ => unreachable!("regress called on a classifier"),
        }
    }

    /// Class scores for one row written into `scores` (length = classes).
    #[inline]
    fn scores<T: Real>(&self, beta: &[T], x: &[T], scores: &mut [T]) {
        match *self {
            Model::Logistic { .. } => {
                scores[0] = T::zero();
                scores[1] = dot(x, beta);
            }
            Model::Softmax { dim, classes } => {
                let (w, b) = beta.split_at(classes * dim);
                for c in 0..classes {
                    scores[c] = dot(&w[c * dim..(c + 1) * dim], x) + b[c];
                }
            }
            _ => unreachable!("scores called on a regression model"),
        }
    }

    /// Sum of squared residuals over the batch (regression only).
    pub fn sum_squared_residuals<T: Real>(&self, beta: &[T], batch: &Minibatch<'_, T>) -> Result<T> {
        self.check(beta, batch.data.dim())?;
        let Targets::Real(y) = batch.data.targets() else {
            return Err(SsglError::Shape("squared residuals need real-valued targets".into()));
        };
        let mut buf = Vec::new();
        Ok(batch
            .rows()
            .map(|(x, i)| {
                let r = y[i] - self.regress(beta, x, &mut buf);
                r * r
            })
            .sum())
    }

    /// Log-likelihood of the batch (unscaled sum over its rows).
    pub fn log_likelihood<T: Real>(&self, beta: &[T], batch: &Minibatch<'_, T>, sigma: T) -> Result<T> {
        self.check(beta, batch.data.dim())?;
        self.check_targets(batch.data.targets())?;
        match self.task() {
            Task::Regression => {
                if !(sigma > T::zero()) {
                    return Err(SsglError::Domain(format!("sigma must be positive, got {sigma}")));
                }
                let sse = self.sum_squared_residuals(beta, batch)?;
                let var = sigma * sigma;
                let n = T::lit(batch.len() as f64);
                let two_pi = T::lit(std::f64::consts::TAU);
                Ok(-sse / (T::lit(2.0) * var) - n / T::lit(2.0) * (two_pi * var).ln())
            }
            Task::Classification => {
                let Targets::Class { labels, classes } = batch.data.targets() else { unreachable!() };
                let mut scores = vec![T::zero(); *classes];
                let mut total = T::zero();
                for (x, i) in batch.rows() {
                    total = total + self.class_log_prob(beta, x, labels[i], &mut scores);
                }
                Ok(total)
            }
        }
    }

    #[inline]
    fn class_log_prob<T: Real>(&self, beta: &[T], x: &[T], label: usize, scores: &mut [T]) -> T {
        if let Model::Logistic { .. } = self {
            let z = dot(x, beta);
            return if label == 1 { -softplus(-z) } else { -softplus(z) };
        }
        self.scores(beta, x, scores);
        scores[label] - log_sum_exp(scores)
    }

    /// Gradient of [`log_likelihood`](Model::log_likelihood) with respect to
    /// every parameter.
    pub fn log_likelihood_grad<T: Real>(&self, beta: &[T], batch: &Minibatch<'_, T>, sigma: T) -> Result<Vec<T>> {
        let mut grad = vec![T::zero(); beta.len()];
        self.accumulate_grad(beta, batch, sigma, T::one(), &mut grad)?;
        Ok(grad)
    }

    /// Adds `weight * grad log p(batch | beta)` into `grad`.
    pub fn accumulate_grad<T: Real>(
        &self,
        beta: &[T],
        batch: &Minibatch<'_, T>,
        sigma: T,
        weight: T,
        grad: &mut [T],
    ) -> Result<()> {
        self.check(beta, batch.data.dim())?;
        self.check_targets(batch.data.targets())?;
        if grad.len() != beta.len() {
            return Err(SsglError::Shape("gradient buffer length differs from parameters".into()));
        }
        match *self {
            Model::Linear { .. } => {
                let y = real_targets(batch.data);
                let coef = weight / (sigma * sigma);
                check_sigma(sigma)?;
                for (x, i) in batch.rows() {
                    let r = y[i] - dot(x, beta);
                    crate::real::axpy(coef * r, x, grad);
                }
            }
            Model::Logistic { .. } => {
                let Targets::Class { labels, .. } = batch.data.targets() else { unreachable!() };
                for (x, i) in batch.rows() {
                    let p = sigmoid(dot(x, beta));
                    let yi = if labels[i] == 1 { T::one() } else { T::zero() };
                    crate::real::axpy(weight * (yi - p), x, grad);
                }
            }
            Model::Softmax { dim, classes } => {
                let Targets::Class { labels, .. } = batch.data.targets() else { unreachable!() };
                let mut probs = vec![T::zero(); classes];
                for (x, i) in batch.rows() {
                    self.scores(beta, x, &mut probs);
                    softmax_in_place(&mut probs);
                    let (gw, gb) = grad.split_at_mut(classes * dim);
                    for c in 0..classes {
                        let indicator = if labels[i] == c { T::one() } else { T::zero() };
                        let coef = weight * (indicator - probs[c]);
                        crate::real::axpy(coef, x, &mut gw[c * dim..(c + 1) * dim]);
                        gb[c] = gb[c] + coef;
                    }
                }
            }
            Model::Mlp { dim, hidden, activation } => {
                check_sigma(sigma)?;
                let y = real_targets(batch.data);
                let (w1, rest) = beta.split_at(hidden * dim);
                let (b1, rest) = rest.split_at(hidden);
                let (w2, b2) = rest.split_at(hidden);
                let (gw1, grest) = grad.split_at_mut(hidden * dim);
                let (gb1, grest) = grest.split_at_mut(hidden);
                let (gw2, gb2) = grest.split_at_mut(hidden);
                let mut pre = vec![T::zero(); hidden];
                let var = sigma * sigma;
                for (x, i) in batch.rows() {
                    for h in 0..hidden {
                        pre[h] = dot(&w1[h * dim..(h + 1) * dim], x) + b1[h];
                    }
                    let out = pre.iter().zip(w2).fold(b2[0], |acc, (&p, &w)| acc + w * activation.apply(p));
                    let delta = weight * (y[i] - out) / var;
                    gb2[0] = gb2[0] + delta;
                    for h in 0..hidden {
                        gw2[h] = gw2[h] + delta * activation.apply(pre[h]);
                        let back = delta * w2[h] * activation.derivative(pre[h]);
                        if back != T::zero() {
                            gb1[h] = gb1[h] + back;
                            crate::real::axpy(back, x, &mut gw1[h * dim..(h + 1) * dim]);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Regression means or class probabilities for every row of `features`.
    pub fn predict<T: Real>(&self, beta: &[T], features: &Matrix<T>) -> Result<Predictions<T>> {
        self.check(beta, features.cols())?;
        match self.task() {
            Task::Regression => {
                let mut buf = Vec::new();
                Ok(Predictions::Mean(features.iter_rows().map(|x| self.regress(beta, x, &mut buf)).collect()))
            }
            Task::Classification => {
                let k = self.num_classes().expect("classifier has classes");
                let mut out = Matrix::zeros(features.rows(), k);
                for (i, x) in features.iter_rows().enumerate() {
                    let row = out.row_mut(i);
                    if let Model::Logistic { .. } = self {
                        let p = sigmoid(dot(x, beta));
                        row[0] = T::one() - p;
                        row[1] = p;
                    } else {
                        self.scores(beta, x, row);
                        softmax_in_place(row);
                    }
                }
                Ok(Predictions::Probs(out))
            }
        }
    }

    /// Convenience wrapper over [`predict`](Model::predict) for a parameter vector.
    pub fn predict_params<T: Real>(&self, beta: &ParamVector<T>, features: &Matrix<T>) -> Result<Predictions<T>> {
        self.predict(beta.values(), features)
    }
}

fn check_sigma<T: Real>(sigma: T) -> Result<()> {
    if sigma > T::zero() {
        Ok(())
    } else {
        Err(SsglError::Domain(format!("sigma must be positive, got {sigma}")))
    }
}

fn real_targets<T: Real>(data: &Dataset<T>) -> &[T] {
    match data.targets() {
        Targets::Real(y) => y,
        Targets::Class { .. } => unreachable!("targets checked by caller"),
    }
}

/// `log sum exp(x)` with max subtraction.
pub fn log_sum_exp<T: Real>(x: &[T]) -> T {
    let m = x.iter().copied().fold(T::neg_infinity(), T::max);
    if !m.is_finite() {
        return m;
    }
    m + x.iter().map(|&v| (v - m).exp()).sum::<T>().ln()
}

/// Softmax with max subtraction, in place.
pub fn softmax_in_place<T: Real>(x: &mut [T]) {
    let m = x.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for v in x.iter_mut() {
        *v = (*v - m).exp();
        total = total + *v;
    }
    for v in x.iter_mut() {
        *v = *v / total;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn regression_data(x: Vec<Vec<f64>>, y: Vec<f64>) -> Dataset<f64> {
        Dataset::new(Matrix::from_rows(&x).unwrap(), Targets::Real(y)).unwrap()
    }

    fn class_data(x: Vec<Vec<f64>>, labels: Vec<usize>, classes: usize) -> Dataset<f64> {
        Dataset::new(Matrix::from_rows(&x).unwrap(), Targets::Class { labels, classes }).unwrap()
    }

    #[test]
    fn linear_zero_residual_log_likelihood() {
        let d = regression_data(vec![vec![1.0, 2.0]; 3], vec![0.0; 3]);
        let idx = d.all_indices();
        let m = Model::Linear { dim: 2 };
        let ll = m.log_likelihood(&[0.0, 0.0], &Minibatch::new(&d, &idx), 1.0).unwrap();
        let expected = -1.5 * std::f64::consts::TAU.ln();
        assert!((ll - expected).abs() < 1e-12);
    }

    #[test]
    fn logistic_with_zero_logit_is_uniform() {
        let d = class_data(vec![vec![1.0], vec![-2.0], vec![0.5], vec![3.0]], vec![1, 0, 1, 1], 2);
        let idx = d.all_indices();
        let ll = Model::Logistic { dim: 1 }.log_likelihood(&[0.0], &Minibatch::new(&d, &idx), 1.0).unwrap();
        assert!((ll - 4.0 * 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn logistic_gradient_at_zero_logit() {
        let d = class_data(vec![vec![0.4, -1.2]], vec![1], 2);
        let idx = d.all_indices();
        let g = Model::Logistic { dim: 2 }.log_likelihood_grad(&[0.0, 0.0], &Minibatch::new(&d, &idx), 1.0).unwrap();
        assert!((g[0] - 0.2).abs() < 1e-15);
        assert!((g[1] + 0.6).abs() < 1e-15);
    }

    #[test]
    fn linear_gradient_is_xt_residual_over_variance() {
        let d = regression_data(vec![vec![1.0, 0.0], vec![0.0, 2.0]], vec![1.0, 1.0]);
        let idx = d.all_indices();
        let g = Model::Linear { dim: 2 }.log_likelihood_grad(&[0.5, 0.5], &Minibatch::new(&d, &idx), 2.0).unwrap();
        // residuals (0.5, 0): X^T r / 4
        assert!((g[0] - 0.125).abs() < 1e-15);
        assert!(g[1].abs() < 1e-15);
    }

    #[test]
    fn linear_prediction_picks_coordinate() {
        let x = Matrix::from_rows(&[vec![3.0, 7.0, -1.0]]).unwrap();
        let Predictions::Mean(y) = Model::Linear { dim: 3 }.predict(&[1.0, 0.0, 0.0], &x).unwrap() else {
            panic!()
        };
        assert_eq!(y, vec![3.0]);
    }

    #[test]
    fn logistic_saturation_has_no_nan() {
        let x = Matrix::from_rows(&[vec![1.0]]).unwrap();
        let Predictions::Probs(p) = Model::Logistic { dim: 1 }.predict(&[-1e6_f64], &x).unwrap() else { panic!() };
        assert_eq!(p.get(0, 1), 0.0);
        assert_eq!(p.get(0, 0), 1.0);
    }

    #[test]
    fn regression_rejects_nonpositive_sigma() {
        let d = regression_data(vec![vec![1.0]], vec![0.0]);
        let idx = d.all_indices();
        let r = Model::Linear { dim: 1 }.log_likelihood(&[0.0], &Minibatch::new(&d, &idx), 0.0);
        assert!(matches!(r, Err(SsglError::Domain(_))));
    }

    #[test]
    fn feature_width_mismatch_is_shape_error() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(matches!(Model::Linear { dim: 3 }.predict(&[0.0; 3], &x), Err(SsglError::Shape(_))));
    }

    #[test]
    fn softmax_rejects_single_class() {
        assert!(Model::Softmax { dim: 2, classes: 1 }.layout().is_err());
    }

    #[test]
    fn mlp_layout_puts_biases_in_dense_partition() {
        let m = Model::Mlp { dim: 3, hidden: 4, activation: Activation::Relu };
        let layout = m.layout().unwrap();
        assert_eq!(layout.len(), m.num_params());
        let (sparse, dense) = layout.partition();
        assert_eq!(sparse.len(), 3 * 4 + 4);
        assert_eq!(dense, vec![12, 13, 14, 15, 20]);
    }

    #[test]
    fn log_sum_exp_is_stable() {
        let v = log_sum_exp(&[1000.0_f64, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }
}
