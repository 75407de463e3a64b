//! Posterior averaging, predictive metrics and variable-selection summaries.

use serde::{Deserialize, Serialize};
use ssgl::{ChainTrace, Dataset, LatentState, Model, Predictions, SsglError, Targets};

use crate::error::{HarnessError, Result};

/// Arithmetic mean of the retained samples.
pub fn posterior_mean(trace: &ChainTrace) -> Result<Vec<f64>> {
    if trace.retained == 0 {
        return Err(SsglError::EmptyTrace("no samples were retained".into()).into());
    }
    Ok(trace.mean.clone())
}

pub fn mae(y: &[f64], yhat: &[f64]) -> f64 {
    assert_eq!(y.len(), yhat.len());
    y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64
}

pub fn mse(y: &[f64], yhat: &[f64]) -> f64 {
    assert_eq!(y.len(), yhat.len());
    y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64
}

pub fn rmse(y: &[f64], yhat: &[f64]) -> f64 {
    mse(y, yhat).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub mae: f64,
    pub mse: f64,
    /// Fraction of correctly classified rows; classification only.
    pub accuracy: Option<f64>,
}

/// Point predictions used for the metrics: the regression mean, or for
/// binary classifiers the probability of class 1. `probs` keeps the full
/// class-probability rows for classifiers.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorPredictions {
    pub point: Vec<f64>,
    pub probs: Option<ssgl::Matrix>,
}

fn add_into(acc: &mut Predictions<f64>, p: Predictions<f64>) {
    match (acc, p) {
        (Predictions::Mean(a), Predictions::Mean(b)) => a.iter_mut().zip(b).for_each(|(x, y)| *x += y),
        (Predictions::Probs(a), Predictions::Probs(b)) => {
            for i in 0..a.rows() {
                a.row_mut(i).iter_mut().zip(b.row(i)).for_each(|(x, y)| *x += y);
            }
        }
        _ => unreachable!("one model produces one prediction kind"),
    }
}

fn scale(p: &mut Predictions<f64>, s: f64) {
    match p {
        Predictions::Mean(a) => a.iter_mut().for_each(|x| *x *= s),
        Predictions::Probs(a) => {
            for i in 0..a.rows() {
                a.row_mut(i).iter_mut().for_each(|x| *x *= s);
            }
        }
    }
}

/// Posterior-averaged predictions on `data`.
///
/// Linear regression predicts from the posterior-mean parameters, which is
/// the same as averaging its predictions. Nonlinear models average the
/// per-sample outputs (probabilities for classifiers), which needs the
/// retained samples; without them the posterior mean is plugged in.
pub fn posterior_predict(model: &Model, trace: &ChainTrace, data: &Dataset) -> Result<PosteriorPredictions> {
    let mean = posterior_mean(trace)?;
    let features = data.features();
    let averaged = match model {
        Model::Linear { .. } => model.predict(&mean, features)?,
        _ if trace.samples.is_empty() => model.predict(&mean, features)?,
        _ => {
            let mut acc = model.predict(&trace.samples[0], features)?;
            for s in &trace.samples[1..] {
                add_into(&mut acc, model.predict(s, features)?);
            }
            scale(&mut acc, 1.0 / trace.samples.len() as f64);
            acc
        }
    };
    Ok(match averaged {
        Predictions::Mean(point) => PosteriorPredictions { point, probs: None },
        Predictions::Probs(probs) => {
            let point = if probs.cols() == 2 {
                (0..probs.rows()).map(|i| probs.get(i, 1)).collect()
            } else {
                (0..probs.rows())
                    .map(|i| argmax(probs.row(i)) as f64)
                    .collect()
            };
            PosteriorPredictions { point, probs: Some(probs) }
        }
    })
}

fn argmax(row: &[f64]) -> usize {
    row.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}

/// Response values as reals (class labels as their index).
pub fn response(data: &Dataset) -> Vec<f64> {
    match data.targets() {
        Targets::Real(y) => y.clone(),
        Targets::Class { labels, .. } => labels.iter().map(|&l| l as f64).collect(),
    }
}

/// MAE and MSE of the point predictions; classifiers also get accuracy.
///
/// For a binary classifier the point prediction is the probability of
/// class 1, so MAE and MSE measure calibration against 0/1 labels.
pub fn split_metrics(data: &Dataset, pred: &PosteriorPredictions) -> Result<SplitMetrics> {
    let y = response(data);
    if y.len() != pred.point.len() {
        return Err(HarnessError::Core(SsglError::Shape("prediction count differs from rows".into())));
    }
    let accuracy = match (&pred.probs, data.targets()) {
        (Some(p), Targets::Class { labels, .. }) => {
            let hits = labels.iter().enumerate().filter(|&(i, &l)| argmax(p.row(i)) == l).count();
            Some(hits as f64 / labels.len() as f64)
        }
        _ => None,
    };
    Ok(SplitMetrics { mae: mae(&y, &pred.point), mse: mse(&y, &pred.point), accuracy })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub threshold: f64,
    /// Indices whose posterior-mean magnitude exceeds the threshold.
    pub selected: Vec<usize>,
    /// Final `rho` of the first `min(10, p)` sparse coordinates.
    pub rho_head: Vec<f64>,
    /// Median final `rho` over sparse coordinates outside `selected`.
    pub rho_median_unselected: Option<f64>,
}

pub fn selection_report(mean: &[f64], latent: &LatentState, threshold: f64) -> Result<SelectionReport> {
    if !(threshold > 0.0) {
        return Err(HarnessError::Config(format!("selection threshold must be positive, got {threshold}")));
    }
    let selected: Vec<usize> =
        mean.iter().enumerate().filter(|(_, b)| b.abs() > threshold).map(|(i, _)| i).collect();
    let rho: Vec<f64> = latent.layers.iter().flat_map(|l| l.rho.iter().copied()).collect();
    let rho_head = rho.iter().take(10).copied().collect();
    let mut rest: Vec<f64> =
        rho.iter().enumerate().filter(|(i, _)| selected.binary_search(i).is_err()).map(|(_, &r)| r).collect();
    let rho_median_unselected = median(&mut rest);
    Ok(SelectionReport { threshold, selected, rho_head, rho_median_unselected })
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { 0.5 * (values[n / 2 - 1] + values[n / 2]) })
}

/// Mean and sample standard deviation.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (m, 0.0);
    }
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}
