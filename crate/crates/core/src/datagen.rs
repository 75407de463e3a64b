//! Synthetic large-p-small-n datasets and CSV ingestion for regression data.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Matrix, Targets};
use crate::error::{Result, SsglError};
use crate::real::{sigmoid, Real};
use crate::rng::{stream_rng, DATA_STREAM};

/// Simulation design: AR(1)-correlated Gaussian features, three active
/// coefficients drawn around fixed means, and additive Gaussian noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub n: usize,
    pub p: usize,
    pub test_n: usize,
    /// Correlation between neighbouring features.
    pub corr: f64,
    /// Means of the leading coefficients; the rest are zero.
    pub beta_means: Vec<f64>,
    /// Standard deviation of the leading coefficients around their means.
    pub beta_sd: f64,
    /// Variance of the additive noise.
    pub noise_var: f64,
}

impl SimSpec {
    pub fn linear() -> Self {
        Self { n: 100, p: 1000, test_n: 50, corr: 0.6, beta_means: vec![3.0, 2.0, 1.0], beta_sd: 0.2, noise_var: 3.0 }
    }

    pub fn logistic() -> Self {
        Self { n: 500, p: 1000, test_n: 50, corr: 0.3, beta_means: vec![3.0, 2.0, 1.0], beta_sd: 0.2, noise_var: 0.5 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 3 || self.p < self.beta_means.len() {
            return Err(SsglError::Config(format!("p = {} is too small for the active set", self.p)));
        }
        if !(self.corr > -1.0 && self.corr < 1.0) {
            return Err(SsglError::Config(format!("corr must lie in (-1, 1), got {}", self.corr)));
        }
        if self.n == 0 || self.test_n == 0 {
            return Err(SsglError::Config("train and test sizes must be positive".into()));
        }
        if !(self.beta_sd >= 0.0 && self.noise_var >= 0.0) {
            return Err(SsglError::Config("beta_sd and noise_var must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Output of a simulator: train and test splits sharing one coefficient draw.
#[derive(Clone, Debug, PartialEq)]
pub struct Simulated<T> {
    pub train: Dataset<T>,
    pub test: Dataset<T>,
    pub true_beta: Vec<T>,
}

/// Row with covariance `corr^|i-j|`, via the stationary AR(1) recursion.
fn ar1_row<T: Real, R: Rng + ?Sized>(p: usize, corr: f64, rng: &mut R, row: &mut [T]) {
    let rho = T::lit(corr);
    let innov = T::lit((1.0 - corr * corr).sqrt());
    let mut prev = T::standard_normal(rng);
    row[0] = prev;
    for x in row.iter_mut().take(p).skip(1) {
        prev = rho * prev + innov * T::standard_normal(rng);
        *x = prev;
    }
}

fn draw_beta<T: Real, R: Rng + ?Sized>(spec: &SimSpec, rng: &mut R) -> Vec<T> {
    let mut beta = vec![T::zero(); spec.p];
    for (b, &m) in beta.iter_mut().zip(&spec.beta_means) {
        *b = T::lit(m) + T::lit(spec.beta_sd) * T::standard_normal(rng);
    }
    beta
}

fn draw_features<T: Real, R: Rng + ?Sized>(rows: usize, spec: &SimSpec, rng: &mut R) -> Matrix<T> {
    let mut x = Matrix::zeros(rows, spec.p);
    for i in 0..rows {
        ar1_row(spec.p, spec.corr, rng, x.row_mut(i));
    }
    x
}

/// Linear model `y = X beta + eta`, `eta ~ N(0, noise_var I)`, on both splits.
pub fn gen_linear_sim<T: Real, R: Rng + ?Sized>(spec: &SimSpec, rng: &mut R) -> Result<Simulated<T>> {
    spec.validate()?;
    let beta = draw_beta::<T, R>(spec, rng);
    let noise_sd = T::lit(spec.noise_var.sqrt());
    let mut split = |rows: usize| -> Result<Dataset<T>> {
        let x = draw_features::<T, R>(rows, spec, rng);
        let y = x.iter_rows().map(|r| crate::real::dot(r, &beta) + noise_sd * T::standard_normal(rng)).collect();
        Dataset::new(x, Targets::Real(y))
    };
    let train = split(spec.n)?;
    let test = split(spec.test_n)?;
    Ok(Simulated { train, test, true_beta: beta })
}

/// Binary labels from `Bernoulli(sigmoid(X beta + eta))`, `eta ~ N(0, noise_var I)`.
pub fn gen_logistic_sim<T: Real, R: Rng + ?Sized>(spec: &SimSpec, rng: &mut R) -> Result<Simulated<T>> {
    spec.validate()?;
    let beta = draw_beta::<T, R>(spec, rng);
    let noise_sd = T::lit(spec.noise_var.sqrt());
    let mut split = |rows: usize| -> Result<Dataset<T>> {
        let x = draw_features::<T, R>(rows, spec, rng);
        let labels = x
            .iter_rows()
            .map(|r| {
                let logit = crate::real::dot(r, &beta) + noise_sd * T::standard_normal(rng);
                usize::from(T::unit_uniform(rng) < sigmoid(logit))
            })
            .collect();
        Dataset::new(x, Targets::Class { labels, classes: 2 })
    };
    let train = split(spec.n)?;
    let test = split(spec.test_n)?;
    Ok(Simulated { train, test, true_beta: beta })
}

/// Options for [`load_csv_regression`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvOptions {
    pub has_header: bool,
    pub normalize: bool,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self { has_header: false, normalize: true, train_fraction: 0.9, seed: 0 }
    }
}

/// Reads rows of numbers, last column the response.
pub fn read_csv_rows(path: &Path, has_header: bool) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new().has_headers(has_header).trim(csv::Trim::All).from_path(path)?;
    let mut features = Vec::new();
    let mut response = Vec::new();
    let mut width = None;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            SsglError::Parse { line, message: e.to_string() }
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let values = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| SsglError::Parse { line, message: format!("`{f}` is not a number") })
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() < 2 {
            return Err(SsglError::Parse { line, message: "need at least one feature and a response".into() });
        }
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(SsglError::Parse { line, message: format!("expected {w} fields, found {}", values.len()) })
            }
            _ => {}
        }
        let (x, y) = values.split_at(values.len() - 1);
        features.push(x.to_vec());
        response.push(y[0]);
    }
    if features.is_empty() {
        return Err(SsglError::Parse { line: 0, message: "no data rows".into() });
    }
    Ok((features, response))
}

/// Loads a regression CSV, splits it by seed, and optionally standardizes
/// features with train-split statistics. Constant columns keep a unit divisor.
pub fn load_csv_regression<T: Real>(path: &Path, opts: &CsvOptions) -> Result<(Dataset<T>, Dataset<T>)> {
    if !(opts.train_fraction > 0.0 && opts.train_fraction <= 1.0) {
        return Err(SsglError::Config(format!("train fraction must lie in (0, 1], got {}", opts.train_fraction)));
    }
    let (x, y) = read_csv_rows(path, opts.has_header)?;
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(opts.seed, DATA_STREAM));
    let mut n_train = ((n as f64) * opts.train_fraction).round() as usize;
    n_train = n_train.clamp(1, n);
    if n_train == n && n > 1 && opts.train_fraction < 1.0 {
        n_train = n - 1;
    }
    let (train_idx, test_idx) = order.split_at(n_train);

    let dim = x[0].len();
    let (mut mean, mut scale) = (vec![0.0; dim], vec![1.0; dim]);
    if opts.normalize {
        for &i in train_idx {
            for (m, v) in mean.iter_mut().zip(&x[i]) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n_train as f64);
        let mut var = vec![0.0; dim];
        for &i in train_idx {
            for ((s, v), m) in var.iter_mut().zip(&x[i]).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        for (s, v) in scale.iter_mut().zip(var) {
            let sd = (v / n_train as f64).sqrt();
            *s = if sd > 0.0 { sd } else { 1.0 };
        }
    }
    let build = |idx: &[usize]| -> Result<Dataset<T>> {
        let rows: Vec<Vec<T>> = idx
            .iter()
            .map(|&i| x[i].iter().zip(&mean).zip(&scale).map(|((v, m), s)| T::lit((v - m) / s)).collect())
            .collect();
        let ys = idx.iter().map(|&i| T::lit(y[i])).collect();
        let features = if rows.is_empty() { Matrix::zeros(0, dim) } else { Matrix::from_rows(&rows)? };
        Dataset::new(features, Targets::Real(ys))
    };
    let train = build(train_idx)?;
    if test_idx.is_empty() {
        return Err(SsglError::Config("split left no test rows".into()));
    }
    let test = build(test_idx)?;
    Ok((train, test))
}

/// Writes a regression dataset as headerless CSV with the response last.
pub fn write_csv_regression<T: Real>(path: &Path, data: &Dataset<T>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    let Targets::Real(y) = data.targets() else {
        return Err(SsglError::Shape("only regression datasets can be written".into()));
    };
    for (row, yi) in data.features().iter_rows().zip(y) {
        let mut fields: Vec<String> = row.iter().map(|v| format!("{:e}", v.to_f64_lossy())).collect();
        fields.push(format!("{:e}", yi.to_f64_lossy()));
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}
