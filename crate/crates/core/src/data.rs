//! Datasets, dense row-major matrices, and minibatch views.

use rand::Rng;

use crate::error::{Result, SsglError};
use crate::real::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(SsglError::Shape(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(SsglError::Shape(format!("row {i} has {} columns, expected {cols}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    /// New matrix holding the selected rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self { rows: idx.len(), cols: self.cols, data }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Targets<T> {
    /// Real-valued responses for regression.
    Real(Vec<T>),
    /// Zero-based class indices (`0..classes`).
    Class { labels: Vec<usize>, classes: usize },
}

impl<T: Real> Targets<T> {
    pub fn len(&self) -> usize {
        match self {
            Targets::Real(y) => y.len(),
            Targets::Class { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Target `i` as a real number (class index for classification).
    pub fn value(&self, i: usize) -> T {
        match self {
            Targets::Real(y) => y[i],
            Targets::Class { labels, .. } => T::from_usize(labels[i]).unwrap_or_else(T::nan),
        }
    }

    fn select(&self, idx: &[usize]) -> Self {
        match self {
            Targets::Real(y) => Targets::Real(idx.iter().map(|&i| y[i]).collect()),
            Targets::Class { labels, classes } => {
                Targets::Class { labels: idx.iter().map(|&i| labels[i]).collect(), classes: *classes }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    features: Matrix<T>,
    targets: Targets<T>,
}

impl<T: Real> Dataset<T> {
    pub fn new(features: Matrix<T>, targets: Targets<T>) -> Result<Self> {
        if features.rows() != targets.len() {
            return Err(SsglError::Shape(format!(
                "{} feature rows but {} responses",
                features.rows(),
                targets.len()
            )));
        }
        if features.rows() == 0 {
            return Err(SsglError::Shape("dataset must contain at least one row".into()));
        }
        if let Targets::Class { labels, classes } = &targets {
            if let Some(bad) = labels.iter().find(|&&l| l >= *classes) {
                return Err(SsglError::Shape(format!("label {bad} outside 0..{classes}")));
            }
        }
        Ok(Self { features, targets })
    }

    pub fn features(&self) -> &Matrix<T> {
        &self.features
    }

    pub fn targets(&self) -> &Targets<T> {
        &self.targets
    }

    /// Total observation count `N`.
    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self { features: self.features.select_rows(idx), targets: self.targets.select(idx) }
    }

    pub fn all_indices(&self) -> Vec<usize> {
        (0..self.len()).collect()
    }

    /// Uniform draw of `size` distinct rows. `size >= N` returns every row.
    pub fn sample_indices<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Vec<usize> {
        if size >= self.len() {
            return self.all_indices();
        }
        rand::seq::index::sample(rng, self.len(), size).into_vec()
    }
}

/// A view of selected rows used for one stochastic gradient evaluation.
#[derive(Clone, Copy, Debug)]
pub struct Minibatch<'a, T> {
    pub data: &'a Dataset<T>,
    pub indices: &'a [usize],
}

impl<'a, T: Real> Minibatch<'a, T> {
    pub fn new(data: &'a Dataset<T>, indices: &'a [usize]) -> Self {
        Self { data, indices }
    }

    /// Batch size `n`.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// The `N / n` factor that rescales minibatch sums to the full data.
    pub fn scale(&self) -> T {
        T::lit(self.data.len() as f64 / self.indices.len().max(1) as f64)
    }

    pub fn rows(&self) -> impl Iterator<Item = (&'a [T], usize)> + 'a {
        let data = self.data;
        self.indices.iter().map(move |&i| (data.features.row(i), i))
    }
}
