use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{Purpose, RngStream};

/// Dense feature matrix with one scalar label per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize, features: Vec<f64>, labels: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dataset("feature dimension must be >= 1".into()));
        }
        if labels.is_empty() {
            return Err(Error::Dataset("dataset has no rows".into()));
        }
        if features.len() != dim * labels.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * labels.len(),
                got: features.len(),
            });
        }
        Ok(Dataset { dim, features, labels })
    }

    /// Binary labels drawn from a logistic teacher. Determined by
    /// `(seed, size, dim)` alone.
    pub fn synthetic(seed: u64, size: usize, dim: usize) -> Result<Self> {
        let mut rng = RngStream::new(seed, 1, Purpose::Dataset);
        let teacher: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut features = Vec::with_capacity(size * dim);
        let mut labels = Vec::with_capacity(size);
        for _ in 0..size {
            let row: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let z: f64 = row.iter().zip(&teacher).map(|(a, b)| a * b).sum();
            let p = 1.0 / (1.0 + (-z).exp());
            labels.push(if rng.random::<f64>() < p { 1.0 } else { 0.0 });
            features.extend(row);
        }
        Dataset::new(dim, features, labels)
    }

    /// Reads a CSV with header `feature_0,…,feature_{dim−1},label`.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let headers = reader.headers()?.clone();
        let n = headers.len();
        if n < 2 {
            return Err(Error::Dataset("need at least one feature column and a label".into()));
        }
        for (i, h) in headers.iter().take(n - 1).enumerate() {
            if h != format!("feature_{i}") {
                return Err(Error::Dataset(format!("column {i} is `{h}`, expected `feature_{i}`")));
            }
        }
        if &headers[n - 1] != "label" {
            return Err(Error::Dataset(format!("last column is `{}`, expected `label`", &headers[n - 1])));
        }
        let dim = n - 1;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (row_no, rec) in reader.records().enumerate() {
            let rec = rec?;
            for (col, field) in rec.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::Dataset(format!("row {}: column {col} is not a number: `{field}`", row_no + 1))
                })?;
                if col < dim {
                    features.push(v);
                } else {
                    labels.push(v);
                }
            }
        }
        Dataset::new(dim, features, labels)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    /// I.i.d. indices with replacement; the whole dataset, in order, once
    /// `size` reaches the dataset length.
    pub(crate) fn draw_indices(&self, rng: &mut RngStream, size: usize) -> Vec<usize> {
        if size >= self.len() {
            return (0..self.len()).collect();
        }
        (0..size).map(|_| rng.random_range(0..self.len())).collect()
    }
}
