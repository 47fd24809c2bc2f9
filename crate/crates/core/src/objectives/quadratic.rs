use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use super::{dot, AnalyticConstants, Batch, Objective};
use crate::error::{Error, Result};
use crate::rng::{Purpose, RngStream};

/// `F(x) = ½ xᵀAx − bᵀx` with additive Gaussian gradient noise.
///
/// A sample is a noise vector `z ~ N(0, noise_sigma² I)`; its gradient is
/// `Ax − b + z`. The minibatch gradient therefore has variance
/// `dim · noise_sigma² / batch` at every `x`, so `β = 0`.
#[derive(Clone, Debug)]
pub struct NoisyQuadratic {
    dim: usize,
    // row-major
    a: Vec<f64>,
    b: Vec<f64>,
    noise_sigma: f64,
    minimizer: Vec<f64>,
    f_inf: f64,
    lipschitz: f64,
    start: Vec<f64>,
}

impl NoisyQuadratic {
    /// Builds from a symmetric positive-definite matrix.
    pub fn new(a: DMatrix<f64>, b: Vec<f64>, noise_sigma: f64) -> Result<Self> {
        let dim = a.nrows();
        if a.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: a.ncols() });
        }
        if b.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: b.len() });
        }
        if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
            return Err(Error::invalid("noise_sigma", "must be finite and >= 0"));
        }
        let asym = (&a - a.transpose()).abs().max();
        if asym > 1e-12 * (1.0 + a.abs().max()) {
            return Err(Error::invalid("A", "matrix is not symmetric"));
        }
        let chol = a
            .clone()
            .cholesky()
            .ok_or_else(|| Error::invalid("A", "matrix is not positive definite"))?;
        let bv = DVector::from_column_slice(&b);
        let xs = chol.solve(&bv);
        let minimizer: Vec<f64> = xs.iter().copied().collect();
        let lipschitz = a.clone().symmetric_eigenvalues().max();
        let mut row_major = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                row_major.push(a[(i, j)]);
            }
        }
        let mut q = NoisyQuadratic {
            dim,
            a: row_major,
            b,
            noise_sigma,
            minimizer,
            f_inf: 0.0,
            lipschitz,
            start: vec![0.0; dim],
        };
        q.f_inf = q.loss(&q.minimizer.clone());
        Ok(q)
    }

    pub fn diagonal(diag: &[f64], b: Vec<f64>, noise_sigma: f64) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)), b, noise_sigma)
    }

    /// Random rotation of a linearly spaced spectrum in `[l_min, l_max]`,
    /// with `b ~ N(0, I)`. Fully determined by `seed`.
    pub fn with_spectrum(dim: usize, l_min: f64, l_max: f64, noise_sigma: f64, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be >= 1"));
        }
        if !(l_min > 0.0 && l_max >= l_min) {
            return Err(Error::invalid("l_min", "need 0 < l_min <= l_max"));
        }
        let mut rng = RngStream::new(seed, 0, Purpose::Dataset);
        let g: DMatrix<f64> = DMatrix::from_fn(dim, dim, |_, _| StandardNormal.sample(&mut rng));
        let q = g.qr().q();
        let eig: Vec<f64> = (0..dim)
            .map(|i| {
                if dim == 1 {
                    l_max
                } else {
                    l_min + (l_max - l_min) * i as f64 / (dim - 1) as f64
                }
            })
            .collect();
        let d = DMatrix::from_diagonal(&DVector::from_vec(eig));
        let mut a = &q * d * q.transpose();
        // exact symmetry
        let at = a.transpose();
        a = (a + at) * 0.5;
        let b: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        Self::new(a, b, noise_sigma)
    }

    pub fn with_start(mut self, start: Vec<f64>) -> Result<Self> {
        if start.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: start.len() });
        }
        self.start = start;
        Ok(self)
    }

    pub fn minimizer(&self) -> &[f64] {
        &self.minimizer
    }

    pub fn f_inf(&self) -> f64 {
        self.f_inf
    }

    /// Largest eigenvalue of `A`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    /// `E‖g − ∇F‖²` for a minibatch of `batch` samples.
    pub fn gradient_variance(&self, batch: usize) -> f64 {
        self.dim as f64 * self.noise_sigma * self.noise_sigma / batch.max(1) as f64
    }

    /// `½ (x − x*)ᵀ A (x − x*)`.
    pub fn excess_loss(&self, x: &[f64]) -> f64 {
        let e: Vec<f64> = x.iter().zip(&self.minimizer).map(|(a, b)| a - b).collect();
        0.5 * dot(&e, &self.apply(&e))
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.a.chunks_exact(self.dim).map(|row| dot(row, x)).collect()
    }

    fn mean_noise(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        if rows.is_empty() {
            return m;
        }
        for r in rows {
            for (acc, z) in m.iter_mut().zip(r) {
                *acc += z;
            }
        }
        let n = rows.len() as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }
}

impl Objective for NoisyQuadratic {
    fn name(&self) -> &'static str {
        "quadratic"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn initial_point(&self) -> Vec<f64> {
        self.start.clone()
    }

    fn loss(&self, x: &[f64]) -> f64 {
        0.5 * dot(x, &self.apply(x)) - dot(&self.b, x)
    }

    fn batch_loss(&self, x: &[f64], batch: &Batch) -> f64 {
        match batch {
            Batch::Noise(rows) => self.loss(x) + dot(&self.mean_noise(rows), x),
            Batch::Indices(_) => self.loss(x),
        }
    }

    fn stoch_grad(&self, x: &[f64], batch: &Batch) -> Vec<f64> {
        let mut g = self.full_grad(x);
        if let Batch::Noise(rows) = batch {
            for (gi, z) in g.iter_mut().zip(self.mean_noise(rows)) {
                *gi += z;
            }
        }
        g
    }

    fn full_grad(&self, x: &[f64]) -> Vec<f64> {
        self.apply(x).into_iter().zip(&self.b).map(|(ax, b)| ax - b).collect()
    }

    fn draw_batch(&self, rng: &mut RngStream, size: usize) -> Batch {
        let rows = (0..size)
            .map(|_| {
                if self.noise_sigma == 0.0 {
                    vec![0.0; self.dim]
                } else {
                    (0..self.dim)
                        .map(|_| { let z: f64 = StandardNormal.sample(rng); self.noise_sigma * z })
                        .collect()
                }
            })
            .collect();
        Batch::Noise(rows)
    }

    fn f_inf_hint(&self) -> Option<f64> {
        Some(self.f_inf)
    }

    fn analytic_constants(&self, batch_size: usize) -> Option<AnalyticConstants> {
        Some(AnalyticConstants {
            lipschitz: self.lipschitz,
            beta: 0.0,
            sigma_sq: self.gradient_variance(batch_size),
            f_inf: self.f_inf,
        })
    }
}
