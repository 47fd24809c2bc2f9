use std::sync::Arc;

use super::{dot, norm_sq, Batch, Dataset, Objective};
use crate::rng::RngStream;

/// L2-regularised logistic regression without bias.
#[derive(Clone, Debug)]
pub struct LogisticObjective {
    data: Arc<Dataset>,
    reg: f64,
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LogisticObjective {
    pub fn new(data: Arc<Dataset>, reg: f64) -> Self {
        LogisticObjective { data, reg }
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    fn mean_loss(&self, x: &[f64], idx: impl ExactSizeIterator<Item = usize>) -> f64 {
        let n = idx.len() as f64;
        let mut total = 0.0;
        for i in idx {
            let z = dot(self.data.row(i), x);
            total += softplus(z) - self.data.label(i) * z;
        }
        total / n + 0.5 * self.reg * norm_sq(x)
    }

    fn mean_grad(&self, x: &[f64], idx: impl ExactSizeIterator<Item = usize>) -> Vec<f64> {
        let n = idx.len() as f64;
        let mut g = vec![0.0; x.len()];
        for i in idx {
            let row = self.data.row(i);
            let r = sigmoid(dot(row, x)) - self.data.label(i);
            for (gj, xj) in g.iter_mut().zip(row) {
                *gj += r * xj;
            }
        }
        for (gj, wj) in g.iter_mut().zip(x) {
            *gj = *gj / n + self.reg * wj;
        }
        g
    }
}

impl Objective for LogisticObjective {
    fn name(&self) -> &'static str {
        "logistic"
    }

    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn initial_point(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }

    fn loss(&self, x: &[f64]) -> f64 {
        self.mean_loss(x, 0..self.data.len())
    }

    fn batch_loss(&self, x: &[f64], batch: &Batch) -> f64 {
        match batch {
            Batch::Indices(idx) => self.mean_loss(x, idx.iter().copied()),
            Batch::Noise(_) => self.loss(x),
        }
    }

    fn stoch_grad(&self, x: &[f64], batch: &Batch) -> Vec<f64> {
        match batch {
            Batch::Indices(idx) => self.mean_grad(x, idx.iter().copied()),
            Batch::Noise(_) => self.full_grad(x),
        }
    }

    fn full_grad(&self, x: &[f64]) -> Vec<f64> {
        self.mean_grad(x, 0..self.data.len())
    }

    fn draw_batch(&self, rng: &mut RngStream, size: usize) -> Batch {
        Batch::Indices(self.data.draw_indices(rng, size))
    }

    fn f_inf_hint(&self) -> Option<f64> {
        // per-sample loss softplus(z) − yz is nonnegative for y ∈ [0, 1]
        Some(0.0)
    }
}
