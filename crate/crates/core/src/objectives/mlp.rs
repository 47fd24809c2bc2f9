use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};

use super::{norm_sq, Batch, Dataset, Objective};
use crate::rng::{Purpose, RngStream};

/// One-hidden-layer tanh network with a scalar output and squared loss.
///
/// Parameter layout: `W1` (hidden × input, row-major), `b1` (hidden),
/// `w2` (hidden), `b2` (1).
#[derive(Clone, Debug)]
pub struct TinyMlpObjective {
    data: Arc<Dataset>,
    hidden: usize,
    reg: f64,
    init_seed: u64,
}

struct Layout {
    input: usize,
    hidden: usize,
}

impl Layout {
    fn w1(&self) -> std::ops::Range<usize> {
        0..self.hidden * self.input
    }
    fn b1(&self) -> std::ops::Range<usize> {
        let s = self.hidden * self.input;
        s..s + self.hidden
    }
    fn w2(&self) -> std::ops::Range<usize> {
        let s = self.hidden * (self.input + 1);
        s..s + self.hidden
    }
    fn b2(&self) -> usize {
        self.hidden * (self.input + 2)
    }
    fn len(&self) -> usize {
        self.b2() + 1
    }
}

impl TinyMlpObjective {
    pub fn new(data: Arc<Dataset>, hidden: usize, reg: f64, init_seed: u64) -> Self {
        TinyMlpObjective {
            data,
            hidden: hidden.max(1),
            reg,
            init_seed,
        }
    }

    fn layout(&self) -> Layout {
        Layout {
            input: self.data.dim(),
            hidden: self.hidden,
        }
    }

    fn hidden_act(&self, x: &[f64], row: &[f64]) -> Vec<f64> {
        let l = self.layout();
        let w1 = &x[l.w1()];
        let b1 = &x[l.b1()];
        (0..l.hidden)
            .map(|h| {
                let w = &w1[h * l.input..(h + 1) * l.input];
                let pre: f64 = w.iter().zip(row).map(|(a, b)| a * b).sum::<f64>() + b1[h];
                pre.tanh()
            })
            .collect()
    }

    fn predict(&self, x: &[f64], act: &[f64]) -> f64 {
        let l = self.layout();
        act.iter().zip(&x[l.w2()]).map(|(a, w)| a * w).sum::<f64>() + x[l.b2()]
    }

    fn mean_loss(&self, x: &[f64], idx: impl ExactSizeIterator<Item = usize>) -> f64 {
        let n = idx.len() as f64;
        let mut total = 0.0;
        for i in idx {
            let act = self.hidden_act(x, self.data.row(i));
            let r = self.predict(x, &act) - self.data.label(i);
            total += 0.5 * r * r;
        }
        total / n + 0.5 * self.reg * norm_sq(x)
    }

    fn mean_grad(&self, x: &[f64], idx: impl ExactSizeIterator<Item = usize>) -> Vec<f64> {
        let l = self.layout();
        let n = idx.len() as f64;
        let mut g = vec![0.0; l.len()];
        let w2 = &x[l.w2()];
        for i in idx {
            let row = self.data.row(i);
            let act = self.hidden_act(x, row);
            let r = self.predict(x, &act) - self.data.label(i);
            g[l.b2()] += r;
            for h in 0..l.hidden {
                g[l.w2().start + h] += r * act[h];
                let dpre = r * w2[h] * (1.0 - act[h] * act[h]);
                g[l.b1().start + h] += dpre;
                let base = h * l.input;
                for (j, xj) in row.iter().enumerate() {
                    g[base + j] += dpre * xj;
                }
            }
        }
        for (gj, wj) in g.iter_mut().zip(x) {
            *gj = *gj / n + self.reg * wj;
        }
        g
    }
}

impl Objective for TinyMlpObjective {
    fn name(&self) -> &'static str {
        "mlp"
    }

    fn dim(&self) -> usize {
        self.layout().len()
    }

    /// Small Gaussian weights scaled by fan-in, zero biases.
    fn initial_point(&self) -> Vec<f64> {
        let l = self.layout();
        let mut rng = RngStream::new(self.init_seed, 0, Purpose::Other(0x4d4c50));
        let mut x = vec![0.0; l.len()];
        let s1 = 1.0 / (l.input as f64).sqrt();
        for v in &mut x[l.w1()] {
            *v = s1 * { let z: f64 = StandardNormal.sample(&mut rng); z };
        }
        let s2 = 1.0 / (l.hidden as f64).sqrt();
        for v in &mut x[l.w2()] {
            *v = s2 * { let z: f64 = StandardNormal.sample(&mut rng); z };
        }
        x
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
        Some(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_count() {
        let d = Arc::new(Dataset::synthetic(1, 10, 3).unwrap());
        let m = TinyMlpObjective::new(d, 5, 0.0, 0);
        // 5*3 + 5 + 5 + 1
        assert_eq!(m.dim(), 26);
        assert_eq!(m.initial_point().len(), 26);
    }

    #[test]
    fn zero_network_predicts_zero() {
        let d = Arc::new(Dataset::synthetic(1, 10, 3).unwrap());
        let m = TinyMlpObjective::new(d.clone(), 4, 0.0, 0);
        let x = vec![0.0; m.dim()];
        let want: f64 = (0..d.len()).map(|i| 0.5 * d.label(i) * d.label(i)).sum::<f64>() / d.len() as f64;
        assert!((m.loss(&x) - want).abs() < 1e-15);
    }
}
