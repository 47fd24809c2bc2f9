use rand::Rng;

use super::{norm_sq, Objective};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Max over coordinates of `|analytic − numeric| / max(1, |analytic|)`,
/// with the numeric gradient from central differences of `F`.
pub fn grad_check(objective: &dyn Objective, x: &[f64], h: f64) -> f64 {
    let analytic = objective.full_grad(x);
    let mut probe = x.to_vec();
    let mut worst = 0.0f64;
    for (i, a) in analytic.iter().enumerate() {
        let orig = probe[i];
        probe[i] = orig + h;
        let up = objective.loss(&probe);
        probe[i] = orig - h;
        let down = objective.loss(&probe);
        probe[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
    }
    worst
}

/// Largest observed `‖∇F(x) − ∇F(y)‖ / ‖x − y‖` over `n_pairs` pairs drawn
/// uniformly from the cube of half-width `radius` around `center`.
///
/// Pairs are drawn in a fixed order from `rng`, so a longer run extends a
/// shorter one and the estimate is nondecreasing in `n_pairs`.
pub fn estimate_lipschitz(
    objective: &dyn Objective,
    center: &[f64],
    n_pairs: usize,
    radius: f64,
    rng: &mut RngStream,
) -> f64 {
    let draw = |rng: &mut RngStream| -> Vec<f64> {
        center.iter().map(|c| c + radius * (2.0 * rng.random::<f64>() - 1.0)).collect()
    };
    let mut best = 0.0f64;
    for _ in 0..n_pairs {
        let (x, y) = loop {
            let x = draw(rng);
            let y = draw(rng);
            if x != y {
                break (x, y);
            }
        };
        let gx = objective.full_grad(&x);
        let gy = objective.full_grad(&y);
        let num: f64 = gx.iter().zip(&gy).map(|(a, b)| (a - b) * (a - b)).sum();
        let den: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
        best = best.max((num / den).sqrt());
    }
    best
}

/// Fitted constants of `E‖g − ∇F‖² ≤ β‖∇F‖² + σ²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VarianceFit {
    pub sigma_sq: f64,
    pub beta: f64,
}

/// Least-squares fit of the measured minibatch-gradient variance against
/// `‖∇F‖²` across `points`, clamped to `β ≥ 0, σ² ≥ 0`.
pub fn estimate_variance(
    objective: &dyn Objective,
    points: &[Vec<f64>],
    n_samples: usize,
    batch_size: usize,
    rng: &mut RngStream,
) -> Result<VarianceFit> {
    if points.len() < 2 {
        return Err(Error::invalid("points", "need at least 2 probe points"));
    }
    if n_samples < 2 {
        return Err(Error::invalid("n_samples", "need at least 2 samples per point"));
    }
    let mut q = Vec::with_capacity(points.len());
    let mut v = Vec::with_capacity(points.len());
    for x in points {
        let full = objective.full_grad(x);
        let mut acc = 0.0;
        for _ in 0..n_samples {
            let batch = objective.draw_batch(rng, batch_size);
            let g = objective.stoch_grad(x, &batch);
            acc += g.iter().zip(&full).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        q.push(norm_sq(&full));
        v.push(acc / n_samples as f64);
    }
    Ok(fit_clamped(&q, &v))
}

fn fit_clamped(q: &[f64], v: &[f64]) -> VarianceFit {
    let n = q.len() as f64;
    let q_mean = q.iter().sum::<f64>() / n;
    let v_mean = v.iter().sum::<f64>() / n;
    let sqq: f64 = q.iter().map(|a| (a - q_mean) * (a - q_mean)).sum();
    if sqq <= 1e-24 * (1.0 + q_mean * q_mean) {
        return VarianceFit { sigma_sq: v_mean.max(0.0), beta: 0.0 };
    }
    let sqv: f64 = q.iter().zip(v).map(|(a, b)| (a - q_mean) * (b - v_mean)).sum();
    let beta = sqv / sqq;
    let sigma_sq = v_mean - beta * q_mean;
    if beta < 0.0 {
        VarianceFit { sigma_sq: v_mean.max(0.0), beta: 0.0 }
    } else if sigma_sq < 0.0 {
        // refit through the origin
        let qq: f64 = q.iter().map(|a| a * a).sum();
        let qv: f64 = q.iter().zip(v).map(|(a, b)| a * b).sum();
        VarianceFit { sigma_sq: 0.0, beta: (qv / qq).max(0.0) }
    } else {
        VarianceFit { sigma_sq, beta }
    }
}
