use std::io::Write;

use serde::{Deserialize, Serialize};

use super::ops::all_reduce_average;
use crate::error::Result;
use crate::objectives::{norm_sq, Objective};
use crate::schedule::HyperParams;

/// State of the averaged model after a step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Number of completed steps; the record describes `x_step`.
    pub step: usize,
    /// `μ = (1/M) Σ x⁽ᵐ⁾`.
    pub mu: Vec<f64>,
    /// `‖∇F(μ)‖²`.
    pub grad_norm_sq: f64,
    /// `F(μ)`.
    pub loss: f64,
    /// `Σ_m ‖x⁽ᵐ⁾ − μ‖²`.
    pub dispersion: f64,
    /// Learning rate of the step that produced this state.
    pub lr: f64,
    /// Worker-averaged stochastic gradient of that step.
    pub avg_grad: Vec<f64>,
}

/// Everything recorded during one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub algorithm: String,
    pub params: HyperParams,
    /// Averaged model before the first step.
    pub initial_mu: Vec<f64>,
    pub initial_loss: f64,
    pub initial_grad_norm_sq: f64,
    /// `records[k-1]` holds `x_k` for `k = 1..=steps`.
    pub records: Vec<StepRecord>,
    /// Per-worker stochastic gradients at step `d − 1`, when `d ≥ 1`.
    pub warmup_gradients: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub algorithm: String,
    pub params: HyperParams,
    pub final_loss: f64,
    pub avg_grad_norm_sq: f64,
    pub steps: usize,
}

pub const CSV_HEADER: &str = "step,loss,grad_norm_sq,dispersion,lr";

impl Trajectory {
    pub(crate) fn start(algorithm: &str, params: &HyperParams, objective: &dyn Objective, x0: &[f64]) -> Self {
        let g = objective.full_grad(x0);
        Trajectory {
            algorithm: algorithm.to_string(),
            params: params.clone(),
            initial_mu: x0.to_vec(),
            initial_loss: objective.loss(x0),
            initial_grad_norm_sq: norm_sq(&g),
            records: Vec::with_capacity(params.steps),
            warmup_gradients: None,
        }
    }

    pub(crate) fn record<V: AsRef<[f64]>>(
        &mut self,
        objective: &dyn Objective,
        workers: &[V],
        lr: f64,
        avg_grad: Vec<f64>,
    ) -> Result<()> {
        let mu = all_reduce_average(workers)?;
        let dispersion = if workers.len() == 1 {
            0.0
        } else {
            workers
                .iter()
                .map(|w| w.as_ref().iter().zip(&mu).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                .sum()
        };
        let g = objective.full_grad(&mu);
        self.records.push(StepRecord {
            step: self.records.len() + 1,
            grad_norm_sq: norm_sq(&g),
            loss: objective.loss(&mu),
            dispersion,
            lr,
            avg_grad,
            mu,
        });
        Ok(())
    }

    /// `μ_k` for `k = 0..=steps`.
    pub fn mu(&self, k: usize) -> &[f64] {
        if k == 0 {
            &self.initial_mu
        } else {
            &self.records[k - 1].mu
        }
    }

    /// Mean of `‖∇F(μ_k)‖²` over `k = 1..=steps`.
    pub fn avg_grad_norm_sq(&self) -> f64 {
        if self.records.is_empty() {
            return self.initial_grad_norm_sq;
        }
        self.records.iter().map(|r| r.grad_norm_sq).sum::<f64>() / self.records.len() as f64
    }

    pub fn final_loss(&self) -> f64 {
        self.records.last().map_or(self.initial_loss, |r| r.loss)
    }

    pub fn summary(&self) -> TrajectorySummary {
        TrajectorySummary {
            algorithm: self.algorithm.clone(),
            params: self.params.clone(),
            final_loss: self.final_loss(),
            avg_grad_norm_sq: self.avg_grad_norm_sq(),
            steps: self.records.len(),
        }
    }

    /// One row per step under [`CSV_HEADER`]. Reals use the shortest
    /// representation that round-trips.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.records {
            writeln!(out, "{},{},{},{},{}", r.step, r.loss, r.grad_norm_sq, r.dispersion, r.lr)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is ascii")
    }
}
