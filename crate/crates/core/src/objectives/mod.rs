//! Stochastic objectives and estimators for their assumption constants.
//!
//! Every objective exposes the full objective `F`, its gradient, a sampler
//! for local minibatches and the minibatch gradient `g`. The noisy quadratic
//! additionally knows its Lipschitz constant and gradient variance in closed
//! form, which lets the theory module evaluate bounds exactly.

mod dataset;
mod estimate;
mod logistic;
mod mlp;
mod quadratic;
mod registry;

pub use dataset::Dataset;
pub use estimate::{estimate_lipschitz, estimate_variance, grad_check, VarianceFit};
pub use logistic::LogisticObjective;
pub use mlp::TinyMlpObjective;
pub use quadratic::NoisyQuadratic;
pub use registry::{ObjectiveBuilder, ObjectiveRegistry, ObjectiveSpec};

use crate::rng::RngStream;

/// One local minibatch.
#[derive(Clone, Debug, PartialEq)]
pub enum Batch {
    /// Additive gradient-noise draws, one row per sample.
    Noise(Vec<Vec<f64>>),
    /// Row indices into a dataset.
    Indices(Vec<usize>),
}

impl Batch {
    pub fn len(&self) -> usize {
        match self {
            Batch::Noise(rows) => rows.len(),
            Batch::Indices(idx) => idx.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Closed-form assumption constants, when an objective knows them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticConstants {
    pub lipschitz: f64,
    pub beta: f64,
    /// Variance of the minibatch gradient at the requested batch size.
    pub sigma_sq: f64,
    pub f_inf: f64,
}

pub trait Objective: Send + Sync {
    fn name(&self) -> &'static str;

    fn dim(&self) -> usize;

    /// Starting point shared by every worker.
    fn initial_point(&self) -> Vec<f64>;

    /// Full objective `F(x)`.
    fn loss(&self, x: &[f64]) -> f64;

    /// Mean per-sample loss over `batch`.
    fn batch_loss(&self, x: &[f64], batch: &Batch) -> f64;

    /// Mean over `batch` of the per-sample gradients.
    fn stoch_grad(&self, x: &[f64], batch: &Batch) -> Vec<f64>;

    fn full_grad(&self, x: &[f64]) -> Vec<f64>;

    fn draw_batch(&self, rng: &mut RngStream, size: usize) -> Batch;

    /// A known lower bound on `F`, if any.
    fn f_inf_hint(&self) -> Option<f64> {
        None
    }

    fn analytic_constants(&self, _batch_size: usize) -> Option<AnalyticConstants> {
        None
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}
