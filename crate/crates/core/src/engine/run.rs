use rayon::prelude::*;

use super::ops::{all_reduce_average, ensure_finite, local_step_with_grad, merge};
use super::trajectory::Trajectory;
use crate::error::{Error, Result};
use crate::objectives::Objective;
use crate::rng::{Purpose, RngStream};
use crate::schedule::{schedule_kind, HyperParams, StepKind};

/// Execution knobs that do not change results.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOptions {
    /// Worker threads. `1` runs sequentially, `0` uses the global rayon pool.
    pub threads: usize,
    /// Overrides the objective's starting point.
    pub start: Option<Vec<f64>>,
}

impl RunOptions {
    pub fn sequential() -> Self {
        RunOptions { threads: 1, start: None }
    }

    pub fn with_threads(threads: usize) -> Self {
        RunOptions { threads, start: None }
    }

    pub fn starting_at(mut self, x0: Vec<f64>) -> Self {
        self.start = Some(x0);
        self
    }
}

/// Local weights of all workers plus their sampling streams.
#[derive(Clone, Debug)]
pub struct WorkerSet {
    pub weights: Vec<Vec<f64>>,
    pub rngs: Vec<RngStream>,
    /// Next 0-based step to execute.
    pub step: usize,
}

impl WorkerSet {
    /// Every worker starts from `x0`; worker `m` samples from stream
    /// `(seed, m, Sampling)`.
    pub fn new(x0: &[f64], workers: usize, seed: u64) -> Self {
        WorkerSet {
            weights: vec![x0.to_vec(); workers],
            rngs: (0..workers)
                .map(|m| RngStream::new(seed, m as u64, Purpose::Sampling))
                .collect(),
            step: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Every worker draws its batch and takes a local step. Returns the
    /// post-update weights and the gradients, in worker order.
    fn local_steps(
        &mut self,
        objective: &dyn Objective,
        lr: f64,
        batch: usize,
        parallel: bool,
    ) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let step = self.step;
        let work = |(x, rng): (&Vec<f64>, &mut RngStream)| {
            let b = objective.draw_batch(rng, batch);
            local_step_with_grad(x, objective, lr, &b, step)
        };
        let out: Vec<(Vec<f64>, Vec<f64>)> = if parallel {
            self.weights.par_iter().zip(self.rngs.par_iter_mut()).map(work).collect::<Result<_>>()?
        } else {
            self.weights.iter().zip(self.rngs.iter_mut()).map(work).collect::<Result<_>>()?
        };
        Ok(out.into_iter().unzip())
    }

    /// Gradients of every worker at the shared point `x`.
    fn shared_gradients(&mut self, objective: &dyn Objective, x: &[f64], batch: usize, parallel: bool) -> Vec<Vec<f64>> {
        let work = |rng: &mut RngStream| {
            let b = objective.draw_batch(rng, batch);
            objective.stoch_grad(x, &b)
        };
        if parallel {
            self.rngs.par_iter_mut().map(work).collect()
        } else {
            self.rngs.iter_mut().map(work).collect()
        }
    }
}

/// An all-reduced snapshot in flight.
#[derive(Clone, Debug, PartialEq)]
pub struct PendingAverage {
    /// Mean of the post-update weights at the snapshot step.
    pub payload: Vec<f64>,
    pub taken_at: usize,
    pub due_at: usize,
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce(bool) -> Result<T> + Send) -> Result<T> {
    match threads {
        1 => f(false),
        0 => f(true),
        n => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::invalid("threads", e.to_string()))?;
            pool.install(|| f(true))
        }
    }
}

fn start_point(params: &HyperParams, objective: &dyn Objective, opts: &RunOptions) -> Result<Vec<f64>> {
    params.validate()?;
    let x0 = opts.start.clone().unwrap_or_else(|| objective.initial_point());
    if x0.len() != objective.dim() {
        return Err(Error::DimensionMismatch { expected: objective.dim(), got: x0.len() });
    }
    Ok(x0)
}

/// Delayed-averaging local SGD.
///
/// Every step each worker takes a local step. At a snapshot step the
/// post-update weights are all-reduced into a [`PendingAverage`]; `d` steps
/// later every worker replaces its post-update weights `v` with
/// `xi·v + (1 − xi)·payload`.
pub fn run_dasgd(params: &HyperParams, objective: &dyn Objective, opts: &RunOptions) -> Result<Trajectory> {
    simulate_delayed(params, objective, opts, "dasgd")
}

/// Periodic averaging every `tau` steps: delayed averaging with `d = 0`
/// and `xi = 0`.
pub fn run_local_sgd(params: &HyperParams, objective: &dyn Objective, opts: &RunOptions) -> Result<Trajectory> {
    let p = HyperParams {
        delay: 0,
        xi: 0.0,
        ..params.clone()
    };
    simulate_delayed(&p, objective, opts, "local")
}

fn simulate_delayed(params: &HyperParams, objective: &dyn Objective, opts: &RunOptions, name: &str) -> Result<Trajectory> {
    let x0 = start_point(params, objective, opts)?;
    let mut ws = WorkerSet::new(&x0, params.workers, params.seed);
    let mut traj = Trajectory::start(name, params, objective, &x0);
    let (tau, d, xi) = (params.tau, params.delay, params.xi);

    with_pool(opts.threads, |parallel| {
        let mut pending: Option<PendingAverage> = None;
        for k in 0..params.steps {
            let lr = params.lr_at(k);
            let kind = schedule_kind(k, tau, d)?;
            let (updated, grads) = ws.local_steps(objective, lr, params.local_batch, parallel)?;
            let avg_grad = all_reduce_average(&grads)?;
            if d >= 1 && k == d - 1 {
                traj.warmup_gradients = Some(grads);
            }

            ws.weights = match kind {
                StepKind::Plain => updated,
                StepKind::Snapshot => {
                    debug_assert!(pending.is_none());
                    pending = Some(PendingAverage {
                        payload: all_reduce_average(&updated)?,
                        taken_at: k,
                        due_at: k + d,
                    });
                    updated
                }
                StepKind::Merge => {
                    let p = pending.take().expect("merge scheduled without a snapshot");
                    debug_assert_eq!(p.due_at, k);
                    merge_all(&updated, &p.payload, xi, k)?
                }
                StepKind::SnapshotAndMerge => {
                    let payload = all_reduce_average(&updated)?;
                    merge_all(&updated, &payload, xi, k)?
                }
            };
            ws.step = k + 1;
            traj.record(objective, &ws.weights, lr, avg_grad)?;
        }
        Ok(())
    })?;
    Ok(traj)
}

fn merge_all(updated: &[Vec<f64>], payload: &[f64], xi: f64, step: usize) -> Result<Vec<Vec<f64>>> {
    updated
        .iter()
        .map(|v| {
            let x = merge(v, payload, xi);
            ensure_finite(&x, step).map(|_| x)
        })
        .collect()
}

/// Synchronous SGD on one shared model with global batch `M·B_l`: the M
/// local-batch gradients are averaged in the fixed reduction order.
pub fn run_minibatch(params: &HyperParams, objective: &dyn Objective, opts: &RunOptions) -> Result<Trajectory> {
    let mut x = start_point(params, objective, opts)?;
    let mut ws = WorkerSet::new(&x, params.workers, params.seed);
    let mut traj = Trajectory::start("minibatch", params, objective, &x);

    with_pool(opts.threads, |parallel| {
        for k in 0..params.steps {
            let lr = params.lr_at(k);
            let grads = ws.shared_gradients(objective, &x, params.local_batch, parallel);
            let avg_grad = all_reduce_average(&grads)?;
            x = x.iter().zip(&avg_grad).map(|(xi, gi)| xi - lr * gi).collect();
            ensure_finite(&x, k)?;
            ws.step = k + 1;
            traj.record(objective, &[&x[..]], lr, avg_grad)?;
        }
        Ok(())
    })?;
    Ok(traj)
}
