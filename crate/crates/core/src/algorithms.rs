//! Training algorithms as interchangeable strategies.
//!
//! Each algorithm knows how to simulate itself on an objective and how much
//! communication it leaves exposed in the execution-time model. The
//! registry maps the config names `minibatch`, `local` and `dasgd` to them.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::engine::{run_dasgd, run_local_sgd, run_minibatch, RunOptions, Trajectory};
use crate::error::{Error, Result};
use crate::objectives::Objective;
use crate::schedule::HyperParams;

pub trait Algorithm: Send + Sync {
    fn name(&self) -> &'static str;

    fn simulate(&self, params: &HyperParams, objective: &dyn Objective, opts: &RunOptions) -> Result<Trajectory>;

    /// Communication time per local iteration that is not hidden behind
    /// compute, given the per-sync AllReduce time and iteration time.
    fn exposed_comm(&self, t_comm: f64, t_iter: f64, tau: usize, delay: usize) -> Result<f64>;
}

/// Synchronous averaging of gradients every step.
#[derive(Clone, Copy, Debug, Default)]
pub struct MiniBatchSgd;

/// Model averaging every `tau` local steps.
#[derive(Clone, Copy, Debug, Default)]
pub struct LocalSgd;

/// Model averaging every `tau` steps, merged `d` steps after the snapshot.
#[derive(Clone, Copy, Debug, Default)]
pub struct DelayedAveraging;

impl Algorithm for MiniBatchSgd {
    fn name(&self) -> &'static str {
        "minibatch"
    }

    fn simulate(&self, params: &HyperParams, objective: &dyn Objective, opts: &RunOptions) -> Result<Trajectory> {
        run_minibatch(params, objective, opts)
    }

    fn exposed_comm(&self, t_comm: f64, _t_iter: f64, _tau: usize, _delay: usize) -> Result<f64> {
        Ok(t_comm)
    }
}

impl Algorithm for LocalSgd {
    fn name(&self) -> &'static str {
        "local"
    }

    fn simulate(&self, params: &HyperParams, objective: &dyn Objective, opts: &RunOptions) -> Result<Trajectory> {
        run_local_sgd(params, objective, opts)
    }

    fn exposed_comm(&self, t_comm: f64, _t_iter: f64, tau: usize, _delay: usize) -> Result<f64> {
        if tau < 1 {
            return Err(Error::invalid("tau", "must be >= 1"));
        }
        Ok(t_comm / tau as f64)
    }
}

impl Algorithm for DelayedAveraging {
    fn name(&self) -> &'static str {
        "dasgd"
    }

    fn simulate(&self, params: &HyperParams, objective: &dyn Objective, opts: &RunOptions) -> Result<Trajectory> {
        run_dasgd(params, objective, opts)
    }

    /// Zero while `t_comm < d·t_iter`; otherwise the residual is spread over
    /// the `tau`-step period.
    fn exposed_comm(&self, t_comm: f64, t_iter: f64, tau: usize, delay: usize) -> Result<f64> {
        if delay >= tau {
            return Err(Error::invalid("delay", format!("must satisfy delay < tau, got delay={delay} tau={tau}")));
        }
        Ok((t_comm - delay as f64 * t_iter).max(0.0) / tau as f64)
    }
}

#[derive(Clone)]
pub struct AlgorithmRegistry {
    entries: BTreeMap<String, Arc<dyn Algorithm>>,
}

impl Default for AlgorithmRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl AlgorithmRegistry {
    pub fn empty() -> Self {
        AlgorithmRegistry { entries: BTreeMap::new() }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(MiniBatchSgd));
        r.register(Arc::new(LocalSgd));
        r.register(Arc::new(DelayedAveraging));
        r
    }

    pub fn register(&mut self, algorithm: Arc<dyn Algorithm>) {
        self.entries.insert(algorithm.name().to_string(), algorithm);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Algorithm>> {
        self.entries.get(name).cloned().ok_or_else(|| Error::UnknownKey {
            kind: "algorithm",
            name: name.to_string(),
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// `minibatch`, `local`, `dasgd`, in comparison order.
    pub fn builtin_order(&self) -> Vec<Arc<dyn Algorithm>> {
        ["minibatch", "local", "dasgd"]
            .iter()
            .filter_map(|n| self.entries.get(*n).cloned())
            .collect()
    }
}

/// Runs `algorithm` once per seed, fanning seeds out over the rayon pool.
/// Each run is sequential internally; results come back in seed order.
pub fn run_seeds(
    algorithm: &dyn Algorithm,
    params: &HyperParams,
    objective: &dyn Objective,
    seeds: &[u64],
    start: Option<Vec<f64>>,
) -> Result<Vec<Trajectory>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let p = HyperParams { seed, ..params.clone() };
            let opts = RunOptions { threads: 1, start: start.clone() };
            algorithm.simulate(&p, objective, &opts)
        })
        .collect()
}
