//! Lockstep multi-worker simulation of Mini-batch SGD, Local SGD and
//! delayed averaging.
//!
//! All workers advance one step at a time. Per-worker computations may run
//! on a thread pool; every reduction runs afterwards in a fixed order, so a
//! run is a pure function of its parameters and objective.

mod ops;
mod recursion;
mod run;
mod trajectory;

pub use ops::{all_reduce_average, local_step, merge};
pub use recursion::{mu_recursion_check, RecursionReport};
pub use run::{run_dasgd, run_local_sgd, run_minibatch, PendingAverage, RunOptions, WorkerSet};
pub use trajectory::{StepRecord, Trajectory, TrajectorySummary, CSV_HEADER};
