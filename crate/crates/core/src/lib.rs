//! Deterministic multi-worker simulator for delayed-averaging local SGD.
//!
//! The crate is split the same way the workflow is:
//!
//! * [`schedule`] and [`rng`] hold the step-scheduling calculus and the
//!   counter-based sampling streams every other module builds on.
//! * [`objectives`] provides the synthetic stochastic objectives plus
//!   estimators for the smoothness and variance constants.
//! * [`engine`] runs Mini-batch SGD, Local SGD and delayed averaging in
//!   lockstep and records trajectories.
//! * [`theory`] evaluates the learning-rate caps and convergence bounds.
//! * [`perfmodel`] is the analytical execution-time model with the
//!   embedded hardware catalog.
//! * [`algorithms`] ties each training algorithm to a name so callers can
//!   select one at runtime.

pub mod algorithms;
pub mod engine;
pub mod error;
pub mod objectives;
pub mod perfmodel;
pub mod rng;
pub mod schedule;
pub mod theory;

pub use error::{Error, Result};
pub use schedule::{lr_at, schedule_kind, HyperParams, LrSchedule, StepKind};
