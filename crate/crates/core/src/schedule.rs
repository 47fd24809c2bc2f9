//! Hyper-parameters and the step-scheduling calculus.
//!
//! Steps are 0-based. Step `k` maps the state `x_k` to `x_{k+1}`. A snapshot
//! of the post-update weights is taken at every step with `(k+1) mod tau == 0`
//! and is merged back `d` steps later, at the step where
//! `(k + 1 - d) mod tau == 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Learning-rate schedule over the `steps` local steps of a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LrSchedule {
    /// Always returns the base learning rate.
    Constant,
    /// Triangular one-cycle policy: linear ramp from `lo` to `hi` over the
    /// first `up_fraction` of the run, then linear decay back to `lo` at the
    /// final step.
    OneCycle { lo: f64, hi: f64, up_fraction: f64 },
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule::Constant
    }
}

/// Full configuration of a delayed-averaging run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperParams {
    /// Base learning rate.
    pub eta: f64,
    /// Local steps per averaging period.
    pub tau: usize,
    /// Delay, in local steps, between snapshot and merge.
    pub delay: usize,
    /// Weight of the local model at merge time.
    pub xi: f64,
    pub workers: usize,
    pub local_batch: usize,
    /// Total local steps per worker.
    pub steps: usize,
    pub seed: u64,
    #[serde(default)]
    pub lr_schedule: LrSchedule,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            eta: 0.05,
            tau: 4,
            delay: 1,
            xi: 0.25,
            workers: 4,
            local_batch: 8,
            steps: 1000,
            seed: 0,
            lr_schedule: LrSchedule::Constant,
        }
    }
}

impl HyperParams {
    /// Checks every invariant; the error names the offending field.
    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(Error::invalid("eta", format!("must be finite and >= 0, got {}", self.eta)));
        }
        if self.tau < 1 {
            return Err(Error::invalid("tau", "must be >= 1"));
        }
        if self.delay >= self.tau {
            return Err(Error::invalid(
                "delay",
                format!("must satisfy 0 <= delay < tau, got delay={} tau={}", self.delay, self.tau),
            ));
        }
        if !(0.0..=1.0).contains(&self.xi) {
            return Err(Error::invalid("xi", format!("must lie in [0, 1], got {}", self.xi)));
        }
        if self.workers < 1 {
            return Err(Error::invalid("workers", "must be >= 1"));
        }
        if self.local_batch < 1 {
            return Err(Error::invalid("local_batch", "must be >= 1"));
        }
        if self.steps < 1 {
            return Err(Error::invalid("steps", "must be >= 1"));
        }
        if let LrSchedule::OneCycle { lo, hi, up_fraction } = self.lr_schedule {
            if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi >= lo) {
                return Err(Error::invalid("lr_schedule", "one-cycle needs 0 <= lo <= hi"));
            }
            if !(up_fraction > 0.0 && up_fraction < 1.0) {
                return Err(Error::invalid("lr_schedule", "up_fraction must lie in (0, 1)"));
            }
        }
        Ok(())
    }

    /// Learning rate used at 0-based step `k`.
    pub fn lr_at(&self, k: usize) -> f64 {
        lr_at(&self.lr_schedule, self.eta, k, self.steps)
    }

    pub fn global_batch(&self) -> usize {
        self.workers * self.local_batch
    }
}

/// What happens at the end of a step besides the local update.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StepKind {
    Plain,
    /// All-reduce the post-update weights; the result is due `d` steps later.
    Snapshot,
    /// Merge the pending average into every worker.
    Merge,
    /// `d == 0`: average and merge within the same step.
    SnapshotAndMerge,
}

impl StepKind {
    pub fn snapshots(self) -> bool {
        matches!(self, StepKind::Snapshot | StepKind::SnapshotAndMerge)
    }

    pub fn merges(self) -> bool {
        matches!(self, StepKind::Merge | StepKind::SnapshotAndMerge)
    }
}

/// Classifies 0-based step `k` for a period of `tau` steps and delay `d`.
///
/// A merge step whose snapshot would predate the run (`k + 1 < tau + d`)
/// is reported as [`StepKind::Plain`].
pub fn schedule_kind(k: usize, tau: usize, d: usize) -> Result<StepKind> {
    if tau < 1 {
        return Err(Error::invalid("tau", "must be >= 1"));
    }
    if d >= tau {
        return Err(Error::invalid(
            "delay",
            format!("must satisfy 0 <= delay < tau, got delay={d} tau={tau}"),
        ));
    }
    let next = k + 1;
    let phase = next % tau;
    let kind = if d == 0 {
        if phase == 0 {
            StepKind::SnapshotAndMerge
        } else {
            StepKind::Plain
        }
    } else if phase == 0 {
        StepKind::Snapshot
    } else if phase == d && next >= tau + d {
        StepKind::Merge
    } else {
        StepKind::Plain
    };
    Ok(kind)
}

/// Learning rate of `schedule` at step `k` of a `total`-step run.
pub fn lr_at(schedule: &LrSchedule, eta: f64, k: usize, total: usize) -> f64 {
    match *schedule {
        LrSchedule::Constant => eta,
        LrSchedule::OneCycle { lo, hi, up_fraction } => {
            let last = total.saturating_sub(1) as f64;
            let peak = up_fraction * total as f64;
            let k = k as f64;
            if k <= peak {
                if peak <= 0.0 {
                    return hi;
                }
                lo + (hi - lo) * (k / peak)
            } else {
                let span = last - peak;
                if span <= 0.0 {
                    return lo;
                }
                hi - (hi - lo) * ((k - peak) / span).min(1.0)
            }
        }
    }
}
