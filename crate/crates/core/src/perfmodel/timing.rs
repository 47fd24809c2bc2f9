use serde::{Deserialize, Serialize};

use super::comm::{ceil_log2, comm_time, SchemeRegistry};
use crate::algorithms::Algorithm;
use crate::error::{Error, Result};

/// Per-iteration compute cost, given directly or derived from FLOPs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ComputeCost {
    /// Per-sample forward and backward times plus local aggregation time.
    PerSample { t_forward: f64, t_backward: f64, t_local: f64 },
    /// Forward+backward FLOPs per sample on a device of `flops_peak`.
    Flops { flop_per_sample: f64, flops_peak: f64, t_local: f64 },
    /// Whole local iteration time.
    PerIteration { t_iter: f64 },
}

/// AllReduce cost, from bandwidth or from a measured reference point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CommCost {
    /// Bytes per second between workers.
    Bandwidth { bandwidth: f64 },
    /// `t_comm` measured at `at_workers`, rescaled by `ceil(log₂ m)`.
    Calibrated { t_comm: f64, at_workers: usize },
}

/// Model and hardware description for the execution-time model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerfInputs {
    pub n_params: f64,
    #[serde(default = "default_bytes")]
    pub bytes_per_param: f64,
    pub workers: usize,
    /// Samples a worker processes in parallel.
    #[serde(default = "default_parallel")]
    pub parallel_samples: usize,
    pub local_batch: usize,
    pub dataset_size: f64,
    pub compute: ComputeCost,
    pub comm: CommCost,
    /// AllReduce scheme name, resolved through [`SchemeRegistry`].
    pub scheme: String,
}

fn default_bytes() -> f64 {
    4.0
}

fn default_parallel() -> usize {
    1
}

/// `t_p = B_l · FLOP / FLOPS`.
pub fn compute_time(flop_per_sample: f64, flops_peak: f64, local_batch: usize) -> f64 {
    local_batch as f64 * flop_per_sample / flops_peak
}

/// Smallest integer delay strictly greater than `t_comm / t_compute`.
pub fn select_delay(t_comm: f64, t_compute: f64) -> usize {
    (t_comm / t_compute).floor() as usize + 1
}

/// One more local step than the delay.
pub fn select_tau(delay: usize) -> usize {
    delay + 1
}

impl PerfInputs {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.n_params) || !positive(self.bytes_per_param) || !positive(self.dataset_size) {
            return Err(Error::invalid("perf_inputs", "n_params, bytes_per_param and dataset_size must be > 0"));
        }
        if self.workers < 1 || self.parallel_samples < 1 || self.local_batch < 1 {
            return Err(Error::invalid("perf_inputs", "workers, parallel_samples and local_batch must be >= 1"));
        }
        let ok = match self.compute {
            ComputeCost::PerSample { t_forward, t_backward, t_local } => {
                t_forward >= 0.0 && t_backward >= 0.0 && t_local >= 0.0 && t_forward + t_backward + t_local > 0.0
            }
            ComputeCost::Flops { flop_per_sample, flops_peak, t_local } => {
                positive(flop_per_sample) && positive(flops_peak) && t_local >= 0.0
            }
            ComputeCost::PerIteration { t_iter } => positive(t_iter),
        };
        if !ok {
            return Err(Error::invalid("compute", "times must be positive"));
        }
        let ok = match self.comm {
            CommCost::Bandwidth { bandwidth } => positive(bandwidth),
            CommCost::Calibrated { t_comm, at_workers } => t_comm >= 0.0 && at_workers >= 1,
        };
        if !ok {
            return Err(Error::invalid("comm", "bandwidth must be > 0 and t_comm >= 0"));
        }
        Ok(())
    }

    /// Global batch `B = m · B_l`.
    pub fn global_batch(&self) -> f64 {
        (self.workers * self.local_batch) as f64
    }

    /// `B/(p·m) · (t_f + t_b) + t_l`.
    pub fn t_iter(&self) -> f64 {
        let per_worker = self.global_batch() / (self.parallel_samples * self.workers) as f64;
        match self.compute {
            ComputeCost::PerSample { t_forward, t_backward, t_local } => per_worker * (t_forward + t_backward) + t_local,
            ComputeCost::Flops { flop_per_sample, flops_peak, t_local } => {
                per_worker * (flop_per_sample / flops_peak) + t_local
            }
            ComputeCost::PerIteration { t_iter } => t_iter,
        }
    }

    /// AllReduce time per synchronisation at the current worker count.
    pub fn t_comm(&self, schemes: &SchemeRegistry) -> Result<f64> {
        let m = self.workers;
        Ok(match self.comm {
            CommCost::Bandwidth { bandwidth } => {
                comm_time(self.n_params, self.bytes_per_param, bandwidth, m, schemes.get(&self.scheme)?.as_ref())
            }
            CommCost::Calibrated { t_comm, at_workers } => {
                schemes.get(&self.scheme)?;
                let at = ceil_log2(at_workers);
                if at == 0 {
                    return Err(Error::invalid("comm", "calibration point needs at least 2 workers"));
                }
                t_comm * ceil_log2(m) as f64 / at as f64
            }
        })
    }

    pub fn iterations_per_epoch(&self) -> f64 {
        self.dataset_size / self.global_batch()
    }

    pub fn with_workers(&self, m: usize) -> Self {
        PerfInputs { workers: m, ..self.clone() }
    }
}

/// Epoch-time decomposition for one algorithm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeBreakdown {
    pub t_compute_per_iter: f64,
    /// AllReduce time per synchronisation.
    pub t_comm: f64,
    /// Communication per iteration not hidden behind compute.
    pub t_exposed: f64,
    /// Epoch time `(t_compute_per_iter + t_exposed) · n_s / B`.
    pub t_total: f64,
    /// `t_exposed / (t_compute_per_iter + t_exposed)`.
    pub comm_fraction: f64,
}

/// Epoch time from per-iteration compute and per-sync communication.
pub fn time_breakdown(
    algorithm: &dyn Algorithm,
    t_iter: f64,
    t_comm: f64,
    iterations_per_epoch: f64,
    tau: usize,
    delay: usize,
) -> Result<TimeBreakdown> {
    if !(t_iter > 0.0) {
        return Err(Error::invalid("t_iter", "per-iteration compute time must be > 0"));
    }
    if tau < 1 {
        return Err(Error::invalid("tau", "must be >= 1"));
    }
    let exposed = algorithm.exposed_comm(t_comm, t_iter, tau, delay)?;
    let step = t_iter + exposed;
    Ok(TimeBreakdown {
        t_compute_per_iter: t_iter,
        t_comm,
        t_exposed: exposed,
        t_total: step * iterations_per_epoch,
        comm_fraction: exposed / step,
    })
}

pub fn total_time(
    algorithm: &dyn Algorithm,
    inputs: &PerfInputs,
    tau: usize,
    delay: usize,
    schemes: &SchemeRegistry,
) -> Result<TimeBreakdown> {
    inputs.validate()?;
    time_breakdown(algorithm, inputs.t_iter(), inputs.t_comm(schemes)?, inputs.iterations_per_epoch(), tau, delay)
}

/// Weak-scaling speedup `throughput(m) / throughput(1)`, with the per-worker
/// batch fixed and communication recomputed at every `m`.
pub fn speedup_curve(
    template: &PerfInputs,
    algorithm: &dyn Algorithm,
    m_values: &[usize],
    tau: usize,
    delay: usize,
    schemes: &SchemeRegistry,
) -> Result<Vec<(usize, f64)>> {
    Ok(perf_rows(template, algorithm, m_values, tau, delay, schemes)?
        .into_iter()
        .map(|r| (r.m, r.speedup))
        .collect())
}

/// One line of the perf report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerfRow {
    pub m: usize,
    pub algorithm: String,
    pub t_compute: f64,
    pub t_comm_exposed: f64,
    pub t_total: f64,
    pub speedup: f64,
    pub comm_fraction: f64,
}

pub const PERF_CSV_HEADER: &str = "m,algorithm,t_compute,t_comm_exposed,t_total,speedup,comm_fraction";

pub fn perf_rows(
    template: &PerfInputs,
    algorithm: &dyn Algorithm,
    m_values: &[usize],
    tau: usize,
    delay: usize,
    schemes: &SchemeRegistry,
) -> Result<Vec<PerfRow>> {
    let base_inputs = template.with_workers(1);
    let base = total_time(algorithm, &base_inputs, tau, delay, schemes)?;
    let base_step = base.t_compute_per_iter + base.t_exposed;
    m_values
        .iter()
        .map(|&m| {
            let inputs = template.with_workers(m);
            let tb = total_time(algorithm, &inputs, tau, delay, schemes)?;
            let step = tb.t_compute_per_iter + tb.t_exposed;
            let batch_ratio = inputs.global_batch() / base_inputs.global_batch();
            Ok(PerfRow {
                m,
                algorithm: algorithm.name().to_string(),
                t_compute: tb.t_compute_per_iter,
                t_comm_exposed: tb.t_exposed,
                t_total: tb.t_total,
                speedup: batch_ratio * (base_step / step),
                comm_fraction: tb.comm_fraction,
            })
        })
        .collect()
}

pub fn write_perf_csv<W: std::io::Write>(rows: &[PerfRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{PERF_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.m, r.algorithm, r.t_compute, r.t_comm_exposed, r.t_total, r.speedup, r.comm_fraction
        )?;
    }
    Ok(())
}

/// Whether a delay of `d` steps hides the AllReduce: `slack = d·t_iter − t_comm`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub feasible: bool,
    pub slack: f64,
}

pub fn feasibility(t_iter: f64, t_comm: f64, delay: usize) -> Feasibility {
    let slack = delay as f64 * t_iter - t_comm;
    Feasibility { feasible: slack > 0.0, slack }
}

pub fn feasibility_report(inputs: &PerfInputs, delay: usize, schemes: &SchemeRegistry) -> Result<Feasibility> {
    inputs.validate()?;
    Ok(feasibility(inputs.t_iter(), inputs.t_comm(schemes)?, delay))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{DelayedAveraging, LocalSgd, MiniBatchSgd};

    #[test]
    fn compute_time_examples() {
        let t = compute_time(8e9, 1e13, 64);
        assert!((t - 0.0512).abs() < 1e-15);
        assert_eq!(compute_time(8e9, 1e13, 128), 2.0 * t);
        assert!(compute_time(8e9, 1e300, 64) < 1e-280);
    }

    #[test]
    fn delay_and_tau() {
        assert_eq!(select_delay(446.78, 526.05), 1);
        assert_eq!(select_delay(5599.62, 1795.83), 4);
        assert_eq!(select_delay(0.0, 3.0), 1);
        assert_eq!(select_delay(599.65, 587.64), 2);
        assert_eq!(select_tau(1), 2);
        assert_eq!(select_tau(4), 5);
        assert_eq!(select_tau(0), 1);
    }

    #[test]
    fn three_algorithms_hand_example() {
        let mb = time_breakdown(&MiniBatchSgd, 65.0, 35.0, 10.0, 5, 1).unwrap();
        let local = time_breakdown(&LocalSgd, 65.0, 35.0, 10.0, 5, 1).unwrap();
        let da = time_breakdown(&DelayedAveraging, 65.0, 35.0, 10.0, 5, 1).unwrap();
        assert_eq!(mb.t_total, 1000.0);
        assert_eq!(local.t_total, 720.0);
        assert_eq!(da.t_total, 650.0);
    }

    #[test]
    fn no_comm_no_difference() {
        let a = time_breakdown(&MiniBatchSgd, 65.0, 0.0, 10.0, 4, 1).unwrap();
        let b = time_breakdown(&LocalSgd, 65.0, 0.0, 10.0, 4, 1).unwrap();
        let c = time_breakdown(&DelayedAveraging, 65.0, 0.0, 10.0, 4, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(b, c);
    }

    #[test]
    fn nonpositive_compute_rejected() {
        assert!(time_breakdown(&MiniBatchSgd, 0.0, 1.0, 10.0, 1, 0).is_err());
    }

    #[test]
    fn feasibility_examples() {
        let f = feasibility(526.05, 446.78, 1);
        assert!(f.feasible);
        assert!((f.slack - 79.27).abs() < 1e-9);
        assert!(!feasibility(10.0, 1.0, 0).feasible);
        let f = feasibility(1795.83, 5599.62, 3);
        assert!(!f.feasible);
        assert!((f.slack + 212.13).abs() < 1e-9);
    }

    #[test]
    fn flop_mode_matches_compute_time() {
        let inputs = PerfInputs {
            n_params: 1e6,
            bytes_per_param: 4.0,
            workers: 8,
            parallel_samples: 1,
            local_batch: 64,
            dataset_size: 1e4,
            compute: ComputeCost::Flops { flop_per_sample: 8e9, flops_peak: 1e13, t_local: 0.0 },
            comm: CommCost::Bandwidth { bandwidth: 1e9 },
            scheme: "butterfly".into(),
        };
        assert!((inputs.t_iter() - compute_time(8e9, 1e13, 64)).abs() < 1e-15);
        let t_c = inputs.t_comm(&SchemeRegistry::with_builtins()).unwrap();
        assert!((t_c - 3.0 * 4e6 / 1e9).abs() < 1e-15);
    }
}
