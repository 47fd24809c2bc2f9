//! Analytical execution-time model for data-parallel training.
//!
//! A local iteration costs `t_iter = B/(p·m)·(t_f + t_b) + t_l`. Each
//! algorithm decides how much of the per-sync AllReduce time `t_comm`
//! stays exposed per iteration (see [`crate::algorithms::Algorithm::exposed_comm`]);
//! the epoch time is `(t_iter + exposed) · n_s / B`.

mod catalog;
mod comm;
mod timing;

pub use catalog::{
    lookup, CatalogEntry, Hardware, HardwareTiming, CATALOG, CATALOG_LOCAL_BATCH, CATALOG_WORKERS,
    DEFAULT_DATASET_SIZE,
};
pub use comm::{ceil_log2, comm_time, AllReduceScheme, Butterfly, SchemeRegistry, Tree};
pub use timing::{
    compute_time, feasibility, feasibility_report, perf_rows, select_delay, select_tau, speedup_curve,
    time_breakdown, total_time, write_perf_csv, CommCost, ComputeCost, Feasibility, PerfInputs, PerfRow,
    TimeBreakdown, PERF_CSV_HEADER,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Delay and period recommended for a catalog model on given hardware.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub model: String,
    pub hardware: String,
    pub scheme: String,
    pub d: usize,
    pub tau: usize,
    pub feasible: bool,
    pub slack: f64,
}

pub fn recommend(entry: &CatalogEntry, hardware: Hardware, scheme: &str) -> Result<Recommendation> {
    let t = entry.timing(hardware);
    let t_comm = t.t_comm(scheme)?;
    let d = select_delay(t_comm, t.t_p);
    let f = feasibility(t.t_p, t_comm, d);
    Ok(Recommendation {
        model: entry.model.to_string(),
        hardware: hardware.key().to_string(),
        scheme: scheme.to_ascii_lowercase(),
        d,
        tau: select_tau(d),
        feasible: f.feasible,
        slack: f.slack,
    })
}

/// Same as [`recommend`] for arbitrary inputs.
pub fn recommend_for_inputs(name: &str, inputs: &PerfInputs, schemes: &SchemeRegistry) -> Result<Recommendation> {
    inputs.validate()?;
    let t_iter = inputs.t_iter();
    let t_comm = inputs.t_comm(schemes)?;
    let d = select_delay(t_comm, t_iter);
    let f = feasibility(t_iter, t_comm, d);
    Ok(Recommendation {
        model: name.to_string(),
        hardware: "custom".to_string(),
        scheme: inputs.scheme.clone(),
        d,
        tau: select_tau(d),
        feasible: f.feasible,
        slack: f.slack,
    })
}
