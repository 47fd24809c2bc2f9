use std::fmt::Write as _;
use std::path::PathBuf;

use dasgd_core::algorithms::{run_seeds, AlgorithmRegistry, DelayedAveraging};
use dasgd_core::engine::{RunOptions, Trajectory, TrajectorySummary};
use dasgd_core::objectives::{Objective, ObjectiveRegistry};
use dasgd_core::perfmodel::{
    lookup, perf_rows, recommend, recommend_for_inputs, write_perf_csv, Hardware, PerfInputs, PerfRow, Recommendation,
    SchemeRegistry,
};
use dasgd_core::theory::{empirical_vs_bound, lr_caps, warmup_g0, AssumptionParams, BoundReport};
use dasgd_core::{Error, HyperParams};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{apply_sweep_value, AssumptionSource, Resolved};
use crate::error::{CliError, CliResult};
use crate::output::{write_atomic, write_json};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const COMPARE_FILE: &str = "compare.csv";
pub const BOUND_FILE: &str = "bound.json";
pub const PERF_FILE: &str = "perf.csv";
pub const RECOMMENDATION_FILE: &str = "recommendation.json";
pub const SWEEP_FILE: &str = "sweep.csv";

fn build_objective(cfg: &Resolved) -> CliResult<std::sync::Arc<dyn Objective>> {
    Ok(ObjectiveRegistry::with_builtins().build(&cfg.objective)?)
}

fn run_options(cfg: &Resolved) -> RunOptions {
    RunOptions::with_threads(cfg.threads)
}

#[derive(Debug)]
pub struct TrainOutput {
    pub trajectory: PathBuf,
    pub summary: PathBuf,
    pub result: TrajectorySummary,
}

/// One run of the configured algorithm at `params.seed`.
pub fn train(cfg: &Resolved) -> CliResult<TrainOutput> {
    let algorithm = AlgorithmRegistry::with_builtins().get(&cfg.algorithm)?;
    let objective = build_objective(cfg)?;
    let t = algorithm.simulate(&cfg.params, objective.as_ref(), &run_options(cfg))?;
    let trajectory = write_atomic(&cfg.output_dir, TRAJECTORY_FILE, t.to_csv_string().as_bytes())?;
    let result = t.summary();
    let summary = write_json(&cfg.output_dir, SUMMARY_FILE, &result)?;
    Ok(TrainOutput { trajectory, summary, result })
}

pub const COMPARE_HEADER: &str = "algorithm,step,loss,grad_norm_sq,dispersion,lr";

/// Joined per-step CSV of several trajectories, in the given order.
pub fn joined_csv(trajectories: &[Trajectory]) -> String {
    let mut out = String::with_capacity(64 * trajectories.iter().map(|t| t.records.len()).sum::<usize>());
    out.push_str(COMPARE_HEADER);
    out.push('\n');
    for t in trajectories {
        let body = t.to_csv_string();
        for line in body.lines().skip(1) {
            let _ = writeln!(out, "{},{line}", t.algorithm);
        }
    }
    out
}

#[derive(Debug)]
pub struct CompareOutput {
    pub csv: PathBuf,
    pub summaries: Vec<TrajectorySummary>,
}

/// Runs minibatch, local and dasgd with identical parameters and seed.
pub fn compare(cfg: &Resolved) -> CliResult<CompareOutput> {
    let objective = build_objective(cfg)?;
    let registry = AlgorithmRegistry::with_builtins();
    let runs = registry
        .builtin_order()
        .iter()
        .map(|a| a.simulate(&cfg.params, objective.as_ref(), &run_options(cfg)))
        .collect::<Result<Vec<_>, Error>>()?;
    let csv = write_atomic(&cfg.output_dir, COMPARE_FILE, joined_csv(&runs).as_bytes())?;
    Ok(CompareOutput { csv, summaries: runs.iter().map(Trajectory::summary).collect() })
}

#[derive(Debug)]
pub struct BoundOutput {
    pub path: PathBuf,
    pub report: BoundReport,
}

/// Seed-averaged DaSGD runs against the convergence bound. With
/// `at_cap`, the learning rate is replaced by the cap `eta_max`.
pub fn bound(cfg: &Resolved, at_cap: bool) -> CliResult<BoundOutput> {
    let objective = build_objective(cfg)?;
    let x0 = objective.initial_point();
    let ap = match cfg.assumptions {
        AssumptionSource::Analytic => AssumptionParams::analytic(objective.as_ref(), &cfg.params, &x0).ok_or_else(|| {
            CliError::Config(format!(
                "objective `{}` has no analytic constants; set \"assumptions\": \"estimated\"",
                cfg.objective.kind
            ))
        })?,
        AssumptionSource::Estimated => {
            AssumptionParams::estimated(objective.as_ref(), &cfg.params, &x0, cfg.radius, cfg.params.seed)?
        }
    };
    let caps = lr_caps(&ap, &cfg.params)?;
    let eta = if at_cap { caps.eta_max } else { cfg.params.eta };
    let params = HyperParams { eta, ..cfg.params.clone() };
    let runs = run_seeds(&DelayedAveraging, &params, objective.as_ref(), &cfg.seeds, None)?;
    let g0 = runs.iter().map(warmup_g0).sum::<f64>() / runs.len() as f64;
    let mut report = empirical_vs_bound(&runs, &ap.with_g0(g0), &params, eta)?;
    if caps.b_degenerate {
        report.warnings.push("xi = 0 makes cap b vanish; eta_max uses cap a alone".into());
    }
    let path = write_json(&cfg.output_dir, BOUND_FILE, &report)?;
    Ok(BoundOutput { path, report })
}

/// Source of the performance-model inputs.
#[derive(Clone, Debug)]
pub enum PerfSource {
    Catalog { model: String, hardware: String, scheme: String },
    Inputs { name: String, path: PathBuf },
}

#[derive(Clone, Debug)]
pub struct PerfRequest {
    pub source: PerfSource,
    pub m_values: Vec<usize>,
    /// Overrides of the recommended delay and period.
    pub tau: Option<usize>,
    pub delay: Option<usize>,
    pub output_dir: PathBuf,
}

#[derive(Debug)]
pub struct PerfOutput {
    pub recommendation: Recommendation,
    pub rows: Vec<PerfRow>,
    pub csv: PathBuf,
    pub json: PathBuf,
}

pub fn default_m_values() -> Vec<usize> {
    (0..=8).map(|k| 1usize << k).collect()
}

/// Delay/period recommendation plus speedup rows for all three
/// algorithms. Local SGD uses the same period as DaSGD.
pub fn perf(req: &PerfRequest) -> CliResult<PerfOutput> {
    let schemes = SchemeRegistry::with_builtins();
    let (inputs, recommendation) = match &req.source {
        PerfSource::Catalog { model, hardware, scheme } => {
            let entry = lookup(model)?;
            let hw = Hardware::parse(hardware)?;
            schemes.get(scheme)?;
            (entry.inputs(hw, scheme)?, recommend(entry, hw, scheme)?)
        }
        PerfSource::Inputs { name, path } => {
            let text = std::fs::read_to_string(path)
                .map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
            let inputs: PerfInputs = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let rec = recommend_for_inputs(name, &inputs, &schemes)?;
            (inputs, rec)
        }
    };
    if req.m_values.is_empty() {
        return Err(CliError::Config("worker list must not be empty".into()));
    }
    let tau = req.tau.unwrap_or(recommendation.tau);
    let delay = req.delay.unwrap_or(recommendation.d);
    let registry = AlgorithmRegistry::with_builtins();
    let mut rows = Vec::new();
    for alg in registry.builtin_order() {
        let (t, d) = match alg.name() {
            "minibatch" => (1, 0),
            "local" => (tau, 0),
            _ => (tau, delay),
        };
        rows.extend(perf_rows(&inputs, alg.as_ref(), &req.m_values, t, d, &schemes)?);
    }
    let mut buf = Vec::new();
    write_perf_csv(&rows, &mut buf).map_err(dasgd_core::Error::from)?;
    let csv = write_atomic(&req.output_dir, PERF_FILE, &buf)?;
    let json = write_json(&req.output_dir, RECOMMENDATION_FILE, &recommendation)?;
    Ok(PerfOutput { recommendation, rows, csv, json })
}

/// One grid point of a sweep, averaged over the configured seeds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub params: HyperParams,
    pub seeds: usize,
    pub final_loss: f64,
    pub avg_grad_norm_sq: f64,
    /// `ok`, `invalid` or `diverged`.
    pub status: &'static str,
    #[serde(skip)]
    pub message: Option<String>,
}

pub const SWEEP_HEADER: &str = "algorithm,eta,tau,delay,xi,workers,local_batch,steps,seed,seeds,final_loss,avg_grad_norm_sq,status";

/// Cartesian product of the sweep lists, last key varying fastest.
pub fn expand_grid(base: &HyperParams, grid: &std::collections::BTreeMap<String, Vec<f64>>) -> CliResult<Vec<HyperParams>> {
    let mut out = vec![base.clone()];
    for (key, values) in grid {
        let mut next = Vec::with_capacity(out.len() * values.len());
        for p in &out {
            for &v in values {
                let mut q = p.clone();
                apply_sweep_value(&mut q, key, v)?;
                next.push(q);
            }
        }
        out = next;
    }
    Ok(out)
}

#[derive(Debug)]
pub struct SweepOutput {
    pub csv: PathBuf,
    pub rows: Vec<SweepRow>,
}

/// Invalid or diverging grid points become rows with the matching status
/// rather than aborting the sweep.
pub fn sweep(cfg: &Resolved) -> CliResult<SweepOutput> {
    if cfg.sweep.is_empty() {
        return Err(CliError::Config("sweep needs at least one grid key (config `sweep` or --grid)".into()));
    }
    let algorithm = AlgorithmRegistry::with_builtins().get(&cfg.algorithm)?;
    let objective = build_objective(cfg)?;
    let grid = expand_grid(&cfg.params, &cfg.sweep)?;
    let rows: Vec<SweepRow> = grid
        .par_iter()
        .map(|p| {
            let row = |status, message: Option<String>, loss, g| SweepRow {
                params: p.clone(),
                seeds: cfg.seeds.len(),
                final_loss: loss,
                avg_grad_norm_sq: g,
                status,
                message,
            };
            if let Err(e) = p.validate() {
                return row("invalid", Some(e.to_string()), f64::NAN, f64::NAN);
            }
            match run_seeds(algorithm.as_ref(), p, objective.as_ref(), &cfg.seeds, None) {
                Ok(runs) => {
                    let n = runs.len() as f64;
                    let loss = runs.iter().map(Trajectory::final_loss).sum::<f64>() / n;
                    let g = runs.iter().map(Trajectory::avg_grad_norm_sq).sum::<f64>() / n;
                    row("ok", None, loss, g)
                }
                Err(e @ Error::Diverged { .. }) => row("diverged", Some(e.to_string()), f64::NAN, f64::NAN),
                Err(e) => row("invalid", Some(e.to_string()), f64::NAN, f64::NAN),
            }
        })
        .collect();
    let csv = write_atomic(&cfg.output_dir, SWEEP_FILE, sweep_csv(&cfg.algorithm, &rows).as_bytes())?;
    Ok(SweepOutput { csv, rows })
}

pub fn sweep_csv(algorithm: &str, rows: &[SweepRow]) -> String {
    let mut out = String::new();
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let p = &r.params;
        let _ = writeln!(
            out,
            "{algorithm},{},{},{},{},{},{},{},{},{},{},{},{}",
            p.eta, p.tau, p.delay, p.xi, p.workers, p.local_batch, p.steps, p.seed, r.seeds, r.final_loss,
            r.avg_grad_norm_sq, r.status
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use dasgd_core::engine::CSV_HEADER;
    use std::collections::BTreeMap;

    #[test]
    fn grid_order_and_size() {
        let mut g = BTreeMap::new();
        g.insert("tau".to_string(), vec![2.0, 4.0]);
        g.insert("xi".to_string(), vec![0.0, 0.25, 0.5]);
        let ps = expand_grid(&HyperParams::default(), &g).unwrap();
        assert_eq!(ps.len(), 6);
        assert_eq!((ps[0].tau, ps[0].xi), (2, 0.0));
        assert_eq!((ps[1].tau, ps[1].xi), (2, 0.25));
        assert_eq!((ps[3].tau, ps[3].xi), (4, 0.0));
    }

    #[test]
    fn compare_header_matches_engine_columns() {
        assert!(COMPARE_HEADER.ends_with(CSV_HEADER));
    }
}
