use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{self, PerfRequest, PerfSource};
use crate::config::{parse_grid_arg, AssumptionSource, ExperimentConfig, Resolved, OUT_DIR_ENV};
use crate::error::{CliError, CliResult};

/// Simulate delayed-averaging SGD, evaluate its convergence bound and model
/// its execution time.
///
/// Settings are resolved as flag > $DASGD_OUT_DIR (output dir only) >
/// config file > built-in default. Exit codes: 0 success, 2 invalid
/// configuration, 3 divergence, 1 I/O failure.
#[derive(Debug, Parser)]
#[command(name = "dasgd", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one algorithm; writes trajectory.csv and summary.json.
    Train(RunArgs),
    /// Run minibatch, local and dasgd with matched sampling; writes compare.csv.
    Compare(RunArgs),
    /// Compare seed-averaged runs against the convergence bound; writes bound.json.
    Bound {
        #[command(flatten)]
        run: RunArgs,
        /// Use the learning-rate cap instead of the configured eta.
        #[arg(long)]
        at_cap: bool,
        /// Where the assumption constants come from.
        #[arg(long, value_parser = parse_source)]
        assumptions: Option<AssumptionSource>,
        /// Half-width of the sampling cube for estimated constants.
        #[arg(long)]
        radius: Option<f64>,
    },
    /// Cartesian parameter sweep, one summary row per grid point; writes sweep.csv.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Grid axis as key=v1,v2,... (repeatable); overrides the config's `sweep` entry for that key.
        #[arg(long = "grid")]
        grid: Vec<String>,
    },
    /// Execution-time model: delay/period recommendation and speedup table;
    /// writes perf.csv and recommendation.json.
    Perf(PerfArgs),
}

/// Config file plus flag overrides shared by the simulation commands.
#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// JSON experiment config.
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub algorithm: Option<String>,
    /// Objective kind (quadratic, logistic, mlp); other objective fields come from the config.
    #[arg(long)]
    pub objective: Option<String>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub tau: Option<usize>,
    #[arg(long)]
    pub delay: Option<usize>,
    #[arg(long)]
    pub xi: Option<f64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub local_batch: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated seeds for averaged commands.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Threads inside one run (1 = sequential, 0 = all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PerfArgs {
    /// Catalog model key, e.g. resnet50.
    pub model: Option<String>,
    /// titan or k80.
    pub hardware: Option<String>,
    /// AllReduce scheme: tree or butterfly.
    #[arg(default_value = "tree")]
    pub scheme: String,
    /// Worker counts, comma-separated.
    #[arg(long = "m", value_delimiter = ',')]
    pub m: Option<Vec<usize>>,
    /// PerfInputs JSON instead of a catalog model.
    #[arg(long)]
    pub inputs: Option<PathBuf>,
    #[arg(long)]
    pub tau: Option<usize>,
    #[arg(long)]
    pub delay: Option<usize>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

fn parse_source(s: &str) -> Result<AssumptionSource, String> {
    match s {
        "analytic" => Ok(AssumptionSource::Analytic),
        "estimated" => Ok(AssumptionSource::Estimated),
        _ => Err(format!("expected analytic or estimated, got `{s}`")),
    }
}

fn env_out_dir() -> Option<PathBuf> {
    std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

impl RunArgs {
    fn resolve(&self, extra: ExperimentConfig) -> CliResult<Resolved> {
        let mut file = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(kind) = &self.objective {
            let mut spec = file.objective.take().unwrap_or_else(|| dasgd_core::objectives::ObjectiveSpec::new(kind));
            spec.kind = kind.clone();
            file.objective = Some(spec);
        }
        let flags = ExperimentConfig {
            algorithm: self.algorithm.clone(),
            eta: self.eta,
            tau: self.tau,
            delay: self.delay,
            xi: self.xi,
            workers: self.workers,
            local_batch: self.local_batch,
            steps: self.steps,
            seed: self.seed,
            seeds: self.seeds.clone(),
            output_dir: self.output_dir.clone(),
            threads: self.threads,
            ..extra
        };
        ExperimentConfig::resolve(file, flags, env_out_dir())
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train(args) => {
            let cfg = args.resolve(ExperimentConfig::default())?;
            let out = commands::train(&cfg)?;
            println!(
                "{}: final_loss={} avg_grad_norm_sq={} -> {}, {}",
                out.result.algorithm,
                out.result.final_loss,
                out.result.avg_grad_norm_sq,
                out.trajectory.display(),
                out.summary.display()
            );
        }
        Command::Compare(args) => {
            let cfg = args.resolve(ExperimentConfig::default())?;
            let out = commands::compare(&cfg)?;
            for s in &out.summaries {
                println!("{}: final_loss={} avg_grad_norm_sq={}", s.algorithm, s.final_loss, s.avg_grad_norm_sq);
            }
            println!("-> {}", out.csv.display());
        }
        Command::Bound { run, at_cap, assumptions, radius } => {
            let cfg = run.resolve(ExperimentConfig { assumptions, radius, ..Default::default() })?;
            let out = commands::bound(&cfg, at_cap)?;
            for w in &out.report.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "empirical={} bound={} satisfied={} eta={} eta_max={} -> {}",
                out.report.empirical,
                out.report.bound,
                out.report.satisfied,
                out.report.eta,
                out.report.eta_max,
                out.path.display()
            );
        }
        Command::Sweep { run, grid } => {
            let mut axes = std::collections::BTreeMap::new();
            for g in &grid {
                let (k, v) = parse_grid_arg(g)?;
                axes.insert(k, v);
            }
            let extra = ExperimentConfig { sweep: (!axes.is_empty()).then_some(axes), ..Default::default() };
            let cfg = run.resolve(extra)?;
            let out = commands::sweep(&cfg)?;
            for r in out.rows.iter().filter(|r| r.message.is_some()) {
                eprintln!("note: tau={} delay={} xi={}: {}", r.params.tau, r.params.delay, r.params.xi, r.message.as_deref().unwrap_or(""));
            }
            println!("{} grid points -> {}", out.rows.len(), out.csv.display());
        }
        Command::Perf(args) => {
            let source = match (&args.inputs, &args.model, &args.hardware) {
                (Some(path), _, _) => PerfSource::Inputs {
                    name: args
                        .model
                        .clone()
                        .or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()))
                        .unwrap_or_else(|| "custom".into()),
                    path: path.clone(),
                },
                (None, Some(model), Some(hw)) => PerfSource::Catalog {
                    model: model.clone(),
                    hardware: hw.clone(),
                    scheme: args.scheme.clone(),
                },
                _ => return Err(CliError::Config("perf needs <MODEL> <HARDWARE> [SCHEME] or --inputs FILE".into())),
            };
            let output_dir = args.output_dir.clone().or_else(env_out_dir).unwrap_or_else(|| PathBuf::from("out"));
            let req = PerfRequest {
                source,
                m_values: args.m.clone().unwrap_or_else(commands::default_m_values),
                tau: args.tau,
                delay: args.delay,
                output_dir,
            };
            let out = commands::perf(&req)?;
            let r = &out.recommendation;
            println!(
                "{} {} {}: d={} tau={} feasible={} slack={} -> {}, {}",
                r.model,
                r.hardware,
                r.scheme,
                r.d,
                r.tau,
                r.feasible,
                r.slack,
                out.csv.display(),
                out.json.display()
            );
        }
    }
    Ok(())
}
