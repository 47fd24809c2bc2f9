use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dasgd_core::objectives::ObjectiveSpec;
use dasgd_core::{HyperParams, LrSchedule};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Environment variable that overrides the output directory of a config
/// file. A command-line flag still wins over it.
pub const OUT_DIR_ENV: &str = "DASGD_OUT_DIR";

/// Where the assumption constants of a bound report come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssumptionSource {
    /// Closed form from the objective; quadratic only.
    Analytic,
    /// Sampled around the starting point.
    Estimated,
}

/// Experiment description read from JSON.
///
/// Every field is optional in the file; missing ones take the defaults of
/// [`HyperParams::default`] and the values below. Unknown keys are
/// rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: Option<String>,
    pub objective: Option<ObjectiveSpec>,
    pub eta: Option<f64>,
    pub tau: Option<usize>,
    pub delay: Option<usize>,
    pub xi: Option<f64>,
    pub workers: Option<usize>,
    pub local_batch: Option<usize>,
    pub steps: Option<usize>,
    pub seed: Option<u64>,
    pub lr_schedule: Option<LrSchedule>,
    /// Seeds averaged over by `bound` and `sweep`.
    pub seeds: Option<Vec<u64>>,
    pub output_dir: Option<PathBuf>,
    /// Worker-level threads inside one run; 1 is sequential.
    pub threads: Option<usize>,
    pub assumptions: Option<AssumptionSource>,
    /// Cube half-width for estimated assumption constants.
    pub radius: Option<f64>,
    /// Parameter name to list of values, expanded as a cartesian grid.
    pub sweep: Option<BTreeMap<String, Vec<f64>>>,
}

/// Fully resolved settings for one command.
#[derive(Clone, Debug, PartialEq)]
pub struct Resolved {
    pub algorithm: String,
    pub objective: ObjectiveSpec,
    pub params: HyperParams,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub threads: usize,
    pub assumptions: AssumptionSource,
    pub radius: f64,
    pub sweep: BTreeMap<String, Vec<f64>>,
}

pub const SWEEP_KEYS: [&str; 8] = ["eta", "tau", "delay", "xi", "workers", "local_batch", "steps", "seed"];

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Values set in `over` replace those in `self`.
    pub fn overlay(mut self, over: ExperimentConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f; } )* };
        }
        take!(
            algorithm, objective, eta, tau, delay, xi, workers, local_batch, steps, seed, lr_schedule, seeds,
            output_dir, threads, assumptions, radius
        );
        if let Some(grid) = over.sweep {
            let mut merged = self.sweep.take().unwrap_or_default();
            merged.extend(grid);
            self.sweep = Some(merged);
        }
        self
    }

    /// Fills defaults and validates. `env_out_dir` sits between the file
    /// and the flags: flag > environment > file > default.
    pub fn resolve(file: ExperimentConfig, flags: ExperimentConfig, env_out_dir: Option<PathBuf>) -> CliResult<Resolved> {
        let mut cfg = file;
        if let Some(dir) = env_out_dir {
            cfg.output_dir = Some(dir);
        }
        let cfg = cfg.overlay(flags);
        let d = HyperParams::default();
        let params = HyperParams {
            eta: cfg.eta.unwrap_or(d.eta),
            tau: cfg.tau.unwrap_or(d.tau),
            delay: cfg.delay.unwrap_or(d.delay),
            xi: cfg.xi.unwrap_or(d.xi),
            workers: cfg.workers.unwrap_or(d.workers),
            local_batch: cfg.local_batch.unwrap_or(d.local_batch),
            steps: cfg.steps.unwrap_or(d.steps),
            seed: cfg.seed.unwrap_or(d.seed),
            lr_schedule: cfg.lr_schedule.unwrap_or(d.lr_schedule),
        };
        let sweep = cfg.sweep.unwrap_or_default();
        for (k, v) in &sweep {
            if !SWEEP_KEYS.contains(&k.as_str()) {
                return Err(CliError::Config(format!("unknown sweep key `{k}`; expected one of {SWEEP_KEYS:?}")));
            }
            if v.is_empty() {
                return Err(CliError::Config(format!("sweep key `{k}` has no values")));
            }
        }
        if sweep.is_empty() {
            params.validate()?;
        }
        let seeds = cfg.seeds.unwrap_or_else(|| vec![params.seed]);
        if seeds.is_empty() {
            return Err(CliError::Config("`seeds` must not be empty".into()));
        }
        let radius = cfg.radius.unwrap_or(1.0);
        if !(radius.is_finite() && radius > 0.0) {
            return Err(CliError::Config(format!("`radius` must be > 0, got {radius}")));
        }
        Ok(Resolved {
            algorithm: cfg.algorithm.unwrap_or_else(|| "dasgd".into()),
            objective: cfg.objective.unwrap_or_else(|| ObjectiveSpec::new("quadratic")),
            params,
            seeds,
            output_dir: cfg.output_dir.unwrap_or_else(|| PathBuf::from("out")),
            threads: cfg.threads.unwrap_or(1),
            assumptions: cfg.assumptions.unwrap_or(AssumptionSource::Analytic),
            radius,
            sweep,
        })
    }
}

/// Applies one sweep value to `params`. Integer keys must hold integral,
/// non-negative values.
pub fn apply_sweep_value(params: &mut HyperParams, key: &str, value: f64) -> CliResult<()> {
    let int = || -> CliResult<usize> {
        if value >= 0.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
            Ok(value as usize)
        } else {
            Err(CliError::Config(format!("sweep key `{key}` needs non-negative integers, got {value}")))
        }
    };
    match key {
        "eta" => params.eta = value,
        "xi" => params.xi = value,
        "tau" => params.tau = int()?,
        "delay" => params.delay = int()?,
        "workers" => params.workers = int()?,
        "local_batch" => params.local_batch = int()?,
        "steps" => params.steps = int()?,
        "seed" => params.seed = int()? as u64,
        _ => return Err(CliError::Config(format!("unknown sweep key `{key}`"))),
    }
    Ok(())
}

/// Parses `key=v1,v2,...` as given to `--grid`.
pub fn parse_grid_arg(arg: &str) -> CliResult<(String, Vec<f64>)> {
    let (k, vs) = arg
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("grid entry `{arg}` must look like key=v1,v2")))?;
    let values = vs
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| CliError::Config(format!("bad grid value `{v}` for `{k}`"))))
        .collect::<CliResult<Vec<f64>>>()?;
    Ok((k.trim().to_string(), values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        let e = ExperimentConfig::from_json(r#"{"etta": 0.1}"#).unwrap_err();
        assert!(e.to_string().contains("etta"));
    }

    #[test]
    fn precedence() {
        let file = ExperimentConfig::from_json(r#"{"eta": 0.1, "tau": 8, "output_dir": "a"}"#).unwrap();
        let flags = ExperimentConfig { eta: Some(0.2), ..Default::default() };
        let r = ExperimentConfig::resolve(file.clone(), flags.clone(), Some("b".into())).unwrap();
        assert_eq!(r.params.eta, 0.2);
        assert_eq!(r.params.tau, 8);
        assert_eq!(r.params.workers, HyperParams::default().workers);
        assert_eq!(r.output_dir, PathBuf::from("b"));
        let flags = ExperimentConfig { output_dir: Some("c".into()), ..flags };
        let r = ExperimentConfig::resolve(file, flags, Some("b".into())).unwrap();
        assert_eq!(r.output_dir, PathBuf::from("c"));
    }

    #[test]
    fn invalid_delay_names_field() {
        let file = ExperimentConfig::from_json(r#"{"tau": 2, "delay": 2}"#).unwrap();
        let e = ExperimentConfig::resolve(file, Default::default(), None).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("delay"));
    }

    #[test]
    fn grid_args() {
        assert_eq!(parse_grid_arg("xi=0,0.5").unwrap(), ("xi".to_string(), vec![0.0, 0.5]));
        assert!(parse_grid_arg("xi").is_err());
        let mut p = HyperParams::default();
        assert!(apply_sweep_value(&mut p, "tau", 2.5).is_err());
        apply_sweep_value(&mut p, "tau", 6.0).unwrap();
        assert_eq!(p.tau, 6);
    }
}
