use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Dataset, LogisticObjective, NoisyQuadratic, Objective, TinyMlpObjective};
use crate::error::{Error, Result};

/// Flat description of an objective, as read from a config file.
///
/// Which fields are consulted depends on `kind`; unset fields fall back to
/// the per-kind defaults below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_max: Option<f64>,
    /// Seed for the synthetic problem (rotation, dataset, init).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reg: Option<f64>,
    /// Optional CSV dataset replacing the synthetic one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    /// Shared starting point; a scalar is broadcast to every coordinate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
}

impl ObjectiveSpec {
    pub fn new(kind: &str) -> Self {
        ObjectiveSpec {
            kind: kind.to_string(),
            dim: None,
            noise_sigma: None,
            l_min: None,
            l_max: None,
            seed: None,
            dataset_size: None,
            hidden: None,
            reg: None,
            csv: None,
            start: None,
        }
    }

    fn dataset(&self) -> Result<Arc<Dataset>> {
        let ds = match &self.csv {
            Some(path) => Dataset::from_csv(path)?,
            None => Dataset::synthetic(
                self.seed.unwrap_or(0),
                self.dataset_size.unwrap_or(512),
                self.dim.unwrap_or(8),
            )?,
        };
        Ok(Arc::new(ds))
    }
}

pub type ObjectiveBuilder = fn(&ObjectiveSpec) -> Result<Arc<dyn Objective>>;

/// Name-keyed table of objective constructors.
pub struct ObjectiveRegistry {
    builders: BTreeMap<String, ObjectiveBuilder>,
}

impl Default for ObjectiveRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl ObjectiveRegistry {
    pub fn empty() -> Self {
        ObjectiveRegistry { builders: BTreeMap::new() }
    }

    /// `quadratic`, `logistic` and `mlp`.
    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("quadratic", build_quadratic);
        r.register("logistic", build_logistic);
        r.register("mlp", build_mlp);
        r
    }

    /// Adds or replaces a builder.
    pub fn register(&mut self, kind: &str, builder: ObjectiveBuilder) {
        self.builders.insert(kind.to_string(), builder);
    }

    pub fn kinds(&self) -> impl Iterator<Item = &str> {
        self.builders.keys().map(String::as_str)
    }

    pub fn build(&self, spec: &ObjectiveSpec) -> Result<Arc<dyn Objective>> {
        let builder = self.builders.get(&spec.kind).ok_or_else(|| Error::UnknownKey {
            kind: "objective",
            name: spec.kind.clone(),
        })?;
        builder(spec)
    }
}

fn build_quadratic(spec: &ObjectiveSpec) -> Result<Arc<dyn Objective>> {
    let dim = spec.dim.unwrap_or(10);
    let mut q = NoisyQuadratic::with_spectrum(
        dim,
        spec.l_min.unwrap_or(0.5),
        spec.l_max.unwrap_or(2.0),
        spec.noise_sigma.unwrap_or(0.1),
        spec.seed.unwrap_or(0),
    )?;
    if let Some(s) = spec.start {
        q = q.with_start(vec![s; dim])?;
    }
    Ok(Arc::new(q))
}

fn build_logistic(spec: &ObjectiveSpec) -> Result<Arc<dyn Objective>> {
    Ok(Arc::new(LogisticObjective::new(spec.dataset()?, spec.reg.unwrap_or(1e-3))))
}

fn build_mlp(spec: &ObjectiveSpec) -> Result<Arc<dyn Objective>> {
    Ok(Arc::new(TinyMlpObjective::new(
        spec.dataset()?,
        spec.hidden.unwrap_or(8),
        spec.reg.unwrap_or(1e-4),
        spec.seed.unwrap_or(0),
    )))
}
