use serde::{Deserialize, Serialize};

use super::timing::{CommCost, ComputeCost, PerfInputs};
use crate::error::{Error, Result};

/// Workers and local batch at which the catalog times were measured.
pub const CATALOG_WORKERS: usize = 256;
pub const CATALOG_LOCAL_BATCH: usize = 64;
/// Samples per epoch used when a catalog entry is turned into inputs.
pub const DEFAULT_DATASET_SIZE: f64 = 50_000.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hardware {
    /// TITAN X GPUs on 20 Gbps Ethernet.
    Titan,
    /// K80 GPUs on 10 Gbps Ethernet.
    K80,
}

impl Hardware {
    pub fn key(self) -> &'static str {
        match self {
            Hardware::Titan => "titan",
            Hardware::K80 => "k80",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "titan" | "titanx" | "titan-x" => Ok(Hardware::Titan),
            "k80" => Ok(Hardware::K80),
            _ => Err(Error::UnknownKey { kind: "hardware", name: s.to_string() }),
        }
    }

    pub const ALL: [Hardware; 2] = [Hardware::Titan, Hardware::K80];
}

/// Measured times (ms) for one model on one hardware setup, plus the
/// delay and period recommended alongside them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HardwareTiming {
    pub t_p: f64,
    pub t_c_tree: f64,
    pub t_c_butterfly: f64,
    pub delay: usize,
    pub tau: usize,
}

impl HardwareTiming {
    pub fn t_comm(&self, scheme: &str) -> Result<f64> {
        match scheme.to_ascii_lowercase().as_str() {
            "tree" => Ok(self.t_c_tree),
            "butterfly" => Ok(self.t_c_butterfly),
            _ => Err(Error::UnknownKey { kind: "allreduce scheme", name: scheme.to_string() }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CatalogEntry {
    pub model: &'static str,
    pub key: &'static str,
    pub n_params: u64,
    pub titan: HardwareTiming,
    pub k80: HardwareTiming,
}

impl CatalogEntry {
    pub fn timing(&self, hw: Hardware) -> &HardwareTiming {
        match hw {
            Hardware::Titan => &self.titan,
            Hardware::K80 => &self.k80,
        }
    }

    /// Inputs reproducing the catalog point: per-iteration compute `t_p`,
    /// and the measured AllReduce time at 256 workers rescaled by
    /// `ceil(log₂ m)` for other worker counts.
    pub fn inputs(&self, hw: Hardware, scheme: &str) -> Result<PerfInputs> {
        let t = self.timing(hw);
        Ok(PerfInputs {
            n_params: self.n_params as f64,
            bytes_per_param: 4.0,
            workers: CATALOG_WORKERS,
            parallel_samples: 1,
            local_batch: CATALOG_LOCAL_BATCH,
            dataset_size: DEFAULT_DATASET_SIZE,
            compute: ComputeCost::PerIteration { t_iter: t.t_p },
            comm: CommCost::Calibrated {
                t_comm: t.t_comm(scheme)?,
                at_workers: CATALOG_WORKERS,
            },
            scheme: scheme.to_ascii_lowercase(),
        })
    }
}

const fn hw(t_p: f64, t_c_tree: f64, t_c_butterfly: f64, delay: usize, tau: usize) -> HardwareTiming {
    HardwareTiming { t_p, t_c_tree, t_c_butterfly, delay, tau }
}

/// Parameters and times at 256 workers with local batch 64.
pub static CATALOG: [CatalogEntry; 7] = [
    CatalogEntry {
        model: "Network-in-Network",
        key: "nin",
        n_params: 7_595_176,
        titan: hw(119.08, 132.91, 66.45, 2, 3),
        k80: hw(129.80, 254.43, 127.21, 2, 3),
    },
    CatalogEntry {
        model: "VGG-16",
        key: "vgg16",
        n_params: 138_357_544,
        titan: hw(2164.32, 2421.25, 1210.62, 2, 3),
        k80: hw(2361.61, 4634.97, 2317.48, 2, 3),
    },
    CatalogEntry {
        model: "VGG-19",
        key: "vgg19",
        n_params: 143_667_240,
        titan: hw(2684.73, 2514.17, 1257.08, 1, 2),
        k80: hw(2932.49, 4812.85, 2406.42, 2, 3),
    },
    CatalogEntry {
        model: "ResNet-50",
        key: "resnet50",
        n_params: 25_530_472,
        titan: hw(526.05, 446.78, 223.39, 1, 2),
        k80: hw(575.29, 855.27, 427.63, 2, 3),
    },
    CatalogEntry {
        model: "ResNeXt-50",
        key: "resnext50",
        n_params: 167_153_128,
        titan: hw(1640.05, 2925.17, 1462.58, 2, 3),
        k80: hw(1795.83, 5599.62, 2799.81, 4, 5),
    },
    CatalogEntry {
        model: "DenseNet-121",
        key: "densenet121",
        n_params: 7_905_448,
        titan: hw(358.23, 138.34, 69.17, 1, 2),
        k80: hw(390.73, 264.83, 132.41, 1, 2),
    },
    CatalogEntry {
        model: "DenseNet-201",
        key: "densenet201",
        n_params: 17_900_106,
        titan: hw(538.06, 313.25, 156.62, 1, 2),
        k80: hw(587.64, 599.65, 299.82, 2, 3),
    },
];

/// Finds an entry by key or display name, ignoring case and `-`/`_`.
pub fn lookup(name: &str) -> Result<&'static CatalogEntry> {
    let norm = |s: &str| s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
    let want = norm(name);
    CATALOG
        .iter()
        .find(|e| e.key == want || norm(e.model) == want)
        .ok_or_else(|| Error::UnknownKey { kind: "catalog model", name: name.to_string() })
}
