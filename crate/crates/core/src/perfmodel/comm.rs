use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};

/// `ceil(log₂ m)`, with `0` for `m ≤ 1`.
pub fn ceil_log2(m: usize) -> u32 {
    if m <= 1 {
        0
    } else {
        usize::BITS - (m - 1).leading_zeros()
    }
}

/// Cost model of one AllReduce algorithm: how many full-model transfers a
/// worker makes for `m` participants.
pub trait AllReduceScheme: Send + Sync {
    fn name(&self) -> &'static str;

    fn transfer_rounds(&self, m: usize) -> f64;
}

/// Reduce up a binary tree, then broadcast back down.
#[derive(Clone, Copy, Debug, Default)]
pub struct Tree;

/// Recursive halving/doubling exchange.
#[derive(Clone, Copy, Debug, Default)]
pub struct Butterfly;

impl AllReduceScheme for Tree {
    fn name(&self) -> &'static str {
        "tree"
    }

    fn transfer_rounds(&self, m: usize) -> f64 {
        2.0 * ceil_log2(m) as f64
    }
}

impl AllReduceScheme for Butterfly {
    fn name(&self) -> &'static str {
        "butterfly"
    }

    fn transfer_rounds(&self, m: usize) -> f64 {
        ceil_log2(m) as f64
    }
}

/// Communication time of one AllReduce of `n_params` parameters.
pub fn comm_time(n_params: f64, bytes_per_param: f64, bandwidth: f64, m: usize, scheme: &dyn AllReduceScheme) -> f64 {
    let per_round = n_params * bytes_per_param / bandwidth;
    scheme.transfer_rounds(m) * per_round
}

#[derive(Clone)]
pub struct SchemeRegistry {
    schemes: BTreeMap<String, Arc<dyn AllReduceScheme>>,
}

impl Default for SchemeRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl SchemeRegistry {
    pub fn with_builtins() -> Self {
        let mut r = SchemeRegistry { schemes: BTreeMap::new() };
        r.register(Arc::new(Tree));
        r.register(Arc::new(Butterfly));
        r
    }

    pub fn register(&mut self, scheme: Arc<dyn AllReduceScheme>) {
        self.schemes.insert(scheme.name().to_string(), scheme);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn AllReduceScheme>> {
        self.schemes.get(&name.to_ascii_lowercase()).cloned().ok_or_else(|| Error::UnknownKey {
            kind: "allreduce scheme",
            name: name.to_string(),
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.schemes.keys().map(String::as_str)
    }
}
