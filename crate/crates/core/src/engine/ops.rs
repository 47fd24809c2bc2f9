use crate::error::{Error, Result};
use crate::objectives::{Batch, Objective};

/// One local SGD step: `x − eta · g(x, batch)`.
///
/// `step` is only used to label a [`Error::Diverged`] result.
pub fn local_step(x: &[f64], objective: &dyn Objective, eta: f64, batch: &Batch, step: usize) -> Result<Vec<f64>> {
    local_step_with_grad(x, objective, eta, batch, step).map(|(v, _)| v)
}

pub(crate) fn local_step_with_grad(
    x: &[f64],
    objective: &dyn Objective,
    eta: f64,
    batch: &Batch,
    step: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let g = objective.stoch_grad(x, batch);
    let v: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - eta * gi).collect();
    ensure_finite(&v, step)?;
    Ok((v, g))
}

pub(crate) fn ensure_finite(v: &[f64], step: usize) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Diverged { step })
    }
}

/// Arithmetic mean of `payloads` in a fixed reduction order.
///
/// The first payload is taken as reference; deviations from it are summed
/// in a pairwise tree over worker ids (0+1, 2+3, …, then pairs of pairs,
/// an odd tail carried up unchanged) and the scaled sum is added back. The
/// order depends only on the number of payloads, and equal payloads average
/// to themselves bit for bit.
pub fn all_reduce_average<V: AsRef<[f64]>>(payloads: &[V]) -> Result<Vec<f64>> {
    let first = payloads
        .first()
        .ok_or_else(|| Error::invalid("payloads", "need at least one payload"))?
        .as_ref();
    let dim = first.len();
    for p in payloads {
        if p.as_ref().len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: p.as_ref().len() });
        }
    }
    let m = payloads.len();
    if m == 1 {
        return Ok(first.to_vec());
    }
    let mut level: Vec<Vec<f64>> = payloads
        .iter()
        .map(|p| p.as_ref().iter().zip(first).map(|(a, r)| a - r).collect())
        .collect();
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|pair| match pair {
                [a, b] => a.iter().zip(b).map(|(x, y)| x + y).collect(),
                [a] => a.clone(),
                _ => unreachable!(),
            })
            .collect();
    }
    let scale = m as f64;
    Ok(first.iter().zip(&level[0]).map(|(r, s)| r + s / scale).collect())
}

/// `xi · v_local + (1 − xi) · pending`, elementwise.
pub fn merge(v_local: &[f64], pending: &[f64], xi: f64) -> Vec<f64> {
    v_local
        .iter()
        .zip(pending)
        .map(|(v, p)| xi * v + (1.0 - xi) * p)
        .collect()
}
