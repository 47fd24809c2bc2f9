//! Learning-rate caps and convergence bounds for delayed averaging.
//!
//! Notation follows the engine: `M` workers, period `tau`, delay `d`, local
//! proportion `xi`. The iteration count `K` in the bounds counts averaging
//! periods, `K = steps / tau`, so that `K·tau` is the total number of local
//! steps and the left-hand side is the mean squared gradient norm of the
//! averaged model over the run.

use serde::{Deserialize, Serialize};

use crate::engine::Trajectory;
use crate::error::{Error, Result};
use crate::objectives::{estimate_lipschitz, estimate_variance, norm_sq, Objective};
use crate::rng::{Purpose, RngStream};
use crate::schedule::HyperParams;

/// Minimum number of seeds for the empirical side to count as an
/// expectation.
pub const MIN_SEEDS: usize = 16;

/// Smoothness, noise and objective-gap constants entering the bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionParams {
    /// Lipschitz constant `L` of `∇F`.
    pub lipschitz: f64,
    pub beta: f64,
    pub sigma_sq: f64,
    /// `F(μ₁)`.
    pub f_initial: f64,
    pub f_inf: f64,
    /// Squared Frobenius norm of the warm-up gradient sum.
    pub g0: f64,
}

impl AssumptionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lipschitz.is_finite() && self.lipschitz > 0.0) {
            return Err(Error::invalid("lipschitz", "must be finite and > 0"));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::invalid("beta", "must be >= 0"));
        }
        if !(self.sigma_sq >= 0.0) {
            return Err(Error::invalid("sigma_sq", "must be >= 0"));
        }
        if !(self.f_initial >= self.f_inf) {
            return Err(Error::invalid("f_initial", "must be >= f_inf"));
        }
        if !(self.g0 >= 0.0) {
            return Err(Error::invalid("g0", "must be >= 0"));
        }
        Ok(())
    }

    /// Closed-form constants, when the objective provides them, evaluated
    /// at the local batch size of `params` and starting point `x0`.
    pub fn analytic(objective: &dyn Objective, params: &HyperParams, x0: &[f64]) -> Option<Self> {
        let c = objective.analytic_constants(params.local_batch)?;
        Some(AssumptionParams {
            lipschitz: c.lipschitz,
            beta: c.beta,
            sigma_sq: c.sigma_sq,
            f_initial: objective.loss(x0),
            f_inf: c.f_inf,
            g0: 0.0,
        })
    }

    /// Sampled estimates around `x0`: Lipschitz constant from random pairs,
    /// `(σ², β)` from a variance fit over probe points.
    ///
    /// `f_inf` falls back to the smallest loss seen at the probes when the
    /// objective offers no hint.
    pub fn estimated(objective: &dyn Objective, params: &HyperParams, x0: &[f64], radius: f64, seed: u64) -> Result<Self> {
        let mut rng = RngStream::new(seed, 0, Purpose::Probe);
        let lipschitz = estimate_lipschitz(objective, x0, 2000, radius, &mut rng);
        let points: Vec<Vec<f64>> = (0..8)
            .map(|i| {
                let s = radius * i as f64 / 7.0;
                x0.iter()
                    .map(|c| c + s * (2.0 * rand::Rng::random::<f64>(&mut rng) - 1.0))
                    .collect()
            })
            .collect();
        let fit = estimate_variance(objective, &points, 64, params.local_batch, &mut rng)?;
        let f_initial = objective.loss(x0);
        let f_inf = objective.f_inf_hint().unwrap_or_else(|| {
            points.iter().map(|p| objective.loss(p)).fold(f_initial, f64::min)
        });
        Ok(AssumptionParams {
            lipschitz,
            beta: fit.beta,
            sigma_sq: fit.sigma_sq,
            f_initial,
            f_inf: f_inf.min(f_initial),
            g0: 0.0,
        })
    }

    pub fn with_g0(mut self, g0: f64) -> Self {
        self.g0 = g0;
        self
    }
}

/// `(d − 1)² Σ_m ‖g_m‖²` over the per-worker gradients recorded at step
/// `d − 1`; zero for `d ≤ 1`.
pub fn warmup_g0(trajectory: &Trajectory) -> f64 {
    let d = trajectory.params.delay;
    if d <= 1 {
        return 0.0;
    }
    let scale = ((d - 1) * (d - 1)) as f64;
    trajectory
        .warmup_gradients
        .as_ref()
        .map_or(0.0, |gs| scale * gs.iter().map(|g| norm_sq(g)).sum::<f64>())
}

/// Number of averaging periods `K` covered by a run.
pub fn outer_iterations(params: &HyperParams) -> f64 {
    params.steps as f64 / params.tau as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrCaps {
    pub a: f64,
    pub b: f64,
    pub eta_max: f64,
    /// `xi = 0` makes `b` vanish; `eta_max` then uses `a` alone.
    pub b_degenerate: bool,
}

struct Shape {
    m: f64,
    tau: f64,
    d: f64,
    xi: f64,
    k: f64,
}

impl Shape {
    fn of(params: &HyperParams) -> Result<Self> {
        params.validate()?;
        if params.xi >= 1.0 {
            return Err(Error::CapUndefined(format!(
                "xi = {} leaves the averaging term undefined; need xi < 1",
                params.xi
            )));
        }
        Ok(Shape {
            m: params.workers as f64,
            tau: params.tau as f64,
            d: params.delay as f64,
            xi: params.xi,
            k: outer_iterations(params),
        })
    }

    /// `ξd + τ − d`.
    fn effective_period(&self) -> f64 {
        self.xi * self.d + self.tau - self.d
    }

    /// `ξ²d + τ − d`.
    fn noise_period(&self) -> f64 {
        self.xi * self.xi * self.d + self.tau - self.d
    }

    /// `ξ²/(1 − ξ²)`.
    fn geometric(&self) -> f64 {
        let x2 = self.xi * self.xi;
        x2 / (1.0 - x2)
    }

    /// `τξ²(τ − d + ξd)/(1 − ξ²) + (τ − d)² + ξd(τ − 1)`.
    fn variance_bracket(&self) -> f64 {
        let td = self.tau - self.d;
        self.tau * self.geometric() * (td + self.xi * self.d) + td * td + self.xi * self.d * (self.tau - 1.0)
    }
}

/// Learning-rate caps `a`, `b` and `eta_max = min(√a, √b)`.
pub fn lr_caps(ap: &AssumptionParams, params: &HyperParams) -> Result<LrCaps> {
    ap.validate()?;
    let s = Shape::of(params)?;
    let (l, beta) = (ap.lipschitz, ap.beta);
    let k_tau = s.k * s.tau;
    let common = 2.0 * l * s.xi * s.xi * (beta + 1.0) * (1.0 - s.xi);
    let bracket = (beta + k_tau) + (beta + 1.0) * (1.0 - s.xi);
    let a = 1.0 / (common + 6.0 * l * l * s.effective_period() * bracket);
    let b = s.xi * s.m * (1.0 - s.xi)
        / (common + 3.0 * l * l * s.m * (s.tau - s.d) * (2.0 * beta + 2.0 * k_tau) + 6.0 * s.d * s.m * s.xi * l * l * bracket);
    let b_degenerate = b <= 0.0;
    let eta_max = if b_degenerate { a.sqrt() } else { a.sqrt().min(b.sqrt()) };
    Ok(LrCaps { a, b, eta_max, b_degenerate })
}

/// Value of the convergence bound and its three terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremBound {
    pub value: f64,
    pub terms: [f64; 3],
    pub eta_max: f64,
    /// `eta ≤ eta_max`; the bound is only guaranteed when this holds.
    pub within_cap: bool,
}

/// Bound on the mean squared gradient norm after `K` periods at constant
/// learning rate `eta`. Returns `+∞` for `eta = 0`.
pub fn theorem_bound(ap: &AssumptionParams, params: &HyperParams, eta: f64) -> Result<TheoremBound> {
    let caps = lr_caps(ap, params)?;
    let s = Shape::of(params)?;
    let l = ap.lipschitz;
    let gap = ap.f_initial - ap.f_inf;
    let tp = s.effective_period();
    let within_cap = eta <= caps.eta_max;
    if eta <= 0.0 {
        return Ok(TheoremBound {
            value: f64::INFINITY,
            terms: [f64::INFINITY, 0.0, 0.0],
            eta_max: caps.eta_max,
            within_cap,
        });
    }
    let eta4 = eta.powi(4);
    let t1 = (2.0 * s.m * gap + 2.0 * s.m * s.k * l * eta * eta * ap.sigma_sq * s.noise_period()) / (eta * s.m * s.k * tp);
    let t2 = 3.0 * eta4 * s.xi * l * l * (s.tau - s.d + s.d * s.xi) / (s.m * s.k * tp) * s.geometric() * ap.g0;
    let t3 = 6.0 * eta4 * l * l * ap.sigma_sq / tp * s.variance_bracket();
    Ok(TheoremBound {
        value: t1 + t2 + t3,
        terms: [t1, t2, t3],
        eta_max: caps.eta_max,
        within_cap,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorollaryBound {
    /// All three terms, scaling as `1/√K`, `1/K³` and `1/K²`.
    pub full: f64,
    /// Leading `1/√K` term only.
    pub asymptotic: f64,
    pub terms: [f64; 3],
}

/// The bound with `eta = A/√K` substituted.
pub fn corollary_bound(ap: &AssumptionParams, params: &HyperParams, a_const: f64) -> Result<CorollaryBound> {
    ap.validate()?;
    if !(a_const > 0.0) {
        return Err(Error::invalid("A", "must be > 0"));
    }
    let s = Shape::of(params)?;
    let l = ap.lipschitz;
    let gap = ap.f_initial - ap.f_inf;
    let tp = s.effective_period();
    let a4 = a_const.powi(4);
    let c1 = (2.0 * s.m * gap + 2.0 * s.m * l * a_const * a_const * ap.sigma_sq * s.noise_period())
        / (a_const * s.m * s.k.sqrt() * tp);
    let c2 = 3.0 * a4 * s.xi * l * l * (s.tau - s.d + s.d * s.xi) / (s.m * s.k.powi(3) * tp) * s.geometric() * ap.g0;
    let c3 = 6.0 * a4 * l * l * ap.sigma_sq / (s.k * s.k * tp) * s.variance_bracket();
    Ok(CorollaryBound {
        full: c1 + c2 + c3,
        asymptotic: c1,
        terms: [c1, c2, c3],
    })
}

/// Learning rate `A/√K` matching [`corollary_bound`].
pub fn corollary_eta(params: &HyperParams, a_const: f64) -> f64 {
    a_const / outer_iterations(params).sqrt()
}

/// Empirical mean squared gradient norm against the bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub params: HyperParams,
    pub assumption_params: AssumptionParams,
    pub eta: f64,
    pub eta_max: f64,
    /// Seed average of the per-run mean `‖∇F(μ_k)‖²`.
    pub empirical: f64,
    /// `null` in JSON when infinite (`eta = 0`).
    pub bound: f64,
    pub satisfied: bool,
    pub seeds: Vec<u64>,
    pub warnings: Vec<String>,
}

/// Compares seed-averaged trajectories against [`theorem_bound`].
///
/// Fewer than [`MIN_SEEDS`] runs, an `eta` above the cap, or `eta = 0`
/// produce warnings but still yield a report.
pub fn empirical_vs_bound(
    trajectories: &[Trajectory],
    ap: &AssumptionParams,
    params: &HyperParams,
    eta: f64,
) -> Result<BoundReport> {
    if trajectories.is_empty() {
        return Err(Error::invalid("trajectories", "need at least one run"));
    }
    let bound = theorem_bound(ap, params, eta)?;
    let empirical = trajectories.iter().map(Trajectory::avg_grad_norm_sq).sum::<f64>() / trajectories.len() as f64;
    let mut warnings = Vec::new();
    if trajectories.len() < MIN_SEEDS {
        warnings.push(format!(
            "only {} seed(s); the bound holds in expectation and needs >= {MIN_SEEDS} seeds to be meaningful",
            trajectories.len()
        ));
    }
    if !bound.within_cap {
        warnings.push(format!("eta = {eta} exceeds eta_max = {}; bound not guaranteed", bound.eta_max));
    }
    if eta <= 0.0 {
        warnings.push("eta = 0: bound is infinite, comparison is degenerate".to_string());
    }
    let satisfied = empirical <= bound.value;
    if !satisfied && trajectories.len() < MIN_SEEDS {
        warnings.push("unsatisfied with too few seeds; the expectation may not be realised".to_string());
    }
    Ok(BoundReport {
        params: params.clone(),
        assumption_params: *ap,
        eta,
        eta_max: bound.eta_max,
        empirical,
        bound: bound.value,
        satisfied,
        seeds: trajectories.iter().map(|t| t.params.seed).collect(),
        warnings,
    })
}
