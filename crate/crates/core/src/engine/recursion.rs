use super::trajectory::Trajectory;

/// Result of replaying the averaged-model recursion over a trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecursionReport {
    /// Largest `‖μ_direct − μ_recursion‖` over checked periods.
    pub max_deviation: f64,
    /// Largest `‖μ_direct − μ_recursion‖ / (1 + ‖μ_direct‖)`.
    pub max_relative: f64,
    pub periods: usize,
}

/// Checks, period by period, that
///
/// `μ_{τ(p+1)+d} = μ_{τp+d} − Σ_{i<τ−d} η ḡ_{τp+d+i} − ξ Σ_{τ−d≤i<τ} η ḡ_{τp+d+i}`
///
/// using the recorded worker-averaged gradients and per-step learning rates.
/// Each period starts from the directly recorded `μ_{τp+d}`, so deviations
/// do not compound. An empty set of complete periods yields zeros.
pub fn mu_recursion_check(trajectory: &Trajectory) -> RecursionReport {
    let p = &trajectory.params;
    let (tau, d, xi) = (p.tau, p.delay, p.xi);
    let steps = trajectory.records.len();
    let mut report = RecursionReport { max_deviation: 0.0, max_relative: 0.0, periods: 0 };
    let mut period = 0;
    while tau * (period + 1) + d <= steps {
        let base = tau * period + d;
        let mut mu = trajectory.mu(base).to_vec();
        for i in 0..tau {
            let rec = &trajectory.records[base + i];
            let w = if i < tau - d { rec.lr } else { xi * rec.lr };
            for (m, g) in mu.iter_mut().zip(&rec.avg_grad) {
                *m -= w * g;
            }
        }
        let direct = trajectory.mu(base + tau);
        let dev = direct.iter().zip(&mu).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let scale = 1.0 + direct.iter().map(|a| a * a).sum::<f64>().sqrt();
        report.max_deviation = report.max_deviation.max(dev);
        report.max_relative = report.max_relative.max(dev / scale);
        report.periods += 1;
        period += 1;
    }
    report
}
