//! Post-hoc checks of a [`SolveTrace`] against the descent and local-rate properties of
//! the iteration.

use serde::{Deserialize, Serialize};

use super::trace::SolveTrace;

/// Absolute slack allowed in the gradient-related inequality.
pub const GRADIENT_RELATED_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientRelatedReport {
    /// `−γ̂ₖ·min{1,λₖ}·‖dₖ‖² + slack − ∇φₖᵀdₖ`; negative means the check failed.
    pub margins: Vec<f64>,
    pub failures: Vec<usize>,
    pub passed: bool,
}

/// Checks `∇φₖᵀdₖ ≤ −γ̂ₖ·min{1, λₖ}·‖dₖ‖² + 1e-10` at every recorded iteration.
///
/// `completeness[k]` is `γ̂` for iterate `k`. When `None`, the values recorded by the
/// solver's GSVD diagnostics are used; iterations without either are skipped.
pub fn gradient_related_check(
    trace: &SolveTrace,
    completeness: Option<&[f64]>,
) -> GradientRelatedReport {
    let mut margins = Vec::new();
    let mut failures = Vec::new();
    for (i, r) in trace.iterations.iter().enumerate() {
        let gamma = match completeness {
            Some(g) => g.get(i).copied(),
            None => r.diagnostics.map(|d| d.completeness),
        };
        let Some(gamma) = gamma else { continue };
        let bound = -gamma * r.lambda.min(1.0) * r.step_norm * r.step_norm;
        let margin = bound + GRADIENT_RELATED_SLACK - r.dir_deriv;
        if margin < 0.0 {
            failures.push(r.k);
        }
        margins.push(margin);
    }
    GradientRelatedReport {
        passed: failures.is_empty(),
        margins,
        failures,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateCheckOptions {
    /// Iterates with `dist ≤ floor` are treated as roundoff and excluded.
    pub floor: f64,
    /// Number of trailing ratios examined.
    pub tail: usize,
    /// Upper bound required of `dist_{k+1}/dist_k²` on the tail.
    pub bound: f64,
}

impl Default for RateCheckOptions {
    fn default() -> Self {
        Self {
            floor: 1e-7,
            tail: 3,
            bound: 1e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    /// `dist_{k+1}/dist_k²` for every consecutive pair with `dist_k > floor`.
    pub ratios: Vec<f64>,
    /// The last `tail` entries of `ratios`.
    pub tail_ratios: Vec<f64>,
    pub max_tail_ratio: f64,
    /// `max ‖dₖ‖/distₖ` over pre-roundoff iterations.
    pub step_constant: f64,
    /// `max ‖Jₖdₖ + Fₖ‖/distₖ²` over pre-roundoff iterations.
    pub linearized_constant: f64,
    /// `log distₖ` strictly decreasing with nonincreasing increments on the tail.
    pub log_convex_decreasing: bool,
    pub bounded: bool,
}

/// Empirical quadratic-rate check on the solution distances recorded in a trace.
///
/// Returns `None` when the problem did not supply `dist(·, X*)` or when fewer than
/// `tail` pre-roundoff ratios are available.
pub fn local_rate_check(trace: &SolveTrace, opts: &RateCheckOptions) -> Option<RateReport> {
    let dist = trace.distances()?;
    let mut ratios = Vec::new();
    let mut pairs = Vec::new();
    for k in 0..dist.len().saturating_sub(1) {
        if dist[k] > opts.floor {
            ratios.push(dist[k + 1] / (dist[k] * dist[k]));
            pairs.push(k);
        }
    }
    if ratios.len() < opts.tail || opts.tail == 0 {
        return None;
    }
    let start = ratios.len() - opts.tail;
    let tail_ratios = ratios[start..].to_vec();
    let max_tail_ratio = tail_ratios.iter().copied().fold(0.0_f64, f64::max);

    let mut step_constant = 0.0_f64;
    let mut linearized_constant = 0.0_f64;
    for r in &trace.iterations {
        if let Some(d) = r.dist {
            if d > opts.floor {
                step_constant = step_constant.max(r.step_norm / d);
                linearized_constant = linearized_constant.max(r.linearized_norm / (d * d));
            }
        }
    }

    // Iterates covered by the tail: pairs[start] ..= pairs[last] + 1.
    let first = pairs[start];
    let last = pairs[pairs.len() - 1] + 1;
    let logs: Vec<f64> = dist[first..=last]
        .iter()
        .map(|d| d.max(1e-300).ln())
        .collect();
    let incs: Vec<f64> = logs.windows(2).map(|w| w[1] - w[0]).collect();
    let log_convex_decreasing = incs.iter().all(|&i| i < 0.0)
        && incs
            .windows(2)
            .all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));

    Some(RateReport {
        bounded: tail_ratios
            .iter()
            .all(|r| r.is_finite() && *r <= opts.bound),
        ratios,
        tail_ratios,
        max_tail_ratio,
        step_constant,
        linearized_constant,
        log_convex_decreasing,
    })
}
