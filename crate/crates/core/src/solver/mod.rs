//! Levenberg-Marquardt iteration with singular scaling and an Armijo line search.
//!
//! Each iteration solves `(JₖᵀJₖ + λₖLᵀL) dₖ = −JₖᵀFₖ` with `λₖ = ‖Fₖ‖²`, then takes the
//! unit step if it contracts the residual by `ϑ`, and otherwise backtracks by powers of
//! `η` until the Armijo condition `φ(x + ηᵐd) − φ(x) ≤ ν ηᵐ ∇φᵀd` holds.

mod checks;
mod problem;
mod step;
pub mod synthetic;
mod trace;

pub use checks::{
    gradient_related_check, local_rate_check, GradientRelatedReport, RateCheckOptions, RateReport,
};
pub use problem::{finite_difference_jacobian, ClosureProblem, NlsProblem};
pub use step::{damping, gradient, lm_step, model_value, StepMethod};
pub use trace::{
    GsvdDiagnostics, IterRecord, SolveTrace, StopReason, TerminalRecord, TRACE_CSV_HEADER,
};

use faer::{Col, ColRef, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::gsvd;
use crate::scaling::{completeness_gamma, ScalingOperator};

/// Discrepancy-principle stopping: stop at the first `k` with `‖Fₖ‖ ≤ τ·δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub tau: f64,
    pub noise_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Armijo slope fraction `ν ∈ (0,1)`.
    pub nu: f64,
    /// Backtracking factor `η ∈ (0,1)`.
    pub eta: f64,
    /// Unit-step contraction factor `ϑ ∈ (0,1)`.
    pub vartheta: f64,
    /// Tolerance for the gradient-norm and relative-step tests.
    pub eps: f64,
    pub max_iter: usize,
    pub max_backtracks: usize,
    pub step_method: StepMethod,
    /// When set, replaces the gradient and step tests.
    pub discrepancy: Option<Discrepancy>,
    /// Compute the GSVD of `(Jₖ, L)` every iteration and record the step-norm bound.
    pub gsvd_diagnostics: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            nu: 1e-4,
            eta: 0.5,
            vartheta: 0.9,
            eps: 5e-4,
            max_iter: 200,
            max_backtracks: 40,
            step_method: StepMethod::AugmentedQr,
            discrepancy: None,
            gsvd_diagnostics: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in (0,1), got {v}")))
            }
        };
        unit("nu", self.nu)?;
        unit("eta", self.eta)?;
        unit("vartheta", self.vartheta)?;
        if !(self.eps > 0.0) {
            return Err(Error::Config(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        if let Some(dp) = self.discrepancy {
            if !(dp.tau >= 1.0) {
                return Err(Error::Config(format!("tau must be ≥ 1, got {}", dp.tau)));
            }
            if !(dp.noise_norm >= 0.0) || !dp.noise_norm.is_finite() {
                return Err(Error::Config(format!(
                    "noise norm must be finite and ≥ 0, got {}",
                    dp.noise_norm
                )));
            }
        }
        Ok(())
    }
}

/// `‖F‖ ≤ τ·δ`. Inclusive, so an exact fit always stops when `δ = 0`.
pub fn discrepancy_stop(resid_norm: f64, tau: f64, noise_norm: f64) -> bool {
    resid_norm <= tau * noise_norm
}

/// Result of one line search.
#[derive(Debug, Clone)]
pub enum LineSearch {
    Accepted {
        alpha: f64,
        x: Col<f64>,
        residual: Col<f64>,
        backtracks: usize,
        /// `true` when the residual contracted by `ϑ` on the full step.
        unit_branch: bool,
    },
    Failed {
        backtracks: usize,
    },
}

fn trial<P: NlsProblem + ?Sized>(problem: &P, x: ColRef<'_, f64>) -> Option<Col<f64>> {
    // Trial points outside the model's domain count as rejected.
    match problem.residual(x) {
        Ok(f) if (0..f.nrows()).all(|i| f[i].is_finite()) => Some(f),
        _ => None,
    }
}

/// Step-size selection for one iteration.
///
/// `dir_deriv` is `∇φ(x)ᵀd`.
pub fn line_search<P: NlsProblem + ?Sized>(
    problem: &P,
    x: ColRef<'_, f64>,
    residual: ColRef<'_, f64>,
    d: ColRef<'_, f64>,
    dir_deriv: f64,
    config: &SolverConfig,
) -> LineSearch {
    let phi0 = 0.5 * residual.squared_norm_l2();
    let norm0 = residual.norm_l2();
    let mut alpha = 1.0;
    for m in 0..=config.max_backtracks {
        let xt = x + alpha * d;
        if let Some(ft) = trial(problem, xt.as_ref()) {
            let norm_t = ft.norm_l2();
            if m == 0 && norm_t <= config.vartheta * norm0 {
                return LineSearch::Accepted {
                    alpha,
                    x: xt,
                    residual: ft,
                    backtracks: 0,
                    unit_branch: true,
                };
            }
            let phit = 0.5 * norm_t * norm_t;
            if phit - phi0 <= config.nu * alpha * dir_deriv {
                return LineSearch::Accepted {
                    alpha,
                    x: xt,
                    residual: ft,
                    backtracks: m,
                    unit_branch: false,
                };
            }
        }
        alpha *= config.eta;
    }
    LineSearch::Failed {
        backtracks: config.max_backtracks,
    }
}

/// Runs the iteration from `x0`. See [`solve_with_observer`].
pub fn solve<P: NlsProblem + ?Sized>(
    problem: &P,
    scaling: &ScalingOperator,
    x0: ColRef<'_, f64>,
    config: &SolverConfig,
) -> Result<(Col<f64>, SolveTrace)> {
    solve_with_observer(problem, scaling, x0, config, |_, _| {})
}

/// Runs the iteration, calling `observer(k, xₖ)` on every iterate including `x₀` and the
/// returned point.
///
/// Stopping tests at iterate `k`, in order: discrepancy (when configured), exact zero
/// residual, `‖∇φₖ‖ < ε` and `‖xₖ − xₖ₋₁‖/‖xₖ‖ < ε` (when no discrepancy rule is set),
/// then `k = max_iter`. A failed line search ends the run with
/// [`StopReason::LineSearchFailure`] and keeps the trace.
pub fn solve_with_observer<P: NlsProblem + ?Sized>(
    problem: &P,
    scaling: &ScalingOperator,
    x0: ColRef<'_, f64>,
    config: &SolverConfig,
    mut observer: impl FnMut(usize, ColRef<'_, f64>),
) -> Result<(Col<f64>, SolveTrace)> {
    config.validate()?;
    let n = problem.n_params();
    if x0.nrows() != n {
        return Err(dim_err(format!(
            "x0 has {} entries, problem has {n}",
            x0.nrows()
        )));
    }
    if scaling.cols() != n {
        return Err(dim_err(format!(
            "L has {} columns, problem has {n}",
            scaling.cols()
        )));
    }
    let gsvd_scaling = if config.gsvd_diagnostics {
        Some(scaling.full_row_rank_equivalent()?)
    } else {
        None
    };

    let mut x = x0.to_owned();
    let mut f = problem.residual(x.as_ref())?;
    let mut prev_step: Option<f64> = None;
    let mut records = Vec::new();

    for k in 0.. {
        observer(k, x.as_ref());
        let lambda = damping(f.as_ref());
        let resid_norm = lambda.sqrt();
        let dist = problem.solution_distance(x.as_ref());
        let terminal = |grad_norm: Option<f64>| TerminalRecord {
            k,
            lambda,
            resid_norm,
            grad_norm,
            dist,
        };

        if let Some(dp) = config.discrepancy {
            if discrepancy_stop(resid_norm, dp.tau, dp.noise_norm) {
                return Ok(finish(x, records, terminal(None), StopReason::Discrepancy));
            }
        }
        if lambda == 0.0 {
            return Ok(finish(
                x,
                records,
                terminal(Some(0.0)),
                StopReason::SmallGradient,
            ));
        }

        let jac = problem.jacobian(x.as_ref())?;
        let grad = gradient(jac.as_ref(), f.as_ref())?;
        let grad_norm = grad.norm_l2();
        if config.discrepancy.is_none() {
            if grad_norm < config.eps {
                return Ok(finish(
                    x,
                    records,
                    terminal(Some(grad_norm)),
                    StopReason::SmallGradient,
                ));
            }
            if let Some(step) = prev_step {
                let xn = x.norm_l2();
                if xn > 0.0 && step / xn < config.eps {
                    return Ok(finish(
                        x,
                        records,
                        terminal(Some(grad_norm)),
                        StopReason::SmallStep,
                    ));
                }
            }
        }
        if k >= config.max_iter {
            return Ok(finish(
                x,
                records,
                terminal(Some(grad_norm)),
                StopReason::MaxIter,
            ));
        }

        let d = lm_step(
            jac.as_ref(),
            f.as_ref(),
            scaling,
            lambda,
            config.step_method,
        )?;
        let step_norm = d.norm_l2();
        let lin = &jac * &d + &f;
        let linearized_norm = lin.norm_l2();
        let model = lin.squared_norm_l2() + lambda * scaling.apply(d.as_ref()).squared_norm_l2();
        let dir_deriv = crate::linalg::dot(grad.as_ref(), d.as_ref());

        let diagnostics = match &gsvd_scaling {
            Some(l) => Some(gsvd_diagnostics(&jac, l, lambda, f.as_ref())?),
            None => None,
        };

        let outcome = line_search(
            problem,
            x.as_ref(),
            f.as_ref(),
            d.as_ref(),
            dir_deriv,
            config,
        );
        let mut record = IterRecord {
            k,
            lambda,
            resid_norm,
            grad_norm,
            step_norm,
            alpha: f64::NAN,
            model_value: model,
            dir_deriv,
            dist,
            linearized_norm,
            backtracks: 0,
            unit_branch: false,
            diagnostics,
        };
        match outcome {
            LineSearch::Accepted {
                alpha,
                x: xn,
                residual,
                backtracks,
                unit_branch,
            } => {
                record.alpha = alpha;
                record.backtracks = backtracks;
                record.unit_branch = unit_branch;
                records.push(record);
                prev_step = Some(alpha * step_norm);
                x = xn;
                f = residual;
            }
            LineSearch::Failed { backtracks } => {
                record.backtracks = backtracks;
                records.push(record);
                return Ok(finish(
                    x,
                    records,
                    terminal(Some(grad_norm)),
                    StopReason::LineSearchFailure,
                ));
            }
        }
    }
    unreachable!("iteration loop only exits by returning")
}

fn finish(
    x: Col<f64>,
    iterations: Vec<IterRecord>,
    terminal: TerminalRecord,
    stop_reason: StopReason,
) -> (Col<f64>, SolveTrace) {
    (
        x,
        SolveTrace {
            iterations,
            terminal,
            stop_reason,
        },
    )
}

fn gsvd_diagnostics(
    jac: &Mat<f64>,
    scaling: &ScalingOperator,
    lambda: f64,
    residual: ColRef<'_, f64>,
) -> Result<GsvdDiagnostics> {
    let completeness = completeness_gamma(jac.as_ref(), scaling)?;
    let factors = gsvd::gsvd_pair(jac.as_ref(), scaling.entries())?;
    let filter = gsvd::gamma_filter(&factors, lambda)?;
    let filter_norm = filter.iter().copied().fold(0.0_f64, f64::max);
    let step_bound = gsvd::step_norm_bound(&factors, lambda, residual, completeness)?;
    let x_norm = crate::linalg::spectral_norm(factors.x.as_ref())?;
    Ok(GsvdDiagnostics {
        completeness,
        filter_norm,
        step_bound,
        x_norm,
    })
}
