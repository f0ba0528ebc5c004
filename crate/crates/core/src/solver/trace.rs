use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Discrepancy,
    SmallGradient,
    SmallStep,
    MaxIter,
    LineSearchFailure,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::Discrepancy => "discrepancy",
            StopReason::SmallGradient => "small_gradient",
            StopReason::SmallStep => "small_step",
            StopReason::MaxIter => "max_iter",
            StopReason::LineSearchFailure => "line_search_failure",
        }
    }

    /// Every reason except a failed line search.
    pub fn converged(&self) -> bool {
        !matches!(self, StopReason::LineSearchFailure)
    }
}

/// Per-iteration GSVD quantities (only when diagnostics are enabled).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GsvdDiagnostics {
    /// `λ_min(JₖᵀJₖ + LᵀL)`.
    pub completeness: f64,
    /// `‖Γₖ‖₂`.
    pub filter_norm: f64,
    /// `(1/√γ̂)·max{‖Γₖ‖, 1}·‖Fₖ‖`.
    pub step_bound: f64,
    /// `‖Xₖ‖₂`.
    pub x_norm: f64,
}

/// One accepted (or failed) iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub k: usize,
    pub lambda: f64,
    pub resid_norm: f64,
    pub grad_norm: f64,
    pub step_norm: f64,
    /// `NaN` when the line search failed.
    pub alpha: f64,
    /// `θₖ(dₖ) = ‖Jₖdₖ + Fₖ‖² + λₖ‖Ldₖ‖²`.
    pub model_value: f64,
    /// `∇φₖᵀdₖ`.
    pub dir_deriv: f64,
    pub dist: Option<f64>,
    /// `‖Jₖdₖ + Fₖ‖`.
    pub linearized_norm: f64,
    pub backtracks: usize,
    pub unit_branch: bool,
    pub diagnostics: Option<GsvdDiagnostics>,
}

/// State at the iterate where the run stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalRecord {
    pub k: usize,
    pub lambda: f64,
    pub resid_norm: f64,
    /// Not computed when the discrepancy test fires first.
    pub grad_norm: Option<f64>,
    pub dist: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub iterations: Vec<IterRecord>,
    pub terminal: TerminalRecord,
    pub stop_reason: StopReason,
}

pub const TRACE_CSV_HEADER: &str =
    "k,lambda,resid_norm,grad_norm,step_norm,alpha,model_value,dir_deriv,dist";

fn num(out: &mut String, v: f64) {
    if v.is_finite() {
        let _ = write!(out, "{v:e}");
    }
}

fn opt(out: &mut String, v: Option<f64>) {
    if let Some(v) = v {
        num(out, v);
    }
}

impl SolveTrace {
    /// Number of steps taken (`x_final = x_iterations()`).
    pub fn n_iterations(&self) -> usize {
        self.terminal.k
    }

    /// `‖Fₖ‖` for `k = 0..=final`.
    pub fn resid_norms(&self) -> Vec<f64> {
        self.iterations
            .iter()
            .map(|r| r.resid_norm)
            .chain(std::iter::once(self.terminal.resid_norm))
            .collect()
    }

    /// `dist(xₖ, X*)` for every iterate when the problem supplies it.
    pub fn distances(&self) -> Option<Vec<f64>> {
        self.iterations
            .iter()
            .map(|r| r.dist)
            .chain(std::iter::once(self.terminal.dist))
            .collect()
    }

    pub fn residuals_nonincreasing(&self) -> bool {
        self.resid_norms().windows(2).all(|w| w[1] <= w[0])
    }

    /// CSV with header
    /// `k,lambda,resid_norm,grad_norm,step_norm,alpha,model_value,dir_deriv,dist`.
    ///
    /// One row per iteration; the terminal iterate is the last row with the step columns
    /// empty. Missing values are empty fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_CSV_HEADER);
        out.push('\n');
        for r in &self.iterations {
            let _ = write!(out, "{},", r.k);
            for v in [
                r.lambda,
                r.resid_norm,
                r.grad_norm,
                r.step_norm,
                r.alpha,
                r.model_value,
                r.dir_deriv,
            ] {
                num(&mut out, v);
                out.push(',');
            }
            opt(&mut out, r.dist);
            out.push('\n');
        }
        let t = &self.terminal;
        let _ = write!(out, "{},", t.k);
        num(&mut out, t.lambda);
        out.push(',');
        num(&mut out, t.resid_norm);
        out.push(',');
        opt(&mut out, t.grad_norm);
        out.push_str(",,,,,");
        opt(&mut out, t.dist);
        out.push('\n');
        out
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(k: usize, resid: f64) -> IterRecord {
        IterRecord {
            k,
            lambda: resid * resid,
            resid_norm: resid,
            grad_norm: 1.0,
            step_norm: 0.5,
            alpha: 1.0,
            model_value: 0.25,
            dir_deriv: -0.5,
            dist: None,
            linearized_norm: 0.1,
            backtracks: 0,
            unit_branch: true,
            diagnostics: None,
        }
    }

    #[test]
    fn csv_layout() {
        let trace = SolveTrace {
            iterations: vec![record(0, 2.0), record(1, 1.0)],
            terminal: TerminalRecord {
                k: 2,
                lambda: 0.25,
                resid_norm: 0.5,
                grad_norm: None,
                dist: Some(0.125),
            },
            stop_reason: StopReason::Discrepancy,
        };
        let csv = trace.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], TRACE_CSV_HEADER);
        assert_eq!(lines.len(), 4);
        for l in &lines {
            assert_eq!(l.split(',').count(), 9, "{l}");
        }
        assert_eq!(lines[1], "0,4e0,2e0,1e0,5e-1,1e0,2.5e-1,-5e-1,");
        assert_eq!(lines[3], "2,2.5e-1,5e-1,,,,,,1.25e-1");
        assert!(trace.residuals_nonincreasing());
        assert_eq!(trace.n_iterations(), 2);
    }
}
