use crate::error::{dim_err, Result};
use crate::solver::{discrepancy_stop, SolveTrace, StopReason};

/// `‖est − exact‖/‖exact‖`.
pub fn relative_error(est: &[f64], exact: &[f64]) -> Result<f64> {
    if est.len() != exact.len() {
        return Err(dim_err(format!("{} vs {} entries", est.len(), exact.len())));
    }
    let diff: f64 = est.iter().zip(exact).map(|(a, b)| (a - b).powi(2)).sum();
    let norm: f64 = exact.iter().map(|b| b * b).sum();
    Ok((diff / norm).sqrt())
}

/// Relative error restricted to `indices`.
pub fn relative_error_on(est: &[f64], exact: &[f64], indices: &[usize]) -> Result<f64> {
    if est.len() != exact.len() || indices.iter().any(|&i| i >= est.len()) {
        return Err(dim_err("index set does not fit the vectors"));
    }
    let e: Vec<f64> = indices.iter().map(|&i| est[i]).collect();
    let x: Vec<f64> = indices.iter().map(|&i| exact[i]).collect();
    relative_error(&e, &x)
}

/// Relative error of each of `blocks` consecutive equal-length blocks.
pub fn blockwise_relative_error(est: &[f64], exact: &[f64], blocks: usize) -> Result<Vec<f64>> {
    if blocks == 0 || est.len() != exact.len() || est.len() % blocks != 0 {
        return Err(dim_err("vectors do not split into equal blocks"));
    }
    let len = est.len() / blocks;
    (0..blocks)
        .map(|b| relative_error(&est[b * len..(b + 1) * len], &exact[b * len..(b + 1) * len]))
        .collect()
}

/// `‖U(θ̂) − U‖/‖U‖` on the observed temperatures.
pub fn temperature_reconstruction_error(u_est: &[f64], u_exact: &[f64]) -> Result<f64> {
    relative_error(u_est, u_exact)
}

/// First iterate whose residual norm is within `τ·δ`.
pub fn discrepancy_index(trace: &SolveTrace, tau: f64, noise_norm: f64) -> Option<usize> {
    trace
        .resid_norms()
        .iter()
        .position(|&r| discrepancy_stop(r, tau, noise_norm))
}

/// A discrepancy-stopped run must end exactly at [`discrepancy_index`]; any other run must
/// never have crossed the threshold.
pub fn discrepancy_stop_is_exact(trace: &SolveTrace, tau: f64, noise_norm: f64) -> bool {
    let first = discrepancy_index(trace, tau, noise_norm);
    match trace.stop_reason {
        StopReason::Discrepancy => first == Some(trace.terminal.k),
        _ => first.is_none(),
    }
}
