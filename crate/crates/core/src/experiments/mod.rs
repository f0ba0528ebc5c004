//! Noise injection, error metrics and the multi-seed benchmark campaigns.

mod conductivity;
mod metrics;
mod noise;
mod perfusion;
mod report;

pub use conductivity::{
    conductivity_instance, run_conductivity_campaign, ConductivityConfig, ConductivityExample,
    ConductivityScenario,
};
pub use metrics::{
    blockwise_relative_error, discrepancy_index, discrepancy_stop_is_exact, relative_error,
    relative_error_on, temperature_reconstruction_error,
};
pub use noise::{add_noise, NoisySample};
pub use perfusion::{
    perfusion_instance, perfusion_semiconvergence, run_perfusion_campaign, PerfusionConfig,
    PerfusionScenario, SemiconvergenceRun,
};
pub use report::{CellSummary, ExperimentReport, SeedOutcome, REPORT_CSV_HEADER};

use faer::Col;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::col_to_vec;
use crate::pde::{InverseProblem, ParametricModel};
use crate::scaling::ScalingOperator;
use crate::solver::{solve_with_observer, Discrepancy, SolverConfig};

/// Regularizer of a table cell: the identity or a 2D difference operator of order 1–3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingChoice {
    Identity,
    D1,
    D2,
    D3,
}

impl ScalingChoice {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScalingChoice::Identity => "identity",
            ScalingChoice::D1 => "d1",
            ScalingChoice::D2 => "d2",
            ScalingChoice::D3 => "d3",
        }
    }

    pub fn order(&self) -> u8 {
        match self {
            ScalingChoice::Identity => 0,
            ScalingChoice::D1 => 1,
            ScalingChoice::D2 => 2,
            ScalingChoice::D3 => 3,
        }
    }
}

/// Ground truth used to score an estimate.
#[derive(Debug, Clone)]
pub(crate) struct Truth {
    pub exact: Vec<f64>,
    /// Restrict the error to these entries.
    pub indices: Option<Vec<usize>>,
    /// Number of equal-length parameter blocks reported separately (0 or ≥ 2).
    pub blocks: usize,
    /// Noise-free observations.
    pub clean: Vec<f64>,
}

impl Truth {
    fn re(&self, est: &[f64]) -> Result<f64> {
        match &self.indices {
            Some(ix) => relative_error_on(est, &self.exact, ix),
            None => relative_error(est, &self.exact),
        }
    }

    fn re_blocks(&self, est: &[f64]) -> Result<Vec<f64>> {
        if self.blocks < 2 {
            Ok(Vec::new())
        } else {
            blockwise_relative_error(est, &self.exact, self.blocks)
        }
    }
}

/// Stopping rules of one cell: the discrepancy principle when the data are noisy,
/// otherwise the configured gradient/step tests.
pub(crate) fn cell_config(base: &SolverConfig, tau: f64, noise: &NoisySample) -> SolverConfig {
    let mut cfg = base.clone();
    cfg.discrepancy = (noise.noise_level > 0.0).then(|| Discrepancy {
        tau,
        noise_norm: noise.noise_norm(),
    });
    cfg
}

/// Solves one noisy instance and scores the estimate. Hard errors are returned.
pub(crate) fn score_seed<M: ParametricModel>(
    problem: &InverseProblem<M>,
    scaling: &ScalingOperator,
    x0: &Col<f64>,
    config: &SolverConfig,
    noise: &NoisySample,
    truth: &Truth,
) -> Result<SeedOutcome> {
    let mut history = Vec::new();
    let mut history_err = None;
    let (x, trace) =
        solve_with_observer(problem, scaling, x0.as_ref(), config, |_, x| {
            match truth.re(&col_to_vec(x)) {
                Ok(v) => history.push(v),
                Err(e) => history_err = Some(e),
            }
        })?;
    if let Some(e) = history_err {
        return Err(e);
    }
    let est = col_to_vec(x.as_ref());
    let model_obs = col_to_vec(problem.forward(x.as_ref())?.as_ref());
    Ok(SeedOutcome {
        seed: noise.seed,
        noise_norm: noise.noise_norm(),
        error: None,
        re: truth.re(&est)?,
        re_blocks: truth.re_blocks(&est)?,
        tre: temperature_reconstruction_error(&model_obs, &truth.clean)?,
        iterations: trace.n_iterations(),
        stop_reason: Some(trace.stop_reason),
        discrepancy_exact: config
            .discrepancy
            .map(|d| discrepancy_stop_is_exact(&trace, d.tau, d.noise_norm)),
        re_history: history,
        trace: Some(trace),
    })
}

/// [`score_seed`], recording a hard error in the outcome instead of propagating it.
pub(crate) fn run_seed<M: ParametricModel>(
    problem: &InverseProblem<M>,
    scaling: &ScalingOperator,
    x0: &Col<f64>,
    config: &SolverConfig,
    noise: &NoisySample,
    truth: &Truth,
) -> SeedOutcome {
    score_seed(problem, scaling, x0, config, noise, truth).unwrap_or_else(|e| SeedOutcome {
        seed: noise.seed,
        noise_norm: noise.noise_norm(),
        error: Some(e.to_string()),
        re: f64::NAN,
        re_blocks: Vec::new(),
        tre: f64::NAN,
        iterations: 0,
        stop_reason: None,
        discrepancy_exact: None,
        re_history: Vec::new(),
        trace: None,
    })
}

pub(crate) fn check_common(
    noise_levels: &[f64],
    scalings: &[ScalingChoice],
    seed_count: usize,
    tau: f64,
) -> Result<()> {
    if noise_levels.is_empty() || scalings.is_empty() || seed_count == 0 {
        return Err(Error::Config(
            "campaign needs at least one noise level, scaling and seed".into(),
        ));
    }
    if noise_levels
        .iter()
        .any(|&nl| !(nl >= 0.0) || !nl.is_finite())
    {
        return Err(Error::Config("noise levels must be finite and ≥ 0".into()));
    }
    if !(tau >= 1.0) {
        return Err(Error::Config(format!("tau must be ≥ 1, got {tau}")));
    }
    Ok(())
}
