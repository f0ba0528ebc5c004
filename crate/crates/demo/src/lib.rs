//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export returns a JSON string. The plain Rust functions hold the logic and run
//! natively; the `#[wasm_bindgen]` wrappers only convert errors.

use faer::Col;
use lmss::experiments::{
    add_noise, relative_error_on, PerfusionConfig, PerfusionScenario, ScalingChoice,
};
use lmss::gsvd::{psi, psi_max};
use lmss::linalg::{col_from_slice, col_to_vec};
use lmss::scaling::{diff, ScalingOperator};
use lmss::solver::synthetic::SyntheticProblem;
use lmss::solver::{solve, solve_with_observer, Discrepancy, SolverConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct PsiCurve {
    pub lambda: f64,
    pub gamma: Vec<f64>,
    pub psi: Vec<f64>,
    /// `None` when `λ ≥ 1/2` and the supremum is not attained.
    pub gamma_max: Option<f64>,
    pub psi_max: f64,
}

/// `ψ(·, λ)` on a log-spaced grid over `[10^lo, 10^hi]`.
pub fn psi_curve(lambda: f64, lo: f64, hi: f64, samples: usize) -> lmss::Result<PsiCurve> {
    if !(hi > lo) || samples < 2 {
        return Err(lmss::Error::Config(
            "need hi > lo and at least 2 samples".into(),
        ));
    }
    let cap = psi_max(lambda)?;
    let gamma: Vec<f64> = (0..samples)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (samples - 1) as f64))
        .collect();
    let psi = gamma
        .iter()
        .map(|&g| psi(g, lambda))
        .collect::<lmss::Result<_>>()?;
    Ok(PsiCurve {
        lambda,
        gamma,
        psi,
        gamma_max: cap.argmax(),
        psi_max: cap.value(),
    })
}

#[derive(Debug, Serialize)]
pub struct SyntheticRun {
    pub stop_reason: String,
    pub iterates: Vec<[f64; 2]>,
    pub resid_norm: Vec<f64>,
    pub dist: Vec<Option<f64>>,
}

fn synthetic_problem(name: &str) -> lmss::Result<SyntheticProblem> {
    Ok(match name {
        "bilinear" => SyntheticProblem::Bilinear,
        "circle" => SyntheticProblem::Circle,
        "affine_set" => SyntheticProblem::AffineSet,
        "rosenbrock" => SyntheticProblem::Rosenbrock,
        _ => return Err(lmss::Error::Config(format!("unknown problem '{name}'"))),
    })
}

fn synthetic_scaling(name: &str) -> lmss::Result<ScalingOperator> {
    match name {
        "identity" => Ok(ScalingOperator::identity(2)),
        "d1" => diff(1, 2),
        _ => Err(lmss::Error::Config(format!("unknown scaling '{name}'"))),
    }
}

/// LM iterates on a two-parameter test problem.
pub fn synthetic_run(problem: &str, scaling: &str, x0: [f64; 2]) -> lmss::Result<SyntheticRun> {
    let p = synthetic_problem(problem)?;
    let l = synthetic_scaling(scaling)?;
    let cfg = SolverConfig {
        eps: 1e-10,
        max_iter: 100,
        ..SolverConfig::default()
    };
    let mut iterates = Vec::new();
    let (_, trace) = solve_with_observer(&p, &l, col_from_slice(&x0).as_ref(), &cfg, |_, x| {
        iterates.push([x[0], x[1]])
    })?;
    let mut resid_norm = trace.resid_norms();
    resid_norm.truncate(iterates.len());
    let mut dist: Vec<Option<f64>> = trace.iterations.iter().map(|r| r.dist).collect();
    dist.push(trace.terminal.dist);
    Ok(SyntheticRun {
        stop_reason: trace.stop_reason.as_str().into(),
        iterates,
        resid_norm,
        dist,
    })
}

#[derive(Debug, Serialize)]
pub struct PerfusionRun {
    pub n: usize,
    /// `(x, y)` of each unknown, x-index fastest.
    pub nodes: Vec<(f64, f64)>,
    pub exact: Vec<f64>,
    pub estimate: Vec<f64>,
    pub sensors: Vec<usize>,
    pub re: f64,
    pub iterations: usize,
    pub stop_reason: String,
}

fn scaling_choice(name: &str) -> lmss::Result<ScalingChoice> {
    Ok(match name {
        "identity" => ScalingChoice::Identity,
        "d1" => ScalingChoice::D1,
        "d2" => ScalingChoice::D2,
        "d3" => ScalingChoice::D3,
        _ => return Err(lmss::Error::Config(format!("unknown scaling '{name}'"))),
    })
}

/// One noisy perfusion reconstruction on a coarse grid, stopped by the discrepancy
/// principle.
pub fn perfusion_run(
    n: usize,
    scaling: &str,
    noise_level: f64,
    seed: u64,
) -> lmss::Result<PerfusionRun> {
    if n > 10 {
        return Err(lmss::Error::Config(
            "the demo caps the grid at n = 10".into(),
        ));
    }
    let cfg = PerfusionConfig {
        n,
        ..PerfusionConfig::default()
    };
    let scenario = PerfusionScenario::build(&cfg)?;
    let noise = add_noise(scenario.clean.as_ref(), noise_level, seed)?;
    let problem = scenario.noisy_problem(&noise)?;
    let solver = SolverConfig {
        discrepancy: (noise_level > 0.0).then(|| Discrepancy {
            tau: cfg.tau,
            noise_norm: noise.noise_norm(),
        }),
        ..cfg.solver.clone()
    };
    let l = cfg.scaling_operator(scaling_choice(scaling)?)?;
    let x0: Col<f64> = scenario.initial(&cfg);
    let (x, trace) = solve(&problem, &l, x0.as_ref(), &solver)?;
    let estimate = col_to_vec(x.as_ref());
    let exact = col_to_vec(scenario.exact.as_ref());
    Ok(PerfusionRun {
        n,
        nodes: problem.model.nodes(),
        re: relative_error_on(&estimate, &exact, &scenario.interior)?,
        exact,
        estimate,
        sensors: problem.sensors.clone(),
        iterations: trace.n_iterations(),
        stop_reason: trace.stop_reason.as_str().into(),
    })
}

fn to_js<T: Serialize>(r: lmss::Result<T>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = psiCurve)]
pub fn psi_curve_js(lambda: f64, lo: f64, hi: f64, samples: usize) -> Result<String, JsError> {
    to_js(psi_curve(lambda, lo, hi, samples))
}

#[wasm_bindgen(js_name = syntheticRun)]
pub fn synthetic_run_js(problem: &str, scaling: &str, x1: f64, x2: f64) -> Result<String, JsError> {
    to_js(synthetic_run(problem, scaling, [x1, x2]))
}

#[wasm_bindgen(js_name = perfusionRun)]
pub fn perfusion_run_js(
    n: usize,
    scaling: &str,
    noise_level: f64,
    seed: u32,
) -> Result<String, JsError> {
    to_js(perfusion_run(n, scaling, noise_level, seed as u64))
}
