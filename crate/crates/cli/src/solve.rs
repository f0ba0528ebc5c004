use std::io::Write;

use faer::Mat;
use lmss::experiments::{
    conductivity_instance, perfusion_instance, ConductivityConfig, PerfusionConfig, ScalingChoice,
};
use lmss::linalg::{col_from_slice, col_to_vec};
use lmss::scaling::{diff, ScalingOperator};
use lmss::solver::synthetic::SyntheticProblem;
use lmss::solver::{solve, SolveTrace, SolverConfig, StopReason};
use serde::{Deserialize, Serialize};

use crate::error::{write_file, CliError, CliResult};
use crate::{load_config, Common};

/// `L` for a synthetic solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SyntheticScaling {
    Identity,
    /// 1D difference stencil of order 1-3.
    Diff {
        order: u8,
    },
    /// Explicit rows.
    Matrix {
        rows: Vec<Vec<f64>>,
    },
}

impl SyntheticScaling {
    fn build(&self, n: usize) -> CliResult<ScalingOperator> {
        Ok(match self {
            SyntheticScaling::Identity => ScalingOperator::identity(n),
            SyntheticScaling::Diff { order } => diff(*order, n)?,
            SyntheticScaling::Matrix { rows } => {
                if rows.iter().any(|r| r.len() != n) {
                    return Err(CliError::config(format!(
                        "every scaling row needs {n} entries"
                    )));
                }
                ScalingOperator::raw(Mat::from_fn(rows.len(), n, |i, j| rows[i][j]))
            }
        })
    }
}

fn default_name() -> String {
    "solve".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolveConfig {
    Synthetic {
        #[serde(default = "default_name")]
        name: String,
        problem: SyntheticProblem,
        scaling: SyntheticScaling,
        x0: Vec<f64>,
        #[serde(default)]
        solver: SolverConfig,
    },
    /// One noisy instance of the perfusion benchmark.
    Perfusion {
        #[serde(default = "default_name")]
        name: String,
        #[serde(default)]
        config: PerfusionConfig,
        scaling: ScalingChoice,
        noise_level: f64,
        #[serde(default)]
        seed: u64,
    },
    /// One noisy instance of a conductivity benchmark.
    Conductivity {
        #[serde(default = "default_name")]
        name: String,
        #[serde(default)]
        config: ConductivityConfig,
        scaling: ScalingChoice,
        noise_level: f64,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Debug, Serialize)]
struct Summary {
    name: String,
    stop_reason: StopReason,
    iterations: usize,
    resid_norm: f64,
    /// Final iterate (synthetic problems only).
    #[serde(skip_serializing_if = "Option::is_none")]
    x: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    re: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    re_blocks: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tre: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

impl Summary {
    fn new(name: String, trace: &SolveTrace) -> Self {
        Self {
            name,
            stop_reason: trace.stop_reason,
            iterations: trace.n_iterations(),
            resid_norm: trace.terminal.resid_norm,
            x: None,
            re: None,
            re_blocks: Vec::new(),
            tre: None,
            seed: None,
        }
    }
}

pub fn run(args: &Common) -> CliResult<()> {
    let cfg: SolveConfig = load_config(&args.config)?;
    let (summary, trace) = match cfg {
        SolveConfig::Synthetic {
            name,
            problem,
            scaling,
            x0,
            solver,
        } => {
            use lmss::solver::NlsProblem;
            let n = problem.n_params();
            if x0.len() != n {
                return Err(CliError::config(format!(
                    "x0 has {} entries, problem has {n}",
                    x0.len()
                )));
            }
            let l = scaling.build(n)?;
            let (x, trace) = solve(&problem, &l, col_from_slice(&x0).as_ref(), &solver)?;
            let mut s = Summary::new(name, &trace);
            s.x = Some(col_to_vec(x.as_ref()));
            (s, trace)
        }
        SolveConfig::Perfusion {
            name,
            config,
            scaling,
            noise_level,
            seed,
        } => {
            let seed = args.seed.unwrap_or(seed);
            args.progress(&format!(
                "perfusion instance, {} at NL={noise_level}",
                scaling.as_str()
            ));
            pde_summary(
                name,
                seed,
                perfusion_instance(&config, scaling, noise_level, seed)?,
            )?
        }
        SolveConfig::Conductivity {
            name,
            config,
            scaling,
            noise_level,
            seed,
        } => {
            let seed = args.seed.unwrap_or(seed);
            args.progress(&format!(
                "conductivity instance, {} at NL={noise_level}",
                scaling.as_str()
            ));
            pde_summary(
                name,
                seed,
                conductivity_instance(&config, scaling, noise_level, seed)?,
            )?
        }
    };

    let dir = args.out.join(&summary.name);
    write_file(&dir.join("trace.csv"), trace.to_csv())?;
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_file(&dir.join("summary.json"), format!("{json}\n"))?;
    if !args.quiet {
        let _ = writeln!(std::io::stdout().lock(), "{json}");
    }
    if !trace.stop_reason.converged() {
        return Err(CliError::numerical(format!(
            "line search failed at iteration {}; trace in {}",
            trace.terminal.k,
            dir.display()
        )));
    }
    Ok(())
}

fn pde_summary(
    name: String,
    seed: u64,
    outcome: lmss::experiments::SeedOutcome,
) -> CliResult<(Summary, SolveTrace)> {
    let trace = outcome
        .trace
        .ok_or_else(|| CliError::numerical(outcome.error.unwrap_or_default()))?;
    let mut s = Summary::new(name, &trace);
    s.re = Some(outcome.re);
    s.re_blocks = outcome.re_blocks;
    s.tre = Some(outcome.tre);
    s.seed = Some(seed);
    Ok((s, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pde_instances_default_their_config() {
        let cfg: SolveConfig =
            serde_json::from_str(r#"{"kind":"perfusion","scaling":"d2","noise_level":0.001}"#)
                .unwrap();
        let SolveConfig::Perfusion { name, config, .. } = cfg else {
            panic!("wrong variant");
        };
        assert_eq!(name, "solve");
        assert_eq!(config, PerfusionConfig::default());
    }

    #[test]
    fn matrix_scaling_checks_its_width() {
        let s = SyntheticScaling::Matrix {
            rows: vec![vec![1.0, -1.0]],
        };
        assert_eq!(s.build(2).unwrap().rows(), 1);
        assert_eq!(s.build(3).unwrap_err().exit_code, crate::error::EXIT_CONFIG);
    }
}
