use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ScalingChoice;
use crate::error::Result;
use crate::solver::{SolveTrace, StopReason};

/// One seed of one table cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub noise_norm: f64,
    /// Set when the run could not produce an estimate at all.
    pub error: Option<String>,
    pub re: f64,
    /// Per-component errors (`k₁₁`, `k₂₂`) when the parameter has several blocks.
    pub re_blocks: Vec<f64>,
    pub tre: f64,
    pub iterations: usize,
    pub stop_reason: Option<StopReason>,
    /// `None` when no discrepancy rule was active.
    pub discrepancy_exact: Option<bool>,
    /// Parameter error at every iterate, `x₀` included.
    pub re_history: Vec<f64>,
    pub trace: Option<SolveTrace>,
}

impl SeedOutcome {
    pub fn failed(&self) -> bool {
        self.error.is_some() || self.stop_reason.is_some_and(|r| !r.converged())
    }

    pub fn has_estimate(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub noise_level: f64,
    pub scaling: ScalingChoice,
    pub mean_re: f64,
    pub mean_re_blocks: Vec<f64>,
    pub mean_tre: f64,
    /// Largest iteration count over converged seeds.
    pub max_iterations: Option<usize>,
    pub mean_iterations: f64,
    pub n_failed: usize,
    pub seeds: Vec<SeedOutcome>,
}

impl CellSummary {
    pub fn from_seeds(noise_level: f64, scaling: ScalingChoice, seeds: Vec<SeedOutcome>) -> Self {
        let ok: Vec<&SeedOutcome> = seeds.iter().filter(|s| s.has_estimate()).collect();
        let mean = |f: &dyn Fn(&SeedOutcome) -> f64| {
            if ok.is_empty() {
                f64::NAN
            } else {
                ok.iter().map(|s| f(s)).sum::<f64>() / ok.len() as f64
            }
        };
        let n_blocks = ok.first().map_or(0, |s| s.re_blocks.len());
        let mean_re_blocks = (0..n_blocks).map(|b| mean(&|s| s.re_blocks[b])).collect();
        let converged = seeds.iter().filter(|s| !s.failed());
        Self {
            noise_level,
            scaling,
            mean_re: mean(&|s| s.re),
            mean_re_blocks,
            mean_tre: mean(&|s| s.tre),
            max_iterations: converged.map(|s| s.iterations).max(),
            mean_iterations: mean(&|s| s.iterations as f64),
            n_failed: seeds.iter().filter(|s| s.failed()).count(),
            seeds,
        }
    }

    /// Directory name of the cell, e.g. `nl0.001_d2`.
    pub fn dir_name(&self) -> String {
        format!("nl{}_{}", self.noise_level, self.scaling.as_str())
    }

    pub fn method(&self) -> &'static str {
        match self.scaling {
            ScalingChoice::Identity => "LMM",
            _ => "LMMSS",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub campaign: String,
    pub cells: Vec<CellSummary>,
}

pub const REPORT_CSV_HEADER: &str =
    "campaign,noise_level,method,scaling,re,re_k11,re_k22,tre,mi,mean_iterations,seeds,failed";

impl ExperimentReport {
    pub fn cell(&self, noise_level: f64, scaling: ScalingChoice) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.noise_level == noise_level && c.scaling == scaling)
    }

    /// One row per cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_CSV_HEADER);
        out.push('\n');
        for c in &self.cells {
            let block = |b: usize| {
                c.mean_re_blocks
                    .get(b)
                    .map_or(String::new(), |v| format!("{v:e}"))
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{:e},{},{},{:e},{},{:e},{},{}",
                self.campaign,
                c.noise_level,
                c.method(),
                c.scaling.as_str(),
                c.mean_re,
                block(0),
                block(1),
                c.mean_tre,
                c.max_iterations.map_or(String::new(), |m| m.to_string()),
                c.mean_iterations,
                c.seeds.len(),
                c.n_failed,
            );
        }
        out
    }

    /// Writes `<out>/<campaign>/report.csv`, and per seed `<cell>/<seed>.csv` (trace) and
    /// `<cell>/<seed>.history.csv` (`k,re,resid_norm`). Returns the campaign directory.
    pub fn write(&self, out: &Path) -> Result<PathBuf> {
        let root = out.join(&self.campaign);
        fs::create_dir_all(&root)?;
        fs::write(root.join("report.csv"), self.to_csv())?;
        for c in &self.cells {
            let dir = root.join(c.dir_name());
            fs::create_dir_all(&dir)?;
            for s in &c.seeds {
                if let Some(trace) = &s.trace {
                    fs::write(dir.join(format!("{}.csv", s.seed)), trace.to_csv())?;
                    let resid = trace.resid_norms();
                    let mut h = String::from("k,re,resid_norm\n");
                    for (k, re) in s.re_history.iter().enumerate() {
                        let r = resid.get(k).map_or(String::new(), |v| format!("{v:e}"));
                        let _ = writeln!(h, "{k},{re:e},{r}");
                    }
                    fs::write(dir.join(format!("{}.history.csv", s.seed)), h)?;
                }
                if let Some(e) = &s.error {
                    fs::write(dir.join(format!("{}.error.txt", s.seed)), e)?;
                }
            }
        }
        Ok(root)
    }
}
