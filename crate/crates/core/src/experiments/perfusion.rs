use faer::Col;
use serde::{Deserialize, Serialize};

use super::{
    add_noise, cell_config, check_common, discrepancy_index, run_seed, score_seed, CellSummary,
    ExperimentReport, NoisySample, ScalingChoice, SeedOutcome, Truth,
};
use crate::error::{Error, Result};
use crate::linalg::col_to_vec;
use crate::pde::bioheat::{
    bioheat_interior, default_bioheat_sensors, manufactured_bioheat_data, BioheatModel,
    BioheatParams,
};
use crate::pde::{cheb_grid, rk_cn_predictor_corrector, InverseProblem, ParametricModel, TimeGrid};
use crate::scaling::{assemble_grad2d, ScalingOperator};
use crate::solver::SolverConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerfusionConfig {
    pub name: String,
    pub n: usize,
    pub bioheat: BioheatParams,
    pub time: TimeGrid,
    /// Substeps per observation interval of the explicit data generator; chosen from the
    /// stability limit when absent.
    pub data_substeps: Option<usize>,
    /// Observed unknowns; the 9×7 interior layout when absent.
    pub sensors: Option<Vec<usize>>,
    pub noise_levels: Vec<f64>,
    pub scalings: Vec<ScalingChoice>,
    pub seed_base: u64,
    pub seed_count: usize,
    pub tau: f64,
    /// Constant initial perfusion.
    pub initial_guess: f64,
    pub solver: SolverConfig,
}

impl Default for PerfusionConfig {
    fn default() -> Self {
        Self {
            name: "perfusion".into(),
            n: 14,
            bioheat: BioheatParams::default(),
            time: TimeGrid {
                t_final: 0.1,
                n_obs: 8,
                substeps: 10,
            },
            data_substeps: None,
            sensors: None,
            noise_levels: vec![1e-3, 1e-4],
            scalings: vec![
                ScalingChoice::Identity,
                ScalingChoice::D1,
                ScalingChoice::D2,
                ScalingChoice::D3,
            ],
            seed_base: 0,
            seed_count: 10,
            tau: 1.05,
            initial_guess: 0.0,
            solver: SolverConfig::default(),
        }
    }
}

impl PerfusionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 4 {
            return Err(Error::Config(format!("n must be ≥ 4, got {}", self.n)));
        }
        self.bioheat.validate()?;
        self.time.validate()?;
        self.solver.validate()?;
        check_common(
            &self.noise_levels,
            &self.scalings,
            self.seed_count,
            self.tau,
        )?;
        if !self.initial_guess.is_finite() {
            return Err(Error::Config("initial guess must be finite".into()));
        }
        Ok(())
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.seed_count as u64).map(|s| self.seed_base + s)
    }

    pub fn scaling_operator(&self, choice: ScalingChoice) -> Result<ScalingOperator> {
        match choice {
            ScalingChoice::Identity => Ok(ScalingOperator::identity(self.n * (self.n + 1))),
            c => assemble_grad2d(c.order(), self.n),
        }
    }
}

/// The manufactured perfusion problem with clean data.
#[derive(Debug, Clone)]
pub struct PerfusionScenario {
    pub problem: InverseProblem<BioheatModel>,
    /// Noise-free observations generated by the predictor-corrector scheme.
    pub clean: Col<f64>,
    pub exact: Col<f64>,
    pub interior: Vec<usize>,
}

impl PerfusionScenario {
    pub fn build(cfg: &PerfusionConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = cheb_grid(cfg.n)?;
        let data = manufactured_bioheat_data(&grid, &cfg.time.obs_times(), cfg.bioheat)?;
        let model = BioheatModel::new(grid, cfg.bioheat, &data.source, data.initial.clone())?;
        let sensors = match &cfg.sensors {
            Some(s) => s.clone(),
            None => default_bioheat_sensors(cfg.n),
        };
        let exact_sys = model.system(data.perfusion.as_ref())?;
        let substeps = cfg
            .data_substeps
            .unwrap_or_else(|| exact_sys.explicit_substeps(&cfg.time));
        let traj = rk_cn_predictor_corrector(&exact_sys, &cfg.time.with_substeps(substeps))?;
        let clean = traj.observe(&sensors);
        let problem = InverseProblem::new(model, cfg.time, sensors, clean.clone())?;
        Ok(Self {
            problem,
            clean,
            exact: data.perfusion,
            interior: bioheat_interior(cfg.n),
        })
    }

    pub fn noisy_problem(&self, noise: &NoisySample) -> Result<InverseProblem<BioheatModel>> {
        let mut p = self.problem.clone();
        p.data = noise.noisy_col();
        Ok(p)
    }

    pub(crate) fn truth(&self) -> Truth {
        Truth {
            exact: col_to_vec(self.exact.as_ref()),
            indices: Some(self.interior.clone()),
            blocks: 0,
            clean: col_to_vec(self.clean.as_ref()),
        }
    }

    pub fn initial(&self, cfg: &PerfusionConfig) -> Col<f64> {
        Col::from_fn(self.exact.nrows(), |_| cfg.initial_guess)
    }
}

/// Every (noise level, scaling) cell over the configured seeds. Each seed's noise draw is
/// shared by all scalings of a noise level.
pub fn run_perfusion_campaign(cfg: &PerfusionConfig) -> Result<ExperimentReport> {
    let scenario = PerfusionScenario::build(cfg)?;
    let truth = scenario.truth();
    let x0 = scenario.initial(cfg);
    let mut cells = Vec::new();
    for &nl in &cfg.noise_levels {
        let samples: Vec<NoisySample> = cfg
            .seeds()
            .map(|s| add_noise(scenario.clean.as_ref(), nl, s))
            .collect::<Result<_>>()?;
        for &choice in &cfg.scalings {
            let scaling = cfg.scaling_operator(choice)?;
            let seeds = samples
                .iter()
                .map(|noise| {
                    let problem = scenario.noisy_problem(noise)?;
                    let solver = cell_config(&cfg.solver, cfg.tau, noise);
                    Ok(run_seed(&problem, &scaling, &x0, &solver, noise, &truth))
                })
                .collect::<Result<Vec<_>>>()?;
            cells.push(CellSummary::from_seeds(nl, choice, seeds));
        }
    }
    Ok(ExperimentReport {
        campaign: cfg.name.clone(),
        cells,
    })
}

/// Error and residual histories of a run with every stopping rule disabled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiconvergenceRun {
    pub re: Vec<f64>,
    pub resid: Vec<f64>,
    /// `τ‖e‖`.
    pub threshold: f64,
    /// Where the discrepancy principle would have stopped.
    pub discrepancy_index: Option<usize>,
    /// Iterate with the smallest parameter error.
    pub argmin: usize,
}

pub fn perfusion_semiconvergence(
    cfg: &PerfusionConfig,
    choice: ScalingChoice,
    noise_level: f64,
    seed: u64,
    iterations: usize,
) -> Result<SemiconvergenceRun> {
    let scenario = PerfusionScenario::build(cfg)?;
    let noise = add_noise(scenario.clean.as_ref(), noise_level, seed)?;
    let problem = scenario.noisy_problem(&noise)?;
    let scaling = cfg.scaling_operator(choice)?;
    let solver = SolverConfig {
        discrepancy: None,
        eps: f64::MIN_POSITIVE,
        max_iter: iterations,
        ..cfg.solver.clone()
    };
    let outcome = score_seed(
        &problem,
        &scaling,
        &scenario.initial(cfg),
        &solver,
        &noise,
        &scenario.truth(),
    )?;
    let trace = outcome.trace.expect("scored runs carry their trace");
    let threshold = cfg.tau * noise.noise_norm();
    let re = outcome.re_history;
    let argmin = re
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |(k, _)| k);
    Ok(SemiconvergenceRun {
        discrepancy_index: discrepancy_index(&trace, cfg.tau, noise.noise_norm()),
        resid: trace.resid_norms(),
        threshold,
        argmin,
        re,
    })
}

/// One noisy instance, scored like a campaign seed.
pub fn perfusion_instance(
    cfg: &PerfusionConfig,
    choice: ScalingChoice,
    noise_level: f64,
    seed: u64,
) -> Result<SeedOutcome> {
    let scenario = PerfusionScenario::build(cfg)?;
    let noise = add_noise(scenario.clean.as_ref(), noise_level, seed)?;
    let problem = scenario.noisy_problem(&noise)?;
    let solver = cell_config(&cfg.solver, cfg.tau, &noise);
    score_seed(
        &problem,
        &cfg.scaling_operator(choice)?,
        &scenario.initial(cfg),
        &solver,
        &noise,
        &scenario.truth(),
    )
}
