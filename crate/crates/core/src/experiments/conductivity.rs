use faer::Col;
use serde::{Deserialize, Serialize};

use super::{
    add_noise, cell_config, check_common, run_seed, score_seed, CellSummary, ExperimentReport,
    NoisySample, ScalingChoice, SeedOutcome, Truth,
};
use crate::error::{Error, Result};
use crate::linalg::col_to_vec;
use crate::pde::conduction::{
    conduction_nodes, isotropic_example, isotropic_reference_data, orthotropic_example,
    ConductionModel, OrthotropicExact,
};
use crate::pde::{InverseProblem, ParametricModel, TimeGrid};
use crate::scaling::{assemble_tilde2d, block_orthotropic, ScalingOperator};
use crate::solver::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConductivityExample {
    /// `k = (1+x+y)/12` with unit boundary fluxes; data from a refined solve.
    Isotropic,
    /// Closed-form orthotropic case with Robin faces.
    Orthotropic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConductivityConfig {
    pub name: String,
    pub example: ConductivityExample,
    pub n: usize,
    pub time: TimeGrid,
    /// Grid refinement factor of the isotropic data solve.
    pub reference_refine: usize,
    pub noise_levels: Vec<f64>,
    pub scalings: Vec<ScalingChoice>,
    pub seed_base: u64,
    pub seed_count: usize,
    pub tau: f64,
    /// Constant initial conductivity.
    pub initial_guess: f64,
    /// Gradient and step tests apply only to noiseless cells.
    pub solver: SolverConfig,
}

impl Default for ConductivityConfig {
    fn default() -> Self {
        Self {
            name: "conductivity".into(),
            example: ConductivityExample::Orthotropic,
            n: 15,
            time: TimeGrid {
                t_final: 1.0,
                n_obs: 10,
                substeps: 10,
            },
            reference_refine: 2,
            noise_levels: vec![0.0, 1e-3, 1e-2],
            scalings: vec![
                ScalingChoice::Identity,
                ScalingChoice::D1,
                ScalingChoice::D2,
            ],
            seed_base: 0,
            seed_count: 30,
            tau: 1.1,
            initial_guess: 0.25,
            solver: SolverConfig::default(),
        }
    }
}

impl ConductivityConfig {
    /// Defaults for the isotropic example. Its zero initial state is incompatible with the
    /// boundary fluxes, and ten Crank-Nicolson substeps leave a time-stepping error of about
    /// 5e-4 relative, which sits above the noise floor at NL = 1e-3. Forty substeps bring it
    /// to about 2e-6.
    pub fn isotropic() -> Self {
        let mut cfg = Self {
            name: "conductivity_isotropic".into(),
            example: ConductivityExample::Isotropic,
            ..Self::default()
        };
        cfg.time.substeps = 40;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::Config(format!("n must be ≥ 3, got {}", self.n)));
        }
        self.time.validate()?;
        self.solver.validate()?;
        check_common(
            &self.noise_levels,
            &self.scalings,
            self.seed_count,
            self.tau,
        )?;
        if self.scalings.contains(&ScalingChoice::D3) {
            return Err(Error::Config(
                "conductivity campaigns use orders 0-2".into(),
            ));
        }
        if !(self.initial_guess > 0.0) || !self.initial_guess.is_finite() {
            return Err(Error::Config(
                "initial conductivity must be positive".into(),
            ));
        }
        if self.reference_refine == 0 {
            return Err(Error::Config("reference_refine must be positive".into()));
        }
        Ok(())
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.seed_count as u64).map(|s| self.seed_base + s)
    }

    fn n_nodes(&self) -> usize {
        (self.n + 1) * (self.n + 1)
    }

    pub fn n_params(&self) -> usize {
        match self.example {
            ConductivityExample::Isotropic => self.n_nodes(),
            ConductivityExample::Orthotropic => 2 * self.n_nodes(),
        }
    }

    /// `I`, `𝓛̃ᵢ` (isotropic) or `I₂ ⊗ 𝓛̃ᵢ` (orthotropic).
    pub fn scaling_operator(&self, choice: ScalingChoice) -> Result<ScalingOperator> {
        if choice == ScalingChoice::Identity {
            return Ok(ScalingOperator::identity(self.n_params()));
        }
        let inner = assemble_tilde2d(choice.order(), self.n)?;
        Ok(match self.example {
            ConductivityExample::Isotropic => inner,
            ConductivityExample::Orthotropic => block_orthotropic(&inner),
        })
    }
}

#[derive(Debug, Clone)]
pub struct ConductivityScenario {
    pub problem: InverseProblem<ConductionModel>,
    pub clean: Col<f64>,
    pub exact: Col<f64>,
}

impl ConductivityScenario {
    pub fn build(cfg: &ConductivityConfig) -> Result<Self> {
        cfg.validate()?;
        let (setup, exact, clean) = match cfg.example {
            ConductivityExample::Orthotropic => {
                let (setup, k) = orthotropic_example(cfg.n)?;
                let nodes = conduction_nodes(&setup.grid);
                let times = cfg.time.obs_times();
                let m = nodes.len();
                let clean = Col::from_fn(times.len() * m, |r| {
                    let (x, y) = nodes[r % m];
                    OrthotropicExact.temperature(x, y, times[r / m])
                });
                (setup, k, clean)
            }
            ConductivityExample::Isotropic => {
                let (setup, k) = isotropic_example(cfg.n)?;
                let data = isotropic_reference_data(cfg.n, &cfg.time, cfg.reference_refine)?;
                let m = data.nrows();
                let clean = Col::from_fn(data.ncols() * m, |r| data[(r % m, r / m)]);
                (setup, k, clean)
            }
        };
        let sensors: Vec<usize> = (0..setup.initial.nrows()).collect();
        let model = ConductionModel::new(setup)?;
        let problem = InverseProblem::new(model, cfg.time, sensors, clean.clone())?;
        Ok(Self {
            problem,
            clean,
            exact,
        })
    }

    pub fn noisy_problem(&self, noise: &NoisySample) -> InverseProblem<ConductionModel> {
        let mut p = self.problem.clone();
        p.data = noise.noisy_col();
        p
    }

    pub(crate) fn truth(&self) -> Truth {
        Truth {
            exact: col_to_vec(self.exact.as_ref()),
            indices: None,
            blocks: if self.problem.model.n_params() == self.problem.model.n_nodes() {
                0
            } else {
                2
            },
            clean: col_to_vec(self.clean.as_ref()),
        }
    }

    pub fn initial(&self, cfg: &ConductivityConfig) -> Col<f64> {
        Col::from_fn(self.exact.nrows(), |_| cfg.initial_guess)
    }
}

/// Every (noise level, scaling) cell over the configured seeds. Noiseless cells are solved
/// once and the outcome repeated for each seed, since every seed sees the same data.
pub fn run_conductivity_campaign(cfg: &ConductivityConfig) -> Result<ExperimentReport> {
    let scenario = ConductivityScenario::build(cfg)?;
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
            let mut seeds: Vec<SeedOutcome> = Vec::with_capacity(samples.len());
            for noise in &samples {
                let outcome = match seeds.first() {
                    Some(first) if nl == 0.0 => {
                        let mut o = first.clone();
                        o.seed = noise.seed;
                        o
                    }
                    _ => {
                        let problem = scenario.noisy_problem(noise);
                        let solver = cell_config(&cfg.solver, cfg.tau, noise);
                        run_seed(&problem, &scaling, &x0, &solver, noise, &truth)
                    }
                };
                seeds.push(outcome);
            }
            cells.push(CellSummary::from_seeds(nl, choice, seeds));
        }
    }
    Ok(ExperimentReport {
        campaign: cfg.name.clone(),
        cells,
    })
}

/// One noisy instance, scored like a campaign seed.
pub fn conductivity_instance(
    cfg: &ConductivityConfig,
    choice: ScalingChoice,
    noise_level: f64,
    seed: u64,
) -> Result<SeedOutcome> {
    let scenario = ConductivityScenario::build(cfg)?;
    let noise = add_noise(scenario.clean.as_ref(), noise_level, seed)?;
    let problem = scenario.noisy_problem(&noise);
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
