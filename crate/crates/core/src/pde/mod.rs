//! Chebyshev collocation models, Crank-Nicolson integration and sensitivity Jacobians.

pub mod bioheat;
pub mod cheb;
pub mod conduction;
pub mod system;

use faer::{Col, ColRef, Mat};

pub use cheb::{cheb_grid, ChebGrid};
pub use system::{
    crank_nicolson, rk_cn_predictor_corrector, sensitivity_jacobian, Forcing, SemiDiscreteSystem,
    SensitivityBlock, SensorLayout, TimeGrid, Trajectory,
};

use crate::error::{dim_err, Result};
use crate::solver::NlsProblem;

/// A semi-discrete model whose operator depends on a parameter vector `θ`.
pub trait ParametricModel {
    fn n_params(&self) -> usize;
    fn system(&self, theta: ColRef<'_, f64>) -> Result<SemiDiscreteSystem>;
    /// Structure of `∂A/∂θ`; independent of `θ`.
    fn sensitivity_blocks(&self) -> &[SensitivityBlock];
}

/// `F(θ) = observed CN trajectory(θ) − data`.
#[derive(Debug, Clone)]
pub struct InverseProblem<M> {
    pub model: M,
    pub grid: TimeGrid,
    pub sensors: Vec<usize>,
    pub data: Col<f64>,
}

impl<M: ParametricModel> InverseProblem<M> {
    pub fn new(model: M, grid: TimeGrid, sensors: Vec<usize>, data: Col<f64>) -> Result<Self> {
        grid.validate()?;
        if data.nrows() != grid.n_obs * sensors.len() {
            return Err(dim_err(format!(
                "data has {} entries, expected {}",
                data.nrows(),
                grid.n_obs * sensors.len()
            )));
        }
        Ok(Self {
            model,
            grid,
            sensors,
            data,
        })
    }

    pub fn layout(&self) -> SensorLayout {
        SensorLayout {
            indices: self.sensors.clone(),
            times: self.grid.obs_times(),
        }
    }

    pub fn trajectory(&self, theta: ColRef<'_, f64>) -> Result<Trajectory> {
        crank_nicolson(&self.model.system(theta)?, &self.grid)
    }

    /// Observed model output at `θ`.
    pub fn forward(&self, theta: ColRef<'_, f64>) -> Result<Col<f64>> {
        Ok(self.trajectory(theta)?.observe(&self.sensors))
    }
}

impl<M: ParametricModel> NlsProblem for InverseProblem<M> {
    fn n_params(&self) -> usize {
        self.model.n_params()
    }

    fn n_residuals(&self) -> usize {
        self.data.nrows()
    }

    fn residual(&self, x: ColRef<'_, f64>) -> Result<Col<f64>> {
        Ok(self.forward(x)? - &self.data)
    }

    fn jacobian(&self, x: ColRef<'_, f64>) -> Result<Mat<f64>> {
        let sys = self.model.system(x)?;
        let traj = crank_nicolson(&sys, &self.grid)?;
        sensitivity_jacobian(
            &sys,
            self.model.sensitivity_blocks(),
            self.model.n_params(),
            &traj,
            &self.sensors,
        )
    }
}
