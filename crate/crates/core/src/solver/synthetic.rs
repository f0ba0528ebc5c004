//! Small zero-residue problems with known solution sets.

use faer::{Col, ColRef, Mat};
use serde::{Deserialize, Serialize};

use super::problem::NlsProblem;
use crate::error::{dim_err, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SyntheticProblem {
    /// `F(x) = x − b`; the single zero is `b`.
    Linear { target: Vec<f64> },
    /// `F(x) = (x₁, x₁x₂)`; zeros form the line `x₁ = 0`.
    Bilinear,
    /// `F(x) = (x₁, 0)`; zeros form the line `x₁ = 0` and the Jacobian is constant.
    AffineSet,
    /// `F(x) = (‖x‖² − 1, (‖x‖² − 1)/2)`; zeros form the unit circle.
    Circle,
    /// `F(x) = (10(x₂ − x₁²), 1 − x₁)`; the single zero is `(1, 1)`.
    Rosenbrock,
}

impl SyntheticProblem {
    fn check(&self, x: ColRef<'_, f64>) -> Result<()> {
        if x.nrows() != self.n_params() {
            return Err(dim_err(format!(
                "expected {} parameters, got {}",
                self.n_params(),
                x.nrows()
            )));
        }
        Ok(())
    }
}

impl NlsProblem for SyntheticProblem {
    fn n_params(&self) -> usize {
        match self {
            SyntheticProblem::Linear { target } => target.len(),
            _ => 2,
        }
    }

    fn n_residuals(&self) -> usize {
        self.n_params()
    }

    fn residual(&self, x: ColRef<'_, f64>) -> Result<Col<f64>> {
        self.check(x)?;
        Ok(match self {
            SyntheticProblem::Linear { target } => Col::from_fn(x.nrows(), |i| x[i] - target[i]),
            SyntheticProblem::Bilinear => {
                Col::from_fn(2, |i| if i == 0 { x[0] } else { x[0] * x[1] })
            }
            SyntheticProblem::AffineSet => Col::from_fn(2, |i| if i == 0 { x[0] } else { 0.0 }),
            SyntheticProblem::Circle => {
                let g = x[0] * x[0] + x[1] * x[1] - 1.0;
                Col::from_fn(2, |i| if i == 0 { g } else { 0.5 * g })
            }
            SyntheticProblem::Rosenbrock => Col::from_fn(2, |i| {
                if i == 0 {
                    10.0 * (x[1] - x[0] * x[0])
                } else {
                    1.0 - x[0]
                }
            }),
        })
    }

    fn jacobian(&self, x: ColRef<'_, f64>) -> Result<Mat<f64>> {
        self.check(x)?;
        Ok(match self {
            SyntheticProblem::Linear { target } => Mat::identity(target.len(), target.len()),
            SyntheticProblem::Bilinear => Mat::from_fn(2, 2, |i, j| match (i, j) {
                (0, 0) => 1.0,
                (0, 1) => 0.0,
                (1, 0) => x[1],
                _ => x[0],
            }),
            SyntheticProblem::AffineSet => {
                Mat::from_fn(2, 2, |i, j| if i == 0 && j == 0 { 1.0 } else { 0.0 })
            }
            SyntheticProblem::Circle => {
                Mat::from_fn(2, 2, |i, j| if i == 0 { 2.0 * x[j] } else { x[j] })
            }
            SyntheticProblem::Rosenbrock => Mat::from_fn(2, 2, |i, j| match (i, j) {
                (0, 0) => -20.0 * x[0],
                (0, 1) => 10.0,
                (1, 0) => -1.0,
                _ => 0.0,
            }),
        })
    }

    fn solution_distance(&self, x: ColRef<'_, f64>) -> Option<f64> {
        if x.nrows() != self.n_params() {
            return None;
        }
        Some(match self {
            SyntheticProblem::Linear { target } => (0..x.nrows())
                .map(|i| (x[i] - target[i]).powi(2))
                .sum::<f64>()
                .sqrt(),
            SyntheticProblem::Bilinear | SyntheticProblem::AffineSet => x[0].abs(),
            SyntheticProblem::Circle => ((x[0] * x[0] + x[1] * x[1]).sqrt() - 1.0).abs(),
            SyntheticProblem::Rosenbrock => ((x[0] - 1.0).powi(2) + (x[1] - 1.0).powi(2)).sqrt(),
        })
    }
}
