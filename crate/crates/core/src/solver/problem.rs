use faer::{Col, ColRef, Mat};

use crate::error::Result;

/// Residual map `F: ℝⁿ → ℝᵐ` (`m ≥ n`) with its Jacobian.
///
/// Implementations are evaluated through `&self` so one problem can serve several
/// concurrent solves.
pub trait NlsProblem {
    fn n_params(&self) -> usize;

    fn n_residuals(&self) -> usize;

    fn residual(&self, x: ColRef<'_, f64>) -> Result<Col<f64>>;

    fn jacobian(&self, x: ColRef<'_, f64>) -> Result<Mat<f64>>;

    /// `dist(x, X*)` when the solution set is known (synthetic problems only).
    fn solution_distance(&self, _x: ColRef<'_, f64>) -> Option<f64> {
        None
    }
}

impl<P: NlsProblem + ?Sized> NlsProblem for &P {
    fn n_params(&self) -> usize {
        (**self).n_params()
    }
    fn n_residuals(&self) -> usize {
        (**self).n_residuals()
    }
    fn residual(&self, x: ColRef<'_, f64>) -> Result<Col<f64>> {
        (**self).residual(x)
    }
    fn jacobian(&self, x: ColRef<'_, f64>) -> Result<Mat<f64>> {
        (**self).jacobian(x)
    }
    fn solution_distance(&self, x: ColRef<'_, f64>) -> Option<f64> {
        (**self).solution_distance(x)
    }
}

type VecFn = Box<dyn Fn(ColRef<'_, f64>) -> Col<f64> + Send + Sync>;
type MatFn = Box<dyn Fn(ColRef<'_, f64>) -> Mat<f64> + Send + Sync>;
type DistFn = Box<dyn Fn(ColRef<'_, f64>) -> f64 + Send + Sync>;

/// A problem given by closures.
pub struct ClosureProblem {
    n: usize,
    m: usize,
    residual: VecFn,
    jacobian: MatFn,
    distance: Option<DistFn>,
}

impl ClosureProblem {
    pub fn new(
        n: usize,
        m: usize,
        residual: impl Fn(ColRef<'_, f64>) -> Col<f64> + Send + Sync + 'static,
        jacobian: impl Fn(ColRef<'_, f64>) -> Mat<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            n,
            m,
            residual: Box::new(residual),
            jacobian: Box::new(jacobian),
            distance: None,
        }
    }

    pub fn with_distance(
        mut self,
        distance: impl Fn(ColRef<'_, f64>) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.distance = Some(Box::new(distance));
        self
    }
}

impl NlsProblem for ClosureProblem {
    fn n_params(&self) -> usize {
        self.n
    }
    fn n_residuals(&self) -> usize {
        self.m
    }
    fn residual(&self, x: ColRef<'_, f64>) -> Result<Col<f64>> {
        Ok((self.residual)(x))
    }
    fn jacobian(&self, x: ColRef<'_, f64>) -> Result<Mat<f64>> {
        Ok((self.jacobian)(x))
    }
    fn solution_distance(&self, x: ColRef<'_, f64>) -> Option<f64> {
        self.distance.as_ref().map(|d| d(x))
    }
}

/// Central-difference Jacobian with step `h·(1 + |xᵢ|)`.
pub fn finite_difference_jacobian<P: NlsProblem + ?Sized>(
    problem: &P,
    x: ColRef<'_, f64>,
    h: f64,
) -> Result<Mat<f64>> {
    let n = problem.n_params();
    let m = problem.n_residuals();
    let mut out = Mat::<f64>::zeros(m, n);
    let mut xp = x.to_owned();
    for j in 0..n {
        let step = h * (1.0 + x[j].abs());
        xp[j] = x[j] + step;
        let fp = problem.residual(xp.as_ref())?;
        xp[j] = x[j] - step;
        let fm = problem.residual(xp.as_ref())?;
        xp[j] = x[j];
        for i in 0..m {
            out[(i, j)] = (fp[i] - fm[i]) / (2.0 * step);
        }
    }
    Ok(out)
}
