use faer::linalg::solvers::{Solve, SolveLstsq};
use faer::{Col, ColRef, Mat, MatRef, Side};

use crate::error::{dim_err, Error, Result};
use crate::scaling::ScalingOperator;

/// How the damped subproblem is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepMethod {
    /// Cholesky of `JᵀJ + λLᵀL`.
    NormalCholesky,
    /// Least squares on `[J; √λ·L] d ≈ [−F; 0]` via Householder QR.
    #[default]
    AugmentedQr,
}

/// Pivot ratio below which a factorization is treated as singular.
const PIVOT_RTOL: f64 = 1e-13;

/// `λ = ‖F‖²`.
pub fn damping(residual: ColRef<'_, f64>) -> f64 {
    residual.squared_norm_l2()
}

/// `∇φ = JᵀF` for `φ = ½‖F‖²`.
pub fn gradient(jacobian: MatRef<'_, f64>, residual: ColRef<'_, f64>) -> Result<Col<f64>> {
    if jacobian.nrows() != residual.nrows() {
        return Err(dim_err(format!(
            "J has {} rows, F has {}",
            jacobian.nrows(),
            residual.nrows()
        )));
    }
    Ok(jacobian.transpose() * residual)
}

/// `θ(d) = ‖Jd + F‖² + λ‖Ld‖²`.
pub fn model_value(
    jacobian: MatRef<'_, f64>,
    residual: ColRef<'_, f64>,
    scaling: &ScalingOperator,
    lambda: f64,
    d: ColRef<'_, f64>,
) -> f64 {
    let lin = jacobian * d + residual;
    lin.squared_norm_l2() + lambda * scaling.apply(d).squared_norm_l2()
}

/// Solves `(JᵀJ + λLᵀL) d = −JᵀF`.
pub fn lm_step(
    jacobian: MatRef<'_, f64>,
    residual: ColRef<'_, f64>,
    scaling: &ScalingOperator,
    lambda: f64,
    method: StepMethod,
) -> Result<Col<f64>> {
    let (m, n) = (jacobian.nrows(), jacobian.ncols());
    if residual.nrows() != m {
        return Err(dim_err(format!(
            "J has {m} rows, F has {}",
            residual.nrows()
        )));
    }
    if scaling.cols() != n {
        return Err(dim_err(format!(
            "J has {n} columns, L has {}",
            scaling.cols()
        )));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!(
            "damping must be positive, got {lambda}"
        )));
    }
    match method {
        StepMethod::NormalCholesky => {
            let mut h = jacobian.transpose() * jacobian;
            h += lambda * scaling.gram();
            let rhs = -(jacobian.transpose() * residual);
            let llt = h.llt(Side::Lower).map_err(|e| {
                Error::Completeness(format!("Cholesky of JᵀJ + λLᵀL failed: {e:?}"))
            })?;
            let l = llt.L();
            check_pivots((0..n).map(|i| l[(i, i)] * l[(i, i)]), "Cholesky")?;
            Ok(llt.solve(&rhs))
        }
        StepMethod::AugmentedQr => {
            let p = scaling.rows();
            let root = lambda.sqrt();
            let l = scaling.entries();
            let aug = Mat::from_fn(m + p, n, |i, j| {
                if i < m {
                    jacobian[(i, j)]
                } else {
                    root * l[(i - m, j)]
                }
            });
            if m + p < n {
                return Err(Error::Completeness(format!(
                    "[J; √λL] has {} rows for {n} unknowns",
                    m + p
                )));
            }
            let rhs = Col::from_fn(m + p, |i| if i < m { -residual[i] } else { 0.0 });
            let qr = aug.qr();
            let r = qr.thin_R();
            check_pivots((0..n).map(|i| r[(i, i)].abs()), "augmented QR")?;
            Ok(qr.solve_lstsq(&rhs))
        }
    }
}

fn check_pivots(pivots: impl Iterator<Item = f64>, what: &str) -> Result<()> {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for v in pivots {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi == 0.0 || !(lo > PIVOT_RTOL * hi) {
        return Err(Error::Completeness(format!(
            "{what}: pivot ratio {:.3e}",
            if hi == 0.0 { 0.0 } else { lo / hi }
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::col_from_slice;
    use crate::scaling::first_diff;

    #[test]
    fn damping_examples() {
        assert_eq!(damping(col_from_slice(&[3.0, 4.0]).as_ref()), 25.0);
        assert_eq!(damping(col_from_slice(&[0.0, 0.0]).as_ref()), 0.0);
        let e = col_from_slice(&[std::f64::consts::FRAC_1_SQRT_2, 0.0]);
        assert!((damping(e.as_ref()) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gradient_examples() {
        let j = Mat::<f64>::identity(2, 2);
        let g = gradient(j.as_ref(), col_from_slice(&[1.0, 2.0]).as_ref()).unwrap();
        assert_eq!((g[0], g[1]), (1.0, 2.0));
        let g = gradient(j.as_ref(), Col::<f64>::zeros(2).as_ref()).unwrap();
        assert_eq!(g.norm_l2(), 0.0);
        assert!(gradient(j.as_ref(), Col::<f64>::zeros(3).as_ref()).is_err());
    }

    #[test]
    fn identity_step() {
        let j = Mat::<f64>::identity(2, 2);
        let l = ScalingOperator::identity(2);
        let f = col_from_slice(&[2.0, 2.0]);
        for method in [StepMethod::NormalCholesky, StepMethod::AugmentedQr] {
            let d = lm_step(j.as_ref(), f.as_ref(), &l, 1.0, method).unwrap();
            assert!((d[0] + 1.0).abs() < 1e-14 && (d[1] + 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_scaling_two_by_two() {
        // (JᵀJ + 4LᵀL) = [[5, -4], [-4, 4]], JᵀF = (1, 0): d = -(1/4)·(4, 4) = (-1, -1).
        let j = Mat::from_fn(2, 2, |i, k| if i == 0 && k == 0 { 1.0 } else { 0.0 });
        let l = first_diff(2).unwrap();
        let f = col_from_slice(&[1.0, 0.0]);
        for method in [StepMethod::NormalCholesky, StepMethod::AugmentedQr] {
            let d = lm_step(j.as_ref(), f.as_ref(), &l, 4.0, method).unwrap();
            assert!((d[0] + 1.0).abs() < 1e-13, "{method:?} {:?}", d[0]);
            assert!((d[1] + 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn completeness_violation_is_reported() {
        let j = Mat::<f64>::zeros(2, 2);
        let l = ScalingOperator::raw(Mat::from_fn(1, 2, |_, _| 1.0));
        let f = col_from_slice(&[1.0, 1.0]);
        for method in [StepMethod::NormalCholesky, StepMethod::AugmentedQr] {
            let r = lm_step(j.as_ref(), f.as_ref(), &l, 1.0, method);
            assert!(
                matches!(r, Err(Error::Completeness(_))),
                "{method:?}: {r:?}"
            );
        }
    }

    #[test]
    fn nonpositive_damping_is_a_domain_error() {
        let j = Mat::<f64>::identity(2, 2);
        let l = ScalingOperator::identity(2);
        let f = col_from_slice(&[1.0, 1.0]);
        assert!(matches!(
            lm_step(j.as_ref(), f.as_ref(), &l, 0.0, StepMethod::AugmentedQr),
            Err(Error::Domain(_))
        ));
    }
}
