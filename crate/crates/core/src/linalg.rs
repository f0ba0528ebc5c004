//! Small dense helpers shared by the operator, factorization and model code.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::{Col, ColRef, Mat, MatRef};

use crate::error::{dim_err, Error, Result};

/// Relative tolerance used for numerical rank decisions.
pub const RANK_RTOL: f64 = 1e-10;

/// Kronecker product `a ⊗ b`.
pub fn kron(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    let (ra, ca) = (a.nrows(), a.ncols());
    let (rb, cb) = (b.nrows(), b.ncols());
    let mut out = Mat::<f64>::zeros(ra * rb, ca * cb);
    for j in 0..ca {
        for i in 0..ra {
            let s = a[(i, j)];
            if s == 0.0 {
                continue;
            }
            for q in 0..cb {
                for p in 0..rb {
                    out[(i * rb + p, j * cb + q)] = s * b[(p, q)];
                }
            }
        }
    }
    out
}

/// Stacks `top` over `bottom`.
pub fn vstack(top: MatRef<'_, f64>, bottom: MatRef<'_, f64>) -> Result<Mat<f64>> {
    if top.ncols() != bottom.ncols() {
        return Err(dim_err(format!(
            "cannot stack {} columns over {} columns",
            top.ncols(),
            bottom.ncols()
        )));
    }
    let r = top.nrows();
    Ok(Mat::from_fn(r + bottom.nrows(), top.ncols(), |i, j| {
        if i < r {
            top[(i, j)]
        } else {
            bottom[(i - r, j)]
        }
    }))
}

/// Singular values in nonincreasing order.
pub fn singular_values(a: MatRef<'_, f64>) -> Result<Vec<f64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(Vec::new());
    }
    let mut s = a
        .singular_values()
        .map_err(|e| Error::Factorization(format!("svd: {e:?}")))?;
    s.sort_by(|x, y| y.total_cmp(x));
    Ok(s)
}

/// Largest singular value.
pub fn spectral_norm(a: MatRef<'_, f64>) -> Result<f64> {
    Ok(singular_values(a)?.first().copied().unwrap_or(0.0))
}

/// Number of singular values above `rtol · σ_max`.
pub fn numerical_rank(a: MatRef<'_, f64>, rtol: f64) -> Result<usize> {
    let s = singular_values(a)?;
    let Some(&smax) = s.first() else {
        return Ok(0);
    };
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(s.iter().filter(|&&v| v > rtol * smax).count())
}

/// Dimension of the numerical null space of `a` (columns minus rank).
pub fn nullity(a: MatRef<'_, f64>, rtol: f64) -> Result<usize> {
    Ok(a.ncols() - numerical_rank(a, rtol)?)
}

pub fn col_from_slice(v: &[f64]) -> Col<f64> {
    Col::from_fn(v.len(), |i| v[i])
}

pub fn col_to_vec(v: ColRef<'_, f64>) -> Vec<f64> {
    (0..v.nrows()).map(|i| v[i]).collect()
}

pub fn mat_vec(a: MatRef<'_, f64>, x: ColRef<'_, f64>) -> Col<f64> {
    a * x
}

pub fn dot(a: ColRef<'_, f64>, b: ColRef<'_, f64>) -> f64 {
    (0..a.nrows()).map(|i| a[i] * b[i]).sum()
}

/// `aᵀa`.
pub fn gram(a: MatRef<'_, f64>) -> Mat<f64> {
    a.transpose() * a
}

/// LU factorization that reports exact or numerical singularity instead of producing garbage.
pub struct Lu {
    lu: PartialPivLu<f64>,
    n: usize,
}

impl Lu {
    pub fn new(a: MatRef<'_, f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(dim_err(format!(
                "LU of non-square {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let n = a.nrows();
        let lu = a.partial_piv_lu();
        let u = lu.U();
        let scale = (0..n).map(|i| u[(i, i)].abs()).fold(0.0_f64, f64::max);
        let tiny = (0..n)
            .map(|i| u[(i, i)].abs())
            .fold(f64::INFINITY, f64::min);
        if n > 0 && (!tiny.is_finite() || tiny <= scale * 1e-14) {
            return Err(Error::Singular(format!(
                "pivot ratio {:.3e} in {n}x{n} LU",
                tiny / scale
            )));
        }
        Ok(Self { lu, n })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_col(&self, b: ColRef<'_, f64>) -> Col<f64> {
        self.lu.solve(b)
    }

    pub fn solve_mat(&self, b: MatRef<'_, f64>) -> Mat<f64> {
        self.lu.solve(b)
    }
}
