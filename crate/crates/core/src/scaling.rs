//! Scaling operators `L` for the damping term `λ‖Ld‖²`.
//!
//! One-dimensional difference stencils and their Kronecker assemblies on tensor grids.
//! Grid unknowns are ordered with the x-index fastest: node `(i, j)` lives at `i + nx·j`.
//! With that ordering `I_ny ⊗ D` differentiates along x and `D ⊗ I_nx` along y.

use faer::{Col, ColRef, Mat, MatRef};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{self, RANK_RTOL};

/// How an operator was put together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assembly {
    Identity,
    /// Stack of x- and y-differences on an `(n+1) × n` grid.
    Grad2d,
    /// Stack of x- and y-differences on an `(n+1) × (n+1)` grid.
    Tilde2d,
    /// Two independent copies of an inner operator (`I₂ ⊗ L`).
    BlockOrthotropic,
    /// 1D stencils and user-supplied matrices.
    Raw,
}

/// A `p × n` matrix used as `LᵀL` in the damped normal equations.
#[derive(Debug, Clone)]
pub struct ScalingOperator {
    entries: Mat<f64>,
    derivative_order: u8,
    assembly: Assembly,
}

impl ScalingOperator {
    /// Wraps an arbitrary matrix. No rank requirement is imposed.
    pub fn raw(entries: Mat<f64>) -> Self {
        Self {
            entries,
            derivative_order: 0,
            assembly: Assembly::Raw,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            entries: Mat::identity(n, n),
            derivative_order: 0,
            assembly: Assembly::Identity,
        }
    }

    /// The `0 × n` operator (no damping on any direction).
    pub fn empty(n: usize) -> Self {
        Self::raw(Mat::zeros(0, n))
    }

    pub fn entries(&self) -> MatRef<'_, f64> {
        self.entries.as_ref()
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn derivative_order(&self) -> u8 {
        self.derivative_order
    }

    pub fn assembly(&self) -> Assembly {
        self.assembly
    }

    pub fn apply(&self, x: ColRef<'_, f64>) -> Col<f64> {
        self.entries.as_ref() * x
    }

    /// `LᵀL`.
    pub fn gram(&self) -> Mat<f64> {
        linalg::gram(self.entries.as_ref())
    }

    pub fn rank(&self) -> Result<usize> {
        linalg::numerical_rank(self.entries.as_ref(), RANK_RTOL)
    }

    /// An `r × n` operator `L̃` of full row rank `r = rank(L)` with `L̃ᵀL̃ = LᵀL`.
    ///
    /// The stacked 2D assemblies have more rows than columns; the damping term and the
    /// GSVD only see `LᵀL`, so this is the form handed to the GSVD.
    pub fn full_row_rank_equivalent(&self) -> Result<Self> {
        let (p, n) = (self.rows(), self.cols());
        if p == 0 {
            return Ok(self.clone());
        }
        let svd = self
            .entries
            .thin_svd()
            .map_err(|e| Error::Factorization(format!("svd: {e:?}")))?;
        let s = svd.S().column_vector();
        let v = svd.V();
        let k = s.nrows();
        let smax = (0..k).map(|i| s[i]).fold(0.0_f64, f64::max);
        let keep: Vec<usize> = (0..k).filter(|&i| s[i] > RANK_RTOL * smax).collect();
        let entries = Mat::from_fn(keep.len(), n, |r, c| s[keep[r]] * v[(c, keep[r])]);
        Ok(Self {
            entries,
            derivative_order: self.derivative_order,
            assembly: self.assembly,
        })
    }
}

fn stencil(n: usize, coeffs: &[f64], order: u8) -> Result<ScalingOperator> {
    let w = coeffs.len();
    if n < w {
        return Err(dim_err(format!(
            "order-{order} difference needs n ≥ {w}, got n = {n}"
        )));
    }
    let rows = n + 1 - w;
    let entries = Mat::from_fn(rows, n, |i, j| {
        if j >= i && j < i + w {
            coeffs[j - i]
        } else {
            0.0
        }
    });
    Ok(ScalingOperator {
        entries,
        derivative_order: order,
        assembly: Assembly::Raw,
    })
}

/// `(n−1) × n` forward difference with rows `(−1, 1)`.
pub fn first_diff(n: usize) -> Result<ScalingOperator> {
    stencil(n, &[-1.0, 1.0], 1)
}

/// `(n−2) × n` second difference with rows `(1, −2, 1)`.
pub fn second_diff(n: usize) -> Result<ScalingOperator> {
    stencil(n, &[1.0, -2.0, 1.0], 2)
}

/// `(n−3) × n` third difference with rows `(−1, 3, −3, 1)`.
pub fn third_diff(n: usize) -> Result<ScalingOperator> {
    stencil(n, &[-1.0, 3.0, -3.0, 1.0], 3)
}

/// Difference operator of the given order (1, 2 or 3).
pub fn diff(order: u8, n: usize) -> Result<ScalingOperator> {
    match order {
        1 => first_diff(n),
        2 => second_diff(n),
        3 => third_diff(n),
        _ => Err(dim_err(format!("difference order {order} not in 1..=3"))),
    }
}

/// Kronecker product of two matrices.
pub fn kron(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    linalg::kron(a, b)
}

fn stacked_2d(order: u8, nx: usize, ny: usize, assembly: Assembly) -> Result<ScalingOperator> {
    let dx = diff(order, nx)?;
    let dy = diff(order, ny)?;
    let ix = Mat::<f64>::identity(nx, nx);
    let iy = Mat::<f64>::identity(ny, ny);
    let along_x = kron(iy.as_ref(), dx.entries());
    let along_y = kron(dy.entries(), ix.as_ref());
    let entries = linalg::vstack(along_x.as_ref(), along_y.as_ref())?;
    let op = ScalingOperator {
        entries,
        derivative_order: order,
        assembly,
    };
    // Kernel is the tensor product of the two 1D kernels (dimension order²).
    let expected = nx * ny - (order as usize).pow(2);
    let rank = op.rank()?;
    if rank != expected {
        return Err(dim_err(format!(
            "{assembly:?} order {order}: rank {rank}, expected {expected}"
        )));
    }
    Ok(op)
}

/// `[I_n ⊗ L_i(n+1); L_i(n) ⊗ I_{n+1}]` acting on the `n(n+1)` unknowns of an
/// `(n+1) × n` grid (x has `n+1` nodes).
pub fn assemble_grad2d(order: u8, n: usize) -> Result<ScalingOperator> {
    stacked_2d(order, n + 1, n, Assembly::Grad2d)
}

/// `[I_{n+1} ⊗ L_i(n+1); L_i(n+1) ⊗ I_{n+1}]` acting on an `(n+1) × (n+1)` grid.
pub fn assemble_tilde2d(order: u8, n: usize) -> Result<ScalingOperator> {
    stacked_2d(order, n + 1, n + 1, Assembly::Tilde2d)
}

/// `I₂ ⊗ L`: the same smoothing applied independently to two stacked fields.
pub fn block_orthotropic(inner: &ScalingOperator) -> ScalingOperator {
    let i2 = Mat::<f64>::identity(2, 2);
    ScalingOperator {
        entries: kron(i2.as_ref(), inner.entries()),
        derivative_order: inner.derivative_order,
        assembly: Assembly::BlockOrthotropic,
    }
}

/// Largest `γ̂` with `‖Jv‖² + ‖Lv‖² ≥ γ̂‖v‖²`, i.e. `λ_min(JᵀJ + LᵀL)`.
///
/// Computed as the squared smallest singular value of `[J; L]`. Zero (numerically) means
/// `J` and `L` share a null vector.
pub fn completeness_gamma(j: MatRef<'_, f64>, l: &ScalingOperator) -> Result<f64> {
    if j.ncols() != l.cols() {
        return Err(dim_err(format!(
            "J has {} columns, L has {}",
            j.ncols(),
            l.cols()
        )));
    }
    let n = j.ncols();
    if n == 0 {
        return Ok(0.0);
    }
    let stacked = linalg::vstack(j, l.entries())?;
    if stacked.nrows() < n {
        return Ok(0.0);
    }
    let s = linalg::singular_values(stacked.as_ref())?;
    let smin = s.get(n - 1).copied().unwrap_or(0.0);
    Ok(smin * smin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::col_from_slice;

    fn rows_of(op: &ScalingOperator) -> Vec<Vec<f64>> {
        let e = op.entries();
        (0..e.nrows())
            .map(|i| (0..e.ncols()).map(|j| e[(i, j)]).collect())
            .collect()
    }

    #[test]
    fn one_dimensional_stencils() {
        assert_eq!(rows_of(&first_diff(2).unwrap()), vec![vec![-1.0, 1.0]]);
        assert_eq!(
            rows_of(&first_diff(3).unwrap()),
            vec![vec![-1.0, 1.0, 0.0], vec![0.0, -1.0, 1.0]]
        );
        assert_eq!(
            rows_of(&second_diff(3).unwrap()),
            vec![vec![1.0, -2.0, 1.0]]
        );
        assert_eq!(
            rows_of(&third_diff(4).unwrap()),
            vec![vec![-1.0, 3.0, -3.0, 1.0]]
        );
    }

    #[test]
    fn stencil_size_errors() {
        assert!(matches!(first_diff(1), Err(Error::Dimension(_))));
        assert!(matches!(second_diff(2), Err(Error::Dimension(_))));
        assert!(matches!(third_diff(3), Err(Error::Dimension(_))));
    }

    #[test]
    fn stencil_null_spaces() {
        let ones = col_from_slice(&[1.0; 5]);
        assert!(first_diff(5).unwrap().apply(ones.as_ref()).norm_l2() == 0.0);
        let ramp = col_from_slice(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert!(second_diff(5).unwrap().apply(ramp.as_ref()).norm_l2() == 0.0);
        let c = col_from_slice(&[3.7; 4]);
        assert!(second_diff(4).unwrap().apply(c.as_ref()).norm_l2() < 1e-15);
        let sq = col_from_slice(&[1.0, 4.0, 9.0, 16.0, 25.0, 36.0]);
        assert!(third_diff(6).unwrap().apply(sq.as_ref()).norm_l2() == 0.0);
        assert_eq!(third_diff(10).unwrap().rank().unwrap(), 7);
    }

    #[test]
    fn grad2d_dimensions_and_constants() {
        let l1 = assemble_grad2d(1, 14).unwrap();
        assert_eq!((l1.rows(), l1.cols()), (391, 210));
        let ones = Col::<f64>::from_fn(210, |_| 1.0);
        assert!(l1.apply(ones.as_ref()).norm_l2() < 1e-14);
        assert_eq!(l1.assembly(), Assembly::Grad2d);
    }

    #[test]
    fn tilde2d_dimensions() {
        let l1 = assemble_tilde2d(1, 15).unwrap();
        assert_eq!((l1.rows(), l1.cols()), (480, 256));
        let b = block_orthotropic(&l1);
        assert_eq!((b.rows(), b.cols()), (960, 512));
        assert_eq!(b.assembly(), Assembly::BlockOrthotropic);
    }

    #[test]
    fn infeasible_assemblies() {
        assert!(assemble_grad2d(3, 3).is_err());
        assert!(assemble_grad2d(4, 10).is_err());
        assert!(assemble_tilde2d(2, 1).is_err());
    }

    #[test]
    fn completeness_examples() {
        let j = Mat::<f64>::identity(2, 2);
        let g = completeness_gamma(j.as_ref(), &ScalingOperator::empty(2)).unwrap();
        assert!((g - 1.0).abs() < 1e-14);

        let j = Mat::from_fn(2, 2, |i, k| if i == 0 && k == 0 { 1.0 } else { 0.0 });
        let g = completeness_gamma(j.as_ref(), &first_diff(2).unwrap()).unwrap();
        assert!((g - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-14);

        let j = Mat::<f64>::zeros(2, 2);
        let l = ScalingOperator::raw(Mat::from_fn(1, 2, |_, _| 1.0));
        assert!(completeness_gamma(j.as_ref(), &l).unwrap() < 1e-28);

        let bad = Mat::<f64>::zeros(2, 3);
        assert!(completeness_gamma(bad.as_ref(), &first_diff(2).unwrap()).is_err());
    }

    #[test]
    fn full_row_rank_equivalent_preserves_gram() {
        let l = assemble_grad2d(2, 4).unwrap();
        let e = l.full_row_rank_equivalent().unwrap();
        assert_eq!(e.rows(), l.cols() - 4);
        let d = &l.gram() - &e.gram();
        assert!(d.norm_max() < 1e-10);
    }
}
