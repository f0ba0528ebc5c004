//! Generalized singular value decomposition of a pair `(A, L)` and the step-size
//! diagnostics built on it.
//!
//! For `A ∈ ℝ^{m×n}`, `L ∈ ℝ^{p×n}` with `m ≥ n ≥ p`, `rank(L) = p` and
//! `N(A) ∩ N(L) = {0}`:
//!
//! ```text
//! A = U · diag(Σ, I_{n−p}) · X⁻¹        L = V · [M 0] · X⁻¹
//! 0 ≤ σ₁ ≤ … ≤ σ_p ≤ 1,   1 ≥ μ₁ ≥ … ≥ μ_p > 0,   σᵢ² + μᵢ² = 1
//! ```
//!
//! Construction: thin QR of the stacked matrix `[A; L] = [Q_A; Q_L]·R`, full SVD
//! `Q_L = V·[M 0]·Wᵀ`, then `Q_A·W` has orthogonal columns whose norms are the `σᵢ`.
//! `X = R⁻¹W`.

use faer::linalg::solvers::Solve;
use faer::{Col, ColRef, Mat, MatRef};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{self, RANK_RTOL};

/// Relative threshold on `σ_min([A; L])` below which the pair is rejected.
pub const SINGULAR_PAIR_RTOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct GsvdFactors {
    /// `m × n`, orthonormal columns.
    pub u: Mat<f64>,
    /// `p × p`, orthogonal.
    pub v: Mat<f64>,
    /// `n × n`, nonsingular.
    pub x: Mat<f64>,
    /// `X⁻¹`, kept so reconstructions do not need an inverse.
    pub x_inv: Mat<f64>,
    /// Ascending.
    pub sigma: Vec<f64>,
    /// Descending.
    pub mu: Vec<f64>,
}

impl GsvdFactors {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.sigma.len()
    }

    /// `U · diag(Σ, I) · X⁻¹`.
    pub fn reconstruct_a(&self) -> Mat<f64> {
        let p = self.p();
        let scaled = Mat::from_fn(self.u.nrows(), self.n(), |i, j| {
            let s = if j < p { self.sigma[j] } else { 1.0 };
            self.u[(i, j)] * s
        });
        &scaled * &self.x_inv
    }

    /// `V · [M 0] · X⁻¹`.
    pub fn reconstruct_l(&self) -> Mat<f64> {
        let p = self.p();
        let vm = Mat::from_fn(p, self.n(), |i, j| {
            if j < p {
                self.v[(i, j)] * self.mu[j]
            } else {
                0.0
            }
        });
        &vm * &self.x_inv
    }

    /// LM direction written in GSVD coordinates: `d = −X·diag(Γ, I)·Uᵀ·F`.
    pub fn lm_direction(&self, lambda: f64, residual: ColRef<'_, f64>) -> Result<Col<f64>> {
        let gamma = gamma_filter(self, lambda)?;
        let p = self.p();
        let mut w = self.u.transpose() * residual;
        for i in 0..self.n() {
            w[i] *= if i < p { -gamma[i] } else { -1.0 };
        }
        Ok(&self.x * &w)
    }
}

/// GSVD of `(a, l)`.
pub fn gsvd_pair(a: MatRef<'_, f64>, l: MatRef<'_, f64>) -> Result<GsvdFactors> {
    let (m, n) = (a.nrows(), a.ncols());
    let p = l.nrows();
    if l.ncols() != n {
        return Err(dim_err(format!("A has {n} columns, L has {}", l.ncols())));
    }
    if !(m >= n && n >= p) {
        return Err(dim_err(format!("need m ≥ n ≥ p, got m={m}, n={n}, p={p}")));
    }
    if n == 0 {
        return Err(dim_err("empty pair"));
    }
    if p > 0 {
        let rank = linalg::numerical_rank(l, RANK_RTOL)?;
        if rank != p {
            return Err(dim_err(format!("L is {p}×{n} with rank {rank}")));
        }
    }

    let stacked = linalg::vstack(a, l)?;
    let qr = stacked.qr();
    let q = qr.compute_thin_Q();
    let r = qr.thin_R().to_owned();

    let rs = linalg::singular_values(r.as_ref())?;
    let (smax, smin) = (rs[0], rs[n - 1]);
    if smax == 0.0 || smin <= SINGULAR_PAIR_RTOL * smax {
        return Err(Error::Completeness(format!(
            "σ_min([A; L]) / σ_max = {:.3e}",
            if smax == 0.0 { 0.0 } else { smin / smax }
        )));
    }

    let q_a = q.subrows(0, m);
    let q_l = q.subrows(m, p);

    // Full SVD of Q_L; W = right singular vectors (n×n).
    let (v, mu, w) = if p > 0 {
        let svd = q_l
            .svd()
            .map_err(|e| Error::Factorization(format!("svd of Q_L: {e:?}")))?;
        let s = svd.S().column_vector();
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
        let v = Mat::from_fn(p, p, |i, k| svd.U()[(i, order[k])]);
        let mu: Vec<f64> = order.iter().map(|&k| s[k].min(1.0)).collect();
        let mut w = svd.V().to_owned();
        // Keep the first p right vectors aligned with the permuted μ.
        let head = Mat::from_fn(n, p, |i, k| svd.V()[(i, order[k])]);
        for k in 0..p {
            for i in 0..n {
                w[(i, k)] = head[(i, k)];
            }
        }
        (v, mu, w)
    } else {
        (Mat::zeros(0, 0), Vec::new(), Mat::<f64>::identity(n, n))
    };
    if let Some(&last) = mu.last() {
        if last <= 0.0 {
            return Err(Error::Completeness("μ_p = 0".into()));
        }
    }

    // Q_A·W has orthogonal columns with norms (σ₁..σ_p, 1..1). Re-orthonormalize with
    // the largest columns first so that (near-)zero columns receive an orthonormal
    // completion instead of polluting the others.
    let c = q_a * &w;
    let reversed = c.reverse_cols().to_owned();
    let cqr = reversed.qr();
    let q_rev = cqr.compute_thin_Q();
    let t = cqr.thin_R();
    let mut u = Mat::<f64>::zeros(m, n);
    let mut sigma = vec![0.0; p];
    for k in 0..n {
        let src = n - 1 - k;
        let tkk = t[(src, src)];
        let sign = if tkk < 0.0 { -1.0 } else { 1.0 };
        for i in 0..m {
            u[(i, k)] = sign * q_rev[(i, src)];
        }
        if k < p {
            sigma[k] = tkk.abs().min(1.0);
        }
    }

    // X = R⁻¹W via LU of the (nonsingular) triangular factor.
    let x = r.partial_piv_lu().solve(&w);
    let x_inv = w.transpose() * &r;

    Ok(GsvdFactors {
        u,
        v,
        x,
        x_inv,
        sigma,
        mu,
    })
}

/// `γᵢ = σᵢ/μᵢ`, nondecreasing.
pub fn gen_singular_values(f: &GsvdFactors) -> Vec<f64> {
    f.sigma.iter().zip(&f.mu).map(|(s, m)| s / m).collect()
}

/// Diagonal of `Γ = (Σ² + λM²)⁻¹Σ`.
pub fn gamma_filter(f: &GsvdFactors, lambda: f64) -> Result<Vec<f64>> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("λ must be positive, got {lambda}")));
    }
    Ok(f.sigma
        .iter()
        .zip(&f.mu)
        .map(|(&s, &m)| s / (s * s + lambda * m * m))
        .collect())
}

/// `ψ(γ, λ) = γ√(1+γ²)/(γ²+λ)`.
pub fn psi(gamma: f64, lambda: f64) -> Result<f64> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::Domain(format!(
            "γ must be finite and ≥ 0, got {gamma}"
        )));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("λ must be positive, got {lambda}")));
    }
    // γ√(1+γ²) overflows for huge γ; divide through by γ² first.
    if gamma > 1e150 {
        let inv = 1.0 / gamma;
        return Ok((1.0 + inv * inv).sqrt() / (1.0 + lambda * inv * inv));
    }
    Ok(gamma * (1.0 + gamma * gamma).sqrt() / (gamma * gamma + lambda))
}

/// Supremum of `ψ(·, λ)` over `γ ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PsiMax {
    /// `λ < 1/2`: unique maximizer.
    Attained { gamma_max: f64, value: f64 },
    /// `λ ≥ 1/2`: `ψ` is nondecreasing in `γ` and never exceeds `sup`.
    Unbounded { sup: f64 },
}

impl PsiMax {
    pub fn value(&self) -> f64 {
        match *self {
            PsiMax::Attained { value, .. } => value,
            PsiMax::Unbounded { sup } => sup,
        }
    }

    pub fn argmax(&self) -> Option<f64> {
        match *self {
            PsiMax::Attained { gamma_max, .. } => Some(gamma_max),
            PsiMax::Unbounded { .. } => None,
        }
    }
}

pub fn psi_max(lambda: f64) -> Result<PsiMax> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("λ must be positive, got {lambda}")));
    }
    if lambda < 0.5 {
        Ok(PsiMax::Attained {
            gamma_max: (-lambda / (2.0 * lambda - 1.0)).sqrt(),
            value: 1.0 / (2.0 * (lambda - lambda * lambda).sqrt()),
        })
    } else {
        Ok(PsiMax::Unbounded { sup: 1.0 })
    }
}

/// `(1/√γ̂)·max{‖Γ‖₂, 1}·‖F‖₂`: an upper bound on the LM step norm.
pub fn step_norm_bound(
    f: &GsvdFactors,
    lambda: f64,
    residual: ColRef<'_, f64>,
    completeness: f64,
) -> Result<f64> {
    if !(completeness > 0.0) {
        return Err(Error::Domain(format!(
            "completeness constant must be positive, got {completeness}"
        )));
    }
    let gmax = gamma_filter(f, lambda)?.into_iter().fold(0.0_f64, f64::max);
    Ok(gmax.max(1.0) * residual.norm_l2() / completeness.sqrt())
}
