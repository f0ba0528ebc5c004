use faer::{Col, ColRef, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg::Lu;

/// Separable forcing `S(t) = Σₖ e^{rₖ t} vₖ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Forcing {
    dof: usize,
    terms: Vec<(f64, Col<f64>)>,
}

impl Forcing {
    pub fn zero(dof: usize) -> Self {
        Self {
            dof,
            terms: Vec::new(),
        }
    }

    pub fn constant(v: Col<f64>) -> Self {
        let mut f = Self::zero(v.nrows());
        f.terms.push((0.0, v));
        f
    }

    /// Adds `e^{rate·t} v`.
    pub fn push(&mut self, rate: f64, v: Col<f64>) -> Result<()> {
        if v.nrows() != self.dof {
            return Err(dim_err(format!(
                "forcing term has {} entries, expected {}",
                v.nrows(),
                self.dof
            )));
        }
        if !rate.is_finite() || (0..v.nrows()).any(|i| !v[i].is_finite()) {
            return Err(Error::Domain("non-finite forcing term".into()));
        }
        self.terms.push((rate, v));
        Ok(())
    }

    pub fn dof(&self) -> usize {
        self.dof
    }

    pub fn terms(&self) -> &[(f64, Col<f64>)] {
        &self.terms
    }

    pub fn eval(&self, t: f64) -> Col<f64> {
        let mut s = Col::zeros(self.dof);
        for (rate, v) in &self.terms {
            s += (rate * t).exp() * v;
        }
        s
    }
}

/// `C u' = A u + S(t)`, `u(0) = u⁰`, with `C` diagonal.
#[derive(Debug, Clone)]
pub struct SemiDiscreteSystem {
    pub capacity: Vec<f64>,
    pub operator: Mat<f64>,
    pub forcing: Forcing,
    pub initial: Col<f64>,
}

impl SemiDiscreteSystem {
    pub fn new(
        capacity: Vec<f64>,
        operator: Mat<f64>,
        forcing: Forcing,
        initial: Col<f64>,
    ) -> Result<Self> {
        let dof = initial.nrows();
        if operator.nrows() != dof
            || operator.ncols() != dof
            || capacity.len() != dof
            || forcing.dof() != dof
        {
            return Err(dim_err(format!(
                "system parts disagree: A {}x{}, C {}, S {}, u0 {dof}",
                operator.nrows(),
                operator.ncols(),
                capacity.len(),
                forcing.dof()
            )));
        }
        if capacity.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
            return Err(Error::Domain("capacity must be positive".into()));
        }
        if (0..dof).any(|i| !initial[i].is_finite())
            || (0..dof).any(|i| (0..dof).any(|j| !operator[(i, j)].is_finite()))
        {
            return Err(Error::Domain("non-finite operator or initial state".into()));
        }
        Ok(Self {
            capacity,
            operator,
            forcing,
            initial,
        })
    }

    pub fn dof(&self) -> usize {
        self.initial.nrows()
    }

    /// `C⁻¹(A u + S(t))`.
    fn rhs(&self, t: f64, u: ColRef<'_, f64>) -> Col<f64> {
        let mut r = &self.operator * u + self.forcing.eval(t);
        for i in 0..r.nrows() {
            r[i] /= self.capacity[i];
        }
        r
    }

    /// `C ± (h/2)·A`.
    fn cn_matrix(&self, half_step: f64) -> Mat<f64> {
        let mut m = &self.operator * faer::Scale(half_step);
        for i in 0..self.dof() {
            m[(i, i)] += self.capacity[i];
        }
        m
    }

    /// Smallest per-interval substep count with `h·‖C⁻¹A‖_∞ ≤ 1`, enough for the explicit
    /// predictor to stay stable.
    pub fn explicit_substeps(&self, grid: &TimeGrid) -> usize {
        let n = self.dof();
        let norm = (0..n)
            .map(|i| (0..n).map(|j| self.operator[(i, j)].abs()).sum::<f64>() / self.capacity[i])
            .fold(0.0_f64, f64::max);
        let interval = grid.t_final / grid.n_obs as f64;
        ((interval * norm).ceil() as usize).max(1)
    }
}

/// `n_obs` equally spaced observation levels on `(0, t_final]`, each interval split into
/// `substeps` equal steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_final: f64,
    pub n_obs: usize,
    pub substeps: usize,
}

impl TimeGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(Error::Config(format!(
                "t_final must be positive, got {}",
                self.t_final
            )));
        }
        if self.n_obs == 0 || self.substeps == 0 {
            return Err(Error::Config("n_obs and substeps must be positive".into()));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        self.n_obs * self.substeps
    }

    pub fn step(&self) -> f64 {
        self.t_final / self.n_steps() as f64
    }

    pub fn obs_times(&self) -> Vec<f64> {
        (1..=self.n_obs)
            .map(|q| self.t_final * q as f64 / self.n_obs as f64)
            .collect()
    }

    pub fn with_substeps(&self, substeps: usize) -> Self {
        Self { substeps, ..*self }
    }
}

/// Observed state indices and observation times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorLayout {
    pub indices: Vec<usize>,
    pub times: Vec<f64>,
}

impl SensorLayout {
    pub fn n_rows(&self) -> usize {
        self.indices.len() * self.times.len()
    }
}

/// States at every substep; column `j` is `u(j·h)`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub states: Mat<f64>,
}

impl Trajectory {
    pub fn state(&self, j: usize) -> ColRef<'_, f64> {
        self.states.col(j)
    }

    /// State at observation level `q ∈ 1..=n_obs`.
    pub fn at_obs(&self, q: usize) -> ColRef<'_, f64> {
        self.states.col(q * self.grid.substeps)
    }

    /// Observed values ordered time-major, then sensor.
    pub fn observe(&self, indices: &[usize]) -> Col<f64> {
        let m = indices.len();
        Col::from_fn(self.grid.n_obs * m, |r| {
            let q = r / m + 1;
            self.states[(indices[r % m], q * self.grid.substeps)]
        })
    }
}

fn check_grid(sys: &SemiDiscreteSystem, grid: &TimeGrid) -> Result<()> {
    grid.validate()?;
    if sys.dof() == 0 {
        return Err(dim_err("empty system"));
    }
    Ok(())
}

/// `(C − h/2·A)u^{j+1} = (C + h/2·A)u^j + h/2·(S(t_j) + S(t_{j+1}))`.
pub fn crank_nicolson(sys: &SemiDiscreteSystem, grid: &TimeGrid) -> Result<Trajectory> {
    check_grid(sys, grid)?;
    let h = grid.step();
    let lu = Lu::new(sys.cn_matrix(-0.5 * h).as_ref())?;
    let explicit = sys.cn_matrix(0.5 * h);
    let steps = grid.n_steps();
    let mut states = Mat::zeros(sys.dof(), steps + 1);
    states.col_mut(0).copy_from(&sys.initial);
    let mut s_prev = sys.forcing.eval(0.0);
    for j in 0..steps {
        let s_next = sys.forcing.eval((j + 1) as f64 * h);
        let rhs = &explicit * states.col(j) + (0.5 * h) * (&s_prev + &s_next);
        let next = lu.solve_col(rhs.as_ref());
        states.col_mut(j + 1).copy_from(&next);
        s_prev = s_next;
    }
    finite_or_err(&states)?;
    Ok(Trajectory {
        grid: *grid,
        states,
    })
}

/// Explicit two-stage Runge-Kutta predictor followed by a trapezoidal corrector.
///
/// Fully explicit, so `grid.substeps` must satisfy the usual stability limit (see
/// [`SemiDiscreteSystem::explicit_substeps`]).
pub fn rk_cn_predictor_corrector(sys: &SemiDiscreteSystem, grid: &TimeGrid) -> Result<Trajectory> {
    check_grid(sys, grid)?;
    let h = grid.step();
    let steps = grid.n_steps();
    let mut states = Mat::zeros(sys.dof(), steps + 1);
    states.col_mut(0).copy_from(&sys.initial);
    for j in 0..steps {
        let t = j as f64 * h;
        let u = states.col(j).to_owned();
        let k1 = sys.rhs(t, u.as_ref());
        let euler = &u + h * &k1;
        let k2 = sys.rhs(t + h, euler.as_ref());
        let predicted = &u + (0.5 * h) * (&k1 + &k2);
        let k3 = sys.rhs(t + h, predicted.as_ref());
        let next = &u + (0.5 * h) * (&k1 + &k3);
        states.col_mut(j + 1).copy_from(&next);
    }
    finite_or_err(&states)?;
    Ok(Trajectory {
        grid: *grid,
        states,
    })
}

fn finite_or_err(states: &Mat<f64>) -> Result<()> {
    let bad = (0..states.ncols()).any(|j| (0..states.nrows()).any(|i| !states[(i, j)].is_finite()));
    if bad {
        Err(Error::Domain(
            "time integration produced non-finite states".into(),
        ))
    } else {
        Ok(())
    }
}

/// Parameter dependence of the operator: for `i < weights.ncols()`,
/// `∂A/∂θ_{offset+i} · u = weights[:, i] · (scale·u)ᵢ`.
///
/// Blocks sharing an offset add up, which expresses a parameter entering several terms.
#[derive(Debug, Clone)]
pub struct SensitivityBlock {
    pub offset: usize,
    pub weights: Mat<f64>,
    pub scale: Mat<f64>,
}

impl SensitivityBlock {
    pub fn len(&self) -> usize {
        self.weights.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `∂A/∂θᵢ` as a dense matrix (for tests and small problems).
    pub fn derivative(&self, i: usize) -> Mat<f64> {
        let dof = self.weights.nrows();
        Mat::from_fn(dof, dof, |r, c| self.weights[(r, i)] * self.scale[(i, c)])
    }
}

/// Jacobian of the observed CN trajectory with respect to `θ`.
///
/// Column `i` is the CN solution of `C·Vᵢ' = A(θ)Vᵢ + (∂A/∂θᵢ)u(t)`, `Vᵢ(0) = 0`, sampled at
/// `indices` on the observation levels (rows time-major, then sensor). This is the exact
/// derivative of the discrete forward map computed by [`crank_nicolson`].
pub fn sensitivity_jacobian(
    sys: &SemiDiscreteSystem,
    blocks: &[SensitivityBlock],
    n_params: usize,
    trajectory: &Trajectory,
    indices: &[usize],
) -> Result<Mat<f64>> {
    let dof = sys.dof();
    let grid = trajectory.grid;
    let s = grid.substeps;
    if trajectory.states.nrows() != dof || trajectory.states.ncols() != grid.n_steps() + 1 {
        return Err(dim_err("trajectory does not match the system"));
    }
    for b in blocks {
        if b.weights.nrows() != dof || b.scale.ncols() != dof || b.scale.nrows() != b.len() {
            return Err(dim_err("sensitivity block shape mismatch"));
        }
        if b.offset + b.len() > n_params {
            return Err(dim_err("sensitivity block exceeds parameter count"));
        }
    }
    if indices.iter().any(|&i| i >= dof) {
        return Err(dim_err("sensor index out of range"));
    }

    let h = grid.step();
    let lu = Lu::new(sys.cn_matrix(-0.5 * h).as_ref())?;
    let m = lu.solve_mat(sys.cn_matrix(0.5 * h).as_ref());
    let mut m_pow = m.clone();
    for _ in 1..s {
        m_pow = &m * &m_pow;
    }
    // powers[b][i] = Mⁱ·K⁻¹·(h/2)·W_b
    let powers: Vec<Vec<Mat<f64>>> = blocks
        .iter()
        .map(|b| {
            let mut out = Vec::with_capacity(s);
            let first = lu.solve_mat((&b.weights * faer::Scale(0.5 * h)).as_ref());
            out.push(first);
            for i in 1..s {
                let next = &m * &out[i - 1];
                out.push(next);
            }
            out
        })
        .collect();
    let scaled: Vec<Mat<f64>> = blocks
        .iter()
        .map(|b| &b.scale * &trajectory.states)
        .collect();

    let n_sens = indices.len();
    let mut v = Mat::<f64>::zeros(dof, n_params);
    let mut jac = Mat::<f64>::zeros(grid.n_obs * n_sens, n_params);
    for q in 0..grid.n_obs {
        v = &m_pow * &v;
        for (bi, b) in blocks.iter().enumerate() {
            for j in 0..s {
                let idx = q * s + j;
                let p = &powers[bi][s - 1 - j];
                let sc = &scaled[bi];
                for i in 0..b.len() {
                    let c = sc[(i, idx)] + sc[(i, idx + 1)];
                    if c == 0.0 {
                        continue;
                    }
                    let col = b.offset + i;
                    for r in 0..dof {
                        v[(r, col)] += c * p[(r, i)];
                    }
                }
            }
        }
        for (k, &row) in indices.iter().enumerate() {
            for c in 0..n_params {
                jac[(q * n_sens + k, c)] = v[(row, c)];
            }
        }
    }
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, s: f64, u0: f64) -> SemiDiscreteSystem {
        let mut f = Forcing::zero(1);
        f.push(0.0, Col::from_fn(1, |_| s)).unwrap();
        SemiDiscreteSystem::new(
            vec![1.0],
            Mat::from_fn(1, 1, |_, _| a),
            f,
            Col::from_fn(1, |_| u0),
        )
        .unwrap()
    }

    #[test]
    fn cn_scalar_decay() {
        let sys = scalar(-1.0, 0.0, 1.0);
        let grid = TimeGrid {
            t_final: 0.1,
            n_obs: 1,
            substeps: 1,
        };
        let tr = crank_nicolson(&sys, &grid).unwrap();
        assert!((tr.at_obs(1)[0] - 0.95 / 1.05).abs() < 1e-15);
        assert!((tr.at_obs(1)[0] - 0.904_762).abs() < 1e-6);
    }

    #[test]
    fn zero_operator_is_exact() {
        let sys = scalar(0.0, 2.0, 1.0);
        let grid = TimeGrid {
            t_final: 1.0,
            n_obs: 4,
            substeps: 3,
        };
        for tr in [
            crank_nicolson(&sys, &grid).unwrap(),
            rk_cn_predictor_corrector(&sys, &grid).unwrap(),
        ] {
            for q in 1..=4 {
                assert!((tr.at_obs(q)[0] - (1.0 + 2.0 * q as f64 / 4.0)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn predictor_corrector_is_second_order() {
        let sys = scalar(-1.0, 0.0, 1.0);
        let err = |substeps| {
            let grid = TimeGrid {
                t_final: 1.0,
                n_obs: 1,
                substeps,
            };
            (rk_cn_predictor_corrector(&sys, &grid).unwrap().at_obs(1)[0] - (-1.0_f64).exp()).abs()
        };
        let order = (err(20) / err(40)).log2();
        assert!((order - 2.0).abs() < 0.1, "order {order}");
        // one step agrees with CN to third order
        let h = 0.01;
        let grid = TimeGrid {
            t_final: h,
            n_obs: 1,
            substeps: 1,
        };
        let a = rk_cn_predictor_corrector(&sys, &grid).unwrap().at_obs(1)[0];
        let b = crank_nicolson(&sys, &grid).unwrap().at_obs(1)[0];
        assert!((a - b).abs() < h.powi(3));
    }

    #[test]
    fn parameter_free_operator_has_zero_jacobian() {
        let sys = scalar(-1.0, 1.0, 0.0);
        let grid = TimeGrid {
            t_final: 1.0,
            n_obs: 3,
            substeps: 2,
        };
        let tr = crank_nicolson(&sys, &grid).unwrap();
        let j = sensitivity_jacobian(&sys, &[], 2, &tr, &[0]).unwrap();
        assert_eq!((j.nrows(), j.ncols()), (3, 2));
        assert_eq!(j.norm_max(), 0.0);
    }

    #[test]
    fn scalar_sensitivity_matches_difference_quotient() {
        // u' = −θu + 1: one parameter entering through diag(−u).
        let theta = 0.7;
        let grid = TimeGrid {
            t_final: 2.0,
            n_obs: 4,
            substeps: 5,
        };
        let block = SensitivityBlock {
            offset: 0,
            weights: Mat::from_fn(1, 1, |_, _| -1.0),
            scale: Mat::identity(1, 1),
        };
        let run = |th: f64| {
            let sys = scalar(-th, 1.0, 0.5);
            let tr = crank_nicolson(&sys, &grid).unwrap();
            (sys, tr)
        };
        let (sys, tr) = run(theta);
        let j = sensitivity_jacobian(&sys, &[block], 1, &tr, &[0]).unwrap();
        let d = 1e-6;
        let plus = run(theta + d).1.observe(&[0]);
        let minus = run(theta - d).1.observe(&[0]);
        for q in 0..4 {
            let fd = (plus[q] - minus[q]) / (2.0 * d);
            assert!((j[(q, 0)] - fd).abs() < 1e-8 * fd.abs().max(1.0), "{q}");
        }
    }
}
