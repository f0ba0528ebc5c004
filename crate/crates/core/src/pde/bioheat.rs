//! Pennes bioheat model `U_t − ΔU + P_f U = G` on `(0,1)×(0,H)` with insulated sides,
//! `U_y = B(U − U∞)` at `y = 0` and `U = 0` at `y = H`.
//!
//! Unknowns live on the `(n+1)×n` tensor grid that drops the Dirichlet face; node `(i, j)`
//! has index `i + (n+1)·j` (x fastest).

use std::f64::consts::PI;

use faer::{Col, ColRef, Mat};
use serde::{Deserialize, Serialize};

use super::cheb::ChebGrid;
use super::system::{Forcing, SemiDiscreteSystem, SensitivityBlock};
use super::ParametricModel;
use crate::error::{dim_err, Error, Result};
use crate::linalg::kron;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BioheatParams {
    /// Biot number `B`.
    pub biot: f64,
    pub u_inf: f64,
    /// Domain height `H`.
    pub height: f64,
}

impl Default for BioheatParams {
    fn default() -> Self {
        Self {
            biot: 0.015,
            u_inf: 0.001,
            height: 1.0,
        }
    }
}

impl BioheatParams {
    pub fn validate(&self) -> Result<()> {
        if !self.biot.is_finite() || !self.u_inf.is_finite() || !(self.height > 0.0) {
            return Err(Error::Config(format!(
                "invalid bioheat parameters {self:?}"
            )));
        }
        Ok(())
    }
}

pub fn bioheat_dof(n: usize) -> usize {
    (n + 1) * n
}

/// `(x, y)` of every unknown.
pub fn bioheat_nodes(grid: &ChebGrid, height: f64) -> Vec<(f64, f64)> {
    let n = grid.n;
    let mut out = Vec::with_capacity(bioheat_dof(n));
    for j in 0..n {
        for i in 0..=n {
            out.push((grid.points[i], height * grid.points[j]));
        }
    }
    out
}

/// Unknowns off every boundary face.
pub fn bioheat_interior(n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for j in 1..n {
        for i in 1..n {
            out.push(i + (n + 1) * j);
        }
    }
    out
}

/// Interior tensor subsample: `x`-indices not divisible by 3, odd `y`-indices.
/// At `n = 14` this is the 9×7 = 63 sensor layout.
pub fn default_bioheat_sensors(n: usize) -> Vec<usize> {
    let xs: Vec<usize> = (1..n).filter(|i| i % 3 != 0).collect();
    let mut out = Vec::new();
    for j in (1..n).step_by(2) {
        for &i in &xs {
            out.push(i + (n + 1) * j);
        }
    }
    out
}

/// Perfusion-independent part of the model.
#[derive(Debug, Clone)]
pub struct BioheatModel {
    pub grid: ChebGrid,
    pub params: BioheatParams,
    /// Discrete Laplacian with the boundary conditions folded in.
    pub diffusion: Mat<f64>,
    /// `G` plus the affine Robin contribution.
    pub forcing: Forcing,
    pub initial: Col<f64>,
    blocks: Vec<SensitivityBlock>,
}

impl BioheatModel {
    pub fn new(
        grid: ChebGrid,
        params: BioheatParams,
        source: &Forcing,
        initial: Col<f64>,
    ) -> Result<Self> {
        params.validate()?;
        let n = grid.n;
        let nx = n + 1;
        let dof = bioheat_dof(n);
        if source.dof() != dof || initial.nrows() != dof {
            return Err(dim_err(format!(
                "bioheat data must have {dof} entries (source {}, initial {})",
                source.dof(),
                initial.nrows()
            )));
        }
        let d = &grid.diff;

        // x: zero flux at both ends, imposed on the first derivative.
        let mut dbc_x = d.clone();
        for c in 0..nx {
            dbc_x[(0, c)] = 0.0;
            dbc_x[(n, c)] = 0.0;
        }
        let dxx = d * &dbc_x;

        // y: derivative on the full column (U = 0 at y = H), Robin row at y = 0.
        let dy = d * faer::Scale(1.0 / params.height);
        let mut dbc_y = Mat::from_fn(nx, n, |r, c| dy[(r, c)]);
        for c in 0..n {
            dbc_y[(0, c)] = 0.0;
        }
        dbc_y[(0, 0)] = params.biot;
        let dy_rows = dy.subrows(0, n);
        let dyy = dy_rows * &dbc_y;
        let robin = Col::from_fn(n, |r| -params.biot * params.u_inf * dy_rows[(r, 0)]);

        let diffusion = kron(Mat::<f64>::identity(n, n).as_ref(), dxx.as_ref())
            + kron(dyy.as_ref(), Mat::<f64>::identity(nx, nx).as_ref());
        let mut forcing = source.clone();
        forcing.push(0.0, Col::from_fn(dof, |k| robin[k / nx]))?;

        let blocks = vec![SensitivityBlock {
            offset: 0,
            weights: -Mat::<f64>::identity(dof, dof),
            scale: Mat::identity(dof, dof),
        }];
        Ok(Self {
            grid,
            params,
            diffusion,
            forcing,
            initial,
            blocks,
        })
    }

    pub fn dof(&self) -> usize {
        self.initial.nrows()
    }

    pub fn nodes(&self) -> Vec<(f64, f64)> {
        bioheat_nodes(&self.grid, self.params.height)
    }

    /// `A(p) = Δ_h − diag(p)`.
    pub fn operator(&self, perfusion: ColRef<'_, f64>) -> Result<Mat<f64>> {
        if perfusion.nrows() != self.dof() {
            return Err(dim_err(format!(
                "perfusion has {} entries, expected {}",
                perfusion.nrows(),
                self.dof()
            )));
        }
        if (0..perfusion.nrows()).any(|i| !perfusion[i].is_finite()) {
            return Err(Error::Domain("non-finite perfusion".into()));
        }
        let mut a = self.diffusion.clone();
        for i in 0..self.dof() {
            a[(i, i)] -= perfusion[i];
        }
        Ok(a)
    }
}

impl ParametricModel for BioheatModel {
    fn n_params(&self) -> usize {
        self.dof()
    }

    fn system(&self, theta: ColRef<'_, f64>) -> Result<SemiDiscreteSystem> {
        SemiDiscreteSystem::new(
            vec![1.0; self.dof()],
            self.operator(theta)?,
            self.forcing.clone(),
            self.initial.clone(),
        )
    }

    fn sensitivity_blocks(&self) -> &[SensitivityBlock] {
        &self.blocks
    }
}

/// Assembles the semi-discrete bioheat system for one perfusion vector.
pub fn assemble_bioheat(
    grid: &ChebGrid,
    perfusion: ColRef<'_, f64>,
    params: BioheatParams,
    source: &Forcing,
    initial: Col<f64>,
) -> Result<SemiDiscreteSystem> {
    BioheatModel::new(grid.clone(), params, source, initial)?.system(perfusion)
}

/// Closed-form solution with `P_f(x,y) = sin(πxy)`:
/// `U = e^{−π²t}/(2(B+H))·((B+H)y² − By − H)cos(πx) + B·U∞/(B+H)·(H − y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedBioheat {
    pub params: BioheatParams,
}

impl ManufacturedBioheat {
    fn spatial(&self, x: f64, y: f64) -> (f64, f64) {
        let BioheatParams {
            biot: b,
            u_inf,
            height: h,
        } = self.params;
        let a = ((b + h) * y * y - b * y - h) * (PI * x).cos() / (2.0 * (b + h));
        let steady = b * u_inf / (b + h) * (h - y);
        (a, steady)
    }

    pub fn temperature(&self, x: f64, y: f64, t: f64) -> f64 {
        let (a, s) = self.spatial(x, y);
        (-PI * PI * t).exp() * a + s
    }

    pub fn perfusion(&self, x: f64, y: f64) -> f64 {
        (PI * x * y).sin()
    }

    /// `G = U_t − ΔU + P_f U = e^{−π²t}(P_f·a − cos πx) + P_f·s` where `U = e^{−π²t}a + s`.
    pub fn source(&self, x: f64, y: f64, t: f64) -> f64 {
        let (a, s) = self.spatial(x, y);
        let p = self.perfusion(x, y);
        (-PI * PI * t).exp() * (p * a - (PI * x).cos()) + p * s
    }
}

/// Samples of the manufactured case on the bioheat unknowns.
#[derive(Debug, Clone)]
pub struct ManufacturedData {
    /// Exact perfusion at every unknown.
    pub perfusion: Col<f64>,
    pub source: Forcing,
    pub initial: Col<f64>,
    /// Exact temperature at every unknown, one column per requested time.
    pub temperature: Mat<f64>,
}

pub fn manufactured_bioheat_data(
    grid: &ChebGrid,
    times: &[f64],
    params: BioheatParams,
) -> Result<ManufacturedData> {
    params.validate()?;
    let m = ManufacturedBioheat { params };
    let nodes = bioheat_nodes(grid, params.height);
    let dof = nodes.len();
    let perfusion = Col::from_fn(dof, |k| m.perfusion(nodes[k].0, nodes[k].1));
    let mut source = Forcing::zero(dof);
    source.push(
        -PI * PI,
        Col::from_fn(dof, |k| {
            let (x, y) = nodes[k];
            let (a, _) = m.spatial(x, y);
            perfusion[k] * a - (PI * x).cos()
        }),
    )?;
    source.push(
        0.0,
        Col::from_fn(dof, |k| {
            let (x, y) = nodes[k];
            perfusion[k] * m.spatial(x, y).1
        }),
    )?;
    let initial = Col::from_fn(dof, |k| m.temperature(nodes[k].0, nodes[k].1, 0.0));
    let temperature = Mat::from_fn(dof, times.len(), |k, q| {
        m.temperature(nodes[k].0, nodes[k].1, times[q])
    });
    Ok(ManufacturedData {
        perfusion,
        source,
        initial,
        temperature,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::cheb::cheb_grid;
    use crate::pde::system::{crank_nicolson, TimeGrid};

    #[test]
    fn sensor_layout_at_n14() {
        let s = default_bioheat_sensors(14);
        assert_eq!(s.len(), 63);
        let interior = bioheat_interior(14);
        assert!(s.iter().all(|i| interior.contains(i)));
        assert_eq!(bioheat_dof(14), 210);
    }

    #[test]
    fn manufactured_closed_form_values() {
        let m = ManufacturedBioheat {
            params: BioheatParams::default(),
        };
        assert!(m.temperature(0.0, 1.0, 0.0).abs() < 1e-15);
        assert_eq!(m.perfusion(0.0, 0.3), 0.0);
        assert!(m.perfusion(1.0, 1.0).abs() < 1e-15);
    }

    #[test]
    fn manufactured_source_satisfies_pde() {
        // Fourth-order central differences as an independent oracle.
        let m = ManufacturedBioheat {
            params: BioheatParams::default(),
        };
        let h = 1e-3;
        let d2 = |f: &dyn Fn(f64) -> f64, z: f64| {
            (-f(z + 2.0 * h) + 16.0 * f(z + h) - 30.0 * f(z) + 16.0 * f(z - h) - f(z - 2.0 * h))
                / (12.0 * h * h)
        };
        let d1 = |f: &dyn Fn(f64) -> f64, z: f64| {
            (-f(z + 2.0 * h) + 8.0 * f(z + h) - 8.0 * f(z - h) + f(z - 2.0 * h)) / (12.0 * h)
        };
        let mut seed = 7_u64;
        let mut next = || {
            seed = seed
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..100 {
            let (x, y, t) = (next(), next(), 0.2 * next());
            let ut = d1(&|s| m.temperature(x, y, s), t);
            let uxx = d2(&|s| m.temperature(s, y, t), x);
            let uyy = d2(&|s| m.temperature(x, s, t), y);
            let r = ut - uxx - uyy + m.perfusion(x, y) * m.temperature(x, y, t) - m.source(x, y, t);
            assert!(r.abs() < 1e-7, "{r}");
        }
    }

    #[test]
    fn boundary_rows_hold_for_exact_solution() {
        let grid = cheb_grid(14).unwrap();
        let p = BioheatParams::default();
        let m = ManufacturedBioheat { params: p };
        let d = &grid.diff;
        let t = 0.05;
        // Neumann at x = 0, 1 on every y line; Robin at y = 0 on every x line.
        for &y in &grid.points {
            let u = Col::from_fn(15, |i| m.temperature(grid.points[i], y, t));
            let du = d * &u;
            assert!(du[0].abs() < 1e-8 && du[14].abs() < 1e-8);
        }
        for &x in &grid.points {
            let u = Col::from_fn(15, |j| m.temperature(x, grid.points[j], t));
            let du = d * &u;
            assert!((du[0] - p.biot * (u[0] - p.u_inf)).abs() < 1e-8);
            assert!(u[14].abs() < 1e-15);
        }
    }

    #[test]
    fn perfusion_enters_affinely() {
        let grid = cheb_grid(5).unwrap();
        let dof = bioheat_dof(5);
        let model = BioheatModel::new(
            grid,
            BioheatParams::default(),
            &Forcing::zero(dof),
            Col::zeros(dof),
        )
        .unwrap();
        let p = Col::from_fn(dof, |i| 0.1 * i as f64);
        let a0 = model.operator(p.as_ref()).unwrap();
        let mut q = p.clone();
        q[7] += 0.25;
        let a1 = model.operator(q.as_ref()).unwrap();
        let diff = (&a1 - &a0) * faer::Scale(1.0 / 0.25);
        let expect = model.sensitivity_blocks()[0].derivative(7);
        assert!((&diff - &expect).norm_max() < 1e-12);
        assert_eq!(expect[(7, 7)], -1.0);
    }

    #[test]
    fn symmetric_initial_state_stays_symmetric() {
        let n = 8;
        let grid = cheb_grid(n).unwrap();
        let dof = bioheat_dof(n);
        let params = BioheatParams {
            u_inf: 0.0,
            ..Default::default()
        };
        let nodes = bioheat_nodes(&grid, 1.0);
        let u0 = Col::from_fn(dof, |k| {
            let (x, y) = nodes[k];
            (1.0 - y) * (1.0 + (x - 0.5).powi(2))
        });
        let sys = assemble_bioheat(
            &grid,
            Col::zeros(dof).as_ref(),
            params,
            &Forcing::zero(dof),
            u0,
        )
        .unwrap();
        let tg = TimeGrid {
            t_final: 0.1,
            n_obs: 2,
            substeps: 10,
        };
        let tr = crank_nicolson(&sys, &tg).unwrap();
        let u = tr.at_obs(2);
        for j in 0..n {
            for i in 0..=n {
                let a = u[i + (n + 1) * j];
                let b = u[(n - i) + (n + 1) * j];
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn forward_solve_matches_closed_form() {
        let grid = cheb_grid(14).unwrap();
        let params = BioheatParams::default();
        let tg = TimeGrid {
            t_final: 0.1,
            n_obs: 4,
            substeps: 100,
        };
        let data = manufactured_bioheat_data(&grid, &tg.obs_times(), params).unwrap();
        let sys = assemble_bioheat(
            &grid,
            data.perfusion.as_ref(),
            params,
            &data.source,
            data.initial.clone(),
        )
        .unwrap();
        let tr = crank_nicolson(&sys, &tg).unwrap();
        for q in 1..=4 {
            let err = (tr.at_obs(q) - data.temperature.col(q - 1)).norm_l2()
                / data.temperature.col(q - 1).norm_l2();
            assert!(err < 1e-4, "q={q} err={err}");
        }
    }
}
