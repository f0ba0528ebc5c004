//! Heat conduction `C u_t = ∇·(K∇u) − q u + g` on the unit square with diagonal
//! `K = diag(k₁₁, k₂₂)` and a boundary law `k ∂u/∂n = −h u + r` on each face.
//!
//! The divergence is taken in flux form, `∂ₓFₓ + ∂ᵧFᵧ` with `Fₓ = k₁₁uₓ` at interior
//! columns and `Fₓ` given by the face law on `x = 0, 1` (likewise for `y`). Hence `k₁₁` on the
//! `x` faces and `k₂₂` on the `y` faces never enter the discrete model. Nodes are indexed
//! `i + (n+1)·j` with `x` fastest.

use std::f64::consts::PI;

use faer::{Col, ColRef, Mat};
use serde::{Deserialize, Serialize};

use super::cheb::{cheb_grid, ChebGrid};
use super::system::{crank_nicolson, Forcing, SemiDiscreteSystem, SensitivityBlock, TimeGrid};
use super::ParametricModel;
use crate::error::{dim_err, Error, Result};
use crate::linalg::kron;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anisotropy {
    /// One field `k = k₁₁ = k₂₂`.
    Isotropic,
    /// Two fields stacked as `(k₁₁; k₂₂)`.
    Orthotropic,
}

/// `k ∂u/∂n = −h·u + r(t)` along one face, sampled at the `n+1` face nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceCondition {
    pub transfer: Vec<f64>,
    /// `r(t) = Σ e^{rate·t}·values`.
    pub data: Vec<(f64, Vec<f64>)>,
}

impl FaceCondition {
    /// `k ∂u/∂n + h(u − f) = 0`.
    pub fn robin(transfer: Vec<f64>, reference: Vec<(f64, Vec<f64>)>) -> Self {
        let data = reference
            .into_iter()
            .map(|(rate, f)| (rate, f.iter().zip(&transfer).map(|(f, h)| f * h).collect()))
            .collect();
        Self { transfer, data }
    }

    /// Prescribed outward flux `k ∂u/∂n = f`.
    pub fn flux(len: usize, flux: Vec<(f64, Vec<f64>)>) -> Self {
        Self {
            transfer: vec![0.0; len],
            data: flux,
        }
    }
}

/// Everything but the conductivity.
#[derive(Debug, Clone)]
pub struct ConductionSetup {
    pub grid: ChebGrid,
    pub anisotropy: Anisotropy,
    pub capacity: Vec<f64>,
    pub reaction: Vec<f64>,
    pub source: Forcing,
    /// Faces `x = 0`, `x = 1`, `y = 0`, `y = 1`.
    pub faces: [FaceCondition; 4],
    pub initial: Col<f64>,
}

pub fn conduction_nodes(grid: &ChebGrid) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(grid.len() * grid.len());
    for &y in &grid.points {
        for &x in &grid.points {
            out.push((x, y));
        }
    }
    out
}

/// The conductivity-independent pieces of `A(k)` and the sensitivity structure.
#[derive(Debug, Clone)]
pub struct ConductionModel {
    pub setup: ConductionSetup,
    dx: Mat<f64>,
    dy: Mat<f64>,
    mask_x: Vec<f64>,
    mask_y: Vec<f64>,
    /// Boundary and reaction terms of `A`.
    fixed: Mat<f64>,
    forcing: Forcing,
    blocks: Vec<SensitivityBlock>,
}

impl ConductionModel {
    pub fn new(setup: ConductionSetup) -> Result<Self> {
        let n = setup.grid.n;
        let nx = n + 1;
        let dof = nx * nx;
        if setup.capacity.len() != dof
            || setup.reaction.len() != dof
            || setup.source.dof() != dof
            || setup.initial.nrows() != dof
        {
            return Err(dim_err(format!("conduction data must have {dof} entries")));
        }
        for f in &setup.faces {
            if f.transfer.len() != nx || f.data.iter().any(|(_, v)| v.len() != nx) {
                return Err(dim_err(format!("face data must have {nx} entries")));
            }
        }
        let id = Mat::<f64>::identity(nx, nx);
        let dx = kron(id.as_ref(), setup.grid.diff.as_ref());
        let dy = kron(setup.grid.diff.as_ref(), id.as_ref());

        let idx = |i: usize, j: usize| i + nx * j;
        let mut mask_x = vec![1.0; dof];
        let mut mask_y = vec![1.0; dof];
        // Fₓ = sign·(h u − r) on x faces, sign = +1 at x = 0 and −1 at x = 1.
        let mut hx = vec![0.0; dof];
        let mut hy = vec![0.0; dof];
        let mut rx = Forcing::zero(dof);
        let mut ry = Forcing::zero(dof);
        for (face, (sign, along_x, end)) in [
            (1.0, true, 0),
            (-1.0, true, n),
            (1.0, false, 0),
            (-1.0, false, n),
        ]
        .into_iter()
        .enumerate()
        {
            let cond = &setup.faces[face];
            let node = |s: usize| if along_x { idx(end, s) } else { idx(s, end) };
            for s in 0..nx {
                let k = node(s);
                if along_x {
                    mask_x[k] = 0.0;
                    hx[k] = sign * cond.transfer[s];
                } else {
                    mask_y[k] = 0.0;
                    hy[k] = sign * cond.transfer[s];
                }
            }
            for (rate, vals) in &cond.data {
                let mut v = Col::<f64>::zeros(dof);
                for s in 0..nx {
                    v[node(s)] = -sign * vals[s];
                }
                if along_x {
                    rx.push(*rate, v)?;
                } else {
                    ry.push(*rate, v)?;
                }
            }
        }

        let mut fixed = col_scaled(&dx, &hx) + col_scaled(&dy, &hy);
        for k in 0..dof {
            fixed[(k, k)] -= setup.reaction[k];
        }
        let mut forcing = setup.source.clone();
        for (rate, v) in rx.terms() {
            forcing.push(*rate, &dx * v)?;
        }
        for (rate, v) in ry.terms() {
            forcing.push(*rate, &dy * v)?;
        }

        let row_masked =
            |d: &Mat<f64>, mask: &[f64]| Mat::from_fn(dof, dof, |r, c| mask[r] * d[(r, c)]);
        let second = match setup.anisotropy {
            Anisotropy::Isotropic => 0,
            Anisotropy::Orthotropic => dof,
        };
        let blocks = vec![
            SensitivityBlock {
                offset: 0,
                weights: dx.clone(),
                scale: row_masked(&dx, &mask_x),
            },
            SensitivityBlock {
                offset: second,
                weights: dy.clone(),
                scale: row_masked(&dy, &mask_y),
            },
        ];
        Ok(Self {
            setup,
            dx,
            dy,
            mask_x,
            mask_y,
            fixed,
            forcing,
            blocks,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.setup.initial.nrows()
    }

    /// Splits `k` into `(k₁₁, k₂₂)`, checking positivity.
    pub fn components(&self, k: ColRef<'_, f64>) -> Result<(Vec<f64>, Vec<f64>)> {
        let dof = self.n_nodes();
        if k.nrows() != self.n_params() {
            return Err(dim_err(format!(
                "conductivity has {} entries, expected {}",
                k.nrows(),
                self.n_params()
            )));
        }
        if let Some(i) = (0..k.nrows()).find(|&i| !(k[i] > 0.0) || !k[i].is_finite()) {
            return Err(Error::Domain(format!(
                "conductivity {} at index {i} is not positive",
                k[i]
            )));
        }
        let k11: Vec<f64> = (0..dof).map(|i| k[i]).collect();
        let k22 = match self.setup.anisotropy {
            Anisotropy::Isotropic => k11.clone(),
            Anisotropy::Orthotropic => (0..dof).map(|i| k[dof + i]).collect(),
        };
        Ok((k11, k22))
    }

    pub fn operator(&self, k: ColRef<'_, f64>) -> Result<Mat<f64>> {
        let (k11, k22) = self.components(k)?;
        let wx: Vec<f64> = k11.iter().zip(&self.mask_x).map(|(k, m)| k * m).collect();
        let wy: Vec<f64> = k22.iter().zip(&self.mask_y).map(|(k, m)| k * m).collect();
        Ok(&self.fixed
            + col_scaled(&self.dx, &wx) * &self.dx
            + col_scaled(&self.dy, &wy) * &self.dy)
    }
}

/// `d·diag(w)`.
fn col_scaled(d: &Mat<f64>, w: &[f64]) -> Mat<f64> {
    Mat::from_fn(d.nrows(), d.ncols(), |r, c| d[(r, c)] * w[c])
}

impl ParametricModel for ConductionModel {
    fn n_params(&self) -> usize {
        match self.setup.anisotropy {
            Anisotropy::Isotropic => self.n_nodes(),
            Anisotropy::Orthotropic => 2 * self.n_nodes(),
        }
    }

    fn system(&self, theta: ColRef<'_, f64>) -> Result<SemiDiscreteSystem> {
        SemiDiscreteSystem::new(
            self.setup.capacity.clone(),
            self.operator(theta)?,
            self.forcing.clone(),
            self.setup.initial.clone(),
        )
    }

    fn sensitivity_blocks(&self) -> &[SensitivityBlock] {
        &self.blocks
    }
}

pub fn assemble_conduction(
    setup: &ConductionSetup,
    k: ColRef<'_, f64>,
) -> Result<SemiDiscreteSystem> {
    ConductionModel::new(setup.clone())?.system(k)
}

/// Isotropic benchmark: `k = (1+x+y)/12`, `C = 1`, `q = g = 0`, `u⁰ = 0`, insulated apart
/// from unit fluxes `k ∂u/∂n = −1, 1, −1, 1` on `x = 0, x = 1, y = 0, y = 1`.
pub fn isotropic_example(n: usize) -> Result<(ConductionSetup, Col<f64>)> {
    let grid = cheb_grid(n)?;
    let nx = n + 1;
    let dof = nx * nx;
    let nodes = conduction_nodes(&grid);
    let face = |f: f64| FaceCondition::flux(nx, vec![(0.0, vec![f; nx])]);
    let setup = ConductionSetup {
        grid,
        anisotropy: Anisotropy::Isotropic,
        capacity: vec![1.0; dof],
        reaction: vec![0.0; dof],
        source: Forcing::zero(dof),
        faces: [face(-1.0), face(1.0), face(-1.0), face(1.0)],
        initial: Col::zeros(dof),
    };
    let k = Col::from_fn(dof, |i| (1.0 + nodes[i].0 + nodes[i].1) / 12.0);
    Ok((setup, k))
}

/// Closed-form orthotropic benchmark
/// `u = e^{−t}(sin πx sin πy + (π+1)(x+y) + 1)`, `k₁₁ = (1+x+y)/12`, `k₂₂ = (1+x/2+y)/12`,
/// `h = 1` on every face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OrthotropicExact;

impl OrthotropicExact {
    pub fn temperature(&self, x: f64, y: f64, t: f64) -> f64 {
        (-t).exp() * (spatial(x, y))
    }

    pub fn k11(&self, x: f64, y: f64) -> f64 {
        (1.0 + x + y) / 12.0
    }

    pub fn k22(&self, x: f64, y: f64) -> f64 {
        (1.0 + 0.5 * x + y) / 12.0
    }

    fn ux(&self, x: f64, y: f64) -> f64 {
        PI * (PI * x).cos() * (PI * y).sin() + PI + 1.0
    }

    fn uy(&self, x: f64, y: f64) -> f64 {
        PI * (PI * x).sin() * (PI * y).cos() + PI + 1.0
    }

    /// Source term, as a multiple of `e^{−t}`.
    pub fn source(&self, x: f64, y: f64) -> f64 {
        let s = (PI * x).sin() * (PI * y).sin();
        -spatial(x, y) - (2.0 * PI + 2.0 + PI * (PI * (x + y)).sin()) / 12.0
            + PI * PI / 12.0 * (2.0 + 1.5 * x + 2.0 * y) * s
    }

    /// Face data `f` of `k ∂u/∂n + (u − f) = 0`, as a multiple of `e^{−t}`; faces ordered
    /// `x = 0, x = 1, y = 0, y = 1`, parameterized by the coordinate along the face.
    pub fn face_reference(&self, face: usize, s: f64) -> f64 {
        match face {
            0 => spatial(0.0, s) - self.k11(0.0, s) * self.ux(0.0, s),
            1 => spatial(1.0, s) + self.k11(1.0, s) * self.ux(1.0, s),
            2 => spatial(s, 0.0) - self.k22(s, 0.0) * self.uy(s, 0.0),
            _ => spatial(s, 1.0) + self.k22(s, 1.0) * self.uy(s, 1.0),
        }
    }
}

fn spatial(x: f64, y: f64) -> f64 {
    (PI * x).sin() * (PI * y).sin() + (PI + 1.0) * (x + y) + 1.0
}

pub fn orthotropic_example(n: usize) -> Result<(ConductionSetup, Col<f64>)> {
    let ex = OrthotropicExact;
    let grid = cheb_grid(n)?;
    let nx = n + 1;
    let dof = nx * nx;
    let nodes = conduction_nodes(&grid);
    let mut source = Forcing::zero(dof);
    source.push(
        -1.0,
        Col::from_fn(dof, |i| ex.source(nodes[i].0, nodes[i].1)),
    )?;
    let faces = std::array::from_fn(|f| {
        let vals = grid
            .points
            .iter()
            .map(|&s| ex.face_reference(f, s))
            .collect();
        FaceCondition::robin(vec![1.0; nx], vec![(-1.0, vals)])
    });
    let setup = ConductionSetup {
        anisotropy: Anisotropy::Orthotropic,
        capacity: vec![1.0; dof],
        reaction: vec![0.0; dof],
        source,
        faces,
        initial: Col::from_fn(dof, |i| ex.temperature(nodes[i].0, nodes[i].1, 0.0)),
        grid,
    };
    let k = Col::from_fn(2 * dof, |i| {
        let (x, y) = nodes[i % dof];
        if i < dof {
            ex.k11(x, y)
        } else {
            ex.k22(x, y)
        }
    });
    Ok((setup, k))
}

/// Isotropic-example temperatures on the `n`-grid at the observation levels, computed on a
/// `refine·n` grid with `refine·grid.substeps` steps per interval and interpolated down.
/// Columns are observation levels.
pub fn isotropic_reference_data(n: usize, grid: &TimeGrid, refine: usize) -> Result<Mat<f64>> {
    if refine == 0 {
        return Err(Error::Config("refinement factor must be positive".into()));
    }
    let (fine_setup, fine_k) = isotropic_example(refine * n)?;
    let fine_grid = fine_setup.grid.clone();
    let fine = ConductionModel::new(fine_setup)?;
    let sys = fine.system(fine_k.as_ref())?;
    let traj = crank_nicolson(&sys, &grid.with_substeps(refine * grid.substeps))?;
    let coarse = cheb_grid(n)?;
    let p = fine_grid.interpolation_matrix(&coarse.points);
    let interp = kron(p.as_ref(), p.as_ref());
    let mut out = Mat::zeros(coarse.len() * coarse.len(), grid.n_obs);
    for q in 1..=grid.n_obs {
        let v = &interp * traj.at_obs(q);
        out.col_mut(q - 1).copy_from(&v);
    }
    Ok(out)
}
