use std::f64::consts::PI;

use faer::Mat;

use crate::error::{dim_err, Result};

/// Chebyshev-Gauss-Lobatto nodes on `[0,1]` with the collocation derivative.
#[derive(Debug, Clone)]
pub struct ChebGrid {
    pub n: usize,
    /// `xᵢ = ½(1 − cos(iπ/n))`, increasing from 0 to 1.
    pub points: Vec<f64>,
    pub diff: Mat<f64>,
}

impl ChebGrid {
    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Barycentric weights `(−1)ʲδⱼ` with `δ = ½` at the end points.
    pub fn weights(&self) -> Vec<f64> {
        bary_weights(self.n)
    }

    /// Row-per-target matrix evaluating the interpolant through the nodes at `targets`.
    pub fn interpolation_matrix(&self, targets: &[f64]) -> Mat<f64> {
        let w = self.weights();
        let mut out = Mat::zeros(targets.len(), self.len());
        for (r, &t) in targets.iter().enumerate() {
            if let Some(j) = self.points.iter().position(|&x| x == t) {
                out[(r, j)] = 1.0;
                continue;
            }
            let terms: Vec<f64> = self
                .points
                .iter()
                .zip(&w)
                .map(|(&x, &wj)| wj / (t - x))
                .collect();
            let denom: f64 = terms.iter().sum();
            for (j, v) in terms.into_iter().enumerate() {
                out[(r, j)] = v / denom;
            }
        }
        out
    }
}

fn bary_weights(n: usize) -> Vec<f64> {
    (0..=n)
        .map(|j| {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n {
                0.5 * s
            } else {
                s
            }
        })
        .collect()
}

pub fn cheb_grid(n: usize) -> Result<ChebGrid> {
    if n < 2 {
        return Err(dim_err(format!("Chebyshev grid needs n ≥ 2, got {n}")));
    }
    let h = PI / (2.0 * n as f64);
    // cos(iπ/n) written as sin((n−2i)π/2n): exact at the ends and the midpoint.
    let points: Vec<f64> = (0..=n)
        .map(|i| 0.5 * (1.0 - ((n as f64 - 2.0 * i as f64) * h).sin()))
        .collect();
    let w = bary_weights(n);
    let mut diff = Mat::zeros(n + 1, n + 1);
    for i in 0..=n {
        let mut row_sum = 0.0;
        for j in 0..=n {
            if i == j {
                continue;
            }
            // xᵢ − xⱼ without cancellation.
            let dx = ((i + j) as f64 * h).sin() * ((i as f64 - j as f64) * h).sin();
            let v = (w[j] / w[i]) / dx;
            diff[(i, j)] = v;
            row_sum += v;
        }
        diff[(i, i)] = -row_sum;
    }
    Ok(ChebGrid { n, points, diff })
}
