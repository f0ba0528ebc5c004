#![allow(dead_code)]

use faer::{Col, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat<f64> {
    Mat::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_col(rng: &mut ChaCha8Rng, n: usize) -> Col<f64> {
    Col::from_fn(n, |_| rng.random_range(-1.0..1.0))
}

pub fn max_abs(m: &Mat<f64>) -> f64 {
    m.norm_max()
}

/// Inverse through an independent Gauss-Jordan elimination with partial pivoting.
pub fn inverse(a: &Mat<f64>) -> Mat<f64> {
    let n = a.nrows();
    let mut w: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..2 * n)
                .map(|j| {
                    if j < n {
                        a[(i, j)]
                    } else if j - n == i {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    for c in 0..n {
        let piv = (c..n)
            .max_by(|&x, &y| w[x][c].abs().total_cmp(&w[y][c].abs()))
            .unwrap();
        w.swap(c, piv);
        let d = w[c][c];
        for v in w[c].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != c {
                let f = w[r][c];
                if f != 0.0 {
                    for j in 0..2 * n {
                        w[r][j] -= f * w[c][j];
                    }
                }
            }
        }
    }
    Mat::from_fn(n, n, |i, j| w[i][n + j])
}
