use faer::{Col, ColRef};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{col_from_slice, col_to_vec};

/// `noisy = clean + e` with `‖e‖ = NL·‖clean‖`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisySample {
    pub clean: Vec<f64>,
    pub noisy: Vec<f64>,
    pub e: Vec<f64>,
    pub noise_level: f64,
    pub seed: u64,
}

impl NoisySample {
    pub fn noise_norm(&self) -> f64 {
        self.e.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn noisy_col(&self) -> Col<f64> {
        col_from_slice(&self.noisy)
    }
}

/// Zero-mean Gaussian noise from a ChaCha8 stream seeded by `seed`, rescaled to the exact
/// relative level.
pub fn add_noise(clean: ColRef<'_, f64>, noise_level: f64, seed: u64) -> Result<NoisySample> {
    if !(noise_level >= 0.0) || !noise_level.is_finite() {
        return Err(Error::Config(format!(
            "noise level must be ≥ 0, got {noise_level}"
        )));
    }
    let clean_v = col_to_vec(clean);
    let m = clean_v.len();
    let norm = clean.norm_l2();
    if noise_level == 0.0 {
        return Ok(NoisySample {
            noisy: clean_v.clone(),
            clean: clean_v,
            e: vec![0.0; m],
            noise_level,
            seed,
        });
    }
    if norm == 0.0 {
        return Err(Error::Domain(
            "cannot scale relative noise on zero data".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
    let raw_norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = noise_level * norm / raw_norm;
    let e: Vec<f64> = raw.iter().map(|v| v * scale).collect();
    let noisy = clean_v.iter().zip(&e).map(|(c, e)| c + e).collect();
    Ok(NoisySample {
        clean: clean_v,
        noisy,
        e,
        noise_level,
        seed,
    })
}
