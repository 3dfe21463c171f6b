//! Monte Carlo estimate of the inner-product transport cost of a plan.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::CouplingPlan;

pub const MIN_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Samples one `(X, Y)` pair from the normalized plan into `x` and `y`.
fn sample_pair(
    rng: &mut ChaCha20Rng,
    factors: &[(f64, f64, f64)],
    extra_sd: &[f64],
    x: &mut [f64],
    y: &mut [f64],
) {
    for (k, &(sx, ky, ry)) in factors.iter().enumerate() {
        let z1: f64 = StandardNormal.sample(rng);
        let z2: f64 = StandardNormal.sample(rng);
        x[k] = sx * z1;
        y[k] = ky * z1 + ry * z2;
    }
    for (i, sd) in extra_sd.iter().enumerate() {
        let z: f64 = StandardNormal.sample(rng);
        x[factors.len() + i] = sd * z;
    }
}

/// Estimates `E[(<X, X'> - <Y, Y'>)^2]` for independent `(X, Y), (X', Y')`
/// drawn from the normalized plan, with a ChaCha20 stream seeded by `seed`.
pub fn monte_carlo_igw_cost(plan: &CouplingPlan, samples: usize, seed: u64) -> Result<McEstimate> {
    if samples < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "at least {MIN_SAMPLES} samples are required, got {samples}"
        )));
    }
    plan.check_nonsingular()?;
    let n = plan.dim_y();
    // X_k = sqrt(sx) z1, Y_k = k/sqrt(sx) z1 + sqrt(sy - k^2/sx) z2
    let factors: Vec<(f64, f64, f64)> = (0..n)
        .map(|k| {
            let (sx, sy, c) = (plan.sigma_x()[k], plan.sigma_y()[k], plan.k_xy()[k]);
            let root = sx.sqrt();
            (root, c / root, (sy - c * c / sx).max(0.0).sqrt())
        })
        .collect();
    let extra: Vec<f64> = plan.sigma_x()[n..].iter().map(|v| v.sqrt()).collect();

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (m, n) = (plan.dim_x(), n);
    let (mut x, mut y) = (vec![0.0; m], vec![0.0; n]);
    let (mut xp, mut yp) = (vec![0.0; m], vec![0.0; n]);
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..samples {
        sample_pair(&mut rng, &factors, &extra, &mut x, &mut y);
        sample_pair(&mut rng, &factors, &extra, &mut xp, &mut yp);
        let gx: f64 = x.iter().zip(&xp).map(|(a, b)| a * b).sum();
        let gy: f64 = y.iter().zip(&yp).map(|(a, b)| a * b).sum();
        let cost = (gx - gy) * (gx - gy);
        let delta = cost - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (cost - mean);
    }
    let variance = m2 / (samples - 1) as f64;
    Ok(McEstimate {
        estimate: mean,
        std_error: (variance / samples as f64).sqrt(),
        samples,
    })
}
