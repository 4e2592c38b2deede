//! Empirical k-norm estimation against declared sub-Weibull parameters.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{NoiseSpec, SubWeibull};
use crate::error::{domain, Result};

/// Outcome of an empirical moment check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    /// Largest ratio of empirical k-norm to the envelope `nu k^theta`.
    pub max_ratio: f64,
    /// The grid k attaining `max_ratio`.
    pub worst_k: f64,
}

/// The grid `{1, 1.5, 2, ..., k_max}`.
pub fn moment_grid(k_max: f64) -> Vec<f64> {
    let steps = ((k_max - 1.0) / 0.5).floor().max(0.0) as usize;
    (0..=steps).map(|j| 1.0 + 0.5 * j as f64).collect()
}

/// Empirical `(mean |x|^k)^(1/k)`, evaluated relative to `max |x|` so large
/// k does not overflow.
pub fn empirical_knorm(samples: &[f64], k: f64) -> f64 {
    let m = samples.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if m == 0.0 || samples.is_empty() {
        return 0.0;
    }
    let s: f64 = samples.iter().map(|x| (x.abs() / m).powf(k)).sum();
    m * (s / samples.len() as f64).powf(1.0 / k)
}

/// Maximum over the moment grid of empirical k-norm divided by the
/// envelope of `declared`. Against the zero variable the ratio is 0 for
/// all-zero samples and infinite otherwise.
pub fn moment_ratio(samples: &[f64], declared: SubWeibull, k_max: f64) -> MomentReport {
    let m = samples.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if m == 0.0 {
        return MomentReport { max_ratio: 0.0, worst_k: 1.0 };
    }
    if declared.is_zero() {
        return MomentReport { max_ratio: f64::INFINITY, worst_k: 1.0 };
    }
    // log of |x| / m; zeros contribute nothing to any moment
    let logs: Vec<f64> = samples
        .iter()
        .filter(|x| **x != 0.0)
        .map(|x| (x.abs() / m).ln())
        .collect();
    let n = samples.len() as f64;
    let mut best = MomentReport { max_ratio: f64::NEG_INFINITY, worst_k: 1.0 };
    for k in moment_grid(k_max) {
        let s: f64 = logs.iter().map(|l| (k * l).exp()).sum();
        let knorm = m * (s / n).powf(1.0 / k);
        let ratio = knorm / declared.knorm_envelope(k);
        if ratio > best.max_ratio {
            best = MomentReport { max_ratio: ratio, worst_k: k };
        }
    }
    best
}

/// Samples `num_samples` error vectors from `spec` at iteration 0 and checks
/// their norms against `spec`'s declared parameters.
pub fn verify_moment_bound(
    spec: &NoiseSpec,
    num_samples: usize,
    k_max: f64,
    seed: u64,
) -> Result<MomentReport> {
    if num_samples < 10_000 {
        return Err(domain(format!("moment check needs at least 10^4 samples, got {num_samples}")));
    }
    if !(k_max >= 2.0) {
        return Err(domain(format!("moment check needs k_max >= 2, got {k_max}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = vec![0.0; spec.dim()];
    let norms: Vec<f64> = (0..num_samples)
        .map(|_| {
            spec.sample_into(0, &mut rng, &mut buf);
            buf.iter().map(|v| v * v).sum::<f64>().sqrt()
        })
        .collect();
    Ok(moment_ratio(&norms, spec.declared_at(0), k_max))
}
