//! Pointwise-in-ell statistical checks of bound curves against an ensemble.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::Ensemble;
use crate::bounds::{BoundCurve, Guarantee, Metric, Proposition};
use crate::error::{ConfigError, Result};
use crate::operators::SetDistanceMode;

/// Level of the harness's own statistical error.
pub const ALPHA_TEST: f64 = 0.01;

/// Relative tolerance for comparing a metric with a curve, absorbing
/// floating-point rounding in cases where the bound is attained exactly.
pub const RELATIVE_TOLERANCE: f64 = 1e-9;

/// Checked iterations: every 10th one plus the first and the last at which
/// the metric is defined.
pub fn check_grid(horizon: usize, metric: Metric) -> Vec<usize> {
    let last = match metric {
        Metric::Distance => horizon,
        Metric::CumulativeFpr | Metric::ResidualSq => horizon.saturating_sub(1),
    };
    if last == 0 {
        return vec![0];
    }
    let mut g = vec![1];
    g.extend((10..=last).step_by(10));
    g.push(last);
    g.dedup();
    g.sort_unstable();
    g.dedup();
    g
}

/// Hoeffding deviation `sqrt(log(2 |grid| / alpha) / (2 M))` with a union
/// bound over the grid.
pub fn hoeffding_slack(grid_len: usize, trials: usize, alpha_test: f64) -> f64 {
    ((2.0 * grid_len as f64 / alpha_test).ln() / (2.0 * trials as f64)).sqrt()
}

/// Two-sided normal quantile `z` with a union bound over the grid, used to
/// compare empirical means with mean curves.
pub fn mean_slack_z(grid_len: usize, alpha_test: f64) -> f64 {
    let normal = Normal::standard();
    normal.inverse_cdf(1.0 - alpha_test / (2.0 * grid_len as f64))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoverageKind {
    /// Fraction of trials below the curve compared with `1 - delta - slack`.
    Probability,
    /// Empirical mean compared with `curve + z * standard error`.
    Mean,
    /// Mean over the last iterations compared with the limit value.
    AsymptoticMean,
}

/// Outcome of one curve check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageRecord {
    pub proposition: Proposition,
    pub block: usize,
    pub kind: CoverageKind,
    pub delta: Option<f64>,
    pub epsilon: Option<f64>,
    pub sigma_mode: Option<SetDistanceMode>,
    pub grid: Vec<usize>,
    /// Coverage fraction (probability checks) or empirical mean.
    pub empirical: Vec<f64>,
    /// Curve value at each grid point.
    pub bound: Vec<f64>,
    /// Hoeffding slack (probability checks) or normal quantile `z`.
    pub slack: f64,
    pub pass: bool,
    /// Probability checks: `min(coverage - (1 - delta))`. Mean checks:
    /// `min(curve + z se - mean)`, nonnegative exactly when passing.
    pub margin: f64,
}

fn config_error(message: String) -> crate::Error {
    ConfigError::new("bounds", message).into()
}

/// Checks `curve` against the ensemble. `delta` overrides the curve's own
/// confidence and forces a probability check, which turns mean curves into
/// quantile claims for negative controls.
pub fn check_coverage(ens: &Ensemble, curve: &BoundCurve, delta: Option<f64>) -> Result<CoverageRecord> {
    if curve.block >= ens.n_blocks() {
        return Err(config_error(format!("curve block {} outside the {} simulated blocks", curve.block, ens.n_blocks())));
    }
    if curve.horizon() != ens.horizon() {
        return Err(config_error(format!(
            "curve horizon {} differs from simulated horizon {}",
            curve.horizon(),
            ens.horizon()
        )));
    }
    let metric = curve.metric();
    let block = curve.block;
    let m = ens.trials();
    let kind = match (delta, curve.proposition.guarantee()) {
        (Some(_), _) | (None, Guarantee::Probability) => CoverageKind::Probability,
        (None, Guarantee::Mean) => CoverageKind::Mean,
        (None, Guarantee::AsymptoticMean) => CoverageKind::AsymptoticMean,
    };
    let below = |v: f64, b: f64| v <= b + RELATIVE_TOLERANCE * b.abs();

    let mut rec = CoverageRecord {
        proposition: curve.proposition,
        block,
        kind,
        delta: delta.or_else(|| match &curve.delta {
            crate::bounds::CurveDelta::Fixed(d) => Some(*d),
            _ => None,
        }),
        epsilon: curve.epsilon,
        sigma_mode: curve.sigma_mode,
        grid: Vec::new(),
        empirical: Vec::new(),
        bound: Vec::new(),
        slack: 0.0,
        pass: true,
        margin: f64::INFINITY,
    };

    match kind {
        CoverageKind::Probability => {
            let grid = check_grid(ens.horizon(), metric);
            let slack = hoeffding_slack(grid.len(), m, ALPHA_TEST);
            for &ell in &grid {
                let d = delta
                    .or_else(|| curve.delta.at(ell))
                    .ok_or_else(|| config_error(format!("{} has no confidence level", curve.proposition)))?;
                let samples = ens
                    .samples(metric, ell, block)
                    .ok_or_else(|| config_error(format!("no samples retained at ell = {ell}")))?;
                let b = curve.values[ell];
                let cov = samples.iter().filter(|v| below(**v, b)).count() as f64 / m as f64;
                rec.pass &= cov >= 1.0 - d - slack;
                rec.margin = rec.margin.min(cov - (1.0 - d));
                rec.empirical.push(cov);
                rec.bound.push(b);
            }
            rec.grid = grid;
            rec.slack = slack;
        }
        CoverageKind::Mean => {
            let grid = check_grid(ens.horizon(), metric);
            let z = mean_slack_z(grid.len(), ALPHA_TEST);
            for &ell in &grid {
                let mean = ens.mean(metric, ell, block);
                let se = (ens.variance(metric, ell, block) / m as f64).sqrt();
                let b = curve.values[ell];
                let room = b + RELATIVE_TOLERANCE * b + z * se - mean;
                rec.pass &= room >= 0.0;
                rec.margin = rec.margin.min(room);
                rec.empirical.push(mean);
                rec.bound.push(b);
            }
            rec.grid = grid;
            rec.slack = z;
        }
        CoverageKind::AsymptoticMean => {
            let len = ens.metric_len(metric);
            let window = 100.min(len);
            let grid: Vec<usize> = (len - window..len).collect();
            let z = mean_slack_z(1, ALPHA_TEST);
            let avg = grid.iter().map(|ell| ens.mean(metric, *ell, block)).sum::<f64>() / window as f64;
            let se = grid
                .iter()
                .map(|ell| (ens.variance(metric, *ell, block) / m as f64).sqrt())
                .fold(0.0, f64::max);
            let b = curve.values[len - 1];
            let room = b + RELATIVE_TOLERANCE * b + z * se - avg;
            rec.pass = room >= 0.0;
            rec.margin = room;
            rec.empirical.push(avg);
            rec.bound.push(b);
            rec.grid = vec![len - 1];
            rec.slack = z;
        }
    }
    Ok(rec)
}
