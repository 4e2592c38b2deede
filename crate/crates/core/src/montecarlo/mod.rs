//! Trial ensembles, empirical statistics of trajectory metrics, and coverage
//! certification of bound curves.
//!
//! Trials run in parallel in fixed-size chunks and are folded in trial
//! order, so every aggregate is bit-identical regardless of thread count.

mod audit;
mod coverage;

pub use audit::{closure_audit, family_audit, AuditEntry, AuditReport, AUDIT_TOLERANCE};
pub use coverage::{
    check_coverage, check_grid, hoeffding_slack, mean_slack_z, CoverageKind, CoverageRecord, ALPHA_TEST,
    RELATIVE_TOLERANCE,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::Metric;
use crate::engine::{run, IterationConfig, Trajectory};
use crate::error::{domain, Result};

/// Quantile levels reported at checkpoints.
pub const QUANTILE_LEVELS: [f64; 3] = [0.5, 0.9, 0.99];

const CHUNK: usize = 64;

/// Running mean and variance, updated in a fixed order.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }
}

/// Per-trial samples and running moments of one metric.
#[derive(Clone, Debug)]
struct MetricStore {
    /// Number of defined iterations (L + 1 for distance, L otherwise).
    len: usize,
    moments: Vec<Welford>,
    /// `samples[c * n_blocks + i]` holds one value per trial at checkpoint c.
    samples: Vec<Vec<f64>>,
    checkpoints: Vec<usize>,
}

impl MetricStore {
    fn new(len: usize, n_blocks: usize, checkpoints: &[usize], trials: usize) -> Self {
        let checkpoints: Vec<usize> = checkpoints.iter().copied().filter(|c| *c < len).collect();
        Self {
            len,
            moments: vec![Welford::default(); len * n_blocks],
            samples: vec![Vec::with_capacity(trials); checkpoints.len() * n_blocks],
            checkpoints,
        }
    }
}

/// Aggregated outcome of `M` trials of one configuration.
#[derive(Clone, Debug)]
pub struct Ensemble {
    n_blocks: usize,
    horizon: usize,
    trials: usize,
    base_seed: u64,
    dist: MetricStore,
    cum_fpr: MetricStore,
    residual_sq: MetricStore,
    clamp_events: usize,
    trials_with_clamp: usize,
    kept: Vec<Trajectory>,
}

/// Ensemble size, seeds and how many full trajectories to keep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnsembleOptions {
    pub trials: usize,
    pub base_seed: u64,
    pub keep_trajectories: usize,
}

impl EnsembleOptions {
    pub fn new(trials: usize, base_seed: u64) -> Self {
        Self { trials, base_seed, keep_trajectories: 0 }
    }
}

/// Iterations at which per-trial samples are retained: the coverage grids
/// of all metrics.
fn checkpoints(horizon: usize) -> Vec<usize> {
    let mut c = check_grid(horizon, Metric::Distance);
    c.extend(check_grid(horizon, Metric::CumulativeFpr));
    c.sort_unstable();
    c.dedup();
    c
}

/// Runs `options.trials` trajectories with seeds `base_seed + t`.
pub fn run_ensemble(config: &IterationConfig, options: EnsembleOptions) -> Result<Ensemble> {
    if options.trials < 100 {
        return Err(domain(format!("an ensemble needs at least 100 trials, got {}", options.trials)));
    }
    config.validate()?;
    let n = config.n_blocks();
    let l = config.horizon;
    let cps = checkpoints(l);
    let m = options.trials;
    let mut ens = Ensemble {
        n_blocks: n,
        horizon: l,
        trials: m,
        base_seed: options.base_seed,
        dist: MetricStore::new(l + 1, n, &cps, m),
        cum_fpr: MetricStore::new(l, n, &cps, m),
        residual_sq: MetricStore::new(l, n, &cps, m),
        clamp_events: 0,
        trials_with_clamp: 0,
        kept: Vec::new(),
    };
    let mut start = 0;
    while start < m {
        let end = (start + CHUNK).min(m);
        let keep = options.keep_trajectories;
        let batch: Vec<Trajectory> = (start..end)
            .into_par_iter()
            .map(|t| {
                let mut cfg = config.clone();
                cfg.record_iterates = t < keep && config.record_iterates;
                run(&cfg, options.base_seed.wrapping_add(t as u64))
            })
            .collect::<Result<_>>()?;
        for (k, traj) in batch.into_iter().enumerate() {
            ens.absorb(&traj);
            if start + k < options.keep_trajectories {
                ens.kept.push(traj);
            }
        }
        start = end;
    }
    Ok(ens)
}

impl Ensemble {
    fn absorb(&mut self, traj: &Trajectory) {
        let n = self.n_blocks;
        let fill = |store: &mut MetricStore, get: &dyn Fn(usize, usize) -> f64| {
            for ell in 0..store.len {
                for i in 0..n {
                    store.moments[ell * n + i].push(get(ell, i));
                }
            }
            for (c, ell) in store.checkpoints.iter().enumerate() {
                for i in 0..n {
                    store.samples[c * n + i].push(get(*ell, i));
                }
            }
        };
        fill(&mut self.dist, &|ell, i| traj.dist(ell, i));
        fill(&mut self.cum_fpr, &|ell, i| traj.cum_fpr(ell, i));
        fill(&mut self.residual_sq, &|ell, i| traj.residual_sq(ell, i));
        self.clamp_events += traj.clamp_events();
        if traj.clamp_events() > 0 {
            self.trials_with_clamp += 1;
        }
    }

    fn store(&self, metric: Metric) -> &MetricStore {
        match metric {
            Metric::Distance => &self.dist,
            Metric::CumulativeFpr => &self.cum_fpr,
            Metric::ResidualSq => &self.residual_sq,
        }
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn trials(&self) -> usize {
        self.trials
    }

    pub fn base_seed(&self) -> u64 {
        self.base_seed
    }

    /// Number of iterations at which `metric` is defined.
    pub fn metric_len(&self, metric: Metric) -> usize {
        self.store(metric).len
    }

    pub fn mean(&self, metric: Metric, ell: usize, block: usize) -> f64 {
        self.store(metric).moments[ell * self.n_blocks + block].mean
    }

    /// Unbiased sample variance across trials.
    pub fn variance(&self, metric: Metric, ell: usize, block: usize) -> f64 {
        self.store(metric).moments[ell * self.n_blocks + block].variance()
    }

    /// Per-trial values at a checkpoint, in trial order.
    pub fn samples(&self, metric: Metric, ell: usize, block: usize) -> Option<&[f64]> {
        let s = self.store(metric);
        s.checkpoints
            .iter()
            .position(|c| *c == ell)
            .map(|c| s.samples[c * self.n_blocks + block].as_slice())
    }

    pub fn checkpoints(&self, metric: Metric) -> &[usize] {
        &self.store(metric).checkpoints
    }

    /// Empirical quantile (nearest rank) at a checkpoint.
    pub fn quantile(&self, metric: Metric, ell: usize, block: usize, level: f64) -> Option<f64> {
        let s = self.samples(metric, ell, block)?;
        let mut sorted = s.to_vec();
        sorted.sort_by(f64::total_cmp);
        let rank = ((level * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
        Some(sorted[rank - 1])
    }

    pub fn clamp_events(&self) -> usize {
        self.clamp_events
    }

    pub fn trials_with_clamp(&self) -> usize {
        self.trials_with_clamp
    }

    /// The first `keep_trajectories` trajectories, in trial order.
    pub fn kept(&self) -> &[Trajectory] {
        &self.kept
    }

    /// Summary statistics for the report.
    pub fn block_stats(&self) -> Vec<BlockStats> {
        (0..self.n_blocks)
            .map(|i| {
                let series = |metric: Metric| -> MetricSeries {
                    let s = self.store(metric);
                    MetricSeries {
                        mean: (0..s.len).map(|ell| self.mean(metric, ell, i)).collect(),
                        quantiles: s
                            .checkpoints
                            .iter()
                            .map(|ell| QuantileRow {
                                ell: *ell,
                                values: QUANTILE_LEVELS
                                    .iter()
                                    .map(|q| self.quantile(metric, *ell, i, *q).unwrap())
                                    .collect(),
                            })
                            .collect(),
                    }
                };
                BlockStats { block: i, dist: series(Metric::Distance), cum_fpr: series(Metric::CumulativeFpr) }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileRow {
    pub ell: usize,
    /// Values at [`QUANTILE_LEVELS`].
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub mean: Vec<f64>,
    pub quantiles: Vec<QuantileRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockStats {
    pub block: usize,
    pub dist: MetricSeries,
    pub cum_fpr: MetricSeries,
}

/// Structured outcome of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    /// SHA-256 of the canonical configuration text.
    pub config_digest: String,
    pub generator: String,
    pub trials: usize,
    pub horizon: usize,
    pub base_seed: u64,
    pub quantile_levels: Vec<f64>,
    pub alpha_test: f64,
    pub blocks: Vec<BlockStats>,
    pub coverage: Vec<CoverageRecord>,
    pub clamp_events: usize,
    pub trials_with_clamp: usize,
    pub notes: Vec<String>,
    pub all_pass: bool,
}

impl ExperimentReport {
    pub fn new(config_text: &str, ensemble: &Ensemble, coverage: Vec<CoverageRecord>) -> Self {
        let mut notes = vec!["suprema of time-varying error and drift parameters are taken over the configured horizon".to_string()];
        if ensemble.clamp_events > 0 {
            notes.push(format!(
                "noisy iterates left the domain box and were clamped back {} times in {} trials",
                ensemble.clamp_events, ensemble.trials_with_clamp
            ));
        }
        let all_pass = coverage.iter().all(|c| c.pass);
        Self {
            config_digest: digest(config_text),
            generator: concat!("opfix ", env!("CARGO_PKG_VERSION")).to_string(),
            trials: ensemble.trials,
            horizon: ensemble.horizon,
            base_seed: ensemble.base_seed,
            quantile_levels: QUANTILE_LEVELS.to_vec(),
            alpha_test: ALPHA_TEST,
            blocks: ensemble.block_stats(),
            coverage,
            clamp_events: ensemble.clamp_events,
            trials_with_clamp: ensemble.trials_with_clamp,
            notes,
            all_pass,
        }
    }
}

/// Lowercase hex SHA-256 of `text`.
pub fn digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}
