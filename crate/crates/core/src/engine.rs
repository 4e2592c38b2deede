//! The stochastic Banach-Picard update with random block masks and additive
//! errors, for static and time-varying operators.
//!
//! One iteration, from `x^ell` to `x^(ell+1)`:
//!
//! 1. the operator advances to `T^(ell+1)` (no-op for static operators),
//! 2. the mask `u^ell` is drawn,
//! 3. the errors `e^ell` are drawn for every block,
//! 4. each block with `u_i = 1` becomes `T_i^(ell+1) x^ell + e_i^ell`, all
//!    `T_i` reading the same pre-update `x^ell`; other blocks are copied
//!    unchanged,
//! 5. for operators with a domain box, the result is clamped onto it and
//!    the clamp is counted.
//!
//! Masks, errors and drift use separate ChaCha streams (0, 1, 2) of the
//! trial seed, so their independence holds by construction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::operators::{DriftStep, OnlineOperatorSpec};
use crate::subweibull::NoiseSpec;

pub const MASK_STREAM: u64 = 0;
pub const NOISE_STREAM: u64 = 1;
pub const DRIFT_STREAM: u64 = 2;

/// Generator for one of the three random sources of a trial.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Correlation {
    /// Each block flips its own coin.
    Independent,
    /// One uniform draw per iteration is compared against every `p_i`.
    Coupled,
}

/// Bernoulli update probabilities per block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpdateModel {
    probabilities: Vec<f64>,
    correlation: Correlation,
}

impl UpdateModel {
    pub fn new(probabilities: Vec<f64>, correlation: Correlation) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(domain("at least one update probability is required"));
        }
        for (i, p) in probabilities.iter().enumerate() {
            if !(*p > 0.0 && *p <= 1.0) {
                return Err(domain(format!(
                    "update probability of block {i} must lie in (0, 1]; every block needs a positive chance of being updated, got {p}"
                )));
            }
        }
        Ok(Self { probabilities, correlation })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn correlation(&self) -> Correlation {
        self.correlation
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R, mask: &mut [bool]) {
        match self.correlation {
            Correlation::Independent => {
                for (m, p) in mask.iter_mut().zip(&self.probabilities) {
                    *m = rng.random::<f64>() < *p;
                }
            }
            Correlation::Coupled => {
                let v = rng.random::<f64>();
                for (m, p) in mask.iter_mut().zip(&self.probabilities) {
                    *m = v < *p;
                }
            }
        }
    }
}

/// Everything needed to run one trajectory except the seed.
#[derive(Clone, Debug)]
pub struct IterationConfig {
    pub operator: OnlineOperatorSpec,
    pub update: UpdateModel,
    /// Error sampler per block.
    pub noise: Vec<NoiseSpec>,
    pub horizon: usize,
    pub initial_point: Vec<f64>,
    /// Whether to keep iterates; the stride is 1 up to horizon 1000, else 10.
    pub record_iterates: bool,
}

impl IterationConfig {
    pub fn validate(&self) -> Result<()> {
        let p = self.operator.base().partition();
        let n = p.n_blocks();
        if self.update.probabilities().len() != n {
            return Err(Error::Dimension { expected: n, got: self.update.probabilities().len() });
        }
        if self.noise.len() != n {
            return Err(Error::Dimension { expected: n, got: self.noise.len() });
        }
        for (i, e) in self.noise.iter().enumerate() {
            if e.dim() != p.dim(i) {
                return Err(Error::Dimension { expected: p.dim(i), got: e.dim() });
            }
        }
        if self.initial_point.len() != p.total_dim() {
            return Err(Error::Dimension { expected: p.total_dim(), got: self.initial_point.len() });
        }
        if self.horizon == 0 {
            return Err(domain("horizon must be >= 1"));
        }
        if let Some(d) = self.operator.base().domain() {
            if !d.contains(&self.initial_point) {
                return Err(Error::OutsideDomain("initial point".into()));
            }
        }
        Ok(())
    }

    pub fn n_blocks(&self) -> usize {
        self.operator.base().partition().n_blocks()
    }

    pub fn iterate_stride(&self) -> usize {
        if self.horizon <= 1000 {
            1
        } else {
            10
        }
    }
}

/// Per-iteration record of one run. Per-block series are stored flat with
/// index `ell * n_blocks + i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    n_blocks: usize,
    horizon: usize,
    /// `||x_i^ell - x_i^{*,ell}||`, ell = 0..=L.
    dist: Vec<f64>,
    /// `u_i^ell ||(I - T_i^(ell+1)) x^ell||^2`, ell = 0..L.
    fpr_summand: Vec<f64>,
    /// `||(I - T_i^(ell+1)) x^ell||^2`, ell = 0..L.
    residual_sq: Vec<f64>,
    /// `(1/(ell+1)) sum_{h<=ell} fpr_summand_h`, ell = 0..L.
    cum_fpr: Vec<f64>,
    /// `u_i^ell`, ell = 0..L.
    mask: Vec<bool>,
    /// Hausdorff drift `||x^{*,ell+1} - x^{*,ell}||` per block, ell = 0..L.
    sigma: Vec<f64>,
    /// Minimal-distance drift per block, ell = 0..L.
    sigma_min: Vec<f64>,
    /// `beta_i(ell) = sum_{h<ell} u_i^h`, ell = 0..=L.
    beta: Vec<u32>,
    /// `(ell, x^ell)` every stride iterations and at ell = L.
    iterates: Vec<(usize, Vec<f64>)>,
    clamp_events: usize,
}

impl Trajectory {
    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn dist(&self, ell: usize, i: usize) -> f64 {
        self.dist[ell * self.n_blocks + i]
    }

    pub fn fpr_summand(&self, ell: usize, i: usize) -> f64 {
        self.fpr_summand[ell * self.n_blocks + i]
    }

    pub fn residual_sq(&self, ell: usize, i: usize) -> f64 {
        self.residual_sq[ell * self.n_blocks + i]
    }

    pub fn cum_fpr(&self, ell: usize, i: usize) -> f64 {
        self.cum_fpr[ell * self.n_blocks + i]
    }

    pub fn mask(&self, ell: usize, i: usize) -> bool {
        self.mask[ell * self.n_blocks + i]
    }

    pub fn sigma(&self, ell: usize, i: usize) -> f64 {
        self.sigma[ell * self.n_blocks + i]
    }

    pub fn sigma_min(&self, ell: usize, i: usize) -> f64 {
        self.sigma_min[ell * self.n_blocks + i]
    }

    pub fn beta(&self, ell: usize, i: usize) -> u32 {
        self.beta[ell * self.n_blocks + i]
    }

    pub fn iterates(&self) -> &[(usize, Vec<f64>)] {
        &self.iterates
    }

    pub fn clamp_events(&self) -> usize {
        self.clamp_events
    }

    /// Final iterate `x^L`, if iterates were recorded.
    pub fn final_iterate(&self) -> Option<&[f64]> {
        self.iterates.last().filter(|(ell, _)| *ell == self.horizon).map(|(_, x)| x.as_slice())
    }
}

/// Runs one trajectory. Identical `(config, seed)` give bit-identical output.
pub fn run(config: &IterationConfig, seed: u64) -> Result<Trajectory> {
    config.validate()?;
    let partition = config.operator.base().partition().clone();
    let n = partition.n_blocks();
    let dim = partition.total_dim();
    let horizon = config.horizon;
    let stride = config.iterate_stride();

    let mut mask_rng = stream_rng(seed, MASK_STREAM);
    let mut noise_rng = stream_rng(seed, NOISE_STREAM);
    let mut drift_rng = stream_rng(seed, DRIFT_STREAM);

    let mut traj = Trajectory {
        n_blocks: n,
        horizon,
        dist: Vec::with_capacity((horizon + 1) * n),
        fpr_summand: Vec::with_capacity(horizon * n),
        residual_sq: Vec::with_capacity(horizon * n),
        cum_fpr: Vec::with_capacity(horizon * n),
        mask: Vec::with_capacity(horizon * n),
        sigma: Vec::with_capacity(horizon * n),
        sigma_min: Vec::with_capacity(horizon * n),
        beta: Vec::with_capacity((horizon + 1) * n),
        iterates: Vec::new(),
        clamp_events: 0,
    };

    let mut online = config.operator.start();
    let mut x = config.initial_point.clone();
    let mut tx = vec![0.0; dim];
    let mut noise = vec![0.0; dim];
    let mut mask = vec![false; n];
    let mut beta = vec![0u32; n];
    let mut fpr_sum = vec![0.0; n];
    let mut step = DriftStep::default();

    for ell in 0..horizon {
        traj.dist.extend(online.current().distance_to_fixed(&x));
        traj.beta.extend_from_slice(&beta);
        if config.record_iterates && ell % stride == 0 {
            traj.iterates.push((ell, x.clone()));
        }

        online.advance(&mut drift_rng, &mut step)?;
        config.update.draw(&mut mask_rng, &mut mask);
        for (i, spec) in config.noise.iter().enumerate() {
            spec.sample_into(ell, &mut noise_rng, &mut noise[partition.range(i)]);
        }
        online.current().apply_into(&x, &mut tx)?;

        for i in 0..n {
            let r = partition.range(i);
            let res: f64 = r.clone().map(|j| (x[j] - tx[j]) * (x[j] - tx[j])).sum();
            let summand = if mask[i] { res } else { 0.0 };
            fpr_sum[i] += summand;
            traj.residual_sq.push(res);
            traj.fpr_summand.push(summand);
            traj.cum_fpr.push(fpr_sum[i] / (ell + 1) as f64);
            traj.mask.push(mask[i]);
            if mask[i] {
                beta[i] += 1;
                for j in r {
                    x[j] = tx[j] + noise[j];
                }
            }
        }
        traj.sigma.extend_from_slice(&step.sigma);
        traj.sigma_min.extend_from_slice(&step.sigma_min);
        if let Some(d) = online.current().domain() {
            if d.clamp_in_place(&mut x) {
                traj.clamp_events += 1;
            }
        }
    }
    traj.dist.extend(online.current().distance_to_fixed(&x));
    traj.beta.extend_from_slice(&beta);
    if config.record_iterates {
        traj.iterates.push((horizon, x));
    }
    Ok(traj)
}

/// Drift accumulated up to the horizon, per block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathLength {
    /// `sum_{h<L} chi^(L-h-1) sigma^h`.
    pub weighted: Vec<f64>,
    /// `sum_{h<L} sigma^h`.
    pub plain: Vec<f64>,
}

/// Weighted and plain path length of the realized drift, with one `chi`
/// per block.
pub fn weighted_path_length(traj: &Trajectory, chi: &[f64]) -> Result<PathLength> {
    if chi.len() != traj.n_blocks {
        return Err(Error::Dimension { expected: traj.n_blocks, got: chi.len() });
    }
    if let Some(c) = chi.iter().find(|c| !(**c > 0.0 && **c < 1.0)) {
        return Err(domain(format!("chi must lie in (0, 1), got {c}")));
    }
    let mut weighted = vec![0.0; traj.n_blocks];
    let mut plain = vec![0.0; traj.n_blocks];
    for ell in 0..traj.horizon {
        for i in 0..traj.n_blocks {
            let s = traj.sigma(ell, i);
            weighted[i] = chi[i] * weighted[i] + s;
            plain[i] += s;
        }
    }
    Ok(PathLength { weighted, plain })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{BlockPartition, BoxSet, DriftModel, OperatorSpec};
    use crate::subweibull::{NoiseFamily, Schedule};
    use nalgebra::DMatrix;

    fn scalar_affine_config(p: f64, horizon: usize) -> IterationConfig {
        let t = OperatorSpec::affine(
            BlockPartition::uniform(1, 1).unwrap(),
            vec![DMatrix::from_element(1, 1, 0.5)],
            vec![1.0],
        )
        .unwrap();
        IterationConfig {
            operator: OnlineOperatorSpec::static_only(t),
            update: UpdateModel::new(vec![p], Correlation::Independent).unwrap(),
            noise: vec![NoiseSpec::zero(1).unwrap()],
            horizon,
            initial_point: vec![0.0],
            record_iterates: true,
        }
    }

    #[test]
    fn deterministic_geometric_decay() {
        let traj = run(&scalar_affine_config(1.0, 3), 0).unwrap();
        let d: Vec<f64> = (0..=3).map(|l| traj.dist(l, 0)).collect();
        assert_eq!(d, vec![2.0, 1.0, 0.5, 0.25]);
    }

    #[test]
    fn zero_probability_rejected() {
        assert!(UpdateModel::new(vec![0.0], Correlation::Independent).is_err());
        assert!(UpdateModel::new(vec![1.2], Correlation::Independent).is_err());
    }

    #[test]
    fn distance_follows_update_count() {
        let traj = run(&scalar_affine_config(0.5, 60), 7).unwrap();
        for ell in 0..=60 {
            let beta = traj.beta(ell, 0);
            assert_eq!(traj.dist(ell, 0), 2.0 * 0.5f64.powi(beta as i32));
            let recount = (0..ell).filter(|h| traj.mask(*h, 0)).count() as u32;
            assert_eq!(beta, recount);
        }
    }

    #[test]
    fn cumulative_fpr_recomputable() {
        let traj = run(&scalar_affine_config(0.5, 40), 3).unwrap();
        let mut s = 0.0;
        for ell in 0..40 {
            s += traj.fpr_summand(ell, 0);
            assert_eq!(traj.cum_fpr(ell, 0), s / (ell + 1) as f64);
        }
    }

    #[test]
    fn reproducible_and_frozen_blocks() {
        let t = OperatorSpec::affine(
            BlockPartition::uniform(3, 2).unwrap(),
            vec![DMatrix::identity(2, 2) * 0.7; 3],
            vec![1.0; 6],
        )
        .unwrap();
        let cfg = IterationConfig {
            operator: OnlineOperatorSpec::static_only(t),
            update: UpdateModel::new(vec![0.3, 0.6, 0.9], Correlation::Independent).unwrap(),
            noise: vec![NoiseSpec::new(NoiseFamily::Gaussian { std: 0.1 }, Schedule::Constant, 2).unwrap(); 3],
            horizon: 50,
            initial_point: vec![0.0; 6],
            record_iterates: true,
        };
        let a = run(&cfg, 11).unwrap();
        let b = run(&cfg, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, run(&cfg, 12).unwrap());
        let xs = a.iterates();
        for ell in 0..50 {
            for i in 0..3 {
                if !a.mask(ell, i) {
                    let r = 2 * i..2 * i + 2;
                    assert_eq!(xs[ell].1[r.clone()], xs[ell + 1].1[r]);
                }
            }
        }
    }

    #[test]
    fn coupled_masks_agree() {
        let t = OperatorSpec::affine(
            BlockPartition::uniform(2, 1).unwrap(),
            vec![DMatrix::from_element(1, 1, 0.5); 2],
            vec![0.0; 2],
        )
        .unwrap();
        let cfg = IterationConfig {
            operator: OnlineOperatorSpec::static_only(t),
            update: UpdateModel::new(vec![0.4, 0.4], Correlation::Coupled).unwrap(),
            noise: vec![NoiseSpec::zero(1).unwrap(); 2],
            horizon: 200,
            initial_point: vec![1.0, 1.0],
            record_iterates: false,
        };
        let traj = run(&cfg, 5).unwrap();
        assert!((0..200).all(|l| traj.mask(l, 0) == traj.mask(l, 1)));
    }

    #[test]
    fn averaged_noise_is_clamped() {
        let km = OperatorSpec::km_averaged_projection(
            BlockPartition::uniform(1, 1).unwrap(),
            0.5,
            BoxSet::new(vec![0.0], vec![1.0]).unwrap(),
            BoxSet::new(vec![-0.05], vec![1.05]).unwrap(),
        )
        .unwrap();
        let cfg = IterationConfig {
            operator: OnlineOperatorSpec::static_only(km),
            update: UpdateModel::new(vec![1.0], Correlation::Independent).unwrap(),
            noise: vec![NoiseSpec::new(NoiseFamily::BoundedUniform { half_width: 0.5 }, Schedule::Constant, 1).unwrap()],
            horizon: 200,
            initial_point: vec![1.0],
            record_iterates: true,
        };
        let traj = run(&cfg, 1).unwrap();
        assert!(traj.clamp_events() > 0);
        assert!(traj.iterates().iter().all(|(_, x)| (-0.05..=1.05).contains(&x[0])));
    }

    #[test]
    fn path_length_oracle() {
        let base = OperatorSpec::affine(
            BlockPartition::uniform(1, 2).unwrap(),
            vec![DMatrix::identity(2, 2) * 0.5],
            vec![0.0; 2],
        )
        .unwrap();
        let inc = NoiseSpec::new(NoiseFamily::Gaussian { std: 0.01 }, Schedule::Constant, 2).unwrap();
        let cfg = IterationConfig {
            operator: OnlineOperatorSpec::new(base, DriftModel::RandomWalk { increments: vec![inc] }).unwrap(),
            update: UpdateModel::new(vec![0.5], Correlation::Independent).unwrap(),
            noise: vec![NoiseSpec::zero(2).unwrap()],
            horizon: 100,
            initial_point: vec![0.0; 2],
            record_iterates: false,
        };
        let traj = run(&cfg, 2).unwrap();
        let chi = 0.75;
        let pl = weighted_path_length(&traj, &[chi]).unwrap();
        let brute: f64 = (0..100).map(|h| chi.powi((100 - h - 1) as i32) * traj.sigma(h, 0)).sum();
        let plain: f64 = (0..100).map(|h| traj.sigma(h, 0)).sum();
        assert!((pl.weighted[0] - brute).abs() <= 1e-12 * brute);
        assert!((pl.plain[0] - plain).abs() <= 1e-12 * plain);

        let stat = run(&scalar_affine_config(0.5, 10), 0).unwrap();
        assert_eq!(weighted_path_length(&stat, &[0.5]).unwrap().weighted, vec![0.0]);
    }
}
