//! Time-varying operators obtained by translating a base operator along a
//! drift path of its fixed set.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{set_distance, BlockPartition, BoxSet, FixedSet, OperatorSpec, SetDistanceMode};
use crate::error::{domain, Error, Result};
use crate::operators::linalg::norm;
use crate::subweibull::{NoiseSpec, SubWeibull};

/// How the fixed set moves between consecutive iterations.
#[derive(Clone, Debug, PartialEq)]
pub enum DriftModel {
    None,
    /// Independent per-block increments drawn from the given samplers.
    RandomWalk { increments: Vec<NoiseSpec> },
    /// Constant velocity `v` per iteration.
    Linear { velocity: Vec<f64> },
    /// Uniform rotation of the first two coordinates of every block around
    /// the initial position, on a circle of radius `radius`.
    Circular { radius: f64, angular_speed: f64 },
}

/// Declared law of the per-step displacement of one block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftParams {
    pub declared: SubWeibull,
    /// Upper bound on `E sigma`.
    pub mean: f64,
    /// Upper bound on `E sigma^2`.
    pub mean_sq: f64,
}

impl DriftParams {
    pub const ZERO: DriftParams = DriftParams { declared: SubWeibull::Zero, mean: 0.0, mean_sq: 0.0 };

    fn constant(sigma: f64) -> Result<Self> {
        if sigma == 0.0 {
            return Ok(Self::ZERO);
        }
        Ok(Self { declared: SubWeibull::new(0.0, sigma)?, mean: sigma, mean_sq: sigma * sigma })
    }
}

/// A base operator plus a drift model for its fixed set.
#[derive(Clone, Debug, PartialEq)]
pub struct OnlineOperatorSpec {
    base: OperatorSpec,
    drift: DriftModel,
}

/// Displacement realized by one call to [`OnlineInstance::advance`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DriftStep {
    /// Hausdorff distance between consecutive fixed sets, per block.
    pub sigma: Vec<f64>,
    /// Minimal distance between consecutive fixed sets, per block.
    pub sigma_min: Vec<f64>,
}

impl OnlineOperatorSpec {
    pub fn new(base: OperatorSpec, drift: DriftModel) -> Result<Self> {
        let p = base.partition();
        match &drift {
            DriftModel::None => {}
            DriftModel::RandomWalk { increments } => {
                if increments.len() != p.n_blocks() {
                    return Err(Error::Dimension { expected: p.n_blocks(), got: increments.len() });
                }
                for (i, inc) in increments.iter().enumerate() {
                    if inc.dim() != p.dim(i) {
                        return Err(Error::Dimension { expected: p.dim(i), got: inc.dim() });
                    }
                }
            }
            DriftModel::Linear { velocity } => {
                if velocity.len() != p.total_dim() {
                    return Err(Error::Dimension { expected: p.total_dim(), got: velocity.len() });
                }
                if velocity.iter().any(|v| !v.is_finite()) {
                    return Err(domain("drift velocity must be finite"));
                }
            }
            DriftModel::Circular { radius, angular_speed } => {
                if p.dims().iter().any(|d| *d < 2) {
                    return Err(domain("circular drift needs every block to have dimension >= 2"));
                }
                if !(radius.is_finite() && *radius >= 0.0 && angular_speed.is_finite()) {
                    return Err(domain("circular drift needs finite radius >= 0 and finite angular speed"));
                }
            }
        }
        Ok(Self { base, drift })
    }

    pub fn static_only(base: OperatorSpec) -> Self {
        Self { base, drift: DriftModel::None }
    }

    pub fn base(&self) -> &OperatorSpec {
        &self.base
    }

    pub fn drift(&self) -> &DriftModel {
        &self.drift
    }

    pub fn is_static(&self) -> bool {
        match &self.drift {
            DriftModel::None => true,
            DriftModel::RandomWalk { increments } => increments.iter().all(NoiseSpec::is_zero),
            DriftModel::Linear { velocity } => velocity.iter().all(|v| *v == 0.0),
            DriftModel::Circular { radius, angular_speed } => *radius == 0.0 || *angular_speed == 0.0,
        }
    }

    /// Declared per-block parameters of the displacement measured in `mode`.
    /// The minimal-distance law is only tighter than the Hausdorff one for
    /// box-shaped fixed sets under linear drift; elsewhere both coincide.
    pub fn drift_params(&self, mode: SetDistanceMode) -> Vec<DriftParams> {
        let p = self.base.partition();
        let n = p.n_blocks();
        match &self.drift {
            DriftModel::None => vec![DriftParams::ZERO; n],
            DriftModel::RandomWalk { increments } => increments
                .iter()
                .map(|inc| DriftParams {
                    declared: inc.declared_at(0),
                    mean: inc.mean_norm_at(0),
                    mean_sq: inc.mean_sq_norm_at(0),
                })
                .collect(),
            DriftModel::Linear { velocity } => (0..n)
                .map(|i| {
                    let r = p.range(i);
                    let sigma = match (&self.base.fixed, mode) {
                        (FixedSet::Box(b), SetDistanceMode::Minimal) => r
                            .map(|j| {
                                let g = (velocity[j].abs() - (b.upper()[j] - b.lower()[j])).max(0.0);
                                g * g
                            })
                            .sum::<f64>()
                            .sqrt(),
                        _ => norm(&velocity[r]),
                    };
                    DriftParams::constant(sigma).expect("finite nonnegative displacement")
                })
                .collect(),
            DriftModel::Circular { radius, angular_speed } => {
                let chord = 2.0 * radius * (0.5 * angular_speed).sin().abs();
                vec![DriftParams::constant(chord).expect("finite nonnegative displacement"); n]
            }
        }
    }

    /// Fresh per-trajectory state positioned at iteration 0.
    pub fn start(&self) -> OnlineInstance<'_> {
        let dim = self.base.partition().total_dim();
        let (lo, hi) = match (&self.base.fixed, self.base.domain()) {
            // the translated target must stay inside the fixed domain box
            (FixedSet::Box(t), Some(d)) => (
                d.lower().iter().zip(t.lower()).map(|(a, b)| a - b).collect(),
                d.upper().iter().zip(t.upper()).map(|(a, b)| a - b).collect(),
            ),
            (FixedSet::Point(x), Some(d)) => (
                d.lower().iter().zip(x).map(|(a, b)| a - b).collect(),
                d.upper().iter().zip(x).map(|(a, b)| a - b).collect(),
            ),
            (_, None) => (vec![f64::NEG_INFINITY; dim], vec![f64::INFINITY; dim]),
        };
        OnlineInstance {
            spec: self,
            current: self.base.clone(),
            ell: 0,
            shift: vec![0.0; dim],
            next: vec![0.0; dim],
            shift_lo: lo,
            shift_hi: hi,
        }
    }
}

/// Mutable per-trajectory view of an online operator.
#[derive(Clone, Debug)]
pub struct OnlineInstance<'a> {
    spec: &'a OnlineOperatorSpec,
    current: OperatorSpec,
    ell: usize,
    shift: Vec<f64>,
    next: Vec<f64>,
    shift_lo: Vec<f64>,
    shift_hi: Vec<f64>,
}

impl OnlineInstance<'_> {
    /// Operator `T^ell` for the current iteration.
    pub fn current(&self) -> &OperatorSpec {
        &self.current
    }

    pub fn iteration(&self) -> usize {
        self.ell
    }

    /// Moves from `T^ell` to `T^(ell+1)`, writing the realized per-block
    /// displacements into `step`.
    pub fn advance<R: Rng + ?Sized>(&mut self, rng: &mut R, step: &mut DriftStep) -> Result<()> {
        let p: &BlockPartition = self.spec.base.partition();
        let n = p.n_blocks();
        step.sigma.resize(n, 0.0);
        step.sigma_min.resize(n, 0.0);
        self.next.copy_from_slice(&self.shift);
        match &self.spec.drift {
            DriftModel::None => {}
            DriftModel::RandomWalk { increments } => {
                for (i, inc) in increments.iter().enumerate() {
                    let r = p.range(i);
                    let mut buf = vec![0.0; r.len()];
                    inc.sample_into(self.ell, rng, &mut buf);
                    for (k, j) in r.enumerate() {
                        self.next[j] += buf[k];
                    }
                }
            }
            DriftModel::Linear { velocity } => {
                for (s, v) in self.next.iter_mut().zip(velocity) {
                    *s += v;
                }
            }
            DriftModel::Circular { radius, angular_speed } => {
                let phase = angular_speed * (self.ell + 1) as f64;
                for i in 0..n {
                    let j = p.range(i).start;
                    self.next[j] = radius * (phase.cos() - 1.0);
                    self.next[j + 1] = radius * phase.sin();
                }
            }
        }
        for (j, s) in self.next.iter_mut().enumerate() {
            *s = s.clamp(self.shift_lo[j], self.shift_hi[j]);
        }
        for i in 0..n {
            let r = p.range(i);
            let (a, b) = (&self.shift[r.clone()], &self.next[r.clone()]);
            let moved: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
            step.sigma[i] = norm(&moved);
            step.sigma_min[i] = match &self.spec.base.fixed {
                FixedSet::Box(t) if !t.is_point() => {
                    let t = t.slice(r);
                    set_distance(&t.translated(a), &t.translated(b), SetDistanceMode::Minimal)?
                }
                _ => step.sigma[i],
            };
        }
        std::mem::swap(&mut self.shift, &mut self.next);
        self.current.set_shift(&self.shift);
        self.ell += 1;
        Ok(())
    }

    /// Current fixed set as a box, for set-distance bookkeeping.
    pub fn fixed_box(&self) -> Result<BoxSet> {
        match self.current.fixed_set() {
            FixedSet::Point(p) => BoxSet::point(p),
            FixedSet::Box(b) => Ok(b),
        }
    }
}
