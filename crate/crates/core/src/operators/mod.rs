//! Block-separable operators with a declared contraction or averagedness
//! class and analytically known fixed sets.
//!
//! Every library operator acts block-diagonally: `T_i x` depends on `x_i`
//! only. This makes the blockwise class inequalities hold by construction.
//! An operator can carry a translation `s`, in which case it acts as
//! `x -> T(x - s) + s` and its fixed set moves by `s`; this is how online
//! instances are produced.

mod boxes;
pub mod linalg;
mod online;

pub use boxes::{set_distance, BoxSet, SetDistanceMode};
pub use online::{DriftModel, DriftParams, DriftStep, OnlineInstance, OnlineOperatorSpec};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use linalg::{dist, mat_vec, spectral_norm, symmetric_spectrum};

/// Direct-sum structure `x = (x_1, ..., x_n)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPartition {
    dims: Vec<usize>,
    offsets: Vec<usize>,
}

impl BlockPartition {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(domain("block partition needs at least one block, each of dimension >= 1"));
        }
        let mut offsets = Vec::with_capacity(dims.len() + 1);
        offsets.push(0);
        for d in &dims {
            offsets.push(offsets.last().unwrap() + d);
        }
        Ok(Self { dims, offsets })
    }

    pub fn uniform(n: usize, d: usize) -> Result<Self> {
        Self::new(vec![d; n])
    }

    pub fn n_blocks(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self, i: usize) -> usize {
        self.dims[i]
    }

    pub fn range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    /// Per-block Euclidean norms of `x`.
    pub fn block_norms(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_blocks()).map(|i| linalg::norm(&x[self.range(i)])).collect()
    }
}

/// Declared regularity of an operator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "kebab-case")]
pub enum OperatorClass {
    /// `||T_i x - y_i|| <= zeta ||x_i - y_i||` for every fixed point `y`.
    Contractive { zeta: f64 },
    /// `||T_i x - y_i||^2 <= ||x_i - y_i||^2 - ((1 - alpha)/alpha) ||x_i - T_i x||^2`.
    Averaged { alpha: f64 },
}

impl OperatorClass {
    fn validate(self) -> Result<Self> {
        let (name, v) = match self {
            OperatorClass::Contractive { zeta } => ("zeta", zeta),
            OperatorClass::Averaged { alpha } => ("alpha", alpha),
        };
        if v > 0.0 && v < 1.0 {
            Ok(self)
        } else {
            Err(domain(format!("class constant {name} must lie in (0, 1), got {v}")))
        }
    }
}

/// Fixed set of the unshifted operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixedSet {
    Point(Vec<f64>),
    Box(BoxSet),
}

#[derive(Clone, Debug, PartialEq)]
pub enum OperatorKind {
    /// `T_i x = A_i x_i + b_i`.
    Affine { matrices: Vec<DMatrix<f64>>, offset: Vec<f64> },
    /// Gradient step on `f(x) = sum_i 1/2 x_i^T Q_i x_i - c_i^T x_i`.
    GradientStep { hessians: Vec<DMatrix<f64>>, linear: Vec<f64>, step: f64 },
    /// Gradient step followed by projection onto `constraint`.
    ProjectedGradientStep {
        hessians: Vec<DMatrix<f64>>,
        linear: Vec<f64>,
        step: f64,
        constraint: BoxSet,
    },
    /// `T x = (1 - alpha) x + alpha P_C x` on the box domain.
    KmAveragedProjection { alpha: f64, target: BoxSet },
}

impl OperatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            OperatorKind::Affine { .. } => "affine-contraction",
            OperatorKind::GradientStep { .. } => "gradient-step",
            OperatorKind::ProjectedGradientStep { .. } => "projected-gradient-step",
            OperatorKind::KmAveragedProjection { .. } => "km-averaged-projection",
        }
    }
}

/// Result of sampling the declared class inequality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub max_violation: f64,
    pub samples: usize,
}

/// An immutable block-separable operator.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorSpec {
    partition: BlockPartition,
    kind: OperatorKind,
    class: OperatorClass,
    certified: OperatorClass,
    fixed: FixedSet,
    domain: Option<BoxSet>,
    shift: Vec<f64>,
}

impl OperatorSpec {
    /// Affine contraction with block matrices `A_i` and offset `b`; the
    /// certified `zeta` is the largest block spectral norm.
    pub fn affine(partition: BlockPartition, matrices: Vec<DMatrix<f64>>, offset: Vec<f64>) -> Result<Self> {
        check_blocks(&partition, &matrices)?;
        check_len(&partition, offset.len())?;
        let zeta = matrices.iter().map(spectral_norm).fold(0.0, f64::max);
        let class = OperatorClass::Contractive { zeta }.validate()?;
        let mut fixed = vec![0.0; partition.total_dim()];
        for (i, a) in matrices.iter().enumerate() {
            let r = partition.range(i);
            let d = r.len();
            let lhs = DMatrix::identity(d, d) - a;
            let rhs = nalgebra::DVector::from_column_slice(&offset[r.clone()]);
            let sol = lhs
                .lu()
                .solve(&rhs)
                .ok_or_else(|| domain("affine block has no unique fixed point"))?;
            fixed[r].copy_from_slice(sol.as_slice());
        }
        Ok(Self {
            partition,
            kind: OperatorKind::Affine { matrices, offset },
            class,
            certified: class,
            fixed: FixedSet::Point(fixed),
            domain: None,
            shift: Vec::new(),
        }
        .with_zero_shift())
    }

    /// Gradient step `x - step (Q x - Q x*)` on a separable strongly convex
    /// quadratic with minimizer `minimizer`.
    pub fn gradient_step(
        partition: BlockPartition,
        hessians: Vec<DMatrix<f64>>,
        minimizer: Vec<f64>,
        step: f64,
    ) -> Result<Self> {
        let (zeta, linear) = gradient_setup(&partition, &hessians, &minimizer, step)?;
        let class = OperatorClass::Contractive { zeta }.validate()?;
        Ok(Self {
            partition,
            kind: OperatorKind::GradientStep { hessians, linear, step },
            class,
            certified: class,
            fixed: FixedSet::Point(minimizer),
            domain: None,
            shift: Vec::new(),
        }
        .with_zero_shift())
    }

    /// Projected gradient step; the fixed point is the constrained minimizer,
    /// found by iterating the contraction to machine precision.
    pub fn projected_gradient_step(
        partition: BlockPartition,
        hessians: Vec<DMatrix<f64>>,
        minimizer: Vec<f64>,
        step: f64,
        constraint: BoxSet,
    ) -> Result<Self> {
        check_len(&partition, constraint.dim())?;
        let (zeta, linear) = gradient_setup(&partition, &hessians, &minimizer, step)?;
        let class = OperatorClass::Contractive { zeta }.validate()?;
        let mut spec = Self {
            partition,
            kind: OperatorKind::ProjectedGradientStep { hessians, linear, step, constraint: constraint.clone() },
            class,
            certified: class,
            fixed: FixedSet::Point(Vec::new()),
            domain: None,
            shift: Vec::new(),
        }
        .with_zero_shift();
        let mut x = constraint.project(&minimizer);
        let mut next = vec![0.0; x.len()];
        for _ in 0..1_000_000 {
            spec.apply_into(&x, &mut next)?;
            let step_len = dist(&x, &next);
            std::mem::swap(&mut x, &mut next);
            if step_len <= 1e-15 * (1.0 + linalg::norm(&x)) {
                break;
            }
        }
        spec.fixed = FixedSet::Point(x);
        Ok(spec)
    }

    /// Krasnosel'skii-Mann step toward the projection onto `target`, on the
    /// box domain `domain` which must contain `target`.
    pub fn km_averaged_projection(
        partition: BlockPartition,
        alpha: f64,
        target: BoxSet,
        domain_box: BoxSet,
    ) -> Result<Self> {
        check_len(&partition, target.dim())?;
        check_len(&partition, domain_box.dim())?;
        let class = OperatorClass::Averaged { alpha }.validate()?;
        if !(domain_box.contains(target.lower()) && domain_box.contains(target.upper())) {
            return Err(domain("target box must lie inside the domain box"));
        }
        Ok(Self {
            partition,
            kind: OperatorKind::KmAveragedProjection { alpha, target: target.clone() },
            class,
            certified: class,
            fixed: FixedSet::Box(target),
            domain: Some(domain_box),
            shift: Vec::new(),
        }
        .with_zero_shift())
    }

    fn with_zero_shift(mut self) -> Self {
        self.shift = vec![0.0; self.partition.total_dim()];
        self
    }

    /// Overrides the declared class; the certified class is kept for
    /// reference.
    pub fn with_class(mut self, class: OperatorClass) -> Result<Self> {
        self.class = class.validate()?;
        Ok(self)
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn class(&self) -> OperatorClass {
        self.class
    }

    pub fn certified_class(&self) -> OperatorClass {
        self.certified
    }

    pub fn domain(&self) -> Option<&BoxSet> {
        self.domain.as_ref()
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    /// Copy translated by `shift` (absolute, relative to the base operator).
    pub fn shifted(&self, shift: &[f64]) -> Result<Self> {
        check_len(&self.partition, shift.len())?;
        let mut out = self.clone();
        out.shift.copy_from_slice(shift);
        Ok(out)
    }

    pub(crate) fn set_shift(&mut self, shift: &[f64]) {
        self.shift.copy_from_slice(shift);
    }

    /// Per-block diameter of the domain box, when there is one.
    pub fn block_diameters(&self) -> Option<Vec<f64>> {
        self.domain
            .as_ref()
            .map(|d| (0..self.partition.n_blocks()).map(|i| d.slice(self.partition.range(i)).diameter()).collect())
    }

    /// Current fixed set (translated by the shift).
    pub fn fixed_set(&self) -> FixedSet {
        match &self.fixed {
            FixedSet::Point(p) => FixedSet::Point(p.iter().zip(&self.shift).map(|(a, s)| a + s).collect()),
            FixedSet::Box(b) => FixedSet::Box(b.translated(&self.shift)),
        }
    }

    /// The unique fixed point, if the fixed set is a singleton.
    pub fn fixed_point(&self) -> Option<Vec<f64>> {
        match self.fixed_set() {
            FixedSet::Point(p) => Some(p),
            FixedSet::Box(b) if b.is_point() => Some(b.lower().to_vec()),
            FixedSet::Box(_) => None,
        }
    }

    /// The fixed point closest to `x`.
    pub fn nearest_fixed_point(&self, x: &[f64]) -> Vec<f64> {
        match self.fixed_set() {
            FixedSet::Point(p) => p,
            FixedSet::Box(b) => b.project(x),
        }
    }

    /// Per-block distance from `x` to the fixed set.
    pub fn distance_to_fixed(&self, x: &[f64]) -> Vec<f64> {
        let n = self.partition.n_blocks();
        match &self.fixed {
            FixedSet::Point(p) => (0..n)
                .map(|i| {
                    let r = self.partition.range(i);
                    r.map(|j| {
                        let d = x[j] - (p[j] + self.shift[j]);
                        d * d
                    })
                    .sum::<f64>()
                    .sqrt()
                })
                .collect(),
            FixedSet::Box(b) => {
                let b = b.translated(&self.shift);
                (0..n)
                    .map(|i| {
                        let r = self.partition.range(i);
                        b.slice(r.clone()).distance_to_point(&x[r])
                    })
                    .collect()
            }
        }
    }

    /// `out = T x`.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_len(&self.partition, x.len())?;
        check_len(&self.partition, out.len())?;
        if let Some(d) = &self.domain {
            if !d.contains(x) {
                return Err(Error::OutsideDomain(format!("{x:?}")));
            }
        }
        let s = &self.shift;
        match &self.kind {
            OperatorKind::Affine { matrices, offset } => {
                for (i, a) in matrices.iter().enumerate() {
                    let r = self.partition.range(i);
                    let z: Vec<f64> = r.clone().map(|j| x[j] - s[j]).collect();
                    mat_vec(a, &z, &mut out[r.clone()]);
                    for j in r {
                        out[j] += offset[j] + s[j];
                    }
                }
            }
            OperatorKind::GradientStep { hessians, linear, step } => {
                self.gradient_into(hessians, linear, *step, x, out);
            }
            OperatorKind::ProjectedGradientStep { hessians, linear, step, constraint } => {
                self.gradient_into(hessians, linear, *step, x, out);
                for (j, o) in out.iter_mut().enumerate() {
                    *o = (*o - s[j]).clamp(constraint.lower()[j], constraint.upper()[j]) + s[j];
                }
            }
            OperatorKind::KmAveragedProjection { alpha, target } => {
                for (j, o) in out.iter_mut().enumerate() {
                    let p = x[j].clamp(target.lower()[j] + s[j], target.upper()[j] + s[j]);
                    *o = (1.0 - alpha) * x[j] + alpha * p;
                }
            }
        }
        Ok(())
    }

    /// Gradient step on the shifted quadratic, before any projection.
    fn gradient_into(&self, hessians: &[DMatrix<f64>], linear: &[f64], step: f64, x: &[f64], out: &mut [f64]) {
        let s = &self.shift;
        for (i, q) in hessians.iter().enumerate() {
            let r = self.partition.range(i);
            let z: Vec<f64> = r.clone().map(|j| x[j] - s[j]).collect();
            mat_vec(q, &z, &mut out[r.clone()]);
            for (k, j) in r.enumerate() {
                out[j] = z[k] - step * (out[j] - linear[j]) + s[j];
            }
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; x.len()];
        self.apply_into(x, &mut out)?;
        Ok(out)
    }

    /// Per-block `||x_i - T_i x||`.
    pub fn fixed_point_residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        let tx = self.apply(x)?;
        Ok((0..self.partition.n_blocks())
            .map(|i| {
                let r = self.partition.range(i);
                dist(&x[r.clone()], &tx[r])
            })
            .collect())
    }

    /// Samples points and reports the largest violation of the declared
    /// class inequality. Contractive operators are probed on the ball of
    /// radius `radius` around the fixed point, averaged ones on the domain
    /// box against fixed points drawn from the fixed set.
    pub fn verify_class<R: Rng + ?Sized>(&self, num_samples: usize, radius: f64, rng: &mut R) -> Result<ClassReport> {
        if num_samples < 1_000 {
            return Err(domain(format!("class check needs at least 10^3 samples, got {num_samples}")));
        }
        let n = self.partition.n_blocks();
        let dim = self.partition.total_dim();
        let mut worst = f64::NEG_INFINITY;
        let mut tx = vec![0.0; dim];
        match self.class {
            OperatorClass::Contractive { zeta } => {
                let y = self
                    .fixed_point()
                    .ok_or_else(|| Error::Unsupported("contractive check needs a singleton fixed set".into()))?;
                for _ in 0..num_samples {
                    let g: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
                    let scale = radius * rng.random::<f64>() / linalg::norm(&g).max(f64::MIN_POSITIVE);
                    let x: Vec<f64> = y.iter().zip(&g).map(|(a, b)| a + scale * b).collect();
                    self.apply_into(&x, &mut tx)?;
                    for i in 0..n {
                        let r = self.partition.range(i);
                        let v = dist(&tx[r.clone()], &y[r.clone()]) - zeta * dist(&x[r.clone()], &y[r]);
                        worst = worst.max(v);
                    }
                }
            }
            OperatorClass::Averaged { alpha } => {
                let d = self
                    .domain
                    .as_ref()
                    .ok_or_else(|| Error::Unsupported("averaged check needs a domain box".into()))?;
                let fixed = match self.fixed_set() {
                    FixedSet::Point(p) => BoxSet::point(p)?,
                    FixedSet::Box(b) => b,
                };
                let coef = (1.0 - alpha) / alpha;
                let uniform_in = |b: &BoxSet, rng: &mut R| -> Vec<f64> {
                    (0..b.dim())
                        .map(|j| {
                            let (l, u) = (b.lower()[j], b.upper()[j]);
                            if l == u { l } else { rng.random_range(l..=u) }
                        })
                        .collect()
                };
                for _ in 0..num_samples {
                    let x = uniform_in(d, rng);
                    let y = uniform_in(&fixed, rng);
                    self.apply_into(&x, &mut tx)?;
                    for i in 0..n {
                        let r = self.partition.range(i);
                        let a = dist(&tx[r.clone()], &y[r.clone()]);
                        let b = dist(&x[r.clone()], &y[r.clone()]);
                        let c = dist(&x[r.clone()], &tx[r]);
                        worst = worst.max(a * a - b * b + coef * c * c);
                    }
                }
            }
        }
        Ok(ClassReport { max_violation: worst, samples: num_samples })
    }
}

fn check_len(partition: &BlockPartition, len: usize) -> Result<()> {
    if len == partition.total_dim() {
        Ok(())
    } else {
        Err(Error::Dimension { expected: partition.total_dim(), got: len })
    }
}

fn check_blocks(partition: &BlockPartition, matrices: &[DMatrix<f64>]) -> Result<()> {
    if matrices.len() != partition.n_blocks() {
        return Err(Error::Dimension { expected: partition.n_blocks(), got: matrices.len() });
    }
    for (i, m) in matrices.iter().enumerate() {
        let d = partition.dim(i);
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::Dimension { expected: d, got: m.nrows().max(m.ncols()) });
        }
    }
    Ok(())
}

/// Contraction factor `max |1 - step lambda|` and linear term `Q x*`.
fn gradient_setup(
    partition: &BlockPartition,
    hessians: &[DMatrix<f64>],
    minimizer: &[f64],
    step: f64,
) -> Result<(f64, Vec<f64>)> {
    check_blocks(partition, hessians)?;
    check_len(partition, minimizer.len())?;
    let mut zeta = 0.0f64;
    let mut linear = vec![0.0; minimizer.len()];
    for (i, q) in hessians.iter().enumerate() {
        let (lo, hi) = symmetric_spectrum(q)?;
        if lo <= 0.0 {
            return Err(domain(format!("block {i} hessian is not positive definite (min eigenvalue {lo})")));
        }
        if !(step > 0.0 && step < 2.0 / hi) {
            return Err(domain(format!("step {step} must lie in (0, 2/lambda_max) = (0, {})", 2.0 / hi)));
        }
        zeta = zeta.max((1.0 - step * lo).abs().max((1.0 - step * hi).abs()));
        let r = partition.range(i);
        mat_vec(q, &minimizer[r.clone()], &mut linear[r]);
    }
    Ok((zeta, linear))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar_affine(a: f64, b: f64) -> OperatorSpec {
        OperatorSpec::affine(
            BlockPartition::uniform(1, 1).unwrap(),
            vec![DMatrix::from_element(1, 1, a)],
            vec![b],
        )
        .unwrap()
    }

    fn unit_km(alpha: f64) -> OperatorSpec {
        OperatorSpec::km_averaged_projection(
            BlockPartition::uniform(1, 1).unwrap(),
            alpha,
            BoxSet::new(vec![0.0], vec![1.0]).unwrap(),
            BoxSet::new(vec![-5.0], vec![5.0]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn affine_fixed_point_and_apply() {
        let t = scalar_affine(0.5, 1.0);
        assert_eq!(t.fixed_point().unwrap(), vec![2.0]);
        assert_eq!(t.apply(&[2.0]).unwrap(), vec![2.0]);
        assert_eq!(t.fixed_point_residual(&[0.0]).unwrap(), vec![1.0]);
        assert_eq!(t.class(), OperatorClass::Contractive { zeta: 0.5 });
    }

    #[test]
    fn gradient_step_on_unit_quadratic() {
        let t = OperatorSpec::gradient_step(
            BlockPartition::uniform(1, 1).unwrap(),
            vec![DMatrix::from_element(1, 1, 0.5)],
            vec![0.0],
            1.0,
        )
        .unwrap();
        assert_eq!(t.apply(&[3.0]).unwrap(), vec![1.5]);
        // f = x^2 / 2 with unit step lands on the minimizer, but zeta = 0 is
        // not a valid contraction constant
        assert!(OperatorSpec::gradient_step(
            BlockPartition::uniform(1, 1).unwrap(),
            vec![DMatrix::from_element(1, 1, 1.0)],
            vec![0.0],
            1.0,
        )
        .is_err());
        let t = OperatorSpec::gradient_step(
            BlockPartition::uniform(1, 1).unwrap(),
            vec![DMatrix::from_element(1, 1, 1.0)],
            vec![0.0],
            0.9,
        )
        .unwrap();
        assert_relative_eq!(t.apply(&[3.0]).unwrap()[0], 0.3, max_relative = 1e-14);
    }

    #[test]
    fn km_projection_examples() {
        let t = unit_km(0.5);
        assert_eq!(t.apply(&[2.0]).unwrap(), vec![1.5]);
        assert_eq!(t.fixed_point_residual(&[2.0]).unwrap(), vec![0.5]);
        assert_eq!(t.fixed_point_residual(&[0.3]).unwrap(), vec![0.0]);
        assert!(matches!(t.apply(&[6.0]), Err(Error::OutsideDomain(_))));
        assert_eq!(t.block_diameters().unwrap(), vec![10.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let t = scalar_affine(0.5, 1.0);
        assert!(matches!(t.apply(&[1.0, 2.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn projected_gradient_fixed_point() {
        let t = OperatorSpec::projected_gradient_step(
            BlockPartition::uniform(2, 1).unwrap(),
            vec![DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, 2.0)],
            vec![3.0, -0.5],
            0.4,
            BoxSet::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap(),
        )
        .unwrap();
        let x = t.fixed_point().unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] + 0.5).abs() < 1e-12);
        let tx = t.apply(&x).unwrap();
        assert!(dist(&tx, &x) < 1e-12);
    }

    #[test]
    fn class_checks() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ok = scalar_affine(0.5, 1.0).verify_class(2_000, 10.0, &mut rng).unwrap();
        assert!(ok.max_violation <= 1e-10, "{ok:?}");

        let bad = scalar_affine(0.9, 1.0)
            .with_class(OperatorClass::Contractive { zeta: 0.5 })
            .unwrap()
            .verify_class(2_000, 10.0, &mut rng)
            .unwrap();
        assert!(bad.max_violation > 0.0);

        let km = unit_km(0.5).verify_class(20_000, 0.0, &mut rng).unwrap();
        assert!(km.max_violation <= 1e-10, "{km:?}");

        let spd = linalg::spd_with_spectrum(&[0.5, 1.0, 2.0], 4);
        let g = OperatorSpec::gradient_step(BlockPartition::uniform(1, 3).unwrap(), vec![spd], vec![1.0, -2.0, 0.5], 0.5)
            .unwrap();
        assert_relative_eq!(
            match g.class() {
                OperatorClass::Contractive { zeta } => zeta,
                _ => unreachable!(),
            },
            0.75,
            max_relative = 1e-12
        );
        assert!(g.verify_class(2_000, 5.0, &mut rng).unwrap().max_violation <= 1e-10);
    }

    #[test]
    fn shift_moves_fixed_set() {
        let t = scalar_affine(0.5, 1.0).shifted(&[0.25]).unwrap();
        assert_eq!(t.fixed_point().unwrap(), vec![2.25]);
        assert!(t.apply(&[2.25]).unwrap()[0] - 2.25 < 1e-15);
        assert_eq!(t.distance_to_fixed(&[3.25]), vec![1.0]);
    }
}
