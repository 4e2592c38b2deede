//! Experiment configuration: a TOML document with the sections `operator`,
//! `update`, `noise`, `drift` (optional), `run`, `bounds` and `output`.
//!
//! Unknown keys are rejected. Errors found after parsing are anchored to
//! the line of the offending key.

use std::path::PathBuf;

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::bounds::{build_curve, BlockInputs, BoundCurve, CurveRequest, Proposition};
use crate::engine::{Correlation, IterationConfig, UpdateModel};
use crate::error::{ConfigError, Error, Result};
use crate::operators::linalg::{geometric_spectrum, random_orthogonal, spd_with_spectrum};
use crate::operators::{
    BlockPartition, BoxSet, DriftModel, OnlineOperatorSpec, OperatorClass, OperatorSpec, SetDistanceMode,
};
use crate::subweibull::{NoiseFamily, NoiseSpec, Schedule, SubWeibull};

/// A scalar broadcast to every entry, or an explicit list.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Values {
    One(f64),
    Many(Vec<f64>),
}

impl Values {
    fn resolve(&self, len: usize) -> std::result::Result<Vec<f64>, String> {
        match self {
            Values::One(v) => Ok(vec![*v; len]),
            Values::Many(v) if v.len() == len => Ok(v.clone()),
            Values::Many(v) => Err(format!("expected {len} values, got {}", v.len())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKindName {
    Affine,
    GradientStep,
    ProjectedGradientStep,
    KmAveragedProjection,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSection {
    pub kind: OperatorKindName,
    /// Number of blocks, each of dimension `block_dim`; alternative to `dims`.
    pub blocks: Option<usize>,
    pub block_dim: Option<usize>,
    pub dims: Option<Vec<usize>>,
    /// Seed of the random matrix recipes; block `i` uses `seed + i`.
    #[serde(default)]
    pub seed: u64,
    /// Affine: explicit row-major block matrices.
    pub matrices: Option<Vec<Vec<Vec<f64>>>>,
    /// Affine recipe: `A_i = contraction * Q_i` with `Q_i` random orthogonal.
    pub contraction: Option<f64>,
    pub offset: Option<Values>,
    /// Gradient recipes: Hessian spectrum `[min, max]`, geometrically spaced.
    pub curvature: Option<[f64; 2]>,
    pub step: Option<f64>,
    pub minimizer: Option<Values>,
    pub constraint_lower: Option<Values>,
    pub constraint_upper: Option<Values>,
    pub alpha: Option<f64>,
    pub target_lower: Option<Values>,
    pub target_upper: Option<Values>,
    pub domain_lower: Option<Values>,
    pub domain_upper: Option<Values>,
    /// Declared class overriding the certified one.
    pub declared_zeta: Option<f64>,
    pub declared_alpha: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpdateSection {
    pub p: Values,
    #[serde(default = "default_correlation")]
    pub correlation: Correlation,
}

fn default_correlation() -> Correlation {
    Correlation::Independent
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyName {
    Zero,
    Gaussian,
    Weibull,
    BoundedUniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleName {
    Constant,
    Geometric,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub family: FamilyName,
    pub std: Option<Values>,
    pub theta: Option<f64>,
    pub scale: Option<Values>,
    pub half_width: Option<Values>,
    pub schedule: Option<ScheduleName>,
    pub ratio: Option<f64>,
    /// Declared parameters replacing the certified ones, per block.
    pub declared_theta: Option<f64>,
    pub declared_nu: Option<Values>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftModelName {
    None,
    RandomWalk,
    Linear,
    Circular,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSection {
    pub model: DriftModelName,
    /// Random-walk increment law.
    pub family: Option<FamilyName>,
    pub std: Option<Values>,
    pub theta: Option<f64>,
    pub scale: Option<Values>,
    pub half_width: Option<Values>,
    pub velocity: Option<Values>,
    pub radius: Option<f64>,
    pub angular_speed: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub horizon: usize,
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    pub initial_point: Option<Values>,
    #[serde(default)]
    pub record_iterates: bool,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    #[serde(default)]
    pub propositions: Vec<Proposition>,
    #[serde(default)]
    pub delta: Vec<f64>,
    #[serde(default)]
    pub epsilon: Vec<f64>,
    /// Drift measurements for the online averaged curves.
    #[serde(default = "default_sigma")]
    pub sigma: Vec<SetDistanceMode>,
}

fn default_sigma() -> Vec<SetDistanceMode> {
    vec![SetDistanceMode::Hausdorff]
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: Option<String>,
    /// Write every `stride`-th iteration of the kept trajectories.
    pub stride: Option<usize>,
    /// Number of trials written to the trajectory file.
    pub trajectories: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    operator: OperatorSection,
    update: UpdateSection,
    noise: NoiseSection,
    drift: Option<DriftSection>,
    run: RunSection,
    bounds: Option<BoundsSection>,
    output: Option<OutputSection>,
}

/// A parsed configuration together with its source text.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    text: String,
    pub operator: OperatorSection,
    pub update: UpdateSection,
    pub noise: NoiseSection,
    pub drift: Option<DriftSection>,
    pub run: RunSection,
    pub bounds: Option<BoundsSection>,
    pub output: OutputSection,
}

/// Output settings after defaults.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputSettings {
    pub directory: Option<PathBuf>,
    pub stride: usize,
    pub trajectories: usize,
}

/// A validated experiment ready to run.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub iteration: IterationConfig,
    pub requests: Vec<CurveRequest>,
    pub trials: usize,
    pub base_seed: u64,
    pub output: OutputSettings,
    bounds_line: Option<usize>,
}

impl Experiment {
    /// Every requested curve for every block, in request-major order.
    pub fn curves(&self) -> Result<Vec<BoundCurve>> {
        let inputs = BlockInputs::from_config(&self.iteration)?;
        let mut out = Vec::with_capacity(self.requests.len() * inputs.len());
        for req in &self.requests {
            for b in &inputs {
                let curve = build_curve(b, *req).map_err(|e| {
                    Error::from(ConfigError::new("bounds.propositions", message(&e)).at_line(self.bounds_line))
                })?;
                out.push(curve);
            }
        }
        Ok(out)
    }
}

fn message(e: &Error) -> String {
    match e {
        Error::Domain(m) | Error::Unsupported(m) | Error::OutsideDomain(m) => m.clone(),
        other => other.to_string(),
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

/// Line of `key` inside `[section]`, else of the section header.
fn key_line(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut header = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            current = rest.trim_end_matches(']').trim().to_string();
            if current == section {
                header = Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some(rest) = line.strip_prefix(key) {
                let rest = rest.trim_start();
                if rest.starts_with('=') {
                    return Some(i + 1);
                }
            }
        }
    }
    header
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let doc: Document = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of_offset(text, s.start));
            Error::from(ConfigError::new("", e.message().trim().to_string()).at_line(line))
        })?;
        Ok(Self {
            text: text.to_string(),
            operator: doc.operator,
            update: doc.update,
            noise: doc.noise,
            drift: doc.drift,
            run: doc.run,
            bounds: doc.bounds,
            output: doc.output.unwrap_or_default(),
        })
    }

    pub fn source(&self) -> &str {
        &self.text
    }

    fn err(&self, section: &str, key: &str, msg: impl Into<String>) -> Error {
        ConfigError::new(format!("{section}.{key}"), msg).at_line(key_line(&self.text, section, key)).into()
    }

    fn wrap(&self, section: &str, key: &str) -> impl Fn(Error) -> Error + '_ {
        let section = section.to_string();
        let key = key.to_string();
        move |e| self.err(&section, &key, message(&e))
    }

    fn required<'a, T>(&self, v: &'a Option<T>, section: &str, key: &str) -> Result<&'a T> {
        v.as_ref().ok_or_else(|| self.err(section, key, "missing required key"))
    }

    fn values(&self, v: &Option<Values>, len: usize, section: &str, key: &str) -> Result<Vec<f64>> {
        self.required(v, section, key)?.resolve(len).map_err(|m| self.err(section, key, m))
    }

    fn partition(&self) -> Result<BlockPartition> {
        let op = &self.operator;
        let dims = match (&op.dims, op.blocks) {
            (Some(d), None) => d.clone(),
            (None, Some(n)) => vec![op.block_dim.unwrap_or(1); n],
            (Some(_), Some(_)) => return Err(self.err("operator", "dims", "give either `dims` or `blocks`, not both")),
            (None, None) => return Err(self.err("operator", "blocks", "missing required key `blocks` or `dims`")),
        };
        BlockPartition::new(dims).map_err(self.wrap("operator", "blocks"))
    }

    fn hessians(&self, partition: &BlockPartition) -> Result<Vec<DMatrix<f64>>> {
        let [lo, hi] = *self.required(&self.operator.curvature, "operator", "curvature")?;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(self.err("operator", "curvature", "needs 0 < min <= max"));
        }
        Ok((0..partition.n_blocks())
            .map(|i| {
                let d = partition.dim(i);
                spd_with_spectrum(&geometric_spectrum(d, lo, hi), self.operator.seed.wrapping_add(i as u64))
            })
            .collect())
    }

    fn base_operator(&self, partition: BlockPartition) -> Result<OperatorSpec> {
        let op = &self.operator;
        let n = partition.total_dim();
        let spec = match op.kind {
            OperatorKindName::Affine => {
                let matrices = match (&op.matrices, op.contraction) {
                    (Some(ms), None) => {
                        if ms.len() != partition.n_blocks() {
                            return Err(self.err(
                                "operator",
                                "matrices",
                                format!("expected {} block matrices, got {}", partition.n_blocks(), ms.len()),
                            ));
                        }
                        ms.iter()
                            .enumerate()
                            .map(|(i, rows)| {
                                let d = partition.dim(i);
                                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                                    return Err(self.err("operator", "matrices", format!("block {i} must be {d}x{d}")));
                                }
                                Ok(DMatrix::from_fn(d, d, |r, c| rows[r][c]))
                            })
                            .collect::<Result<Vec<_>>>()?
                    }
                    (None, Some(z)) => (0..partition.n_blocks())
                        .map(|i| random_orthogonal(partition.dim(i), op.seed.wrapping_add(i as u64)) * z)
                        .collect(),
                    _ => {
                        return Err(self.err("operator", "matrices", "give exactly one of `matrices` or `contraction`"))
                    }
                };
                let offset = match &op.offset {
                    Some(v) => v.resolve(n).map_err(|m| self.err("operator", "offset", m))?,
                    None => vec![0.0; n],
                };
                OperatorSpec::affine(partition, matrices, offset).map_err(self.wrap("operator", "matrices"))?
            }
            OperatorKindName::GradientStep | OperatorKindName::ProjectedGradientStep => {
                let hessians = self.hessians(&partition)?;
                let minimizer = match &op.minimizer {
                    Some(v) => v.resolve(n).map_err(|m| self.err("operator", "minimizer", m))?,
                    None => vec![0.0; n],
                };
                let step = *self.required(&op.step, "operator", "step")?;
                if op.kind == OperatorKindName::GradientStep {
                    OperatorSpec::gradient_step(partition, hessians, minimizer, step)
                        .map_err(self.wrap("operator", "step"))?
                } else {
                    let lower = self.values(&op.constraint_lower, n, "operator", "constraint_lower")?;
                    let upper = self.values(&op.constraint_upper, n, "operator", "constraint_upper")?;
                    let c = BoxSet::new(lower, upper).map_err(self.wrap("operator", "constraint_lower"))?;
                    OperatorSpec::projected_gradient_step(partition, hessians, minimizer, step, c)
                        .map_err(self.wrap("operator", "step"))?
                }
            }
            OperatorKindName::KmAveragedProjection => {
                let alpha = *self.required(&op.alpha, "operator", "alpha")?;
                let target = BoxSet::new(
                    self.values(&op.target_lower, n, "operator", "target_lower")?,
                    self.values(&op.target_upper, n, "operator", "target_upper")?,
                )
                .map_err(self.wrap("operator", "target_lower"))?;
                let dom = BoxSet::new(
                    self.values(&op.domain_lower, n, "operator", "domain_lower")?,
                    self.values(&op.domain_upper, n, "operator", "domain_upper")?,
                )
                .map_err(self.wrap("operator", "domain_lower"))?;
                OperatorSpec::km_averaged_projection(partition, alpha, target, dom)
                    .map_err(self.wrap("operator", "alpha"))?
            }
        };
        match (op.declared_zeta, op.declared_alpha) {
            (None, None) => Ok(spec),
            (Some(zeta), None) => spec
                .with_class(OperatorClass::Contractive { zeta })
                .map_err(self.wrap("operator", "declared_zeta")),
            (None, Some(alpha)) => spec
                .with_class(OperatorClass::Averaged { alpha })
                .map_err(self.wrap("operator", "declared_alpha")),
            (Some(_), Some(_)) => {
                Err(self.err("operator", "declared_zeta", "give at most one of `declared_zeta`, `declared_alpha`"))
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn noise_family(
        &self,
        section: &str,
        family: FamilyName,
        std: &Option<Values>,
        theta: Option<f64>,
        scale: &Option<Values>,
        half_width: &Option<Values>,
        n_blocks: usize,
    ) -> Result<Vec<NoiseFamily>> {
        Ok(match family {
            FamilyName::Zero => vec![NoiseFamily::Zero; n_blocks],
            FamilyName::Gaussian => self
                .values(std, n_blocks, section, "std")?
                .into_iter()
                .map(|std| NoiseFamily::Gaussian { std })
                .collect(),
            FamilyName::Weibull => {
                let theta = *self.required(&theta, section, "theta")?;
                self.values(scale, n_blocks, section, "scale")?
                    .into_iter()
                    .map(|scale| NoiseFamily::Weibull { theta, scale })
                    .collect()
            }
            FamilyName::BoundedUniform => self
                .values(half_width, n_blocks, section, "half_width")?
                .into_iter()
                .map(|half_width| NoiseFamily::BoundedUniform { half_width })
                .collect(),
        })
    }

    fn noise_specs(&self, partition: &BlockPartition) -> Result<Vec<NoiseSpec>> {
        let s = &self.noise;
        let n = partition.n_blocks();
        let schedule = match s.schedule.unwrap_or(ScheduleName::Constant) {
            ScheduleName::Constant => Schedule::Constant,
            ScheduleName::Geometric => Schedule::Geometric { ratio: *self.required(&s.ratio, "noise", "ratio")? },
        };
        let families = self.noise_family("noise", s.family, &s.std, s.theta, &s.scale, &s.half_width, n)?;
        let declared_nu = match &s.declared_nu {
            Some(v) => Some(v.resolve(n).map_err(|m| self.err("noise", "declared_nu", m))?),
            None => None,
        };
        families
            .into_iter()
            .enumerate()
            .map(|(i, f)| {
                let mut spec = NoiseSpec::new(f, schedule, partition.dim(i)).map_err(self.wrap("noise", "family"))?;
                if declared_nu.is_some() || s.declared_theta.is_some() {
                    let theta = s.declared_theta.unwrap_or(spec.declared_at(0).theta());
                    let nu = declared_nu.as_ref().map_or(spec.declared_at(0).nu(), |v| v[i]);
                    let declared = SubWeibull::new(theta, nu).map_err(self.wrap("noise", "declared_nu"))?;
                    spec = spec.with_declared(declared);
                }
                Ok(spec)
            })
            .collect()
    }

    fn drift_model(&self, partition: &BlockPartition) -> Result<DriftModel> {
        let Some(d) = &self.drift else {
            return Ok(DriftModel::None);
        };
        Ok(match d.model {
            DriftModelName::None => DriftModel::None,
            DriftModelName::RandomWalk => {
                let family = *self.required(&d.family, "drift", "family")?;
                let n = partition.n_blocks();
                let increments = self
                    .noise_family("drift", family, &d.std, d.theta, &d.scale, &d.half_width, n)?
                    .into_iter()
                    .enumerate()
                    .map(|(i, f)| NoiseSpec::new(f, Schedule::Constant, partition.dim(i)))
                    .collect::<Result<Vec<_>>>()
                    .map_err(self.wrap("drift", "family"))?;
                DriftModel::RandomWalk { increments }
            }
            DriftModelName::Linear => {
                DriftModel::Linear { velocity: self.values(&d.velocity, partition.total_dim(), "drift", "velocity")? }
            }
            DriftModelName::Circular => DriftModel::Circular {
                radius: *self.required(&d.radius, "drift", "radius")?,
                angular_speed: *self.required(&d.angular_speed, "drift", "angular_speed")?,
            },
        })
    }

    fn requests(&self) -> Result<Vec<CurveRequest>> {
        let Some(b) = &self.bounds else {
            return Ok(Vec::new());
        };
        let mut out = Vec::new();
        for &prop in &b.propositions {
            let deltas: Vec<Option<f64>> = if prop.needs_delta() {
                if b.delta.is_empty() {
                    return Err(self.err("bounds", "delta", format!("{prop} needs at least one delta")));
                }
                b.delta.iter().copied().map(Some).collect()
            } else {
                vec![None]
            };
            let epsilons: Vec<Option<f64>> = if prop.needs_epsilon() {
                if b.epsilon.is_empty() {
                    return Err(self.err("bounds", "epsilon", format!("{prop} needs at least one epsilon")));
                }
                b.epsilon.iter().copied().map(Some).collect()
            } else {
                vec![None]
            };
            let modes: Vec<SetDistanceMode> = if prop.is_online() && prop.for_averaged() {
                if b.sigma.is_empty() {
                    return Err(self.err("bounds", "sigma", "needs at least one drift measurement"));
                }
                b.sigma.clone()
            } else {
                vec![SetDistanceMode::Hausdorff]
            };
            for d in &deltas {
                if let Some(d) = d {
                    if !(*d > 0.0 && *d < 1.0) {
                        return Err(self.err("bounds", "delta", format!("delta must lie in (0, 1), got {d}")));
                    }
                }
                for e in &epsilons {
                    for m in &modes {
                        let mut r = CurveRequest::new(prop).with_sigma_mode(*m);
                        if let Some(d) = d {
                            r = r.with_delta(*d);
                        }
                        if let Some(e) = e {
                            r = r.with_epsilon(*e);
                        }
                        out.push(r);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Validates every section and assembles the experiment.
    pub fn build(&self) -> Result<Experiment> {
        let partition = self.partition()?;
        let n_blocks = partition.n_blocks();
        let total = partition.total_dim();
        let probabilities =
            self.update.p.resolve(n_blocks).map_err(|m| self.err("update", "p", m))?;
        let update = UpdateModel::new(probabilities, self.update.correlation).map_err(self.wrap("update", "p"))?;
        let noise = self.noise_specs(&partition)?;
        let drift = self.drift_model(&partition)?;
        let base = self.base_operator(partition)?;
        let operator = OnlineOperatorSpec::new(base, drift).map_err(self.wrap("drift", "model"))?;
        let initial_point = match &self.run.initial_point {
            Some(v) => v.resolve(total).map_err(|m| self.err("run", "initial_point", m))?,
            None => vec![0.0; total],
        };
        if self.run.trials < 100 {
            return Err(self.err("run", "trials", format!("at least 100 trials are needed, got {}", self.run.trials)));
        }
        let iteration = IterationConfig {
            operator,
            update,
            noise,
            horizon: self.run.horizon,
            initial_point,
            record_iterates: self.run.record_iterates,
        };
        iteration.validate().map_err(|e| match e {
            Error::OutsideDomain(_) => self.err("run", "initial_point", "initial point lies outside the operator domain"),
            Error::Domain(_) => self.err("run", "horizon", message(&e)),
            other => self.err("run", "initial_point", message(&other)),
        })?;
        let requests = self.requests()?;
        let stride = self.output.stride.unwrap_or(1);
        if stride == 0 {
            return Err(self.err("output", "stride", "stride must be >= 1"));
        }
        Ok(Experiment {
            iteration,
            requests,
            trials: self.run.trials,
            base_seed: self.run.base_seed,
            output: OutputSettings {
                directory: self.output.directory.as_ref().map(PathBuf::from),
                stride,
                trajectories: self.output.trajectories.unwrap_or(10),
            },
            bounds_line: key_line(&self.text, "bounds", "propositions"),
        })
    }
}
