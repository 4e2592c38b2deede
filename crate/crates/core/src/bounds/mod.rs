//! Evaluators for every convergence bound, and their assembly into
//! [`BoundCurve`]s over a horizon.

mod averaged;
mod contractive;
mod eta;
mod sanov;

pub use averaged::{hp_fpr_bound, mean_fpr_bound, online_hp_fpr_bound, online_mean_fpr_bound, AveragedParams};
pub use contractive::{
    hp_bound_contractive, hp_bound_contractive_alt, markov_bound_contractive, mean_bound_contractive,
    neighborhood_radius, online_hp_bound, online_hp_bound_convolved, online_mean_bound, ContractiveParams,
};
pub use eta::{eta, eta_table, eta_with_argmax, knorm_zeta_beta};
pub use sanov::{bernoulli_kl, no_noise_hp_rate, no_noise_hp_rate_averaged, sanov_delta};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::IterationConfig;
use crate::error::{domain, Error, Result};
use crate::operators::{DriftParams, OperatorClass, SetDistanceMode};
use crate::subweibull::{NoiseSpec, Schedule};

/// Which bound a curve evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Proposition {
    MeanContractive,
    HpContractive,
    HpContractiveAlt,
    MarkovContractive,
    MeanAveragedFpr,
    HpAveragedFpr,
    SanovNoNoise,
    SanovAveragedNoNoise,
    NeighborhoodLimsup,
    MeanOnlineContractive,
    HpOnlineContractive,
    MeanOnlineFpr,
    HpOnlineFpr,
}

/// Trajectory quantity a curve bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// `||x_i^ell - x_i^{*,ell}||`.
    Distance,
    /// `(1/(ell+1)) sum_{h<=ell} u_i^h ||(I - T_i^(h+1)) x^h||^2`.
    CumulativeFpr,
    /// `||(I - T_i^(ell+1)) x^ell||^2`.
    ResidualSq,
}

/// Whether a curve bounds the expectation or a quantile of its metric.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Guarantee {
    /// Bound on `E[metric]` at every ell.
    Mean,
    /// Bound on `limsup E[metric]`.
    AsymptoticMean,
    /// `P(metric <= curve) >= 1 - delta`.
    Probability,
}

impl Proposition {
    pub const ALL: [Proposition; 13] = [
        Proposition::MeanContractive,
        Proposition::HpContractive,
        Proposition::HpContractiveAlt,
        Proposition::MarkovContractive,
        Proposition::MeanAveragedFpr,
        Proposition::HpAveragedFpr,
        Proposition::SanovNoNoise,
        Proposition::SanovAveragedNoNoise,
        Proposition::NeighborhoodLimsup,
        Proposition::MeanOnlineContractive,
        Proposition::HpOnlineContractive,
        Proposition::MeanOnlineFpr,
        Proposition::HpOnlineFpr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Proposition::MeanContractive => "mean-contractive",
            Proposition::HpContractive => "hp-contractive",
            Proposition::HpContractiveAlt => "hp-contractive-alt",
            Proposition::MarkovContractive => "markov-contractive",
            Proposition::MeanAveragedFpr => "mean-averaged-fpr",
            Proposition::HpAveragedFpr => "hp-averaged-fpr",
            Proposition::SanovNoNoise => "sanov-no-noise",
            Proposition::SanovAveragedNoNoise => "sanov-averaged-no-noise",
            Proposition::NeighborhoodLimsup => "neighborhood-limsup",
            Proposition::MeanOnlineContractive => "mean-online-contractive",
            Proposition::HpOnlineContractive => "hp-online-contractive",
            Proposition::MeanOnlineFpr => "mean-online-fpr",
            Proposition::HpOnlineFpr => "hp-online-fpr",
        }
    }

    pub fn metric(self) -> Metric {
        match self {
            Proposition::MeanAveragedFpr
            | Proposition::HpAveragedFpr
            | Proposition::MeanOnlineFpr
            | Proposition::HpOnlineFpr => Metric::CumulativeFpr,
            Proposition::SanovAveragedNoNoise => Metric::ResidualSq,
            _ => Metric::Distance,
        }
    }

    pub fn guarantee(self) -> Guarantee {
        match self {
            Proposition::MeanContractive
            | Proposition::MeanAveragedFpr
            | Proposition::MeanOnlineContractive
            | Proposition::MeanOnlineFpr => Guarantee::Mean,
            Proposition::NeighborhoodLimsup => Guarantee::AsymptoticMean,
            _ => Guarantee::Probability,
        }
    }

    /// Whether evaluation takes a confidence level `delta`.
    pub fn needs_delta(self) -> bool {
        matches!(
            self,
            Proposition::HpContractive
                | Proposition::HpContractiveAlt
                | Proposition::MarkovContractive
                | Proposition::HpAveragedFpr
                | Proposition::HpOnlineContractive
                | Proposition::HpOnlineFpr
        )
    }

    /// Whether evaluation takes a deviation `epsilon`.
    pub fn needs_epsilon(self) -> bool {
        matches!(self, Proposition::SanovNoNoise | Proposition::SanovAveragedNoNoise)
    }

    pub fn is_online(self) -> bool {
        matches!(
            self,
            Proposition::MeanOnlineContractive
                | Proposition::HpOnlineContractive
                | Proposition::MeanOnlineFpr
                | Proposition::HpOnlineFpr
        )
    }

    pub fn for_averaged(self) -> bool {
        matches!(
            self,
            Proposition::MeanAveragedFpr
                | Proposition::HpAveragedFpr
                | Proposition::SanovAveragedNoNoise
                | Proposition::MeanOnlineFpr
                | Proposition::HpOnlineFpr
        )
    }
}

impl fmt::Display for Proposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Proposition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Proposition::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| domain(format!("unknown proposition `{s}`")))
    }
}

/// Confidence attached to a curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveDelta {
    None,
    Fixed(f64),
    /// Failure probability that varies with ell.
    PerEll(Vec<f64>),
}

impl CurveDelta {
    /// Failure probability at `ell`, if any.
    pub fn at(&self, ell: usize) -> Option<f64> {
        match self {
            CurveDelta::None => None,
            CurveDelta::Fixed(d) => Some(*d),
            CurveDelta::PerEll(v) => v.get(ell).copied(),
        }
    }
}

/// A bound evaluated at every `ell = 0..=L` for one block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCurve {
    pub proposition: Proposition,
    pub block: usize,
    pub delta: CurveDelta,
    pub epsilon: Option<f64>,
    /// Constants used in the evaluation, by name.
    pub params: BTreeMap<String, f64>,
    pub theta_prime: Option<f64>,
    /// Which drift measurement the online averaged curves use.
    pub sigma_mode: Option<SetDistanceMode>,
    pub values: Vec<f64>,
}

impl BoundCurve {
    pub fn metric(&self) -> Metric {
        self.proposition.metric()
    }

    pub fn horizon(&self) -> usize {
        self.values.len() - 1
    }

    /// Copy with every value multiplied by `factor`, for falsifiability
    /// controls.
    pub fn scaled(&self, factor: f64) -> BoundCurve {
        BoundCurve { values: self.values.iter().map(|v| v * factor).collect(), ..self.clone() }
    }
}

/// Per-block inputs common to every bound, extracted from a run
/// configuration. Suprema of time-varying quantities are taken over the
/// iterations `0..L` of the configured horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockInputs {
    pub block: usize,
    pub p: f64,
    pub d0: f64,
    pub class: OperatorClass,
    pub diam: Option<f64>,
    pub horizon: usize,
    pub theta: f64,
    /// Declared `nu^ell` for `ell = 0..L`.
    pub nu: Vec<f64>,
    pub sup_nu: f64,
    pub sup_mu: f64,
    pub sup_mean_sq: f64,
    /// Error scale decays along the horizon.
    pub decaying: bool,
    pub drift: DriftParams,
    pub drift_min: DriftParams,
    pub static_operator: bool,
}

fn sup(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, f64::max)
}

impl BlockInputs {
    pub fn from_config(config: &IterationConfig) -> Result<Vec<BlockInputs>> {
        config.validate()?;
        let base = config.operator.base();
        let d0 = base.distance_to_fixed(&config.initial_point);
        let diam = base.block_diameters();
        let drift = config.operator.drift_params(SetDistanceMode::Hausdorff);
        let drift_min = config.operator.drift_params(SetDistanceMode::Minimal);
        let static_operator = config.operator.is_static();
        let l = config.horizon;
        Ok((0..config.n_blocks())
            .map(|i| {
                let noise: &NoiseSpec = &config.noise[i];
                let nu: Vec<f64> = (0..l).map(|ell| noise.declared_at(ell).nu()).collect();
                BlockInputs {
                    block: i,
                    p: config.update.probabilities()[i],
                    d0: d0[i],
                    class: base.class(),
                    diam: diam.as_ref().map(|d| d[i]),
                    horizon: l,
                    theta: noise.declared_at(0).theta(),
                    sup_nu: sup(nu.iter().copied()),
                    nu,
                    sup_mu: sup((0..l).map(|ell| noise.mean_norm_at(ell))),
                    sup_mean_sq: sup((0..l).map(|ell| noise.mean_sq_norm_at(ell))),
                    decaying: matches!(noise.schedule(), Schedule::Geometric { .. }) && !noise.is_zero(),
                    drift: drift[i],
                    drift_min: drift_min[i],
                    static_operator,
                }
            })
            .collect())
    }

    fn zeta(&self) -> Result<f64> {
        match self.class {
            OperatorClass::Contractive { zeta } => Ok(zeta),
            OperatorClass::Averaged { .. } => Err(Error::Unsupported("bound requires a contractive operator".into())),
        }
    }

    fn alpha(&self) -> Result<f64> {
        match self.class {
            OperatorClass::Averaged { alpha } => Ok(alpha),
            OperatorClass::Contractive { .. } => Err(Error::Unsupported("bound requires an averaged operator".into())),
        }
    }

    pub fn contractive_params(&self) -> Result<ContractiveParams> {
        let q = ContractiveParams {
            zeta: self.zeta()?,
            p: self.p,
            d0: self.d0,
            theta: self.theta,
            sup_nu: self.sup_nu,
            sup_mu: self.sup_mu,
            phi: self.drift.declared.theta(),
            sup_gamma: self.drift.declared.nu(),
            sup_mean_sigma: self.drift.mean,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn averaged_params(&self, mode: SetDistanceMode) -> Result<AveragedParams> {
        let drift = match mode {
            SetDistanceMode::Hausdorff => self.drift,
            SetDistanceMode::Minimal => self.drift_min,
        };
        let q = AveragedParams {
            alpha: self.alpha()?,
            p: self.p,
            d0: self.d0,
            diam: self.diam.ok_or_else(|| Error::Unsupported("averaged bounds need a bounded domain".into()))?,
            theta: self.theta,
            sup_nu: self.sup_nu,
            sup_mu: self.sup_mu,
            sup_mean_sq: self.sup_mean_sq,
            phi: drift.declared.theta(),
            sup_gamma: drift.declared.nu(),
            sup_mean_sigma: drift.mean,
            sup_mean_sq_sigma: drift.mean_sq,
        };
        q.validate()?;
        Ok(q)
    }

    /// `sum_{h<ell} zeta^(ell-h-1) nu^h` for `ell = 0..=L`.
    pub fn convolved_nu(&self, zeta: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.horizon + 1);
        let mut acc = 0.0;
        out.push(acc);
        for nu in &self.nu {
            acc = zeta * acc + nu;
            out.push(acc);
        }
        out
    }

    /// Whether the high-probability contractive curve uses the convolved
    /// error sequence instead of its supremum.
    pub fn uses_convolution(&self) -> bool {
        self.decaying && self.p == 1.0
    }
}

/// Options for a single curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurveRequest {
    pub proposition: Proposition,
    pub delta: Option<f64>,
    pub epsilon: Option<f64>,
    pub sigma_mode: SetDistanceMode,
}

impl CurveRequest {
    pub fn new(proposition: Proposition) -> Self {
        Self { proposition, delta: None, epsilon: None, sigma_mode: SetDistanceMode::Hausdorff }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = Some(epsilon);
        self
    }

    pub fn with_sigma_mode(mut self, mode: SetDistanceMode) -> Self {
        self.sigma_mode = mode;
        self
    }
}

/// Evaluates one proposition over `ell = 0..=L` for one block.
pub fn build_curve(inputs: &BlockInputs, request: CurveRequest) -> Result<BoundCurve> {
    let prop = request.proposition;
    let l = inputs.horizon;
    if !prop.is_online() && !inputs.static_operator {
        return Err(Error::Unsupported(format!("{prop} applies to static operators only")));
    }
    let delta = if prop.needs_delta() {
        Some(request.delta.ok_or_else(|| domain(format!("{prop} needs a delta")))?)
    } else {
        None
    };
    let epsilon = if prop.needs_epsilon() {
        Some(request.epsilon.ok_or_else(|| domain(format!("{prop} needs an epsilon")))?)
    } else {
        None
    };
    let ells = 0..=l;
    let mut params = BTreeMap::new();
    params.insert("p".to_string(), inputs.p);
    params.insert("d0".to_string(), inputs.d0);
    let mut theta_prime = None;
    let mut curve_delta = delta.map_or(CurveDelta::None, CurveDelta::Fixed);
    let mut sigma_mode = None;

    let values: Vec<f64> = if prop.for_averaged() {
        let alpha = inputs.alpha()?;
        params.insert("alpha".into(), alpha);
        match prop {
            Proposition::SanovAveragedNoNoise => {
                let eps = epsilon.unwrap();
                require_noise_free(inputs, prop)?;
                let mut deltas = Vec::with_capacity(l + 1);
                let values = ells
                    .map(|ell| {
                        let (b, conf) = no_noise_hp_rate_averaged(alpha, inputs.p, eps, ell, inputs.d0)?;
                        deltas.push(1.0 - conf);
                        Ok(b)
                    })
                    .collect::<Result<Vec<_>>>()?;
                curve_delta = CurveDelta::PerEll(deltas);
                values
            }
            _ => {
                let mode = if prop.is_online() { request.sigma_mode } else { SetDistanceMode::Hausdorff };
                let q = inputs.averaged_params(mode)?;
                params.insert("diam".into(), q.diam);
                params.insert("sup_nu".into(), q.sup_nu);
                params.insert("sup_mu".into(), q.sup_mu);
                params.insert("sup_mean_sq".into(), q.sup_mean_sq);
                if prop.is_online() {
                    sigma_mode = Some(mode);
                    params.insert("sup_gamma".into(), q.sup_gamma);
                    params.insert("sup_mean_sigma".into(), q.sup_mean_sigma);
                    params.insert("sup_mean_sq_sigma".into(), q.sup_mean_sq_sigma);
                }
                match prop {
                    Proposition::MeanAveragedFpr => ells.map(|ell| mean_fpr_bound(&q, ell)).collect(),
                    Proposition::MeanOnlineFpr => ells.map(|ell| online_mean_fpr_bound(&q, ell)).collect(),
                    Proposition::HpAveragedFpr => {
                        theta_prime = Some(q.without_drift().theta_prime());
                        ells.map(|ell| hp_fpr_bound(&q, delta.unwrap(), ell)).collect::<Result<_>>()?
                    }
                    Proposition::HpOnlineFpr => {
                        theta_prime = Some(q.theta_prime());
                        ells.map(|ell| online_hp_fpr_bound(&q, delta.unwrap(), ell)).collect::<Result<_>>()?
                    }
                    _ => unreachable!("averaged propositions are exhausted above"),
                }
            }
        }
    } else {
        let q = inputs.contractive_params()?;
        params.insert("zeta".into(), q.zeta);
        params.insert("chi".into(), q.chi());
        params.insert("sup_nu".into(), q.sup_nu);
        params.insert("sup_mu".into(), q.sup_mu);
        if prop.is_online() {
            params.insert("sup_gamma".into(), q.sup_gamma);
            params.insert("sup_mean_sigma".into(), q.sup_mean_sigma);
        }
        let stat = q.without_drift();
        match prop {
            Proposition::MeanContractive => ells.map(|ell| mean_bound_contractive(&q, ell)).collect(),
            Proposition::MeanOnlineContractive => ells.map(|ell| online_mean_bound(&q, ell)).collect(),
            Proposition::HpContractive | Proposition::HpOnlineContractive => {
                let q = if prop == Proposition::HpContractive { stat } else { q };
                let d = delta.unwrap();
                theta_prime = Some(q.theta_prime());
                if inputs.uses_convolution() {
                    let conv = inputs.convolved_nu(q.zeta);
                    ells.map(|ell| online_hp_bound_convolved(&q, d, ell, conv[ell])).collect::<Result<_>>()?
                } else {
                    ells.map(|ell| online_hp_bound(&q, d, ell)).collect::<Result<_>>()?
                }
            }
            Proposition::HpContractiveAlt => {
                theta_prime = Some(stat.theta_prime());
                ells.map(|ell| hp_bound_contractive_alt(&stat, delta.unwrap(), ell)).collect::<Result<_>>()?
            }
            Proposition::MarkovContractive => {
                ells.map(|ell| markov_bound_contractive(&stat, delta.unwrap(), ell)).collect::<Result<_>>()?
            }
            Proposition::SanovNoNoise => {
                let eps = epsilon.unwrap();
                require_noise_free(inputs, prop)?;
                let mut deltas = Vec::with_capacity(l + 1);
                let values = ells
                    .map(|ell| {
                        let (b, conf) = no_noise_hp_rate(q.zeta, inputs.p, eps, ell, inputs.d0)?;
                        deltas.push(1.0 - conf);
                        Ok(b)
                    })
                    .collect::<Result<Vec<_>>>()?;
                curve_delta = CurveDelta::PerEll(deltas);
                values
            }
            Proposition::NeighborhoodLimsup => {
                let r = neighborhood_radius(q.zeta, q.sup_mu)?;
                vec![r; l + 1]
            }
            _ => unreachable!("contractive propositions are exhausted above"),
        }
    };
    if let Some(bad) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(domain(format!("{prop} evaluated to {} at ell = {bad}", values[bad])));
    }
    Ok(BoundCurve {
        proposition: prop,
        block: inputs.block,
        delta: curve_delta,
        epsilon,
        params,
        theta_prime,
        sigma_mode,
        values,
    })
}

fn require_noise_free(inputs: &BlockInputs, prop: Proposition) -> Result<()> {
    if inputs.sup_nu > 0.0 {
        return Err(Error::Unsupported(format!("{prop} requires zero additive noise")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{Correlation, UpdateModel};
    use crate::operators::{BlockPartition, DriftModel, OnlineOperatorSpec, OperatorSpec};
    use crate::subweibull::NoiseFamily;
    use nalgebra::DMatrix;

    fn config(drift: DriftModel, noise: NoiseSpec) -> IterationConfig {
        let t = OperatorSpec::affine(
            BlockPartition::uniform(2, 1).unwrap(),
            vec![DMatrix::from_element(1, 1, 0.8); 2],
            vec![0.0; 2],
        )
        .unwrap();
        IterationConfig {
            operator: OnlineOperatorSpec::new(t, drift).unwrap(),
            update: UpdateModel::new(vec![0.5, 0.5], Correlation::Independent).unwrap(),
            noise: vec![noise; 2],
            horizon: 50,
            initial_point: vec![1.0, -1.0],
            record_iterates: false,
        }
    }

    #[test]
    fn proposition_names_round_trip() {
        for p in Proposition::ALL {
            assert_eq!(p.name().parse::<Proposition>().unwrap(), p);
        }
        assert!("nope".parse::<Proposition>().is_err());
    }

    #[test]
    fn curves_are_finite_and_tagged() {
        let noise = NoiseSpec::new(NoiseFamily::Gaussian { std: 0.05 }, Schedule::Constant, 1).unwrap();
        let inputs = BlockInputs::from_config(&config(DriftModel::None, noise)).unwrap();
        assert_eq!(inputs[1].d0, 1.0);
        let c = build_curve(&inputs[0], CurveRequest::new(Proposition::HpContractive).with_delta(0.1)).unwrap();
        assert_eq!(c.values.len(), 51);
        assert_eq!(c.theta_prime, Some(0.5));
        assert_eq!(c.delta, CurveDelta::Fixed(0.1));
        assert!((c.params["chi"] - 0.9).abs() < 1e-15);
        assert!(build_curve(&inputs[0], CurveRequest::new(Proposition::HpContractive)).is_err());
        assert!(build_curve(&inputs[0], CurveRequest::new(Proposition::MeanAveragedFpr)).is_err());
        assert!(build_curve(&inputs[0], CurveRequest::new(Proposition::SanovNoNoise).with_epsilon(0.2)).is_err());
    }

    #[test]
    fn zero_drift_online_curves_equal_static() {
        let noise = NoiseSpec::new(NoiseFamily::Gaussian { std: 0.05 }, Schedule::Constant, 1).unwrap();
        let inputs = BlockInputs::from_config(&config(DriftModel::Linear { velocity: vec![0.0, 0.0] }, noise)).unwrap();
        let pairs = [
            (Proposition::MeanContractive, Proposition::MeanOnlineContractive),
            (Proposition::HpContractive, Proposition::HpOnlineContractive),
        ];
        for (s, o) in pairs {
            let a = build_curve(&inputs[0], CurveRequest::new(s).with_delta(0.05)).unwrap();
            let b = build_curve(&inputs[0], CurveRequest::new(o).with_delta(0.05)).unwrap();
            assert_eq!(a.values, b.values);
        }
    }

    #[test]
    fn static_propositions_refuse_drift() {
        let inputs = BlockInputs::from_config(&config(
            DriftModel::Linear { velocity: vec![0.1, 0.0] },
            NoiseSpec::zero(1).unwrap(),
        ))
        .unwrap();
        assert!(build_curve(&inputs[0], CurveRequest::new(Proposition::MeanContractive)).is_err());
        assert!(build_curve(&inputs[0], CurveRequest::new(Proposition::MeanOnlineContractive)).is_ok());
    }

    #[test]
    fn convolution_only_for_full_updates_with_decay() {
        let noise = NoiseSpec::new(NoiseFamily::Gaussian { std: 0.1 }, Schedule::Geometric { ratio: 0.9 }, 1).unwrap();
        let inputs = BlockInputs::from_config(&config(DriftModel::None, noise)).unwrap();
        assert!(!inputs[0].uses_convolution());
        let full = BlockInputs { p: 1.0, ..inputs[0].clone() };
        assert!(full.uses_convolution());
        let conv = full.convolved_nu(0.8);
        let brute: f64 = (0..10).map(|h| 0.8f64.powi(10 - h - 1) * 0.1 * 0.9f64.powi(h)).sum();
        assert!((conv[10] - brute).abs() < 1e-15);
    }
}
