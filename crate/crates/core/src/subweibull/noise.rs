//! Reference error samplers with certified sub-Weibull parameters for the
//! Euclidean norm of the sampled vector.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Weibull};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::{sw_vector_norm, SubWeibull};
use crate::error::{domain, Result};

/// Distribution of each error component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum NoiseFamily {
    Zero,
    /// Components `N(0, std^2)`.
    Gaussian { std: f64 },
    /// Components `±scale * W` with `W ~ Weibull(1, 1/theta)` and a fair sign.
    Weibull { theta: f64, scale: f64 },
    /// Components uniform on `[-half_width, half_width]`.
    BoundedUniform { half_width: f64 },
}

/// Per-iteration multiplier applied to every draw.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Schedule {
    Constant,
    /// Multiplier `ratio^ell`, `ratio` in (0, 1).
    Geometric { ratio: f64 },
}

impl Schedule {
    pub fn multiplier(&self, ell: usize) -> f64 {
        match self {
            Schedule::Constant => 1.0,
            Schedule::Geometric { ratio } => ratio.powf(ell as f64),
        }
    }
}

/// An error sampler for one block together with its certified norm
/// parameters and analytic norm moments at the base scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    family: NoiseFamily,
    schedule: Schedule,
    dim: usize,
    declared: SubWeibull,
    mean_norm: f64,
    mean_sq_norm: f64,
}

impl NoiseSpec {
    pub fn new(family: NoiseFamily, schedule: Schedule, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(domain("noise dimension must be >= 1"));
        }
        if let Schedule::Geometric { ratio } = schedule {
            if !(ratio > 0.0 && ratio < 1.0) {
                return Err(domain(format!("geometric schedule ratio must lie in (0, 1), got {ratio}")));
            }
        }
        let d = dim as f64;
        let positive = |name: &str, v: f64| -> Result<f64> {
            if v.is_finite() && v > 0.0 {
                Ok(v)
            } else {
                Err(domain(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        let (declared, mean_norm, mean_sq_norm) = match family {
            NoiseFamily::Zero => (SubWeibull::Zero, 0.0, 0.0),
            NoiseFamily::Gaussian { std } => {
                let s = positive("gaussian std", std)?;
                let declared = SubWeibull::new(0.5, s * gaussian_norm_constant(dim))?;
                let mean = s * std::f64::consts::SQRT_2 * (ln_gamma((d + 1.0) / 2.0) - ln_gamma(d / 2.0)).exp();
                (declared, mean, d * s * s)
            }
            NoiseFamily::Weibull { theta, scale } => {
                let theta = positive("weibull theta", theta)?;
                let lambda = positive("weibull scale", scale)?;
                let component = SubWeibull::new(theta, lambda * weibull_moment_constant(theta))?;
                let declared = if dim == 1 { component } else { sw_vector_norm(component, dim)? };
                let mean_sq = d * lambda * lambda * ln_gamma(1.0 + 2.0 * theta).exp();
                // Jensen upper bound on E||e|| beyond one dimension
                let mean = if dim == 1 { lambda * ln_gamma(1.0 + theta).exp() } else { mean_sq.sqrt() };
                (declared, mean, mean_sq)
            }
            NoiseFamily::BoundedUniform { half_width } => {
                let b = positive("uniform half-width", half_width)?;
                let declared = SubWeibull::new(0.0, b * d.sqrt())?;
                let mean_sq = d * b * b / 3.0;
                let mean = if dim == 1 { b / 2.0 } else { mean_sq.sqrt() };
                (declared, mean, mean_sq)
            }
        };
        Ok(Self { family, schedule, dim, declared, mean_norm, mean_sq_norm })
    }

    pub fn zero(dim: usize) -> Result<Self> {
        Self::new(NoiseFamily::Zero, Schedule::Constant, dim)
    }

    /// Replaces the certified parameters, e.g. to build a misdeclared control.
    pub fn with_declared(mut self, declared: SubWeibull) -> Self {
        self.declared = declared;
        self
    }

    pub fn family(&self) -> NoiseFamily {
        self.family
    }

    pub fn schedule(&self) -> Schedule {
        self.schedule
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.family, NoiseFamily::Zero)
    }

    /// Declared parameters of `||e^ell||`.
    pub fn declared_at(&self, ell: usize) -> SubWeibull {
        super::sw_scale(self.declared, self.schedule.multiplier(ell)).unwrap_or(SubWeibull::Zero)
    }

    /// `E ||e^ell||`.
    pub fn mean_norm_at(&self, ell: usize) -> f64 {
        self.mean_norm * self.schedule.multiplier(ell)
    }

    /// `E ||e^ell||^2`.
    pub fn mean_sq_norm_at(&self, ell: usize) -> f64 {
        let m = self.schedule.multiplier(ell);
        self.mean_sq_norm * m * m
    }

    /// Fills `out` with one draw of `e^ell`.
    pub fn sample_into<R: Rng + ?Sized>(&self, ell: usize, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        let m = self.schedule.multiplier(ell);
        match self.family {
            NoiseFamily::Zero => out.fill(0.0),
            NoiseFamily::Gaussian { std } => {
                for v in out.iter_mut() {
                    let z: f64 = StandardNormal.sample(rng);
                    *v = m * std * z;
                }
            }
            NoiseFamily::Weibull { theta, scale } => {
                let w = Weibull::new(1.0, 1.0 / theta).expect("theta validated at construction");
                for v in out.iter_mut() {
                    let mag = scale * w.sample(rng);
                    *v = if rng.random_bool(0.5) { m * mag } else { -m * mag };
                }
            }
            NoiseFamily::BoundedUniform { half_width } => {
                for v in out.iter_mut() {
                    *v = m * rng.random_range(-half_width..=half_width);
                }
            }
        }
    }
}

/// One draw of the error vector at iteration `ell`.
pub fn sample_noise<R: Rng + ?Sized>(spec: &NoiseSpec, ell: usize, rng: &mut R) -> Vec<f64> {
    let mut out = vec![0.0; spec.dim()];
    spec.sample_into(ell, rng, &mut out);
    out
}

/// k values over which sup-type constants are maximized: dense on [1, 64],
/// logarithmic on [64, 1e5].
fn constant_grid() -> impl Iterator<Item = f64> {
    let dense = (0..=63 * 64).map(|j| 1.0 + j as f64 / 64.0);
    let sparse = (1..=400).map(|j| 64.0 * (1e5f64 / 64.0).powf(j as f64 / 400.0));
    dense.chain(sparse)
}

/// `max(1, sup_k ||chi_d||_k / sqrt k)` for the chi distribution with `d`
/// degrees of freedom, so `s * constant` certifies the norm of a
/// `N(0, s^2 I_d)` vector with tail exponent 1/2.
pub fn gaussian_norm_constant(d: usize) -> f64 {
    let d = d as f64;
    let base = ln_gamma(d / 2.0);
    constant_grid()
        .map(|k| {
            let ln_knorm = (0.5 * k * std::f64::consts::LN_2 + ln_gamma((d + k) / 2.0) - base) / k;
            (ln_knorm - 0.5 * k.ln()).exp()
        })
        .fold(1.0, f64::max)
}

/// `sup_k Gamma(1 + k theta)^(1/k) / k^theta`, the scale constant of a unit
/// Weibull variable with shape `1/theta`.
pub fn weibull_moment_constant(theta: f64) -> f64 {
    constant_grid()
        .map(|k| (ln_gamma(1.0 + k * theta) / k - theta * k.ln()).exp())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_family_draws_zero() {
        let spec = NoiseSpec::zero(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_noise(&spec, 7, &mut rng), vec![0.0; 5]);
        assert!(spec.declared_at(0).is_zero());
        assert_eq!(spec.mean_norm_at(0), 0.0);
    }

    #[test]
    fn uniform_support() {
        let spec = NoiseSpec::new(NoiseFamily::BoundedUniform { half_width: 1.0 }, Schedule::Constant, 1)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let v = sample_noise(&spec, 0, &mut rng)[0];
            assert!((-1.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn half_normal_mean() {
        let spec = NoiseSpec::new(NoiseFamily::Gaussian { std: 1.0 }, Schedule::Constant, 1).unwrap();
        assert_relative_eq!(spec.mean_norm_at(0), 0.7978845608028654, max_relative = 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 1_000_000;
        let mean = (0..n).map(|_| sample_noise(&spec, 0, &mut rng)[0].abs()).sum::<f64>() / n as f64;
        assert!((mean - 0.7978845608).abs() < 3e-3, "{mean}");
    }

    #[test]
    fn chi_four_mean() {
        let spec = NoiseSpec::new(NoiseFamily::Gaussian { std: 0.01 }, Schedule::Constant, 4).unwrap();
        // sqrt 2 Gamma(5/2) / Gamma(2) = 3 sqrt(pi) / (2 sqrt 2)
        assert_relative_eq!(spec.mean_norm_at(0), 0.018799712059732504, max_relative = 1e-12);
        assert_relative_eq!(spec.mean_sq_norm_at(0), 4e-4, max_relative = 1e-12);
    }

    #[test]
    fn gaussian_constant_is_one_in_one_dimension() {
        assert_eq!(gaussian_norm_constant(1), 1.0);
        // beyond one dimension the k = 1 term E chi_d dominates
        let c4 = gaussian_norm_constant(4);
        assert_relative_eq!(c4, 1.8799712059732504, max_relative = 1e-12);
    }

    #[test]
    fn weibull_constant_values() {
        // theta = 1: Gamma(1 + k)^(1/k) / k peaks at k = 1 with value 1
        assert_relative_eq!(weibull_moment_constant(1.0), 1.0, max_relative = 1e-12);
        // theta = 2: Gamma(1 + 2k)^(1/k) / k^2 peaks at k = 1 with value 2
        assert_relative_eq!(weibull_moment_constant(2.0), 2.0, max_relative = 1e-12);
        // theta = 1/2: peaks at k = 1 with Gamma(3/2) = sqrt(pi) / 2
        assert_relative_eq!(weibull_moment_constant(0.5), std::f64::consts::PI.sqrt() / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn geometric_schedule_scales_parameters() {
        let spec = NoiseSpec::new(
            NoiseFamily::Gaussian { std: 2.0 },
            Schedule::Geometric { ratio: 0.5 },
            1,
        )
        .unwrap();
        assert_eq!(spec.declared_at(3).nu(), 0.25);
        assert_eq!(spec.mean_sq_norm_at(2), 4.0 / 16.0);
        assert!(NoiseSpec::new(NoiseFamily::Zero, Schedule::Geometric { ratio: 1.0 }, 1).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(NoiseSpec::new(NoiseFamily::Gaussian { std: 0.0 }, Schedule::Constant, 1).is_err());
        assert!(NoiseSpec::new(NoiseFamily::Weibull { theta: 0.0, scale: 1.0 }, Schedule::Constant, 1).is_err());
        assert!(NoiseSpec::new(NoiseFamily::BoundedUniform { half_width: -1.0 }, Schedule::Constant, 1).is_err());
        assert!(NoiseSpec::zero(0).is_err());
    }
}
