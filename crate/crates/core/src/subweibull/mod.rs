//! Sub-Weibull parameter algebra.
//!
//! A random variable `x` is sub-Weibull with tail exponent `theta` and scale
//! `nu` when its k-norms grow at most like `nu * k^theta`:
//!
//! ```text
//! ||x||_k = E[|x|^k]^(1/k) <= nu * k^theta   for every real k >= 1
//! ```
//!
//! `theta = 1/2` covers sub-Gaussian variables, `theta = 1` sub-exponential
//! ones, and `theta = 0` bounded ones. The functions here propagate the pair
//! `(theta, nu)` through scaling, sums, products and powers, and turn a
//! parameter pair into a high-probability magnitude bound.
//!
//! The exactly-zero variable is carried as [`SubWeibull::Zero`] rather than
//! as `nu = 0`, which keeps `nu > 0` an invariant of [`SubWeibullParams`].

mod moments;
mod noise;

pub use moments::{empirical_knorm, moment_grid, moment_ratio, verify_moment_bound, MomentReport};
pub use noise::{
    gaussian_norm_constant, sample_noise, weibull_moment_constant, NoiseFamily, NoiseSpec,
    Schedule,
};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Tail exponent and scale of a non-degenerate sub-Weibull variable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubWeibullParams {
    theta: f64,
    nu: f64,
}

impl SubWeibullParams {
    pub fn new(theta: f64, nu: f64) -> Result<Self> {
        if !(theta.is_finite() && theta >= 0.0) {
            return Err(domain(format!("sub-Weibull theta must be finite and >= 0, got {theta}")));
        }
        if !(nu.is_finite() && nu > 0.0) {
            return Err(domain(format!("sub-Weibull nu must be finite and > 0, got {nu}")));
        }
        Ok(Self { theta, nu })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }
}

/// Either the exactly-zero variable or a proper `(theta, nu)` pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubWeibull {
    Zero,
    Tail(SubWeibullParams),
}

impl SubWeibull {
    pub fn new(theta: f64, nu: f64) -> Result<Self> {
        SubWeibullParams::new(theta, nu).map(SubWeibull::Tail)
    }

    /// Tail exponent; the zero variable reports 0.
    pub fn theta(&self) -> f64 {
        match self {
            SubWeibull::Zero => 0.0,
            SubWeibull::Tail(p) => p.theta,
        }
    }

    /// Scale; the zero variable reports 0.
    pub fn nu(&self) -> f64 {
        match self {
            SubWeibull::Zero => 0.0,
            SubWeibull::Tail(p) => p.nu,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, SubWeibull::Zero)
    }

    /// Whether every variable described by `self` is also described by
    /// `other` (larger exponent and larger scale).
    pub fn is_included_in(&self, other: &SubWeibull) -> bool {
        match (self, other) {
            (SubWeibull::Zero, _) => true,
            (SubWeibull::Tail(_), SubWeibull::Zero) => false,
            (SubWeibull::Tail(a), SubWeibull::Tail(b)) => a.theta <= b.theta && a.nu <= b.nu,
        }
    }

    /// The k-norm envelope `nu * k^theta`.
    pub fn knorm_envelope(&self, k: f64) -> f64 {
        match self {
            SubWeibull::Zero => 0.0,
            SubWeibull::Tail(p) => p.nu * k.powf(p.theta),
        }
    }
}

impl From<SubWeibullParams> for SubWeibull {
    fn from(p: SubWeibullParams) -> Self {
        SubWeibull::Tail(p)
    }
}

/// Constant converting the moment characterization into the tail
/// characterization: `c(theta) = (2e / theta)^theta`, with `c(0) = 1`.
pub fn c_of_theta(theta: f64) -> f64 {
    if theta == 0.0 {
        return 1.0;
    }
    (theta * (2.0 * std::f64::consts::E / theta).ln()).exp()
}

/// Magnitude that `|x|` stays below with probability at least `1 - delta`:
/// `nu * log(2/delta)^theta * c(theta)`.
pub fn hp_bound(p: SubWeibull, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok(match p {
        SubWeibull::Zero => 0.0,
        SubWeibull::Tail(p) => p.nu * log_factor(p.theta, delta) * c_of_theta(p.theta),
    })
}

/// `log(2/delta)^theta`; callers validate `delta`.
pub(crate) fn log_factor(theta: f64, delta: f64) -> f64 {
    (2.0 / delta).ln().powf(theta)
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("confidence parameter delta must lie in (0, 1), got {delta}")))
    }
}

/// Scaling by a real constant: `a x ~ subW(theta, |a| nu)`.
pub fn sw_scale(p: SubWeibull, a: f64) -> Result<SubWeibull> {
    if !a.is_finite() {
        return Err(domain(format!("scale factor must be finite, got {a}")));
    }
    Ok(match p {
        SubWeibull::Zero => SubWeibull::Zero,
        _ if a == 0.0 => SubWeibull::Zero,
        SubWeibull::Tail(p) => {
            let nu = a.abs() * p.nu;
            // underflow of |a| * nu lands on the exact-zero variable
            if nu > 0.0 {
                SubWeibull::Tail(SubWeibullParams { theta: p.theta, nu })
            } else {
                SubWeibull::Zero
            }
        }
    })
}

/// Sum of two possibly dependent variables.
pub fn sw_sum(p1: SubWeibull, p2: SubWeibull) -> SubWeibull {
    match (p1, p2) {
        (SubWeibull::Zero, q) | (q, SubWeibull::Zero) => q,
        (SubWeibull::Tail(a), SubWeibull::Tail(b)) => SubWeibull::Tail(SubWeibullParams {
            theta: a.theta.max(b.theta),
            nu: a.nu + b.nu,
        }),
    }
}

/// Whether the factors of a product may be dependent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dependence {
    Independent,
    Dependent,
}

/// Hölder constant for products of dependent factors,
/// `(t1 + t2)^(t1 + t2) / (t1^t1 t2^t2)`, with `0^0 = 1`.
pub fn dependent_product_constant(theta1: f64, theta2: f64) -> f64 {
    let xlogx = |t: f64| if t == 0.0 { 0.0 } else { t * t.ln() };
    (xlogx(theta1 + theta2) - xlogx(theta1) - xlogx(theta2)).exp()
}

/// Product of two variables.
pub fn sw_product(p1: SubWeibull, p2: SubWeibull, dependence: Dependence) -> SubWeibull {
    match (p1, p2) {
        (SubWeibull::Zero, _) | (_, SubWeibull::Zero) => SubWeibull::Zero,
        (SubWeibull::Tail(a), SubWeibull::Tail(b)) => {
            let constant = match dependence {
                Dependence::Independent => 1.0,
                Dependence::Dependent => dependent_product_constant(a.theta, b.theta),
            };
            SubWeibull::Tail(SubWeibullParams {
                theta: a.theta + b.theta,
                nu: constant * a.nu * b.nu,
            })
        }
    }
}

/// Power `|x|^a` for `a > 0`: `subW(a theta, nu^a max(1, a^(a theta)))`.
pub fn sw_power(p: SubWeibull, a: f64) -> Result<SubWeibull> {
    if !(a.is_finite() && a > 0.0) {
        return Err(domain(format!("exponent must be finite and > 0, got {a}")));
    }
    Ok(match p {
        SubWeibull::Zero => SubWeibull::Zero,
        SubWeibull::Tail(p) => {
            let theta = a * p.theta;
            let nu = p.nu.powf(a) * a.powf(theta).max(1.0);
            SubWeibull::Tail(SubWeibullParams::new(theta, nu)?)
        }
    })
}

/// Centered version `x - E[x]`.
pub fn sw_center(p: SubWeibull) -> SubWeibull {
    match p {
        SubWeibull::Zero => SubWeibull::Zero,
        SubWeibull::Tail(p) => SubWeibull::Tail(SubWeibullParams {
            theta: p.theta,
            nu: 2.0 * p.nu,
        }),
    }
}

/// Centered variable supported on `[a, b]`: `x - E[x] ~ subW(1/2, (b - a)/sqrt 2)`.
pub fn sw_bounded(a: f64, b: f64) -> Result<SubWeibullParams> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(domain(format!("bounded support requires finite a < b, got [{a}, {b}]")));
    }
    SubWeibullParams::new(0.5, (b - a) / std::f64::consts::SQRT_2)
}

/// Euclidean norm of a `d`-vector whose components share the parameters
/// `component`: `subW(theta, 2^theta sqrt(d) nu)`.
pub fn sw_vector_norm(component: SubWeibull, d: usize) -> Result<SubWeibull> {
    if d == 0 {
        return Err(domain("vector dimension must be >= 1"));
    }
    Ok(match component {
        SubWeibull::Zero => SubWeibull::Zero,
        SubWeibull::Tail(p) => SubWeibull::Tail(SubWeibullParams::new(
            p.theta,
            2f64.powf(p.theta) * (d as f64).sqrt() * p.nu,
        )?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sw(theta: f64, nu: f64) -> SubWeibull {
        SubWeibull::new(theta, nu).unwrap()
    }

    #[test]
    fn c_of_theta_values() {
        assert_relative_eq!(c_of_theta(1.0), 2.0 * std::f64::consts::E, max_relative = 1e-15);
        assert_eq!(c_of_theta(0.0), 1.0);
        assert_relative_eq!(c_of_theta(0.5), 3.297442541400256, max_relative = 1e-14);
        // continuity at zero
        assert_relative_eq!(c_of_theta(1e-12), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn hp_bound_values() {
        let delta = 2.0 / std::f64::consts::E.powi(2);
        assert_relative_eq!(
            hp_bound(sw(1.0, 1.0), delta).unwrap(),
            4.0 * std::f64::consts::E,
            max_relative = 1e-14
        );
        assert_eq!(hp_bound(sw(0.0, 5.0), 0.3).unwrap(), 5.0);
        assert_eq!(hp_bound(sw(0.0, 5.0), 1e-9).unwrap(), 5.0);
        // independent mpmath evaluation: 2 * sqrt(log 40) * sqrt(4e)
        assert_relative_eq!(
            hp_bound(sw(0.5, 2.0), 0.05).unwrap(),
            12.66643690229819,
            max_relative = 1e-13
        );
        assert_eq!(hp_bound(SubWeibull::Zero, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn hp_bound_rejects_bad_delta() {
        for d in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(hp_bound(sw(1.0, 1.0), d).is_err(), "delta {d}");
        }
    }

    #[test]
    fn params_reject_invalid() {
        assert!(SubWeibullParams::new(-0.1, 1.0).is_err());
        assert!(SubWeibullParams::new(0.5, 0.0).is_err());
        assert!(SubWeibullParams::new(0.5, f64::INFINITY).is_err());
        assert!(SubWeibullParams::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn scale_rule() {
        assert_eq!(sw_scale(sw(0.5, 1.0), -3.0).unwrap(), sw(0.5, 3.0));
        assert_eq!(sw_scale(sw(1.0, 2.0), 1.0).unwrap(), sw(1.0, 2.0));
        assert_eq!(sw_scale(sw(2.0, 0.5), 4.0).unwrap(), sw(2.0, 2.0));
        assert_eq!(sw_scale(sw(2.0, 0.5), 0.0).unwrap(), SubWeibull::Zero);
        assert!(sw_scale(sw(2.0, 0.5), f64::NAN).is_err());
    }

    #[test]
    fn sum_rule() {
        assert_eq!(sw_sum(sw(0.5, 1.0), sw(1.0, 2.0)), sw(1.0, 3.0));
        assert_eq!(sw_sum(sw(0.7, 1.5), SubWeibull::Zero), sw(0.7, 1.5));
        assert_eq!(sw_sum(sw(1.0, 1.0), sw(1.0, 1.0)), sw(1.0, 2.0));
    }

    #[test]
    fn product_rules() {
        assert_eq!(
            sw_product(sw(0.5, 1.0), sw(0.5, 1.0), Dependence::Independent),
            sw(1.0, 1.0)
        );
        // c(1,1) = 2^2 / (1 * 1) = 4
        assert_eq!(dependent_product_constant(1.0, 1.0), 4.0);
        let dep = sw_product(sw(1.0, 2.0), sw(1.0, 3.0), Dependence::Dependent);
        assert_relative_eq!(dep.theta(), 2.0);
        assert_relative_eq!(dep.nu(), 24.0, max_relative = 1e-14);
        assert_eq!(
            sw_product(sw(0.8, 1.7), sw(0.0, 1.0), Dependence::Independent),
            sw(0.8, 1.7)
        );
        // theta = 0 factor in the dependent constant is taken as 1
        assert_eq!(dependent_product_constant(0.8, 0.0), 1.0);
        assert_relative_eq!(dependent_product_constant(0.5, 0.5), 2.0, max_relative = 1e-15);
        assert_eq!(
            sw_product(sw(1.0, 1.0), SubWeibull::Zero, Dependence::Dependent),
            SubWeibull::Zero
        );
    }

    #[test]
    fn power_rule() {
        let nu = 1.7;
        let sq = sw_power(sw(0.5, nu), 2.0).unwrap();
        assert_relative_eq!(sq.theta(), 1.0);
        // square rule: 4^theta nu^2
        assert_relative_eq!(sq.nu(), 4f64.powf(0.5) * nu * nu, max_relative = 1e-14);
        assert_eq!(sw_power(sw(0.9, 1.3), 1.0).unwrap(), sw(0.9, 1.3));
        let root = sw_power(sw(1.0, 2.0), 0.5).unwrap();
        assert_relative_eq!(root.theta(), 0.5);
        assert_relative_eq!(root.nu(), std::f64::consts::SQRT_2, max_relative = 1e-15);
        assert!(sw_power(sw(1.0, 2.0), 0.0).is_err());
    }

    #[test]
    fn center_and_bounded() {
        assert_eq!(sw_center(sw(1.0, 3.0)), sw(1.0, 6.0));
        assert_eq!(sw_center(sw(0.5, 0.5)), sw(0.5, 1.0));
        assert_eq!(sw_center(SubWeibull::Zero), SubWeibull::Zero);

        let b = sw_bounded(-1.0, 1.0).unwrap();
        assert_eq!(b.theta(), 0.5);
        assert_relative_eq!(b.nu(), std::f64::consts::SQRT_2, max_relative = 1e-15);
        let b = sw_bounded(0.0, std::f64::consts::SQRT_2).unwrap();
        assert_relative_eq!(b.nu(), 1.0, max_relative = 1e-15);
        let b = sw_bounded(0.0, 0.001).unwrap();
        assert_relative_eq!(b.nu(), 0.001 / std::f64::consts::SQRT_2, max_relative = 1e-15);
        assert!(sw_bounded(1.0, 1.0).is_err());
        assert!(sw_bounded(2.0, 1.0).is_err());
    }

    #[test]
    fn vector_norm_rule() {
        let v = sw_vector_norm(sw(0.5, 1.0), 4).unwrap();
        assert_relative_eq!(v.nu(), 2.0 * std::f64::consts::SQRT_2, max_relative = 1e-15);
        let v = sw_vector_norm(sw(0.3, 1.1), 1).unwrap();
        assert_relative_eq!(v.nu(), 2f64.powf(0.3) * 1.1, max_relative = 1e-15);
        assert_eq!(sw_vector_norm(sw(1.0, 1.0), 9).unwrap(), sw(1.0, 6.0));
        assert!(sw_vector_norm(sw(1.0, 1.0), 0).is_err());
    }

    proptest! {
        #[test]
        fn scale_round_trip(theta in 0.0f64..3.0, nu in 1e-3f64..1e3, a in prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3]) {
            let p = sw(theta, nu);
            let back = sw_scale(sw_scale(p, a).unwrap(), 1.0 / a).unwrap();
            prop_assert_eq!(back.theta(), theta);
            prop_assert!(((back.nu() - nu) / nu).abs() <= 4.0 * f64::EPSILON);
        }

        #[test]
        fn hp_bound_monotone(theta in 0.0f64..2.0, nu in 1e-3f64..10.0, d1 in 1e-6f64..0.7, d2 in 1e-6f64..0.7) {
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            let p = sw(theta, nu);
            // nonincreasing in delta
            prop_assert!(hp_bound(p, lo).unwrap() >= hp_bound(p, hi).unwrap());
            // nondecreasing in nu
            prop_assert!(hp_bound(sw(theta, nu * 1.5), lo).unwrap() >= hp_bound(p, lo).unwrap());
            // nondecreasing in theta on [0, 2] whenever delta < 2/e
            if lo < 2.0 / std::f64::consts::E {
                let t2 = (theta + 0.25).min(2.0);
                prop_assert!(hp_bound(sw(t2, nu), lo).unwrap() >= hp_bound(p, lo).unwrap() * (1.0 - 1e-14));
            }
        }

        #[test]
        fn inclusion_is_monotone(theta in 0.0f64..2.0, nu in 1e-3f64..10.0, dt in 0.0f64..1.0, dn in 0.0f64..1.0) {
            let p = sw(theta, nu);
            let q = sw(theta + dt, nu + dn);
            prop_assert!(p.is_included_in(&q));
            for k in [1.0, 2.5, 8.0] {
                prop_assert!(p.knorm_envelope(k) <= q.knorm_envelope(k));
            }
        }
    }
}
