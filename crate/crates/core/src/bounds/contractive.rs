//! Distance bounds for contractive operators, static and time-varying.

use serde::{Deserialize, Serialize};

use super::eta::eta;
use crate::error::{domain, Result};
use crate::subweibull::{c_of_theta, check_delta, log_factor};

/// Per-block constants of a contractive run. Drift fields are zero for
/// static operators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractiveParams {
    pub zeta: f64,
    pub p: f64,
    /// `||x_i^0 - x_i^{*,0}||`.
    pub d0: f64,
    /// Tail exponent of the error norms (0 for zero noise).
    pub theta: f64,
    /// `sup_ell nu_i^ell`.
    pub sup_nu: f64,
    /// `sup_ell E||e_i^ell||`.
    pub sup_mu: f64,
    /// Tail exponent of the drift.
    pub phi: f64,
    /// `sup_ell gamma_i^ell`.
    pub sup_gamma: f64,
    /// `sup_ell E sigma_i^ell`.
    pub sup_mean_sigma: f64,
}

impl ContractiveParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return Err(domain(format!("zeta must lie in (0, 1), got {}", self.zeta)));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(domain(format!("p must lie in (0, 1], got {}", self.p)));
        }
        let nonneg = [self.d0, self.theta, self.sup_nu, self.sup_mu, self.phi, self.sup_gamma, self.sup_mean_sigma];
        if nonneg.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(domain("bound parameters must be finite and nonnegative"));
        }
        Ok(())
    }

    /// The same run with the drift removed.
    pub fn without_drift(&self) -> Self {
        Self { phi: 0.0, sup_gamma: 0.0, sup_mean_sigma: 0.0, ..*self }
    }

    /// Effective rate `1 - p + p zeta`, in `[zeta, 1)`.
    pub fn chi(&self) -> f64 {
        1.0 - self.p + self.p * self.zeta
    }

    /// `max(1/2, theta, phi)`.
    pub fn theta_prime(&self) -> f64 {
        0.5f64.max(self.theta).max(self.phi)
    }
}

/// `(1 - r^ell) / (1 - r)`.
pub(crate) fn geometric_sum(r: f64, ell: usize) -> f64 {
    (1.0 - r.powf(ell as f64)) / (1.0 - r)
}

/// Mean tracking bound
/// `chi^ell d0 + ((1 - chi^ell)/(1 - chi)) (p sup mu + sup E sigma)`.
pub fn online_mean_bound(params: &ContractiveParams, ell: usize) -> f64 {
    let chi = params.chi();
    chi.powf(ell as f64) * params.d0 + geometric_sum(chi, ell) * (params.p * params.sup_mu + params.sup_mean_sigma)
}

/// High-probability tracking bound
/// `log^t(2/delta) c(t) (eta(ell) d0 + ((1 - zeta^ell)/(1 - zeta)) (sup nu + sup gamma / p))`
/// with `t = max(1/2, theta, phi)`.
pub fn online_hp_bound(params: &ContractiveParams, delta: f64, ell: usize) -> Result<f64> {
    let noise = geometric_sum(params.zeta, ell) * (params.sup_nu + params.sup_gamma / params.p);
    hp_with_noise_term(params, delta, ell, noise)
}

/// [`online_hp_bound`] with the error term replaced by
/// `sum_{h<ell} zeta^(ell-h-1) nu^h` (given as `convolved`) plus the drift
/// term; used for decaying error schedules.
pub fn online_hp_bound_convolved(params: &ContractiveParams, delta: f64, ell: usize, convolved: f64) -> Result<f64> {
    let noise = convolved + geometric_sum(params.zeta, ell) * (params.sup_gamma / params.p);
    hp_with_noise_term(params, delta, ell, noise)
}

fn hp_with_noise_term(params: &ContractiveParams, delta: f64, ell: usize, noise: f64) -> Result<f64> {
    check_delta(delta)?;
    let t = params.theta_prime();
    Ok(log_factor(t, delta) * c_of_theta(t) * (eta(params.zeta, params.p, ell) * params.d0 + noise))
}

/// Static mean bound; equal bit-for-bit to [`online_mean_bound`] without drift.
pub fn mean_bound_contractive(params: &ContractiveParams, ell: usize) -> f64 {
    online_mean_bound(&params.without_drift(), ell)
}

/// Static high-probability bound; equal bit-for-bit to [`online_hp_bound`]
/// without drift.
pub fn hp_bound_contractive(params: &ContractiveParams, delta: f64, ell: usize) -> Result<f64> {
    online_hp_bound(&params.without_drift(), delta, ell)
}

/// Alternative high-probability bound built from the mean recursion:
/// `chi^ell d0 + ((1 - chi^ell)/(1 - chi)) sup mu
///  + log^t(2/delta) c(t) (((1 - zeta^ell)/sqrt 2) d0 + 2 ((1 - zeta^ell)/(1 - zeta)) sup nu)`.
pub fn hp_bound_contractive_alt(params: &ContractiveParams, delta: f64, ell: usize) -> Result<f64> {
    check_delta(delta)?;
    let t = params.theta_prime();
    let chi = params.chi();
    let z = params.zeta.powf(ell as f64);
    let mean_part = chi.powf(ell as f64) * params.d0 + geometric_sum(chi, ell) * params.sup_mu;
    let tail = (1.0 - z) / std::f64::consts::SQRT_2 * params.d0 + 2.0 * geometric_sum(params.zeta, ell) * params.sup_nu;
    Ok(mean_part + log_factor(t, delta) * c_of_theta(t) * tail)
}

/// Markov-inequality bound `mean / delta`.
pub fn markov_bound_contractive(params: &ContractiveParams, delta: f64, ell: usize) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(domain(format!("delta must lie in (0, 1], got {delta}")));
    }
    Ok(mean_bound_contractive(params, ell) / delta)
}

/// Asymptotic mean radius `sup mu / (1 - zeta)`.
pub fn neighborhood_radius(zeta: f64, sup_mu: f64) -> Result<f64> {
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(domain(format!("zeta must lie in (0, 1), got {zeta}")));
    }
    Ok(sup_mu / (1.0 - zeta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(zeta: f64, p: f64, d0: f64, nu: f64, mu: f64) -> ContractiveParams {
        ContractiveParams {
            zeta,
            p,
            d0,
            theta: 0.5,
            sup_nu: nu,
            sup_mu: mu,
            phi: 0.0,
            sup_gamma: 0.0,
            sup_mean_sigma: 0.0,
        }
    }

    #[test]
    fn mean_bound_cases() {
        let q = params(0.8, 0.5, 1.0, 0.05, 0.1);
        assert_eq!(mean_bound_contractive(&q, 0), 1.0);
        assert_relative_eq!(q.chi(), 0.9, max_relative = 1e-15);
        assert_relative_eq!(mean_bound_contractive(&q, 5000), 0.5, max_relative = 1e-12);
        let det = params(0.5, 1.0, 3.0, 0.0, 0.0);
        for ell in 0..40 {
            assert_relative_eq!(mean_bound_contractive(&det, ell), 3.0 * 0.5f64.powi(ell as i32), max_relative = 1e-14);
        }
    }

    #[test]
    fn alt_bound_cases() {
        let q = params(0.8, 0.5, 2.0, 0.05, 0.1);
        assert_eq!(hp_bound_contractive_alt(&q, 0.1, 0).unwrap(), 2.0);
        let quiet = params(0.8, 0.5, 2.0, 0.0, 0.0);
        let limit = log_factor(0.5, 0.1) * c_of_theta(0.5) * 2.0 / std::f64::consts::SQRT_2;
        assert_relative_eq!(hp_bound_contractive_alt(&quiet, 0.1, 10_000).unwrap(), limit, max_relative = 1e-12);
    }

    #[test]
    fn markov_is_scaled_mean() {
        let q = params(0.8, 0.5, 1.0, 0.05, 0.04);
        for ell in [0, 10, 100] {
            assert_eq!(markov_bound_contractive(&q, 1.0, ell).unwrap(), mean_bound_contractive(&q, ell));
            assert_relative_eq!(
                markov_bound_contractive(&q, 0.01, ell).unwrap(),
                100.0 * mean_bound_contractive(&q, ell),
                max_relative = 1e-15
            );
        }
    }

    #[test]
    fn radius_cases() {
        assert_eq!(neighborhood_radius(0.5, 0.0).unwrap(), 0.0);
        assert_relative_eq!(neighborhood_radius(0.5, 0.1).unwrap(), 0.2, max_relative = 1e-15);
        assert!(neighborhood_radius(0.999, 0.1).unwrap() > neighborhood_radius(0.99, 0.1).unwrap());
    }

    #[test]
    fn online_reduces_to_static() {
        let q = params(0.8, 0.5, 1.0, 0.05, 0.04);
        for ell in [0, 1, 17, 300] {
            assert_eq!(online_mean_bound(&q, ell), mean_bound_contractive(&q, ell));
            assert_eq!(online_hp_bound(&q, 0.05, ell).unwrap(), hp_bound_contractive(&q, 0.05, ell).unwrap());
        }
    }

    #[test]
    fn online_limits_and_monotonicity() {
        let mut q = params(0.8, 0.5, 1.0, 0.05, 0.04);
        q.sup_mean_sigma = 0.02;
        q.sup_gamma = 0.03;
        q.phi = 0.5;
        let floor = (0.5 * 0.04 + 0.02) / (1.0 - q.chi());
        assert_relative_eq!(online_mean_bound(&q, 10_000), floor, max_relative = 1e-12);
        let slow = ContractiveParams { p: 0.25, ..q };
        for ell in [1, 50, 400] {
            assert!(online_hp_bound(&slow, 0.05, ell).unwrap() > online_hp_bound(&q, 0.05, ell).unwrap());
        }
    }
}
