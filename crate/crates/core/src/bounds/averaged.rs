//! Cumulative fixed-point-residual bounds for averaged operators.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::subweibull::{c_of_theta, check_delta, log_factor};

/// Per-block constants of an averaged run. Drift fields are zero for static
/// operators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragedParams {
    pub alpha: f64,
    pub p: f64,
    /// `||x_i^0 - x_i^{*,0}||`.
    pub d0: f64,
    /// `diam(D_i)`.
    pub diam: f64,
    pub theta: f64,
    pub sup_nu: f64,
    pub sup_mu: f64,
    /// `sup_ell E||e_i^ell||^2`.
    pub sup_mean_sq: f64,
    pub phi: f64,
    pub sup_gamma: f64,
    pub sup_mean_sigma: f64,
    /// `sup_ell E (sigma_i^ell)^2`.
    pub sup_mean_sq_sigma: f64,
}

impl AveragedParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(domain(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(domain(format!("p must lie in (0, 1], got {}", self.p)));
        }
        let nonneg = [
            self.d0,
            self.diam,
            self.theta,
            self.sup_nu,
            self.sup_mu,
            self.sup_mean_sq,
            self.phi,
            self.sup_gamma,
            self.sup_mean_sigma,
            self.sup_mean_sq_sigma,
        ];
        if nonneg.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(domain("bound parameters must be finite and nonnegative"));
        }
        Ok(())
    }

    pub fn without_drift(&self) -> Self {
        Self { phi: 0.0, sup_gamma: 0.0, sup_mean_sigma: 0.0, sup_mean_sq_sigma: 0.0, ..*self }
    }

    /// `alpha / (1 - alpha)`.
    pub fn prefactor(&self) -> f64 {
        self.alpha / (1.0 - self.alpha)
    }

    /// `2 max(theta, phi)`, the exponent of the squared-error terms.
    pub fn theta_prime(&self) -> f64 {
        2.0 * self.theta.max(self.phi)
    }
}

/// Mean cumulative FPR bound
/// `(alpha/(1-alpha)) (d0^2/(ell+1) + p (E||e||^2 + 2 D mu) + E sigma^2 + 2 D E sigma)`.
pub fn online_mean_fpr_bound(params: &AveragedParams, ell: usize) -> f64 {
    let d = params.diam;
    let floor = params.p * (params.sup_mean_sq + 2.0 * d * params.sup_mu)
        + params.sup_mean_sq_sigma
        + 2.0 * d * params.sup_mean_sigma;
    params.prefactor() * (params.d0 * params.d0 / (ell + 1) as f64 + floor)
}

/// High-probability cumulative FPR bound
/// `(alpha/(1-alpha)) (d0^2/(ell+1) + log^t(2/delta) c(t) (2^t (nu^2 + gamma^2) + 2 D (nu + gamma)))`
/// with `t = 2 max(theta, phi)`; `2^t` is the square-rule constant of
/// both squared terms.
pub fn online_hp_fpr_bound(params: &AveragedParams, delta: f64, ell: usize) -> Result<f64> {
    check_delta(delta)?;
    let t = params.theta_prime();
    let (nu, gamma, d) = (params.sup_nu, params.sup_gamma, params.diam);
    let noise = 2f64.powf(t) * (nu * nu + gamma * gamma) + 2.0 * d * (nu + gamma);
    Ok(params.prefactor() * (params.d0 * params.d0 / (ell + 1) as f64 + log_factor(t, delta) * c_of_theta(t) * noise))
}

/// Static mean bound; equal bit-for-bit to [`online_mean_fpr_bound`]
/// without drift.
pub fn mean_fpr_bound(params: &AveragedParams, ell: usize) -> f64 {
    online_mean_fpr_bound(&params.without_drift(), ell)
}

/// Static high-probability bound; equal bit-for-bit to
/// [`online_hp_fpr_bound`] without drift.
pub fn hp_fpr_bound(params: &AveragedParams, delta: f64, ell: usize) -> Result<f64> {
    online_hp_fpr_bound(&params.without_drift(), delta, ell)
}
