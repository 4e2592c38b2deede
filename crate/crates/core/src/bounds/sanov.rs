//! Noise-free rates holding with probability given by a large-deviation
//! bound on the binomial update count.

use crate::error::{domain, Result};

fn check(p: f64, eps: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(domain(format!("p must lie in (0, 1], got {p}")));
    }
    if !(eps > 0.0 && eps <= p) {
        return Err(domain(format!("epsilon must lie in (0, p] = (0, {p}], got {eps}")));
    }
    if p == 1.0 && eps != 1.0 {
        return Err(domain("with p = 1 only epsilon = 1 is admissible"));
    }
    Ok(())
}

/// Kullback-Leibler divergence `D(p - eps || p)` between Bernoulli laws,
/// with `0 log 0 = 0`.
pub fn bernoulli_kl(p: f64, eps: f64) -> Result<f64> {
    check(p, eps)?;
    let q = p - eps;
    let a = if q == 0.0 { 0.0 } else { q * (-eps / p).ln_1p() };
    let b = if p == 1.0 { 0.0 } else { (1.0 - q) * (eps / (1.0 - p)).ln_1p() };
    Ok(a + b)
}

/// `exp(-ell D(p - eps || p))`, an upper bound on `P(beta(ell) < (p - eps) ell)`.
/// For `p = 1` (and so `eps = 1`) the update count is deterministic and the
/// value is 0 for every `ell >= 1`.
pub fn sanov_delta(p: f64, eps: f64, ell: usize) -> Result<f64> {
    check(p, eps)?;
    if ell == 0 {
        return Ok(1.0);
    }
    if p == 1.0 {
        return Ok(0.0);
    }
    if eps == p {
        // D(0 || p) = -log(1 - p), so the bound is the probability of no update
        return Ok(match i32::try_from(ell) {
            Ok(n) => (1.0 - p).powi(n),
            Err(_) => (1.0 - p).powf(ell as f64),
        });
    }
    Ok((-(ell as f64) * bernoulli_kl(p, eps)?).exp())
}

/// Contractive noise-free rate `zeta^(ell (p - eps)) d0` and its confidence
/// `1 - delta(eps, ell)`.
pub fn no_noise_hp_rate(zeta: f64, p: f64, eps: f64, ell: usize, d0: f64) -> Result<(f64, f64)> {
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(domain(format!("zeta must lie in (0, 1), got {zeta}")));
    }
    let delta = sanov_delta(p, eps, ell)?;
    Ok((zeta.powf(ell as f64 * (p - eps)) * d0, 1.0 - delta))
}

/// Averaged noise-free rate `(alpha/(1-alpha)) d0^2 / ((ell+1)(p - eps))`
/// for the squared residual, with confidence `1 - delta(eps, ell + 1)`.
pub fn no_noise_hp_rate_averaged(alpha: f64, p: f64, eps: f64, ell: usize, d0: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let delta = sanov_delta(p, eps, ell + 1)?;
    if p - eps <= 0.0 {
        return Err(domain("averaged noise-free rate needs epsilon < p"));
    }
    Ok((alpha / (1.0 - alpha) * d0 * d0 / ((ell + 1) as f64 * (p - eps)), 1.0 - delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use statrs::function::factorial::ln_binomial;

    /// `P(beta < (p - eps) ell)` for `beta ~ Binomial(ell, p)` by summation.
    fn lower_tail(p: f64, eps: f64, ell: u64) -> f64 {
        let cut = (p - eps) * ell as f64;
        (0..=ell)
            .filter(|j| (*j as f64) < cut)
            .map(|j| (ln_binomial(ell, j) + j as f64 * p.ln() + (ell - j) as f64 * (1.0 - p).ln()).exp())
            .sum()
    }

    #[test]
    fn full_deviation_is_point_mass() {
        for ell in 0..60 {
            let d = sanov_delta(0.5, 0.5, ell).unwrap();
            assert_eq!(d, 0.5f64.powi(ell as i32));
        }
    }

    #[test]
    fn dominates_binomial_tail() {
        assert_eq!(sanov_delta(0.3, 0.1, 0).unwrap(), 1.0);
        let d = sanov_delta(0.3, 0.1, 100).unwrap();
        assert!((d - 0.0762903).abs() < 1e-6, "{d}");
        // P(beta <= 20) for Binomial(100, 0.3), evaluated independently
        let exact: f64 = (0..=20u64)
            .map(|j| (ln_binomial(100, j) + j as f64 * 0.3f64.ln() + (100 - j) as f64 * 0.7f64.ln()).exp())
            .sum();
        assert!((exact - 0.0164629).abs() < 1e-6);
        assert!(d >= exact);
        for (p, eps) in [(0.2, 0.05), (0.5, 0.25), (0.9, 0.3)] {
            for ell in [1u64, 10, 100, 500] {
                assert!(sanov_delta(p, eps, ell as usize).unwrap() >= lower_tail(p, eps, ell));
            }
        }
    }

    #[test]
    fn domain_errors() {
        assert!(sanov_delta(0.5, 0.0, 3).is_err());
        assert!(sanov_delta(0.5, 0.6, 3).is_err());
        assert!(sanov_delta(1.0, 0.5, 3).is_err());
        assert_eq!(sanov_delta(1.0, 1.0, 3).unwrap(), 0.0);
        assert!(no_noise_hp_rate_averaged(0.5, 0.5, 0.5, 3, 1.0).is_err());
    }

    #[test]
    fn rates() {
        let (b, c) = no_noise_hp_rate(0.9, 0.5, 0.5, 40, 3.0).unwrap();
        assert_eq!(b, 3.0);
        assert!(c < 1.0);
        let (_, c1) = no_noise_hp_rate(0.9, 0.5, 0.2, 10, 1.0).unwrap();
        let (_, c2) = no_noise_hp_rate(0.9, 0.5, 0.2, 1000, 1.0).unwrap();
        assert!(c2 > c1 && c2 > 1.0 - 1e-15);
        let (b, _) = no_noise_hp_rate_averaged(0.5, 0.5, 0.25, 9, 2.0).unwrap();
        assert_relative_eq!(b, 4.0 / (10.0 * 0.25), max_relative = 1e-15);
    }
}
