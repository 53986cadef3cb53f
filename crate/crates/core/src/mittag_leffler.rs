//! One-, two- and three-parameter (Prabhakar) Mittag-Leffler functions on
//! the real line.
//!
//! ```text
//! E^ρ_{α,β}(z) = Σ_k (ρ)_k / Γ(αk + β) · z^k / k!
//! ```
//!
//! The series is summed directly with Neumaier compensation. Summation
//! stops once `|t_k| · max(1, |z|/(k+1)) < tol` on a non-increasing term.
//! There is no asymptotic branch: when the alternating series loses too
//! much to cancellation (estimated as `ε · Σ|t_k|`), or the term cap is
//! reached, evaluation fails with [`MlError::NonConvergence`] instead of
//! returning a silently inaccurate value.

use thiserror::Error;

/// Default absolute tolerance on the series tail.
pub const DEFAULT_TOL: f64 = 1e-13;
/// Default cap on the number of series terms.
pub const DEFAULT_MAX_TERMS: usize = 10_000;
/// Default bound on the rounding error accumulated by cancellation,
/// relative to `max(1, |E|)`.
pub const DEFAULT_MAX_ROUNDING: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MlError {
    #[error("invalid Mittag-Leffler parameters: {0}")]
    InvalidParams(String),
    #[error("Mittag-Leffler series did not converge at z = {z} ({reason})")]
    NonConvergence { z: f64, reason: String },
}

/// Parameters `(α, β, ρ)` of the Prabhakar function `E^ρ_{α,β}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlParams {
    alpha: f64,
    beta: f64,
    rho: f64,
}

impl MlParams {
    pub fn new(alpha: f64, beta: f64, rho: f64) -> Result<Self, MlError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(MlError::InvalidParams(format!("alpha = {alpha} must be > 0")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(MlError::InvalidParams(format!("beta = {beta} must be > 0")));
        }
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(MlError::InvalidParams(format!("rho = {rho} must be >= 0")));
        }
        Ok(Self { alpha, beta, rho })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

/// Series controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlConfig {
    pub tol: f64,
    pub max_terms: usize,
    pub max_rounding: f64,
}

impl Default for MlConfig {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_terms: DEFAULT_MAX_TERMS,
            max_rounding: DEFAULT_MAX_ROUNDING,
        }
    }
}

/// Rising factorial `(γ)_k = γ(γ+1)⋯(γ+k−1)`, with `(γ)_0 = 1`.
///
/// Overflows to `±inf` for large arguments.
pub fn pochhammer(gamma: f64, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (gamma + f64::from(i)))
}

/// Gamma function via the platform libm.
pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// Natural log of `|Γ(x)|` via the platform libm.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

#[derive(Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `|term|` of `coef · z^k / Γ(αk+β)`, with its sign, falling back to
/// log-space once the direct product overflows.
fn series_term(coef: f64, z: f64, k: u32, alpha: f64, beta: f64) -> f64 {
    if coef == 0.0 {
        return 0.0;
    }
    let arg = alpha * f64::from(k) + beta;
    let zk = z.powi(k as i32);
    let g = gamma(arg);
    if g.is_finite() && zk.is_finite() && coef.is_finite() {
        return coef * zk / g;
    }
    let sign = coef.signum() * if z < 0.0 && k % 2 == 1 { -1.0 } else { 1.0 };
    let log_mag = coef.abs().ln() + f64::from(k) * z.abs().ln() - ln_gamma(arg);
    sign * log_mag.exp()
}

/// Log of `(ρ)_k / k!` for large `k`, where the direct recurrence overflows.
fn ln_prabhakar_coef(rho: f64, k: u32) -> f64 {
    ln_gamma(rho + f64::from(k)) - ln_gamma(rho) - ln_gamma(f64::from(k) + 1.0)
}

/// Three-parameter Mittag-Leffler function `E^ρ_{α,β}(z)` with explicit
/// series controls.
pub fn ml_prabhakar_with(p: MlParams, z: f64, cfg: &MlConfig) -> Result<f64, MlError> {
    let MlParams { alpha, beta, rho } = p;
    if z.is_nan() {
        return Err(MlError::NonConvergence { z, reason: "argument is NaN".into() });
    }
    if z == 0.0 || rho == 0.0 {
        return Ok(1.0 / gamma(beta));
    }

    let mut acc = Neumaier::default();
    let mut abs_sum = 0.0;
    // (ρ)_k / k!; exactly 1 when ρ = 1
    let mut coef = 1.0;
    let mut prev = f64::INFINITY;
    for k in 0..cfg.max_terms as u32 {
        if k > 0 && rho != 1.0 {
            coef *= (rho + f64::from(k) - 1.0) / f64::from(k);
            if !coef.is_finite() {
                coef = ln_prabhakar_coef(rho, k).exp();
            }
        }
        let term = series_term(coef, z, k, alpha, beta);
        if !term.is_finite() {
            return Err(MlError::NonConvergence { z, reason: "series term overflowed".into() });
        }
        acc.add(term);
        abs_sum += term.abs();
        let mag = term.abs();
        let tail = mag * f64::max(1.0, z.abs() / (f64::from(k) + 1.0));
        let negligible = tail <= 0.5 * f64::EPSILON * acc.total().abs() || tail == 0.0;
        if tail < cfg.tol && negligible && mag <= prev {
            let value = acc.total();
            let rounding = f64::EPSILON * abs_sum;
            if rounding > cfg.max_rounding * f64::max(1.0, value.abs()) {
                return Err(MlError::NonConvergence {
                    z,
                    reason: format!(
                        "cancellation: rounding bound {rounding:.3e} exceeds {:.1e}",
                        cfg.max_rounding
                    ),
                });
            }
            return Ok(value);
        }
        prev = mag;
    }
    Err(MlError::NonConvergence {
        z,
        reason: format!("tail bound not met within {} terms", cfg.max_terms),
    })
}

/// Three-parameter (Prabhakar) Mittag-Leffler function with default controls.
pub fn ml_prabhakar(p: MlParams, z: f64) -> Result<f64, MlError> {
    ml_prabhakar_with(p, z, &MlConfig::default())
}

/// Two-parameter Mittag-Leffler function `E_{α,β}(z)`.
pub fn ml_two(alpha: f64, beta: f64, z: f64) -> Result<f64, MlError> {
    ml_prabhakar(MlParams::new(alpha, beta, 1.0)?, z)
}

/// One-parameter Mittag-Leffler function `E_α(z)`.
pub fn ml_one(alpha: f64, z: f64) -> Result<f64, MlError> {
    ml_two(alpha, 1.0, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, PI};

    #[test]
    fn pochhammer_values() {
        assert_eq!(pochhammer(2.5, 0), 1.0);
        assert_eq!(pochhammer(3.0, 4), 360.0);
        assert_eq!(pochhammer(1.0, 6), 720.0);
        assert!(pochhammer(10.0, 400).is_infinite());
    }

    #[test]
    fn params_are_validated() {
        assert!(MlParams::new(0.0, 1.0, 1.0).is_err());
        assert!(MlParams::new(0.5, -1.0, 1.0).is_err());
        assert!(MlParams::new(0.5, 1.0, -0.1).is_err());
        assert!(MlParams::new(0.5, 1.0, 0.0).is_ok());
    }

    #[test]
    fn prabhakar_at_zero_is_leading_term() {
        let p = MlParams::new(0.7, 1.3, 1.0).unwrap();
        assert_eq!(ml_prabhakar(p, 0.0).unwrap(), 1.0 / gamma(1.3));
    }

    #[test]
    fn prabhakar_rho_two_is_exp_times_one_plus_z() {
        // E^2_{1,1}(z) = e^z (1 + z); the 200-term partial sum is the oracle
        let mut oracle = 0.0;
        let mut t = 1.0;
        for k in 0..200 {
            if k > 0 {
                t *= (1.0 + f64::from(k)) / f64::from(k) / f64::from(k);
            }
            oracle += t;
        }
        let p = MlParams::new(1.0, 1.0, 2.0).unwrap();
        let v = ml_prabhakar(p, 1.0).unwrap();
        assert!((v - 2.0 * E).abs() < 1e-13);
        assert!((v - oracle).abs() < 1e-13);
    }

    #[test]
    fn half_order_matches_erfc_identity() {
        // E_{1/2}(z) = exp(z²) erfc(−z)
        let oracle = E * libm::erfc(1.0);
        let p = MlParams::new(0.5, 1.0, 1.0).unwrap();
        assert!((ml_prabhakar(p, -1.0).unwrap() - oracle).abs() < 1e-13);
        for z in [-2.0f64, -0.5, 0.3, 1.5] {
            let want = (z * z).exp() * libm::erfc(-z);
            assert!((ml_one(0.5, z).unwrap() - want).abs() < 1e-12 * want.max(1.0), "z={z}");
        }
    }

    #[test]
    fn two_parameter_examples() {
        assert!((ml_two(1.0, 2.0, 1.0).unwrap() - (E - 1.0)).abs() < 1e-14);
        let x = PI / 2.0;
        assert!(ml_two(2.0, 1.0, -x * x).unwrap().abs() < 1e-10);
        assert_eq!(ml_two(0.9, 1.1, 0.0).unwrap(), 1.0 / gamma(1.1));
    }

    #[test]
    fn one_parameter_examples() {
        assert_eq!(ml_one(1.0, 1.0).unwrap(), E);
        assert_eq!(ml_one(0.5, 0.0).unwrap(), 1.0);
        // 500-term 50-digit brute force series
        let v = ml_one(0.6, -2.0).unwrap();
        assert!(v > 0.0 && v < 1.0);
        assert!((v - 0.235_571_031_111_827_3).abs() < 1e-13);
    }

    #[test]
    fn prabhakar_against_frozen_high_precision_values() {
        // 500-term partial sums at 50 significant digits
        let cases = [
            (0.7, 1.3, 2.0, -1.5, 0.099_877_910_481_726_79),
            (0.5, 1.5, 2.0, -1.0, 0.273_212_014_783_898_57),
            (0.4, 1.2, 0.5, 2.0, 84.292_033_767_468_92),
        ];
        for (a, b, r, z, want) in cases {
            let v = ml_prabhakar(MlParams::new(a, b, r).unwrap(), z).unwrap();
            assert!((v - want).abs() < 1e-12 * want.abs().max(1.0), "{a} {b} {r} {z}: {v}");
        }
    }

    #[test]
    fn rho_zero_collapses() {
        let p = MlParams::new(0.5, 2.0, 0.0).unwrap();
        assert_eq!(ml_prabhakar(p, 3.0).unwrap(), 1.0);
    }

    #[test]
    fn catastrophic_cancellation_is_reported() {
        let err = ml_one(0.5, -8.0).unwrap_err();
        assert!(matches!(err, MlError::NonConvergence { .. }), "{err}");
        assert!(ml_one(1.0, -60.0).is_err());
    }

    #[test]
    fn term_cap_is_reported() {
        let cfg = MlConfig { max_terms: 3, ..MlConfig::default() };
        let p = MlParams::new(1.0, 1.0, 1.0).unwrap();
        assert!(ml_prabhakar_with(p, 2.0, &cfg).is_err());
    }

    #[test]
    fn large_positive_argument_uses_log_space_terms() {
        // E_1(300) = e^300 is finite; terms pass through the overflow branch
        let v = ml_one(1.0, 300.0).unwrap();
        assert!(((v - 300f64.exp()) / v).abs() < 1e-12);
    }
}
