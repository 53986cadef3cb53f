//! Riemann-Liouville integral, Atangana-Baleanu integral and ABC derivative
//! on a uniform grid.
//!
//! Both integrals use the product trapezoidal rule: the data are
//! interpolated piecewise linearly and multiplied against the weakly
//! singular kernel `(τ_n − σ)^{α−1}`, with the moments integrated in
//! closed form. The ABC derivative replaces `ω′` by the slope on each
//! cell and integrates the Mittag-Leffler kernel exactly through
//!
//! ```text
//! ∫₀^x E_α(−μ u^α) du = x · E_{α,2}(−μ x^α),   μ = α / (1 − α).
//! ```

use thiserror::Error;

use crate::mittag_leffler::{self, MlError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OperatorError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid operator configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected} samples, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    MittagLeffler(#[from] MlError),
}

/// Uniform mesh `τ_j = jT/N`, `j = 0..=N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    t_final: f64,
    n: usize,
}

impl Grid {
    pub fn new(t_final: f64, n: usize) -> Result<Self, OperatorError> {
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(OperatorError::InvalidGrid(format!("T = {t_final} must be positive")));
        }
        if n == 0 {
            return Err(OperatorError::InvalidGrid("N must be at least 1".into()));
        }
        Ok(Self { t_final, n })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    /// Number of intervals.
    pub fn intervals(&self) -> usize {
        self.n
    }

    /// Number of nodes, `N + 1`.
    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.t_final / self.n as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        if j == self.n {
            self.t_final
        } else {
            j as f64 * self.t_final / self.n as f64
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|j| self.node(j)).collect()
    }

    /// Samples `f` at every node.
    pub fn sample<E>(&self, mut f: impl FnMut(f64) -> Result<f64, E>) -> Result<Vec<f64>, E> {
        (0..=self.n).map(|j| f(self.node(j))).collect()
    }

    fn check(&self, samples: &[f64]) -> Result<(), OperatorError> {
        if samples.len() != self.len() {
            return Err(OperatorError::DimensionMismatch { expected: self.len(), found: samples.len() });
        }
        Ok(())
    }
}

/// Choice of the normalization function `B(α)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// `B(α) = 1`.
    #[default]
    Unit,
    /// `B(α) = 1 − α + α/Γ(α)`.
    AtanganaBaleanu,
}

impl Normalization {
    pub fn value(self, alpha: f64) -> f64 {
        match self {
            Normalization::Unit => 1.0,
            Normalization::AtanganaBaleanu => {
                if alpha == 0.0 {
                    1.0
                } else {
                    1.0 - alpha + alpha / mittag_leffler::gamma(alpha)
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Normalization::Unit => "UNIT",
            Normalization::AtanganaBaleanu => "AB",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "UNIT" => Some(Normalization::Unit),
            "AB" => Some(Normalization::AtanganaBaleanu),
            _ => None,
        }
    }
}

/// Coefficient in front of the memory integral of the equivalent
/// integral equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelConvention {
    /// `α / (B(α) Γ(α))`, consistent with the AB integral.
    #[default]
    Gamma,
    /// `α / (B(α) (1 − α))`, the literal hybrid integral equation.
    PaperHybrid,
}

impl KernelConvention {
    pub fn name(self) -> &'static str {
        match self {
            KernelConvention::Gamma => "GAMMA",
            KernelConvention::PaperHybrid => "PAPER_HYBRID",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "GAMMA" => Some(KernelConvention::Gamma),
            "PAPER_HYBRID" => Some(KernelConvention::PaperHybrid),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorConfig {
    alpha: f64,
    pub normalization: Normalization,
    pub kernel: KernelConvention,
}

impl OperatorConfig {
    pub fn new(alpha: f64) -> Result<Self, OperatorError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(OperatorError::InvalidConfig(format!("alpha = {alpha} must lie in (0, 1)")));
        }
        Ok(Self { alpha, normalization: Normalization::Unit, kernel: KernelConvention::Gamma })
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn with_kernel(mut self, kernel: KernelConvention) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `B(α)`.
    pub fn b(&self) -> f64 {
        self.normalization.value(self.alpha)
    }

    /// Decay rate `μ = α/(1−α)` of the ABC kernel.
    pub fn mu(&self) -> f64 {
        self.alpha / (1.0 - self.alpha)
    }

    /// `B(α)/(1−α)`, the ABC derivative prefactor.
    pub fn derivative_scale(&self) -> f64 {
        self.b() / (1.0 - self.alpha)
    }

    /// `(1−α)/B(α)`, the local term of the AB integral.
    pub fn local_coefficient(&self) -> f64 {
        (1.0 - self.alpha) / self.b()
    }

    /// Coefficient `c_α` multiplying `∫₀^τ (τ−σ)^{α−1} g(σ) dσ`.
    pub fn memory_coefficient(&self) -> f64 {
        let a = self.alpha;
        match self.kernel {
            KernelConvention::Gamma => a / (self.b() * mittag_leffler::gamma(a)),
            KernelConvention::PaperHybrid => a / (self.b() * (1.0 - a)),
        }
    }
}

/// Product-trapezoid weights for `∫₀^{τ_n} (τ_n − σ)^{α−1} φ(σ) dσ`.
///
/// With `p = α + 1` and `k = n − j`, the weight of `φ_j` is
/// `h^α/(α p)` times
///
/// ```text
/// j = 0        : (n−1)^p − (n−1−α) n^α
/// 0 < j < n    : (k+1)^p − 2 k^p + (k−1)^p
/// j = n        : 1
/// ```
#[derive(Debug, Clone)]
pub struct RlWeights {
    grid: Grid,
    alpha: f64,
    scale: f64,
    interior: Vec<f64>,
    first: Vec<f64>,
}

impl RlWeights {
    pub fn new(grid: Grid, alpha: f64) -> Result<Self, OperatorError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(OperatorError::InvalidConfig(format!("alpha = {alpha} must lie in (0, 1)")));
        }
        let n = grid.intervals();
        let p = alpha + 1.0;
        let pw = |k: usize| (k as f64).powf(p);
        let mut interior = vec![0.0; n + 1];
        for (k, w) in interior.iter_mut().enumerate().skip(1) {
            *w = pw(k + 1) - 2.0 * pw(k) + pw(k - 1);
        }
        let mut first = vec![0.0; n + 1];
        for (m, w) in first.iter_mut().enumerate().skip(1) {
            let mf = m as f64;
            *w = (mf - 1.0).powf(p) - (mf - 1.0 - alpha) * mf.powf(alpha);
        }
        let scale = grid.step().powf(alpha) / (alpha * p);
        Ok(Self { grid, alpha, scale, interior, first })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Full weight row for node `n` (length `n + 1`), scale included.
    pub fn row(&self, n: usize) -> Vec<f64> {
        if n == 0 {
            return vec![0.0];
        }
        let mut row = Vec::with_capacity(n + 1);
        row.push(self.scale * self.first[n]);
        for j in 1..n {
            row.push(self.scale * self.interior[n - j]);
        }
        row.push(self.scale);
        row
    }

    /// Node values of `∫₀^{τ_n} (τ_n − σ)^{α−1} φ(σ) dσ`, without `1/Γ(α)`.
    pub fn convolve(&self, samples: &[f64]) -> Result<Vec<f64>, OperatorError> {
        self.grid.check(samples)?;
        let n_max = self.grid.intervals();
        let mut out = vec![0.0; n_max + 1];
        for (n, slot) in out.iter_mut().enumerate().skip(1) {
            let mut acc = self.first[n] * samples[0] + samples[n];
            for j in 1..n {
                acc += self.interior[n - j] * samples[j];
            }
            *slot = self.scale * acc;
        }
        Ok(out)
    }
}

/// Riemann-Liouville integral `(1/Γ(α)) ∫₀^τ (τ−σ)^{α−1} ω(σ) dσ` at every
/// node; `output[0] = 0`.
pub fn rl_integral(samples: &[f64], grid: Grid, alpha: f64) -> Result<Vec<f64>, OperatorError> {
    let weights = RlWeights::new(grid, alpha)?;
    let inv_gamma = 1.0 / mittag_leffler::gamma(alpha);
    let mut out = weights.convolve(samples)?;
    out.iter_mut().for_each(|v| *v *= inv_gamma);
    Ok(out)
}

/// Atangana-Baleanu integral `(1−α)/B · ω + α/B · I^α ω`.
///
/// Unlike the other two operators this is nonzero at `τ = 0`: the local
/// term contributes `(1−α)/B · ω_0`.
pub fn ab_integral(samples: &[f64], grid: Grid, cfg: &OperatorConfig) -> Result<Vec<f64>, OperatorError> {
    let rl = rl_integral(samples, grid, cfg.alpha())?;
    let local = cfg.local_coefficient();
    let memory = cfg.alpha() / cfg.b();
    Ok(samples.iter().zip(rl).map(|(w, i)| local * w + memory * i).collect())
}

/// Cell integrals of the ABC kernel for one `(grid, α)` pair.
///
/// `increments[m] = ∫_{(m−1)h}^{mh} E_α(−μ u^α) du` for `m ≥ 1`.
#[derive(Debug, Clone)]
pub struct AbcKernel {
    grid: Grid,
    cfg: OperatorConfig,
    increments: Vec<f64>,
}

impl AbcKernel {
    pub fn new(grid: Grid, cfg: OperatorConfig) -> Result<Self, OperatorError> {
        let alpha = cfg.alpha();
        let mu = cfg.mu();
        let antiderivative = |x: f64| -> Result<f64, MlError> {
            if x == 0.0 {
                return Ok(0.0);
            }
            Ok(x * mittag_leffler::ml_two(alpha, 2.0, -mu * x.powf(alpha))?)
        };
        let mut increments = vec![0.0; grid.len()];
        let mut prev = 0.0;
        for (m, slot) in increments.iter_mut().enumerate().skip(1) {
            let k = antiderivative(grid.node(m))?;
            *slot = k - prev;
            prev = k;
        }
        Ok(Self { grid, cfg, increments })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn config(&self) -> &OperatorConfig {
        &self.cfg
    }

    /// ABC derivative at node `n` only.
    pub fn apply_at(&self, samples: &[f64], n: usize) -> Result<f64, OperatorError> {
        self.grid.check(samples)?;
        let h = self.grid.step();
        let mut acc = 0.0;
        for j in 0..n {
            let slope = (samples[j + 1] - samples[j]) / h;
            acc += slope * self.increments[n - j];
        }
        Ok(self.cfg.derivative_scale() * acc)
    }

    pub fn apply(&self, samples: &[f64]) -> Result<Vec<f64>, OperatorError> {
        self.grid.check(samples)?;
        let h = self.grid.step();
        let slopes: Vec<f64> = samples.windows(2).map(|w| (w[1] - w[0]) / h).collect();
        let scale = self.cfg.derivative_scale();
        let mut out = vec![0.0; self.grid.len()];
        for (n, slot) in out.iter_mut().enumerate().skip(1) {
            let acc: f64 = (0..n).map(|j| slopes[j] * self.increments[n - j]).sum();
            *slot = scale * acc;
        }
        Ok(out)
    }
}

/// ABC derivative `B/(1−α) ∫₀^τ E_α(−μ(τ−σ)^α) ω′(σ) dσ`; `output[0] = 0`.
pub fn abc_derivative(samples: &[f64], grid: Grid, cfg: &OperatorConfig) -> Result<Vec<f64>, OperatorError> {
    grid.check(samples)?;
    AbcKernel::new(grid, *cfg)?.apply(samples)
}
