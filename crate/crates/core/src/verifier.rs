//! Numerical checks of the comparison theorems and of the analytic
//! identities the ABC discretization is expected to reproduce.

use thiserror::Error;

use crate::expression::{EvalError, Expr};
use crate::mittag_leffler::{ln_gamma, ml_prabhakar, MlError, MlParams};
use crate::operators::{ab_integral, abc_derivative, Grid, OperatorConfig, OperatorError};
use crate::problem::{Interval, ProblemSpec};
use crate::solver::{sup_diff, Lattice, SolverError};

/// Relative tolerance for `λ = −α/(1−α)`.
const LAMBDA_TOL: f64 = 1e-12;

const REFERENCE_MAX_TERMS: usize = 4000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifierError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("closed form holds only for lambda = -alpha/(1-alpha) = {required}, got {lambda}")]
    IdentityNotApplicable { lambda: f64, required: f64 },
    #[error("f vanishes on the {which} candidate at node {node}")]
    DegenerateF { node: usize, which: &'static str },
    #[error("omega/f(tau, omega) is not increasing at tau = {tau} between {eta} and {omega}")]
    MonotonicityViolation { tau: f64, omega: f64, eta: f64 },
    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),
    #[error("reference series did not converge at tau = {0}")]
    SeriesNonConvergence(f64),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    MittagLeffler(#[from] MlError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

impl From<SolverError> for VerifierError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Eval(e) => VerifierError::Eval(e),
            SolverError::Operator(e) => VerifierError::Operator(e),
            other => VerifierError::InvalidArgument(other.to_string()),
        }
    }
}

/// `τ^{β−1} E^σ_{α,β}(λτ^α)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoldenParams {
    pub beta: f64,
    pub sigma: f64,
    pub lambda: f64,
}

impl GoldenParams {
    pub fn new(beta: f64, sigma: f64, lambda: f64) -> Result<Self, VerifierError> {
        if !(beta > 1.0 && beta.is_finite()) {
            return Err(VerifierError::InvalidArgument(format!(
                "beta = {beta} must exceed 1 so that tau^(beta-1) is bounded at 0"
            )));
        }
        if !(sigma >= 0.0 && sigma.is_finite() && lambda.is_finite()) {
            return Err(VerifierError::InvalidArgument(format!("sigma = {sigma}, lambda = {lambda}")));
        }
        Ok(Self { beta, sigma, lambda })
    }

    /// The instance used to calibrate discretization slack.
    pub fn calibration(cfg: &OperatorConfig) -> Self {
        Self { beta: 1.5, sigma: 1.0, lambda: -cfg.mu() }
    }

    pub fn sample(&self, alpha: f64, tau: f64) -> Result<f64, MlError> {
        let p = MlParams::new(alpha, self.beta, self.sigma)?;
        Ok(tau.powf(self.beta - 1.0) * ml_prabhakar(p, self.lambda * tau.powf(alpha))?)
    }

    /// `B/(1−α) τ^{β−1} E^{1+σ}_{α,β}(λτ^α)`, valid for `λ = −α/(1−α)`.
    pub fn closed_form(&self, cfg: &OperatorConfig, tau: f64) -> Result<f64, MlError> {
        let p = MlParams::new(cfg.alpha(), self.beta, 1.0 + self.sigma)?;
        Ok(cfg.derivative_scale() * tau.powf(self.beta - 1.0) * ml_prabhakar(p, self.lambda * tau.powf(cfg.alpha()))?)
    }

    fn check_identity(&self, cfg: &OperatorConfig) -> Result<(), VerifierError> {
        let required = -cfg.mu();
        if (self.lambda - required).abs() > LAMBDA_TOL * required.abs().max(1.0) {
            return Err(VerifierError::IdentityNotApplicable { lambda: self.lambda, required });
        }
        Ok(())
    }
}

/// Exact ABC derivative of `τ^{β−1} E^σ_{α,β}(λτ^α)` for any `λ`:
///
/// ```text
/// B/(1−α) τ^{β−1} Σ_n c_n τ^{αn} / Γ(β + αn),
/// c_n = −μ c_{n−1} + λⁿ (σ)_n / n!,   c_0 = 1.
/// ```
pub fn abc_derivative_reference(cfg: &OperatorConfig, params: &GoldenParams, tau: f64) -> Result<f64, VerifierError> {
    if tau <= 0.0 {
        return Ok(0.0);
    }
    let alpha = cfg.alpha();
    let x = tau.powf(alpha);
    let ln_x = x.ln();
    let mu = cfg.mu();
    let mut c = 1.0f64;
    let mut forcing = 1.0f64;
    let mut sum = 0.0f64;
    let mut abs_sum = 0.0f64;
    let mut small = 0;
    for n in 0..REFERENCE_MAX_TERMS {
        if n > 0 {
            forcing *= params.lambda * (params.sigma + (n - 1) as f64) / n as f64;
            c = -mu * c + forcing;
        }
        let term = if c == 0.0 {
            0.0
        } else {
            c.signum() * (c.abs().ln() + n as f64 * ln_x - ln_gamma(params.beta + alpha * n as f64)).exp()
        };
        sum += term;
        abs_sum += term.abs();
        if term.abs() <= 1e-17 * sum.abs().max(1e-300) && n > 4 {
            small += 1;
            if small >= 3 {
                if abs_sum * f64::EPSILON > 1e-9 * sum.abs().max(1.0) {
                    return Err(VerifierError::SeriesNonConvergence(tau));
                }
                return Ok(cfg.derivative_scale() * tau.powf(params.beta - 1.0) * sum);
            }
        } else {
            small = 0;
        }
    }
    Err(VerifierError::SeriesNonConvergence(tau))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoldenRow {
    pub n: usize,
    pub h: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoldenTable {
    pub rows: Vec<GoldenRow>,
    /// `log2`-type orders between consecutive rows.
    pub orders: Vec<f64>,
}

impl GoldenTable {
    fn from_rows(rows: Vec<GoldenRow>) -> Self {
        let orders = rows.windows(2).map(|w| (w[0].error / w[1].error).ln() / (w[0].h / w[1].h).ln()).collect();
        Self { rows, orders }
    }

    pub fn errors_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].error < w[0].error)
    }

    pub fn min_order(&self) -> f64 {
        self.orders.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn golden_error_with(
    cfg: &OperatorConfig,
    params: &GoldenParams,
    grid: Grid,
    exact: impl Fn(f64) -> Result<f64, VerifierError>,
) -> Result<f64, VerifierError> {
    let samples = grid.sample(|t| params.sample(cfg.alpha(), t))?;
    let numeric = abc_derivative(&samples, grid, cfg)?;
    let expected = grid.sample(exact)?;
    Ok(sup_diff(&numeric, &expected))
}

/// Sup-norm error of the numerical ABC derivative against the closed form.
pub fn golden_identity_check(
    cfg: &OperatorConfig,
    params: &GoldenParams,
    t_final: f64,
    grid_sizes: &[usize],
) -> Result<GoldenTable, VerifierError> {
    GoldenParams::new(params.beta, params.sigma, params.lambda)?;
    params.check_identity(cfg)?;
    let rows = grid_sizes
        .iter()
        .map(|&n| {
            let grid = Grid::new(t_final, n)?;
            let error = golden_error_with(cfg, params, grid, |t| Ok(params.closed_form(cfg, t)?))?;
            Ok(GoldenRow { n, h: grid.step(), error })
        })
        .collect::<Result<Vec<_>, VerifierError>>()?;
    Ok(GoldenTable::from_rows(rows))
}

/// As [`golden_identity_check`] but against the general-λ reference series.
pub fn reference_identity_check(
    cfg: &OperatorConfig,
    params: &GoldenParams,
    t_final: f64,
    grid_sizes: &[usize],
) -> Result<GoldenTable, VerifierError> {
    GoldenParams::new(params.beta, params.sigma, params.lambda)?;
    let rows = grid_sizes
        .iter()
        .map(|&n| {
            let grid = Grid::new(t_final, n)?;
            let error = golden_error_with(cfg, params, grid, |t| abc_derivative_reference(cfg, params, t))?;
            Ok(GoldenRow { n, h: grid.step(), error })
        })
        .collect::<Result<Vec<_>, VerifierError>>()?;
    Ok(GoldenTable::from_rows(rows))
}

/// `C = error/h` of the calibration identity on `grid`.
pub fn discretization_constant(cfg: &OperatorConfig, grid: Grid) -> Result<f64, VerifierError> {
    let params = GoldenParams::calibration(cfg);
    let error = golden_error_with(cfg, &params, grid, |t| Ok(params.closed_form(cfg, t)?))?;
    Ok(error / grid.step())
}

/// `sup_n |ᴬᴮI^α(ᴬᴮᶜD^α ω)_n − (ω_n − ω_0)|`.
pub fn fundamental_theorem_check(samples: &[f64], grid: Grid, cfg: &OperatorConfig) -> Result<f64, VerifierError> {
    let d = abc_derivative(samples, grid, cfg)?;
    let back = ab_integral(&d, grid, cfg)?;
    let w0 = samples[0];
    Ok(back.iter().zip(samples).fold(0.0f64, |m, (b, w)| m.max((b - (w - w0)).abs())))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremumReport {
    pub node: usize,
    pub derivative: f64,
    pub slack: f64,
    pub nonnegative: bool,
}

/// Evaluates `ᴬᴮᶜD^α m` at the last node `n₀ > 0` with `m(τ_{n₀}) ≈ 0`
/// and `m ≤ 0` on `[0, τ_{n₀}]`.
pub fn extremum_sign_check(
    m_samples: &[f64],
    grid: Grid,
    cfg: &OperatorConfig,
    discretization_c: f64,
) -> Result<ExtremumReport, VerifierError> {
    if m_samples.len() != grid.len() {
        return Err(OperatorError::DimensionMismatch { expected: grid.len(), found: m_samples.len() }.into());
    }
    let scale = m_samples.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let zero_tol = 1e-12 * scale;
    let mut node = None;
    for (n, &m) in m_samples.iter().enumerate() {
        if m > zero_tol {
            break;
        }
        if n > 0 && m.abs() <= zero_tol {
            node = Some(n);
        }
    }
    let node = node.ok_or_else(|| {
        VerifierError::HypothesisViolation("no node n0 > 0 with m(n0) = 0 and m <= 0 before it".into())
    })?;
    let derivative = abc_derivative(m_samples, grid, cfg)?[node];
    let slack = discretization_c.abs() * grid.step();
    Ok(ExtremumReport { node, derivative, slack, nonnegative: derivative >= -slack })
}

/// Largest sampled `[g(τ,ω) − g(τ,η)] / [ω/f(τ,ω) − η/f(τ,η)]`, `ω > η`,
/// clipped below at 0.
pub fn estimate_g_onesided_lipschitz(
    spec: &ProblemSpec,
    omega_box: Interval,
    lattice: Lattice,
) -> Result<f64, VerifierError> {
    let states = omega_box.lattice(lattice.states);
    let mut best = 0.0f64;
    let times = Interval { lo: 0.0, hi: spec.t_final }.lattice(lattice.times);
    for tau in times {
        let mut q = Vec::with_capacity(states.len());
        let mut g = Vec::with_capacity(states.len());
        for &w in &states {
            q.push(w / spec.f.eval(tau, w)?);
            g.push(spec.g.eval(tau, w)?);
        }
        for i in 0..states.len() {
            for j in i + 1..states.len() {
                let denom = q[j] - q[i];
                if !(denom > 0.0) {
                    return Err(VerifierError::MonotonicityViolation { tau, omega: states[j], eta: states[i] });
                }
                best = best.max((g[j] - g[i]) / denom);
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strictness {
    Strict,
    NonStrict,
}

impl Strictness {
    pub fn name(self) -> &'static str {
        match self {
            Strictness::Strict => "STRICT",
            Strictness::NonStrict => "NONSTRICT",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonOptions {
    pub strictness: Strictness,
    /// Slack is `slack_factor · C · h`.
    pub slack_factor: f64,
    /// Precomputed `C`; computed from the calibration identity when absent.
    pub discretization_c: Option<f64>,
    pub lattice: Lattice,
}

impl Default for ComparisonOptions {
    fn default() -> Self {
        Self { strictness: Strictness::Strict, slack_factor: 2.0, discretization_c: None, lattice: Lattice::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub strictness: Strictness,
    /// `g(τ,v) − D[v/f]`.
    pub lower_margins: Vec<f64>,
    /// `D[w/f] − g(τ,w)`.
    pub upper_margins: Vec<f64>,
    pub discretization_c: f64,
    pub slack: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
    /// One margin strictly positive at every interior node.
    pub strict_ok: bool,
    pub initial_ok: bool,
    pub lg: Option<f64>,
    pub lg_bound: f64,
    pub lg_condition_ok: bool,
    pub theorem_applies: bool,
    pub conclusion_ok: bool,
    pub first_conclusion_failure: Option<usize>,
}

impl ComparisonReport {
    /// Hypotheses hold but the conclusion does not.
    pub fn is_counterexample(&self) -> bool {
        self.theorem_applies && !self.conclusion_ok
    }

    pub fn min_lower_margin(&self) -> f64 {
        self.lower_margins[1..].iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn min_upper_margin(&self) -> f64 {
        self.upper_margins[1..].iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Comparison check for candidates given as expressions in `tau`.
pub fn verify_comparison(
    spec: &ProblemSpec,
    v: &Expr,
    w: &Expr,
    grid: Grid,
    opts: &ComparisonOptions,
) -> Result<ComparisonReport, VerifierError> {
    let vs = grid.sample(|t| v.eval(&[("tau", t)]))?;
    let ws = grid.sample(|t| w.eval(&[("tau", t)]))?;
    verify_comparison_samples(spec, &vs, &ws, grid, opts)
}

/// Margins for the upper inequality alone: `D[w/f] − g(τ,w)`.
pub fn upper_margins(spec: &ProblemSpec, w: &[f64], grid: Grid) -> Result<Vec<f64>, VerifierError> {
    let (d, g) = derivative_and_forcing(spec, w, grid, "upper")?;
    Ok(d.iter().zip(&g).map(|(d, g)| d - g).collect())
}

fn derivative_and_forcing(
    spec: &ProblemSpec,
    x: &[f64],
    grid: Grid,
    which: &'static str,
) -> Result<(Vec<f64>, Vec<f64>), VerifierError> {
    if x.len() != grid.len() {
        return Err(OperatorError::DimensionMismatch { expected: grid.len(), found: x.len() }.into());
    }
    let nodes = grid.nodes();
    let mut q = Vec::with_capacity(x.len());
    let mut g = Vec::with_capacity(x.len());
    for (node, (&t, &xv)) in nodes.iter().zip(x).enumerate() {
        let f = spec.f.eval(t, xv)?;
        if f == 0.0 {
            return Err(VerifierError::DegenerateF { node, which });
        }
        q.push(xv / f);
        g.push(spec.g.eval(t, xv)?);
    }
    Ok((abc_derivative(&q, grid, &spec.cfg)?, g))
}

pub fn verify_comparison_samples(
    spec: &ProblemSpec,
    v: &[f64],
    w: &[f64],
    grid: Grid,
    opts: &ComparisonOptions,
) -> Result<ComparisonReport, VerifierError> {
    let (dv, gv) = derivative_and_forcing(spec, v, grid, "lower")?;
    let (dw, gw) = derivative_and_forcing(spec, w, grid, "upper")?;
    let lower_margins: Vec<f64> = gv.iter().zip(&dv).map(|(g, d)| g - d).collect();
    let upper_margins: Vec<f64> = dw.iter().zip(&gw).map(|(d, g)| d - g).collect();

    let discretization_c = match opts.discretization_c {
        Some(c) => c,
        None => discretization_constant(&spec.cfg, grid)?,
    };
    let slack = opts.slack_factor * discretization_c * grid.step();
    let interior = 1..grid.len();
    let lower_ok = interior.clone().all(|n| lower_margins[n] >= -slack);
    let upper_ok = interior.clone().all(|n| upper_margins[n] >= -slack);
    let strict_ok = interior.clone().all(|n| lower_margins[n] > 0.0 || upper_margins[n] > 0.0);

    let lg_bound = spec.cfg.derivative_scale();
    let (lg, lg_condition_ok) = match opts.strictness {
        Strictness::Strict => (None, true),
        Strictness::NonStrict => {
            let lo = v.iter().chain(w).copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().chain(w).copied().fold(f64::NEG_INFINITY, f64::max);
            let pad = 0.05 * (hi - lo).max(1.0);
            let omega_box = spec.omega_box.unwrap_or(Interval { lo: lo - pad, hi: hi + pad });
            match estimate_g_onesided_lipschitz(spec, omega_box, opts.lattice) {
                Ok(l) => (Some(l), l < lg_bound),
                Err(VerifierError::MonotonicityViolation { .. }) => (None, false),
                Err(e) => return Err(e),
            }
        }
    };

    let (initial_ok, conclusion) = match opts.strictness {
        Strictness::Strict => (v[0] < w[0], (0..grid.len()).find(|&n| !(v[n] < w[n]))),
        Strictness::NonStrict => (v[0] <= w[0], (0..grid.len()).find(|&n| !(v[n] <= w[n]))),
    };
    let theorem_applies = initial_ok
        && lower_ok
        && upper_ok
        && match opts.strictness {
            Strictness::Strict => strict_ok,
            Strictness::NonStrict => lg_condition_ok,
        };

    Ok(ComparisonReport {
        strictness: opts.strictness,
        lower_margins,
        upper_margins,
        discretization_c,
        slack,
        lower_ok,
        upper_ok,
        strict_ok,
        initial_ok,
        lg,
        lg_bound,
        lg_condition_ok,
        theorem_applies,
        conclusion_ok: conclusion.is_none(),
        first_conclusion_failure: conclusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mittag_leffler::{gamma, ml_one, ml_two};
    use crate::operators::{KernelConvention, Normalization};
    use crate::solver::{picard_solve, PicardOptions};

    fn cfg(alpha: f64) -> OperatorConfig {
        OperatorConfig::new(alpha).unwrap()
    }

    #[test]
    fn golden_acceptance_case() {
        let c = cfg(0.5);
        let p = GoldenParams::new(1.5, 1.0, -1.0).unwrap();
        let table = golden_identity_check(&c, &p, 1.0, &[64, 128, 256]).unwrap();
        assert!(table.errors_decreasing());
        assert!(table.min_order() >= 0.9, "{table:?}");
    }

    #[test]
    fn golden_rejects_bad_arguments() {
        let c = cfg(0.3);
        assert!(matches!(GoldenParams::new(1.0, 1.0, -1.0), Err(VerifierError::InvalidArgument(_))));
        let p = GoldenParams { beta: 1.5, sigma: 1.0, lambda: -1.0 };
        assert!(matches!(
            golden_identity_check(&c, &p, 1.0, &[16]),
            Err(VerifierError::IdentityNotApplicable { .. })
        ));
        let p = GoldenParams { beta: 0.5, sigma: 1.0, lambda: -c.mu() };
        assert!(matches!(golden_identity_check(&c, &p, 1.0, &[16]), Err(VerifierError::InvalidArgument(_))));
    }

    #[test]
    fn reference_series_matches_closed_form_on_identity_line() {
        for alpha in [0.3, 0.5, 0.7] {
            let c = cfg(alpha).with_normalization(Normalization::AtanganaBaleanu);
            let p = GoldenParams::new(1.7, 0.6, -c.mu()).unwrap();
            for t in [0.1, 0.5, 1.0, 2.0] {
                let a = abc_derivative_reference(&c, &p, t).unwrap();
                let b = p.closed_form(&c, t).unwrap();
                assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{alpha} {t}: {a} {b}");
            }
        }
    }

    #[test]
    fn reference_series_special_cases() {
        let c = cfg(0.5);
        // lambda = 0: derivative of a pure power
        let p = GoldenParams::new(1.5, 1.0, 0.0).unwrap();
        let t: f64 = 0.7;
        let power = abc_derivative_reference(&c, &p, t).unwrap();
        let expect = c.derivative_scale() * t.powf(0.5) * ml_two(0.5, 1.5, -c.mu() * t.sqrt()).unwrap();
        assert!((power - expect).abs() < 1e-13);
        // sigma = 0: same function for every lambda
        let a = abc_derivative_reference(&c, &GoldenParams::new(1.5, 0.0, 3.0).unwrap(), t).unwrap();
        assert!((a - expect).abs() < 1e-13);
        // quadrature value away from the identity line, alpha = 0.3
        let c3 = cfg(0.3);
        let q = abc_derivative_reference(&c3, &GoldenParams::new(1.5, 1.0, -1.0).unwrap(), 1.0).unwrap();
        assert!((q - 0.566_076_526_424_143_3).abs() < 1e-12, "{q}");
    }

    #[test]
    fn reference_check_converges_off_identity_line() {
        let c = cfg(0.5);
        let p = GoldenParams::new(1.5, 1.0, 0.0).unwrap();
        let table = reference_identity_check(&c, &p, 1.0, &[64, 128, 256]).unwrap();
        assert!(table.errors_decreasing() && table.min_order() > 0.9, "{table:?}");
    }

    #[test]
    fn golden_matrix_orders() {
        for alpha in [0.3, 0.5, 0.7] {
            for beta in [1.3, 1.5, 2.0] {
                let c = cfg(alpha);
                let p = GoldenParams::new(beta, 1.0, -c.mu()).unwrap();
                let table = golden_identity_check(&c, &p, 1.0, &[128, 256]).unwrap();
                let floor = if beta - 1.0 + alpha >= 1.0 { 0.9 } else { beta - 1.0 + alpha - 0.1 };
                assert!(table.errors_decreasing());
                assert!(table.min_order() >= floor, "{alpha} {beta}: {table:?}");
            }
        }
    }

    #[test]
    fn fundamental_theorem() {
        let c = cfg(0.5);
        let grid = Grid::new(1.0, 64).unwrap();
        assert!(fundamental_theorem_check(&[2.5; 65], grid, &c).unwrap() <= 1e-12);
        let mut prev = f64::INFINITY;
        let mut errs = Vec::new();
        for n in [64, 128, 256] {
            let g = Grid::new(1.0, n).unwrap();
            let s = g.sample(|t| ml_one(0.5, t.sqrt())).unwrap();
            let e = fundamental_theorem_check(&s, g, &c).unwrap();
            assert!(e < prev);
            prev = e;
            errs.push(e);
        }
        assert!((errs[1] / errs[2]).log2() >= 0.9, "{errs:?}");
    }

    #[test]
    fn discretization_constant_is_moderate() {
        for alpha in [0.3, 0.5, 0.7] {
            let c = discretization_constant(&cfg(alpha), Grid::new(1.0, 128).unwrap()).unwrap();
            assert!(c > 0.0 && c < 100.0, "{alpha}: {c}");
        }
    }

    #[test]
    fn extremum_sign() {
        let c = cfg(0.5);
        let grid = Grid::new(1.0, 64).unwrap();
        let cc = discretization_constant(&c, grid).unwrap();
        let m = grid.sample(|t| Ok::<_, VerifierError>(t - 1.0)).unwrap();
        let r = extremum_sign_check(&m, grid, &c, cc).unwrap();
        assert_eq!(r.node, 64);
        assert!(r.nonnegative && r.derivative > 0.0);
        let r = extremum_sign_check(&[0.0; 65], grid, &c, cc).unwrap();
        assert_eq!(r.derivative, 0.0);
        assert!(r.nonnegative);
        assert!(matches!(
            extremum_sign_check(&[1.0; 65], grid, &c, cc),
            Err(VerifierError::HypothesisViolation(_))
        ));
    }

    #[test]
    fn onesided_lipschitz() {
        let b = Interval::new(0.0, std::f64::consts::FRAC_PI_2).unwrap();
        let lat = Lattice::default();
        let s = ProblemSpec::from_exprs(0.5, 1.0, 0.0, "1", "0").unwrap();
        assert_eq!(estimate_g_onesided_lipschitz(&s, b, lat).unwrap(), 0.0);
        let s = ProblemSpec::from_exprs(0.5, 1.0, 0.0, "1", "omega/2").unwrap();
        assert!((estimate_g_onesided_lipschitz(&s, b, lat).unwrap() - 0.5).abs() < 1e-12);
        let s = ProblemSpec::from_exprs(0.5, 1.0, 0.0, "1", "sin(omega)").unwrap();
        let l = estimate_g_onesided_lipschitz(&s, b, Lattice::new(3, 257).unwrap()).unwrap();
        assert!(l < 1.0 && l > 0.9999, "{l}");
        let s = ProblemSpec::from_exprs(0.5, 1.0, 0.0, "1+omega^2", "0").unwrap();
        let wide = Interval::new(-3.0, 3.0).unwrap();
        assert!(matches!(
            estimate_g_onesided_lipschitz(&s, wide, lat),
            Err(VerifierError::MonotonicityViolation { .. })
        ));
    }

    fn manufactured() -> ProblemSpec {
        ProblemSpec::from_exprs(0.5, 1.0, 1.0, "1", "2*tau^0.5*mlf3(0.5, 1.5, 2, -tau^0.5)").unwrap()
    }

    #[test]
    fn comparison_on_shifted_exact_solution() {
        let s = manufactured();
        let grid = Grid::new(1.0, 128).unwrap();
        let v = Expr::parse_with_vars("1 + tau^0.5*mlf2(0.5, 1.5, -tau^0.5)", &["tau"]).unwrap();
        let w = Expr::parse_with_vars("1.5 + tau^0.5*mlf2(0.5, 1.5, -tau^0.5)", &["tau"]).unwrap();
        let opts = ComparisonOptions { strictness: Strictness::NonStrict, slack_factor: 2.0, ..Default::default() };
        let r = verify_comparison(&s, &v, &w, grid, &opts).unwrap();
        assert!(r.upper_ok && r.lower_ok, "{} {}", r.min_lower_margin(), r.min_upper_margin());
        assert!(r.conclusion_ok && r.theorem_applies && !r.is_counterexample());
        assert_eq!(r.lg, Some(0.0));
        assert_eq!(r.lg_bound, 2.0);
    }

    #[test]
    fn comparison_equal_and_reversed_candidates() {
        let s = manufactured();
        let grid = Grid::new(1.0, 32).unwrap();
        let v = Expr::parse_with_vars("1 + tau", &["tau"]).unwrap();
        let r = verify_comparison(&s, &v, &v, grid, &ComparisonOptions::default()).unwrap();
        assert!(!r.conclusion_ok && !r.initial_ok && !r.theorem_applies);
        let w = Expr::parse_with_vars("tau", &["tau"]).unwrap();
        let r = verify_comparison(&s, &v, &w, grid, &ComparisonOptions::default()).unwrap();
        assert!(!r.initial_ok && !r.theorem_applies && !r.is_counterexample());
    }

    #[test]
    fn degenerate_f() {
        let s = ProblemSpec::from_exprs(0.5, 1.0, 1.0, "omega", "0").unwrap();
        let grid = Grid::new(1.0, 8).unwrap();
        let v = Expr::parse_with_vars("1 - tau", &["tau"]).unwrap();
        let w = Expr::parse_with_vars("2", &["tau"]).unwrap();
        assert!(matches!(
            verify_comparison(&s, &v, &w, grid, &ComparisonOptions::default()),
            Err(VerifierError::DegenerateF { node: 8, which: "lower" })
        ));
    }

    #[test]
    fn epsilon_shift_margin_matches_corrected_bound() {
        let s = ProblemSpec::from_exprs(0.5, 1.0, 0.2, "2 + sin(tau)", "tau^0.5*(0.3 - omega)/2").unwrap();
        let grid = Grid::new(1.0, 128).unwrap();
        let sol = picard_solve(&s, grid, &PicardOptions::default()).unwrap();
        let lg = estimate_g_onesided_lipschitz(&s, Interval::new(-2.0, 2.0).unwrap(), Lattice::default()).unwrap();
        let c = discretization_constant(&s.cfg, grid).unwrap();
        let eps = 0.1;
        let b = s.cfg.b();
        let nodes = grid.nodes();
        let w: Vec<f64> = nodes
            .iter()
            .zip(&sol.omega)
            .map(|(&t, &x)| {
                let f = 2.0 + t.sin();
                f * (x / f + eps * ml_one(0.5, t.sqrt()).unwrap())
            })
            .collect();
        let m = upper_margins(&s, &w, grid).unwrap();
        for n in 1..nodes.len() {
            let t = nodes[n];
            let bound = eps * ((b - lg) * ml_one(0.5, t.sqrt()).unwrap() - b * ml_one(0.5, -s.cfg.mu() * t.sqrt()).unwrap())
                - c * grid.step();
            assert!(m[n] > 0.0 && m[n] >= bound, "{t}: {} {bound}", m[n]);
        }
    }

    #[test]
    fn paper_hybrid_kernel_changes_coefficient_only() {
        let c = cfg(0.5).with_kernel(KernelConvention::PaperHybrid);
        assert!((c.memory_coefficient() - 1.0).abs() < 1e-15);
        assert!((cfg(0.5).memory_coefficient() - 0.5 / gamma(0.5)).abs() < 1e-15);
    }
}
