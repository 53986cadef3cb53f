//! Picard iteration on the hybrid integral equation
//!
//! ```text
//! ω(τ) = f(τ,ω) · [ ω₀/f(0,ω₀) + (1−α)/B · g(τ,ω) + c_α ∫₀^τ (τ−σ)^{α−1} g(σ,ω(σ)) dσ ]
//! ```
//!
//! together with the existence condition and the sampled hypothesis checks.

use std::sync::Arc;

use thiserror::Error;

use crate::expression::EvalError;
use crate::operators::{abc_derivative, Grid, KernelConvention, OperatorConfig, OperatorError, RlWeights};
use crate::problem::{ExprField, Field, Interval, ProblemError, ProblemSpec};
use crate::mittag_leffler::gamma;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_SWEEPS: usize = 200;

/// Number of τ samples used for `M_f = sup |f(τ, 0)|`.
const M_F_SAMPLES: usize = 1025;

/// Iterate differences above this are treated as divergence.
const DIVERGENCE_LIMIT: f64 = 1e150;

#[derive(Debug, Clone, Error)]
pub enum SolverError {
    #[error("invalid problem: {0}")]
    Validation(#[from] ProblemError),
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error("grid horizon {grid} does not match problem horizon {spec}")]
    GridMismatch { grid: f64, spec: f64 },
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("no convergence after {} sweeps (last diff {:.3e})", .0.iterations, .0.last_diff())]
    MaxSweepsExceeded(Box<SolutionTrace>),
    #[error("iteration diverged after {} sweeps", .0.iterations)]
    Diverged(Box<SolutionTrace>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardOptions {
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_sweeps: DEFAULT_MAX_SWEEPS }
    }
}

impl PicardOptions {
    pub fn new(tol: f64, max_sweeps: usize) -> Result<Self, SolverError> {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(SolverError::InvalidOptions(format!("tol = {tol} must be positive")));
        }
        if max_sweeps == 0 {
            return Err(SolverError::InvalidOptions("max_sweeps must be at least 1".into()));
        }
        Ok(Self { tol, max_sweeps })
    }
}

/// Discrete solution together with its convergence history.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionTrace {
    pub grid: Grid,
    pub omega: Vec<f64>,
    /// `ω_n − rhs(ω)_n`.
    pub residual: Vec<f64>,
    pub iterations: usize,
    /// `sup_n |ω^{k+1}_n − ω^k_n|` for every sweep.
    pub iterate_diffs: Vec<f64>,
    pub residual_sup: f64,
    /// Signed ε of the perturbed problem that produced this trace.
    pub perturbation: f64,
}

impl SolutionTrace {
    pub fn last_diff(&self) -> f64 {
        self.iterate_diffs.last().copied().unwrap_or(f64::NAN)
    }

    /// Largest ratio `diff_{k+1}/diff_k` over the last `window` ratios.
    ///
    /// `None` when fewer than two nonzero diffs were recorded.
    pub fn contraction_ratio(&self, window: usize) -> Option<f64> {
        let ratios: Vec<f64> = self
            .iterate_diffs
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .collect();
        if ratios.is_empty() {
            return None;
        }
        let start = ratios.len().saturating_sub(window.max(1));
        ratios[start..].iter().copied().reduce(f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        sup_abs(&self.omega)
    }
}

pub(crate) fn sup_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub(crate) fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// The right-hand side of the integral equation on a fixed grid.
pub struct HybridOperator<'a> {
    spec: &'a ProblemSpec,
    weights: RlWeights,
    nodes: Vec<f64>,
    q0: f64,
    local: f64,
    memory: f64,
}

impl<'a> HybridOperator<'a> {
    pub fn new(spec: &'a ProblemSpec, grid: Grid) -> Result<Self, SolverError> {
        if (grid.t_final() - spec.t_final).abs() > 1e-12 * spec.t_final.abs().max(1.0) {
            return Err(SolverError::GridMismatch { grid: grid.t_final(), spec: spec.t_final });
        }
        let f0 = spec.f.eval(0.0, spec.omega0)?;
        if f0 == 0.0 {
            return Err(ProblemError::Validation {
                field: "f".into(),
                message: "f(0, omega0) = 0; f must not vanish".into(),
            }
            .into());
        }
        Ok(Self {
            spec,
            weights: RlWeights::new(grid, spec.alpha())?,
            nodes: grid.nodes(),
            q0: spec.omega0 / f0,
            local: spec.cfg.local_coefficient(),
            memory: spec.cfg.memory_coefficient(),
        })
    }

    pub fn grid(&self) -> Grid {
        self.weights.grid()
    }

    /// `ω₀ / f(0, ω₀)`.
    pub fn initial_quotient(&self) -> f64 {
        self.q0
    }

    pub fn apply(&self, omega: &[f64]) -> Result<Vec<f64>, SolverError> {
        if omega.len() != self.nodes.len() {
            return Err(OperatorError::DimensionMismatch { expected: self.nodes.len(), found: omega.len() }.into());
        }
        let g = self
            .nodes
            .iter()
            .zip(omega)
            .map(|(&t, &w)| self.spec.g.eval(t, w))
            .collect::<Result<Vec<_>, _>>()?;
        let memory = self.weights.convolve(&g)?;
        let mut out = Vec::with_capacity(omega.len());
        for n in 0..omega.len() {
            let f = self.spec.f.eval(self.nodes[n], omega[n])?;
            out.push(f * (self.q0 + self.local * g[n] + self.memory * memory[n]));
        }
        Ok(out)
    }
}

/// One application of the integral-equation right-hand side.
pub fn rhs_operator(spec: &ProblemSpec, omega: &[f64], grid: Grid) -> Result<Vec<f64>, SolverError> {
    HybridOperator::new(spec, grid)?.apply(omega)
}

/// Full Picard iteration from `ω⁰ ≡ ω₀`.
pub fn picard_solve(spec: &ProblemSpec, grid: Grid, opts: &PicardOptions) -> Result<SolutionTrace, SolverError> {
    let opts = PicardOptions::new(opts.tol, opts.max_sweeps)?;
    let op = HybridOperator::new(spec, grid)?;
    let mut omega = vec![spec.omega0; grid.len()];
    let mut diffs = Vec::new();
    let mut converged = false;
    let mut diverged = false;

    for _ in 0..opts.max_sweeps {
        let next = op.apply(&omega)?;
        let diff = sup_diff(&next, &omega);
        omega = next;
        diffs.push(diff);
        if !(diff.is_finite() && diff < DIVERGENCE_LIMIT) {
            diverged = true;
            break;
        }
        if diff <= opts.tol {
            converged = true;
            break;
        }
    }

    let finish = |omega: Vec<f64>, residual: Vec<f64>, diffs: Vec<f64>| {
        let residual_sup = sup_abs(&residual);
        SolutionTrace {
            grid,
            omega,
            residual,
            iterations: diffs.len(),
            iterate_diffs: diffs,
            residual_sup,
            perturbation: spec.perturbation,
        }
    };

    if diverged {
        let residual = vec![f64::NAN; omega.len()];
        return Err(SolverError::Diverged(Box::new(finish(omega, residual, diffs))));
    }
    let image = op.apply(&omega)?;
    let residual: Vec<f64> = omega.iter().zip(&image).map(|(w, r)| w - r).collect();
    let trace = finish(omega, residual, diffs);
    if converged {
        Ok(trace)
    } else {
        Err(SolverError::MaxSweepsExceeded(Box::new(trace)))
    }
}

/// `sup_{n ≥ 1} |ᴬᴮᶜD^α[ω/f](τ_n) − g(τ_n, ω_n)|` for a computed trace.
pub fn derivative_defect(spec: &ProblemSpec, trace: &SolutionTrace) -> Result<f64, SolverError> {
    let nodes = trace.grid.nodes();
    let mut quotient = Vec::with_capacity(nodes.len());
    let mut g = Vec::with_capacity(nodes.len());
    for (&t, &w) in nodes.iter().zip(&trace.omega) {
        quotient.push(w / spec.f.eval(t, w)?);
        g.push(spec.g.eval(t, w)?);
    }
    let d = abc_derivative(&quotient, trace.grid, &spec.cfg)?;
    Ok(sup_diff(&d[1..], &g[1..]))
}

/// Sample counts along τ and ω for the box estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lattice {
    pub times: usize,
    pub states: usize,
}

impl Lattice {
    pub fn new(times: usize, states: usize) -> Result<Self, SolverError> {
        if times < 2 || states < 2 {
            return Err(SolverError::InvalidOptions(format!(
                "lattice {times}x{states} needs at least 2 points per axis"
            )));
        }
        Ok(Self { times, states })
    }
}

impl Default for Lattice {
    fn default() -> Self {
        Self { times: 33, states: 65 }
    }
}

fn time_samples(t_final: f64, count: usize) -> Vec<f64> {
    Interval { lo: 0.0, hi: t_final }.lattice(count)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneReport {
    pub min_slope: f64,
    /// `(τ, ω)` at the left end of the flattest sampled segment.
    pub worst_at: (f64, f64),
    pub passed: bool,
}

/// Minimal finite-difference slope of `ω ↦ ω/f(τ, ω)` on the lattice.
pub fn check_monotone_quotient(
    spec: &ProblemSpec,
    omega_box: Interval,
    lattice: Lattice,
) -> Result<MonotoneReport, SolverError> {
    let states = omega_box.lattice(lattice.states);
    let mut min_slope = f64::INFINITY;
    let mut worst_at = (0.0, omega_box.lo);
    for t in time_samples(spec.t_final, lattice.times) {
        let q = states
            .iter()
            .map(|&w| spec.f.eval(t, w).map(|f| w / f))
            .collect::<Result<Vec<_>, _>>()?;
        for i in 0..states.len() - 1 {
            let slope = (q[i + 1] - q[i]) / (states[i + 1] - states[i]);
            if slope < min_slope {
                min_slope = slope;
                worst_at = (t, states[i]);
            }
        }
    }
    Ok(MonotoneReport { min_slope, worst_at, passed: min_slope > 0.0 })
}

/// Largest sampled `|f(τ,ω) − f(τ,η)| / |ω − η|`; a lower bound on `L_f`.
pub fn estimate_lipschitz_f(spec: &ProblemSpec, omega_box: Interval, lattice: Lattice) -> Result<f64, SolverError> {
    let states = omega_box.lattice(lattice.states);
    let mut best = 0.0f64;
    for t in time_samples(spec.t_final, lattice.times) {
        let vals = states.iter().map(|&w| spec.f.eval(t, w)).collect::<Result<Vec<_>, _>>()?;
        for i in 0..states.len() {
            for j in i + 1..states.len() {
                best = best.max((vals[j] - vals[i]).abs() / (states[j] - states[i]));
            }
        }
    }
    Ok(best)
}

/// Sampled `sup |g(τ, ω)|` over `[0, T] × box`.
pub fn estimate_h_norm(spec: &ProblemSpec, omega_box: Interval, lattice: Lattice) -> Result<f64, SolverError> {
    let states = omega_box.lattice(lattice.states);
    let mut best = 0.0f64;
    for t in time_samples(spec.t_final, lattice.times) {
        for &w in &states {
            best = best.max(spec.g.eval(t, w)?.abs());
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub l_f: f64,
    pub h_norm: f64,
    /// Sampled `sup |f(τ, 0)|`.
    pub m_f: f64,
    pub lhs: f64,
    pub satisfied: bool,
    /// Literal radius `M_f·lhs/(1 − lhs)`, present when satisfied.
    pub r: Option<f64>,
    /// `M_f·x/(1 − lhs)` with `lhs = L_f·x`, present when satisfied.
    pub r_standard: Option<f64>,
    pub convention: KernelConvention,
}

/// Existence condition under the spec's own kernel convention.
pub fn existence_condition(spec: &ProblemSpec, l_f: f64, h_norm: f64) -> Result<ConditionReport, SolverError> {
    existence_condition_with(spec, l_f, h_norm, spec.cfg.kernel)
}

pub fn existence_condition_with(
    spec: &ProblemSpec,
    l_f: f64,
    h_norm: f64,
    convention: KernelConvention,
) -> Result<ConditionReport, SolverError> {
    if !(l_f >= 0.0 && h_norm >= 0.0) {
        return Err(SolverError::InvalidOptions(format!("L_f = {l_f} and h_norm = {h_norm} must be nonnegative")));
    }
    let alpha = spec.alpha();
    let b = spec.cfg.b();
    let t_pow = spec.t_final.powf(alpha);
    let memory = match convention {
        KernelConvention::PaperHybrid => t_pow / (1.0 - alpha),
        KernelConvention::Gamma => t_pow / gamma(alpha),
    };
    let q0 = spec.initial_quotient()?.abs();
    let x = q0 + (1.0 - alpha + memory) * h_norm / b;
    let lhs = l_f * x;

    let mut m_f = 0.0f64;
    for t in time_samples(spec.t_final, M_F_SAMPLES) {
        m_f = m_f.max(spec.f.eval(t, 0.0)?.abs());
    }

    let satisfied = lhs < 1.0;
    let (r, r_standard) = if satisfied {
        (Some(m_f * lhs / (1.0 - lhs)), Some(m_f * x / (1.0 - lhs)))
    } else {
        (None, None)
    };
    Ok(ConditionReport { l_f, h_norm, m_f, lhs, satisfied, r, r_standard, convention })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MajorantReport {
    pub trace: SolutionTrace,
    pub sup_norm: f64,
    /// `sup |m| ≤ tol`: numerical support for uniqueness, not a proof.
    pub uniqueness_supported: bool,
}

/// Solves `ᴬᴮᶜD^α m = G(τ, m)`, `m(0) = 0`.
pub fn solve_majorant(
    g: Arc<dyn Field>,
    cfg: OperatorConfig,
    grid: Grid,
    opts: &PicardOptions,
) -> Result<MajorantReport, SolverError> {
    let one = ExprField::parse("1").expect("constant field");
    let spec = ProblemSpec::new(cfg, grid.t_final(), 0.0, Arc::new(one), g)?;
    let trace = picard_solve(&spec, grid, opts)?;
    let sup_norm = trace.sup_norm();
    Ok(MajorantReport { uniqueness_supported: sup_norm <= opts.tol, sup_norm, trace })
}

/// [`solve_majorant`] for an expression in `tau` and `m`.
pub fn solve_majorant_expr(
    source: &str,
    cfg: OperatorConfig,
    grid: Grid,
    opts: &PicardOptions,
) -> Result<MajorantReport, SolverError> {
    let g = ExprField::parse_in(source, "tau", "m")
        .map_err(|source| ProblemError::Expression { field: "G".into(), source })?;
    solve_majorant(Arc::new(g), cfg, grid, opts)
}
