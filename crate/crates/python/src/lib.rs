//! Python bindings: Mittag-Leffler functions, grid operators, problems and
//! their solves, bracketing and the comparison checks.

use std::fs;

use abc_hybrid::expression::Expr;
use abc_hybrid::extremal::{bracket_with, BracketOptions, ExtremalError, Sign};
use abc_hybrid::mittag_leffler::{self as ml, MlParams};
use abc_hybrid::operators::{self as ops, Grid, KernelConvention, Normalization, OperatorConfig};
use abc_hybrid::problem::{load_problem, write_problem, Interval, ProblemSpec};
use abc_hybrid::solver::{
    check_monotone_quotient, estimate_h_norm, estimate_lipschitz_f, existence_condition_with, picard_solve,
    solve_majorant_expr, Lattice, PicardOptions, SolutionTrace, SolverError, DEFAULT_MAX_SWEEPS, DEFAULT_TOL,
};
use abc_hybrid::verifier::{
    golden_identity_check, reference_identity_check, verify_comparison, ComparisonOptions, GoldenParams,
    Strictness,
};
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(abc_hybrid, ConvergenceError, PyRuntimeError, "Picard iteration did not converge.");

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_error(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn solver_error(e: SolverError) -> PyErr {
    match e {
        SolverError::MaxSweepsExceeded(_) | SolverError::Diverged(_) => ConvergenceError::new_err(e.to_string()),
        SolverError::Validation(_) | SolverError::InvalidOptions(_) | SolverError::GridMismatch { .. } => {
            value_error(e)
        }
        SolverError::Eval(_) | SolverError::Operator(_) => runtime_error(e),
    }
}

fn config(alpha: f64, normalization: &str, kernel: &str) -> PyResult<OperatorConfig> {
    let norm = Normalization::from_name(normalization)
        .ok_or_else(|| PyValueError::new_err(format!("unknown normalization {normalization:?}; use UNIT or AB")))?;
    let kern = KernelConvention::from_name(kernel)
        .ok_or_else(|| PyValueError::new_err(format!("unknown kernel {kernel:?}; use GAMMA or PAPER_HYBRID")))?;
    Ok(OperatorConfig::new(alpha).map_err(value_error)?.with_normalization(norm).with_kernel(kern))
}

fn grid_for(t_final: f64, samples: &[f64]) -> PyResult<Grid> {
    if samples.len() < 2 {
        return Err(PyValueError::new_err("need at least two samples"));
    }
    Grid::new(t_final, samples.len() - 1).map_err(value_error)
}

/// Three-parameter Mittag-Leffler function `E^rho_{alpha,beta}(z)`.
#[pyfunction]
#[pyo3(signature = (alpha, z, beta = 1.0, rho = 1.0))]
fn mittag_leffler(alpha: f64, z: f64, beta: f64, rho: f64) -> PyResult<f64> {
    let p = MlParams::new(alpha, beta, rho).map_err(value_error)?;
    ml::ml_prabhakar(p, z).map_err(runtime_error)
}

/// Riemann-Liouville integral of uniform samples on `[0, t_final]`.
#[pyfunction]
fn rl_integral(samples: Vec<f64>, t_final: f64, alpha: f64) -> PyResult<Vec<f64>> {
    let grid = grid_for(t_final, &samples)?;
    ops::rl_integral(&samples, grid, alpha).map_err(runtime_error)
}

#[pyfunction]
#[pyo3(signature = (samples, t_final, alpha, normalization = "UNIT", kernel = "GAMMA"))]
fn ab_integral(samples: Vec<f64>, t_final: f64, alpha: f64, normalization: &str, kernel: &str) -> PyResult<Vec<f64>> {
    let grid = grid_for(t_final, &samples)?;
    ops::ab_integral(&samples, grid, &config(alpha, normalization, kernel)?).map_err(runtime_error)
}

#[pyfunction]
#[pyo3(signature = (samples, t_final, alpha, normalization = "UNIT"))]
fn abc_derivative(samples: Vec<f64>, t_final: f64, alpha: f64, normalization: &str) -> PyResult<Vec<f64>> {
    let grid = grid_for(t_final, &samples)?;
    ops::abc_derivative(&samples, grid, &config(alpha, normalization, "GAMMA")?).map_err(runtime_error)
}

/// `(n, h, error, order)`; `order` is `None` on the first row.
type GoldenRowTuple = (usize, f64, f64, Option<f64>);

#[pyfunction]
#[pyo3(signature = (alpha, beta, sigma, lam, grids, t_final = 1.0, normalization = "UNIT", reference = false))]
#[allow(clippy::too_many_arguments)]
fn golden_table(
    alpha: f64,
    beta: f64,
    sigma: f64,
    lam: f64,
    grids: Vec<usize>,
    t_final: f64,
    normalization: &str,
    reference: bool,
) -> PyResult<Vec<GoldenRowTuple>> {
    let cfg = config(alpha, normalization, "GAMMA")?;
    let params = GoldenParams::new(beta, sigma, lam).map_err(value_error)?;
    let table = if reference {
        reference_identity_check(&cfg, &params, t_final, &grids)
    } else {
        golden_identity_check(&cfg, &params, t_final, &grids)
    }
    .map_err(value_error)?;
    Ok(table
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| (r.n, r.h, r.error, i.checked_sub(1).map(|j| table.orders[j])))
        .collect())
}

/// `(sup |m|, uniqueness_supported)` for `D m = G(tau, m)`, `m(0) = 0`.
#[pyfunction]
#[pyo3(signature = (g, alpha, t_final = 1.0, n = 256))]
fn solve_majorant(g: &str, alpha: f64, t_final: f64, n: usize) -> PyResult<(f64, bool)> {
    let cfg = OperatorConfig::new(alpha).map_err(value_error)?;
    let grid = Grid::new(t_final, n).map_err(value_error)?;
    let r = solve_majorant_expr(g, cfg, grid, &PicardOptions::default()).map_err(solver_error)?;
    Ok((r.sup_norm, r.uniqueness_supported))
}

/// Converged Picard solution on a uniform grid.
#[pyclass(name = "Trace", frozen)]
struct PyTrace {
    inner: SolutionTrace,
}

#[pymethods]
impl PyTrace {
    #[getter]
    fn tau(&self) -> Vec<f64> {
        self.inner.grid.nodes()
    }

    #[getter]
    fn omega(&self) -> Vec<f64> {
        self.inner.omega.clone()
    }

    #[getter]
    fn residual(&self) -> Vec<f64> {
        self.inner.residual.clone()
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    #[getter]
    fn residual_sup(&self) -> f64 {
        self.inner.residual_sup
    }

    #[getter]
    fn iterate_diffs(&self) -> Vec<f64> {
        self.inner.iterate_diffs.clone()
    }

    #[pyo3(signature = (window = 5))]
    fn contraction_ratio(&self, window: usize) -> Option<f64> {
        self.inner.contraction_ratio(window)
    }

    fn __len__(&self) -> usize {
        self.inner.omega.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Trace(n={}, iterations={}, residual_sup={:e})",
            self.inner.grid.intervals(),
            self.inner.iterations,
            self.inner.residual_sup
        )
    }
}

/// A hybrid problem `D^alpha(omega/f) = g`, `omega(0) = omega0`.
#[pyclass(name = "Problem", frozen)]
struct PyProblem {
    spec: ProblemSpec,
}

impl PyProblem {
    fn omega_box(&self, bounds: Option<(f64, f64)>) -> PyResult<Interval> {
        match bounds {
            Some((lo, hi)) => Interval::new(lo, hi).map_err(value_error),
            None => self.spec.omega_box.ok_or_else(|| PyValueError::new_err("no omega box given or declared")),
        }
    }
}

#[pymethods]
impl PyProblem {
    #[new]
    #[pyo3(signature = (alpha, t_final, omega0, f, g, normalization = "UNIT", kernel = "GAMMA", omega_box = None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        alpha: f64,
        t_final: f64,
        omega0: f64,
        f: &str,
        g: &str,
        normalization: &str,
        kernel: &str,
        omega_box: Option<(f64, f64)>,
    ) -> PyResult<Self> {
        let cfg = config(alpha, normalization, kernel)?;
        let mut spec = ProblemSpec::from_exprs(alpha, t_final, omega0, f, g).map_err(value_error)?.with_config(cfg);
        if let Some((lo, hi)) = omega_box {
            spec = spec.with_box(Interval::new(lo, hi).map_err(value_error)?);
        }
        Ok(Self { spec })
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        load_problem(text).map(|spec| Self { spec }).map_err(value_error)
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| pyo3::exceptions::PyOSError::new_err(e.to_string()))?;
        Self::from_text(&text)
    }

    fn to_text(&self) -> String {
        write_problem(&self.spec)
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.spec.alpha()
    }

    #[getter]
    fn t_final(&self) -> f64 {
        self.spec.t_final
    }

    #[getter]
    fn omega0(&self) -> f64 {
        self.spec.omega0
    }

    #[pyo3(signature = (n = 256, tol = DEFAULT_TOL, max_sweeps = DEFAULT_MAX_SWEEPS))]
    fn solve(&self, n: usize, tol: f64, max_sweeps: usize) -> PyResult<PyTrace> {
        let grid = Grid::new(self.spec.t_final, n).map_err(value_error)?;
        let opts = PicardOptions::new(tol, max_sweeps).map_err(solver_error)?;
        picard_solve(&self.spec, grid, &opts).map(|inner| PyTrace { inner }).map_err(solver_error)
    }

    /// Sampled `L_f`, `||h||`, the monotone-quotient verdict and the existence
    /// condition under both kernel conventions.
    #[pyo3(signature = (omega_box = None, lattice = (33, 65)))]
    fn check<'py>(
        &self,
        py: Python<'py>,
        omega_box: Option<(f64, f64)>,
        lattice: (usize, usize),
    ) -> PyResult<Bound<'py, PyDict>> {
        let bx = self.omega_box(omega_box)?;
        let lattice = Lattice::new(lattice.0, lattice.1).map_err(solver_error)?;
        let l_f = estimate_lipschitz_f(&self.spec, bx, lattice).map_err(solver_error)?;
        let h = estimate_h_norm(&self.spec, bx, lattice).map_err(solver_error)?;
        let mono = check_monotone_quotient(&self.spec, bx, lattice).map_err(solver_error)?;
        let out = PyDict::new(py);
        out.set_item("L_f", l_f)?;
        out.set_item("h_norm", h)?;
        out.set_item("monotone_quotient", mono.passed)?;
        out.set_item("convention", self.spec.cfg.kernel.name())?;
        for kernel in [KernelConvention::Gamma, KernelConvention::PaperHybrid] {
            let r = existence_condition_with(&self.spec, l_f, h, kernel).map_err(solver_error)?;
            let entry = PyDict::new(py);
            entry.set_item("lhs", r.lhs)?;
            entry.set_item("satisfied", r.satisfied)?;
            entry.set_item("R", r.r)?;
            entry.set_item("R_standard", r.r_standard)?;
            entry.set_item("M_f", r.m_f)?;
            if kernel == self.spec.cfg.kernel {
                out.set_item("lhs", r.lhs)?;
                out.set_item("satisfied", r.satisfied)?;
            }
            out.set_item(kernel.name(), entry)?;
        }
        Ok(out)
    }

    /// Epsilon-perturbed solves approaching the maximal (or minimal) solution.
    #[pyo3(signature = (eps0 = 0.1, ratio = 0.5, levels = 8, minimal = false, n = 256))]
    fn bracket<'py>(
        &self,
        py: Python<'py>,
        eps0: f64,
        ratio: f64,
        levels: usize,
        minimal: bool,
        n: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let grid = Grid::new(self.spec.t_final, n).map_err(value_error)?;
        let sign = if minimal { Sign::Minus } else { Sign::Plus };
        let opts = BracketOptions { eps0, ratio, levels };
        let r = bracket_with(&self.spec, &opts, grid, &PicardOptions::default(), sign).map_err(|e| match e {
            ExtremalError::Solver(s) => solver_error(s),
            ExtremalError::Precondition(_) => value_error(e),
            other => runtime_error(other),
        })?;
        let out = PyDict::new(py);
        out.set_item("eps_levels", r.eps_levels.clone())?;
        out.set_item("traces", r.traces.iter().map(|t| t.omega.clone()).collect::<Vec<_>>())?;
        out.set_item("sup_gaps", r.sup_gaps.clone())?;
        out.set_item("gap_ratios", r.gap_ratios())?;
        out.set_item("ordering_ok", r.ordering_ok)?;
        out.set_item("first_violation", r.first_violation.map(|v| (v.level, v.node)))?;
        out.set_item("limit", r.limit)?;
        Ok(out)
    }

    /// Comparison check for candidates `lower(tau)` and `upper(tau)`.
    #[pyo3(signature = (lower, upper, n = 256, nonstrict = false, slack_factor = 2.0))]
    fn compare<'py>(
        &self,
        py: Python<'py>,
        lower: &str,
        upper: &str,
        n: usize,
        nonstrict: bool,
        slack_factor: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let grid = Grid::new(self.spec.t_final, n).map_err(value_error)?;
        let v = Expr::parse_with_vars(lower, &["tau"]).map_err(value_error)?;
        let w = Expr::parse_with_vars(upper, &["tau"]).map_err(value_error)?;
        let strictness = if nonstrict { Strictness::NonStrict } else { Strictness::Strict };
        let opts = ComparisonOptions { strictness, slack_factor, ..Default::default() };
        let r = verify_comparison(&self.spec, &v, &w, grid, &opts).map_err(value_error)?;
        let out = PyDict::new(py);
        out.set_item("strictness", r.strictness.name())?;
        out.set_item("slack", r.slack)?;
        out.set_item("lower_ok", r.lower_ok)?;
        out.set_item("upper_ok", r.upper_ok)?;
        out.set_item("strict_ok", r.strict_ok)?;
        out.set_item("initial_ok", r.initial_ok)?;
        out.set_item("Lg", r.lg)?;
        out.set_item("theorem_applies", r.theorem_applies)?;
        out.set_item("conclusion_ok", r.conclusion_ok)?;
        out.set_item("counterexample", r.is_counterexample())?;
        out.set_item("lower_margins", r.lower_margins)?;
        out.set_item("upper_margins", r.upper_margins)?;
        Ok(out)
    }

    fn __repr__(&self) -> String {
        format!(
            "Problem(alpha={}, t_final={}, omega0={}, f={:?}, g={:?})",
            self.spec.alpha(),
            self.spec.t_final,
            self.spec.omega0,
            self.spec.f.describe(),
            self.spec.g.describe()
        )
    }
}

#[pymodule]
#[pyo3(name = "abc_hybrid")]
fn abc_hybrid_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ConvergenceError", m.py().get_type::<ConvergenceError>())?;
    m.add_class::<PyProblem>()?;
    m.add_class::<PyTrace>()?;
    m.add_function(wrap_pyfunction!(mittag_leffler, m)?)?;
    m.add_function(wrap_pyfunction!(rl_integral, m)?)?;
    m.add_function(wrap_pyfunction!(ab_integral, m)?)?;
    m.add_function(wrap_pyfunction!(abc_derivative, m)?)?;
    m.add_function(wrap_pyfunction!(golden_table, m)?)?;
    m.add_function(wrap_pyfunction!(solve_majorant, m)?)?;
    Ok(())
}
