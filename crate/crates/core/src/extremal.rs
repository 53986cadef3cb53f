//! Maximal and minimal solutions as limits of ε-perturbed solves.
//!
//! Level `n` solves the problem with `g → g ± ε_n` and `ω₀ → ω₀ ± ε_n`,
//! `ε_n = eps0·ratioⁿ`.

use std::thread;

use thiserror::Error;

use crate::operators::Grid;
use crate::problem::ProblemSpec;
use crate::solver::{existence_condition, picard_solve, sup_diff, PicardOptions, SolutionTrace, SolverError};

#[derive(Debug, Clone, Error)]
pub enum ExtremalError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("perturbed existence condition fails at eps = {eps}: lhs = {lhs}")]
    PerturbedCondition { eps: f64, lhs: f64 },
    #[error("traces are on different grids")]
    GridMismatch,
    #[error("enclosure violated at node {node}: {value} not in [{lower}, {upper}] (slack {slack:.3e})")]
    EnclosureViolation { node: usize, value: f64, lower: f64, upper: f64, slack: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    /// Maximal solution: `+ε`.
    Plus,
    /// Minimal solution: `−ε`.
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Sampled constants for the optional perturbed existence check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrictBounds {
    pub l_f: f64,
    pub h_norm: f64,
}

/// Solves the perturbed problem; `strict` additionally requires the
/// existence condition with `‖h‖ + ε`.
pub fn solve_perturbed(
    spec: &ProblemSpec,
    eps: f64,
    sign: Sign,
    grid: Grid,
    opts: &PicardOptions,
    strict: Option<StrictBounds>,
) -> Result<SolutionTrace, ExtremalError> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(ExtremalError::Precondition(format!("eps = {eps} must be nonnegative")));
    }
    let perturbed = spec.perturbed(sign.value() * eps);
    if let Some(b) = strict {
        let report = existence_condition(&perturbed, b.l_f, b.h_norm + eps)?;
        if !report.satisfied {
            return Err(ExtremalError::PerturbedCondition { eps, lhs: report.lhs });
        }
    }
    Ok(picard_solve(&perturbed, grid, opts)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketOptions {
    pub eps0: f64,
    pub ratio: f64,
    pub levels: usize,
}

impl Default for BracketOptions {
    fn default() -> Self {
        Self { eps0: 0.1, ratio: 0.5, levels: 8 }
    }
}

impl BracketOptions {
    pub fn validate(&self) -> Result<(), ExtremalError> {
        if !(self.eps0 > 0.0 && self.eps0.is_finite()) {
            return Err(ExtremalError::Precondition(format!("eps0 = {} must be positive", self.eps0)));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(ExtremalError::Precondition(format!("ratio = {} must lie in (0, 1)", self.ratio)));
        }
        if self.levels < 2 {
            return Err(ExtremalError::Precondition(format!("levels = {} must be at least 2", self.levels)));
        }
        Ok(())
    }

    pub fn eps_levels(&self) -> Vec<f64> {
        (0..self.levels).map(|n| self.eps0 * self.ratio.powi(n as i32)).collect()
    }
}

/// First node where consecutive levels are not strictly ordered.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderingViolation {
    /// Index of the finer level `m`; compared against level `m − 1`.
    pub level: usize,
    pub node: usize,
    pub previous: f64,
    pub current: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BracketResult {
    pub sign: Sign,
    pub eps_levels: Vec<f64>,
    pub traces: Vec<SolutionTrace>,
    /// Last trace; its distance to the previous one is `sup_gaps.last()`.
    pub limit: Vec<f64>,
    pub ordering_ok: bool,
    pub first_violation: Option<OrderingViolation>,
    pub sup_gaps: Vec<f64>,
    /// `g(0, ω₀ ± ε) ± ε` per level; nonzero in general.
    pub g_residual_at_origin: Vec<f64>,
}

impl BracketResult {
    /// `sup_gaps[n] / sup_gaps[n+1]`.
    pub fn gap_ratios(&self) -> Vec<f64> {
        self.sup_gaps.windows(2).map(|w| w[0] / w[1]).collect()
    }
}

pub fn bracket_maximal(
    spec: &ProblemSpec,
    bracket: &BracketOptions,
    grid: Grid,
    opts: &PicardOptions,
) -> Result<BracketResult, ExtremalError> {
    bracket_with(spec, bracket, grid, opts, Sign::Plus)
}

pub fn bracket_minimal(
    spec: &ProblemSpec,
    bracket: &BracketOptions,
    grid: Grid,
    opts: &PicardOptions,
) -> Result<BracketResult, ExtremalError> {
    bracket_with(spec, bracket, grid, opts, Sign::Minus)
}

/// Runs every level on its own scoped thread and assembles in level order.
pub fn bracket_with(
    spec: &ProblemSpec,
    bracket: &BracketOptions,
    grid: Grid,
    opts: &PicardOptions,
    sign: Sign,
) -> Result<BracketResult, ExtremalError> {
    bracket.validate()?;
    let eps_levels = bracket.eps_levels();

    let results: Vec<Result<SolutionTrace, ExtremalError>> = thread::scope(|scope| {
        let handles: Vec<_> = eps_levels
            .iter()
            .map(|&eps| scope.spawn(move || solve_perturbed(spec, eps, sign, grid, opts, None)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("bracket level panicked")).collect()
    });
    let traces = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut first_violation = None;
    'outer: for m in 1..traces.len() {
        let (prev, cur) = (&traces[m - 1].omega, &traces[m].omega);
        for node in 1..cur.len() {
            let ordered = match sign {
                Sign::Plus => cur[node] < prev[node],
                Sign::Minus => cur[node] > prev[node],
            };
            if !ordered {
                first_violation = Some(OrderingViolation { level: m, node, previous: prev[node], current: cur[node] });
                break 'outer;
            }
        }
    }

    let sup_gaps = traces.windows(2).map(|w| sup_diff(&w[0].omega, &w[1].omega)).collect();
    let g_residual_at_origin = eps_levels
        .iter()
        .map(|&eps| {
            let shift = sign.value() * eps;
            spec.g.eval(0.0, spec.omega0 + shift).map(|g| g + shift)
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(SolverError::from)?;

    Ok(BracketResult {
        sign,
        limit: traces.last().map(|t| t.omega.clone()).unwrap_or_default(),
        eps_levels,
        traces,
        ordering_ok: first_violation.is_none(),
        first_violation,
        sup_gaps,
        g_residual_at_origin,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnclosureReport {
    pub slack: f64,
    /// `min_n (maximal_n − solution_n)`.
    pub upper_margin: f64,
    /// `min_n (solution_n − minimal_n)`.
    pub lower_margin: f64,
}

/// Checks `minimal − slack ≤ solution ≤ maximal + slack` at every node,
/// with `slack = C·h + ε_last`.
pub fn check_enclosure(
    solution: &SolutionTrace,
    maximal: &SolutionTrace,
    minimal: &SolutionTrace,
    discretization_c: f64,
) -> Result<EnclosureReport, ExtremalError> {
    if solution.grid != maximal.grid || solution.grid != minimal.grid {
        return Err(ExtremalError::GridMismatch);
    }
    let eps_last = maximal.perturbation.abs().max(minimal.perturbation.abs());
    let slack = discretization_c.abs() * solution.grid.step() + eps_last;
    let mut upper_margin = f64::INFINITY;
    let mut lower_margin = f64::INFINITY;
    for (node, ((&w, &hi), &lo)) in solution.omega.iter().zip(&maximal.omega).zip(&minimal.omega).enumerate() {
        if !(w <= hi + slack && w >= lo - slack) {
            return Err(ExtremalError::EnclosureViolation { node, value: w, lower: lo, upper: hi, slack });
        }
        upper_margin = upper_margin.min(hi - w);
        lower_margin = lower_margin.min(w - lo);
    }
    Ok(EnclosureReport { slack, upper_margin, lower_margin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mittag_leffler::gamma;

    fn closed_form_spec(omega0: f64) -> ProblemSpec {
        ProblemSpec::from_exprs(0.5, 1.0, omega0, "1", "0").unwrap()
    }

    fn manufactured() -> ProblemSpec {
        ProblemSpec::from_exprs(0.5, 1.0, 1.0, "1", "2*tau^0.5*mlf3(0.5, 1.5, 2, -tau^0.5)").unwrap()
    }

    fn closed_form(omega0: f64, eps: f64, alpha: f64, t: f64) -> f64 {
        omega0 + eps + eps * ((1.0 - alpha) + t.powf(alpha) / gamma(alpha))
    }

    #[test]
    fn zero_perturbation_matches_plain_solve() {
        let s = manufactured();
        let grid = Grid::new(1.0, 32).unwrap();
        let opts = PicardOptions::default();
        let a = solve_perturbed(&s, 0.0, Sign::Plus, grid, &opts, None).unwrap();
        let b = picard_solve(&s, grid, &opts).unwrap();
        assert_eq!(a, b);
        assert!(solve_perturbed(&s, -1.0, Sign::Plus, grid, &opts, None).is_err());
    }

    #[test]
    fn constant_forcing_closed_form() {
        let s = closed_form_spec(1.0);
        let grid = Grid::new(1.0, 40).unwrap();
        let trace = solve_perturbed(&s, 0.1, Sign::Plus, grid, &PicardOptions::default(), None).unwrap();
        assert!(trace.iterations <= 2);
        for (w, t) in trace.omega.iter().zip(grid.nodes()) {
            assert!((w - closed_form(1.0, 0.1, 0.5, t)).abs() < 1e-13, "{t}: {w}");
        }
    }

    #[test]
    fn perturbed_manufactured_is_above() {
        let s = manufactured();
        let grid = Grid::new(1.0, 64).unwrap();
        let opts = PicardOptions::default();
        let base = picard_solve(&s, grid, &opts).unwrap();
        let up = solve_perturbed(&s, 0.05, Sign::Plus, grid, &opts, None).unwrap();
        assert!(up.omega.iter().zip(&base.omega).all(|(u, b)| u > b));
    }

    #[test]
    fn strict_mode_checks_perturbed_condition() {
        let s = ProblemSpec::from_exprs(0.5, 1.0, 0.5, "1 + omega/10", "tau^0.5*exp(-omega^2)").unwrap();
        let grid = Grid::new(1.0, 32).unwrap();
        let opts = PicardOptions::default();
        let ok = solve_perturbed(&s, 0.1, Sign::Plus, grid, &opts, Some(StrictBounds { l_f: 0.1, h_norm: 1.0 }));
        assert!(ok.is_ok());
        let bad = solve_perturbed(&s, 0.1, Sign::Plus, grid, &opts, Some(StrictBounds { l_f: 5.0, h_norm: 1.0 }));
        assert!(matches!(bad, Err(ExtremalError::PerturbedCondition { .. })));
    }

    #[test]
    fn closed_form_maximal_bracket() {
        let s = closed_form_spec(0.0);
        let grid = Grid::new(1.0, 32).unwrap();
        let b = BracketOptions { eps0: 0.4, ratio: 0.5, levels: 4 };
        let r = bracket_maximal(&s, &b, grid, &PicardOptions::default()).unwrap();
        assert_eq!(r.eps_levels, vec![0.4, 0.2, 0.1, 0.05]);
        assert!(r.ordering_ok && r.first_violation.is_none());
        for (trace, eps) in r.traces.iter().zip(&r.eps_levels) {
            for (w, t) in trace.omega.iter().zip(grid.nodes()) {
                assert!((w - closed_form(0.0, *eps, 0.5, t)).abs() < 1e-13);
            }
        }
        for q in r.gap_ratios() {
            assert!((q - 2.0).abs() < 0.02, "{q}");
        }
        assert_eq!(r.limit, r.traces[3].omega);
        assert_eq!(r.g_residual_at_origin, vec![0.4, 0.2, 0.1, 0.05]);
    }

    #[test]
    fn minimal_bracket_is_reflection() {
        let s = closed_form_spec(0.0);
        let grid = Grid::new(1.0, 32).unwrap();
        let b = BracketOptions { eps0: 0.4, ratio: 0.5, levels: 4 };
        let opts = PicardOptions::default();
        let hi = bracket_maximal(&s, &b, grid, &opts).unwrap();
        let lo = bracket_minimal(&s, &b, grid, &opts).unwrap();
        assert!(lo.ordering_ok);
        for (a, b) in hi.traces.iter().zip(&lo.traces) {
            for (x, y) in a.omega.iter().zip(&b.omega) {
                assert_eq!(*x, -*y);
            }
        }
    }

    #[test]
    fn manufactured_bracket_is_ordered() {
        let s = manufactured();
        let grid = Grid::new(1.0, 64).unwrap();
        let b = BracketOptions { eps0: 0.1, ratio: 0.5, levels: 2 };
        let r = bracket_maximal(&s, &b, grid, &PicardOptions::default()).unwrap();
        assert!(r.ordering_ok);
    }

    #[test]
    fn bracket_is_deterministic() {
        let s = ProblemSpec::from_exprs(0.5, 1.0, 0.5, "1 + omega/10", "tau^0.5*exp(-omega^2)").unwrap();
        let grid = Grid::new(1.0, 32).unwrap();
        let b = BracketOptions::default();
        let opts = PicardOptions::default();
        assert_eq!(bracket_maximal(&s, &b, grid, &opts).unwrap(), bracket_maximal(&s, &b, grid, &opts).unwrap());
    }

    #[test]
    fn preconditions() {
        let s = closed_form_spec(0.0);
        let grid = Grid::new(1.0, 8).unwrap();
        let opts = PicardOptions::default();
        for b in [
            BracketOptions { eps0: 0.1, ratio: 1.0, levels: 4 },
            BracketOptions { eps0: 0.0, ratio: 0.5, levels: 4 },
            BracketOptions { eps0: -0.1, ratio: 0.5, levels: 4 },
            BracketOptions { eps0: 0.1, ratio: 0.5, levels: 1 },
        ] {
            assert!(matches!(bracket_maximal(&s, &b, grid, &opts), Err(ExtremalError::Precondition(_))));
        }
    }

    #[test]
    fn enclosure() {
        let s = manufactured();
        let grid = Grid::new(1.0, 64).unwrap();
        let opts = PicardOptions::default();
        let b = BracketOptions { eps0: 0.1, ratio: 0.5, levels: 4 };
        let hi = bracket_maximal(&s, &b, grid, &opts).unwrap();
        let lo = bracket_minimal(&s, &b, grid, &opts).unwrap();
        let sol = picard_solve(&s, grid, &opts).unwrap();
        let max = hi.traces.last().unwrap();
        let min = lo.traces.last().unwrap();
        let report = check_enclosure(&sol, max, min, 1.0).unwrap();
        assert!(report.upper_margin > 0.0 && report.lower_margin > 0.0);

        let mut bad = sol.clone();
        bad.omega[17] += 1.0;
        match check_enclosure(&bad, max, min, 1.0) {
            Err(ExtremalError::EnclosureViolation { node, .. }) => assert_eq!(node, 17),
            other => panic!("{other:?}"),
        }

        let coarse = picard_solve(&s, Grid::new(1.0, 32).unwrap(), &opts).unwrap();
        assert!(matches!(check_enclosure(&coarse, max, min, 1.0), Err(ExtremalError::GridMismatch)));
    }

    #[test]
    fn closed_form_enclosure_is_exact() {
        let s = closed_form_spec(0.3);
        let grid = Grid::new(1.0, 16).unwrap();
        let opts = PicardOptions::default();
        let b = BracketOptions { eps0: 0.1, ratio: 0.5, levels: 3 };
        let hi = bracket_maximal(&s, &b, grid, &opts).unwrap();
        let lo = bracket_minimal(&s, &b, grid, &opts).unwrap();
        let sol = picard_solve(&s, grid, &opts).unwrap();
        let r = check_enclosure(&sol, hi.traces.last().unwrap(), lo.traces.last().unwrap(), 0.0).unwrap();
        assert!((r.upper_margin - 0.025 * 1.5).abs() < 1e-14);
        assert!((r.upper_margin - r.lower_margin).abs() < 1e-14);
    }
}
