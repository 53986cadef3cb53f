//! Hybrid problem instances and the problem-file format.
//!
//! A problem file is a list of `key = value` lines. Blank lines and
//! anything after `#` are ignored.
//!
//! ```text
//! alpha  = 0.5
//! T      = 1
//! omega0 = 1
//! f      = 1
//! g      = 2*tau^0.5*mlf3(0.5, 1.5, 2, -tau^0.5)
//! B      = UNIT            # or AB
//! kernel = GAMMA           # or PAPER_HYBRID
//! omega_min = -2           # optional, box for sampled estimates
//! omega_max = 4
//! ```
//!
//! `f` and `g` are expressions in `tau` and `omega`.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::expression::{EvalError, Expr, ExprError};
use crate::operators::{KernelConvention, Normalization, OperatorConfig};

/// Tolerance for `|g(0, ω₀)|` at load time.
pub const ORIGIN_TOL: f64 = 1e-10;

/// Variables allowed in `f` and `g`.
pub const STATE_VARS: [&str; 2] = ["tau", "omega"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing required key {0:?}")]
    Missing(&'static str),
    #[error("field {field}: {source}")]
    Expression { field: String, source: ExprError },
    #[error("field {field}: {message}")]
    Validation { field: String, message: String },
    #[error("field {field}: {source}")]
    Eval { field: String, source: EvalError },
}

impl ProblemError {
    fn validation(field: &str, message: impl Into<String>) -> Self {
        ProblemError::Validation { field: field.to_string(), message: message.into() }
    }
}

/// A scalar function of `(τ, x)`.
pub trait Field: Send + Sync {
    fn eval(&self, tau: f64, x: f64) -> Result<f64, EvalError>;

    fn describe(&self) -> String {
        "<native>".to_string()
    }
}

/// Expression-backed field with named time and state variables.
#[derive(Debug, Clone)]
pub struct ExprField {
    expr: Expr,
    time_var: &'static str,
    state_var: &'static str,
}

impl ExprField {
    pub fn new(expr: Expr, time_var: &'static str, state_var: &'static str) -> Self {
        Self { expr, time_var, state_var }
    }

    /// Parses a field in `tau` and `omega`.
    pub fn parse(source: &str) -> Result<Self, ExprError> {
        Self::parse_in(source, "tau", "omega")
    }

    pub fn parse_in(source: &str, time_var: &'static str, state_var: &'static str) -> Result<Self, ExprError> {
        let expr = Expr::parse_with_vars(source, &[time_var, state_var])?;
        Ok(Self::new(expr, time_var, state_var))
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }
}

impl Field for ExprField {
    fn eval(&self, tau: f64, x: f64) -> Result<f64, EvalError> {
        self.expr.eval(&[(self.time_var, tau), (self.state_var, x)])
    }

    fn describe(&self) -> String {
        self.expr.source().to_string()
    }
}

/// Adapter for native closures.
pub struct NativeField<F>(pub F);

impl<F> Field for NativeField<F>
where
    F: Fn(f64, f64) -> f64 + Send + Sync,
{
    fn eval(&self, tau: f64, x: f64) -> Result<f64, EvalError> {
        let v = (self.0)(tau, x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite("native field".into()))
        }
    }
}

/// `inner(τ, x) + shift`.
struct ShiftedField {
    inner: Arc<dyn Field>,
    shift: f64,
}

impl Field for ShiftedField {
    fn eval(&self, tau: f64, x: f64) -> Result<f64, EvalError> {
        Ok(self.inner.eval(tau, x)? + self.shift)
    }

    fn describe(&self) -> String {
        format!("({}) + {:?}", self.inner.describe(), self.shift)
    }
}

/// Closed interval of state values used by sampled estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, ProblemError> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(ProblemError::validation("omega_box", format!("[{lo}, {hi}] is not a finite interval")));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// `count ≥ 2` equally spaced points including both ends.
    pub fn lattice(&self, count: usize) -> Vec<f64> {
        let count = count.max(2);
        let step = (self.hi - self.lo) / (count - 1) as f64;
        (0..count).map(|i| if i + 1 == count { self.hi } else { self.lo + i as f64 * step }).collect()
    }
}

/// One instance of `ᴬᴮᶜD^α(ω/f(τ,ω)) = g(τ,ω)`, `ω(0) = ω₀`, on `[0, T]`.
#[derive(Clone)]
pub struct ProblemSpec {
    pub cfg: OperatorConfig,
    pub t_final: f64,
    pub omega0: f64,
    pub f: Arc<dyn Field>,
    pub g: Arc<dyn Field>,
    pub omega_box: Option<Interval>,
    /// Signed ε applied by [`ProblemSpec::perturbed`]; zero otherwise.
    pub perturbation: f64,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("cfg", &self.cfg)
            .field("t_final", &self.t_final)
            .field("omega0", &self.omega0)
            .field("f", &self.f.describe())
            .field("g", &self.g.describe())
            .field("omega_box", &self.omega_box)
            .field("perturbation", &self.perturbation)
            .finish()
    }
}

impl ProblemSpec {
    /// Builds and validates an instance.
    pub fn new(
        cfg: OperatorConfig,
        t_final: f64,
        omega0: f64,
        f: Arc<dyn Field>,
        g: Arc<dyn Field>,
    ) -> Result<Self, ProblemError> {
        let spec = Self { cfg, t_final, omega0, f, g, omega_box: None, perturbation: 0.0 };
        spec.validate()?;
        Ok(spec)
    }

    /// Convenience constructor from expression sources.
    pub fn from_exprs(alpha: f64, t_final: f64, omega0: f64, f: &str, g: &str) -> Result<Self, ProblemError> {
        let cfg = OperatorConfig::new(alpha).map_err(|e| ProblemError::validation("alpha", e.to_string()))?;
        let f = parse_field("f", f)?;
        let g = parse_field("g", g)?;
        Self::new(cfg, t_final, omega0, Arc::new(f), Arc::new(g))
    }

    pub fn with_box(mut self, omega_box: Interval) -> Self {
        self.omega_box = Some(omega_box);
        self
    }

    pub fn with_config(mut self, cfg: OperatorConfig) -> Self {
        self.cfg = cfg;
        self
    }

    pub fn alpha(&self) -> f64 {
        self.cfg.alpha()
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(ProblemError::validation("T", format!("T = {} must be positive", self.t_final)));
        }
        if !self.omega0.is_finite() {
            return Err(ProblemError::validation("omega0", "must be finite"));
        }
        let f0 = self
            .f
            .eval(0.0, self.omega0)
            .map_err(|source| ProblemError::Eval { field: "f".into(), source })?;
        if f0 == 0.0 {
            return Err(ProblemError::validation("f", "f(0, omega0) = 0; f must not vanish"));
        }
        let g0 = self
            .g
            .eval(0.0, self.omega0)
            .map_err(|source| ProblemError::Eval { field: "g".into(), source })?;
        if g0.abs() > ORIGIN_TOL {
            return Err(ProblemError::validation(
                "g",
                format!("g(0, omega0) = {g0} but the initial condition requires g(0, omega0) = 0"),
            ));
        }
        Ok(())
    }

    /// `ω₀ / f(0, ω₀)`.
    pub fn initial_quotient(&self) -> Result<f64, EvalError> {
        Ok(self.omega0 / self.f.eval(0.0, self.omega0)?)
    }

    /// The problem with `g → g + shift` and `ω₀ → ω₀ + shift`, not
    /// revalidated: `g(0, ω₀ + shift)` is generally nonzero.
    pub fn perturbed(&self, shift: f64) -> Self {
        let mut out = self.clone();
        if shift != 0.0 {
            out.g = Arc::new(ShiftedField { inner: self.g.clone(), shift });
            out.omega0 = self.omega0 + shift;
        }
        out.perturbation = self.perturbation + shift;
        out
    }
}

fn parse_field(field: &str, source: &str) -> Result<ExprField, ProblemError> {
    ExprField::parse(source).map_err(|source| ProblemError::Expression { field: field.to_string(), source })
}

fn parse_number(field: &str, line: usize, value: &str) -> Result<f64, ProblemError> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| ProblemError::Syntax { line, message: format!("{field}: {value:?} is not a finite number") })
}

/// Parses and validates a problem file.
pub fn load_problem(text: &str) -> Result<ProblemSpec, ProblemError> {
    let mut alpha = None;
    let mut t_final = None;
    let mut omega0 = None;
    let mut f_src = None;
    let mut g_src = None;
    let mut normalization = Normalization::Unit;
    let mut kernel = KernelConvention::Gamma;
    let mut omega_min = None;
    let mut omega_max = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| ProblemError::Syntax { line, message: format!("expected `key = value`, got {content:?}") })?;
        let key = key.trim();
        let value = value.trim();
        let dup = |present: bool| -> Result<(), ProblemError> {
            if present {
                Err(ProblemError::Syntax { line, message: format!("duplicate key {key:?}") })
            } else {
                Ok(())
            }
        };
        match key {
            "alpha" => {
                dup(alpha.is_some())?;
                alpha = Some(parse_number(key, line, value)?);
            }
            "T" => {
                dup(t_final.is_some())?;
                t_final = Some(parse_number(key, line, value)?);
            }
            "omega0" => {
                dup(omega0.is_some())?;
                omega0 = Some(parse_number(key, line, value)?);
            }
            "f" => {
                dup(f_src.is_some())?;
                f_src = Some(value.to_string());
            }
            "g" => {
                dup(g_src.is_some())?;
                g_src = Some(value.to_string());
            }
            "B" => {
                normalization = Normalization::from_name(value).ok_or_else(|| ProblemError::Syntax {
                    line,
                    message: format!("B must be UNIT or AB, got {value:?}"),
                })?;
            }
            "kernel" => {
                kernel = KernelConvention::from_name(value).ok_or_else(|| ProblemError::Syntax {
                    line,
                    message: format!("kernel must be GAMMA or PAPER_HYBRID, got {value:?}"),
                })?;
            }
            "omega_min" => {
                dup(omega_min.is_some())?;
                omega_min = Some(parse_number(key, line, value)?);
            }
            "omega_max" => {
                dup(omega_max.is_some())?;
                omega_max = Some(parse_number(key, line, value)?);
            }
            _ => return Err(ProblemError::Syntax { line, message: format!("unknown key {key:?}") }),
        }
    }

    let alpha = alpha.ok_or(ProblemError::Missing("alpha"))?;
    let t_final = t_final.ok_or(ProblemError::Missing("T"))?;
    let omega0 = omega0.ok_or(ProblemError::Missing("omega0"))?;
    let f = parse_field("f", &f_src.ok_or(ProblemError::Missing("f"))?)?;
    let g = parse_field("g", &g_src.ok_or(ProblemError::Missing("g"))?)?;

    let cfg = OperatorConfig::new(alpha)
        .map_err(|_| ProblemError::validation("alpha", format!("alpha = {alpha} must lie in (0, 1)")))?
        .with_normalization(normalization)
        .with_kernel(kernel);
    let mut spec = ProblemSpec::new(cfg, t_final, omega0, Arc::new(f), Arc::new(g))?;
    match (omega_min, omega_max) {
        (Some(lo), Some(hi)) => spec.omega_box = Some(Interval::new(lo, hi)?),
        (None, None) => {}
        _ => return Err(ProblemError::validation("omega_box", "omega_min and omega_max must be given together")),
    }
    Ok(spec)
}

/// Serializes the expression-backed parts of a spec back to the file format.
///
/// Native fields are written with their `describe()` text, which does not
/// round-trip.
pub fn write_problem(spec: &ProblemSpec) -> String {
    let mut out = String::new();
    out.push_str(&format!("alpha = {:?}\n", spec.alpha()));
    out.push_str(&format!("T = {:?}\n", spec.t_final));
    out.push_str(&format!("omega0 = {:?}\n", spec.omega0));
    out.push_str(&format!("f = {}\n", spec.f.describe()));
    out.push_str(&format!("g = {}\n", spec.g.describe()));
    out.push_str(&format!("B = {}\n", spec.cfg.normalization.name()));
    out.push_str(&format!("kernel = {}\n", spec.cfg.kernel.name()));
    if let Some(b) = spec.omega_box {
        out.push_str(&format!("omega_min = {:?}\nomega_max = {:?}\n", b.lo, b.hi));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const VALID: &str = "alpha = 0.5\nT = 1\nomega0 = 1\nf = 1\ng = tau^0.5\n";

    #[test]
    fn loads_valid_problem() {
        let spec = load_problem(VALID).unwrap();
        assert_eq!(spec.alpha(), 0.5);
        assert_eq!(spec.t_final, 1.0);
        assert_eq!(spec.omega0, 1.0);
        assert_eq!(spec.cfg.normalization, Normalization::Unit);
        assert_eq!(spec.cfg.kernel, KernelConvention::Gamma);
        assert_eq!(spec.g.eval(4.0, 0.0).unwrap(), 2.0);
        assert!(spec.omega_box.is_none());
    }

    #[test]
    fn comments_conventions_and_box() {
        let text = "# header\nalpha=0.3 # order\nT = 2\nomega0=0\nf = 2 + sin(omega)\ng = tau*exp(-omega^2)\nB = AB\nkernel = PAPER_HYBRID\nomega_min = -1\nomega_max = 1\n\n";
        let spec = load_problem(text).unwrap();
        assert_eq!(spec.cfg.normalization, Normalization::AtanganaBaleanu);
        assert_eq!(spec.cfg.kernel, KernelConvention::PaperHybrid);
        assert_eq!(spec.omega_box, Some(Interval { lo: -1.0, hi: 1.0 }));
    }

    #[test]
    fn rejects_nonvanishing_g_at_origin() {
        let err = load_problem(&VALID.replace("g = tau^0.5", "g = 1")).unwrap_err();
        match err {
            ProblemError::Validation { field, message } => {
                assert_eq!(field, "g");
                assert!(message.contains("g(0, omega0)"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_vanishing_f() {
        let err = load_problem(&VALID.replace("f = 1", "f = tau")).unwrap_err();
        assert!(matches!(err, ProblemError::Validation { ref field, .. } if field == "f"), "{err:?}");
    }

    #[test]
    fn rejects_alpha_outside_unit_interval() {
        let err = load_problem(&VALID.replace("alpha = 0.5", "alpha = 1.5")).unwrap_err();
        assert!(matches!(err, ProblemError::Validation { ref field, .. } if field == "alpha"));
    }

    #[test]
    fn syntax_and_expression_errors() {
        assert!(matches!(load_problem("alpha 0.5"), Err(ProblemError::Syntax { line: 1, .. })));
        assert!(matches!(load_problem(&format!("{VALID}bogus = 1")), Err(ProblemError::Syntax { line: 6, .. })));
        assert!(matches!(load_problem(&format!("{VALID}alpha = 0.4")), Err(ProblemError::Syntax { .. })));
        assert!(matches!(load_problem(&format!("{VALID}B = XYZ")), Err(ProblemError::Syntax { .. })));
        assert!(matches!(load_problem("alpha = 0.5\nT=1\nomega0=1\nf=1"), Err(ProblemError::Missing("g"))));
        assert!(matches!(
            load_problem(&VALID.replace("g = tau^0.5", "g = tau^0.5 + x")),
            Err(ProblemError::Expression { ref field, .. }) if field == "g"
        ));
        assert!(matches!(
            load_problem(&VALID.replace("f = 1", "f = (1")),
            Err(ProblemError::Expression { .. })
        ));
        assert!(matches!(load_problem(&format!("{VALID}omega_min = 1")), Err(ProblemError::Validation { .. })));
        assert!(matches!(
            load_problem(&format!("{VALID}omega_min = 1\nomega_max = 0")),
            Err(ProblemError::Validation { .. })
        ));
    }

    #[test]
    fn perturbed_shifts_g_and_initial_value() {
        let spec = load_problem(VALID).unwrap();
        let p = spec.perturbed(0.25);
        assert_eq!(p.omega0, 1.25);
        assert_eq!(p.perturbation, 0.25);
        assert_eq!(p.g.eval(1.0, 0.0).unwrap(), 1.25);
        let same = spec.perturbed(0.0);
        assert_eq!(same.omega0, 1.0);
    }

    #[test]
    fn write_then_load_round_trips() {
        let spec = load_problem("alpha=0.7\nT=2\nomega0=-0.5\nf=2+sin(tau)\ng=tau*omega\nB=AB\nomega_min=-3\nomega_max=3").unwrap();
        let again = load_problem(&write_problem(&spec)).unwrap();
        assert_eq!(again.cfg, spec.cfg);
        assert_eq!(again.omega_box, spec.omega_box);
        assert_eq!(again.f.eval(0.3, 0.2).unwrap(), spec.f.eval(0.3, 0.2).unwrap());
    }

    #[test]
    fn native_fields() {
        let spec = ProblemSpec::new(
            OperatorConfig::new(0.5).unwrap(),
            1.0,
            2.0,
            Arc::new(NativeField(|_t: f64, _x: f64| 1.0)),
            Arc::new(NativeField(|t: f64, x: f64| t * x)),
        )
        .unwrap();
        assert_eq!(spec.g.eval(2.0, 3.0).unwrap(), 6.0);
        assert!(NativeField(|_: f64, _: f64| f64::NAN).eval(0.0, 0.0).is_err());
    }

    #[test]
    fn interval_lattice() {
        let b = Interval::new(-1.0, 1.0).unwrap();
        assert_eq!(b.lattice(3), vec![-1.0, 0.0, 1.0]);
        assert_eq!(b.lattice(0).len(), 2);
        assert!(Interval::new(1.0, 1.0).is_err());
    }
}
