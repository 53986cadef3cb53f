use std::io;

use abc_hybrid::expression::{EvalError, ExprError};
use abc_hybrid::extremal::ExtremalError;
use abc_hybrid::mittag_leffler::MlError;
use abc_hybrid::problem::ProblemError;
use abc_hybrid::solver::SolverError;
use abc_hybrid::verifier::VerifierError;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Usage(String),
    Io(String),
    Parse(String),
    Validation(String),
    Eval(String),
    MaxSweeps(String),
    Diverged(String),
    Condition(String),
    Ordering(String),
    Counterexample(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) | CliError::Parse(_) | CliError::Validation(_) | CliError::Eval(_) => 1,
            CliError::MaxSweeps(_) | CliError::Diverged(_) => 2,
            CliError::Condition(_) => 3,
            CliError::Ordering(_) => 4,
            CliError::Counterexample(_) => 5,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io(_) => "io",
            CliError::Parse(_) => "parse",
            CliError::Validation(_) => "validation",
            CliError::Eval(_) => "eval",
            CliError::MaxSweeps(_) => "max-sweeps",
            CliError::Diverged(_) => "diverged",
            CliError::Condition(_) => "condition",
            CliError::Ordering(_) => "ordering",
            CliError::Counterexample(_) => "counterexample",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m)
            | CliError::Io(m)
            | CliError::Parse(m)
            | CliError::Validation(m)
            | CliError::Eval(m)
            | CliError::MaxSweeps(m)
            | CliError::Diverged(m)
            | CliError::Condition(m)
            | CliError::Ordering(m)
            | CliError::Counterexample(m) => m,
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<ProblemError> for CliError {
    fn from(e: ProblemError) -> Self {
        match e {
            ProblemError::Syntax { .. } | ProblemError::Expression { .. } => CliError::Parse(e.to_string()),
            ProblemError::Missing(_) | ProblemError::Validation { .. } => CliError::Validation(e.to_string()),
            ProblemError::Eval { .. } => CliError::Eval(e.to_string()),
        }
    }
}

impl From<ExprError> for CliError {
    fn from(e: ExprError) -> Self {
        CliError::Parse(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Eval(e.to_string())
    }
}

impl From<MlError> for CliError {
    fn from(e: MlError) -> Self {
        match e {
            MlError::InvalidParams(_) => CliError::Validation(e.to_string()),
            MlError::NonConvergence { .. } => CliError::Eval(e.to_string()),
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Validation(p) => p.into(),
            SolverError::InvalidOptions(_) => CliError::Usage(e.to_string()),
            SolverError::GridMismatch { .. } => CliError::Validation(e.to_string()),
            SolverError::Eval(_) | SolverError::Operator(_) => CliError::Eval(e.to_string()),
            SolverError::MaxSweepsExceeded(_) => CliError::MaxSweeps(e.to_string()),
            SolverError::Diverged(_) => CliError::Diverged(e.to_string()),
        }
    }
}

impl From<VerifierError> for CliError {
    fn from(e: VerifierError) -> Self {
        match e {
            VerifierError::InvalidArgument(_)
            | VerifierError::IdentityNotApplicable { .. }
            | VerifierError::DegenerateF { .. }
            | VerifierError::MonotonicityViolation { .. }
            | VerifierError::HypothesisViolation(_) => CliError::Validation(e.to_string()),
            VerifierError::SeriesNonConvergence(_)
            | VerifierError::Eval(_)
            | VerifierError::MittagLeffler(_)
            | VerifierError::Operator(_) => CliError::Eval(e.to_string()),
        }
    }
}

impl From<ExtremalError> for CliError {
    fn from(e: ExtremalError) -> Self {
        match e {
            ExtremalError::Solver(s) => s.into(),
            ExtremalError::Precondition(_) | ExtremalError::GridMismatch => CliError::Validation(e.to_string()),
            ExtremalError::PerturbedCondition { .. } => CliError::Condition(e.to_string()),
            ExtremalError::EnclosureViolation { .. } => CliError::Ordering(e.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_and_tags() {
        let cases = [
            (CliError::Usage(String::new()), 1, "usage"),
            (CliError::Io(String::new()), 1, "io"),
            (CliError::Parse(String::new()), 1, "parse"),
            (CliError::Validation(String::new()), 1, "validation"),
            (CliError::Eval(String::new()), 1, "eval"),
            (CliError::MaxSweeps(String::new()), 2, "max-sweeps"),
            (CliError::Diverged(String::new()), 2, "diverged"),
            (CliError::Condition(String::new()), 3, "condition"),
            (CliError::Ordering(String::new()), 4, "ordering"),
            (CliError::Counterexample(String::new()), 5, "counterexample"),
        ];
        for (e, code, tag) in cases {
            assert_eq!((e.exit_code(), e.tag()), (code, tag));
        }
    }

    #[test]
    fn enclosure_violation_is_an_ordering_failure() {
        let e: CliError = ExtremalError::EnclosureViolation { node: 3, value: 1.0, lower: 0.0, upper: 0.5, slack: 0.0 }.into();
        assert_eq!(e.exit_code(), 4);
    }
}
