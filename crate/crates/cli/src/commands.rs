use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use abc_hybrid::expression::Expr;
use abc_hybrid::extremal::{bracket_with, BracketOptions, Sign};
use abc_hybrid::mittag_leffler::{ml_prabhakar, MlParams};
use abc_hybrid::operators::{Grid, KernelConvention, Normalization, OperatorConfig};
use abc_hybrid::problem::{load_problem, Interval, ProblemSpec};
use abc_hybrid::solver::{
    check_monotone_quotient, estimate_h_norm, estimate_lipschitz_f, existence_condition_with, picard_solve,
    ConditionReport, PicardOptions, SolutionTrace, SolverError,
};
use abc_hybrid::verifier::{
    golden_identity_check, reference_identity_check, verify_comparison, ComparisonOptions, GoldenParams, GoldenTable,
    Strictness,
};

use crate::artifacts::{fmt_f64, input_stem, render_csv, render_trace, sha256_hex, KeyValues, OutputSet};
use crate::error::CliError;
use crate::{CheckArgs, Command, CompareArgs, ConvergenceArgs, ExtremalArgs, GoldenArgs, MlfArgs, SolveArgs};

pub(crate) fn dispatch(command: &Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Solve(a) => solve(a, out),
        Command::Check(a) => check(a, out),
        Command::Extremal(a) => extremal(a, out),
        Command::Compare(a) => compare(a, out),
        Command::Mlf(a) => mlf(a, out),
        Command::Golden(a) => golden(a, out),
        Command::Convergence(a) => convergence(a, out),
    }
}

struct Loaded {
    spec: ProblemSpec,
    name: String,
    digest: String,
}

fn load(path: &Path) -> Result<Loaded, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let spec = load_problem(&text)?;
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(Loaded { spec, name, digest: sha256_hex(text.as_bytes()) })
}

fn problem_params(command: &str, loaded: &Loaded) -> KeyValues {
    let s = &loaded.spec;
    let mut kv = KeyValues::new();
    kv.push("command", command)
        .push("input", &loaded.name)
        .push("input_sha256", &loaded.digest)
        .push("alpha", s.alpha())
        .push("T", s.t_final)
        .push("omega0", s.omega0)
        .push("B", s.cfg.normalization.name())
        .push("kernel", s.cfg.kernel.name());
    kv
}

fn make_grid(spec: &ProblemSpec, n: usize) -> Result<Grid, CliError> {
    Grid::new(spec.t_final, n).map_err(|e| CliError::Usage(e.to_string()))
}

fn print(out: &mut dyn Write, kv: &KeyValues) -> Result<(), CliError> {
    out.write_all(kv.render().as_bytes())?;
    Ok(())
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}

/// Splits a Picard outcome into a trace and a deferred exit status.
fn trace_or_failure(result: Result<SolutionTrace, SolverError>) -> Result<(SolutionTrace, Option<CliError>), CliError> {
    match result {
        Ok(t) => Ok((t, None)),
        Err(SolverError::MaxSweepsExceeded(t)) => {
            let msg = format!(
                "no convergence after {} sweeps (last diff {:e}, residual {:e})",
                t.iterations,
                t.last_diff(),
                t.residual_sup
            );
            Ok((*t, Some(CliError::MaxSweeps(msg))))
        }
        Err(SolverError::Diverged(t)) => {
            let msg = format!("iteration diverged after {} sweeps (last diff {:e})", t.iterations, t.last_diff());
            Ok((*t, Some(CliError::Diverged(msg))))
        }
        Err(e) => Err(e.into()),
    }
}

fn condition_entries(kv: &mut KeyValues, prefix: &str, r: &ConditionReport) {
    kv.push(format!("{prefix}convention"), r.convention.name())
        .push(format!("{prefix}L_f"), r.l_f)
        .push(format!("{prefix}h_norm"), r.h_norm)
        .push(format!("{prefix}M_f"), r.m_f)
        .push(format!("{prefix}lhs"), r.lhs)
        .push(format!("{prefix}satisfied"), r.satisfied)
        .push(format!("{prefix}R"), opt(r.r))
        .push(format!("{prefix}R_standard"), opt(r.r_standard));
}

fn solve(a: &SolveArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let loaded = load(&a.file)?;
    let spec = &loaded.spec;
    let opts = PicardOptions::new(a.solver.tol, a.solver.max_sweeps)?;
    let grid = make_grid(spec, a.solver.n)?;
    let (trace, failure) = trace_or_failure(picard_solve(spec, grid, &opts))?;

    let csv_path = a.out.clone().unwrap_or_else(|| PathBuf::from(format!("{}.csv", input_stem(&a.file))));
    let mut outputs = OutputSet::from_csv_path(&csv_path);
    outputs.write_at(csv_path.clone(), &render_trace(&grid.nodes(), &trace.omega, &trace.residual))?;

    let mut params = problem_params("solve", &loaded);
    params.push("n", a.solver.n).push("tol", a.solver.tol).push("max_sweeps", a.solver.max_sweeps);

    let mut report = KeyValues::new();
    report
        .push("converged", failure.is_none())
        .push("iterations", trace.iterations)
        .push("last_diff", trace.last_diff())
        .push("residual_sup", trace.residual_sup)
        .push("contraction_ratio", opt(trace.contraction_ratio(5)))
        .push("sup_abs_omega", trace.sup_norm());
    match a.omega_box.or(spec.omega_box) {
        Some(b) => {
            let lattice = a.lattice.unwrap_or_default();
            let l_f = estimate_lipschitz_f(spec, b, lattice)?;
            let h = estimate_h_norm(spec, b, lattice)?;
            let r = existence_condition_with(spec, l_f, h, spec.cfg.kernel)?;
            report.push("condition.omega_box", format!("{},{}", b.lo, b.hi));
            condition_entries(&mut report, "condition.", &r);
        }
        None => {
            report.push("condition", "not evaluated (no omega box)");
        }
    }
    report.push("csv", csv_path.display());
    outputs.finish(&params, &report)?;
    print(out, &report)?;
    failure.map_or(Ok(()), Err)
}

fn require_box(cli: Option<Interval>, spec: &ProblemSpec) -> Result<Interval, CliError> {
    cli.or(spec.omega_box).ok_or_else(|| {
        CliError::Usage("no omega box: pass --omega-box a,b or declare omega_min/omega_max in the file".into())
    })
}

fn check(a: &CheckArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let loaded = load(&a.file)?;
    let spec = &loaded.spec;
    let b = require_box(a.omega_box, spec)?;
    let lattice = a.lattice.unwrap_or_default();
    let l_f = estimate_lipschitz_f(spec, b, lattice)?;
    let h = estimate_h_norm(spec, b, lattice)?;
    let mono = check_monotone_quotient(spec, b, lattice)?;
    let main = existence_condition_with(spec, l_f, h, spec.cfg.kernel)?;

    let mut kv = KeyValues::new();
    kv.push("omega_box", format!("{},{}", b.lo, b.hi))
        .push("lattice", format!("{},{}", lattice.times, lattice.states))
        .push("L_f", l_f)
        .push("h_norm", h)
        .push("monotone_quotient", mono.passed)
        .push("monotone_min_slope", mono.min_slope)
        .push("monotone_worst_at", format!("{},{}", mono.worst_at.0, mono.worst_at.1))
        .push("convention", spec.cfg.kernel.name())
        .push("lhs", main.lhs)
        .push("satisfied", main.satisfied)
        .push("R", opt(main.r))
        .push("R_standard", opt(main.r_standard));
    for conv in [KernelConvention::Gamma, KernelConvention::PaperHybrid] {
        let r = existence_condition_with(spec, l_f, h, conv)?;
        condition_entries(&mut kv, &format!("condition.{}.", conv.name()), &r);
    }
    print(out, &kv)?;
    if main.satisfied {
        Ok(())
    } else {
        Err(CliError::Condition(format!(
            "existence condition not satisfied under {}: lhs = {} >= 1",
            main.convention.name(),
            main.lhs
        )))
    }
}

fn extremal(a: &ExtremalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let loaded = load(&a.file)?;
    let spec = &loaded.spec;
    let opts = PicardOptions::new(a.solver.tol, a.solver.max_sweeps)?;
    let grid = make_grid(spec, a.solver.n)?;
    let bracket = BracketOptions { eps0: a.eps0, ratio: a.ratio, levels: a.levels };
    let sign = if a.minimal { Sign::Minus } else { Sign::Plus };
    let result = bracket_with(spec, &bracket, grid, &opts, sign)?;

    let label = if a.minimal { "min" } else { "max" };
    let mut outputs = OutputSet::new(&a.out_dir, &format!("{}_{label}", input_stem(&a.file)));
    let nodes = grid.nodes();
    for (k, trace) in result.traces.iter().enumerate() {
        outputs.write_data(&format!("_level{k}.csv"), &render_trace(&nodes, &trace.omega, &trace.residual))?;
    }

    let mut params = problem_params("extremal", &loaded);
    params
        .push("n", a.solver.n)
        .push("tol", a.solver.tol)
        .push("max_sweeps", a.solver.max_sweeps)
        .push("sign", label)
        .push("eps0", a.eps0)
        .push("ratio", a.ratio)
        .push("levels", a.levels);

    let mut report = KeyValues::new();
    report
        .push("bracket", if a.minimal { "minimal" } else { "maximal" })
        .push("eps_levels", join(&result.eps_levels))
        .push("iterations", result.traces.iter().map(|t| t.iterations.to_string()).collect::<Vec<_>>().join(","))
        .push("sup_gaps", join(&result.sup_gaps))
        .push("gap_ratios", join(&result.gap_ratios()))
        .push("ordering_ok", result.ordering_ok)
        .push("g_residual_at_origin", join(&result.g_residual_at_origin))
        .push("limit_error_bar", result.sup_gaps.last().copied().unwrap_or(f64::NAN));
    match &result.first_violation {
        Some(v) => report.push("first_violation", format!("level={} node={}", v.level, v.node)),
        None => report.push("first_violation", "none"),
    };
    outputs.finish(&params, &report)?;
    print(out, &report)?;

    match result.first_violation {
        Some(v) => Err(CliError::Ordering(format!(
            "traces not strictly ordered at level {} node {} (previous {}, current {})",
            v.level, v.node, v.previous, v.current
        ))),
        None => Ok(()),
    }
}

fn compare(a: &CompareArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let loaded = load(&a.file)?;
    let spec = &loaded.spec;
    let grid = make_grid(spec, a.n)?;
    let v = Expr::parse_with_vars(&a.lower, &["tau"])?;
    let w = Expr::parse_with_vars(&a.upper, &["tau"])?;
    let strictness = if a.nonstrict { Strictness::NonStrict } else { Strictness::Strict };
    let opts = ComparisonOptions { strictness, slack_factor: a.slack_factor, ..Default::default() };
    let r = verify_comparison(spec, &v, &w, grid, &opts)?;

    let nodes = grid.nodes();
    let vs = grid.sample(|t| v.eval(&[("tau", t)]))?;
    let ws = grid.sample(|t| w.eval(&[("tau", t)]))?;
    let mut outputs = OutputSet::new(&a.out_dir, &format!("{}_compare", input_stem(&a.file)));
    outputs.write_data(
        ".csv",
        &render_csv(
            "tau,lower,upper,lower_margin,upper_margin",
            &[&nodes, &vs, &ws, &r.lower_margins, &r.upper_margins],
        ),
    )?;

    let mut params = problem_params("compare", &loaded);
    params
        .push("n", a.n)
        .push("lower", &a.lower)
        .push("upper", &a.upper)
        .push("strictness", strictness.name())
        .push("slack_factor", a.slack_factor);

    let mut report = KeyValues::new();
    report
        .push("strictness", strictness.name())
        .push("discretization_c", r.discretization_c)
        .push("slack", r.slack)
        .push("initial_ok", r.initial_ok)
        .push("lower_ok", r.lower_ok)
        .push("upper_ok", r.upper_ok)
        .push("strict_ok", r.strict_ok)
        .push("min_lower_margin", r.min_lower_margin())
        .push("min_upper_margin", r.min_upper_margin())
        .push("Lg", opt(r.lg))
        .push("Lg_bound", r.lg_bound)
        .push("lg_condition_ok", r.lg_condition_ok)
        .push("theorem_applies", r.theorem_applies)
        .push("conclusion_ok", r.conclusion_ok)
        .push("first_conclusion_failure", r.first_conclusion_failure.map_or("none".into(), |n| n.to_string()));
    outputs.finish(&params, &report)?;
    print(out, &report)?;

    if r.is_counterexample() {
        let n = r.first_conclusion_failure.unwrap_or(0);
        return Err(CliError::Counterexample(format!(
            "hypotheses hold but v < w fails at node {n} (tau = {})",
            nodes[n]
        )));
    }
    Ok(())
}

fn mlf(a: &MlfArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let p = MlParams::new(a.alpha, a.beta, a.rho)?;
    let v = ml_prabhakar(p, a.z)?;
    writeln!(out, "{v}")?;
    Ok(())
}

fn golden_csv(table: &GoldenTable) -> String {
    let mut s = String::from("n,h,error,order\n");
    for (i, row) in table.rows.iter().enumerate() {
        let order = if i == 0 { String::new() } else { fmt_f64(table.orders[i - 1]) };
        s.push_str(&format!("{},{},{},{}\n", row.n, fmt_f64(row.h), fmt_f64(row.error), order));
    }
    s
}

fn golden(a: &GoldenArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let normalization = Normalization::from_name(&a.normalization)
        .ok_or_else(|| CliError::Usage(format!("normalization must be UNIT or AB, got {:?}", a.normalization)))?;
    let cfg = OperatorConfig::new(a.alpha)
        .map_err(|e| CliError::Validation(e.to_string()))?
        .with_normalization(normalization);
    let params = GoldenParams::new(a.beta, a.sigma, a.lambda)?;
    let table = if a.reference {
        reference_identity_check(&cfg, &params, a.t_final, &a.grids.0)?
    } else {
        golden_identity_check(&cfg, &params, a.t_final, &a.grids.0)?
    };
    let csv = golden_csv(&table);
    out.write_all(csv.as_bytes())?;
    if let Some(path) = &a.out {
        let mut outputs = OutputSet::from_csv_path(path);
        outputs.write_at(path.clone(), &csv)?;
        let mut kv = KeyValues::new();
        kv.push("command", "golden")
            .push("alpha", a.alpha)
            .push("beta", a.beta)
            .push("sigma", a.sigma)
            .push("lambda", a.lambda)
            .push("B", normalization.name())
            .push("T", a.t_final)
            .push("grids", a.grids.0.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(","))
            .push("reference", a.reference);
        let mut report = KeyValues::new();
        report.push("errors_decreasing", table.errors_decreasing()).push("min_order", table.min_order());
        outputs.finish(&kv, &report)?;
    }
    Ok(())
}

fn convergence(a: &ConvergenceArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let loaded = load(&a.file)?;
    let spec = &loaded.spec;
    let opts = PicardOptions::new(a.tol, a.max_sweeps)?;
    for w in a.grids.0.windows(2) {
        if w[1] <= w[0] || w[1] % w[0] != 0 {
            return Err(CliError::Usage(format!("grid {} must be a proper multiple of {}", w[1], w[0])));
        }
    }
    let mut traces = Vec::with_capacity(a.grids.0.len());
    for &n in &a.grids.0 {
        let grid = make_grid(spec, n)?;
        let (trace, failure) = trace_or_failure(picard_solve(spec, grid, &opts))?;
        if let Some(e) = failure {
            return Err(e);
        }
        traces.push(trace);
    }
    let diffs: Vec<f64> = traces
        .windows(2)
        .map(|w| {
            let r = w[1].grid.intervals() / w[0].grid.intervals();
            w[0].omega.iter().enumerate().fold(0.0f64, |m, (j, x)| m.max((x - w[1].omega[j * r]).abs()))
        })
        .collect();

    let mut csv = String::from("n,h,iterations,residual_sup,diff_to_next,order\n");
    for (i, t) in traces.iter().enumerate() {
        let diff = diffs.get(i).map_or(String::new(), |d| fmt_f64(*d));
        let order = if i >= 1 && i < diffs.len() {
            let ratio = t.grid.step() / traces[i - 1].grid.step();
            fmt_f64((diffs[i] / diffs[i - 1]).ln() / ratio.ln())
        } else {
            String::new()
        };
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            t.grid.intervals(),
            fmt_f64(t.grid.step()),
            t.iterations,
            fmt_f64(t.residual_sup),
            diff,
            order
        ));
    }
    out.write_all(csv.as_bytes())?;
    if let Some(path) = &a.out {
        let mut outputs = OutputSet::from_csv_path(path);
        outputs.write_at(path.clone(), &csv)?;
        let mut params = problem_params("convergence", &loaded);
        params
            .push("grids", a.grids.0.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(","))
            .push("tol", a.tol)
            .push("max_sweeps", a.max_sweeps);
        let mut report = KeyValues::new();
        report.push("diffs", join(&diffs));
        outputs.finish(&params, &report)?;
    }
    Ok(())
}
