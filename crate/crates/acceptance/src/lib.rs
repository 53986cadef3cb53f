//! The ten acceptance criteria, each returning a verdict and a one-line detail.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use abc_hybrid::extremal::{bracket_maximal, BracketOptions};
use abc_hybrid::mittag_leffler::{gamma, ml_one, ml_prabhakar, ml_two, MlParams};
use abc_hybrid::operators::{abc_derivative, Grid, OperatorConfig};
use abc_hybrid::problem::{Interval, NativeField, ProblemSpec};
use abc_hybrid::solver::{
    estimate_h_norm, estimate_lipschitz_f, existence_condition, picard_solve, solve_majorant_expr, Lattice,
    PicardOptions,
};
use abc_hybrid::verifier::{
    discretization_constant, fundamental_theorem_check, golden_identity_check, verify_comparison_samples,
    ComparisonOptions, GoldenParams,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub const GRIDS: [usize; 4] = [64, 128, 256, 512];
pub const MIN_ORDER: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self { passed, detail: detail.into() }
    }
}

pub struct Criterion {
    pub id: u8,
    pub name: &'static str,
    pub run: fn() -> Result<Verdict, String>,
}

pub fn criteria() -> Vec<Criterion> {
    vec![
        Criterion { id: 1, name: "mittag-leffler accuracy", run: ml_accuracy },
        Criterion { id: 2, name: "golden identity", run: golden_identity },
        Criterion { id: 3, name: "integral/derivative roundtrip", run: roundtrip },
        Criterion { id: 4, name: "manufactured solve", run: manufactured_solve },
        Criterion { id: 5, name: "contraction consistency", run: contraction },
        Criterion { id: 6, name: "extremal ordering", run: extremal_ordering },
        Criterion { id: 7, name: "comparison theorem", run: comparison },
        Criterion { id: 8, name: "growth inequality", run: growth_inequality },
        Criterion { id: 9, name: "uniqueness majorant", run: majorant },
        Criterion { id: 10, name: "determinism and cli contract", run: cli_contract },
    ]
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn timed<T>(f: impl FnOnce() -> Result<T, String>) -> Result<(T, Duration), String> {
    let start = Instant::now();
    let v = f()?;
    Ok((v, start.elapsed()))
}

fn orders(h: &[f64], e: &[f64]) -> Vec<f64> {
    (1..e.len()).map(|i| (e[i - 1] / e[i]).ln() / (h[i - 1] / h[i]).ln()).collect()
}

fn sci(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn min(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max(values: &[f64]) -> f64 {
    values.iter().copied().fold(0.0, f64::max)
}

fn ml_accuracy() -> Result<Verdict, String> {
    let ((exp_err, cos_err, red_err), elapsed) = timed(|| {
        let exp_err = (0..21)
            .map(|i| {
                let z = -10.0 + f64::from(i);
                Ok((ml_one(1.0, z).map_err(err)? - z.exp()).abs())
            })
            .collect::<Result<Vec<_>, String>>()?;
        let cos_err = (0..=60)
            .map(|i| {
                let x = 0.05 * f64::from(i);
                Ok((ml_two(2.0, 1.0, -x * x).map_err(err)? - x.cos()).abs())
            })
            .collect::<Result<Vec<_>, String>>()?;
        let mut red = Vec::new();
        for i in 0..=12 {
            let z = -3.0 + 0.5 * f64::from(i);
            for rho in [0.5, 1.5, 2.0, 3.0] {
                let v = ml_prabhakar(MlParams::new(1.0, rho, rho).map_err(err)?, z).map_err(err)?;
                red.push((v - z.exp() / gamma(rho)).abs());
            }
            let v = ml_prabhakar(MlParams::new(1.0, 1.0, 2.0).map_err(err)?, z).map_err(err)?;
            red.push((v - (1.0 + z) * z.exp()).abs());
            if z != 0.0 {
                red.push((ml_two(1.0, 2.0, z).map_err(err)? - z.exp_m1() / z).abs());
            }
            let v = ml_prabhakar(MlParams::new(0.7, 1.3, 2.5).map_err(err)?, 0.0).map_err(err)?;
            red.push((v - 1.0 / gamma(1.3)).abs());
        }
        Ok((max(&exp_err), max(&cos_err), max(&red)))
    })?;
    let passed = exp_err <= 1e-11 && cos_err <= 1e-10 && red_err <= 1e-12 && elapsed < Duration::from_secs(1);
    Ok(Verdict::new(
        passed,
        format!("exp {exp_err:.2e} <= 1e-11, cos {cos_err:.2e} <= 1e-10, reductions {red_err:.2e} <= 1e-12, {elapsed:.2?}"),
    ))
}

fn golden_identity() -> Result<Verdict, String> {
    let (table, elapsed) = timed(|| {
        let cfg = OperatorConfig::new(0.5).map_err(err)?;
        let params = GoldenParams::new(1.5, 1.0, -1.0).map_err(err)?;
        golden_identity_check(&cfg, &params, 1.0, &GRIDS).map_err(err)
    })?;
    let errors: Vec<f64> = table.rows.iter().map(|r| r.error).collect();
    let passed = table.errors_decreasing() && table.min_order() >= MIN_ORDER && elapsed < Duration::from_secs(30);
    Ok(Verdict::new(
        passed,
        format!("errors {}, min order {:.3} >= {MIN_ORDER}, {elapsed:.2?}", sci(&errors), table.min_order()),
    ))
}

fn roundtrip() -> Result<Verdict, String> {
    let cfg = OperatorConfig::new(0.5).map_err(err)?;
    let mut worst_const = 0.0f64;
    let mut min_orders = Vec::new();
    type Sampled = (&'static str, fn(f64) -> f64);
    let candidates: [Sampled; 2] =
        [("tau", |t| t), ("E_0.5(tau^0.5)", |t| ml_one(0.5, t.sqrt()).expect("moderate argument"))];
    for n in GRIDS {
        let grid = Grid::new(1.0, n).map_err(err)?;
        worst_const = worst_const.max(fundamental_theorem_check(&vec![1.0; grid.len()], grid, &cfg).map_err(err)?);
    }
    let mut details = Vec::new();
    for (name, w) in candidates {
        let mut h = Vec::new();
        let mut e = Vec::new();
        for n in GRIDS {
            let grid = Grid::new(1.0, n).map_err(err)?;
            let samples: Vec<f64> = grid.nodes().into_iter().map(w).collect();
            h.push(grid.step());
            e.push(fundamental_theorem_check(&samples, grid, &cfg).map_err(err)?);
        }
        let o = min(&orders(&h, &e));
        details.push(format!("{name} order {o:.3}"));
        min_orders.push(o);
    }
    let passed = worst_const <= 1e-12 && min(&min_orders) >= MIN_ORDER;
    Ok(Verdict::new(passed, format!("constant {worst_const:.2e} <= 1e-12, {}", details.join(", "))))
}

/// `ω = 1 + τ^½ E_{½,3/2}(−τ^½)` solves `f = 1`, `g = 2τ^½ E^2_{½,3/2}(−τ^½)`.
pub fn manufactured_spec() -> Result<ProblemSpec, String> {
    ProblemSpec::from_exprs(0.5, 1.0, 1.0, "1", "2*tau^0.5*mlf3(0.5, 1.5, 2, -tau^0.5)").map_err(err)
}

fn manufactured_exact(t: f64) -> Result<f64, String> {
    Ok(1.0 + t.sqrt() * ml_two(0.5, 1.5, -t.sqrt()).map_err(err)?)
}

fn manufactured_solve() -> Result<Verdict, String> {
    let spec = manufactured_spec()?;
    let ((errors, residuals), elapsed) = timed(|| {
        let mut errors = Vec::new();
        let mut residuals = Vec::new();
        for n in GRIDS {
            let grid = Grid::new(1.0, n).map_err(err)?;
            let trace = picard_solve(&spec, grid, &PicardOptions::default()).map_err(err)?;
            let mut e = 0.0f64;
            for (t, w) in grid.nodes().into_iter().zip(&trace.omega) {
                e = e.max((w - manufactured_exact(t)?).abs());
            }
            errors.push(e);
            residuals.push(trace.residual_sup);
        }
        Ok((errors, residuals))
    })?;
    let decreasing = errors.windows(2).all(|w| w[1] < w[0]);
    let worst_residual = max(&residuals);
    let passed = decreasing && worst_residual <= 1e-9 && elapsed < Duration::from_secs(60);
    Ok(Verdict::new(passed, format!("errors {}, residual_sup {worst_residual:.2e} <= 1e-9, {elapsed:.2?}", sci(&errors))))
}

fn contraction() -> Result<Verdict, String> {
    let mut rng = StdRng::seed_from_u64(5);
    let grid = Grid::new(1.0, 128).map_err(err)?;
    let lattice = Lattice::new(17, 33).map_err(err)?;
    let bx = Interval::new(-3.0, 3.0).map_err(err)?;
    let mut worst = 0.0f64;
    let mut accepted = 0;
    let mut tries = 0;
    while accepted < 20 {
        tries += 1;
        if tries > 200 {
            return Err("could not generate 20 specs satisfying the existence condition".into());
        }
        let alpha: f64 = rng.gen_range(0.3..0.8);
        let omega0: f64 = rng.gen_range(-1.0..1.0);
        let (a, b, p) = (rng.gen_range(0.0..0.2), rng.gen_range(0.1..0.8), rng.gen_range(0.3..1.2));
        let f = format!("1 + {a:?}*sin(omega)");
        let g = format!("{b:?}*tau^{p:?}*cos(omega)");
        let spec = ProblemSpec::from_exprs(alpha, 1.0, omega0, &f, &g).map_err(err)?;
        let l_f = estimate_lipschitz_f(&spec, bx, lattice).map_err(err)?;
        let h = estimate_h_norm(&spec, bx, lattice).map_err(err)?;
        if !existence_condition(&spec, l_f, h).map_err(err)?.satisfied {
            continue;
        }
        let trace = picard_solve(&spec, grid, &PicardOptions::default()).map_err(err)?;
        let ratio = trace.contraction_ratio(5).ok_or("too few sweeps to estimate a contraction ratio")?;
        worst = worst.max(ratio);
        accepted += 1;
    }

    let mut max_sweeps = 0;
    for (f, omega0) in [("1", 0.0), ("1", 2.5), ("2 + sin(3*tau)", -1.0), ("1/(1 + tau)", 0.7), ("3 - tau", 4.0)] {
        let spec = ProblemSpec::from_exprs(0.5, 1.0, omega0, f, "0").map_err(err)?;
        let trace = picard_solve(&spec, grid, &PicardOptions::default()).map_err(err)?;
        max_sweeps = max_sweeps.max(trace.iterations);
    }
    let passed = worst < 1.0 && max_sweeps <= 2;
    Ok(Verdict::new(
        passed,
        format!("20 specs, worst late ratio {worst:.3} < 1; closed-form family max sweeps {max_sweeps} <= 2"),
    ))
}

fn extremal_ordering() -> Result<Verdict, String> {
    let grid = Grid::new(1.0, 128).map_err(err)?;
    let opts = PicardOptions::default();
    let bracket = BracketOptions { eps0: 0.1, ratio: 0.5, levels: 4 };
    let result = bracket_maximal(&manufactured_spec()?, &bracket, grid, &opts).map_err(err)?;

    let closed = ProblemSpec::from_exprs(0.5, 1.0, 0.0, "1", "0").map_err(err)?;
    let closed_result = bracket_maximal(&closed, &bracket, grid, &opts).map_err(err)?;
    let target = 1.0 / bracket.ratio;
    let ratios = closed_result.gap_ratios();
    let worst = ratios.iter().fold(0.0f64, |m, r| m.max((r / target - 1.0).abs()));
    let passed = result.ordering_ok && !ratios.is_empty() && worst <= 0.01;
    let violation = result.first_violation.map_or("none".into(), |v| format!("level {} node {}", v.level, v.node));
    Ok(Verdict::new(
        passed,
        format!("manufactured ordering violation: {violation}; closed-form gap ratios {ratios:.6?} vs {target}"),
    ))
}

fn comparison() -> Result<Verdict, String> {
    let mut rng = StdRng::seed_from_u64(7);
    let grid = Grid::new(1.0, 64).map_err(err)?;
    let nodes = grid.nodes();
    let mut counterexamples = 0;
    let mut hypotheses_failed = 0;
    let mut nonpositive_upper = 0;
    let mut min_upper = f64::INFINITY;
    for _ in 0..100 {
        let alpha: f64 = rng.gen_range(0.3..0.8);
        let (fa, fb, fc) = (rng.gen_range(1.0..2.0), rng.gen_range(-0.3..0.3), rng.gen_range(0.5..3.0));
        let (k, c0, p) = (rng.gen_range(0.0..0.4), rng.gen_range(-1.0..1.0), rng.gen_range(0.3..1.0));
        let omega0: f64 = rng.gen_range(-1.0..1.0);
        let (d1, d2): (f64, f64) = (rng.gen_range(0.01..0.5), rng.gen_range(0.01..0.5));
        let f = move |t: f64, _x: f64| fa + fb * (fc * t).sin();
        let g = move |t: f64, x: f64| t.powf(p) * (c0 - k * (x - omega0));
        let cfg = OperatorConfig::new(alpha).map_err(err)?;
        let spec =
            ProblemSpec::new(cfg, 1.0, omega0, Arc::new(NativeField(f)), Arc::new(NativeField(g))).map_err(err)?;
        let sol = picard_solve(&spec, grid, &PicardOptions::default()).map_err(err)?;
        let e = nodes.iter().map(|t| ml_one(alpha, t.powf(alpha))).collect::<Result<Vec<_>, _>>().map_err(err)?;
        let v: Vec<f64> = (0..grid.len()).map(|n| sol.omega[n] - d1 * f(nodes[n], 0.0) * e[n]).collect();
        let w: Vec<f64> = (0..grid.len()).map(|n| sol.omega[n] + d2 * f(nodes[n], 0.0) * e[n]).collect();
        let c = discretization_constant(&cfg, grid).map_err(err)?;
        let opts = ComparisonOptions { slack_factor: 5.0, discretization_c: Some(c), ..Default::default() };
        let r = verify_comparison_samples(&spec, &v, &w, grid, &opts).map_err(err)?;
        counterexamples += usize::from(r.is_counterexample() || !r.conclusion_ok);
        hypotheses_failed += usize::from(!r.theorem_applies);
        nonpositive_upper += usize::from(r.upper_margins[1..].iter().any(|&m| m <= 0.0));
        min_upper = min_upper.min(r.min_upper_margin());
    }
    let passed = counterexamples == 0 && hypotheses_failed == 0 && nonpositive_upper == 0;
    Ok(Verdict::new(
        passed,
        format!(
            "100 instances: {counterexamples} conclusion violations, {hypotheses_failed} with hypotheses unmet at 5*C*h, \
             {nonpositive_upper} with a nonpositive upper margin (min {min_upper:.3e})"
        ),
    ))
}

fn growth_inequality() -> Result<Verdict, String> {
    let mut details = Vec::new();
    let mut passed = true;
    for alpha in [0.3, 0.5, 0.7] {
        let cfg = OperatorConfig::new(alpha).map_err(err)?;
        let grid = Grid::new(1.0, 256).map_err(err)?;
        let e = grid.sample(|t| ml_one(alpha, t.powf(alpha))).map_err(err)?;
        let d = abc_derivative(&e, grid, &cfg).map_err(err)?;
        let c = discretization_constant(&cfg, grid).map_err(err)?;
        let slack = c * grid.step();
        let scale = cfg.b() / (1.0 - alpha);
        let (worst_node, worst) =
            (1..grid.len()).map(|n| (n, d[n] - (scale * e[n] - slack))).fold((0, f64::INFINITY), |acc, x| {
                if x.1 < acc.1 {
                    x
                } else {
                    acc
                }
            });
        passed &= worst >= 0.0;
        details.push(format!("alpha {alpha}: min margin {worst:.3e} at node {worst_node}"));
    }
    Ok(Verdict::new(passed, details.join(", ")))
}

fn majorant() -> Result<Verdict, String> {
    let cfg = OperatorConfig::new(0.5).map_err(err)?;
    let grid = Grid::new(1.0, 256).map_err(err)?;
    let opts = PicardOptions::default();
    let zero = solve_majorant_expr("0", cfg, grid, &opts).map_err(err)?;
    let pos = solve_majorant_expr("tau^0.5", cfg, grid, &opts).map_err(err)?;
    let positive = pos.trace.omega[1..].iter().all(|&m| m > 0.0);
    let passed = zero.sup_norm <= 1e-12 && zero.uniqueness_supported && positive && !pos.uniqueness_supported;
    Ok(Verdict::new(
        passed,
        format!(
            "G=0: sup {:.1e} <= 1e-12; G=tau^0.5: sup {:.3e}, positive {positive}, criterion failed {}",
            zero.sup_norm, pos.sup_norm, !pos.uniqueness_supported
        ),
    ))
}

pub fn problems_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../problems")
}

struct CliRun {
    code: u8,
    stdout: String,
    stderr: String,
}

fn cli(args: &[&str]) -> CliRun {
    let mut out = Vec::new();
    let mut errs = Vec::new();
    let code = abc_hybrid_cli::run(std::iter::once("abc-hybrid").chain(args.iter().copied()), &mut out, &mut errs);
    CliRun { code, stdout: String::from_utf8_lossy(&out).into_owned(), stderr: String::from_utf8_lossy(&errs).into_owned() }
}

fn cli_contract() -> Result<Verdict, String> {
    let p = |name: &str| problems_dir().join(name).display().to_string();
    let dir = tempfile::tempdir().map_err(err)?;
    let mut bodies = Vec::new();
    for run in 0..2 {
        let csv = dir.path().join(format!("run{run}/trace.csv")).display().to_string();
        let r = cli(&["solve", &p("manufactured.prob"), "--n", "256", "--tol", "1e-10", "--out", &csv]);
        if r.code != 0 {
            return Ok(Verdict::new(false, format!("solve exited {}: {}", r.code, r.stderr.trim())));
        }
        bodies.push(std::fs::read(&csv).map_err(err)?);
    }
    let identical = bodies[0] == bodies[1];
    let rows = bodies[0].iter().filter(|&&b| b == b'\n').count() - 1;

    let out_dir = dir.path().display().to_string();
    let cases: Vec<(&str, Vec<String>, u8)> = vec![
        ("solve bad_g", vec!["solve".into(), p("bad_g.prob")], 1),
        ("solve bad_alpha", vec!["solve".into(), p("bad_alpha.prob")], 1),
        ("solve hard --max-sweeps 1", vec!["solve".into(), p("hard.prob"), "--max-sweeps".into(), "1".into()], 2),
        ("check condition", vec!["check".into(), p("condition.prob")], 0),
        ("check steep", vec!["check".into(), p("steep.prob")], 3),
        ("check bad_alpha", vec!["check".into(), p("bad_alpha.prob")], 1),
        ("mlf", vec!["mlf".into(), "--alpha".into(), "1".into(), "1".into()], 0),
        (
            "extremal",
            ["extremal", &p("manufactured.prob"), "--levels", "4", "--out-dir", &out_dir].map(String::from).to_vec(),
            0,
        ),
        (
            "compare crossing candidates",
            ["compare", &p("closed_form.prob"), "--lower", "-0.1+2*tau", "--upper", "0.1+tau", "--slack-factor", "1e4"]
                .into_iter()
                .map(String::from)
                .chain(["--out-dir".to_string(), out_dir.clone()])
                .collect(),
            5,
        ),
        ("unknown subcommand", vec!["frobnicate".into()], 1),
    ];
    let mut mismatches = Vec::new();
    for (label, args, expected) in &cases {
        let cwd_safe: Vec<String> = if args[0] == "solve" {
            let mut a = args.clone();
            a.extend(["--out".into(), dir.path().join("err/trace.csv").display().to_string()]);
            a
        } else {
            args.clone()
        };
        let refs: Vec<&str> = cwd_safe.iter().map(String::as_str).collect();
        let r = cli(&refs);
        let one_line = r.code == 0 || (r.stderr.lines().count() == 1 && r.stderr.starts_with("error["));
        if r.code != *expected || !one_line {
            mismatches.push(format!("{label}: exit {} (want {expected})", r.code));
        }
        if *label == "mlf" && r.stdout != "2.718281828459045\n" {
            mismatches.push(format!("mlf printed {:?}", r.stdout.trim()));
        }
    }
    let passed = identical && rows == 257 && mismatches.is_empty();
    Ok(Verdict::new(
        passed,
        format!(
            "csv byte-identical {identical}, {rows} rows; {} exit-code cases, mismatches: {}",
            cases.len(),
            if mismatches.is_empty() { "none".to_string() } else { mismatches.join("; ") }
        ),
    ))
}
