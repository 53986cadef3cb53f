use std::sync::Arc;

use abc_hybrid::expression::Expr;
use abc_hybrid::extremal::{bracket_maximal, bracket_minimal, BracketOptions};
use abc_hybrid::mittag_leffler::{gamma, ml_one, ml_prabhakar, ml_two, MlParams};
use abc_hybrid::operators::{ab_integral, abc_derivative, rl_integral, Grid, KernelConvention, OperatorConfig};
use abc_hybrid::problem::{load_problem, write_problem, Interval, NativeField, ProblemSpec};
use abc_hybrid::solver::{estimate_h_norm, estimate_lipschitz_f, existence_condition, picard_solve, Lattice, PicardOptions};
use abc_hybrid::verifier::{discretization_constant, verify_comparison_samples, ComparisonOptions};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

/// `f = 1 + a sin(omega)`, `g = b tau^p cos(omega)`.
fn generated(alpha: f64, omega0: f64, a: f64, b: f64, p: f64) -> ProblemSpec {
    ProblemSpec::from_exprs(alpha, 1.0, omega0, &format!("1 + {a:?}*sin(omega)"), &format!("{b:?}*tau^{p:?}*cos(omega)"))
        .unwrap()
        .with_box(Interval::new(-3.0, 3.0).unwrap())
}

fn spec_params() -> impl Strategy<Value = (f64, f64, f64, f64, f64)> {
    (0.3f64..0.8, -1.0f64..1.0, 0.0f64..0.15, 0.0f64..0.5, 0.3f64..1.2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ml_one_at_alpha_one_is_exp(z in -10.0f64..10.0) {
        let v = ml_one(1.0, z).unwrap();
        prop_assert!((v - z.exp()).abs() <= 1e-11 * z.exp().max(1.0));
    }

    #[test]
    fn ml_two_at_alpha_two_is_cos(x in 0.0f64..3.0) {
        prop_assert!((ml_two(2.0, 1.0, -x * x).unwrap() - x.cos()).abs() <= 1e-10);
    }

    #[test]
    fn prabhakar_reductions(alpha in 0.5f64..1.5, beta in 0.3f64..2.5, z in -2.0f64..2.0) {
        let three = ml_prabhakar(MlParams::new(alpha, beta, 1.0).unwrap(), z).unwrap();
        let two = ml_two(alpha, beta, z).unwrap();
        prop_assert!(close(three, two, 1e-12));
        prop_assert!(close(ml_two(alpha, beta, 0.0).unwrap(), 1.0 / gamma(beta), 1e-15));
        // E_{α,β}(z) = 1/Γ(β) + z E_{α,α+β}(z)
        let shifted = 1.0 / gamma(beta) + z * ml_two(alpha, alpha + beta, z).unwrap();
        prop_assert!(close(two, shifted, 1e-12));
    }

    #[test]
    fn operators_are_linear(alpha in 0.1f64..0.9, a in -3.0f64..3.0, b in -3.0f64..3.0, n in 4usize..48) {
        let grid = Grid::new(1.5, n).unwrap();
        let cfg = OperatorConfig::new(alpha).unwrap();
        let x = grid.sample(|t| Ok::<_, ()>(t.sin() + 1.0)).unwrap();
        let y = grid.sample(|t| Ok::<_, ()>(t * t)).unwrap();
        let combo: Vec<f64> = x.iter().zip(&y).map(|(x, y)| a * x + b * y).collect();
        let d = abc_derivative(&combo, grid, &cfg).unwrap();
        let dx = abc_derivative(&x, grid, &cfg).unwrap();
        let dy = abc_derivative(&y, grid, &cfg).unwrap();
        let i = rl_integral(&combo, grid, alpha).unwrap();
        let ix = rl_integral(&x, grid, alpha).unwrap();
        let iy = rl_integral(&y, grid, alpha).unwrap();
        for k in 0..grid.len() {
            prop_assert!(close(d[k], a * dx[k] + b * dy[k], 1e-12));
            prop_assert!(close(i[k], a * ix[k] + b * iy[k], 1e-12));
        }
        prop_assert_eq!(d[0], 0.0);
        prop_assert_eq!(i[0], 0.0);
    }

    #[test]
    fn constants_have_zero_derivative_and_exact_integrals(alpha in 0.1f64..0.8, c in -5.0f64..5.0, n in 2usize..64) {
        let grid = Grid::new(1.5, n).unwrap();
        let cfg = OperatorConfig::new(alpha).unwrap();
        let samples = vec![c; grid.len()];
        prop_assert!(abc_derivative(&samples, grid, &cfg).unwrap().iter().all(|d| d.abs() <= 1e-12 * c.abs().max(1.0)));
        let ab = ab_integral(&samples, grid, &cfg).unwrap();
        for (k, t) in grid.nodes().into_iter().enumerate() {
            let exact = c * ((1.0 - alpha) / cfg.b() + alpha * t.powf(alpha) / (cfg.b() * gamma(alpha + 1.0)));
            prop_assert!(close(ab[k], exact, 1e-12), "{} {}", ab[k], exact);
        }
    }

    #[test]
    fn problem_files_round_trip((alpha, omega0, a, b, p) in spec_params(), paper in any::<bool>()) {
        let mut spec = generated(alpha, omega0, a, b, p);
        if paper {
            let cfg = spec.cfg.with_kernel(KernelConvention::PaperHybrid);
            spec = spec.with_config(cfg);
        }
        let text = write_problem(&spec);
        let back = load_problem(&text).unwrap();
        prop_assert_eq!(write_problem(&back), text);
        for (t, x) in [(0.25, 0.5), (0.9, -1.3)] {
            prop_assert_eq!(back.g.eval(t, x).unwrap(), spec.g.eval(t, x).unwrap());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn picard_contracts_when_condition_holds((alpha, omega0, a, b, p) in spec_params()) {
        let spec = generated(alpha, omega0, a, b, p);
        let bx = spec.omega_box.unwrap();
        let lattice = Lattice::new(17, 33).unwrap();
        let l_f = estimate_lipschitz_f(&spec, bx, lattice).unwrap();
        let h = estimate_h_norm(&spec, bx, lattice).unwrap();
        let report = existence_condition(&spec, l_f, h).unwrap();
        prop_assume!(report.satisfied);
        let grid = Grid::new(1.0, 64).unwrap();
        let trace = picard_solve(&spec, grid, &PicardOptions::default()).unwrap();
        if let Some(r) = trace.contraction_ratio(5) {
            prop_assert!(r < 1.0, "ratio {r}");
        }
        prop_assert!(trace.last_diff() <= 1e-10);
        prop_assert_eq!(trace.omega[0], omega0);
        let again = picard_solve(&spec, grid, &PicardOptions::default()).unwrap();
        prop_assert_eq!(&again.omega, &trace.omega);
    }

    #[test]
    fn bracket_levels_are_ordered((alpha, omega0, a, b, p) in spec_params(), eps0 in 0.01f64..0.3, ratio in 0.3f64..0.8) {
        let spec = generated(alpha, omega0, a, b, p);
        let grid = Grid::new(1.0, 48).unwrap();
        let opts = PicardOptions::default();
        let bracket = BracketOptions { eps0, ratio, levels: 4 };
        let hi = bracket_maximal(&spec, &bracket, grid, &opts).unwrap();
        let lo = bracket_minimal(&spec, &bracket, grid, &opts).unwrap();
        prop_assert!(hi.ordering_ok, "{:?}", hi.first_violation);
        prop_assert!(lo.ordering_ok, "{:?}", lo.first_violation);
        let sol = picard_solve(&spec, grid, &opts).unwrap();
        for n in 1..grid.len() {
            prop_assert!(lo.limit[n] < sol.omega[n] && sol.omega[n] < hi.limit[n]);
        }
        prop_assert!(hi.sup_gaps.windows(2).all(|w| w[1] < w[0]));
    }
}

/// f depends on tau only, g is nonincreasing in omega with g(0, omega0) = 0;
/// v and w are the solved trace shifted by `∓δ f E_α(τ^α)`.
#[test]
fn randomized_comparison_instances_have_no_counterexamples() {
    let mut rng = StdRng::seed_from_u64(0x5eed_0001);
    let grid = Grid::new(1.0, 64).unwrap();
    let mut checked = 0;
    for _ in 0..40 {
        let alpha: f64 = rng.gen_range(0.3..0.8);
        let (fa, fb, fc) = (rng.gen_range(1.0..2.0), rng.gen_range(-0.3..0.3), rng.gen_range(0.5..3.0));
        let (k, c0, p) = (rng.gen_range(0.0..0.4), rng.gen_range(-1.0..1.0), rng.gen_range(0.3..1.0));
        let omega0: f64 = rng.gen_range(-1.0..1.0);
        let f = move |t: f64, _x: f64| fa + fb * (fc * t).sin();
        let g = move |t: f64, x: f64| t.powf(p) * (c0 - k * (x - omega0));
        let cfg = OperatorConfig::new(alpha).unwrap();
        let spec = ProblemSpec::new(cfg, 1.0, omega0, Arc::new(NativeField(f)), Arc::new(NativeField(g))).unwrap();
        let sol = picard_solve(&spec, grid, &PicardOptions::default()).unwrap();
        let (d1, d2) = (rng.gen_range(0.01..0.5), rng.gen_range(0.01..0.5));
        let nodes = grid.nodes();
        let e: Vec<f64> = nodes.iter().map(|t| ml_one(alpha, t.powf(alpha)).unwrap()).collect();
        let v: Vec<f64> = (0..grid.len()).map(|n| sol.omega[n] - d1 * f(nodes[n], 0.0) * e[n]).collect();
        let w: Vec<f64> = (0..grid.len()).map(|n| sol.omega[n] + d2 * f(nodes[n], 0.0) * e[n]).collect();
        let c = discretization_constant(&cfg, grid).unwrap();
        let opts = ComparisonOptions { slack_factor: 5.0, discretization_c: Some(c), ..Default::default() };
        let r = verify_comparison_samples(&spec, &v, &w, grid, &opts).unwrap();
        assert!(r.theorem_applies, "lower {} upper {}", r.min_lower_margin(), r.min_upper_margin());
        assert!(r.conclusion_ok && !r.is_counterexample());
        assert!(r.upper_margins[1..].iter().all(|&m| m > 0.0));
        checked += 1;
    }
    assert_eq!(checked, 40);
}

#[test]
fn kernel_outside_the_series_range_is_an_error() {
    // mu = 9 and T = 4 put E_alpha(-mu t^alpha) far outside the safe radius.
    let cfg = OperatorConfig::new(0.9).unwrap();
    let grid = Grid::new(4.0, 8).unwrap();
    assert!(abc_derivative(&vec![1.0; grid.len()], grid, &cfg).is_err());
}

#[test]
fn candidates_given_as_expressions_match_samples() {
    let spec = ProblemSpec::from_exprs(0.5, 1.0, 0.0, "1", "0").unwrap();
    let grid = Grid::new(1.0, 32).unwrap();
    let v = Expr::parse_with_vars("-0.1 - tau", &["tau"]).unwrap();
    let w = Expr::parse_with_vars("0.1 + tau", &["tau"]).unwrap();
    let opts = ComparisonOptions::default();
    let a = abc_hybrid::verifier::verify_comparison(&spec, &v, &w, grid, &opts).unwrap();
    let vs: Vec<f64> = grid.nodes().iter().map(|t| -0.1 - t).collect();
    let ws: Vec<f64> = grid.nodes().iter().map(|t| 0.1 + t).collect();
    let b = verify_comparison_samples(&spec, &vs, &ws, grid, &opts).unwrap();
    assert_eq!(a, b);
    assert!(a.theorem_applies && a.conclusion_ok);
}
