//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

#![allow(clippy::needless_range_loop)]

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use elcomp_core::assembly::CouplingMode;
use elcomp_core::certify::{certify, CertifyOptions, Mode, VerdictKind};
use elcomp_core::mesh::sub_rectangle_mask;
use elcomp_core::problem::{load_problem, Problem};
use elcomp_core::quasilinear::{check_thm8, linearize, node_gradient, Partials, QuasiSpec};
use elcomp_core::spectral::{component_eigen, system_eigen};
use elcomp_core::{parse_expr, DiscreteSystem, Expr, Grid, Settings, SystemSpec};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn problem(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("problems").join(name)
}

fn bundled(name: &str) -> DiscreteSystem {
    match load_problem(&problem(name)).unwrap() {
        Problem::Linear(spec) => spec.sample().unwrap(),
        Problem::Quasi(_) => panic!("{name} is quasilinear"),
    }
}

fn ensure(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

fn json_report(args: &[&str]) -> Value {
    let dir = std::env::temp_dir().join(format!("elcomp-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("report.json");
    let out = Command::new(env!("CARGO_BIN_EXE_elcomp"))
        .args(args)
        .arg("--json")
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let _ = std::fs::remove_dir_all(&dir);
    v
}

fn eigenvalue_accuracy() -> Outcome {
    let set = Settings::default();
    let sys = bundled("lap1d.prob");
    let ep = system_eigen(&sys, &CouplingMode::Full, None, &set).map_err(|e| e.to_string())?;
    let h = 1.0 / 128.0;
    let exact = 4.0 / (h * h) * (PI * h / 2.0).sin().powi(2);
    let rel = (ep.lambda - exact).abs() / exact;
    ensure(rel <= 1e-8, || format!("lambda {} vs discrete {exact}: rel {rel:e}", ep.lambda))?;
    let cont = (ep.lambda - PI * PI).abs() / (PI * PI);
    ensure(cont <= 1e-3, || format!("lambda {} vs pi^2: rel {cont:e}", ep.lambda))?;
    ensure(ep.right.iter().all(|x| *x > 0.0), || "eigenvector not positive".into())?;
    let width = ep.cw.hi - ep.cw.lo;
    ensure(width <= 1e-8 * (1.0 + ep.lambda), || format!("enclosure width {width:e}"))?;
    Ok(format!("lambda {:.10}, rel err {rel:.1e}, width {width:.1e}", ep.lambda))
}

fn domain_monotonicity() -> Outcome {
    let set = Settings::default();
    let sys = bundled("lap1d.prob");
    let full = system_eigen(&sys, &CouplingMode::Full, None, &set).map_err(|e| e.to_string())?;
    let mask = sub_rectangle_mask(&sys.grid, &[0.25], &[0.75]).map_err(|e| e.to_string())?;
    let sub = system_eigen(&sys, &CouplingMode::Full, Some(&mask), &set).map_err(|e| e.to_string())?;
    let ratio = sub.lambda / full.lambda;
    ensure((3.9..=4.1).contains(&ratio), || format!("ratio {ratio}"))?;
    Ok(format!("ratio {ratio:.6}"))
}

fn reaction_shift() -> Outcome {
    let set = Settings::default();
    let grid = Grid::new_1d(0.0, 1.0, 128).unwrap();
    let base = SystemSpec::laplacians(grid, 1);
    let shifted = base.clone().with_reaction(0, Expr::constant(-20.0));
    let e0 = system_eigen(&base.sample().unwrap(), &CouplingMode::Full, None, &set).map_err(|e| e.to_string())?;
    let e1 = system_eigen(&shifted.sample().unwrap(), &CouplingMode::Full, None, &set).map_err(|e| e.to_string())?;
    let shift = e1.lambda - e0.lambda;
    let err = (shift + 20.0).abs() / e0.lambda.abs();
    ensure(err <= 1e-8, || format!("shift {shift}, rel err {err:e}"))?;
    let dot: f64 = e0.right.iter().zip(&e1.right).map(|(a, b)| a * b).sum();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let cosine = dot / (norm(&e0.right) * norm(&e1.right));
    ensure(cosine >= 1.0 - 1e-8, || format!("cosine {cosine}"))?;
    Ok(format!("shift {shift:.10}, |1 - cosine| {:.1e}", (1.0 - cosine).abs()))
}

fn random_cooperative(rng: &mut ChaCha8Rng) -> DiscreteSystem {
    let n = rng.random_range(2..=3);
    let grid = if rng.random_bool(0.5) {
        Grid::new_1d(0.0, rng.random_range(0.5..2.0), rng.random_range(20..=120)).unwrap()
    } else {
        let k = rng.random_range(6..=14);
        Grid::new_2d([0.0, 0.0], [rng.random_range(0.5..1.5), 1.0], [k, k]).unwrap()
    };
    let d = grid.dim();
    let mut spec = SystemSpec::laplacians(grid, n);
    for op in &mut spec.ops {
        let a0 = rng.random_range(0.5..2.0);
        let a1 = rng.random_range(0.0..0.4);
        for i in 0..d {
            op.a[i][i] = parse_expr(&format!("{a0} + {a1} * sin(3 * x)")).unwrap();
        }
        op.b[0] = Expr::constant(rng.random_range(-1.0..1.0));
    }
    for k in 0..n {
        for l in 0..n {
            spec.m[k][l] = if k == l {
                Expr::constant(rng.random_range(-45.0..5.0))
            } else {
                let r = rng.random_range(0.1..3.0);
                parse_expr(&format!("-{r} * (1 + 0.5 * cos(2 * x))")).unwrap()
            };
        }
    }
    spec.sample().unwrap()
}

fn cooperative_equivalence() -> Outcome {
    let set = Settings::default();
    let opts = CertifyOptions {
        mode: Mode::Basic,
        oracle: true,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let (mut compared, mut positive) = (0, 0);
    for case in 0..24 {
        let sys = random_cooperative(&mut rng);
        let dof = sys.n_species() * sys.grid.interior_count();
        ensure(dof <= 600, || format!("case {case}: dof {dof}"))?;
        let v = certify(&sys, &opts, &set).map_err(|e| format!("case {case}: {e}"))?;
        let lambda = v.evidence.lambdas[0];
        if lambda.abs() <= 1e-6 {
            continue;
        }
        let oracle = v.oracle.as_ref().and_then(|o| o.inverse_positive);
        ensure(oracle == Some(lambda > 0.0), || {
            format!("case {case}: lambda {lambda}, oracle {oracle:?}")
        })?;
        ensure(v.kind.holds() == (lambda > 0.0), || {
            format!("case {case}: lambda {lambda}, verdict {}", v.kind.name())
        })?;
        compared += 1;
        positive += usize::from(lambda > 0.0);
    }
    ensure(compared >= 20, || format!("only {compared} decisive cases"))?;
    Ok(format!("{compared} systems agree ({positive} with lambda > 0)"))
}

fn thm6_failure() -> Outcome {
    let path = problem("thm6_failure.prob");
    let v = json_report(&["certify", path.to_str().unwrap()]);
    ensure(v["verdict"] == "FailsThm6", || format!("verdict {}", v["verdict"]))?;
    let cx = &v["details"]["counterexample"];
    let residual = cx["residual_max"].as_f64().unwrap();
    let norm = cx["norm_a"].as_f64().unwrap();
    ensure(cx["verified"] == true, || "counterexample not verified".into())?;
    ensure(residual <= 1e-8 * norm, || format!("residual {residual:e}, norm {norm}"))?;
    ensure(cx["nonnegative"] == true, || "w has negative entries".into())?;
    let max = cx["max_value"].as_f64().unwrap();
    ensure((max - 1.0).abs() <= 1e-12, || format!("max w {max}"))?;
    ensure(v["oracle"]["inverse_positive"] == false, || format!("oracle {}", v["oracle"]))?;
    Ok(format!("residual {residual:.2e}, |A| {norm:.3e}, oracle rejects"))
}

fn competitive() -> Outcome {
    let path = problem("competitive17.prob");
    let v = json_report(&["certify", path.to_str().unwrap()]);
    ensure(v["verdict"] == "HoldsThm4", || format!("verdict {}", v["verdict"]))?;
    let diag = v["margins"]["diagonal"].as_f64().unwrap();
    let col = v["margins"]["column_sum"].as_f64().unwrap();
    ensure((diag / 2.0 - 1.0).abs() <= 0.02, || format!("diagonal {diag}"))?;
    ensure((col / 2.5 - 1.0).abs() <= 0.02, || format!("column_sum {col}"))?;
    ensure(v["gauge"]["sigma"] == serde_json::json!([1, -1]), || format!("gauge {}", v["gauge"]))?;
    ensure(v["oracle_gauged"]["inverse_positive"] == true, || {
        format!("gauged oracle {}", v["oracle_gauged"])
    })?;
    Ok(format!("diagonal {diag:.4}, column_sum {col:.4}, gauge [1, -1]"))
}

fn predator_prey() -> Outcome {
    let set = Settings::default();
    let sys = bundled("predator_prey.prob");
    let v = certify(&sys, &CertifyOptions { mode: Mode::Basic, oracle: true }, &set).map_err(|e| e.to_string())?;
    let VerdictKind::HoldsThm5 { epsilon } = v.kind else {
        return Err(format!("verdict {}", v.kind.name()));
    };
    let mut lams = [0.0; 2];
    for j in 0..2 {
        lams[j] = component_eigen(&sys, j, &set).map_err(|e| e.to_string())?.lambda;
        ensure((lams[j] - 1.0).abs() <= 1e-3, || format!("lambda_{} = {}", j + 1, lams[j]))?;
    }
    // constant couplings m12 = 1, m21 = -1: the predator's diagonal slack is
    // lambda_2, its column sum lambda_2 + m12
    let slack = lams[1].min(lams[1] + 1.0);
    ensure((epsilon - slack / 2.0).abs() <= 1e-9 * (1.0 + slack), || {
        format!("epsilon {epsilon}, slack {slack}")
    })?;
    ensure(
        v.constructed.len() == 2 && v.constructed.iter().all(|w| w.iter().all(|x| *x > 0.0)),
        || "constructed fields not positive".into(),
    )?;
    Ok(format!("epsilon {epsilon:.6} = slack/2, constructed fields positive"))
}

fn field(grid: &Grid, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
    (0..grid.node_count()).map(|x| f(grid.coords(x))).collect()
}

fn quasilinear() -> Outcome {
    let set = Settings::default();
    let grid = Grid::new_2d([0.0, 0.0], [PI, PI], [16, 16]).unwrap();
    let lap = vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]; 2];
    let m = vec![vec![0.0, 0.5], vec![0.5, 0.0]];
    let qs = QuasiSpec {
        partials: Partials::ClosedForm,
        ..QuasiSpec::linear(grid.clone(), &lap, &m)
    };
    let u = vec![field(&grid, |c| c[0] * c[1]), field(&grid, |c| (3.0 * c[0]).sin())];
    let v = vec![field(&grid, |c| -c[1]), field(&grid, |c| c[0] * c[0])];
    let lin = linearize(&qs, &u, &v).map_err(|e| e.to_string())?.to_system();
    let mut trip = 0.0f64;
    for l in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                trip = lin.ops[l].a[i * 2 + j].iter().fold(trip, |w, a| w.max((a - lap[l][i][j]).abs()));
            }
            trip = lin.ops[l].b[i].iter().fold(trip, |w, b| w.max(b.abs()));
        }
        for k in 0..2 {
            trip = lin.m[l][k].iter().fold(trip, |w, x| w.max((x - m[l][k]).abs()));
        }
    }
    ensure(trip <= 1e-12, || format!("round trip error {trip:e}"))?;

    let linear = SystemSpec::laplacians(grid.clone(), 2).with_coupling(m.clone()).sample().unwrap();
    let direct = certify(&linear, &CertifyOptions { mode: Mode::Basic, oracle: false }, &set).map_err(|e| e.to_string())?;
    let via8 = check_thm8(&qs, &u, &v, Mode::Basic, &set).map_err(|e| e.to_string())?;
    ensure(via8.kind == direct.kind, || {
        format!("thm8 {} vs linear {}", via8.kind.name(), direct.kind.name())
    })?;

    // F^1 = u1 u2, a^1 = (1 + u^2) p: FD partials against hand derivatives
    let demo = match load_problem(&problem("quasi_demo.prob")).map_err(|e| e.to_string())? {
        Problem::Quasi(q) => q,
        Problem::Linear(_) => return Err("quasi_demo is linear".into()),
    };
    let g = demo.grid.clone();
    let w = vec![field(&g, |c| 1.0 + 0.5 * c[0].sin()), field(&g, |c| 2.0 - 0.3 * c[0])];
    let jac = linearize(&QuasiSpec { partials: Partials::FiniteDifference, ..demo }, &w, &w).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    let mut check = |got: f64, want: f64| worst = worst.max((got - want).abs() / (1.0 + want.abs()));
    for x in 0..g.node_count() {
        let (u1, u2) = (w[0][x], w[1][x]);
        let p = node_gradient(&g, &w[0], x)[0];
        check(jac.b[0][0][x], 1.0 + u1 * u1);
        check(jac.b0[0][0][x], 2.0 * u1 * p);
        check(jac.e[0][0][x], u2);
        check(jac.e[0][1][x], u1);
        check(jac.e[1][0][x], 0.5);
    }
    ensure(worst <= 1e-6, || format!("jacobian error {worst:e}"))?;
    Ok(format!("round trip {trip:.1e}, thm8 {}, jacobian {worst:.1e}", via8.kind.name()))
}

fn determinism() -> Outcome {
    let p = |f: &str| problem(f).to_string_lossy().into_owned();
    let mut runs: Vec<Vec<String>> = [
        "cooperative_pair.prob",
        "competitive17.prob",
        "predator_prey.prob",
        "thm6_failure.prob",
        "lap1d.prob",
    ]
    .iter()
    .map(|f| vec!["certify".to_string(), p(f)])
    .collect();
    runs.push(vec![
        "thm8".into(),
        p("quasi_demo.prob"),
        "--sub".into(),
        p("quasi_sub.field"),
        "--super".into(),
        p("quasi_super.field"),
    ]);
    for args in &runs {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let strip = |mut v: Value| {
            v.as_object_mut().unwrap().remove("timings");
            v
        };
        let a = strip(json_report(&args));
        let b = strip(json_report(&args));
        ensure(a == b, || format!("{} differs between runs", args[1]))?;
    }
    Ok(format!("{} reports identical modulo timings", runs.len()))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("eigenvalue accuracy", eigenvalue_accuracy),
        ("domain monotonicity", domain_monotonicity),
        ("reaction shift", reaction_shift),
        ("cooperative equivalence", cooperative_equivalence),
        ("thm6 failure", thm6_failure),
        ("competitive thm4", competitive),
        ("predator-prey thm5", predator_prey),
        ("quasilinear reduction", quasilinear),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS  {}. {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL  {}. {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
