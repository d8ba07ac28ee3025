use elcomp_core::certify::{certify, CertifyOptions, Mode, VerdictKind};
use elcomp_core::fieldfile::{format_fields, parse_fields};
use elcomp_core::problem::{parse_problem, Problem};
use elcomp_core::quasilinear::check_thm8;
use elcomp_core::{Exec, Settings};

fn linear(text: &str) -> elcomp_core::DiscreteSystem {
    match parse_problem(text).unwrap() {
        Problem::Linear(spec) => spec.sample().unwrap(),
        Problem::Quasi(_) => panic!("expected a linear problem"),
    }
}

const COMPETITIVE: &str = "
[domain]
lo = 0
hi = pi
n = 12
dim = 2
[species 1]
[species 2]
[coupling]
m12 = 0.5
m21 = 0.5
";

#[test]
fn text_to_verdict() {
    let sys = linear(COMPETITIVE);
    let opts = CertifyOptions {
        mode: Mode::Sharp,
        oracle: true,
    };
    let v = certify(&sys, &opts, &Settings::default()).unwrap();
    assert_eq!(v.kind, VerdictKind::HoldsThm4);
    let m = v.evidence.margins.unwrap();
    assert!(m.sharp.unwrap() > 0.0);
    assert_eq!(v.oracle_gauged.unwrap().inverse_positive, Some(true));
}

#[test]
fn sequential_and_parallel_agree() {
    let sys = linear(COMPETITIVE);
    let opts = CertifyOptions {
        mode: Mode::Basic,
        oracle: true,
    };
    let run = |exec| {
        let set = Settings {
            exec,
            ..Settings::default()
        };
        certify(&sys, &opts, &set).unwrap()
    };
    assert_eq!(run(Exec::Sequential), run(Exec::Parallel));
}

#[test]
fn thm8_from_problem_and_field_text() {
    let text = "
[domain]
lo = 0
hi = pi
n = 24
[species 1]
[species 2]
[quasilinear]
flux1_1 = (1 + u^2) * p1
reaction1 = 0.25 * u1 * u2
reaction2 = 0.25 * u1
partials = closed_form
";
    let Problem::Quasi(qs) = parse_problem(text).unwrap() else {
        panic!("expected a quasilinear problem");
    };
    let grid = qs.grid.clone();
    let sine: Vec<f64> = (0..grid.node_count()).map(|x| grid.coords(x)[0].sin()).collect();
    let scaled = |c: f64| sine.iter().map(|s| c * s).collect::<Vec<_>>();
    let (a, b) = (scaled(0.1), scaled(0.3));
    let file = format_fields(&grid, [("u1", a.as_slice()), ("u2", b.as_slice())]);
    let back: Vec<Vec<f64>> = parse_fields(&file).unwrap().into_iter().map(|f| f.values).collect();
    assert_eq!(back, vec![a.clone(), b.clone()]);
    let v = check_thm8(&qs, &back, &[b, a], Mode::Basic, &Settings::default()).unwrap();
    assert_eq!(v.theorem, Some(8));
    // every linearized coupling is nonnegative, so the per-component route applies
    assert_eq!(v.kind, VerdictKind::HoldsThm4);
    assert!(v.label.contains("via Thm4"));
}
