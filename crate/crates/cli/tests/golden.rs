//! Bundled problems against their stored reports.
//!
//! Set `ELCOMP_BLESS=1` to rewrite the golden files after an intended change.
//! Numbers are compared to 1e-9 relative, since different builds of the
//! binary may differ in the last bits; everything else must match exactly.

use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn problems() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("problems")
}

/// `(golden name, arguments after the binary)`.
fn cases() -> Vec<(&'static str, Vec<String>)> {
    let p = |f: &str| problems().join(f).to_string_lossy().into_owned();
    let certify = |f: &str| vec!["certify".to_string(), p(f)];
    vec![
        ("cooperative_pair", certify("cooperative_pair.prob")),
        ("competitive17", certify("competitive17.prob")),
        ("predator_prey", certify("predator_prey.prob")),
        ("thm6_failure", certify("thm6_failure.prob")),
        ("lap1d", certify("lap1d.prob")),
        (
            "quasi_demo",
            vec![
                "thm8".into(),
                p("quasi_demo.prob"),
                "--sub".into(),
                p("quasi_sub.field"),
                "--super".into(),
                p("quasi_super.field"),
            ],
        ),
    ]
}

fn report(args: &[String]) -> Value {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("out.json");
    let status = Command::new(env!("CARGO_BIN_EXE_elcomp"))
        .args(args)
        .arg("--json")
        .arg(&json)
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("timings");
    v
}

/// First path at which `got` and `want` disagree.
fn mismatch(got: &Value, want: &Value, path: &str) -> Option<String> {
    match (got, want) {
        (Value::Number(a), Value::Number(b)) => {
            let (a, b) = (a.as_f64().unwrap(), b.as_f64().unwrap());
            ((a - b).abs() > 1e-9 * (1.0 + a.abs().max(b.abs()))).then(|| format!("{path}: {a} vs {b}"))
        }
        (Value::Array(a), Value::Array(b)) if a.len() == b.len() => a
            .iter()
            .zip(b)
            .enumerate()
            .find_map(|(i, (x, y))| mismatch(x, y, &format!("{path}[{i}]"))),
        (Value::Object(a), Value::Object(b)) if a.len() == b.len() => a.iter().find_map(|(k, x)| match b.get(k) {
            Some(y) => mismatch(x, y, &format!("{path}.{k}")),
            None => Some(format!("{path}.{k}: missing from golden")),
        }),
        _ => (got != want).then(|| format!("{path}: {got} vs {want}")),
    }
}

#[test]
fn bundled_reports_match_golden() {
    let bless = std::env::var("ELCOMP_BLESS").is_ok_and(|v| v == "1");
    for (name, args) in cases() {
        let got = report(&args);
        let path = problems().join("golden").join(format!("{name}.json"));
        if bless {
            std::fs::write(&path, serde_json::to_string_pretty(&got).unwrap() + "\n").unwrap();
            continue;
        }
        let want: Value = serde_json::from_str(
            &std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display())),
        )
        .unwrap();
        if let Some(diff) = mismatch(&got, &want, name) {
            panic!("{} differs: {diff}", path.display());
        }
    }
}
