use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use elcomp_core::certify::{GaugeResult, Margins, Mode, StructureClass, Verdict, VerdictKind};
use elcomp_core::linalg::Interval;
use elcomp_core::oracle::OracleReport;
use elcomp_core::spectral::EigenSummary;
use elcomp_core::{Error, Settings};

#[derive(Debug, Serialize)]
pub struct ErrorEntry {
    pub kind: &'static str,
    pub message: String,
    pub exit_code: i32,
}

#[derive(Debug, Default, Serialize)]
pub struct Timings {
    pub total_ms: f64,
}

/// Everything a command reports. Field order is the JSON key order.
#[derive(Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub tool_version: &'static str,
    /// File names (without directories) of every input read.
    pub inputs: Vec<String>,
    /// SHA-256 over the bytes of all inputs, in order.
    pub input_digest: String,
    pub settings: Settings,
    pub mode: Mode,
    pub verdict: Option<String>,
    pub theorem: Option<u8>,
    pub label: Option<String>,
    pub structure: Option<StructureClass>,
    pub margins: Option<Margins>,
    pub lambda: Vec<f64>,
    pub cw: Vec<Interval>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gauge: Option<GaugeResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_gauged: Option<OracleReport>,
    pub eigen: Vec<EigenSummary>,
    /// Command-specific payload.
    pub details: Value,
    pub errors: Vec<ErrorEntry>,
    pub timings: Timings,
    #[serde(skip)]
    hasher: Sha256,
}

impl Report {
    pub fn new(set: &Settings, mode: Mode) -> Report {
        Report {
            command: String::new(),
            tool_version: env!("CARGO_PKG_VERSION"),
            inputs: Vec::new(),
            input_digest: String::new(),
            settings: *set,
            mode,
            verdict: None,
            theorem: None,
            label: None,
            structure: None,
            margins: None,
            lambda: Vec::new(),
            cw: Vec::new(),
            epsilon: None,
            x0: None,
            gauge: None,
            oracle: None,
            oracle_gauged: None,
            eigen: Vec::new(),
            details: Value::Null,
            errors: Vec::new(),
            timings: Timings::default(),
            hasher: Sha256::new(),
        }
    }

    pub fn add_input(&mut self, path: &std::path::Path, bytes: &[u8]) {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        self.inputs.push(name);
        self.hasher.update(bytes);
        self.input_digest = hex::encode(self.hasher.clone().finalize());
    }

    pub fn push_error(&mut self, e: &Error) {
        self.errors.push(ErrorEntry {
            kind: e.kind(),
            message: e.to_string(),
            exit_code: e.exit_code(),
        });
    }

    pub fn set_eigen(&mut self, eigen: Vec<EigenSummary>) {
        self.lambda = eigen.iter().map(|e| e.lambda).collect();
        self.cw = eigen.iter().map(|e| e.cw).collect();
        self.eigen = eigen;
    }

    pub fn set_verdict(&mut self, v: &Verdict) {
        self.verdict = Some(v.kind.name().to_string());
        self.theorem = v.theorem;
        self.label = Some(v.label.clone());
        self.structure = Some(v.structure.clone());
        self.margins = v.evidence.margins.clone();
        self.x0 = v.evidence.margins.as_ref().and_then(|m| m.x0_coords.clone());
        if let VerdictKind::HoldsThm5 { epsilon } = v.kind {
            self.epsilon = Some(epsilon);
        }
        self.eigen = v.evidence.eigen.clone();
        self.cw = self.eigen.iter().map(|e| e.cw).collect();
        self.lambda = v.evidence.lambdas.clone();
        self.gauge = v.gauge.clone();
        self.oracle = v.oracle.clone();
        self.oracle_gauged = v.oracle_gauged.clone();
        self.details = serde_json::json!({
            "kind": v.kind,
            "tolerance": v.evidence.tolerance,
            "counterexample": v.counterexample,
            "candidates": v.candidates,
            "notes": v.notes,
        });
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| writeln!(s, "{k:<12} {v}").unwrap();
        line("command", self.command.clone());
        if let Some(v) = &self.verdict {
            let label = self.label.as_deref().unwrap_or("");
            line("verdict", format!("{v} ({label})"));
        }
        if let Some(st) = &self.structure {
            line("structure", st.name().to_string());
        }
        for (j, (l, cw)) in self.lambda.iter().zip(self.cw.iter().chain(std::iter::repeat(&Interval {
            lo: f64::NAN,
            hi: f64::NAN,
        }))).enumerate() {
            let key = if self.lambda.len() > 1 { format!("lambda[{}]", j + 1) } else { "lambda".into() };
            if cw.lo.is_nan() {
                line(&key, format!("{l:.8}"));
            } else {
                line(&key, format!("{l:.8}  in [{:.10}, {:.10}]", cw.lo, cw.hi));
            }
        }
        if let Some(m) = &self.margins {
            line("diagonal", format!("{:.6}", m.diagonal));
            line("column_sum", format!("{:.6}", m.column_sum));
            if let Some(sharp) = m.sharp {
                line("sharp", format!("{sharp:.6}"));
            }
        }
        if let Some(e) = self.epsilon {
            line("epsilon", format!("{e:.6}"));
        }
        if let Some(x0) = &self.x0 {
            line("x0", format!("{x0:?}"));
        }
        if let Some(g) = &self.gauge {
            match (&g.sigma, &g.reason) {
                (Some(sigma), _) => line("gauge", format!("{sigma:?}")),
                (None, Some(r)) => line("gauge", format!("none ({r})")),
                _ => {}
            }
        }
        for (key, o) in [("oracle", &self.oracle), ("oracle_gauged", &self.oracle_gauged)] {
            if let Some(o) = o {
                let verdict = match o.inverse_positive {
                    Some(true) => "inverse-positive",
                    Some(false) => "not inverse-positive",
                    None => "no violation found",
                };
                line(key, format!("{verdict} (min entry {:.3e}, dof {})", o.min_entry, o.dof));
            }
        }
        if let Some(notes) = self.details.get("notes").and_then(Value::as_array) {
            for n in notes.iter().filter_map(Value::as_str) {
                line("note", n.to_string());
            }
        }
        for e in &self.errors {
            line("error", format!("{}: {}", e.kind, e.message));
        }
        s
    }
}
