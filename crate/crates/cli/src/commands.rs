use std::path::Path;

use serde_json::json;

use elcomp_core::assembly::{assemble_system, CouplingMode};
use elcomp_core::certify::{
    certify, check_failure, classify_structure, find_gauge, CertifyOptions, Mode,
};
use elcomp_core::fieldfile::{format_fields, load_block_field, parse_fields};
use elcomp_core::linalg::lu_solve;
use elcomp_core::oracle::{inverse_positivity, random_probe};
use elcomp_core::problem::{parse_problem, Problem};
use elcomp_core::quasilinear::{check_thm8, linearize_with, QuasiSpec};
use elcomp_core::spectral::{component_eigen, cooperative_eigen, subdomain_scan, system_eigen};
use elcomp_core::{DiscreteSystem, Error, Result, Settings};

use crate::report::Report;
use crate::{Command, Flags};

fn read(path: &Path, report: &mut Report) -> Result<String> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::Validation(format!("cannot read {}: {e}", path.display())))?;
    report.add_input(path, &bytes);
    String::from_utf8(bytes).map_err(|_| Error::Validation(format!("{} is not UTF-8", path.display())))
}

fn load(path: &Path, report: &mut Report) -> Result<Problem> {
    parse_problem(&read(path, report)?)
}

fn linear(path: &Path, report: &mut Report) -> Result<DiscreteSystem> {
    match load(path, report)? {
        Problem::Linear(spec) => spec.sample(),
        Problem::Quasi(_) => Err(Error::Validation(
            "quasilinear problem: use `linearize` or `thm8` with --sub and --super".into(),
        )),
    }
}

fn quasi(path: &Path, report: &mut Report) -> Result<QuasiSpec> {
    match load(path, report)? {
        Problem::Quasi(q) => Ok(q),
        Problem::Linear(_) => Err(Error::Validation(format!(
            "{} has no [quasilinear] section",
            path.display()
        ))),
    }
}

/// One node field per species.
type Fields = Vec<Vec<f64>>;

fn pair(qs: &QuasiSpec, sub: &Path, sup: &Path, report: &mut Report) -> Result<(Fields, Fields)> {
    let n = qs.n_species();
    // read through `read` so both files enter the digest
    read(sub, report)?;
    read(sup, report)?;
    Ok((
        load_block_field(sub, &qs.grid, n)?,
        load_block_field(sup, &qs.grid, n)?,
    ))
}

fn range(values: &[f64]) -> [f64; 2] {
    values
        .iter()
        .fold([f64::INFINITY, f64::NEG_INFINITY], |[lo, hi], v| [lo.min(*v), hi.max(*v)])
}

pub fn run(cmd: &Command, flags: &Flags, set: &Settings, mode: Mode, report: &mut Report) -> Result<()> {
    match cmd {
        Command::Certify { problem, no_oracle } => {
            report.command = "certify".into();
            let sys = linear(problem, report)?;
            let opts = CertifyOptions {
                mode,
                oracle: !no_oracle,
            };
            let v = certify(&sys, &opts, set)?;
            report.set_verdict(&v);
        }
        Command::Eigen {
            problem,
            component,
            cooperative,
            scan,
        } => {
            report.command = "eigen".into();
            let sys = linear(problem, report)?;
            let (which, ep) = match (component, cooperative) {
                (Some(j), _) => {
                    if *j == 0 {
                        return Err(Error::Validation("components are numbered from 1".into()));
                    }
                    (format!("component {j}"), component_eigen(&sys, j - 1, set)?)
                }
                (None, true) => ("cooperative part".to_string(), cooperative_eigen(&sys, set)?),
                (None, false) => (
                    "full system".to_string(),
                    system_eigen(&sys, &CouplingMode::Full, None, set)?,
                ),
            };
            report.set_eigen(vec![ep.summary()]);
            let mut details = json!({ "operator": which, "structure": classify_structure(&sys, set.support_tol) });
            if let Some(depth) = scan {
                details["scan"] = serde_json::to_value(subdomain_scan(&sys, *depth, set)?).expect("scan serializes");
            }
            report.details = details;
        }
        Command::Oracle { problem, gauge, probe } => {
            report.command = "oracle".into();
            let sys = linear(problem, report)?;
            let asys = assemble_system(&sys, &CouplingMode::Full, None)?;
            let g = find_gauge(&sys, set.support_tol);
            if let Some(trials) = probe {
                report.oracle = Some(random_probe(&asys, *trials, flags.seed, set)?);
            } else {
                report.oracle = Some(inverse_positivity(&asys, None, set)?);
            }
            if *gauge {
                match g.sigma.as_deref() {
                    Some(sigma) => report.oracle_gauged = Some(inverse_positivity(&asys, Some(sigma), set)?),
                    None => {
                        report.details = json!({ "notes": [format!(
                            "no sign gauge: {}",
                            g.reason.as_deref().unwrap_or("unknown")
                        )] })
                    }
                }
            }
            report.gauge = Some(g);
        }
        Command::Solve {
            problem,
            rhs_from_file,
            builtin,
            out,
        } => {
            report.command = "solve".into();
            let mut sys = linear(problem, report)?;
            if let Some(path) = rhs_from_file {
                read(path, report)?;
                sys.f = load_block_field(path, &sys.grid, sys.n_species())?;
            } else if !builtin {
                return Err(Error::Validation("solve needs --builtin or --rhs-from-file".into()));
            }
            let asys = assemble_system(&sys, &CouplingMode::Full, None)?;
            let gg = asys.g_mat.matvec(&asys.g_vec)?;
            let rhs: Vec<f64> = asys.f_vec.iter().zip(&gg).map(|(f, g)| f - g).collect();
            let u = lu_solve(&asys.a, &rhs)?;
            let block = asys.block_size();
            let fields: Vec<Vec<f64>> = (0..sys.n_species())
                .map(|k| {
                    (0..sys.grid.node_count())
                        .map(|node| match asys.dofs.local(node) {
                            Some(i) => u[k * block + i],
                            None => sys.g[k][node],
                        })
                        .collect()
                })
                .collect();
            let names: Vec<String> = (1..=fields.len()).map(|k| format!("u{k}")).collect();
            let text = format_fields(&sys.grid, names.iter().map(String::as_str).zip(fields.iter().map(Vec::as_slice)));
            if let Some(path) = out {
                std::fs::write(path, &text)
                    .map_err(|e| Error::Validation(format!("cannot write {}: {e}", path.display())))?;
                // the written file must load back to the same values
                debug_assert_eq!(parse_fields(&text).map(|f| f.len()).ok(), Some(fields.len()));
            }
            let residual = {
                let au = asys.a.matvec(&u)?;
                au.iter().zip(&rhs).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            };
            report.details = json!({
                "ranges": fields.iter().map(|f| range(f)).collect::<Vec<_>>(),
                "residual_inf": residual,
                "dof": asys.dof(),
                "output": out.as_ref().and_then(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned()),
            });
        }
        Command::Counterexample { problem, out } => {
            report.command = "counterexample".into();
            let sys = linear(problem, report)?;
            let check = check_failure(&sys, set)?;
            match &check.verdict {
                Some(v) => {
                    report.set_verdict(v);
                    if let (Some(path), Some(cx)) = (out, &v.counterexample) {
                        let block = cx.w.len() / sys.n_species();
                        let asys = assemble_system(&sys, &CouplingMode::Full, None)?;
                        let fields: Vec<Vec<f64>> = (0..sys.n_species())
                            .map(|k| {
                                (0..sys.grid.node_count())
                                    .map(|node| asys.dofs.local(node).map_or(0.0, |i| cx.w[k * block + i]))
                                    .collect()
                            })
                            .collect();
                        let names: Vec<String> = (1..=fields.len()).map(|k| format!("w{k}")).collect();
                        let text = format_fields(
                            &sys.grid,
                            names.iter().map(String::as_str).zip(fields.iter().map(Vec::as_slice)),
                        );
                        std::fs::write(path, text)
                            .map_err(|e| Error::Validation(format!("cannot write {}: {e}", path.display())))?;
                    }
                }
                None => {
                    report.verdict = Some("NoCounterexample".into());
                    report.structure = Some(classify_structure(&sys, set.support_tol));
                    report.details = json!({ "candidates": check.candidates });
                }
            }
        }
        Command::Gauge { problem } => {
            report.command = "gauge".into();
            let sys = linear(problem, report)?;
            report.structure = Some(classify_structure(&sys, set.support_tol));
            report.gauge = Some(find_gauge(&sys, set.support_tol));
        }
        Command::Linearize { problem, sub, sup } => {
            report.command = "linearize".into();
            let qs = quasi(problem, report)?;
            let (u, v) = pair(&qs, sub, sup, report)?;
            let lin = linearize_with(&qs, &u, &v, set.exec)?;
            let sys = lin.to_system();
            let ranges = |f: &Vec<Vec<Vec<f64>>>| -> Vec<Vec<[f64; 2]>> {
                f.iter().map(|per| per.iter().map(|x| range(x)).collect()).collect()
            };
            report.structure = Some(classify_structure(&sys, set.support_tol));
            report.details = json!({
                "quadrature": lin.quadrature,
                "partials": qs.partials,
                "flux_p": ranges(&lin.b),
                "flux_u": ranges(&lin.b0),
                "reaction_u": ranges(&lin.e),
                "reaction_p": ranges(&lin.h),
                "coupling": ranges(&sys.m),
            });
        }
        Command::Thm8 { problem, sub, sup } => {
            report.command = "thm8".into();
            let qs = quasi(problem, report)?;
            let (u, v) = pair(&qs, sub, sup, report)?;
            let verdict = check_thm8(&qs, &u, &v, mode, set)?;
            report.set_verdict(&verdict);
        }
    }
    Ok(())
}
