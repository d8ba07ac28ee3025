//! Line-oriented problem files.
//!
//! ```text
//! # comment
//! [domain]
//! lo = 0, 0          # one value per axis, or one value for all axes
//! hi = pi, pi
//! n = 16             # cells per axis
//!
//! [species 1]
//! a11 = 1            # a_ii default to 1, a_ij (i != j), b_i, c, f, g to 0
//! c = -0.5 * x
//!
//! [species 2]
//!
//! [coupling]
//! m12 = 0.5          # or m_1_2 when indices have several digits
//! ```
//!
//! A `[quasilinear]` section switches to the quasi-linear form. Species
//! sections then carry only `f` and `g`; the section holds `flux<l>_<i>`
//! (component `i` of the flux of species `l`, default `p<i>`), `reaction<l>`
//! (default 0) and optionally `partials = finite_difference | closed_form`.
//! A `[coupling]` section is not allowed together with `[quasilinear]`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::expr::{parse_expr, Expr, Var};
use crate::mesh::Grid;
use crate::quasilinear::{Partials, QuasiSpec};
use crate::system::{ScalarOperatorSpec, SystemSpec};

#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    Linear(SystemSpec),
    Quasi(QuasiSpec),
}

impl Problem {
    pub fn grid(&self) -> &Grid {
        match self {
            Problem::Linear(s) => &s.grid,
            Problem::Quasi(q) => &q.grid,
        }
    }

    pub fn n_species(&self) -> usize {
        match self {
            Problem::Linear(s) => s.n_species(),
            Problem::Quasi(q) => q.n_species(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Section {
    Domain,
    Species(usize),
    Coupling,
    Quasilinear,
}

/// A value with its source position (1-based line and column).
#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    key_col: usize,
    value_col: usize,
    value: String,
}

impl Entry {
    fn error(&self, message: impl Into<String>) -> Error {
        Error::Syntax {
            line: self.line,
            column: self.key_col,
            message: message.into(),
        }
    }

    fn expr(&self) -> Result<Expr> {
        parse_at(&self.value, self.line, self.value_col)
    }
}

fn parse_at(src: &str, line: usize, col: usize) -> Result<Expr> {
    parse_expr(src).map_err(|e| Error::Syntax {
        line,
        column: col + src[..e.offset.min(src.len())].chars().count(),
        message: format!("expected {}", e.expected.join(" | ")),
    })
}

type Sections = BTreeMap<Section, (usize, BTreeMap<String, Entry>)>;

fn split_sections(text: &str) -> Result<Sections> {
    let mut out: Sections = BTreeMap::new();
    let mut current: Option<Section> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let col = content.chars().take_while(|c| c.is_whitespace()).count() + 1;
        let syntax = |column: usize, message: String| Error::Syntax {
            line,
            column,
            message,
        };
        if let Some(rest) = trimmed.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| syntax(col + trimmed.chars().count(), "expected `]`".into()))?
                .trim();
            let mut words = name.split_whitespace();
            let section = match (words.next(), words.next(), words.next()) {
                (Some("domain"), None, None) => Section::Domain,
                (Some("coupling"), None, None) => Section::Coupling,
                (Some("quasilinear"), None, None) => Section::Quasilinear,
                (Some("species"), Some(k), None) => match k.parse::<usize>() {
                    Ok(k) if k >= 1 => Section::Species(k),
                    _ => return Err(syntax(col, format!("invalid species index `{k}`"))),
                },
                _ => return Err(syntax(col, format!("unknown section `[{name}]`"))),
            };
            if out.contains_key(&section) {
                return Err(syntax(col, format!("duplicate section `[{name}]`")));
            }
            out.insert(section, (line, BTreeMap::new()));
            current = Some(section);
            continue;
        }
        let Some(eq) = content.find('=') else {
            return Err(syntax(col, "expected `key = value`".into()));
        };
        let key = content[..eq].trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(syntax(col, format!("invalid key `{key}`")));
        }
        let value_raw = &content[eq + 1..];
        let value = value_raw.trim();
        let value_col = content[..eq + 1].chars().count()
            + value_raw.chars().take_while(|c| c.is_whitespace()).count()
            + 1;
        if value.is_empty() {
            return Err(syntax(value_col, format!("missing value for `{key}`")));
        }
        let Some(section) = current else {
            return Err(syntax(col, "key outside of any section".into()));
        };
        let entries = &mut out.get_mut(&section).expect("section registered").1;
        if entries.contains_key(key) {
            return Err(syntax(col, format!("duplicate key `{key}`")));
        }
        entries.insert(
            key.to_string(),
            Entry {
                line,
                key_col: col,
                value_col,
                value: value.to_string(),
            },
        );
    }
    Ok(out)
}

/// Comma- or whitespace-separated constant expressions.
fn constants(e: &Entry) -> Result<Vec<f64>> {
    let items: Vec<&str> = if e.value.contains(',') {
        e.value.split(',').collect()
    } else {
        e.value.split_whitespace().collect()
    };
    items
        .iter()
        .map(|item| {
            let trimmed = item.trim();
            let offset = e.value.find(trimmed).unwrap_or(0);
            let expr = parse_at(trimmed, e.line, e.value_col + e.value[..offset].chars().count())?;
            expr.as_constant()
                .filter(|v| v.is_finite())
                .ok_or_else(|| e.error(format!("`{trimmed}` is not a finite constant")))
        })
        .collect()
}

fn broadcast(e: &Entry, v: Vec<f64>, dim: usize) -> Result<Vec<f64>> {
    match v.len() {
        1 => Ok(vec![v[0]; dim]),
        l if l == dim => Ok(v),
        l => Err(Error::Validation(format!(
            "line {}: expected {dim} values, got {l}",
            e.line
        ))),
    }
}

fn parse_domain(entries: &BTreeMap<String, Entry>, header_line: usize) -> Result<Grid> {
    let need = |k: &str| {
        entries.get(k).ok_or_else(|| Error::Syntax {
            line: header_line,
            column: 1,
            message: format!("[domain] needs `{k}`"),
        })
    };
    for (k, e) in entries {
        if !matches!(k.as_str(), "dim" | "lo" | "hi" | "n") {
            return Err(e.error(format!("unknown key `{k}` in [domain]")));
        }
    }
    let lo = constants(need("lo")?)?;
    let hi = constants(need("hi")?)?;
    let n_entry = need("n")?;
    let n_raw = constants(n_entry)?;
    let dim = match entries.get("dim") {
        Some(e) => match constants(e)?.as_slice() {
            [d] if *d == 1.0 || *d == 2.0 => *d as usize,
            _ => return Err(e.error("dim must be 1 or 2")),
        },
        None => lo.len().max(hi.len()).max(n_raw.len()),
    };
    let n = n_raw
        .iter()
        .map(|v| {
            if v.fract() == 0.0 && *v >= 1.0 {
                Ok(*v as usize)
            } else {
                Err(n_entry.error(format!("cell count `{v}` is not a positive integer")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let lo = broadcast(need("lo")?, lo, dim)?;
    let hi = broadcast(need("hi")?, hi, dim)?;
    let n = broadcast(n_entry, n.iter().map(|&v| v as f64).collect(), dim)?
        .into_iter()
        .map(|v| v as usize)
        .collect::<Vec<_>>();
    Grid::new(dim, &lo, &hi, &n)
}

/// Splits `m12` / `m_1_2` style keys into two 1-based indices.
fn pair_index(key: &str, prefix: char) -> Option<(usize, usize)> {
    let rest = key.strip_prefix(prefix)?;
    if let Some(rest) = rest.strip_prefix('_') {
        let (a, b) = rest.split_once('_')?;
        return Some((a.parse().ok()?, b.parse().ok()?));
    }
    let mut chars = rest.chars();
    let (a, b) = (chars.next()?.to_digit(10)?, chars.next()?.to_digit(10)?);
    chars.next().is_none().then_some((a as usize, b as usize))
}

fn single_index(key: &str, prefix: char) -> Option<usize> {
    let rest = key.strip_prefix(prefix)?;
    let rest = rest.strip_prefix('_').unwrap_or(rest);
    rest.parse().ok()
}

fn check_species(e: &Entry, k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        Err(Error::Validation(format!(
            "line {}: species {k} referenced but the problem has {n} species",
            e.line
        )))
    } else {
        Ok(())
    }
}

fn check_axis(e: &Entry, i: usize, dim: usize) -> Result<()> {
    if i == 0 || i > dim {
        Err(Error::Validation(format!(
            "line {}: index {i} out of range for dimension {dim}",
            e.line
        )))
    } else {
        Ok(())
    }
}

pub fn parse_problem(text: &str) -> Result<Problem> {
    let sections = split_sections(text)?;
    let (dom_line, dom) = sections.get(&Section::Domain).ok_or_else(|| Error::Syntax {
        line: 1,
        column: 1,
        message: "missing [domain] section".into(),
    })?;
    let grid = parse_domain(dom, *dom_line)?;
    let dim = grid.dim();
    let species: Vec<_> = sections
        .iter()
        .filter_map(|(s, v)| match s {
            Section::Species(k) => Some((*k, v)),
            _ => None,
        })
        .collect();
    let n = species.len();
    if n == 0 {
        return Err(Error::Validation("no [species k] section".into()));
    }
    for (pos, (k, (line, _))) in species.iter().enumerate() {
        if *k != pos + 1 {
            return Err(Error::Validation(format!(
                "line {line}: species sections must be numbered 1..{n}, found {k}"
            )));
        }
    }
    let quasi = sections.get(&Section::Quasilinear);
    if let (Some(_), Some((line, _))) = (quasi, sections.get(&Section::Coupling)) {
        return Err(Error::Validation(format!(
            "line {line}: [coupling] is not used with [quasilinear]; put couplings in reaction<l>"
        )));
    }

    let mut f = vec![Expr::constant(0.0); n];
    let mut g = vec![Expr::constant(0.0); n];
    let mut ops = vec![ScalarOperatorSpec::laplacian(dim); n];
    for (k, (_, entries)) in &species {
        let l = k - 1;
        for (key, e) in entries.iter() {
            match key.as_str() {
                "f" => f[l] = e.expr()?,
                "g" => g[l] = e.expr()?,
                _ if quasi.is_some() => {
                    return Err(e.error(format!(
                        "`{key}` not allowed in a quasilinear problem; use [quasilinear]"
                    )))
                }
                "c" => ops[l].c = e.expr()?,
                _ => {
                    if let Some((i, j)) = pair_index(key, 'a') {
                        check_axis(e, i, dim)?;
                        check_axis(e, j, dim)?;
                        ops[l].a[i - 1][j - 1] = e.expr()?;
                    } else if let Some(i) = single_index(key, 'b') {
                        check_axis(e, i, dim)?;
                        ops[l].b[i - 1] = e.expr()?;
                    } else {
                        return Err(e.error(format!("unknown key `{key}` in [species {k}]")));
                    }
                }
            }
        }
    }

    if let Some((_, entries)) = quasi {
        let mut flux: Vec<Vec<Expr>> = (0..n)
            .map(|_| (1..=dim).map(|i| Expr::var(Var::P(i))).collect())
            .collect();
        let mut reaction = vec![Expr::constant(0.0); n];
        let mut partials = Partials::default();
        for (key, e) in entries {
            if key == "partials" {
                partials = match e.value.as_str() {
                    "finite_difference" => Partials::FiniteDifference,
                    "closed_form" => Partials::ClosedForm,
                    other => return Err(e.error(format!("unknown partials mode `{other}`"))),
                };
            } else if let Some(rest) = key.strip_prefix("reaction") {
                let l: usize = rest
                    .trim_start_matches('_')
                    .parse()
                    .map_err(|_| e.error(format!("invalid key `{key}`")))?;
                check_species(e, l, n)?;
                reaction[l - 1] = e.expr()?;
            } else if let Some(rest) = key.strip_prefix("flux") {
                let (l, i) = rest
                    .split_once('_')
                    .and_then(|(a, b)| Some((a.parse::<usize>().ok()?, b.parse::<usize>().ok()?)))
                    .ok_or_else(|| e.error(format!("invalid key `{key}`; expected flux<l>_<i>")))?;
                check_species(e, l, n)?;
                check_axis(e, i, dim)?;
                flux[l - 1][i - 1] = e.expr()?;
            } else {
                return Err(e.error(format!("unknown key `{key}` in [quasilinear]")));
            }
        }
        let qs = QuasiSpec {
            grid,
            flux,
            reaction,
            f,
            g,
            partials,
        };
        qs.validate()?;
        return Ok(Problem::Quasi(qs));
    }

    let mut m = vec![vec![Expr::constant(0.0); n]; n];
    if let Some((_, entries)) = sections.get(&Section::Coupling) {
        for (key, e) in entries {
            let (k, l) = pair_index(key, 'm')
                .ok_or_else(|| e.error(format!("invalid coupling key `{key}`; expected m<k><l>")))?;
            check_species(e, k, n)?;
            check_species(e, l, n)?;
            m[k - 1][l - 1] = e.expr()?;
        }
    }
    let spec = SystemSpec {
        grid,
        ops,
        m,
        f,
        g,
    };
    spec.validate()?;
    Ok(Problem::Linear(spec))
}

pub fn load_problem(path: &std::path::Path) -> Result<Problem> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Validation(format!("cannot read {}: {e}", path.display())))?;
    parse_problem(&text)
}
