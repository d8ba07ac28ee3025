//! Node fields on disk.
//!
//! Each block starts with `# field <name> grid <dim> <n...> <lo...> <hi...>`
//! followed by one value per line in canonical node order. A file may hold
//! several blocks, one per species.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mesh::Grid;

#[derive(Debug, Clone, PartialEq)]
pub struct NodeField {
    pub name: String,
    pub grid: Grid,
    pub values: Vec<f64>,
}

fn bad(line: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        column: 1,
        message: message.into(),
    }
}

fn parse_header(line_no: usize, rest: &str) -> Result<(String, Grid)> {
    let words: Vec<&str> = rest.split_whitespace().collect();
    let (name, words) = match words.as_slice() {
        ["field", name, "grid", tail @ ..] => (name.to_string(), tail),
        _ => return Err(bad(line_no, "expected `# field <name> grid ...`")),
    };
    let dim: usize = words
        .first()
        .and_then(|d| d.parse().ok())
        .filter(|d| *d == 1 || *d == 2)
        .ok_or_else(|| bad(line_no, "grid dimension must be 1 or 2"))?;
    if words.len() != 1 + 3 * dim {
        return Err(bad(line_no, format!("expected {} grid numbers", 1 + 3 * dim)));
    }
    let n = words[1..=dim]
        .iter()
        .map(|w| w.parse::<usize>().map_err(|_| bad(line_no, format!("bad cell count `{w}`"))))
        .collect::<Result<Vec<_>>>()?;
    let reals = words[1 + dim..]
        .iter()
        .map(|w| w.parse::<f64>().map_err(|_| bad(line_no, format!("bad coordinate `{w}`"))))
        .collect::<Result<Vec<_>>>()?;
    let grid = Grid::new(dim, &reals[..dim], &reals[dim..], &n)?;
    Ok((name, grid))
}

pub fn parse_fields(text: &str) -> Result<Vec<NodeField>> {
    let mut out: Vec<(usize, NodeField)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if rest.trim_start().starts_with("field") {
                let (name, grid) = parse_header(line_no, rest)?;
                out.push((
                    line_no,
                    NodeField {
                        name,
                        grid,
                        values: Vec::new(),
                    },
                ));
            }
            continue;
        }
        let (_, field) = out
            .last_mut()
            .ok_or_else(|| bad(line_no, "value before the first `# field` header"))?;
        let v: f64 = line
            .parse()
            .map_err(|_| bad(line_no, format!("bad value `{line}`")))?;
        field.values.push(v);
    }
    if out.is_empty() {
        return Err(bad(1, "no `# field` header"));
    }
    for (line_no, f) in &out {
        if f.values.len() != f.grid.node_count() {
            return Err(bad(
                *line_no,
                format!(
                    "field {} has {} values, grid has {} nodes",
                    f.name,
                    f.values.len(),
                    f.grid.node_count()
                ),
            ));
        }
    }
    Ok(out.into_iter().map(|(_, f)| f).collect())
}

/// Formats one block; values use the shortest round-trip representation.
pub fn format_field(name: &str, grid: &Grid, values: &[f64]) -> String {
    let mut s = format!("# field {name} grid {}", grid.dim());
    for n in grid.cells() {
        write!(s, " {n}").unwrap();
    }
    for v in grid.lo().iter().chain(grid.hi()) {
        write!(s, " {v:?}").unwrap();
    }
    s.push('\n');
    for v in values {
        writeln!(s, "{v:?}").unwrap();
    }
    s
}

pub fn format_fields<'a>(grid: &Grid, fields: impl IntoIterator<Item = (&'a str, &'a [f64])>) -> String {
    fields
        .into_iter()
        .map(|(name, values)| format_field(name, grid, values))
        .collect()
}

/// Reads one field per species and checks it lives on `grid`.
pub fn load_block_field(path: &std::path::Path, grid: &Grid, n_species: usize) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Validation(format!("cannot read {}: {e}", path.display())))?;
    let fields = parse_fields(&text)?;
    if fields.len() != n_species {
        return Err(Error::Validation(format!(
            "{} holds {} fields, the problem has {n_species} species",
            path.display(),
            fields.len()
        )));
    }
    for f in &fields {
        if f.grid.id() != grid.id() {
            return Err(Error::Validation(format!(
                "field {} in {} is on a different grid",
                f.name,
                path.display()
            )));
        }
    }
    Ok(fields.into_iter().map(|f| f.values).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_and_values() {
        let text = "# field u1 grid 1 3 0.0 1.0\n0\n0.5\n0.25\n0\n";
        let f = &parse_fields(text).unwrap()[0];
        assert_eq!(f.name, "u1");
        assert_eq!(f.grid.cells(), &[3]);
        assert_eq!(f.values, vec![0.0, 0.5, 0.25, 0.0]);
        assert!(parse_fields("# field u grid 1 3 0 1\n1\n2\n").is_err());
        assert!(parse_fields("1\n").is_err());
        assert!(parse_fields("# field u grid 3 2 0 1\n").is_err());
    }

    proptest! {
        #[test]
        fn round_trip(values in proptest::collection::vec(-1e6f64..1e6, 2 * 36), lo in -2.0f64..0.0) {
            let grid = Grid::new_2d([lo, lo], [1.0, 2.5], [5, 5]).unwrap();
            let text = format_fields(&grid, [("u1", &values[..36]), ("u2", &values[36..])]);
            let back = parse_fields(&text).unwrap();
            prop_assert_eq!(back.len(), 2);
            prop_assert_eq!(&back[0].grid, &grid);
            prop_assert_eq!(&back[0].values[..], &values[..36]);
            prop_assert_eq!(&back[1].values[..], &values[36..]);
        }
    }
}
