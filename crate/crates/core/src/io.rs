//! Text formats for operators, vectors and dof maps.
//!
//! * Matrix Market coordinate files (`real`/`integer`, `general`/`symmetric`,
//!   1-based indices).
//! * Vectors: one value per line, written with 17 significant digits.
//! * `l2g`: a `p <order>` line, then one line of `(p+1)^3` 0-based process dof
//!   indices per element.
//! * `g2u`: one 0-based universal index per line.
//!
//! Every parser has a `parse_*` form over a string (the `source` path only
//! labels errors) and a `read_*` form over a file. Writers replace the target
//! atomically.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::dofmaps::{dofs_per_element, GlobalToUniversalMap, LocalToGlobalMap};
use crate::error::{Error, Result};
use crate::sparse::{coo_to_csr_summed, CooTriplet, SparseMatrix};

/// Non-blank lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes `contents` to a temporary file next to `path` and renames it into
/// place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents.as_bytes())
        .and_then(|_| tmp.as_file().sync_all())
        .map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Largest row or column count accepted from a Matrix Market size line.
pub const MAX_DIMENSION: usize = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

/// Parses a Matrix Market coordinate file. Repeated entries are summed.
pub fn parse_matrix_market(text: &str, source: &Path) -> Result<SparseMatrix> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(source, 1, "empty file"))?;
    let tokens: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" {
        return Err(Error::parse(
            source,
            hline,
            "expected '%%MatrixMarket matrix coordinate <field> <symmetry>'",
        ));
    }
    if tokens[1] != "matrix" || tokens[2] != "coordinate" {
        return Err(Error::parse(
            source,
            hline,
            format!("unsupported object/format '{} {}'", tokens[1], tokens[2]),
        ));
    }
    if tokens[3] != "real" && tokens[3] != "integer" {
        return Err(Error::parse(source, hline, format!("unsupported field '{}'", tokens[3])));
    }
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => {
            return Err(Error::parse(source, hline, format!("unsupported symmetry '{other}'")))
        }
    };

    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (sline, size) = body
        .next()
        .ok_or_else(|| Error::parse(source, hline + 1, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::parse(source, sline, format!("bad size line: {e}")))?;
    let [nrows, ncols, nnz] = dims[..] else {
        return Err(Error::parse(source, sline, "size line needs 'rows cols entries'"));
    };
    if nrows > MAX_DIMENSION || ncols > MAX_DIMENSION {
        return Err(Error::parse(
            source,
            sline,
            format!("dimensions {nrows}x{ncols} exceed the supported {MAX_DIMENSION}"),
        ));
    }
    if symmetry == Symmetry::Symmetric && nrows != ncols {
        return Err(Error::parse(source, sline, "symmetric matrix must be square"));
    }

    let mut triplets = Vec::with_capacity(nnz.min(1 << 16));
    let mut seen = 0usize;
    let mut last_line = sline;
    for (lno, line) in body {
        last_line = lno;
        if seen == nnz {
            return Err(Error::parse(source, lno, format!("more than {nnz} entries")));
        }
        let mut parts = line.split_whitespace();
        let (Some(i), Some(j), Some(v), None) = (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(Error::parse(source, lno, "entry needs 'row col value'"));
        };
        let parse_index = |s: &str, bound: usize, what: &str| -> Result<usize> {
            let k: usize = s
                .parse()
                .map_err(|e| Error::parse(source, lno, format!("bad {what} index '{s}': {e}")))?;
            if k == 0 || k > bound {
                return Err(Error::parse(
                    source,
                    lno,
                    format!("{what} index {k} outside 1..={bound}"),
                ));
            }
            Ok(k - 1)
        };
        let i = parse_index(i, nrows, "row")?;
        let j = parse_index(j, ncols, "column")?;
        let v: f64 = v
            .parse()
            .map_err(|e| Error::parse(source, lno, format!("bad value '{v}': {e}")))?;
        if !v.is_finite() {
            return Err(Error::parse(source, lno, format!("non-finite value {v}")));
        }
        triplets.push(CooTriplet::new(i, j, v));
        if symmetry == Symmetry::Symmetric && i != j {
            triplets.push(CooTriplet::new(j, i, v));
        }
        seen += 1;
    }
    if seen != nnz {
        return Err(Error::parse(
            source,
            last_line,
            format!("expected {nnz} entries, found {seen}"),
        ));
    }
    coo_to_csr_summed(&triplets, nrows, ncols)
}

pub fn read_matrix_market(path: &Path) -> Result<SparseMatrix> {
    parse_matrix_market(&read_text(path)?, path)
}

/// Matrix Market text for `a`, always in `general` form.
pub fn format_matrix_market(a: &SparseMatrix) -> String {
    let mut out = String::with_capacity(32 * a.nnz() + 64);
    out.push_str("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(out, "{} {} {}", a.nrows(), a.ncols(), a.nnz());
    for t in a.triplets() {
        let _ = writeln!(out, "{} {} {:.16e}", t.row + 1, t.col + 1, t.value);
    }
    out
}

pub fn write_matrix_market(path: &Path, a: &SparseMatrix) -> Result<()> {
    write_atomic(path, &format_matrix_market(a))
}

pub fn parse_vector(text: &str, source: &Path) -> Result<Vec<f64>> {
    content_lines(text)
        .map(|(lno, l)| {
            let v: f64 = l
                .parse()
                .map_err(|e| Error::parse(source, lno, format!("bad value '{l}': {e}")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::parse(source, lno, format!("non-finite value {v}")))
            }
        })
        .collect()
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    parse_vector(&read_text(path)?, path)
}

pub fn format_vector(v: &[f64]) -> String {
    let mut out = String::with_capacity(25 * v.len());
    for x in v {
        let _ = writeln!(out, "{x:.16e}");
    }
    out
}

pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    write_atomic(path, &format_vector(v))
}

pub fn parse_l2g(text: &str, source: &Path) -> Result<LocalToGlobalMap> {
    let mut lines = content_lines(text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(source, 1, "empty l2g file"))?;
    let order = match header.split_whitespace().collect::<Vec<_>>()[..] {
        ["p", o] => o
            .parse::<usize>()
            .ok()
            .filter(|&o| (1..=64).contains(&o))
            .ok_or_else(|| Error::parse(source, hline, format!("bad order '{o}'")))?,
        _ => return Err(Error::parse(source, hline, "expected 'p <order>'")),
    };
    let per = dofs_per_element(order);
    let mut entries = Vec::new();
    for (lno, line) in lines {
        let before = entries.len();
        for tok in line.split_whitespace() {
            let d: usize = tok
                .parse()
                .map_err(|e| Error::parse(source, lno, format!("bad dof index '{tok}': {e}")))?;
            entries.push(d);
        }
        if entries.len() - before != per {
            return Err(Error::parse(
                source,
                lno,
                format!("element has {} dofs, expected {per}", entries.len() - before),
            ));
        }
    }
    if entries.is_empty() {
        return Err(Error::parse(source, hline, "no elements"));
    }
    // Keeps a hostile max index from sizing a huge coverage table.
    if entries.iter().any(|&d| d >= entries.len()) {
        return Err(Error::parse(
            source,
            hline,
            "dof index exceeds the number of map entries",
        ));
    }
    LocalToGlobalMap::new(order, entries).map_err(|e| Error::parse(source, hline, e.to_string()))
}

pub fn read_l2g(path: &Path) -> Result<LocalToGlobalMap> {
    parse_l2g(&read_text(path)?, path)
}

pub fn format_l2g(map: &LocalToGlobalMap) -> String {
    let mut out = format!("p {}\n", map.order());
    for row in map.rows() {
        let mut first = true;
        for d in row {
            if !first {
                out.push(' ');
            }
            first = false;
            let _ = write!(out, "{d}");
        }
        out.push('\n');
    }
    out
}

pub fn write_l2g(path: &Path, map: &LocalToGlobalMap) -> Result<()> {
    write_atomic(path, &format_l2g(map))
}

pub fn parse_g2u(text: &str, source: &Path) -> Result<GlobalToUniversalMap> {
    let values = content_lines(text)
        .map(|(lno, l)| {
            l.parse::<usize>()
                .map_err(|e| Error::parse(source, lno, format!("bad index '{l}': {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    GlobalToUniversalMap::new(values).map_err(|e| Error::parse(source, 1, e.to_string()))
}

pub fn read_g2u(path: &Path) -> Result<GlobalToUniversalMap> {
    parse_g2u(&read_text(path)?, path)
}

pub fn format_g2u(map: &GlobalToUniversalMap) -> String {
    let mut out = String::with_capacity(8 * map.len());
    for v in map.values() {
        let _ = writeln!(out, "{v}");
    }
    out
}

pub fn write_g2u(path: &Path, map: &GlobalToUniversalMap) -> Result<()> {
    write_atomic(path, &format_g2u(map))
}
