//! Plain-text landmark files.
//!
//! ```text
//! N K S
//! # specimen-id        (optional)
//! x11 x12 ... x1K
//! ...                  (N rows)
//! ```
//!
//! repeated for `S` specimens. Blank lines are ignored. Values are written
//! with 17 significant digits so a write/read cycle is bit-exact.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::LandmarkSet;

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_row(line_no: usize, text: &str, expected: usize) -> Result<Vec<f64>> {
    let values = text
        .split_whitespace()
        .map(|tok| tok.parse::<f64>().map_err(|_| parse_err(line_no, format!("'{tok}' is not a number"))))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != expected {
        return Err(parse_err(line_no, format!("expected {expected} values, found {}", values.len())));
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(parse_err(line_no, format!("non-finite value {bad}")));
    }
    Ok(values)
}

/// Parses a landmark file; every specimen shares the header's `N` and `K`.
pub fn parse_landmarks(text: &str) -> Result<Vec<LandmarkSet>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let (header_line, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(parse_err(header_line, "header must be 'N K S'"));
    }
    let dims = fields
        .iter()
        .map(|f| {
            f.parse::<usize>()
                .map_err(|_| parse_err(header_line, format!("'{f}' is not a non-negative integer")))
        })
        .collect::<Result<Vec<_>>>()?;
    let (n, k, s) = (dims[0], dims[1], dims[2]);
    if n == 0 || k == 0 {
        return Err(parse_err(header_line, "N and K must be positive"));
    }

    let mut sets = Vec::with_capacity(s);
    let mut last_line = header_line;
    for index in 0..s {
        let mut id = format!("specimen-{}", index + 1);
        let mut data = Vec::with_capacity(n * k);
        let mut rows = 0;
        while rows < n {
            let Some((line_no, line)) = lines.next() else {
                return Err(parse_err(
                    last_line + 1,
                    format!(
                        "header declares {s} specimens of {n} landmarks but the file ends inside specimen {}",
                        index + 1
                    ),
                ));
            };
            last_line = line_no;
            if let Some(rest) = line.strip_prefix('#') {
                if rows != 0 {
                    return Err(parse_err(
                        line_no,
                        format!("specimen {} has only {rows} of {n} rows", index + 1),
                    ));
                }
                id = rest.trim().to_string();
                continue;
            }
            data.extend(parse_row(line_no, line, k)?);
            rows += 1;
        }
        let coords = DMatrix::from_row_slice(n, k, &data);
        let set = LandmarkSet::new(id, coords).map_err(|e| parse_err(last_line, e.to_string()))?;
        sets.push(set);
    }
    if let Some((line_no, _)) = lines.next() {
        return Err(parse_err(line_no, format!("content after the {s} declared specimens")));
    }
    Ok(sets)
}

/// Writes specimens in the format read by [`parse_landmarks`].
pub fn format_landmarks(sets: &[LandmarkSet]) -> Result<String> {
    let (n, k) = sets.first().map_or((0, 0), |s| s.coords.shape());
    if sets.iter().any(|s| s.coords.shape() != (n, k)) {
        return Err(Error::Dimension("specimens differ in N or K".into()));
    }
    let mut out = String::new();
    let _ = writeln!(out, "{n} {k} {}", sets.len());
    for s in sets {
        let _ = writeln!(out, "# {}", s.id);
        for i in 0..n {
            let row: Vec<String> = (0..k).map(|j| format!("{:.16e}", s.coords[(i, j)])).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
    }
    Ok(out)
}

/// Parses a whitespace-separated square matrix (one row per line).
pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let width = rows.first().map_or(line.split_whitespace().count(), Vec::len);
        rows.push(parse_row(i + 1, line, width)?);
    }
    let n = rows.len();
    if n == 0 {
        return Err(parse_err(1, "matrix file is empty"));
    }
    if rows[0].len() != n {
        return Err(parse_err(1, format!("matrix must be square, got {n}×{}", rows[0].len())));
    }
    Ok(DMatrix::from_row_iterator(n, n, rows.into_iter().flatten()))
}
