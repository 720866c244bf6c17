use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Reads a headerless comma-separated matrix, one row per line. Lines
/// starting with `#` are comments. With `shape = Some((rows, cols))` the
/// result must have exactly that shape.
pub fn load_matrix_csv(path: &Path, shape: Option<(usize, usize)>) -> Result<DMatrix<f64>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_csv(file, path, shape)
}

pub(crate) fn parse_matrix_csv<R: std::io::Read>(
    mut source: R,
    path: &Path,
    shape: Option<(usize, usize)>,
) -> Result<DMatrix<f64>> {
    let fail = |line: usize, reason: String| Error::MatrixParse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| Error::io(path, e))?;

    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    let mut last_line = 0;
    // Line by line so that errors carry the physical line number, which the
    // reader miscounts around blank lines.
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        last_line = line;
        if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
            continue;
        }
        let record = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(raw.as_bytes())
            .records()
            .next()
            .transpose()
            .map_err(|e| fail(line, e.to_string()))?
            .unwrap_or_default();
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(fail(
                    line,
                    format!("expected {c} columns, found {}", record.len()),
                ));
            }
            _ => {}
        }
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| fail(line, format!("column {}: {cell:?} is not a number", j + 1)))?;
            if !v.is_finite() {
                return Err(fail(line, format!("column {}: non-finite value", j + 1)));
            }
            values.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| fail(last_line, "no data rows".into()))?;
    if let Some((m, n)) = shape {
        if (rows, cols) != (m, n) {
            return Err(fail(
                last_line,
                format!("matrix is {rows}x{cols}, scenario declares M = {m}, N = {n}"),
            ));
        }
    }
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}
