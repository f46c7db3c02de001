//! Matrix Market coordinate reader and writer.
//!
//! Accepts `%%MatrixMarket matrix coordinate {real|integer} {symmetric|general}`.
//! A `general` file must describe a symmetric matrix; only its lower triangle
//! is kept.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::SparseSymmetric;

#[derive(Debug, Error)]
pub enum MatrixMarketError {
    #[error("line {line}: malformed header: {reason}")]
    MalformedHeader { line: usize, reason: String },

    #[error("complex-valued matrices are not supported")]
    ComplexUnsupported,

    #[error("unsupported Matrix Market variant: {0}")]
    Unsupported(String),

    #[error("matrix is not square: {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("line {line}: entry ({row}, {col}) is outside a {n}x{n} matrix")]
    IndexOutOfRange {
        line: usize,
        row: usize,
        col: usize,
        n: usize,
    },

    #[error("line {line}: malformed entry: {reason}")]
    MalformedEntry { line: usize, reason: String },

    #[error("expected {expected} entries, found {found}")]
    EntryCount { expected: usize, found: usize },

    #[error("general matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    Symmetric,
    General,
}

fn header_err(line: usize, reason: impl Into<String>) -> MatrixMarketError {
    MatrixMarketError::MalformedHeader {
        line,
        reason: reason.into(),
    }
}

fn parse_banner(line: &str) -> Result<Symmetry, MatrixMarketError> {
    let tokens: Vec<String> = line
        .split_whitespace()
        .map(|t| t.to_ascii_lowercase())
        .collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" {
        return Err(header_err(
            1,
            "expected `%%MatrixMarket matrix coordinate <field> <symmetry>`",
        ));
    }
    if tokens[1] != "matrix" {
        return Err(header_err(1, format!("unknown object `{}`", tokens[1])));
    }
    if tokens[2] != "coordinate" {
        return Err(MatrixMarketError::Unsupported(format!(
            "format `{}`",
            tokens[2]
        )));
    }
    match tokens[3].as_str() {
        "real" | "double" | "integer" => {}
        "complex" => return Err(MatrixMarketError::ComplexUnsupported),
        other => return Err(MatrixMarketError::Unsupported(format!("field `{other}`"))),
    }
    match tokens[4].as_str() {
        "symmetric" => Ok(Symmetry::Symmetric),
        "general" => Ok(Symmetry::General),
        other => Err(MatrixMarketError::Unsupported(format!(
            "symmetry `{other}`"
        ))),
    }
}

/// Parses a Matrix Market stream into lower-triangular storage. Indices are
/// 1-based in the file; duplicate coordinates are summed.
pub fn parse_matrix_market<R: Read>(reader: R) -> Result<SparseSymmetric, MatrixMarketError> {
    let reader = BufReader::new(reader);
    let mut lines = reader.lines().enumerate();

    let symmetry = match lines.next() {
        Some((_, line)) => parse_banner(&line?)?,
        None => return Err(header_err(1, "empty input")),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        match size {
            None => {
                let mut next = || -> Result<usize, MatrixMarketError> {
                    fields
                        .next()
                        .ok_or_else(|| header_err(line_no, "size line needs `rows cols nnz`"))?
                        .parse()
                        .map_err(|e| header_err(line_no, format!("bad size field: {e}")))
                };
                let (rows, cols, nnz) = (next()?, next()?, next()?);
                if rows != cols {
                    return Err(MatrixMarketError::NonSquare { rows, cols });
                }
                triplets.reserve(nnz);
                size = Some((rows, cols, nnz));
            }
            Some((n, _, _)) => {
                let entry_err = |reason: String| MatrixMarketError::MalformedEntry {
                    line: line_no,
                    reason,
                };
                let row: usize = fields
                    .next()
                    .ok_or_else(|| entry_err("missing row".into()))?
                    .parse()
                    .map_err(|e| entry_err(format!("row: {e}")))?;
                let col: usize = fields
                    .next()
                    .ok_or_else(|| entry_err("missing column".into()))?
                    .parse()
                    .map_err(|e| entry_err(format!("column: {e}")))?;
                let value: f64 = fields
                    .next()
                    .ok_or_else(|| entry_err("missing value".into()))?
                    .parse()
                    .map_err(|e| entry_err(format!("value: {e}")))?;
                if row == 0 || col == 0 || row > n || col > n {
                    return Err(MatrixMarketError::IndexOutOfRange {
                        line: line_no,
                        row,
                        col,
                        n,
                    });
                }
                triplets.push((row - 1, col - 1, value));
            }
        }
    }

    let (n, _, nnz) = size.ok_or_else(|| header_err(2, "missing size line"))?;
    if triplets.len() != nnz {
        return Err(MatrixMarketError::EntryCount {
            expected: nnz,
            found: triplets.len(),
        });
    }

    let triplets = match symmetry {
        Symmetry::Symmetric => {
            // symmetric files list one triangle; upper entries mean the same element
            triplets
        }
        Symmetry::General => lower_of_symmetric_general(triplets)?,
    };
    Ok(SparseSymmetric::from_triplets(n, triplets).expect("indices validated above"))
}

fn lower_of_symmetric_general(
    triplets: Vec<(usize, usize, f64)>,
) -> Result<Vec<(usize, usize, f64)>, MatrixMarketError> {
    let mut sums: HashMap<(usize, usize), f64> = HashMap::with_capacity(triplets.len());
    for &(r, c, v) in &triplets {
        *sums.entry((r, c)).or_insert(0.0) += v;
    }
    let mut lower = Vec::with_capacity(triplets.len() / 2 + 1);
    let mut keys: Vec<_> = sums.keys().copied().collect();
    keys.sort_unstable();
    for (r, c) in keys {
        let v = sums[&(r, c)];
        if r == c {
            lower.push((r, c, v));
            continue;
        }
        let mirror = sums.get(&(c, r)).copied().unwrap_or(0.0);
        if mirror != v {
            let (row, col) = if r > c { (r, c) } else { (c, r) };
            return Err(MatrixMarketError::NotSymmetric {
                row: row + 1,
                col: col + 1,
            });
        }
        if r > c {
            lower.push((r, c, v));
        }
    }
    Ok(lower)
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<SparseSymmetric, MatrixMarketError> {
    parse_matrix_market(File::open(path)?)
}

/// Writes `coordinate real symmetric` with 17 significant digits, enough for
/// an exact round trip.
pub fn write_matrix_market<W: Write>(s: &SparseSymmetric, mut w: W) -> std::io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
    writeln!(w, "{} {} {}", s.n(), s.n(), s.nnz())?;
    for (r, c, v) in s.iter() {
        writeln!(w, "{} {} {:.16e}", r + 1, c + 1, v)?;
    }
    Ok(())
}
