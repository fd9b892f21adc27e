//! Text formats: dense symmetric matrices, sample files and result CSVs.
//!
//! Dense matrix: first line `p`, then `p` whitespace-separated rows of `p`
//! numbers. Samples: first line `n p`, then `n` rows of `p` numbers. All
//! writers go through a temporary file in the destination directory and
//! rename on success, so a failed write never leaves a partial file.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SymMatrix;

/// Writes `contents` to `path` via a temp file + rename.
pub fn write_atomic(path: impl AsRef<Path>, contents: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| Error::io(&dir, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
    tmp.flush().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Non-blank lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_numbers(path: &Path, line: usize, s: &str, expected: usize) -> Result<Vec<f64>> {
    let values = s
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| parse_error(path, line, format!("not a number: {tok:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.len() != expected {
        return Err(parse_error(
            path,
            line,
            format!("expected {expected} values, found {}", values.len()),
        ));
    }
    Ok(values)
}

fn parse_count(path: &Path, line: usize, tok: Option<&str>, what: &str) -> Result<usize> {
    let tok = tok.ok_or_else(|| parse_error(path, line, format!("missing {what}")))?;
    match tok.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(parse_error(
            path,
            line,
            format!("{what} must be a positive integer, got {tok:?}"),
        )),
    }
}

/// Parses the dense matrix format. `origin` only labels error messages.
pub fn parse_dense_matrix(text: &str, origin: &Path) -> Result<SymMatrix> {
    let mut lines = content_lines(text);
    let (line, header) = lines
        .next()
        .ok_or_else(|| parse_error(origin, 1, "empty matrix file"))?;
    let mut toks = header.split_whitespace();
    let p = parse_count(origin, line, toks.next(), "dimension p")?;
    if toks.next().is_some() {
        return Err(parse_error(origin, line, "header must contain only p"));
    }
    let mut rows = Vec::with_capacity(p);
    for (line, s) in lines.by_ref().take(p) {
        rows.push(parse_numbers(origin, line, s, p)?);
    }
    if rows.len() != p {
        return Err(parse_error(
            origin,
            line,
            format!("expected {p} rows, found {}", rows.len()),
        ));
    }
    if let Some((line, _)) = lines.next() {
        return Err(parse_error(origin, line, "trailing content after matrix"));
    }
    SymMatrix::from_rows(&rows)
}

pub fn format_dense_matrix(m: &SymMatrix) -> String {
    let p = m.dim();
    let mut out = format!("{p}\n");
    for i in 0..p {
        for j in 0..p {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{:e}", m.get(i, j));
        }
        out.push('\n');
    }
    out
}

pub fn read_dense_matrix(path: impl AsRef<Path>) -> Result<SymMatrix> {
    let path = path.as_ref();
    parse_dense_matrix(&read_text(path)?, path)
}

pub fn write_dense_matrix(path: impl AsRef<Path>, m: &SymMatrix) -> Result<()> {
    write_atomic(path, format_dense_matrix(m).as_bytes())
}

/// Parses a samples file into an `n × p` matrix (one sample per row).
pub fn parse_samples(text: &str, origin: &Path) -> Result<DMatrix<f64>> {
    let mut lines = content_lines(text);
    let (line, header) = lines
        .next()
        .ok_or_else(|| parse_error(origin, 1, "empty samples file"))?;
    let mut toks = header.split_whitespace();
    let n = parse_count(origin, line, toks.next(), "sample count n")?;
    let p = parse_count(origin, line, toks.next(), "dimension p")?;
    if toks.next().is_some() {
        return Err(parse_error(origin, line, "header must be `n p`"));
    }
    let mut data = DMatrix::zeros(n, p);
    let mut seen = 0;
    for (line, s) in lines.by_ref().take(n) {
        let row = parse_numbers(origin, line, s, p)?;
        for (j, v) in row.into_iter().enumerate() {
            if !v.is_finite() {
                return Err(parse_error(origin, line, "non-finite sample value"));
            }
            data[(seen, j)] = v;
        }
        seen += 1;
    }
    if seen != n {
        return Err(parse_error(
            origin,
            line,
            format!("expected {n} sample rows, found {seen}"),
        ));
    }
    if let Some((line, _)) = lines.next() {
        return Err(parse_error(origin, line, "trailing content after samples"));
    }
    Ok(data)
}

pub fn format_samples(data: &DMatrix<f64>) -> String {
    let (n, p) = data.shape();
    let mut out = format!("{n} {p}\n");
    for i in 0..n {
        for j in 0..p {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{:e}", data[(i, j)]);
        }
        out.push('\n');
    }
    out
}

pub fn read_samples(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    parse_samples(&read_text(path)?, path)
}

pub fn write_samples(path: impl AsRef<Path>, data: &DMatrix<f64>) -> Result<()> {
    write_atomic(path, format_samples(data).as_bytes())
}

/// Column order of the experiment CSV.
pub const CSV_COLUMNS: [&str; 9] = [
    "axis_value",
    "empirical_rms",
    "std_error",
    "theoretical_total",
    "theoretical_moderate",
    "theoretical_large_dev",
    "ratio",
    "trials",
    "seed",
];

/// One CSV row of an experiment or scaling study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub axis_value: f64,
    pub empirical_rms: f64,
    pub std_error: f64,
    pub theoretical_total: f64,
    pub theoretical_moderate: f64,
    pub theoretical_large_dev: f64,
    pub ratio: f64,
    pub trials: usize,
    pub seed: u64,
}

pub fn format_csv(rows: &[ResultRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.write_record([
            format!("{:e}", r.axis_value),
            format!("{:e}", r.empirical_rms),
            format!("{:e}", r.std_error),
            format!("{:e}", r.theoretical_total),
            format!("{:e}", r.theoretical_moderate),
            format!("{:e}", r.theoretical_large_dev),
            format!("{:e}", r.ratio),
            r.trials.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.into_inner()
        .map_err(|e| Error::io("<csv buffer>", e.into_error()))
}

/// Writes the header and one row per result, atomically.
pub fn emit_csv(rows: &[ResultRow], path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, &format_csv(rows)?)
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.iter().ne(CSV_COLUMNS.iter().copied()) {
        return Err(parse_error(path, 1, "unexpected CSV header"));
    }
    reader
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_matrix_round_trip() {
        let m = SymMatrix::from_rows(&[
            vec![1.0, 0.1, -3.5e-7],
            vec![0.1, 2.0, 1.0 / 3.0],
            vec![-3.5e-7, 1.0 / 3.0, 0.0],
        ])
        .unwrap();
        let text = format_dense_matrix(&m);
        let back = parse_dense_matrix(&text, Path::new("mem")).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn dense_matrix_rejects_asymmetry_and_shape_errors() {
        let asym = "2\n1 2\n3 1\n";
        assert!(matches!(
            parse_dense_matrix(asym, Path::new("m")),
            Err(Error::NotSymmetric { .. })
        ));
        assert!(matches!(
            parse_dense_matrix("2\n1 2\n", Path::new("m")),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_dense_matrix("2\n1 2 3\n2 1 0\n", Path::new("m")),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(parse_dense_matrix("", Path::new("m")).is_err());
        assert!(parse_dense_matrix("1\nx\n", Path::new("m")).is_err());
    }

    #[test]
    fn samples_round_trip() {
        let data = DMatrix::from_row_slice(2, 3, &[1.0, -2.0, 0.25, 1e-300, 7.0, -0.0]);
        let back = parse_samples(&format_samples(&data), Path::new("s")).unwrap();
        assert_eq!(back, data);
        assert!(parse_samples("2 2\n1 2\n", Path::new("s")).is_err());
        assert!(parse_samples("1 2\n1 inf\n", Path::new("s")).is_err());
    }

    #[test]
    fn empty_csv_is_header_only() {
        let bytes = format_csv(&[]).unwrap();
        assert_eq!(
            String::from_utf8(bytes).unwrap().trim(),
            CSV_COLUMNS.join(",")
        );
    }

    #[test]
    fn csv_round_trip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let rows = vec![
            ResultRow {
                axis_value: 128.0,
                empirical_rms: 0.123_456_789_012_345_68,
                std_error: 1.0 / 3.0,
                theoretical_total: 4.5e10,
                theoretical_moderate: 2.0,
                theoretical_large_dev: 4.5e10 - 2.0,
                ratio: 2.7e-12,
                trials: 50,
                seed: u64::MAX,
            },
            ResultRow {
                axis_value: 256.0,
                empirical_rms: 0.0,
                std_error: 0.0,
                theoretical_total: 0.0,
                theoretical_moderate: 0.0,
                theoretical_large_dev: 0.0,
                ratio: 0.0,
                trials: 2,
                seed: 0,
            },
        ];
        emit_csv(&rows, &path).unwrap();
        assert_eq!(read_csv(&path).unwrap(), rows);
    }

    #[test]
    fn atomic_write_into_missing_directory_fails_cleanly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("missing").join("x.txt");
        assert!(write_atomic(&path, b"x").is_err());
        assert!(!path.exists());
    }
}
