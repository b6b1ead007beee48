//! Matrix Market and dense CSV input/output.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| Error::Parse(format!("line {line}: bad number {tok:?}")))
}

fn parse_usize(tok: &str, line: usize) -> Result<usize> {
    tok.parse::<usize>()
        .map_err(|_| Error::Parse(format!("line {line}: bad integer {tok:?}")))
}

#[derive(Clone, Copy, PartialEq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

/// Reads a real Matrix Market file in array or coordinate format.
pub fn read_matrix_market<R: Read>(reader: R) -> Result<DenseMatrix> {
    let mut lines = BufReader::new(reader).lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse("empty Matrix Market input".into()))?;
    let header = header?;
    let fields: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(Error::Parse(format!("bad Matrix Market header {header:?}")));
    }
    let coordinate = match fields[2].as_str() {
        "coordinate" => true,
        "array" => false,
        other => return Err(Error::Parse(format!("unsupported format {other:?}"))),
    };
    let pattern = match fields[3].as_str() {
        "real" | "integer" | "double" => false,
        "pattern" if coordinate => true,
        other => return Err(Error::Parse(format!("unsupported field {other:?}"))),
    };
    let symmetry = match fields[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        other => return Err(Error::Parse(format!("unsupported symmetry {other:?}"))),
    };

    let mut body = lines.filter_map(|(i, l)| match l {
        Ok(s) if s.trim().is_empty() || s.trim_start().starts_with('%') => None,
        other => Some((i + 1, other)),
    });
    let (size_line, size) = body
        .next()
        .ok_or_else(|| Error::Parse("missing size line".into()))?;
    let size = size?;
    let dims: Vec<&str> = size.split_whitespace().collect();
    let rows = parse_usize(dims.first().copied().unwrap_or(""), size_line)?;
    let cols = parse_usize(dims.get(1).copied().unwrap_or(""), size_line)?;
    let mut a = DMatrix::zeros(rows, cols);

    if coordinate {
        let nnz = parse_usize(dims.get(2).copied().unwrap_or(""), size_line)?;
        let mut seen = 0;
        for (line_no, line) in body {
            let line = line?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            let need = if pattern { 2 } else { 3 };
            if toks.len() < need {
                return Err(Error::Parse(format!("line {line_no}: expected {need} fields")));
            }
            let i = parse_usize(toks[0], line_no)?;
            let j = parse_usize(toks[1], line_no)?;
            if i == 0 || j == 0 || i > rows || j > cols {
                return Err(Error::Parse(format!(
                    "line {line_no}: entry ({i}, {j}) outside {rows}x{cols}"
                )));
            }
            let v = if pattern { 1.0 } else { parse_f64(toks[2], line_no)? };
            a[(i - 1, j - 1)] += v;
            if i != j {
                match symmetry {
                    Symmetry::Symmetric => a[(j - 1, i - 1)] += v,
                    Symmetry::SkewSymmetric => a[(j - 1, i - 1)] -= v,
                    Symmetry::General => {}
                }
            }
            seen += 1;
        }
        if seen != nnz {
            return Err(Error::Parse(format!("expected {nnz} entries, found {seen}")));
        }
    } else {
        let positions: Vec<(usize, usize)> = match symmetry {
            Symmetry::General => (0..cols).flat_map(|j| (0..rows).map(move |i| (i, j))).collect(),
            Symmetry::Symmetric => (0..cols).flat_map(|j| (j..rows).map(move |i| (i, j))).collect(),
            Symmetry::SkewSymmetric => {
                (0..cols).flat_map(|j| (j + 1..rows).map(move |i| (i, j))).collect()
            }
        };
        let mut values = Vec::with_capacity(positions.len());
        for (line_no, line) in body {
            let line = line?;
            for tok in line.split_whitespace() {
                values.push(parse_f64(tok, line_no)?);
            }
        }
        if values.len() != positions.len() {
            return Err(Error::Parse(format!(
                "expected {} values, found {}",
                positions.len(),
                values.len()
            )));
        }
        for (&(i, j), v) in positions.iter().zip(values) {
            a[(i, j)] = v;
            match symmetry {
                Symmetry::Symmetric => a[(j, i)] = v,
                Symmetry::SkewSymmetric => a[(j, i)] = -v,
                Symmetry::General => {}
            }
        }
    }
    DenseMatrix::from_nalgebra(a)
}

/// Writes `a` as a dense column-major Matrix Market array.
pub fn write_matrix_market<W: Write>(a: &DenseMatrix, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} {}", a.rows(), a.cols())?;
    for v in a.iter() {
        writeln!(w, "{v:e}")?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the nonzeros of `a` in Matrix Market coordinate format.
pub fn write_matrix_market_coordinate<W: Write>(a: &DenseMatrix, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    let nnz = a.iter().filter(|v| **v != 0.0).count();
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.rows(), a.cols(), nnz)?;
    for j in 0..a.cols() {
        for i in 0..a.rows() {
            let v = a[(i, j)];
            if v != 0.0 {
                writeln!(w, "{} {} {v:e}", i + 1, j + 1)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a dense CSV matrix: one row per line, no header.
pub fn read_csv<R: Read>(reader: R) -> Result<DenseMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|t| parse_f64(t, i + 1))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    DenseMatrix::from_rows(&rows)
}

/// Writes `a` as dense CSV, one row per line.
pub fn write_csv<W: Write>(a: &DenseMatrix, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for i in 0..a.rows() {
        w.write_record(a.row(i).iter().map(|v| format!("{v:e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a matrix from `path`, choosing the format by extension (`.csv` is
/// CSV, anything else Matrix Market).
pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    let file = File::open(path)?;
    if is_csv(path) {
        read_csv(file)
    } else {
        read_matrix_market(file)
    }
}

/// Writes a matrix to `path`, choosing the format by extension.
pub fn write_matrix(a: &DenseMatrix, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    if is_csv(path) {
        write_csv(a, file)
    } else {
        write_matrix_market(a, file)
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}
