//! Matrix Market reader and writer (real, general; coordinate and array).
//!
//! Sparse matrices are written in coordinate format and dense ones in array
//! format. Vectors use the `n x 1` array format. Values are written with 17
//! significant digits so a write/read round trip is exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::matrix::RowMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

struct Header {
    layout: Layout,
    symmetry: Symmetry,
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_header(path: &Path, line: &str) -> Result<Header> {
    let toks: Vec<String> = line.split_whitespace().map(str::to_ascii_lowercase).collect();
    if toks.len() != 5 || toks[0] != "%%matrixmarket" || toks[1] != "matrix" {
        return Err(parse_err(path, 1, "expected '%%MatrixMarket matrix <format> <field> <symmetry>'"));
    }
    let layout = match toks[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(parse_err(path, 1, format!("unsupported format '{other}'"))),
    };
    match toks[3].as_str() {
        "real" | "double" | "integer" => {}
        other => return Err(parse_err(path, 1, format!("unsupported field '{other}'"))),
    }
    let symmetry = match toks[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(parse_err(path, 1, format!("unsupported symmetry '{other}'"))),
    };
    Ok(Header { layout, symmetry })
}

/// Non-comment data lines with their 1-based line numbers.
fn data_lines(path: &Path, reader: impl BufRead) -> Result<(Header, Vec<(usize, String)>)> {
    let mut lines = reader.lines();
    let first = match lines.next() {
        Some(l) => l.map_err(io_err(path))?,
        None => return Err(parse_err(path, 1, "empty file")),
    };
    let header = parse_header(path, &first)?;
    let mut out = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line.map_err(io_err(path))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        out.push((k + 2, t.to_string()));
    }
    Ok((header, out))
}

fn parse_num<T: std::str::FromStr>(path: &Path, line: usize, tok: Option<&str>, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(path, line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(path, line, format!("cannot parse {what} from '{tok}'")))
}

/// Parses a matrix from any reader; `path` only labels error messages.
pub fn parse_matrix(path: &Path, reader: impl BufRead) -> Result<RowMatrix<f64>> {
    let (header, lines) = data_lines(path, reader)?;
    let mut it = lines.into_iter();
    let (size_line, size) = it
        .next()
        .ok_or_else(|| parse_err(path, 2, "missing size line"))?;
    let mut toks = size.split_whitespace();
    let m: usize = parse_num(path, size_line, toks.next(), "row count")?;
    let n: usize = parse_num(path, size_line, toks.next(), "column count")?;
    if header.symmetry == Symmetry::Symmetric && m != n {
        return Err(parse_err(path, size_line, "symmetric matrix must be square"));
    }
    match header.layout {
        Layout::Coordinate => {
            let nnz: usize = parse_num(path, size_line, toks.next(), "entry count")?;
            let mut triplets = Vec::with_capacity(nnz);
            let mut seen = 0usize;
            for (ln, l) in it {
                seen += 1;
                if seen > nnz {
                    return Err(parse_err(path, ln, format!("more than the declared {nnz} entries")));
                }
                let mut t = l.split_whitespace();
                let i: usize = parse_num(path, ln, t.next(), "row index")?;
                let j: usize = parse_num(path, ln, t.next(), "column index")?;
                let v: f64 = parse_num(path, ln, t.next(), "value")?;
                if i == 0 || i > m || j == 0 || j > n {
                    return Err(parse_err(path, ln, format!("index ({i}, {j}) outside {m}x{n}")));
                }
                triplets.push((i - 1, j - 1, v));
                if header.symmetry == Symmetry::Symmetric && i != j {
                    triplets.push((j - 1, i - 1, v));
                }
            }
            if seen != nnz {
                return Err(parse_err(
                    path,
                    size_line,
                    format!("declared {nnz} entries but found {seen}"),
                ));
            }
            RowMatrix::from_triplets(m, n, &triplets)
        }
        Layout::Array => {
            let mut vals = Vec::with_capacity(m * n);
            for (ln, l) in it {
                for tok in l.split_whitespace() {
                    vals.push(parse_num::<f64>(path, ln, Some(tok), "value")?);
                }
            }
            let mut entries = vec![0.0; m * n];
            match header.symmetry {
                Symmetry::General => {
                    if vals.len() != m * n {
                        return Err(parse_err(
                            path,
                            size_line,
                            format!("expected {} values, found {}", m * n, vals.len()),
                        ));
                    }
                    // Column-major on disk.
                    for (k, v) in vals.into_iter().enumerate() {
                        let (i, j) = (k % m, k / m);
                        entries[i * n + j] = v;
                    }
                }
                Symmetry::Symmetric => {
                    let want = n * (n + 1) / 2;
                    if vals.len() != want {
                        return Err(parse_err(
                            path,
                            size_line,
                            format!("expected {want} values, found {}", vals.len()),
                        ));
                    }
                    let mut k = 0;
                    for j in 0..n {
                        for i in j..n {
                            entries[i * n + j] = vals[k];
                            entries[j * n + i] = vals[k];
                            k += 1;
                        }
                    }
                }
            }
            RowMatrix::from_row_major(m, n, entries)
        }
    }
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<RowMatrix<f64>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    parse_matrix(path, BufReader::new(file))
}

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_matrix_market(path: impl AsRef<Path>, a: &RowMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    write_matrix(&mut w, a).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn write_matrix(w: &mut impl Write, a: &RowMatrix<f64>) -> std::io::Result<()> {
    let (m, n) = (a.nrows(), a.ncols());
    if a.is_sparse() {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{m} {n} {}", a.nnz())?;
        for i in 0..m {
            for (j, v) in a.row(i).entries() {
                writeln!(w, "{} {} {}", i + 1, j + 1, fmt_f64(v))?;
            }
        }
    } else {
        writeln!(w, "%%MatrixMarket matrix array real general")?;
        writeln!(w, "{m} {n}")?;
        for j in 0..n {
            for i in 0..m {
                writeln!(w, "{}", fmt_f64(a.get(i, j)))?;
            }
        }
    }
    Ok(())
}

pub fn write_vector(path: impl AsRef<Path>, v: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let res: std::io::Result<()> = (|| {
        writeln!(w, "%%MatrixMarket matrix array real general")?;
        writeln!(w, "{} 1", v.len())?;
        for &x in v {
            writeln!(w, "{}", fmt_f64(x))?;
        }
        w.flush()
    })();
    res.map_err(io_err(path))
}

pub fn parse_vector(path: &Path, reader: impl BufRead) -> Result<Vec<f64>> {
    let (header, lines) = data_lines(path, reader)?;
    if header.layout != Layout::Array || header.symmetry != Symmetry::General {
        return Err(parse_err(path, 1, "vectors must use the general array format"));
    }
    let mut it = lines.into_iter();
    let (size_line, size) = it
        .next()
        .ok_or_else(|| parse_err(path, 2, "missing size line"))?;
    let mut toks = size.split_whitespace();
    let len: usize = parse_num(path, size_line, toks.next(), "length")?;
    let cols: usize = parse_num(path, size_line, toks.next(), "column count")?;
    if cols != 1 {
        return Err(parse_err(path, size_line, format!("vector must have 1 column, got {cols}")));
    }
    let mut out = Vec::with_capacity(len);
    for (ln, l) in it {
        for tok in l.split_whitespace() {
            out.push(parse_num::<f64>(path, ln, Some(tok), "value")?);
        }
    }
    if out.len() != len {
        return Err(parse_err(
            path,
            size_line,
            format!("expected {len} values, found {}", out.len()),
        ));
    }
    Ok(out)
}

pub fn read_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    parse_vector(path, BufReader::new(file))
}

/// Placeholder path used when parsing from memory.
pub fn inline_path() -> PathBuf {
    PathBuf::from("<inline>")
}
