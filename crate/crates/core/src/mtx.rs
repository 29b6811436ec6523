//! Matrix Market coordinate files and one-value-per-line vectors.

use std::io::{BufRead, Write};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Real,
    Integer,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Reads a `coordinate` matrix (real or integer field; general or
/// symmetric storage). Indices are 1-based in the file.
pub fn read_matrix<R: BufRead>(reader: R) -> Result<SparseMatrix> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let header = header?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(1, "expected '%%MatrixMarket matrix ...' header"));
    }
    if tokens[2] != "coordinate" {
        return Err(parse_err(1, format!("unsupported format '{}'", tokens[2])));
    }
    if tokens[3] != "real" && tokens[3] != "integer" {
        return Err(parse_err(1, format!("unsupported field '{}'", tokens[3])));
    }
    let symmetric = match tokens[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(parse_err(1, format!("unsupported symmetry '{other}'"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        let lineno = idx + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = t.split_whitespace().collect();
        match size {
            None => {
                if parts.len() != 3 {
                    return Err(parse_err(lineno, "size line needs 'rows cols nnz'"));
                }
                let p = |s: &str| s.parse::<usize>().map_err(|_| parse_err(lineno, format!("bad count '{s}'")));
                size = Some((p(parts[0])?, p(parts[1])?, p(parts[2])?));
            }
            Some((m, n, _)) => {
                if parts.len() != 3 {
                    return Err(parse_err(lineno, "entry needs 'row col value'"));
                }
                let i: usize = parts[0].parse().map_err(|_| parse_err(lineno, "bad row index"))?;
                let j: usize = parts[1].parse().map_err(|_| parse_err(lineno, "bad column index"))?;
                let v: f64 = parts[2].parse().map_err(|_| parse_err(lineno, "bad value"))?;
                if i == 0 || j == 0 || i > m || j > n {
                    return Err(parse_err(lineno, format!("index ({i}, {j}) outside {m}x{n}")));
                }
                triplets.push((i - 1, j - 1, v));
                if symmetric && i != j {
                    triplets.push((j - 1, i - 1, v));
                }
            }
        }
    }
    let (m, n, declared) = size.ok_or_else(|| parse_err(1, "missing size line"))?;
    let stored = if symmetric { triplets.iter().filter(|t| t.0 <= t.1).count() } else { triplets.len() };
    if stored != declared {
        return Err(parse_err(0, format!("header declares {declared} entries, found {stored}")));
    }
    SparseMatrix::from_triplets(m, n, triplets)
}

/// Writes a general coordinate matrix. Reals carry 17 significant digits;
/// the integer field writes the exact decimal value of each entry.
pub fn write_matrix<W: Write>(mut w: W, a: &SparseMatrix, field: Field) -> Result<()> {
    let tag = match field {
        Field::Real => "real",
        Field::Integer => "integer",
    };
    writeln!(w, "%%MatrixMarket matrix coordinate {tag} general")?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for (i, j, v) in a.triplets() {
        match field {
            Field::Real => writeln!(w, "{} {} {}", i + 1, j + 1, fmt_real(v))?,
            Field::Integer => {
                if v.fract() != 0.0 {
                    return Err(Error::NotIntegerMatrix { row: i, col: j, value: v });
                }
                writeln!(w, "{} {} {:.0}", i + 1, j + 1, v)?
            }
        }
    }
    Ok(())
}

/// Decimal with 17 significant digits (round-trips every double).
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn read_vector<R: BufRead>(reader: R) -> Result<DVector<f64>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') || t.starts_with('#') {
            continue;
        }
        let v: f64 = t.parse().map_err(|_| parse_err(idx + 1, format!("bad value '{t}'")))?;
        out.push(v);
    }
    Ok(DVector::from_vec(out))
}

pub fn write_vector<W: Write>(mut w: W, v: &DVector<f64>) -> Result<()> {
    for x in v.iter() {
        writeln!(w, "{}", fmt_real(*x))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let a = SparseMatrix::from_rows(&[vec![1.0, 0.0, -2.5], vec![0.0, 0.1, 0.0]]);
        let mut buf = Vec::new();
        write_matrix(&mut buf, &a, Field::Real).unwrap();
        let b = read_matrix(buf.as_slice()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn symmetric_expands() {
        let text = "%%MatrixMarket matrix coordinate integer symmetric\n% c\n2 2 2\n1 1 4\n2 1 -1\n";
        let a = read_matrix(text.as_bytes()).unwrap();
        assert_eq!(a.get(0, 1), -1.0);
        assert_eq!(a.get(1, 0), -1.0);
    }

    #[test]
    fn rejects_bad_index_and_count() {
        let text = "%%MatrixMarket matrix coordinate real general\n1 1 1\n2 1 1.0\n";
        assert!(matches!(read_matrix(text.as_bytes()), Err(Error::Parse { line: 3, .. })));
        let text = "%%MatrixMarket matrix coordinate real general\n1 1 2\n1 1 1.0\n";
        assert!(read_matrix(text.as_bytes()).is_err());
    }

    #[test]
    fn integer_field_refuses_fractions() {
        let a = SparseMatrix::from_rows(&[vec![0.5]]);
        assert!(write_matrix(Vec::new(), &a, Field::Integer).is_err());
    }

    #[test]
    fn vectors() {
        let v = read_vector("1\n\n# note\n-2.5\n".as_bytes()).unwrap();
        assert_eq!(v.as_slice(), &[1.0, -2.5]);
        let mut buf = Vec::new();
        write_vector(&mut buf, &v).unwrap();
        assert_eq!(read_vector(buf.as_slice()).unwrap(), v);
    }
}
