//! Matrix Market reader restricted to `general` symmetry.

use std::collections::HashSet;
use std::io::BufRead;
use std::path::Path;

use crate::densela::DenseMatrix;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Real,
    Integer,
    Complex,
}

/// Matrix data exactly as stored in the file, 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketMatrix {
    pub rows: usize,
    pub cols: usize,
    /// `(row, col, value)`; array files list every entry column by column.
    pub entries: Vec<(usize, usize, C64)>,
}

impl MarketMatrix {
    pub fn to_dense(&self) -> DenseMatrix {
        let mut a = DenseMatrix::zeros(self.rows, self.cols);
        for &(i, j, v) in &self.entries {
            a[(i, j)] = v;
        }
        a
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_value(tokens: &[&str], field: Field, line: usize) -> Result<C64> {
    let num = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| parse_err(line, format!("bad number {s:?}")))
    };
    match (field, tokens) {
        (Field::Real | Field::Integer, [re]) => Ok(C64::new(num(re)?, 0.0)),
        (Field::Complex, [re, im]) => Ok(C64::new(num(re)?, num(im)?)),
        _ => Err(parse_err(line, format!("expected {} value token(s)", if field == Field::Complex { 2 } else { 1 }))),
    }
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<MarketMatrix> {
    let file = std::fs::File::open(path.as_ref())?;
    parse_matrix_market(std::io::BufReader::new(file))
}

pub fn parse_matrix_market(reader: impl BufRead) -> Result<MarketMatrix> {
    let mut lines = reader.lines().enumerate().map(|(k, l)| (k + 1, l));

    let (_, banner) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let banner = banner?;
    let words: Vec<String> = banner.split_whitespace().map(|w| w.to_ascii_lowercase()).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(parse_err(1, format!("bad banner {banner:?}")));
    }
    let coordinate = match words[2].as_str() {
        "coordinate" => true,
        "array" => false,
        other => return Err(parse_err(1, format!("unknown format {other:?}"))),
    };
    let field = match words[3].as_str() {
        "real" | "double" => Field::Real,
        "integer" => Field::Integer,
        "complex" => Field::Complex,
        other => return Err(Error::Unsupported(format!("Matrix Market field {other:?}"))),
    };
    if words[4] != "general" {
        return Err(Error::Unsupported(format!("Matrix Market symmetry {:?}", words[4])));
    }

    // skip comments and blank lines
    let mut body = lines.filter_map(|(k, l)| match l {
        Ok(s) if s.trim().is_empty() || s.trim_start().starts_with('%') => None,
        other => Some((k, other)),
    });

    let (size_line, size) = body.next().ok_or_else(|| parse_err(2, "missing size line"))?;
    let size = size?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| parse_err(size_line, format!("bad size token {t:?}"))))
        .collect::<Result<_>>()?;

    let mut entries = Vec::new();
    if coordinate {
        let [rows, cols, nnz] = dims[..] else {
            return Err(parse_err(size_line, "coordinate size line needs rows cols nnz"));
        };
        let mut seen = HashSet::with_capacity(nnz);
        for (line, text) in body.by_ref() {
            let text = text?;
            let tokens: Vec<&str> = text.split_whitespace().collect();
            if tokens.len() < 2 {
                return Err(parse_err(line, "expected row and column indices"));
            }
            let idx = |s: &str| -> Result<usize> {
                s.parse::<usize>().map_err(|_| parse_err(line, format!("bad index {s:?}")))
            };
            let (i, j) = (idx(tokens[0])?, idx(tokens[1])?);
            if i == 0 || j == 0 || i > rows || j > cols {
                return Err(parse_err(line, format!("index ({i}, {j}) out of bounds for {rows}x{cols}")));
            }
            if !seen.insert((i, j)) {
                return Err(parse_err(line, format!("duplicate entry ({i}, {j})")));
            }
            let v = parse_value(&tokens[2..], field, line)?;
            entries.push((i - 1, j - 1, v));
        }
        if entries.len() != nnz {
            return Err(parse_err(size_line, format!("declared {nnz} entries, found {}", entries.len())));
        }
        Ok(MarketMatrix { rows, cols, entries })
    } else {
        let [rows, cols] = dims[..] else {
            return Err(parse_err(size_line, "array size line needs rows cols"));
        };
        for (k, (line, text)) in body.enumerate() {
            if k >= rows * cols {
                return Err(parse_err(line, "more values than rows*cols"));
            }
            let text = text?;
            let tokens: Vec<&str> = text.split_whitespace().collect();
            let v = parse_value(&tokens, field, line)?;
            entries.push((k % rows, k / rows, v));
        }
        if entries.len() != rows * cols {
            return Err(parse_err(size_line, format!("expected {} values, found {}", rows * cols, entries.len())));
        }
        Ok(MarketMatrix { rows, cols, entries })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<MarketMatrix> {
        parse_matrix_market(s.as_bytes())
    }

    #[test]
    fn single_entry_coordinate() {
        let m = parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 3.5\n").unwrap();
        assert_eq!((m.rows, m.cols), (2, 2));
        assert_eq!(m.entries, vec![(0, 0, C64::new(3.5, 0.0))]);
    }

    #[test]
    fn array_is_column_major() {
        let m = parse("%%MatrixMarket matrix array real general\n% comment\n2 2\n1\n2\n3\n4\n").unwrap();
        let a = m.to_dense();
        assert_eq!(a[(0, 0)].re, 1.0);
        assert_eq!(a[(1, 0)].re, 2.0);
        assert_eq!(a[(0, 1)].re, 3.0);
        assert_eq!(a[(1, 1)].re, 4.0);
    }

    #[test]
    fn complex_and_integer_fields() {
        let m = parse("%%MatrixMarket matrix coordinate complex general\n2 2 2\n1 2 1.0 -2.0\n2 1 0 1e-3\n").unwrap();
        assert_eq!(m.entries[0], (0, 1, C64::new(1.0, -2.0)));
        assert_eq!(m.entries[1], (1, 0, C64::new(0.0, 1e-3)));
        let m = parse("%%MatrixMarket matrix coordinate integer general\n1 1 1\n1 1 7\n").unwrap();
        assert_eq!(m.entries[0].2, C64::new(7.0, 0.0));
    }

    #[test]
    fn rejects_bad_files() {
        let sym = parse("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 1 1\n");
        assert!(matches!(sym, Err(Error::Unsupported(_))));
        let pat = parse("%%MatrixMarket matrix coordinate pattern general\n2 2 1\n1 1\n");
        assert!(matches!(pat, Err(Error::Unsupported(_))));
        let dup = parse("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n1 1 2\n");
        assert!(matches!(dup, Err(Error::Parse { line: 4, .. })));
        let oob = parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n");
        assert!(matches!(oob, Err(Error::Parse { .. })));
        let short = parse("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n");
        assert!(matches!(short, Err(Error::Parse { .. })));
        assert!(parse("hello\n").is_err());
    }
}
