//! Plain numeric CSV: comma separated, `.` decimal point, an optional single
//! header row detected by a non-numeric first line.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: file contains no data rows")]
    Empty { path: String },
    #[error("{path}:{line}: expected {expected} fields, found {found}")]
    RaggedRow {
        path: String,
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("{path}:{line}: column {column}: cannot parse {value:?} as a number")]
    BadNumber {
        path: String,
        line: usize,
        column: usize,
        value: String,
    },
}

/// Reads an `n x p` matrix. The first line is treated as a header when any
/// of its fields fails to parse as a number; the header is returned.
pub fn read_matrix(path: &Path) -> Result<(DMatrix<f64>, Option<Vec<String>>), CsvError> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| CsvError::Io {
        path: display.clone(),
        source,
    })?;
    parse_matrix(&text, &display)
}

pub fn parse_matrix(
    text: &str,
    path: &str,
) -> Result<(DMatrix<f64>, Option<Vec<String>>), CsvError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .peekable();

    let header = match lines.peek() {
        Some((_, first)) => {
            let fields: Vec<&str> = first.split(',').collect();
            if fields.iter().any(|f| f.trim().parse::<f64>().is_err()) {
                let header: Vec<String> = fields.iter().map(|f| f.trim().to_string()).collect();
                lines.next();
                Some(header)
            } else {
                None
            }
        }
        None => None,
    };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = header.as_ref().map(|h| h.len());
    for (index, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        let expected = *width.get_or_insert(fields.len());
        if fields.len() != expected {
            return Err(CsvError::RaggedRow {
                path: path.to_string(),
                line: index + 1,
                expected,
                found: fields.len(),
            });
        }
        let mut row = Vec::with_capacity(fields.len());
        for (column, field) in fields.iter().enumerate() {
            let value = field.trim().parse::<f64>().ok().filter(|v| v.is_finite());
            let value = value.ok_or_else(|| CsvError::BadNumber {
                path: path.to_string(),
                line: index + 1,
                column: column + 1,
                value: field.trim().to_string(),
            })?;
            row.push(value);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CsvError::Empty {
            path: path.to_string(),
        });
    }
    let n = rows.len();
    let p = rows[0].len();
    Ok((
        DMatrix::from_fn(n, p, |i, j| rows[i][j]),
        header,
    ))
}

/// Serializes a matrix with the shortest round-trip float representation, so
/// equal inputs produce byte-identical files.
pub fn matrix_to_csv(matrix: &DMatrix<f64>, header: Option<&[String]>) -> String {
    let mut out = String::new();
    if let Some(header) = header {
        out.push_str(&header.join(","));
        out.push('\n');
    }
    for i in 0..matrix.nrows() {
        for j in 0..matrix.ncols() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", matrix[(i, j)]);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_plain_matrix() {
        let (m, header) = parse_matrix("1,2\n3.5,-4e2\n", "test").unwrap();
        assert_eq!(header, None);
        assert_eq!(m.nrows(), 2);
        assert_eq!(m[(1, 1)], -400.0);
    }

    #[test]
    fn detects_header() {
        let (m, header) = parse_matrix("x,y\n1,2\n", "test").unwrap();
        assert_eq!(header, Some(vec!["x".to_string(), "y".to_string()]));
        assert_eq!(m.nrows(), 1);
    }

    #[test]
    fn reports_bad_cell_with_position() {
        let err = parse_matrix("1,2\n3,oops\n", "data.csv").unwrap_err();
        match err {
            CsvError::BadNumber { line, column, .. } => {
                assert_eq!((line, column), (2, 2));
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn rejects_non_finite_cells() {
        assert!(matches!(
            parse_matrix("1,2\n3,nan\n", "t"),
            Err(CsvError::BadNumber { line: 2, column: 2, .. })
        ));
        assert!(matches!(
            parse_matrix("1,inf\n", "t"),
            Err(CsvError::BadNumber { .. })
        ));
    }

    #[test]
    fn rejects_ragged_rows_and_empty_files() {
        assert!(matches!(
            parse_matrix("1,2\n3\n", "t"),
            Err(CsvError::RaggedRow { .. })
        ));
        assert!(matches!(parse_matrix("", "t"), Err(CsvError::Empty { .. })));
        assert!(matches!(
            parse_matrix("x,y\n", "t"),
            Err(CsvError::Empty { .. })
        ));
    }

    #[test]
    fn round_trips_exactly() {
        let m = DMatrix::from_row_slice(2, 2, &[0.1, -3.25e-7, 2.0, 1.0 / 3.0]);
        let text = matrix_to_csv(&m, None);
        let (back, _) = parse_matrix(&text, "t").unwrap();
        assert_eq!(m, back);
        assert_eq!(text, matrix_to_csv(&back, None));
    }
}
