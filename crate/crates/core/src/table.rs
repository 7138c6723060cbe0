//! Delimiter-separated tables of sampled curves.
//!
//! The layout is shared by spectrum files, filter bank files and adjacency
//! dumps: a header row whose first cell names the key column, then one row per
//! sample. The delimiter (comma or tab) is detected from the header row and
//! lines starting with `#` are comments.

use std::io::{Read, Write};

use thiserror::Error;

/// Header of the key column for curve files.
pub const WAVELENGTH_HEADER: &str = "wavelength_nm";

#[derive(Debug, Error)]
pub enum TableError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed table: {0}")]
    Csv(#[from] csv::Error),
    #[error("table is empty (no header row)")]
    MissingHeader,
    #[error("header must have at least 2 columns, found {0}")]
    TooFewColumns(usize),
    #[error("expected first header `{expected}`, found `{found}`")]
    WrongKeyHeader { expected: String, found: String },
    #[error("column-count mismatch at row {row}: expected {expected} cells, found {found}")]
    ColumnCount {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("malformed numeric cell `{cell}` at row {row}, column {column}")]
    Numeric {
        row: usize,
        column: usize,
        cell: String,
    },
    #[error("table has no data rows")]
    NoRows,
}

/// Field delimiter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delimiter {
    Comma,
    Tab,
}

impl Delimiter {
    fn byte(self) -> u8 {
        match self {
            Delimiter::Comma => b',',
            Delimiter::Tab => b'\t',
        }
    }
}

/// A parsed numeric table. `columns[c][r]` is data column `c` (excluding the
/// key column) at data row `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub key_header: String,
    pub headers: Vec<String>,
    pub keys: Vec<f64>,
    pub columns: Vec<Vec<f64>>,
}

fn detect_delimiter(text: &str) -> Delimiter {
    let header = text
        .lines()
        .find(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .unwrap_or("");
    if header.contains('\t') {
        Delimiter::Tab
    } else {
        Delimiter::Comma
    }
}

impl Table {
    /// Parses a table. Row numbers in errors count data rows from 1; column
    /// numbers count cells from 1 (the key column is column 1).
    pub fn read<R: Read>(mut source: R, key_header: Option<&str>) -> Result<Table, TableError> {
        let mut text = String::new();
        source.read_to_string(&mut text)?;
        let delimiter = detect_delimiter(&text);
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(delimiter.byte())
            .comment(Some(b'#'))
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());

        let mut records = reader.records();
        let header = records.next().ok_or(TableError::MissingHeader)??;
        if header.len() < 2 {
            return Err(TableError::TooFewColumns(header.len()));
        }
        let found_key = header.get(0).unwrap_or_default().to_string();
        if let Some(expected) = key_header {
            if found_key != expected {
                return Err(TableError::WrongKeyHeader {
                    expected: expected.to_string(),
                    found: found_key,
                });
            }
        }
        let headers: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let width = header.len();

        let mut keys = Vec::new();
        let mut columns = vec![Vec::new(); headers.len()];
        for (idx, record) in records.enumerate() {
            let record = record?;
            let row = idx + 1;
            if record.len() != width {
                return Err(TableError::ColumnCount {
                    row,
                    expected: width,
                    found: record.len(),
                });
            }
            for (c, cell) in record.iter().enumerate() {
                let value: f64 = cell.parse().map_err(|_| TableError::Numeric {
                    row,
                    column: c + 1,
                    cell: cell.to_string(),
                })?;
                if c == 0 {
                    keys.push(value);
                } else {
                    columns[c - 1].push(value);
                }
            }
        }
        if keys.is_empty() {
            return Err(TableError::NoRows);
        }
        Ok(Table {
            key_header: found_key,
            headers,
            keys,
            columns,
        })
    }

    pub fn write<W: Write>(&self, sink: W, delimiter: Delimiter) -> Result<(), TableError> {
        let mut writer = csv::WriterBuilder::new()
            .delimiter(delimiter.byte())
            .from_writer(sink);
        let mut header = Vec::with_capacity(self.headers.len() + 1);
        header.push(self.key_header.clone());
        header.extend(self.headers.iter().cloned());
        writer.write_record(&header)?;
        for (r, key) in self.keys.iter().enumerate() {
            let mut row = Vec::with_capacity(header.len());
            row.push(format_number(*key));
            row.extend(self.columns.iter().map(|col| format_number(col[r])));
            writer.write_record(&row)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn to_string(&self, delimiter: Delimiter) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf, delimiter)
            .expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("table output is UTF-8")
    }
}

/// Shortest representation that parses back to the same `f64`.
pub(crate) fn format_number(v: f64) -> String {
    format!("{v}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detects_tab_and_comma() {
        let csv = "wavelength_nm,a\n400,1\n";
        let tsv = "# comment, with comma\nwavelength_nm\ta\n400\t1\n";
        assert_eq!(Table::read(csv.as_bytes(), None).unwrap().headers, ["a"]);
        let t = Table::read(tsv.as_bytes(), None).unwrap();
        assert_eq!(t.headers, ["a"]);
        assert_eq!(t.columns[0], [1.0]);
    }

    #[test]
    fn reports_position_of_bad_cell() {
        let text = "wavelength_nm,a,b\n400,1,2\n401,1,x\n";
        match Table::read(text.as_bytes(), None) {
            Err(TableError::Numeric { row, column, .. }) => assert_eq!((row, column), (2, 3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn reports_column_count_mismatch() {
        let text = "wavelength_nm,a,b\n400,1,2\n401,1\n";
        assert!(matches!(
            Table::read(text.as_bytes(), None),
            Err(TableError::ColumnCount {
                row: 2,
                expected: 3,
                found: 2
            })
        ));
    }

    #[test]
    fn rejects_wrong_key_header() {
        let text = "lambda,a\n400,1\n";
        assert!(matches!(
            Table::read(text.as_bytes(), Some(WAVELENGTH_HEADER)),
            Err(TableError::WrongKeyHeader { .. })
        ));
    }

    #[test]
    fn write_then_read_is_lossless() {
        let t = Table {
            key_header: WAVELENGTH_HEADER.into(),
            headers: vec!["x".into(), "y".into()],
            keys: vec![400.0, 400.5],
            columns: vec![vec![0.1, 1.0 / 3.0], vec![2e-17, 5.0]],
        };
        for d in [Delimiter::Comma, Delimiter::Tab] {
            let text = t.to_string(d);
            assert_eq!(Table::read(text.as_bytes(), None).unwrap(), t);
        }
    }
}
