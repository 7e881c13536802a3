//! Tagged result columns and their CSV form.
//!
//! ```text
//! # key=value; key=value; ...
//! col_a,col_b,...
//! 1.0000000000000000e0,az30_el15,...
//! ```
//!
//! Reals are written with 17 significant digits so they read back to the
//! same `f64`; integers have no exponent, which is how the reader tells
//! them apart.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed table: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Real(f64),
    Int(i64),
    Text(String),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Real(x) => Some(*x),
            Value::Int(i) => Some(*i as f64),
            Value::Text(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    fn parse(field: &str) -> Value {
        if let Ok(i) = field.parse::<i64>() {
            return Value::Int(i);
        }
        match field.parse::<f64>() {
            Ok(x) => Value::Real(x),
            Err(_) => Value::Text(field.to_string()),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Real(x) => write!(f, "{x:.16e}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Real(x)
    }
}

impl From<usize> for Value {
    fn from(i: usize) -> Self {
        Value::Int(i as i64)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    metadata: Vec<(String, String)>,
    columns: Vec<String>,
    rows: Vec<Vec<Value>>,
}

fn clean_meta(s: &str) -> String {
    s.replace(['\n', '\r'], " ").replace(';', ",")
}

impl ResultTable {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        ResultTable {
            metadata: Vec::new(),
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    /// Adds a metadata entry. `;` and newlines in either part are replaced
    /// because they delimit entries; `=` may not appear in the key.
    pub fn set_meta(&mut self, key: &str, value: impl fmt::Display) {
        assert!(!key.contains('='), "metadata key contains '='");
        let key = clean_meta(key).trim().to_string();
        let value = clean_meta(&value.to_string()).trim().to_string();
        match self.metadata.iter_mut().find(|(k, _)| *k == key) {
            Some(entry) => entry.1 = value,
            None => self.metadata.push((key, value)),
        }
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn metadata(&self) -> &[(String, String)] {
        &self.metadata
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    /// # Panics
    /// If the row length does not match the header.
    pub fn push_row(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row length does not match header");
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<impl Iterator<Item = &Value> + '_> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(move |r| &r[i]))
    }

    pub fn column_f64(&self, name: &str) -> Option<Vec<f64>> {
        self.column(name)?.map(Value::as_f64).collect()
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), TableError> {
        let meta: Vec<String> = self.metadata.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let io = |source| TableError::Io {
            path: PathBuf::from("<stream>"),
            source,
        };
        writeln!(out, "# {}", meta.join("; ")).map_err(io)?;
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush().map_err(io)?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("table text is UTF-8")
    }

    pub fn read_from<R: BufRead>(mut input: R) -> Result<Self, TableError> {
        let io = |source| TableError::Io {
            path: PathBuf::from("<stream>"),
            source,
        };
        let mut first = String::new();
        input.read_line(&mut first).map_err(io)?;
        let body = first
            .trim_end_matches(['\n', '\r'])
            .strip_prefix('#')
            .ok_or_else(|| TableError::Format("first line is not a '#' metadata comment".into()))?
            .trim_start();
        let mut metadata = Vec::new();
        for entry in body.split("; ").filter(|e| !e.is_empty()) {
            let (k, v) = entry
                .split_once('=')
                .ok_or_else(|| TableError::Format(format!("metadata entry without '=': {entry}")))?;
            metadata.push((k.to_string(), v.to_string()));
        }

        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let columns: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record?;
            if record.len() != columns.len() {
                return Err(TableError::Format(format!("row has {} fields, header {}", record.len(), columns.len())));
            }
            rows.push(record.iter().map(Value::parse).collect());
        }
        Ok(ResultTable { metadata, columns, rows })
    }
}

pub fn write_results(table: &ResultTable, path: &Path) -> Result<(), TableError> {
    let file = std::fs::File::create(path).map_err(|source| TableError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    table.write_to(std::io::BufWriter::new(file)).map_err(|e| match e {
        TableError::Io { source, .. } => TableError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

pub fn read_results(path: &Path) -> Result<ResultTable, TableError> {
    let file = std::fs::File::open(path).map_err(|source| TableError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ResultTable::read_from(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_formatting_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, f64::MAX, 0.0] {
            let s = Value::Real(x).to_string();
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
            assert!(s.contains('e'));
        }
        assert_eq!(Value::Real(f64::INFINITY).to_string(), "inf");
        assert_eq!(Value::parse("inf"), Value::Real(f64::INFINITY));
    }

    #[test]
    fn metadata_is_sanitized() {
        let mut t = ResultTable::new(["a"]);
        t.set_meta("note", "x; y\nz");
        t.set_meta("note", "second");
        assert_eq!(t.meta("note"), Some("second"));
        t.set_meta("other", "p;q");
        assert_eq!(t.meta("other"), Some("p,q"));
    }

    #[test]
    fn missing_metadata_line_rejected() {
        let err = ResultTable::read_from("a,b\n1,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, TableError::Format(_)));
    }
}
