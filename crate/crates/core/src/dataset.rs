//! Datasets with named features and a scalar target, plus CSV I/O.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset has no rows")]
    Empty,
    #[error("row {row} has {got} values, expected {expected}")]
    RaggedRow { row: usize, got: usize, expected: usize },
    #[error("row count {rows} does not match target count {targets}")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("io error for {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A view of one sample: feature names paired with values.
#[derive(Clone, Copy, Debug)]
pub struct Row<'a> {
    names: &'a [String],
    values: &'a [f64],
}

impl<'a> Row<'a> {
    pub fn new(names: &'a [String], values: &'a [f64]) -> Self {
        Row { names, values }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }

    pub fn values(&self) -> &'a [f64] {
        self.values
    }

    pub fn names(&self) -> &'a [String] {
        self.names
    }
}

/// N_d samples of input vectors plus scalar targets, with named features.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    feature_names: Vec<String>,
    rows: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn new(
        feature_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        targets: Vec<f64>,
    ) -> Result<Self, DatasetError> {
        if rows.len() != targets.len() {
            return Err(DatasetError::LengthMismatch {
                rows: rows.len(),
                targets: targets.len(),
            });
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != feature_names.len() {
                return Err(DatasetError::RaggedRow {
                    row: i,
                    got: row.len(),
                    expected: feature_names.len(),
                });
            }
        }
        Ok(Dataset {
            feature_names,
            rows,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn row(&self, i: usize) -> Row<'_> {
        Row::new(&self.feature_names, &self.rows[i])
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Keeps the first `n` rows.
    pub fn truncated(&self, n: usize) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            rows: self.rows[..n.min(self.rows.len())].to_vec(),
            targets: self.targets[..n.min(self.targets.len())].to_vec(),
        }
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for name in &self.feature_names {
            out.push_str(name);
            out.push(',');
        }
        out.push_str("y\n");
        for (row, y) in self.rows.iter().zip(&self.targets) {
            for v in row {
                let _ = write!(out, "{},", format_float(*v));
            }
            let _ = writeln!(out, "{}", format_float(*y));
        }
        out
    }

    pub fn from_csv_str(text: &str) -> Result<Self, DatasetError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(DatasetError::Empty)?;
        let mut columns: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        if columns.last().map(String::as_str) != Some("y") {
            return Err(DatasetError::Csv {
                line: 1,
                message: "last column must be named `y`".into(),
            });
        }
        columns.pop();
        let n_features = columns.len();
        let mut rows = Vec::new();
        let mut targets = Vec::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut values = Vec::with_capacity(n_features + 1);
            for field in line.split(',') {
                let v: f64 = field.trim().parse().map_err(|_| DatasetError::Csv {
                    line: idx + 1,
                    message: format!("cannot parse `{}` as a number", field.trim()),
                })?;
                values.push(v);
            }
            if values.len() != n_features + 1 {
                return Err(DatasetError::Csv {
                    line: idx + 1,
                    message: format!("expected {} fields, got {}", n_features + 1, values.len()),
                });
            }
            targets.push(values.pop().unwrap());
            rows.push(values);
        }
        Dataset::new(columns, rows, targets)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), DatasetError> {
        fs::write(path.as_ref(), self.to_csv_string()).map_err(|source| DatasetError::Io {
            path: path.as_ref().display().to_string(),
            source,
        })
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let text = fs::read_to_string(path.as_ref()).map_err(|source| DatasetError::Io {
            path: path.as_ref().display().to_string(),
            source,
        })?;
        Self::from_csv_str(&text)
    }
}

/// 17 significant digits: enough to round-trip any f64 exactly.
pub fn format_float(v: f64) -> String {
    format!("{:.16e}", v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let data = Dataset::new(
            vec!["x1".into(), "x2".into()],
            vec![vec![0.1, -2.0], vec![1.0 / 3.0, 1e-12]],
            vec![2.5, std::f64::consts::PI],
        )
        .unwrap();
        let text = data.to_csv_string();
        let back = Dataset::from_csv_str(&text).unwrap();
        assert_eq!(data, back);
    }

    #[test]
    fn ragged_rows_rejected() {
        let err = Dataset::new(vec!["a".into()], vec![vec![1.0, 2.0]], vec![0.0]);
        assert!(matches!(err, Err(DatasetError::RaggedRow { .. })));
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let err = Dataset::from_csv_str("x,y\n1.0,2.0\noops,3.0\n").unwrap_err();
        match err {
            DatasetError::Csv { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
