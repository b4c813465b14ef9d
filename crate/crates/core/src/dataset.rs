//! Per-student feature tables, in numeric or two-label form, and their CSV files.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Fail,
    Pass,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Fail => "Fail",
            Outcome::Pass => "Pass",
        }
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pass" => Ok(Outcome::Pass),
            "fail" => Ok(Outcome::Fail),
            other => Err(format!("unknown outcome `{other}`")),
        }
    }
}

/// Two-bin discretized value. `Low < High`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    Low,
    High,
}

impl Level {
    pub const ALL: [Level; 2] = [Level::Low, Level::High];

    pub fn as_str(self) -> &'static str {
        match self {
            Level::Low => "LOW",
            Level::High => "HIGH",
        }
    }
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "LOW" => Ok(Level::Low),
            "HIGH" => Ok(Level::High),
            other => Err(format!("unknown level `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Representation {
    Numeric,
    Discretized,
}

impl Representation {
    pub fn as_str(self) -> &'static str {
        match self {
            Representation::Numeric => "numeric",
            Representation::Discretized => "discretized",
        }
    }
}

impl std::fmt::Display for Representation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Representation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "numeric" => Ok(Representation::Numeric),
            "discretized" => Ok(Representation::Discretized),
            other => Err(format!("unknown representation `{other}`")),
        }
    }
}

/// A dataset column: `key` is the CSV header, `label` is used in tree renderings.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Attribute {
    pub key: String,
    pub label: String,
}

impl Attribute {
    pub fn new(key: impl Into<String>, label: impl Into<String>) -> Self {
        Attribute { key: key.into(), label: label.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Value<F> {
    Number(F),
    Level(Level),
}

impl<F: Scalar> Value<F> {
    pub fn representation(&self) -> Representation {
        match self {
            Value::Number(_) => Representation::Numeric,
            Value::Level(_) => Representation::Discretized,
        }
    }

    pub fn number(&self) -> Option<F> {
        match *self {
            Value::Number(v) => Some(v),
            Value::Level(_) => None,
        }
    }

    pub fn level(&self) -> Option<Level> {
        match *self {
            Value::Level(l) => Some(l),
            Value::Number(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance<F> {
    pub student_id: String,
    pub values: Vec<Value<F>>,
    pub outcome: Outcome,
}

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("csv: {0}")]
    Csv(String),
}

impl From<csv::Error> for DatasetError {
    fn from(e: csv::Error) -> Self {
        DatasetError::Csv(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDataset<F> {
    pub course_code: String,
    pub representation: Representation,
    pub attributes: Vec<Attribute>,
    pub rows: Vec<Instance<F>>,
}

impl<F: Scalar> FeatureDataset<F> {
    /// Checks that every row has one value per attribute, all of the dataset's representation.
    pub fn new(
        course_code: impl Into<String>,
        representation: Representation,
        attributes: Vec<Attribute>,
        rows: Vec<Instance<F>>,
    ) -> Result<Self, DatasetError> {
        let ds = FeatureDataset { course_code: course_code.into(), representation, attributes, rows };
        for row in &ds.rows {
            ds.check_row(&row.values)?;
        }
        Ok(ds)
    }

    pub fn check_row(&self, values: &[Value<F>]) -> Result<(), DatasetError> {
        if values.len() != self.attributes.len() {
            return Err(DatasetError::SchemaMismatch(format!(
                "row has {} values, dataset has {} attributes",
                values.len(),
                self.attributes.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| v.representation() != self.representation) {
            return Err(DatasetError::SchemaMismatch(format!(
                "{} value in a {} dataset",
                v.representation(),
                self.representation
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `(pass, fail)` row counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let pass = self.rows.iter().filter(|r| r.outcome == Outcome::Pass).count();
        (pass, self.rows.len() - pass)
    }

    pub fn same_schema(&self, other: &FeatureDataset<F>) -> bool {
        self.representation == other.representation
            && self.attributes.len() == other.attributes.len()
            && self.attributes.iter().zip(&other.attributes).all(|(a, b)| a.key == b.key)
    }

    /// Column of numeric values; `None` for discretized datasets.
    pub fn numeric_column(&self, attribute: usize) -> Option<Vec<F>> {
        self.rows.iter().map(|r| r.values[attribute].number()).collect()
    }

    /// Numeric values are printed with 6 decimals.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), DatasetError> {
        let mut w = csv::Writer::from_writer(sink);
        let mut header = vec!["student_id".to_string()];
        header.extend(self.attributes.iter().map(|a| a.key.clone()));
        header.push("outcome".into());
        w.write_record(&header)?;
        for row in &self.rows {
            let mut record = Vec::with_capacity(header.len());
            record.push(row.student_id.clone());
            record.extend(row.values.iter().map(|v| match v {
                Value::Number(x) => format!("{x:.6}"),
                Value::Level(l) => l.to_string(),
            }));
            record.push(row.outcome.to_string());
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| DatasetError::Csv(e.to_string()))
    }

    /// Reads a dataset file. The representation is inferred from the first
    /// data row; `label_for` maps a header key to its rendering label.
    pub fn read_csv<R: Read>(
        source: R,
        course_code: &str,
        label_for: impl Fn(&str) -> String,
    ) -> Result<Self, DatasetError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
        let headers = rdr.headers()?.clone();
        let n = headers.len();
        if n < 3 || &headers[0] != "student_id" || &headers[n - 1] != "outcome" {
            return Err(DatasetError::SchemaMismatch(
                "header must be student_id,<attributes...>,outcome".into(),
            ));
        }
        let attributes: Vec<Attribute> =
            headers.iter().skip(1).take(n - 2).map(|k| Attribute::new(k, label_for(k))).collect();

        let mut representation = None;
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let malformed = |reason: String| DatasetError::MalformedRow { line, reason };
            if record.len() != n {
                return Err(malformed(format!("expected {n} fields, found {}", record.len())));
            }
            let repr = *representation.get_or_insert_with(|| {
                if record[1].parse::<Level>().is_ok() {
                    Representation::Discretized
                } else {
                    Representation::Numeric
                }
            });
            let values = (1..n - 1)
                .map(|i| match repr {
                    Representation::Numeric => record[i]
                        .parse::<F>()
                        .map(Value::Number)
                        .map_err(|_| malformed(format!("`{}` is not a number", &record[i]))),
                    Representation::Discretized => {
                        record[i].parse::<Level>().map(Value::Level).map_err(malformed)
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            let outcome = record[n - 1].parse().map_err(malformed)?;
            rows.push(Instance { student_id: record[0].to_string(), values, outcome });
        }
        let representation = representation.ok_or(DatasetError::EmptyDataset)?;
        FeatureDataset::new(course_code, representation, attributes, rows)
    }
}
