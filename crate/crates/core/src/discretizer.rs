//! Two-bin equal-width discretization into LOW / HIGH.
//!
//! Bins are half open: `[min, cut)` is LOW and `[cut, ..)` is HIGH, with
//! `cut = (min + max) / 2` fitted on one dataset. Values outside the fitted
//! range are not clipped. An attribute that is constant on the fitting data is
//! degenerate and maps every value to LOW.

use serde::{Deserialize, Serialize};

use crate::dataset::{Attribute, DatasetError, FeatureDataset, Instance, Level, Representation, Value};
use crate::num::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttributeCut<F> {
    pub min: F,
    pub max: F,
    pub cutpoint: F,
    pub degenerate: bool,
}

impl<F: Scalar> AttributeCut<F> {
    pub fn from_range(min: F, max: F) -> Self {
        let cutpoint = min + (max - min) / F::lit(2.0);
        AttributeCut { min, max, cutpoint, degenerate: min == max }
    }

    pub fn label(&self, value: F) -> Level {
        if self.degenerate || value < self.cutpoint {
            Level::Low
        } else {
            Level::High
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutpointModel<F> {
    pub attributes: Vec<Attribute>,
    pub cuts: Vec<AttributeCut<F>>,
}

pub fn fit_cutpoints<F: Scalar>(dataset: &FeatureDataset<F>) -> Result<CutpointModel<F>, DatasetError> {
    if dataset.representation != Representation::Numeric {
        return Err(DatasetError::SchemaMismatch("cutpoints are fitted on numeric data".into()));
    }
    if dataset.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    let cuts = (0..dataset.attributes.len())
        .map(|i| {
            let column = dataset.numeric_column(i).expect("numeric dataset");
            let (min, max) = column
                .iter()
                .fold((F::infinity(), F::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            let cut = AttributeCut::from_range(min, max);
            if cut.degenerate {
                log::warn!(
                    "{}: attribute `{}` is constant ({min}); all values map to LOW",
                    dataset.course_code,
                    dataset.attributes[i].key
                );
            }
            cut
        })
        .collect();
    Ok(CutpointModel { attributes: dataset.attributes.clone(), cuts })
}

pub fn apply_cutpoints<F: Scalar>(
    model: &CutpointModel<F>,
    dataset: &FeatureDataset<F>,
) -> Result<FeatureDataset<F>, DatasetError> {
    let keys_match = model.attributes.len() == dataset.attributes.len()
        && model.attributes.iter().zip(&dataset.attributes).all(|(a, b)| a.key == b.key);
    if !keys_match || dataset.representation != Representation::Numeric {
        return Err(DatasetError::SchemaMismatch(format!(
            "cutpoints for [{}] cannot discretize {} dataset {}",
            model.attributes.iter().map(|a| a.key.as_str()).collect::<Vec<_>>().join(", "),
            dataset.representation,
            dataset.course_code
        )));
    }
    let rows = dataset
        .rows
        .iter()
        .map(|row| Instance {
            student_id: row.student_id.clone(),
            values: row
                .values
                .iter()
                .zip(&model.cuts)
                .map(|(v, cut)| Value::Level(cut.label(v.number().expect("numeric row"))))
                .collect(),
            outcome: row.outcome,
        })
        .collect();
    Ok(FeatureDataset {
        course_code: dataset.course_code.clone(),
        representation: Representation::Discretized,
        attributes: dataset.attributes.clone(),
        rows,
    })
}

impl<F: Scalar> CutpointModel<F> {
    /// Sidecar CSV: `attribute,min,max,cutpoint,degenerate`.
    pub fn write_csv<W: std::io::Write>(&self, sink: W) -> Result<(), DatasetError> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["attribute", "min", "max", "cutpoint", "degenerate"])?;
        for (a, c) in self.attributes.iter().zip(&self.cuts) {
            w.write_record([
                a.key.clone(),
                format!("{:.6}", c.min),
                format!("{:.6}", c.max),
                format!("{:.6}", c.cutpoint),
                c.degenerate.to_string(),
            ])?;
        }
        w.flush().map_err(|e| DatasetError::Csv(e.to_string()))
    }
}
