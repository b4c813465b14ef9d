//! Markdown and CSV emission of transfer reports.
//!
//! The Markdown document puts the AUC table above the loss table; inside each
//! table the numeric block is on the left and the discretized block on the
//! right. Values carry 3 decimals; undefined cells print `n/a` and loss
//! diagonals print `-`.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use crate::dataset::Representation;
use crate::num::Scalar;
use crate::transfer_eval::{GroupEvaluation, TransferReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReportOptions {
    /// Print `0,717` instead of `0.717`.
    pub comma_decimal: bool,
    pub markdown: bool,
    pub csv: bool,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions { comma_decimal: false, markdown: true, csv: true }
    }
}

pub const UNDEFINED: &str = "n/a";

pub fn format_value<F: Scalar>(value: Option<F>, options: ReportOptions) -> String {
    match value {
        None => UNDEFINED.to_string(),
        Some(v) => {
            let s = format!("{v:.3}");
            if options.comma_decimal {
                s.replace('.', ",")
            } else {
                s
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Auc,
    Loss,
}

/// `(cells, row averages, grand mean)` of one block.
fn parts<F: Scalar>(block: &GroupEvaluation<F>, kind: Kind) -> (&[Vec<Option<F>>], &[Option<F>], Option<F>) {
    match kind {
        Kind::Auc => (&block.auc.cells, &block.auc.row_averages, block.auc.grand_mean),
        Kind::Loss => (&block.loss.cells, &block.loss.row_averages, block.loss.grand_mean),
    }
}

fn row_cells<F: Scalar>(block: &GroupEvaluation<F>, kind: Kind, i: usize, options: ReportOptions) -> Vec<String> {
    let (cells, averages, _) = parts(block, kind);
    let mut out: Vec<String> = cells[i]
        .iter()
        .enumerate()
        .map(|(j, c)| if kind == Kind::Loss && i == j { "-".to_string() } else { format_value(*c, options) })
        .collect();
    out.push(format_value(averages[i], options));
    out
}

/// One matrix as CSV: a header of course codes plus `avg`, one row per
/// model course, and a closing `avg mean` row holding the grand mean.
pub fn matrix_csv<F: Scalar>(block: &GroupEvaluation<F>, loss: bool, options: ReportOptions) -> String {
    let kind = if loss { Kind::Loss } else { Kind::Auc };
    let courses = &block.auc.courses;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["course".to_string()];
    header.extend(courses.iter().cloned());
    header.push("avg".into());
    w.write_record(&header).expect("write to memory");
    for (i, code) in courses.iter().enumerate() {
        let mut record = vec![code.clone()];
        record.extend(row_cells(block, kind, i, options));
        w.write_record(&record).expect("write to memory");
    }
    let mut last = vec!["avg mean".to_string()];
    last.extend(std::iter::repeat_n(String::new(), courses.len()));
    last.push(format_value(parts(block, kind).2, options));
    w.write_record(&last).expect("write to memory");
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8 input")
}

fn markdown_table<F: Scalar>(out: &mut String, report: &TransferReport<F>, kind: Kind, options: ReportOptions) {
    let title = match kind {
        Kind::Auc => "AUC",
        Kind::Loss => "AUC LOSS",
    };
    let n = report.courses.len();
    let mut header = vec!["Course".to_string()];
    for block in &report.blocks {
        let name = match block.representation {
            Representation::Numeric => "Numerical",
            Representation::Discretized => "Discretized",
        };
        header.extend(report.courses.iter().map(|c| format!("{c} ({name})")));
        header.push(format!("avg ({name})"));
    }
    let _ = writeln!(out, "### {title}\n");
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
    for i in 0..n {
        let mut row = vec![report.courses[i].clone()];
        for block in &report.blocks {
            row.extend(row_cells(block, kind, i, options));
        }
        let _ = writeln!(out, "| {} |", row.join(" | "));
    }
    let mut last = vec!["avg mean".to_string()];
    for block in &report.blocks {
        last.extend(std::iter::repeat_n(String::new(), n));
        last.push(format_value(parts(block, kind).2, options));
    }
    let _ = writeln!(out, "| {} |\n", last.join(" | "));
}

pub fn render_markdown<F: Scalar>(report: &TransferReport<F>, options: ReportOptions) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Transfer report: {} usage group\n", report.level);
    let _ = writeln!(out, "Courses: {}\n", report.courses.join(", "));
    if report.courses.len() < 2 {
        let _ = writeln!(out, "Single-course group: the loss matrix has no cells.\n");
    }
    markdown_table(&mut out, report, Kind::Auc, options);
    markdown_table(&mut out, report, Kind::Loss, options);

    let _ = writeln!(out, "### Notes\n");
    for block in &report.blocks {
        let _ = writeln!(
            out,
            "- {}: {} undefined AUC cell(s), {} undefined loss cell(s) excluded from averages",
            block.representation,
            block.auc.undefined_cells(),
            block.loss.undefined_cells()
        );
        for (code, model) in report.courses.iter().zip(&block.models) {
            if let Err(reason) = model {
                let _ = writeln!(out, "- {}: no {} model for {code}: {reason}", block.representation, block.representation);
            }
        }
    }
    let m = &report.metadata;
    let _ = writeln!(
        out,
        "- seed {}, min {} instances per leaf, pruning {} (confidence {}), feature mode {}",
        m.seed,
        m.train.min_instances_per_leaf,
        if m.train.pruning_enabled { "on" } else { "off" },
        m.train.pruning_confidence,
        m.feature_mode.as_str()
    );
    out
}

/// Writes `report.md` and `<repr>_{auc,loss}.csv` as selected by `options`,
/// plus `metadata.json` and `trees/<COURSE>.<repr>.tree.{txt,json}` for every
/// trained model.
pub fn write_report_dir<F: Scalar>(report: &TransferReport<F>, dir: &Path, options: ReportOptions) -> io::Result<()> {
    std::fs::create_dir_all(dir.join("trees"))?;
    if options.markdown {
        std::fs::write(dir.join("report.md"), render_markdown(report, options))?;
    }
    for block in &report.blocks {
        let r = block.representation.as_str();
        if options.csv {
            std::fs::write(dir.join(format!("{r}_auc.csv")), matrix_csv(block, false, options))?;
            std::fs::write(dir.join(format!("{r}_loss.csv")), matrix_csv(block, true, options))?;
        }
        for (code, model) in report.courses.iter().zip(&block.models) {
            if let Ok(tree) = model {
                std::fs::write(dir.join("trees").join(format!("{code}.{r}.tree.txt")), tree.render())?;
                let json = tree.to_json().map_err(io::Error::other)?;
                std::fs::write(dir.join("trees").join(format!("{code}.{r}.tree.json")), json)?;
            }
        }
    }
    let metadata = serde_json::json!({
        "level": report.level.as_str(),
        "courses": report.courses,
        "representations": report.blocks.iter().map(|b| b.representation.as_str()).collect::<Vec<_>>(),
        "undefined_cells": report.blocks.iter().map(|b| serde_json::json!({
            "representation": b.representation.as_str(),
            "auc": b.auc.undefined_cells(),
            "loss": b.loss.undefined_cells(),
        })).collect::<Vec<_>>(),
        "config": report.metadata,
    });
    let text = serde_json::to_string_pretty(&metadata).map_err(io::Error::other)?;
    std::fs::write(dir.join("metadata.json"), text + "\n")
}
