//! Cross-course transfer experiment.
//!
//! Courses are grouped by usage level. Inside a group every course gets one
//! model per representation, trained on its class-balanced dataset; each model
//! is then scored on every course of the group:
//!
//! * diagonal cells resubstitute the model on its own balanced training data;
//! * off-diagonal cells score the target course's full, unbalanced dataset,
//!   discretized with the target's own cutpoints.
//!
//! AUC loss is `auc(i, i) - auc(i, j)`. Cells that cannot be computed (a
//! single-class test set, a course whose model failed to train) are `None`
//! and are left out of every average.

use std::collections::BTreeMap;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::auc::auc;
use crate::dataset::{DatasetError, FeatureDataset, Outcome, Representation};
use crate::discretizer::{apply_cutpoints, fit_cutpoints, CutpointModel};
use crate::event_log::{CourseLog, UsageLevel};
use crate::num::{mean, Scalar};
use crate::ontology::{ActionTaxonomy, FeatureError, FeatureMode, ENGAGEMENT_FORMULA};
use crate::tree::{train, DecisionTree, TrainConfig, TreeError};

#[derive(Debug, Error, PartialEq)]
pub enum TransferError {
    #[error("dataset {0} contains a single class")]
    SingleClassDataset(String),
    #[error("a course group needs at least one course")]
    EmptyGroup,
    #[error("courses in a group must share one usage level and one feature schema: {0}")]
    InconsistentGroup(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Random undersampling of the majority class to the minority size. The
/// result is shuffled; both steps are driven by `seed` only.
pub fn balance<F: Scalar>(dataset: &FeatureDataset<F>, seed: u64) -> Result<FeatureDataset<F>, TransferError> {
    let (pass, fail): (Vec<usize>, Vec<usize>) =
        (0..dataset.len()).partition(|&i| dataset.rows[i].outcome == Outcome::Pass);
    if pass.is_empty() || fail.is_empty() {
        return Err(TransferError::SingleClassDataset(dataset.course_code.clone()));
    }
    let (minority, majority) = if pass.len() <= fail.len() { (pass, fail) } else { (fail, pass) };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep: Vec<usize> = index::sample(&mut rng, majority.len(), minority.len())
        .into_iter()
        .map(|k| majority[k])
        .collect();
    keep.sort_unstable();
    let mut chosen = minority;
    chosen.extend(keep);
    chosen.shuffle(&mut rng);
    Ok(FeatureDataset {
        course_code: dataset.course_code.clone(),
        representation: dataset.representation,
        attributes: dataset.attributes.clone(),
        rows: chosen.into_iter().map(|i| dataset.rows[i].clone()).collect(),
    })
}

/// Per-course seed, independent of where the course sits in its group.
pub fn course_seed(seed: u64, course_code: &str) -> u64 {
    // FNV-1a
    let hash = course_code
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3));
    seed ^ hash
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucMatrix<F> {
    pub courses: Vec<String>,
    /// `cells[model][test]`.
    pub cells: Vec<Vec<Option<F>>>,
    /// Mean over the defined cells of a row, diagonal included.
    pub row_averages: Vec<Option<F>>,
    pub grand_mean: Option<F>,
}

impl<F: Scalar> AucMatrix<F> {
    pub fn from_cells(courses: Vec<String>, cells: Vec<Vec<Option<F>>>) -> Self {
        assert_eq!(courses.len(), cells.len(), "one row per course");
        assert!(cells.iter().all(|r| r.len() == courses.len()), "matrix must be square");
        let row_averages: Vec<Option<F>> = cells.iter().map(|r| mean(r.iter().flatten().copied())).collect();
        let grand_mean = mean(row_averages.iter().flatten().copied());
        AucMatrix { courses, cells, row_averages, grand_mean }
    }

    pub fn diagonal(&self, i: usize) -> Option<F> {
        self.cells[i][i]
    }

    pub fn undefined_cells(&self) -> usize {
        self.cells.iter().flatten().filter(|c| c.is_none()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossMatrix<F> {
    pub courses: Vec<String>,
    /// Diagonal cells are always `None`.
    pub cells: Vec<Vec<Option<F>>>,
    /// Mean over the defined off-diagonal cells of a row.
    pub row_averages: Vec<Option<F>>,
    pub grand_mean: Option<F>,
}

impl<F: Scalar> LossMatrix<F> {
    /// The reference of each row is its diagonal cell.
    pub fn from_auc(auc: &AucMatrix<F>) -> Self {
        let n = auc.courses.len();
        let cells: Vec<Vec<Option<F>>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| match (i == j, auc.cells[i][i], auc.cells[i][j]) {
                        (false, Some(reference), Some(cell)) => Some(reference - cell),
                        _ => None,
                    })
                    .collect()
            })
            .collect();
        let row_averages: Vec<Option<F>> = cells.iter().map(|r| mean(r.iter().flatten().copied())).collect();
        let grand_mean = mean(row_averages.iter().flatten().copied());
        LossMatrix { courses: auc.courses.clone(), cells, row_averages, grand_mean }
    }

    /// Undefined off-diagonal cells.
    pub fn undefined_cells(&self) -> usize {
        let n = self.courses.len();
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|&(i, j)| i != j && self.cells[i][j].is_none()).count()
    }

    /// Mean over every defined off-diagonal cell of the matrix.
    pub fn mean_cell(&self) -> Option<F> {
        mean(self.cells.iter().flatten().flatten().copied())
    }
}

/// Both datasets of one course plus the cutpoints that link them.
#[derive(Debug, Clone, PartialEq)]
pub struct CourseDatasets<F> {
    pub course_code: String,
    pub level: UsageLevel,
    pub numeric: FeatureDataset<F>,
    pub cutpoints: CutpointModel<F>,
    pub discretized: FeatureDataset<F>,
}

impl<F: Scalar> CourseDatasets<F> {
    /// Discretizes with cutpoints fitted on this course alone.
    pub fn from_numeric(level: UsageLevel, numeric: FeatureDataset<F>) -> Result<Self, TransferError> {
        let cutpoints = fit_cutpoints(&numeric)?;
        let discretized = apply_cutpoints(&cutpoints, &numeric)?;
        Ok(CourseDatasets { course_code: numeric.course_code.clone(), level, numeric, cutpoints, discretized })
    }

    pub fn prepare(course: &CourseLog, taxonomy: &ActionTaxonomy, mode: FeatureMode) -> Result<Self, TransferError> {
        let numeric = mode.featurize(course, taxonomy)?;
        Self::from_numeric(course.usage_level(), numeric)
    }

    pub fn get(&self, representation: Representation) -> &FeatureDataset<F> {
        match representation {
            Representation::Numeric => &self.numeric,
            Representation::Discretized => &self.discretized,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CourseGroup<F> {
    pub level: UsageLevel,
    /// Matrix row and column order.
    pub courses: Vec<CourseDatasets<F>>,
}

impl<F: Scalar> CourseGroup<F> {
    pub fn new(level: UsageLevel, courses: Vec<CourseDatasets<F>>) -> Result<Self, TransferError> {
        if courses.is_empty() {
            return Err(TransferError::EmptyGroup);
        }
        if let Some(c) = courses.iter().find(|c| c.level != level) {
            return Err(TransferError::InconsistentGroup(format!("{} is {}, group is {}", c.course_code, c.level, level)));
        }
        if let Some(c) = courses.iter().find(|c| !c.numeric.same_schema(&courses[0].numeric)) {
            return Err(TransferError::InconsistentGroup(format!("{} has a different attribute set", c.course_code)));
        }
        Ok(CourseGroup { level, courses })
    }

    pub fn codes(&self) -> Vec<String> {
        self.courses.iter().map(|c| c.course_code.clone()).collect()
    }
}

/// Trained model of one course, or why it could not be trained.
pub type ModelOutcome<F> = Result<DecisionTree<F>, String>;

#[derive(Debug, Clone, PartialEq)]
pub struct GroupEvaluation<F> {
    pub representation: Representation,
    pub auc: AucMatrix<F>,
    pub loss: LossMatrix<F>,
    pub models: Vec<ModelOutcome<F>>,
}

fn score_auc<F: Scalar>(tree: &DecisionTree<F>, test: &FeatureDataset<F>) -> Option<F> {
    let scored: Result<Vec<(F, Outcome)>, _> =
        test.rows.iter().map(|r| tree.predict(&r.values).map(|p| (p.score, r.outcome))).collect();
    match scored {
        Ok(scored) => auc(&scored).ok(),
        Err(e) => {
            log::warn!("cannot score {} with the {} model: {e}", test.course_code, tree.meta.course_code);
            None
        }
    }
}

pub fn evaluate_transfer<F: Scalar>(
    group: &CourseGroup<F>,
    representation: Representation,
    config: &TrainConfig,
) -> GroupEvaluation<F> {
    let trained: Vec<(Option<FeatureDataset<F>>, ModelOutcome<F>)> = group
        .courses
        .par_iter()
        .map(|course| {
            let data = course.get(representation);
            let balanced = match balance(data, course_seed(config.random_seed, &course.course_code)) {
                Ok(b) => b,
                Err(e) => return (None, Err(e.to_string())),
            };
            let model = train(&balanced, config).map_err(|e: TreeError| e.to_string());
            (Some(balanced), model)
        })
        .collect();

    let n = group.courses.len();
    let cells: Vec<Vec<Option<F>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (balanced, model) = &trained[i];
            (0..n)
                .map(|j| {
                    let tree = model.as_ref().ok()?;
                    let test = if i == j { balanced.as_ref()? } else { group.courses[j].get(representation) };
                    score_auc(tree, test)
                })
                .collect()
        })
        .collect();

    for (course, (_, model)) in group.courses.iter().zip(&trained) {
        if let Err(e) = model {
            log::warn!("{} {representation} model not trained: {e}", course.course_code);
        }
    }
    let auc = AucMatrix::from_cells(group.codes(), cells);
    let loss = LossMatrix::from_auc(&auc);
    GroupEvaluation { representation, auc, loss, models: trained.into_iter().map(|(_, m)| m).collect() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    pub representations: Vec<Representation>,
    pub feature_mode: FeatureMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            train: TrainConfig::default(),
            representations: vec![Representation::Numeric, Representation::Discretized],
            feature_mode: FeatureMode::Ontology,
        }
    }
}

/// Settings echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub tool_version: String,
    pub feature_mode: FeatureMode,
    pub seed: u64,
    pub train: TrainConfig,
    pub balancing: String,
    pub diagonal_cells: String,
    pub off_diagonal_cells: String,
    pub discretization: String,
    pub engagement: String,
    pub outcome_rule: String,
    pub auc: String,
}

impl ReportMetadata {
    pub fn new(config: &ExperimentConfig) -> Self {
        ReportMetadata {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            feature_mode: config.feature_mode,
            seed: config.train.random_seed,
            train: config.train,
            balancing: "random undersampling of the majority class, seeded per course (seed xor FNV-1a(course code)), ChaCha8".into(),
            diagonal_cells: "resubstitution on the model's balanced training dataset".into(),
            off_diagonal_cells: "target course's full unbalanced dataset".into(),
            discretization: "two equal-width bins fitted per course; value >= cutpoint is HIGH; constant attributes are LOW".into(),
            engagement: ENGAGEMENT_FORMULA.into(),
            outcome_rule: "Pass iff final mark >= 5".into(),
            auc: "Mann-Whitney pair count, ties count 1/2, Pass positive; loss = diagonal - cell".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferReport<F> {
    pub level: UsageLevel,
    pub courses: Vec<String>,
    /// One block per evaluated representation, numeric first.
    pub blocks: Vec<GroupEvaluation<F>>,
    pub metadata: ReportMetadata,
}

impl<F: Scalar> TransferReport<F> {
    pub fn block(&self, representation: Representation) -> Option<&GroupEvaluation<F>> {
        self.blocks.iter().find(|b| b.representation == representation)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedCourse {
    pub course_code: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment<F> {
    /// High, Medium, Low order; empty groups omitted.
    pub reports: Vec<TransferReport<F>>,
    pub skipped: Vec<SkippedCourse>,
}

/// Groups prepared course datasets by usage level and evaluates each group.
pub fn evaluate_groups<F: Scalar>(prepared: Vec<CourseDatasets<F>>, config: &ExperimentConfig) -> Vec<TransferReport<F>> {
    let mut by_level: BTreeMap<UsageLevel, Vec<CourseDatasets<F>>> = BTreeMap::new();
    for course in prepared {
        by_level.entry(course.level).or_default().push(course);
    }
    let mut representations = config.representations.clone();
    representations.sort();
    representations.dedup();
    by_level
        .into_iter()
        .rev()
        .map(|(level, courses)| {
            let group = CourseGroup { level, courses };
            let blocks = representations.iter().map(|&r| evaluate_transfer(&group, r, &config.train)).collect();
            TransferReport { level, courses: group.codes(), blocks, metadata: ReportMetadata::new(config) }
        })
        .collect()
}

/// Featurizes, groups and evaluates. Courses that fail to featurize are
/// listed in `skipped`; the rest still run.
pub fn run_experiment<F: Scalar>(
    courses: &[CourseLog],
    taxonomy: &ActionTaxonomy,
    config: &ExperimentConfig,
) -> Experiment<F> {
    let prepared: Vec<Result<CourseDatasets<F>, TransferError>> = courses
        .par_iter()
        .map(|c| CourseDatasets::prepare(c, taxonomy, config.feature_mode))
        .collect();
    let mut ok = Vec::new();
    let mut skipped = Vec::new();
    for (course, result) in courses.iter().zip(prepared) {
        match result {
            Ok(d) => ok.push(d),
            Err(e) => skipped.push(SkippedCourse { course_code: course.course_code.clone(), reason: e.to_string() }),
        }
    }
    if !skipped.is_empty() {
        log::warn!("{} course(s) skipped", skipped.len());
    }
    Experiment { reports: evaluate_groups(ok, config), skipped }
}
