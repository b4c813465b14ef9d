//! Ontology-based feature abstraction of LMS event logs and cross-course
//! portability of J48-style decision trees.
//!
//! The pipeline: [`event_log`] parses a course's events and marks,
//! [`ontology`] maps them onto four activity categories plus engagement,
//! [`discretizer`] turns the numeric table into LOW/HIGH labels, [`tree`]
//! induces and prunes a C4.5 tree, and [`transfer_eval`] trains one model per
//! course and scores it on every course of the same usage level.
//! [`synth`] generates synthetic courses with known structure.
//!
//! Everything numeric is generic over [`Scalar`]; the aliases at the crate
//! root fix it to `f64` (and `f32` with an `F32` suffix).

pub mod auc;
pub mod dataset;
pub mod discretizer;
pub mod event_log;
pub mod num;
pub mod ontology;
pub mod report;
pub mod synth;
pub mod transfer_eval;
pub mod tree;

pub use num::Scalar;

pub type FeatureDataset = dataset::FeatureDataset<f64>;
pub type Instance = dataset::Instance<f64>;
pub type StudentFeatures = ontology::StudentFeatures<f64>;
pub type CutpointModel = discretizer::CutpointModel<f64>;
pub type DecisionTree = tree::DecisionTree<f64>;
pub type AucMatrix = transfer_eval::AucMatrix<f64>;
pub type LossMatrix = transfer_eval::LossMatrix<f64>;
pub type TransferReport = transfer_eval::TransferReport<f64>;

pub type FeatureDatasetF32 = dataset::FeatureDataset<f32>;
pub type InstanceF32 = dataset::Instance<f32>;
pub type StudentFeaturesF32 = ontology::StudentFeatures<f32>;
pub type CutpointModelF32 = discretizer::CutpointModel<f32>;
pub type DecisionTreeF32 = tree::DecisionTree<f32>;
pub type AucMatrixF32 = transfer_eval::AucMatrix<f32>;
pub type LossMatrixF32 = transfer_eval::LossMatrix<f32>;
pub type TransferReportF32 = transfer_eval::TransferReport<f32>;
