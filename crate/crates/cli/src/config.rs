//! Run configuration: TOML file values overridden by command-line flags.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use portability::dataset::Representation;
use portability::ontology::{load_taxonomy, ActionTaxonomy, FeatureMode};
use portability::tree::TrainConfig;

use crate::error::{CliError, CliResult, Tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RepresentationChoice {
    Numeric,
    Discretized,
    #[default]
    Both,
}

impl RepresentationChoice {
    pub fn selected(self) -> Vec<Representation> {
        match self {
            RepresentationChoice::Numeric => vec![Representation::Numeric],
            RepresentationChoice::Discretized => vec![Representation::Discretized],
            RepresentationChoice::Both => vec![Representation::Numeric, Representation::Discretized],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Markdown,
}

/// Keys accepted in the `--config` file; every one is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub taxonomy: Option<PathBuf>,
    pub representation: Option<RepresentationChoice>,
    pub formats: Option<Vec<ReportFormat>>,
    pub comma_decimal: Option<bool>,
    pub feature_mode: Option<String>,
    #[serde(default)]
    pub train: TrainSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub min_instances_per_leaf: Option<usize>,
    pub pruning_confidence: Option<f64>,
    pub pruning_enabled: Option<bool>,
    pub keep_error_free_subtrees: Option<bool>,
}

pub fn read_config(path: &Path) -> CliResult<FileConfig> {
    let text = std::fs::read_to_string(path).user(format!("cannot read config {}", path.display()))?;
    toml::from_str(&text).user(format!("invalid config {}", path.display()))
}

/// Settings shared by every command after merging file and flags.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub taxonomy: ActionTaxonomy,
    pub file: FileConfig,
}

impl RunConfig {
    pub fn new(file: FileConfig, out: Option<PathBuf>, seed: Option<u64>) -> CliResult<Self> {
        let taxonomy = match &file.taxonomy {
            None => ActionTaxonomy::builtin(),
            Some(path) => {
                let f = std::fs::File::open(path).user(format!("cannot open taxonomy {}", path.display()))?;
                load_taxonomy(f).data(format!("invalid taxonomy {}", path.display()))?
            }
        };
        Ok(RunConfig {
            out: out.or_else(|| file.out.clone()).unwrap_or_else(|| PathBuf::from("out")),
            seed: seed.or(file.seed),
            taxonomy,
            file,
        })
    }

    pub fn feature_mode(&self, flag: Option<FeatureMode>) -> CliResult<FeatureMode> {
        match (flag, &self.file.feature_mode) {
            (Some(m), _) => Ok(m),
            (None, Some(s)) => s.parse().map_err(CliError::user),
            (None, None) => Ok(FeatureMode::Ontology),
        }
    }

    pub fn representation(&self, flag: Option<RepresentationChoice>) -> RepresentationChoice {
        flag.or(self.file.representation).unwrap_or_default()
    }

    pub fn train(&self) -> CliResult<TrainConfig> {
        let d = TrainConfig::default();
        let t = &self.file.train;
        let config = TrainConfig {
            min_instances_per_leaf: t.min_instances_per_leaf.unwrap_or(d.min_instances_per_leaf),
            pruning_confidence: t.pruning_confidence.unwrap_or(d.pruning_confidence),
            pruning_enabled: t.pruning_enabled.unwrap_or(d.pruning_enabled),
            keep_error_free_subtrees: t.keep_error_free_subtrees.unwrap_or(d.keep_error_free_subtrees),
            random_seed: self.seed.unwrap_or(d.random_seed),
        };
        config.validate().map_err(CliError::user)?;
        Ok(config)
    }
}
