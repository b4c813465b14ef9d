//! `portability`: ingest Moodle exports, build ontology features, and measure
//! how decision trees transfer between courses of one usage group.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use portability::event_log::UsageLevel;
use portability::ontology::FeatureMode;

use crate::config::{read_config, FileConfig, ReportFormat, RepresentationChoice, RunConfig};
use crate::error::{CliError, ExitKind};

#[derive(Debug, Parser)]
#[command(name = "portability", version, about)]
struct Cli {
    /// TOML file with default settings; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: out].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for balancing and, for `synth`, for every generated course.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Only errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate log and marks files and write them in canonical form.
    Ingest(IngestArgs),
    /// Build numeric and discretized feature datasets per course.
    Featurize(FeaturizeArgs),
    /// Train one tree per course and write AUC / AUC-loss reports per usage group.
    EvalTransfer(EvalArgs),
    /// Generate synthetic courses from spec files.
    Synth(SynthArgs),
    /// Print the text rendering of saved tree JSON files.
    RenderTree(RenderArgs),
}

#[derive(Debug, Args)]
pub struct CourseInputs {
    /// Log files (`<CODE>.log.csv`) or directories holding them.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Course code, when a single log file does not follow the naming scheme.
    #[arg(long)]
    pub course: Option<String>,
    /// Marks file for a single log input [default: sibling `<CODE>.marks.csv`].
    #[arg(long)]
    pub marks: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub courses: CourseInputs,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    #[command(flatten)]
    pub courses: CourseInputs,
    #[arg(long, value_enum)]
    pub representation: Option<RepresentationChoice>,
    /// `ontology` or `raw-actions`.
    #[arg(long)]
    pub mode: Option<FeatureMode>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Course log files or directories, or `<CODE>.numeric.csv` datasets.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Usage group of dataset inputs (`low`, `medium`, `high`).
    #[arg(long)]
    pub level: Option<UsageLevel>,
    #[arg(long, value_enum)]
    pub representation: Option<RepresentationChoice>,
    /// Report files to write; repeat or comma-separate [default: csv,markdown].
    #[arg(long, value_enum, value_delimiter = ',')]
    pub format: Vec<ReportFormat>,
    /// Print decimals with a comma.
    #[arg(long)]
    pub comma_decimal: bool,
    #[arg(long)]
    pub mode: Option<FeatureMode>,
    #[arg(long)]
    pub min_leaf: Option<usize>,
    #[arg(long)]
    pub confidence: Option<f64>,
    #[arg(long)]
    pub no_pruning: bool,
    /// Plain C4.5 subtree replacement, even for subtrees without training errors.
    #[arg(long)]
    pub plain_pruning: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(required = true)]
    pub specs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(required = true)]
    pub trees: Vec<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => read_config(path)?,
        None => FileConfig::default(),
    };
    let run = RunConfig::new(file, cli.out, cli.seed)?;
    match cli.command {
        Command::Ingest(args) => commands::ingest(&run, &args),
        Command::Featurize(args) => commands::featurize(&run, &args),
        Command::EvalTransfer(args) => commands::eval_transfer(&run, &args),
        Command::Synth(args) => commands::synth(&run, &args),
        Command::RenderTree(args) => commands::render_tree(&args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(ExitKind::User as u8) } else { ExitCode::SUCCESS };
        }
    };
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => "error",
        (false, 0) => "warn",
        (false, 1) => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.kind as u8)
        }
        Err(_) => {
            eprintln!("error: internal failure (this is a bug)");
            ExitCode::from(ExitKind::Internal as u8)
        }
    }
}
