use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use portability::dataset::Representation;
use portability::event_log::{parse_course_log_with_stats, CourseLog, IngestStats};
use portability::ontology::label_for_key;
use portability::report::{write_report_dir, ReportOptions};
use portability::synth::{generate_course, load_spec, SynthError};
use portability::transfer_eval::{evaluate_groups, run_experiment, CourseDatasets, ExperimentConfig, TransferReport};
use portability::{DecisionTree, FeatureDataset};

use crate::config::{ReportFormat, RunConfig};
use crate::error::{CliError, CliResult, Tag};
use crate::{CourseInputs, EvalArgs, FeaturizeArgs, IngestArgs, RenderArgs, SynthArgs};

const LOG_SUFFIX: &str = ".log.csv";
const MARKS_SUFFIX: &str = ".marks.csv";
const NUMERIC_SUFFIX: &str = ".numeric.csv";

fn file_name(path: &Path) -> &str {
    path.file_name().and_then(|n| n.to_str()).unwrap_or("")
}

/// One log file to read: `(log, marks, course code)`.
type Source = (PathBuf, PathBuf, String);

fn course_sources(inputs: &CourseInputs) -> CliResult<Vec<Source>> {
    let mut logs = Vec::new();
    for input in &inputs.inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(input)
                .user(format!("cannot list {}", input.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && file_name(p).ends_with(LOG_SUFFIX))
                .collect();
            found.sort();
            if found.is_empty() {
                log::warn!("{}: no *{LOG_SUFFIX} files", input.display());
            }
            logs.extend(found);
        } else if input.is_file() {
            logs.push(input.clone());
        } else {
            return Err(CliError::user(format!("{}: no such file or directory", input.display())));
        }
    }
    let single = logs.len() == 1;
    if !single && (inputs.course.is_some() || inputs.marks.is_some()) {
        return Err(CliError::user("--course and --marks need exactly one log input"));
    }
    logs.into_iter()
        .map(|log| {
            let name = file_name(&log);
            let code = match (&inputs.course, name.strip_suffix(LOG_SUFFIX)) {
                (Some(c), _) => c.clone(),
                (None, Some(c)) if !c.is_empty() => c.to_string(),
                _ => {
                    return Err(CliError::user(format!(
                        "{}: cannot tell the course code; name it <CODE>{LOG_SUFFIX} or pass --course",
                        log.display()
                    )))
                }
            };
            let marks = match &inputs.marks {
                Some(m) => m.clone(),
                None => log.with_file_name(format!("{code}{MARKS_SUFFIX}")),
            };
            Ok((log, marks, code))
        })
        .collect()
}

fn read_course((log, marks, code): &Source) -> CliResult<(CourseLog, IngestStats)> {
    if !marks.is_file() {
        return Err(CliError::data(format!("{code}: missing marks file {}", marks.display())));
    }
    let l = File::open(log).data(format!("{code}: cannot open {}", log.display()))?;
    let m = File::open(marks).data(format!("{code}: cannot open {}", marks.display()))?;
    parse_course_log_with_stats(l, m, code).data(format!("{code}: {}", log.display()))
}

/// Reads every course it can; failures are reported and returned separately.
fn read_courses(inputs: &CourseInputs) -> CliResult<(Vec<(CourseLog, IngestStats)>, Vec<CliError>)> {
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for source in course_sources(inputs)? {
        match read_course(&source) {
            Ok(c) => ok.push(c),
            Err(e) => {
                eprintln!("error: {e}");
                failed.push(e);
            }
        }
    }
    ok.sort_by(|a, b| a.0.course_code.cmp(&b.0.course_code));
    Ok((ok, failed))
}

fn failure_summary(failed: Vec<CliError>, what: &str) -> CliResult<()> {
    match failed.len() {
        0 => Ok(()),
        n => Err(CliError::data(format!("{n} {what} failed"))),
    }
}

fn create_out(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).user(format!("cannot create {}", dir.display()))
}

fn write_course(course: &CourseLog, dir: &Path) -> CliResult<()> {
    let code = &course.course_code;
    let log = dir.join(format!("{code}{LOG_SUFFIX}"));
    let marks = dir.join(format!("{code}{MARKS_SUFFIX}"));
    let f = File::create(&log).user(format!("cannot write {}", log.display()))?;
    course.write_log_csv(BufWriter::new(f)).user(format!("cannot write {}", log.display()))?;
    let f = File::create(&marks).user(format!("cannot write {}", marks.display()))?;
    course.write_marks_csv(BufWriter::new(f)).user(format!("cannot write {}", marks.display()))
}

pub fn ingest(run: &RunConfig, args: &IngestArgs) -> CliResult<()> {
    let (courses, failed) = read_courses(&args.courses)?;
    create_out(&run.out)?;
    for (course, stats) in &courses {
        write_course(course, &run.out)?;
        println!(
            "{}: {} events, {} foreign rows skipped, {} graded, {} ungraded, {} usage",
            course.course_code,
            stats.event_rows,
            stats.foreign_rows,
            stats.graded_students,
            stats.ungraded_students,
            course.usage_level()
        );
    }
    failure_summary(failed, "course(s)")
}

fn write_dataset(ds: &FeatureDataset, path: &Path) -> CliResult<()> {
    let f = File::create(path).user(format!("cannot write {}", path.display()))?;
    ds.write_csv(BufWriter::new(f)).user(format!("cannot write {}", path.display()))
}

pub fn featurize(run: &RunConfig, args: &FeaturizeArgs) -> CliResult<()> {
    let mode = run.feature_mode(args.mode)?;
    let representations = run.representation(args.representation).selected();
    let min_leaf = run.train()?.min_instances_per_leaf;
    let (courses, mut failed) = read_courses(&args.courses)?;
    create_out(&run.out)?;
    for (course, _) in &courses {
        let code = &course.course_code;
        let datasets = match CourseDatasets::<f64>::prepare(course, &run.taxonomy, mode) {
            Ok(d) => d,
            Err(e) => {
                let e = CliError::data(format!("{code}: {e}"));
                eprintln!("error: {e}");
                failed.push(e);
                continue;
            }
        };
        if datasets.numeric.len() < 2 * min_leaf {
            log::warn!(
                "{code}: {} graded students, fewer than 2 x {min_leaf} (min instances per leaf); trees will be single leaves",
                datasets.numeric.len()
            );
        }
        for &r in &representations {
            write_dataset(datasets.get(r), &run.out.join(format!("{code}.{r}.csv")))?;
        }
        if representations.contains(&Representation::Discretized) {
            let path = run.out.join(format!("{code}.cutpoints.csv"));
            let f = File::create(&path).user(format!("cannot write {}", path.display()))?;
            datasets.cutpoints.write_csv(BufWriter::new(f)).user(format!("cannot write {}", path.display()))?;
        }
        let (pass, fail) = datasets.numeric.class_counts();
        println!("{code}: {pass} Pass, {fail} Fail, {} usage, mode {}", datasets.level, mode.as_str());
    }
    failure_summary(failed, "course(s)")
}

fn report_options(run: &RunConfig, args: &EvalArgs) -> ReportOptions {
    let formats = if !args.format.is_empty() {
        args.format.clone()
    } else {
        run.file.formats.clone().unwrap_or_else(|| vec![ReportFormat::Csv, ReportFormat::Markdown])
    };
    ReportOptions {
        comma_decimal: args.comma_decimal || run.file.comma_decimal.unwrap_or(false),
        markdown: formats.contains(&ReportFormat::Markdown),
        csv: formats.contains(&ReportFormat::Csv),
    }
}

fn experiment_config(run: &RunConfig, args: &EvalArgs) -> CliResult<ExperimentConfig> {
    let mut train = run.train()?;
    if let Some(n) = args.min_leaf {
        train.min_instances_per_leaf = n;
    }
    if let Some(c) = args.confidence {
        train.pruning_confidence = c;
    }
    if args.no_pruning {
        train.pruning_enabled = false;
    }
    if args.plain_pruning {
        train.keep_error_free_subtrees = false;
    }
    train.validate().map_err(CliError::user)?;
    Ok(ExperimentConfig {
        train,
        representations: run.representation(args.representation).selected(),
        feature_mode: run.feature_mode(args.mode)?,
    })
}

/// Dataset inputs are numeric datasets; each is discretized with its own
/// cutpoints and all of them form one group of the given level.
fn dataset_reports(args: &EvalArgs, config: &ExperimentConfig) -> CliResult<Vec<TransferReport<f64>>> {
    let level = args
        .level
        .ok_or_else(|| CliError::user(format!("--level is required with *{NUMERIC_SUFFIX} inputs")))?;
    let mut prepared = Vec::new();
    for path in &args.inputs {
        let code = file_name(path)
            .strip_suffix(NUMERIC_SUFFIX)
            .ok_or_else(|| CliError::user(format!("{}: do not mix dataset and log inputs", path.display())))?;
        let f = File::open(path).user(format!("cannot open {}", path.display()))?;
        let numeric = FeatureDataset::read_csv(f, code, label_for_key).data(format!("{}", path.display()))?;
        if numeric.representation != Representation::Numeric {
            return Err(CliError::data(format!("{}: not a numeric dataset", path.display())));
        }
        prepared.push(CourseDatasets::from_numeric(level, numeric).data(format!("{}", path.display()))?);
    }
    prepared.sort_by(|a, b| a.course_code.cmp(&b.course_code));
    let first = &prepared[0].numeric;
    if let Some(other) = prepared.iter().find(|c| !c.numeric.same_schema(first)) {
        return Err(CliError::data(format!(
            "{} and {} have different feature columns",
            first.course_code, other.course_code
        )));
    }
    Ok(evaluate_groups(prepared, config))
}

pub fn eval_transfer(run: &RunConfig, args: &EvalArgs) -> CliResult<()> {
    let config = experiment_config(run, args)?;
    let options = report_options(run, args);
    let dataset_mode = args.inputs.iter().any(|p| file_name(p).ends_with(NUMERIC_SUFFIX));

    let (reports, failed) = if dataset_mode {
        (dataset_reports(args, &config)?, Vec::new())
    } else {
        if args.level.is_some() {
            log::warn!("--level only applies to dataset inputs; log inputs are grouped by their own usage level");
        }
        let inputs = CourseInputs { inputs: args.inputs.clone(), course: None, marks: None };
        let (courses, mut failed) = read_courses(&inputs)?;
        let courses: Vec<CourseLog> = courses.into_iter().map(|(c, _)| c).collect();
        let experiment = run_experiment::<f64>(&courses, &run.taxonomy, &config);
        for s in experiment.skipped {
            let e = CliError::data(format!("{}: skipped: {}", s.course_code, s.reason));
            eprintln!("error: {e}");
            failed.push(e);
        }
        (experiment.reports, failed)
    };
    if reports.is_empty() {
        return Err(CliError::data("no course could be evaluated"));
    }

    for report in &reports {
        let dir = run.out.join(report.level.as_str());
        write_report_dir(report, &dir, options).user(format!("cannot write {}", dir.display()))?;
        for block in &report.blocks {
            let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.3}"));
            println!(
                "{} ({}): {}: mean AUC {}, mean AUC loss {}",
                report.level,
                report.courses.join(", "),
                block.representation,
                fmt(block.auc.grand_mean),
                fmt(block.loss.grand_mean)
            );
        }
        println!("wrote {}", dir.display());
    }
    failure_summary(failed, "course(s)")
}

pub fn synth(run: &RunConfig, args: &SynthArgs) -> CliResult<()> {
    create_out(&run.out)?;
    for path in &args.specs {
        let mut spec = load_spec(path).map_err(|e| match e {
            SynthError::Io { .. } => CliError::user(e),
            SynthError::InvalidSpec(_) => CliError::data(format!("{}: {e}", path.display())),
        })?;
        if let Some(seed) = run.seed {
            spec.seed = seed;
        }
        let course = generate_course(&spec, &run.taxonomy).data(format!("{}", path.display()))?;
        write_course(&course, &run.out)?;
        println!(
            "{}: {} students, {} events, {} usage",
            course.course_code,
            course.marks.len(),
            course.events.len(),
            course.usage_level()
        );
    }
    Ok(())
}

pub fn render_tree(args: &RenderArgs) -> CliResult<()> {
    for (i, path) in args.trees.iter().enumerate() {
        let text = std::fs::read_to_string(path).user(format!("cannot read {}", path.display()))?;
        let tree = DecisionTree::from_json(&text).data(format!("{}", path.display()))?;
        if args.trees.len() > 1 {
            if i > 0 {
                println!();
            }
            println!("== {}", path.display());
        }
        print!("{}", tree.render());
    }
    Ok(())
}
