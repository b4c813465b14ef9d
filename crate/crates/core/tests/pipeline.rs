use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::Path;

use portability::dataset::{Outcome, Representation};
use portability::event_log::{parse_course_log, CourseLog, UsageLevel};
use portability::ontology::{build_features, label_outcome, ActionTaxonomy, OntologyCategory};
use portability::synth::{generate_course, load_spec, CourseSpec};
use portability::transfer_eval::{run_experiment, ExperimentConfig};
use portability::tree::{train, TrainConfig};
use portability::transfer_eval::{balance, CourseDatasets};

fn spec(name: &str) -> CourseSpec {
    load_spec(&Path::new(env!("CARGO_MANIFEST_DIR")).join("data/specs").join(name)).unwrap()
}

fn generate(spec: &CourseSpec) -> CourseLog {
    generate_course(spec, &ActionTaxonomy::builtin()).unwrap()
}

fn fingerprint(course: &CourseLog) -> u64 {
    let mut h = DefaultHasher::new();
    for e in &course.events {
        (e.timestamp, &e.student_id, &e.action).hash(&mut h);
    }
    for (s, m) in &course.marks {
        (s, m.to_bits()).hash(&mut h);
    }
    h.finish()
}

#[test]
fn synthetic_courses_are_seeded() {
    let base = spec("hci.spec");
    assert_eq!(generate(&base), generate(&base));
    let prints: std::collections::BTreeSet<u64> = (0..20)
        .map(|seed| fingerprint(&generate(&CourseSpec { seed, ..base.clone() })))
        .collect();
    assert_eq!(prints.len(), 20);
}

#[test]
fn marks_agree_with_the_assigned_profile() {
    let nested = spec("nested.spec");
    let course = generate(&nested);
    let taxonomy = ActionTaxonomy::builtin();
    let data = build_features::<f64>(&course, &taxonomy).unwrap();
    for row in &data.rows {
        let mark = course.marks[&row.student_id];
        assert_eq!(label_outcome(mark).unwrap(), row.outcome);
        // failing students are spread evenly
        let learning = row.values[0].number().unwrap();
        if row.outcome == Outcome::Fail {
            assert_eq!(learning, 25.0);
        }
    }
    assert_eq!(data.class_counts(), (40, 40));
}

#[test]
fn separable_spec_splits_communicating_groups() {
    let course = generate(&spec("ics2.spec"));
    assert_eq!(course.usage_level(), UsageLevel::High);
    let data = build_features::<f64>(&course, &ActionTaxonomy::builtin()).unwrap();
    let c = OntologyCategory::Communicating as usize;
    let column = |o: Outcome| -> Vec<f64> {
        data.rows.iter().filter(|r| r.outcome == o).map(|r| r.values[c].number().unwrap()).collect()
    };
    let min_pass = column(Outcome::Pass).into_iter().fold(f64::INFINITY, f64::min);
    let max_fail = column(Outcome::Fail).into_iter().fold(f64::NEG_INFINITY, f64::max);
    assert!(min_pass > max_fail, "{min_pass} <= {max_fail}");

    let prepared = CourseDatasets::<f64>::from_numeric(UsageLevel::High, data).unwrap();
    let tree = train(&balance(&prepared.discretized, 1).unwrap(), &TrainConfig::default()).unwrap();
    assert!(tree.size() <= 3);
}

#[test]
fn generated_files_parse_back() {
    for name in ["ics2.spec", "hci.spec", "is.spec", "nested.spec", "medium.spec", "low.spec"] {
        let course = generate(&spec(name));
        let (mut log, mut marks) = (Vec::new(), Vec::new());
        course.write_log_csv(&mut log).unwrap();
        course.write_marks_csv(&mut marks).unwrap();
        let back = parse_course_log(log.as_slice(), marks.as_slice(), &course.course_code).unwrap();
        assert_eq!(back, course, "{name}");
    }
}

#[test]
fn experiment_groups_by_usage_level() {
    let taxonomy = ActionTaxonomy::builtin();
    let courses: Vec<CourseLog> =
        ["ics2.spec", "hci.spec", "is.spec", "medium.spec", "low.spec"].iter().map(|n| generate(&spec(n))).collect();
    let experiment = run_experiment::<f64>(&courses, &taxonomy, &ExperimentConfig::default());
    assert!(experiment.skipped.is_empty());
    let shape: Vec<(UsageLevel, usize)> = experiment.reports.iter().map(|r| (r.level, r.courses.len())).collect();
    assert_eq!(shape, vec![(UsageLevel::High, 3), (UsageLevel::Medium, 1), (UsageLevel::Low, 1)]);

    let high = &experiment.reports[0];
    assert_eq!(high.blocks.len(), 2);
    for block in &high.blocks {
        assert_eq!(block.auc.cells.len(), 3);
        assert!(block.models.iter().all(Result::is_ok));
        for i in 0..3 {
            for j in (0..3).filter(|&j| j != i) {
                let (d, c, l) = (block.auc.cells[i][i].unwrap(), block.auc.cells[i][j].unwrap(), block.loss.cells[i][j].unwrap());
                assert_eq!(d - l, c);
            }
        }
    }
    let single = &experiment.reports[1];
    assert!(single.blocks.iter().all(|b| b.loss.cells[0][0].is_none() && b.loss.grand_mean.is_none()));
}

#[test]
fn medium_group_of_three() {
    let base = spec("medium.spec");
    let courses: Vec<CourseLog> = ["M1", "M2", "M3"]
        .iter()
        .enumerate()
        .map(|(k, code)| generate(&CourseSpec { course_code: code.to_string(), seed: 100 + k as u64, ..base.clone() }))
        .collect();
    let config = ExperimentConfig { representations: vec![Representation::Discretized], ..ExperimentConfig::default() };
    let experiment = run_experiment::<f64>(&courses, &ActionTaxonomy::builtin(), &config);
    assert_eq!(experiment.reports.len(), 1);
    let report = &experiment.reports[0];
    assert_eq!(report.level, UsageLevel::Medium);
    assert_eq!(report.courses, vec!["M1", "M2", "M3"]);
    assert_eq!(report.blocks.len(), 1);
    assert_eq!(report.blocks[0].representation, Representation::Discretized);
}

#[test]
fn ungraded_course_is_skipped() {
    let mut course = generate(&spec("low.spec"));
    course.marks.clear();
    let good = generate(&spec("hci.spec"));
    let experiment = run_experiment::<f64>(&[course, good], &ActionTaxonomy::builtin(), &ExperimentConfig::default());
    assert_eq!(experiment.skipped.len(), 1);
    assert_eq!(experiment.skipped[0].course_code, "DB1");
    assert_eq!(experiment.reports.len(), 1);
}

#[test]
fn f32_pipeline_runs() {
    let course = generate(&spec("ics2.spec"));
    let experiment = run_experiment::<f32>(&[course], &ActionTaxonomy::builtin(), &ExperimentConfig::default());
    let tree = experiment.reports[0].blocks[1].models[0].as_ref().unwrap();
    assert_eq!(tree.num_leaves(), 2);
}
