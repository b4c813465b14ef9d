//! Action taxonomy and the five high-level student attributes.
//!
//! Each logged action maps to one of four event categories. Per student, the
//! share of mapped events in each category gives four percentages; a fifth
//! attribute, engagement, combines the total number of interactions with the
//! number of distinct days connected:
//!
//! ```text
//! engagement(s) = 50 * (I(s) / max I + D(s) / max D)
//! ```
//!
//! where `I` counts all events (mapped or not), `D` counts distinct UTC dates,
//! and the maxima run over the course's graded students. Percentages are a
//! per-student composition: they are computed over the student's own mapped
//! events, not over course totals.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Read};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Attribute, FeatureDataset, Instance, Outcome, Representation, Value};
use crate::event_log::{normalize_action, CourseLog};
use crate::num::Scalar;

const BUILTIN_TAXONOMY: &str = include_str!("../data/taxonomy.txt");

/// Shown in report metadata.
pub const ENGAGEMENT_FORMULA: &str = "50 * (interactions / course max interactions + days connected / course max days)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventCategory {
    Learning,
    Communicating,
    Working,
    Evaluating,
}

impl EventCategory {
    pub const ALL: [EventCategory; 4] = [
        EventCategory::Learning,
        EventCategory::Communicating,
        EventCategory::Working,
        EventCategory::Evaluating,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Spelling used in taxonomy files.
    pub fn file_name(self) -> &'static str {
        match self {
            EventCategory::Learning => "LEARNING",
            EventCategory::Communicating => "COMMUNICATING",
            EventCategory::Working => "WORKING",
            EventCategory::Evaluating => "EVALUATING",
        }
    }
}

impl std::str::FromStr for EventCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.trim().to_ascii_uppercase();
        EventCategory::ALL
            .into_iter()
            .find(|c| c.file_name() == upper)
            .ok_or_else(|| s.trim().to_string())
    }
}

/// The five dataset attributes, in column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OntologyCategory {
    Learning,
    Communicating,
    Working,
    Evaluating,
    Engagement,
}

impl OntologyCategory {
    pub const ALL: [OntologyCategory; 5] = [
        OntologyCategory::Learning,
        OntologyCategory::Communicating,
        OntologyCategory::Working,
        OntologyCategory::Evaluating,
        OntologyCategory::Engagement,
    ];

    pub fn key(self) -> &'static str {
        match self {
            OntologyCategory::Learning => "learning",
            OntologyCategory::Communicating => "communicating",
            OntologyCategory::Working => "working",
            OntologyCategory::Evaluating => "evaluating",
            OntologyCategory::Engagement => "engagement",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            OntologyCategory::Learning => "LEARNING/READING/VIEWING",
            OntologyCategory::Communicating => "COMMUNICATING",
            OntologyCategory::Working => "WORKING/DOING",
            OntologyCategory::Evaluating => "EVALUATING/EXAMINING",
            OntologyCategory::Engagement => "ENGAGEMENT",
        }
    }

    pub fn attribute(self) -> Attribute {
        Attribute::new(self.key(), self.label())
    }

    pub fn is_event_category(self) -> bool {
        self != OntologyCategory::Engagement
    }
}

pub fn ontology_attributes() -> Vec<Attribute> {
    OntologyCategory::ALL.iter().map(|c| c.attribute()).collect()
}

/// Rendering label for a dataset column key: ontology labels for the five
/// ontology keys, the upper-cased key otherwise.
pub fn label_for_key(key: &str) -> String {
    OntologyCategory::ALL
        .iter()
        .find(|c| c.key() == key)
        .map(|c| c.label().to_string())
        .unwrap_or_else(|| key.to_uppercase())
}

#[derive(Debug, Error, PartialEq)]
pub enum TaxonomyError {
    #[error("action `{0}` is mapped more than once")]
    DuplicateAction(String),
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
    #[error("taxonomy has no entries")]
    EmptyTaxonomy,
    #[error("line {line}: expected `action name = CATEGORY`")]
    MalformedLine { line: usize },
    #[error("io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionTaxonomy {
    mapping: BTreeMap<String, EventCategory>,
}

impl ActionTaxonomy {
    /// The shipped taxonomy file.
    pub fn builtin() -> Self {
        load_taxonomy(BUILTIN_TAXONOMY.as_bytes()).expect("built-in taxonomy is valid")
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, EventCategory)> {
        self.mapping.iter().map(|(a, c)| (a.as_str(), *c))
    }

    /// Sorted actions of one category.
    pub fn actions_of(&self, category: EventCategory) -> Vec<&str> {
        self.iter().filter(|(_, c)| *c == category).map(|(a, _)| a).collect()
    }

    pub fn get(&self, action: &str) -> Option<EventCategory> {
        self.mapping.get(action).copied()
    }
}

pub fn load_taxonomy<R: Read>(source: R) -> Result<ActionTaxonomy, TaxonomyError> {
    let mut mapping = BTreeMap::new();
    for (idx, line) in BufReader::new(source).lines().enumerate() {
        let line = line.map_err(|e| TaxonomyError::Io(e.to_string()))?;
        let content = line.split('#').next().unwrap_or_default().trim();
        if content.is_empty() {
            continue;
        }
        let (action, category) =
            content.rsplit_once('=').ok_or(TaxonomyError::MalformedLine { line: idx + 1 })?;
        let action = normalize_action(action);
        if action.is_empty() {
            return Err(TaxonomyError::MalformedLine { line: idx + 1 });
        }
        let category: EventCategory = category.parse().map_err(TaxonomyError::UnknownCategory)?;
        if mapping.insert(action.clone(), category).is_some() {
            return Err(TaxonomyError::DuplicateAction(action));
        }
    }
    if mapping.is_empty() {
        return Err(TaxonomyError::EmptyTaxonomy);
    }
    Ok(ActionTaxonomy { mapping })
}

/// `None` marks an unmapped action.
pub fn map_action(taxonomy: &ActionTaxonomy, action: &str) -> Option<EventCategory> {
    taxonomy.get(action)
}

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("course {0} has no graded students")]
    NoGradedStudents(String),
    #[error("mark {0} outside [0, 10]")]
    OutOfRangeMark(String),
}

/// A mark of exactly 5 passes.
pub fn label_outcome<F: Scalar>(mark: F) -> Result<Outcome, FeatureError> {
    if !(mark >= F::zero() && mark <= F::lit(10.0)) {
        return Err(FeatureError::OutOfRangeMark(mark.to_string()));
    }
    Ok(if mark < F::lit(5.0) { Outcome::Fail } else { Outcome::Pass })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentFeatures<F> {
    pub student_id: String,
    pub learning_pct: F,
    pub communicating_pct: F,
    pub working_pct: F,
    pub evaluating_pct: F,
    pub engagement: F,
    pub outcome: Outcome,
}

impl<F: Scalar> StudentFeatures<F> {
    /// Values in [`OntologyCategory::ALL`] order.
    pub fn values(&self) -> [F; 5] {
        [self.learning_pct, self.communicating_pct, self.working_pct, self.evaluating_pct, self.engagement]
    }

    pub fn get(&self, category: OntologyCategory) -> F {
        self.values()[category as usize]
    }

    pub fn to_instance(&self) -> Instance<F> {
        Instance {
            student_id: self.student_id.clone(),
            values: self.values().into_iter().map(Value::Number).collect(),
            outcome: self.outcome,
        }
    }
}

#[derive(Default)]
struct Activity<'a> {
    per_category: [usize; 4],
    per_action: HashMap<&'a str, usize>,
    total: usize,
    days: BTreeSet<NaiveDate>,
}

fn collect_activity<'a>(course: &'a CourseLog, taxonomy: &ActionTaxonomy) -> HashMap<&'a str, Activity<'a>> {
    let mut by_student: HashMap<&str, Activity> = HashMap::new();
    for event in &course.events {
        let acc = by_student.entry(event.student_id.as_str()).or_default();
        acc.total += 1;
        acc.days.insert(event.date());
        if let Some(category) = map_action(taxonomy, &event.action) {
            acc.per_category[category.index()] += 1;
            *acc.per_action.entry(event.action.as_str()).or_default() += 1;
        }
    }
    by_student
}

fn ratio<F: Scalar>(num: usize, den: usize) -> F {
    if den == 0 {
        F::zero()
    } else {
        F::from_count(num) / F::from_count(den)
    }
}

/// One row per graded student, ordered by student id. Students with events
/// but no mark are skipped.
pub fn student_features<F: Scalar>(
    course: &CourseLog,
    taxonomy: &ActionTaxonomy,
) -> Result<Vec<StudentFeatures<F>>, FeatureError> {
    if course.marks.is_empty() {
        return Err(FeatureError::NoGradedStudents(course.course_code.clone()));
    }
    let activity = collect_activity(course, taxonomy);
    let empty = Activity::default();
    let graded: Vec<(&String, f64, &Activity)> = course
        .marks
        .iter()
        .map(|(s, m)| (s, *m, activity.get(s.as_str()).unwrap_or(&empty)))
        .collect();
    let max_interactions = graded.iter().map(|(_, _, a)| a.total).max().unwrap_or(0);
    let max_days = graded.iter().map(|(_, _, a)| a.days.len()).max().unwrap_or(0);

    let hundred = F::lit(100.0);
    let fifty = F::lit(50.0);
    graded
        .into_iter()
        .map(|(student, mark, act)| {
            let mapped: usize = act.per_category.iter().sum();
            let pct = |c: EventCategory| hundred * ratio::<F>(act.per_category[c.index()], mapped);
            let engagement =
                fifty * (ratio::<F>(act.total, max_interactions) + ratio::<F>(act.days.len(), max_days));
            let outcome = label_outcome(F::from_f64(mark).unwrap_or_else(F::nan))?;
            Ok(StudentFeatures {
                student_id: student.clone(),
                learning_pct: pct(EventCategory::Learning),
                communicating_pct: pct(EventCategory::Communicating),
                working_pct: pct(EventCategory::Working),
                evaluating_pct: pct(EventCategory::Evaluating),
                engagement,
                outcome,
            })
        })
        .collect()
}

/// Numeric five-attribute dataset of a course.
pub fn build_features<F: Scalar>(
    course: &CourseLog,
    taxonomy: &ActionTaxonomy,
) -> Result<FeatureDataset<F>, FeatureError> {
    let rows = student_features(course, taxonomy)?.iter().map(StudentFeatures::to_instance).collect();
    Ok(FeatureDataset {
        course_code: course.course_code.clone(),
        representation: Representation::Numeric,
        attributes: ontology_attributes(),
        rows,
    })
}

/// Low-level baseline: one column per taxonomy action holding the share (0..100)
/// of the student's mapped events spent on that action. The column set is the
/// whole taxonomy so every course shares one schema.
pub fn build_action_features<F: Scalar>(
    course: &CourseLog,
    taxonomy: &ActionTaxonomy,
) -> Result<FeatureDataset<F>, FeatureError> {
    if course.marks.is_empty() {
        return Err(FeatureError::NoGradedStudents(course.course_code.clone()));
    }
    let activity = collect_activity(course, taxonomy);
    let actions: Vec<&str> = taxonomy.iter().map(|(a, _)| a).collect();
    let hundred = F::lit(100.0);
    let rows = course
        .marks
        .iter()
        .map(|(student, mark)| {
            let act = activity.get(student.as_str());
            let mapped = act.map_or(0, |a| a.per_category.iter().sum());
            let values = actions
                .iter()
                .map(|action| {
                    let n = act.and_then(|a| a.per_action.get(action)).copied().unwrap_or(0);
                    Value::Number(hundred * ratio::<F>(n, mapped))
                })
                .collect();
            let outcome = label_outcome(F::from_f64(*mark).unwrap_or_else(F::nan))?;
            Ok(Instance { student_id: student.clone(), values, outcome })
        })
        .collect::<Result<Vec<_>, FeatureError>>()?;
    Ok(FeatureDataset {
        course_code: course.course_code.clone(),
        representation: Representation::Numeric,
        attributes: actions.iter().map(|a| Attribute::new(*a, a.to_uppercase())).collect(),
        rows,
    })
}

/// Which features a course is abstracted into.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureMode {
    /// The five ontology attributes.
    #[default]
    Ontology,
    /// One share per low-level action.
    RawActions,
}

impl FeatureMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMode::Ontology => "ontology",
            FeatureMode::RawActions => "raw-actions",
        }
    }

    pub fn featurize<F: Scalar>(
        self,
        course: &CourseLog,
        taxonomy: &ActionTaxonomy,
    ) -> Result<FeatureDataset<F>, FeatureError> {
        match self {
            FeatureMode::Ontology => build_features(course, taxonomy),
            FeatureMode::RawActions => build_action_features(course, taxonomy),
        }
    }
}

impl std::str::FromStr for FeatureMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ontology" => Ok(FeatureMode::Ontology),
            "raw" | "raw-actions" => Ok(FeatureMode::RawActions),
            other => Err(format!("unknown feature mode `{other}`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_log::{parse_timestamp, LogEvent};
    use proptest::prelude::*;

    fn event(student: &str, action: &str, ts: &str) -> LogEvent {
        LogEvent {
            timestamp: parse_timestamp(ts).unwrap(),
            student_id: student.into(),
            action: action.into(),
            activity_kind: None,
        }
    }

    #[test]
    fn builtin_taxonomy_counts() {
        let tax = ActionTaxonomy::builtin();
        assert_eq!(tax.len(), 55);
        assert_eq!(tax.actions_of(EventCategory::Learning).len(), 15);
        assert_eq!(tax.actions_of(EventCategory::Communicating).len(), 15);
        assert_eq!(tax.actions_of(EventCategory::Working).len(), 11);
        assert_eq!(tax.actions_of(EventCategory::Evaluating).len(), 14);
    }

    #[test]
    fn spot_mappings() {
        let tax = ActionTaxonomy::builtin();
        assert_eq!(map_action(&tax, "forum add post"), Some(EventCategory::Communicating));
        assert_eq!(map_action(&tax, "quiz attempt"), Some(EventCategory::Evaluating));
        assert_eq!(map_action(&tax, "assignment upload"), Some(EventCategory::Working));
        assert_eq!(map_action(&tax, "resource view"), Some(EventCategory::Learning));
        assert_eq!(map_action(&tax, "totally unknown action"), None);
    }

    #[test]
    fn taxonomy_file_errors() {
        let dup = "quiz view = EVALUATING\nquiz view = LEARNING\n";
        assert_eq!(load_taxonomy(dup.as_bytes()), Err(TaxonomyError::DuplicateAction("quiz view".into())));
        let unknown = "chat talk = SOCIALIZING\n";
        assert_eq!(load_taxonomy(unknown.as_bytes()), Err(TaxonomyError::UnknownCategory("SOCIALIZING".into())));
        assert_eq!(load_taxonomy("# nothing\n\n".as_bytes()), Err(TaxonomyError::EmptyTaxonomy));
        assert_eq!(load_taxonomy("no separator\n".as_bytes()), Err(TaxonomyError::MalformedLine { line: 1 }));
        let ok = load_taxonomy("  Quiz   View = evaluating # trailing\n".as_bytes()).unwrap();
        assert_eq!(ok.get("quiz view"), Some(EventCategory::Evaluating));
    }

    #[test]
    fn outcome_boundaries() {
        assert_eq!(label_outcome(4.9f64), Ok(Outcome::Fail));
        assert_eq!(label_outcome(7.0f64), Ok(Outcome::Pass));
        assert_eq!(label_outcome(5.0f32), Ok(Outcome::Pass));
        assert!(matches!(label_outcome(10.5f64), Err(FeatureError::OutOfRangeMark(_))));
        assert!(label_outcome(f64::NAN).is_err());
    }

    #[test]
    fn hand_counted_percentages() {
        let events = vec![
            event("s1", "quiz attempt", "2020-01-01 10:00:00"),
            event("s1", "quiz view", "2020-01-01 10:05:00"),
            event("s1", "forum add post", "2020-01-02 10:00:00"),
            event("s1", "course view", "2020-01-02 11:00:00"),
        ];
        let course = CourseLog::new("C", events, BTreeMap::from([("s1".to_string(), 6.0)]));
        let rows = student_features::<f64>(&course, &ActionTaxonomy::builtin()).unwrap();
        let s = &rows[0];
        assert_eq!(s.evaluating_pct, 50.0);
        assert_eq!(s.learning_pct, 25.0);
        assert_eq!(s.communicating_pct, 25.0);
        assert_eq!(s.working_pct, 0.0);
        assert_eq!(s.engagement, 100.0);
    }

    #[test]
    fn silent_student_and_single_student_engagement() {
        let mut events: Vec<LogEvent> = (0..10)
            .map(|i| event("s1", "page view", &format!("2020-01-0{} 08:00:0{}", 1 + i % 3, i)))
            .collect();
        events.push(event("ghost", "page view", "2020-01-01 08:00:00"));
        let marks = BTreeMap::from([("s1".to_string(), 8.0), ("s2".to_string(), 7.0)]);
        let course = CourseLog::new("C", events, marks);
        let rows = student_features::<f64>(&course, &ActionTaxonomy::builtin()).unwrap();
        assert_eq!(rows.len(), 2, "ungraded student dropped");
        assert_eq!(rows[0].engagement, 50.0 * (10.0 / 10.0 + 3.0 / 3.0));
        let silent = &rows[1];
        assert_eq!(silent.values(), [0.0; 5]);
        assert_eq!(silent.outcome, Outcome::Pass);
    }

    #[test]
    fn unmapped_events_count_only_towards_engagement() {
        let events = vec![
            event("a", "page view", "2020-01-01 08:00:00"),
            event("a", "mystery click", "2020-01-01 08:01:00"),
            event("b", "page view", "2020-01-01 08:00:00"),
        ];
        let marks = BTreeMap::from([("a".to_string(), 2.0), ("b".to_string(), 9.0)]);
        let rows = student_features::<f64>(&CourseLog::new("C", events, marks), &ActionTaxonomy::builtin()).unwrap();
        assert_eq!(rows[0].learning_pct, 100.0);
        assert_eq!(rows[0].engagement, 100.0);
        assert_eq!(rows[1].engagement, 50.0 * (0.5 + 1.0));
    }

    #[test]
    fn no_graded_students() {
        let course = CourseLog::new("C", vec![event("a", "page view", "2020-01-01 08:00:00")], BTreeMap::new());
        assert_eq!(
            build_features::<f64>(&course, &ActionTaxonomy::builtin()).unwrap_err(),
            FeatureError::NoGradedStudents("C".into())
        );
    }

    #[test]
    fn action_features_share_one_schema() {
        let tax = ActionTaxonomy::builtin();
        let events = vec![
            event("a", "quiz attempt", "2020-01-01 08:00:00"),
            event("a", "quiz attempt", "2020-01-01 09:00:00"),
            event("a", "page view", "2020-01-01 09:30:00"),
            event("a", "mystery", "2020-01-01 09:40:00"),
        ];
        let ds = build_action_features::<f64>(
            &CourseLog::new("C", events, BTreeMap::from([("a".to_string(), 3.0)])),
            &tax,
        )
        .unwrap();
        assert_eq!(ds.attributes.len(), tax.len());
        let col = ds.attributes.iter().position(|a| a.key == "quiz attempt").unwrap();
        let value = ds.rows[0].values[col].number().unwrap();
        assert!((value - 200.0 / 3.0).abs() < 1e-12);
    }

    fn arb_course() -> impl Strategy<Value = CourseLog> {
        let actions: Vec<String> = ActionTaxonomy::builtin()
            .iter()
            .map(|(a, _)| a.to_string())
            .chain(["unknown thing".to_string()])
            .collect();
        let n = actions.len();
        (
            proptest::collection::vec((0usize..6, 0usize..n, 0i64..30 * 86_400), 0..80),
            proptest::collection::btree_map("s[0-5]", 0.0f64..=10.0, 1..6),
        )
            .prop_map(move |(raw, marks)| {
                let base = parse_timestamp("2020-02-01 00:00:00").unwrap();
                let events = raw
                    .into_iter()
                    .map(|(s, a, secs)| LogEvent {
                        timestamp: base + chrono::Duration::seconds(secs),
                        student_id: format!("s{s}"),
                        action: actions[a].clone(),
                        activity_kind: None,
                    })
                    .collect();
                CourseLog::new("P", events, marks)
            })
    }

    proptest! {
        #[test]
        fn percentages_partition_and_engagement_bounded(course in arb_course()) {
            let tax = ActionTaxonomy::builtin();
            let rows = student_features::<f64>(&course, &tax).unwrap();
            for r in &rows {
                let total = r.learning_pct + r.communicating_pct + r.working_pct + r.evaluating_pct;
                prop_assert!(total.abs() < 1e-9 || (total - 100.0).abs() < 1e-9, "sum {}", total);
                for v in r.values() {
                    prop_assert!((0.0..=100.0).contains(&v));
                }
            }
        }

        #[test]
        fn duplicating_a_students_events_keeps_composition(course in arb_course(), who in 0usize..6) {
            let tax = ActionTaxonomy::builtin();
            let student = format!("s{who}");
            let mut events = course.events.clone();
            events.extend(course.events.iter().filter(|e| e.student_id == student).cloned());
            let doubled = CourseLog::new(course.course_code.clone(), events, course.marks.clone());
            let before = student_features::<f64>(&course, &tax).unwrap();
            let after = student_features::<f64>(&doubled, &tax).unwrap();
            for (b, a) in before.iter().zip(&after).filter(|(b, _)| b.student_id == student) {
                for k in 0..4 {
                    prop_assert!((b.values()[k] - a.values()[k]).abs() < 1e-9);
                }
                prop_assert!(a.engagement >= b.engagement - 1e-9);
            }
        }
    }
}
