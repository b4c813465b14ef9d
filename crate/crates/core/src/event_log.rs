//! Ingestion of LMS log exports and final-mark files.
//!
//! Log CSV: `course,timestamp,student_id,action,activity_kind`, timestamps as
//! `YYYY-MM-DD HH:MM:SS` (an explicit UTC offset is accepted and converted).
//! Marks CSV: `student_id,final_mark` with marks in `[0, 10]`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const LOG_HEADER: [&str; 5] = ["course", "timestamp", "student_id", "action", "activity_kind"];
pub const MARKS_HEADER: [&str; 2] = ["student_id", "final_mark"];

const TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

/// Activity modules. Anything listed here counts towards the usage level.
pub const ACTIVITY_KINDS: [&str; 15] = [
    "assignment",
    "quiz",
    "forum",
    "chat",
    "choice",
    "database",
    "glossary",
    "lesson",
    "survey",
    "wiki",
    "workshop",
    "hotpot",
    "questionnaire",
    "teamwork",
    "scorm",
];

/// Resource modules and platform pages; never counted as activities.
pub const NON_ACTIVITY_KINDS: [&str; 11] = [
    "page", "url", "folder", "book", "resource", "label", "imscp", "course", "user", "blog", "system",
];

#[derive(Debug, Error, PartialEq)]
pub enum IngestError {
    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("student {0} is graded more than once")]
    DuplicateMark(String),
    #[error("log contains no event rows for course {0}")]
    EmptyLog(String),
    #[error("missing header column `{0}`")]
    MissingColumn(&'static str),
    #[error("csv: {0}")]
    Csv(String),
}

impl From<csv::Error> for IngestError {
    fn from(e: csv::Error) -> Self {
        IngestError::Csv(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LogEvent {
    /// UTC, second resolution.
    pub timestamp: NaiveDateTime,
    pub student_id: String,
    /// Normalized action name, see [`normalize_action`].
    pub action: String,
    pub activity_kind: Option<String>,
}

impl LogEvent {
    pub fn date(&self) -> NaiveDate {
        self.timestamp.date()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CourseLog {
    pub course_code: String,
    /// Sorted ascending by timestamp.
    pub events: Vec<LogEvent>,
    pub marks: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum UsageLevel {
    Low,
    Medium,
    High,
}

impl UsageLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            UsageLevel::Low => "low",
            UsageLevel::Medium => "medium",
            UsageLevel::High => "high",
        }
    }
}

impl std::fmt::Display for UsageLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            UsageLevel::Low => "Low",
            UsageLevel::Medium => "Medium",
            UsageLevel::High => "High",
        })
    }
}

impl std::str::FromStr for UsageLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "low" => Ok(UsageLevel::Low),
            "medium" => Ok(UsageLevel::Medium),
            "high" => Ok(UsageLevel::High),
            other => Err(format!("unknown usage level `{other}`")),
        }
    }
}

/// Counters gathered while reading a log export.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub event_rows: usize,
    /// Rows whose `course` column names a different course.
    pub foreign_rows: usize,
    pub graded_students: usize,
    /// Students with events but no final mark.
    pub ungraded_students: usize,
}

/// Lowercases and collapses every run of whitespace to a single space.
pub fn normalize_action(raw: &str) -> String {
    raw.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    let raw = raw.trim();
    if let Ok(t) = NaiveDateTime::parse_from_str(raw, TIMESTAMP_FORMAT) {
        return Some(t);
    }
    for fmt in ["%Y-%m-%d %H:%M:%S%:z", "%Y-%m-%d %H:%M:%S%z", "%Y-%m-%d %H:%M:%S %z"] {
        if let Ok(t) = DateTime::parse_from_str(raw, fmt) {
            return Some(t.naive_utc());
        }
    }
    DateTime::parse_from_rfc3339(raw).ok().map(|t| t.naive_utc())
}

pub fn format_timestamp(t: &NaiveDateTime) -> String {
    t.format(TIMESTAMP_FORMAT).to_string()
}

fn column(headers: &csv::StringRecord, name: &'static str) -> Result<usize, IngestError> {
    headers
        .iter()
        .position(|h| h.trim().eq_ignore_ascii_case(name))
        .ok_or(IngestError::MissingColumn(name))
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source)
}

fn read_events<R: Read>(
    source: R,
    course_code: &str,
    stats: &mut IngestStats,
) -> Result<Vec<LogEvent>, IngestError> {
    let mut rdr = reader(source);
    let headers = rdr.headers()?.clone();
    let course_col = column(&headers, "course")?;
    let ts_col = column(&headers, "timestamp")?;
    let student_col = column(&headers, "student_id")?;
    let action_col = column(&headers, "action")?;
    let kind_col = column(&headers, "activity_kind").ok();

    let mut events = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = line_of(&record);
        let field = |idx: usize, name: &str| -> Result<&str, IngestError> {
            match record.get(idx) {
                Some(v) if !v.is_empty() => Ok(v),
                _ => Err(IngestError::MalformedRow { line, reason: format!("missing {name}") }),
            }
        };
        let course = field(course_col, "course")?;
        if course != course_code {
            stats.foreign_rows += 1;
            continue;
        }
        let raw_ts = field(ts_col, "timestamp")?;
        let timestamp = parse_timestamp(raw_ts).ok_or_else(|| IngestError::MalformedRow {
            line,
            reason: format!("unparsable timestamp `{raw_ts}`"),
        })?;
        let student_id = field(student_col, "student_id")?.to_string();
        let action = normalize_action(field(action_col, "action")?);
        if action.is_empty() {
            return Err(IngestError::MalformedRow { line, reason: "missing action".into() });
        }
        let activity_kind = kind_col
            .and_then(|c| record.get(c))
            .map(normalize_action)
            .filter(|k| !k.is_empty());
        events.push(LogEvent { timestamp, student_id, action, activity_kind });
    }
    stats.event_rows = events.len();
    Ok(events)
}

fn read_marks<R: Read>(source: R) -> Result<BTreeMap<String, f64>, IngestError> {
    let mut rdr = reader(source);
    let headers = rdr.headers()?.clone();
    let student_col = column(&headers, "student_id")?;
    let mark_col = column(&headers, "final_mark")?;

    let mut marks = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = line_of(&record);
        let student = record.get(student_col).unwrap_or_default();
        if student.is_empty() {
            return Err(IngestError::MalformedRow { line, reason: "missing student_id".into() });
        }
        let raw = record.get(mark_col).unwrap_or_default();
        let mark: f64 = raw.parse().map_err(|_| IngestError::MalformedRow {
            line,
            reason: format!("unparsable mark `{raw}`"),
        })?;
        if !(0.0..=10.0).contains(&mark) {
            return Err(IngestError::MalformedRow {
                line,
                reason: format!("mark {mark} outside [0, 10]"),
            });
        }
        if marks.insert(student.to_string(), mark).is_some() {
            return Err(IngestError::DuplicateMark(student.to_string()));
        }
    }
    Ok(marks)
}

/// Reads one course from a log export and its marks file.
///
/// Rows belonging to other courses are skipped and counted in the returned stats.
pub fn parse_course_log_with_stats<L: Read, M: Read>(
    log_source: L,
    marks_source: M,
    course_code: &str,
) -> Result<(CourseLog, IngestStats), IngestError> {
    let mut stats = IngestStats::default();
    let mut events = read_events(log_source, course_code, &mut stats)?;
    if events.is_empty() {
        return Err(IngestError::EmptyLog(course_code.to_string()));
    }
    let marks = read_marks(marks_source)?;
    events.sort();

    let logged: BTreeSet<&str> = events.iter().map(|e| e.student_id.as_str()).collect();
    stats.graded_students = marks.len();
    stats.ungraded_students = logged.iter().filter(|s| !marks.contains_key(**s)).count();
    if stats.ungraded_students > 0 {
        log::warn!(
            "{course_code}: {} logged students have no final mark and will be dropped",
            stats.ungraded_students
        );
    }
    Ok((CourseLog { course_code: course_code.to_string(), events, marks }, stats))
}

pub fn parse_course_log<L: Read, M: Read>(
    log_source: L,
    marks_source: M,
    course_code: &str,
) -> Result<CourseLog, IngestError> {
    parse_course_log_with_stats(log_source, marks_source, course_code).map(|(c, _)| c)
}

impl CourseLog {
    /// Builds a course from already-normalized parts, sorting the events.
    pub fn new(course_code: impl Into<String>, mut events: Vec<LogEvent>, marks: BTreeMap<String, f64>) -> Self {
        events.sort();
        CourseLog { course_code: course_code.into(), events, marks }
    }

    pub fn write_log_csv<W: Write>(&self, sink: W) -> Result<(), IngestError> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(LOG_HEADER)?;
        for e in &self.events {
            w.write_record([
                self.course_code.as_str(),
                &format_timestamp(&e.timestamp),
                &e.student_id,
                &e.action,
                e.activity_kind.as_deref().unwrap_or(""),
            ])?;
        }
        w.flush().map_err(|e| IngestError::Csv(e.to_string()))
    }

    /// Marks are written in shortest round-trip form so re-parsing is exact.
    pub fn write_marks_csv<W: Write>(&self, sink: W) -> Result<(), IngestError> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(MARKS_HEADER)?;
        for (student, mark) in &self.marks {
            w.write_record([student.as_str(), &mark.to_string()])?;
        }
        w.flush().map_err(|e| IngestError::Csv(e.to_string()))
    }

    /// Students with at least one event and no final mark.
    pub fn ungraded_students(&self) -> BTreeSet<&str> {
        self.events
            .iter()
            .map(|e| e.student_id.as_str())
            .filter(|s| !self.marks.contains_key(*s))
            .collect()
    }

    pub fn usage_level(&self) -> UsageLevel {
        classify_usage_level(distinct_activity_types(self).len())
    }
}

/// Distinct activity modules used in the course. Resources and platform pages
/// are excluded; kinds outside both vocabularies count as activities.
pub fn distinct_activity_types(course: &CourseLog) -> BTreeSet<String> {
    let mut kinds = BTreeSet::new();
    for kind in course.events.iter().filter_map(|e| e.activity_kind.as_deref()) {
        if NON_ACTIVITY_KINDS.contains(&kind) {
            continue;
        }
        if !ACTIVITY_KINDS.contains(&kind) && !kinds.contains(kind) {
            log::info!("{}: unknown activity kind `{kind}` counted as an activity", course.course_code);
        }
        kinds.insert(kind.to_string());
    }
    kinds
}

pub fn classify_usage_level(activity_type_count: usize) -> UsageLevel {
    match activity_type_count {
        0 | 1 => UsageLevel::Low,
        2 => UsageLevel::Medium,
        _ => UsageLevel::High,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MARKS: &str = "student_id,final_mark\ns1,7.5\ns2,3\n";

    fn course_from(log: &str, marks: &str) -> Result<CourseLog, IngestError> {
        parse_course_log(log.as_bytes(), marks.as_bytes(), "ICS2")
    }

    #[test]
    fn three_rows_are_sorted() {
        let log = "course,timestamp,student_id,action,activity_kind\n\
                   ICS2,2020-03-02 10:00:00,s1,quiz attempt,quiz\n\
                   ICS2,2020-03-01 09:00:00,s2,course view,course\n\
                   ICS2,2020-03-01 11:30:00,s1,forum add post,forum\n";
        let course = course_from(log, MARKS).unwrap();
        assert_eq!(course.events.len(), 3);
        assert!(course.events.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
        assert_eq!(course.events[0].student_id, "s2");
        assert_eq!(course.marks.len(), 2);
    }

    #[test]
    fn mark_above_ten_is_malformed() {
        let log = "course,timestamp,student_id,action,activity_kind\nICS2,2020-03-02 10:00:00,s1,quiz attempt,quiz\n";
        let err = course_from(log, "student_id,final_mark\ns1,11\n").unwrap_err();
        assert!(matches!(err, IngestError::MalformedRow { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn action_normalization_collapses_case_and_space() {
        assert_eq!(normalize_action("Quiz  Attempt"), normalize_action("quiz attempt"));
        assert_eq!(normalize_action("  Forum\tAdd   Post "), "forum add post");
        let log = "course,timestamp,student_id,action,activity_kind\n\
                   ICS2,2020-03-02 10:00:00,s1,Quiz  Attempt,Quiz\n\
                   ICS2,2020-03-02 10:00:01,s1,quiz attempt,quiz\n";
        let course = course_from(log, MARKS).unwrap();
        assert_eq!(course.events[0].action, course.events[1].action);
        assert_eq!(course.events[0].activity_kind.as_deref(), Some("quiz"));
    }

    #[test]
    fn duplicate_mark_and_empty_log() {
        let log = "course,timestamp,student_id,action,activity_kind\nICS2,2020-03-02 10:00:00,s1,quiz attempt,quiz\n";
        assert_eq!(
            course_from(log, "student_id,final_mark\ns1,5\ns1,6\n").unwrap_err(),
            IngestError::DuplicateMark("s1".into())
        );
        let empty = "course,timestamp,student_id,action,activity_kind\n";
        assert_eq!(course_from(empty, MARKS).unwrap_err(), IngestError::EmptyLog("ICS2".into()));
    }

    #[test]
    fn bad_timestamp_and_missing_field() {
        let log = "course,timestamp,student_id,action,activity_kind\nICS2,yesterday,s1,quiz attempt,quiz\n";
        assert!(matches!(course_from(log, MARKS), Err(IngestError::MalformedRow { line: 2, .. })));
        let log = "course,timestamp,student_id,action,activity_kind\nICS2,2020-03-02 10:00:00,,quiz attempt,quiz\n";
        assert!(matches!(course_from(log, MARKS), Err(IngestError::MalformedRow { .. })));
    }

    #[test]
    fn offsets_convert_to_utc_and_quotes_are_honoured() {
        let log = "course,timestamp,student_id,action,activity_kind\n\
                   ICS2,2020-03-02 01:00:00+02:00,s1,\"forum, add post\",forum\n";
        let course = course_from(log, MARKS).unwrap();
        assert_eq!(format_timestamp(&course.events[0].timestamp), "2020-03-01 23:00:00");
        assert_eq!(course.events[0].action, "forum, add post");
    }

    #[test]
    fn foreign_rows_are_skipped_and_ungraded_counted() {
        let log = "course,timestamp,student_id,action,activity_kind\n\
                   ICS2,2020-03-02 10:00:00,s1,quiz attempt,quiz\n\
                   HCI,2020-03-02 10:00:00,s1,quiz attempt,quiz\n\
                   ICS2,2020-03-02 10:00:00,s9,quiz attempt,quiz\n";
        let (course, stats) = parse_course_log_with_stats(log.as_bytes(), MARKS.as_bytes(), "ICS2").unwrap();
        assert_eq!(stats.foreign_rows, 1);
        assert_eq!(stats.ungraded_students, 1);
        assert_eq!(course.ungraded_students().into_iter().collect::<Vec<_>>(), vec!["s9"]);
    }

    fn with_kinds(kinds: &[&str]) -> CourseLog {
        let t = parse_timestamp("2020-01-01 00:00:00").unwrap();
        let events = kinds
            .iter()
            .map(|k| LogEvent {
                timestamp: t,
                student_id: "s".into(),
                action: "x".into(),
                activity_kind: Some((*k).into()),
            })
            .collect();
        CourseLog::new("C", events, BTreeMap::new())
    }

    #[test]
    fn activity_types_follow_set_semantics() {
        let kinds = distinct_activity_types(&with_kinds(&["quiz", "forum", "quiz"]));
        assert_eq!(kinds, BTreeSet::from(["forum".to_string(), "quiz".to_string()]));
        assert!(distinct_activity_types(&with_kinds(&["page", "url"])).is_empty());
        assert_eq!(distinct_activity_types(&with_kinds(&["assignment", "forum", "quiz"])).len(), 3);
        // unknown kinds count as activities
        assert_eq!(distinct_activity_types(&with_kinds(&["mystery", "page"])).len(), 1);
    }

    #[test]
    fn usage_level_thresholds() {
        assert_eq!(classify_usage_level(0), UsageLevel::Low);
        assert_eq!(classify_usage_level(1), UsageLevel::Low);
        assert_eq!(classify_usage_level(2), UsageLevel::Medium);
        assert_eq!(classify_usage_level(3), UsageLevel::High);
        assert_eq!(classify_usage_level(7), UsageLevel::High);
        assert_eq!(with_kinds(&["assignment", "forum", "quiz"]).usage_level(), UsageLevel::High);
    }

    fn arb_course() -> impl Strategy<Value = CourseLog> {
        let event = (0i64..10_000_000, 0u8..6, 0usize..4, proptest::option::of(0usize..4));
        let actions = ["quiz attempt", "forum add post", "course view", "odd, \"quoted\" action"];
        let kinds = ["quiz", "forum", "course", "page"];
        (
            proptest::collection::vec(event, 1..40),
            proptest::collection::btree_map("s[0-5]", 0.0f64..=10.0, 0..6),
        )
            .prop_map(move |(raw, marks)| {
                let base = parse_timestamp("2019-09-01 00:00:00").unwrap();
                let events = raw
                    .into_iter()
                    .map(|(secs, s, a, k)| LogEvent {
                        timestamp: base + chrono::Duration::seconds(secs),
                        student_id: format!("s{s}"),
                        action: actions[a].to_string(),
                        activity_kind: k.map(|k| kinds[k].to_string()),
                    })
                    .collect();
                CourseLog::new("PM2", events, marks)
            })
    }

    proptest! {
        #[test]
        fn serialization_round_trips(course in arb_course()) {
            let (mut log, mut marks) = (Vec::new(), Vec::new());
            course.write_log_csv(&mut log).unwrap();
            course.write_marks_csv(&mut marks).unwrap();
            let back = parse_course_log(log.as_slice(), marks.as_slice(), "PM2").unwrap();
            prop_assert_eq!(back, course);
        }

        #[test]
        fn usage_level_is_monotone(a in 0usize..20, b in 0usize..20) {
            let (lo, hi) = (a.min(b), a.max(b));
            prop_assert!(classify_usage_level(lo) <= classify_usage_level(hi));
        }
    }
}
