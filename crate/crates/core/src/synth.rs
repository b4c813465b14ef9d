//! Seeded synthetic courses with controllable class-conditional behavior.
//!
//! A spec is a plain `key = value` file:
//!
//! ```text
//! # lines starting with '#' are comments
//! course_code    = ICS2
//! n_students     = 40
//! pass_rate      = 0.5
//! activity_kinds = quiz, forum, assignment
//! days_range     = 4, 12
//! noise          = 0.2
//! seed           = 7
//! pass.COMMUNICATING = 20
//! fail.COMMUNICATING = 2
//! ```
//!
//! Intensities are mean event counts per category; categories not listed
//! are 0. Optional keys:
//!
//! * `start_date = YYYY-MM-DD` — first day of the term (default 2016-09-12);
//! * `term_days = n` — length of the term in days (default 120);
//! * `actions_per_category = k` — the course uses only `k` seeded actions of
//!   each category instead of all of them;
//! * `profile.<name> = <Pass|Fail> <count>` together with
//!   `profile.<name>.<CATEGORY> = x` and optionally
//!   `profile.<name>.days_range = a, b`: an explicit mixture of student
//!   groups. With profiles, `n_students`, `pass_rate` and the
//!   `pass.`/`fail.` keys must be absent.
//!
//! An action's activity kind is its first word. Actions whose kind is a
//! resource or platform page are always available; activity actions only when
//! their kind is listed in `activity_kinds`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::{Duration, NaiveDate};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::dataset::Outcome;
use crate::event_log::{CourseLog, LogEvent, ACTIVITY_KINDS, NON_ACTIVITY_KINDS};
use crate::ontology::{ActionTaxonomy, EventCategory};

const DEFAULT_START: (i32, u32, u32) = (2016, 9, 12);
const DEFAULT_TERM_DAYS: u32 = 120;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
}

fn invalid(reason: impl Into<String>) -> SynthError {
    SynthError::InvalidSpec(reason.into())
}

/// A group of students sharing one behavior.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub name: String,
    pub outcome: Outcome,
    pub count: usize,
    /// Mean event count per [`EventCategory`], by index.
    pub intensity: [f64; 4],
    /// Overrides the course's `days_range`.
    pub days_range: Option<(u32, u32)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CourseSpec {
    pub course_code: String,
    pub n_students: usize,
    pub pass_rate: f64,
    pub activity_kinds: BTreeSet<String>,
    pub intensity: BTreeMap<Outcome, [f64; 4]>,
    pub days_range: (u32, u32),
    pub noise: f64,
    pub seed: u64,
    pub start_date: NaiveDate,
    pub term_days: u32,
    pub actions_per_category: Option<usize>,
    /// Empty unless the spec declares an explicit mixture.
    pub profiles: Vec<Profile>,
}

impl CourseSpec {
    /// Simple two-profile spec with default term settings.
    pub fn new(course_code: impl Into<String>, n_students: usize, pass_rate: f64, seed: u64) -> Self {
        let (y, m, d) = DEFAULT_START;
        CourseSpec {
            course_code: course_code.into(),
            n_students,
            pass_rate,
            activity_kinds: BTreeSet::new(),
            intensity: BTreeMap::from([(Outcome::Pass, [0.0; 4]), (Outcome::Fail, [0.0; 4])]),
            days_range: (1, 1),
            noise: 0.0,
            seed,
            start_date: NaiveDate::from_ymd_opt(y, m, d).expect("valid default date"),
            term_days: DEFAULT_TERM_DAYS,
            actions_per_category: None,
            profiles: Vec::new(),
        }
    }

    pub fn with_intensity(mut self, outcome: Outcome, category: EventCategory, mean: f64) -> Self {
        self.intensity.entry(outcome).or_insert([0.0; 4])[category.index()] = mean;
        self
    }

    pub fn with_activity_kinds<'a>(mut self, kinds: impl IntoIterator<Item = &'a str>) -> Self {
        self.activity_kinds = kinds.into_iter().map(str::to_string).collect();
        self
    }

    /// The student groups to generate, in order. Simple specs give one Pass
    /// group of `round(n * pass_rate)` students and one Fail group.
    pub fn plan(&self) -> Vec<Profile> {
        if !self.profiles.is_empty() {
            return self.profiles.clone();
        }
        let n_pass = (self.n_students as f64 * self.pass_rate).round() as usize;
        [(Outcome::Pass, n_pass), (Outcome::Fail, self.n_students - n_pass)]
            .into_iter()
            .map(|(outcome, count)| Profile {
                name: outcome.as_str().to_ascii_lowercase(),
                outcome,
                count,
                intensity: self.intensity.get(&outcome).copied().unwrap_or([0.0; 4]),
                days_range: None,
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.course_code.trim().is_empty() {
            return Err(invalid("course_code is empty"));
        }
        let check_days = |(lo, hi): (u32, u32), what: &str| {
            if lo == 0 || lo > hi {
                Err(invalid(format!("{what} must satisfy 1 <= min <= max, got {lo}, {hi}")))
            } else if hi > self.term_days {
                Err(invalid(format!("{what} max {hi} exceeds term_days {}", self.term_days)))
            } else {
                Ok(())
            }
        };
        check_days(self.days_range, "days_range")?;
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(invalid(format!("noise must be a finite value >= 0, got {}", self.noise)));
        }
        if self.actions_per_category == Some(0) {
            return Err(invalid("actions_per_category must be positive"));
        }
        if let Some(kind) = self.activity_kinds.iter().find(|k| !ACTIVITY_KINDS.contains(&k.as_str())) {
            return Err(invalid(format!("`{kind}` is not an activity kind")));
        }
        if self.profiles.is_empty() {
            if self.n_students == 0 {
                return Err(invalid("n_students must be positive"));
            }
            if !(self.pass_rate > 0.0 && self.pass_rate < 1.0) {
                return Err(invalid(format!("pass_rate must lie in (0, 1), got {}", self.pass_rate)));
            }
        }
        let plan = self.plan();
        if plan.iter().map(|p| p.count).sum::<usize>() == 0 {
            return Err(invalid("no students"));
        }
        for outcome in [Outcome::Pass, Outcome::Fail] {
            let groups: Vec<&Profile> = plan.iter().filter(|p| p.outcome == outcome).collect();
            if !groups.is_empty() && groups.iter().all(|p| p.intensity.iter().all(|&x| x <= 0.0)) {
                return Err(invalid(format!("{outcome} students have no category with positive intensity")));
            }
        }
        for p in &plan {
            if let Some(x) = p.intensity.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
                return Err(invalid(format!("profile {}: intensity {x} is not a finite value >= 0", p.name)));
            }
            if let Some(days) = p.days_range {
                check_days(days, &format!("profile {} days_range", p.name))?;
            }
        }
        Ok(())
    }

    /// Taxonomy actions this course can log, per category, before any
    /// `actions_per_category` subsetting.
    pub fn available_actions<'t>(&self, taxonomy: &'t ActionTaxonomy) -> [Vec<&'t str>; 4] {
        EventCategory::ALL.map(|c| {
            taxonomy
                .actions_of(c)
                .into_iter()
                .filter(|a| {
                    let kind = activity_kind(a);
                    NON_ACTIVITY_KINDS.contains(&kind) || self.activity_kinds.contains(kind)
                })
                .collect()
        })
    }
}

/// First word of an action name.
pub fn activity_kind(action: &str) -> &str {
    action.split_whitespace().next().unwrap_or("")
}

fn parse_days(value: &str) -> Result<(u32, u32), String> {
    let parts: Vec<&str> = value.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
    match parts.as_slice() {
        [lo, hi] => Ok((lo.parse().map_err(|_| format!("`{lo}` is not a day count"))?, hi.parse().map_err(|_| format!("`{hi}` is not a day count"))?)),
        _ => Err(format!("expected `min, max`, got `{value}`")),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("`{value}` is not a valid {key}"))
}

impl std::str::FromStr for CourseSpec {
    type Err = SynthError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut spec = CourseSpec::new("", 0, 0.0, 0);
        let (mut saw_code, mut saw_n, mut saw_rate, mut saw_seed, mut saw_intensity) = (false, false, false, false, false);
        let mut profiles: BTreeMap<String, Profile> = BTreeMap::new();
        let mut profile_order: Vec<String> = Vec::new();

        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let at = |reason: String| invalid(format!("line {}: {reason}", i + 1));
            let (key, value) = line.split_once('=').ok_or_else(|| at("expected `key = value`".into()))?;
            let (key, value) = (key.trim(), value.trim());
            let parts: Vec<&str> = key.split('.').collect();
            match parts.as_slice() {
                ["course_code"] => {
                    spec.course_code = value.to_string();
                    saw_code = true;
                }
                ["n_students"] => {
                    spec.n_students = parse_num(key, value).map_err(at)?;
                    saw_n = true;
                }
                ["pass_rate"] => {
                    spec.pass_rate = parse_num(key, value).map_err(at)?;
                    saw_rate = true;
                }
                ["activity_kinds"] => {
                    spec.activity_kinds = value
                        .split(',')
                        .map(|k| k.trim().to_ascii_lowercase())
                        .filter(|k| !k.is_empty())
                        .collect();
                }
                ["days_range"] => spec.days_range = parse_days(value).map_err(at)?,
                ["noise"] => spec.noise = parse_num(key, value).map_err(at)?,
                ["seed"] => {
                    spec.seed = parse_num(key, value).map_err(at)?;
                    saw_seed = true;
                }
                ["start_date"] => {
                    spec.start_date = NaiveDate::parse_from_str(value, "%Y-%m-%d")
                        .map_err(|_| at(format!("`{value}` is not a YYYY-MM-DD date")))?;
                }
                ["term_days"] => spec.term_days = parse_num(key, value).map_err(at)?,
                ["actions_per_category"] => spec.actions_per_category = Some(parse_num(key, value).map_err(at)?),
                [outcome @ ("pass" | "fail"), category] => {
                    let outcome: Outcome = outcome.parse().map_err(at)?;
                    let category: EventCategory =
                        category.parse().map_err(|c| at(format!("unknown category `{c}`")))?;
                    let mean = parse_num("intensity", value).map_err(at)?;
                    spec = spec.with_intensity(outcome, category, mean);
                    saw_intensity = true;
                }
                ["profile", name] => {
                    let mut words = value.split_whitespace();
                    let (Some(outcome), Some(count), None) = (words.next(), words.next(), words.next()) else {
                        return Err(at(format!("expected `<Pass|Fail> <count>`, got `{value}`")));
                    };
                    let outcome: Outcome = outcome.parse().map_err(at)?;
                    let count = parse_num("student count", count).map_err(at)?;
                    if !profiles.contains_key(*name) {
                        profile_order.push(name.to_string());
                    }
                    let p = profiles.entry(name.to_string()).or_insert_with(|| Profile {
                        name: name.to_string(),
                        outcome,
                        count,
                        intensity: [0.0; 4],
                        days_range: None,
                    });
                    p.outcome = outcome;
                    p.count = count;
                }
                ["profile", name, field] => {
                    let p = profiles
                        .get_mut(*name)
                        .ok_or_else(|| at(format!("profile `{name}` must be declared before its fields")))?;
                    if *field == "days_range" {
                        p.days_range = Some(parse_days(value).map_err(at)?);
                    } else {
                        let category: EventCategory =
                            field.parse().map_err(|c| at(format!("unknown category `{c}`")))?;
                        p.intensity[category.index()] = parse_num("intensity", value).map_err(at)?;
                    }
                }
                _ => return Err(at(format!("unknown key `{key}`"))),
            }
        }

        if !saw_code {
            return Err(invalid("missing course_code"));
        }
        if !saw_seed {
            return Err(invalid("missing seed"));
        }
        if profiles.is_empty() {
            if !saw_n || !saw_rate {
                return Err(invalid("n_students and pass_rate are required"));
            }
        } else {
            if saw_n || saw_rate || saw_intensity {
                return Err(invalid("profiles cannot be combined with n_students, pass_rate or pass./fail. intensities"));
            }
            spec.profiles = profile_order.into_iter().map(|n| profiles.remove(&n).expect("declared")).collect();
            spec.n_students = spec.profiles.iter().map(|p| p.count).sum();
            let n_pass = spec.profiles.iter().filter(|p| p.outcome == Outcome::Pass).map(|p| p.count).sum::<usize>();
            spec.pass_rate = if spec.n_students == 0 { 0.0 } else { n_pass as f64 / spec.n_students as f64 };
        }
        spec.validate()?;
        Ok(spec)
    }
}

pub fn load_spec(path: &Path) -> Result<CourseSpec, SynthError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| SynthError::Io { path: path.display().to_string(), reason: e.to_string() })?;
    text.parse()
}

fn draw_count(rng: &mut ChaCha8Rng, mean: f64, noise: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let x = if noise == 0.0 {
        mean
    } else {
        Normal::new(mean, noise * mean).expect("positive spread").sample(rng)
    };
    x.round().max(0.0) as usize
}

pub fn generate_course(spec: &CourseSpec, taxonomy: &ActionTaxonomy) -> Result<CourseLog, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut actions = spec.available_actions(taxonomy);
    if let Some(k) = spec.actions_per_category {
        for list in &mut actions {
            list.shuffle(&mut rng);
            list.truncate(k);
            list.sort_unstable();
        }
    }
    let plan = spec.plan();
    for c in EventCategory::ALL {
        if actions[c.index()].is_empty() && plan.iter().any(|p| p.count > 0 && p.intensity[c.index()] > 0.0) {
            return Err(invalid(format!(
                "{} has positive intensity but no available actions for activity kinds [{}]",
                c.file_name(),
                spec.activity_kinds.iter().cloned().collect::<Vec<_>>().join(", ")
            )));
        }
    }

    let mut students: Vec<&Profile> = plan.iter().flat_map(|p| std::iter::repeat_n(p, p.count)).collect();
    students.shuffle(&mut rng);
    let width = students.len().to_string().len().max(3);

    let mut events = Vec::new();
    let mut marks = BTreeMap::new();
    for (i, profile) in students.into_iter().enumerate() {
        let student_id = format!("s{:0width$}", i + 1);
        let mark = match profile.outcome {
            Outcome::Pass => rng.random_range(5.0..=10.0),
            Outcome::Fail => rng.random_range(0.0..5.0),
        };
        marks.insert(student_id.clone(), mark);

        let mut own: Vec<&str> = Vec::new();
        for c in EventCategory::ALL {
            let n = draw_count(&mut rng, profile.intensity[c.index()], spec.noise);
            for _ in 0..n {
                own.push(actions[c.index()].choose(&mut rng).expect("checked non-empty"));
            }
        }
        if own.is_empty() {
            continue;
        }
        let (lo, hi) = profile.days_range.unwrap_or(spec.days_range);
        let n_days = (rng.random_range(lo..=hi) as usize).min(own.len());
        let days: Vec<u32> = rand::seq::index::sample(&mut rng, spec.term_days as usize, n_days)
            .into_iter()
            .map(|d| d as u32)
            .collect();
        own.shuffle(&mut rng);
        for (k, action) in own.into_iter().enumerate() {
            // every chosen day gets at least one event
            let day = if k < n_days { days[k] } else { *days.choose(&mut rng).expect("n_days >= 1") };
            let second = rng.random_range(0..86_400);
            let timestamp = spec.start_date.and_hms_opt(0, 0, 0).expect("midnight")
                + Duration::days(i64::from(day))
                + Duration::seconds(second);
            events.push(LogEvent {
                timestamp,
                student_id: student_id.clone(),
                action: action.to_string(),
                activity_kind: Some(activity_kind(action).to_string()),
            });
        }
    }
    Ok(CourseLog::new(spec.course_code.clone(), events, marks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_log::UsageLevel;

    const HIGH: &str = "
        course_code = T1
        n_students = 30
        pass_rate = 0.5
        activity_kinds = quiz, forum, assignment
        days_range = 2, 9
        noise = 0.3
        seed = 5
        pass.COMMUNICATING = 20
        pass.LEARNING = 8
        fail.COMMUNICATING = 2
        fail.WORKING = 6
        fail.EVALUATING = 3
    ";

    #[test]
    fn parses_and_generates() {
        let spec: CourseSpec = HIGH.parse().unwrap();
        assert_eq!(spec.intensity[&Outcome::Pass][EventCategory::Communicating.index()], 20.0);
        let course = generate_course(&spec, &ActionTaxonomy::builtin()).unwrap();
        assert_eq!(course.marks.len(), 30);
        assert_eq!(course.marks.values().filter(|&&m| m >= 5.0).count(), 15);
        assert_eq!(course.usage_level(), UsageLevel::High);
        assert_eq!(course, generate_course(&spec, &ActionTaxonomy::builtin()).unwrap());
    }

    #[test]
    fn rejects_bad_specs() {
        let with = |from: &str, to: &str| HIGH.replace(from, to).parse::<CourseSpec>();
        assert!(matches!(with("pass_rate = 0.5", "pass_rate = 0"), Err(SynthError::InvalidSpec(_))));
        assert!(matches!(with("pass_rate = 0.5", "pass_rate = 1"), Err(SynthError::InvalidSpec(_))));
        assert!(matches!(with("days_range = 2, 9", "days_range = 9, 2"), Err(SynthError::InvalidSpec(_))));
        assert!(matches!(with("noise = 0.3", "noise = -1"), Err(SynthError::InvalidSpec(_))));
        assert!(matches!(with("fail.COMMUNICATING = 2", "fail.TALKING = 2"), Err(SynthError::InvalidSpec(_))));
        assert!(matches!(with("quiz, ", "lecture, "), Err(SynthError::InvalidSpec(_))));
        let silent_fail = HIGH.replace("fail.COMMUNICATING = 2", "").replace("fail.WORKING = 6", "").replace("fail.EVALUATING = 3", "");
        assert!(matches!(silent_fail.parse::<CourseSpec>(), Err(SynthError::InvalidSpec(_))));
    }

    #[test]
    fn category_without_actions_is_invalid() {
        let spec: CourseSpec = HIGH.replace("quiz, forum, assignment", "quiz, forum").parse().unwrap();
        let err = generate_course(&spec, &ActionTaxonomy::builtin()).unwrap_err();
        assert!(err.to_string().contains("WORKING"), "{err}");
    }

    #[test]
    fn profiles_fix_student_counts() {
        let text = "
            course_code = P
            seed = 1
            activity_kinds = quiz
            profile.a = Pass 3
            profile.a.EVALUATING = 5
            profile.b = Fail 2
            profile.b.LEARNING = 5
            profile.b.days_range = 1, 1
        ";
        let spec: CourseSpec = text.parse().unwrap();
        assert_eq!((spec.n_students, spec.pass_rate), (5, 0.6));
        let course = generate_course(&spec, &ActionTaxonomy::builtin()).unwrap();
        assert_eq!(course.marks.values().filter(|&&m| m >= 5.0).count(), 3);
        assert!(format!("{text}\nn_students = 5").parse::<CourseSpec>().is_err());
    }

    #[test]
    fn action_subsets_are_seeded() {
        let spec: CourseSpec = format!("{HIGH}\nactions_per_category = 1").parse().unwrap();
        let course = generate_course(&spec, &ActionTaxonomy::builtin()).unwrap();
        let used: BTreeSet<&str> = course.events.iter().map(|e| e.action.as_str()).collect();
        assert!(used.len() <= 4, "{used:?}");
    }
}
