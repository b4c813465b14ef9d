//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use num_rational::Ratio;
use portability::dataset::{Attribute, FeatureDataset, Instance, Level, Outcome, Representation, Value};

/// Pair enumeration: (2·wins + ties) / (2·P·N).
pub fn brute_force_auc(scored: &[(f64, Outcome)]) -> Option<Ratio<u64>> {
    let pos: Vec<f64> = scored.iter().filter(|s| s.1 == Outcome::Pass).map(|s| s.0).collect();
    let neg: Vec<f64> = scored.iter().filter(|s| s.1 == Outcome::Fail).map(|s| s.0).collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut doubled = 0u64;
    for p in &pos {
        for n in &neg {
            doubled += match p.partial_cmp(n).unwrap() {
                std::cmp::Ordering::Greater => 2,
                std::cmp::Ordering::Equal => 1,
                std::cmp::Ordering::Less => 0,
            };
        }
    }
    Some(Ratio::new(doubled, 2 * pos.len() as u64 * neg.len() as u64))
}

/// Area under the ROC polyline, thresholds swept from the highest score down
/// with tied scores moved as one step.
pub fn trapezoid_auc(scored: &[(f64, Outcome)]) -> f64 {
    let mut sorted = scored.to_vec();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let p = sorted.iter().filter(|s| s.1 == Outcome::Pass).count() as f64;
    let n = sorted.len() as f64 - p;
    let (mut tp, mut fp, mut area) = (0.0, 0.0, 0.0);
    let mut i = 0;
    while i < sorted.len() {
        let (tp0, fp0) = (tp, fp);
        let score = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == score {
            if sorted[i].1 == Outcome::Pass {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        area += (fp - fp0) / n * (tp + tp0) / p / 2.0;
    }
    area
}

pub fn entropy(pass: usize, fail: usize) -> f64 {
    let n = (pass + fail) as f64;
    [pass, fail]
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let q = c as f64 / n;
            -q * q.log2()
        })
        .sum()
}

/// Gain ratio of a partition given as per-child `(pass, fail)` counts.
/// `None` when the gain is not positive.
pub fn gain_ratio(children: &[(usize, usize)]) -> Option<f64> {
    let (p, f) = children.iter().fold((0, 0), |(a, b), c| (a + c.0, b + c.1));
    let n = (p + f) as f64;
    let remainder: f64 = children.iter().map(|&(cp, cf)| (cp + cf) as f64 / n * entropy(cp, cf)).sum();
    let gain = entropy(p, f) - remainder;
    if gain <= 1e-9 {
        return None;
    }
    let split: f64 = children
        .iter()
        .map(|&(cp, cf)| (cp + cf) as f64 / n)
        .filter(|&q| q > 0.0)
        .map(|q| -q * q.log2())
        .sum();
    Some(if split > 0.0 { gain / split } else { 0.0 })
}

#[derive(Debug, Clone, PartialEq)]
pub enum RootSplit {
    Threshold { attribute: usize, threshold: f64 },
    Categorical { attribute: usize },
}

/// Exhaustive search over every admissible root split. Ties (within 1e-9)
/// go to the earlier attribute, then to the smaller threshold.
pub fn brute_force_root(ds: &FeatureDataset<f64>, min_leaf: usize) -> Option<RootSplit> {
    let (pass, fail) = ds.class_counts();
    if pass == 0 || fail == 0 || ds.len() < 2 * min_leaf {
        return None;
    }
    let mut candidates: Vec<(RootSplit, f64)> = Vec::new();
    for a in 0..ds.attributes.len() {
        match ds.representation {
            Representation::Numeric => {
                let mut values: Vec<f64> = ds.rows.iter().map(|r| r.values[a].number().unwrap()).collect();
                values.sort_by(|x, y| x.partial_cmp(y).unwrap());
                values.dedup();
                for w in values.windows(2) {
                    let t = (w[0] + w[1]) / 2.0;
                    let side = |below: bool| {
                        ds.rows.iter().filter(|r| (r.values[a].number().unwrap() <= t) == below).fold((0, 0), |(p, f), r| {
                            if r.outcome == Outcome::Pass { (p + 1, f) } else { (p, f + 1) }
                        })
                    };
                    let (lo, hi) = (side(true), side(false));
                    if lo.0 + lo.1 < min_leaf || hi.0 + hi.1 < min_leaf {
                        continue;
                    }
                    if let Some(r) = gain_ratio(&[lo, hi]) {
                        candidates.push((RootSplit::Threshold { attribute: a, threshold: t }, r));
                    }
                }
            }
            Representation::Discretized => {
                let groups: Vec<(usize, usize)> = Level::ALL
                    .iter()
                    .map(|&l| {
                        ds.rows.iter().filter(|r| r.values[a].level() == Some(l)).fold((0, 0), |(p, f), r| {
                            if r.outcome == Outcome::Pass { (p + 1, f) } else { (p, f + 1) }
                        })
                    })
                    .filter(|g| g.0 + g.1 > 0)
                    .collect();
                if groups.len() < 2 || groups.iter().any(|g| g.0 + g.1 < min_leaf) {
                    continue;
                }
                if let Some(r) = gain_ratio(&groups) {
                    candidates.push((RootSplit::Categorical { attribute: a }, r));
                }
            }
        }
    }
    let best = candidates.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    // candidates are generated in (attribute, threshold) order
    candidates.into_iter().find(|c| c.1 >= best - 1e-9).map(|c| c.0)
}

pub fn dataset(representation: Representation, rows: Vec<(Vec<Value<f64>>, Outcome)>) -> FeatureDataset<f64> {
    let width = rows.first().map_or(0, |r| r.0.len());
    let attributes = (0..width).map(|i| Attribute::new(format!("a{i}"), format!("A{i}"))).collect();
    let rows = rows
        .into_iter()
        .enumerate()
        .map(|(i, (values, outcome))| Instance { student_id: format!("s{i:02}"), values, outcome })
        .collect();
    FeatureDataset::new("T", representation, attributes, rows).unwrap()
}
