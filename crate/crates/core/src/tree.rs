//! C4.5-style decision trees.
//!
//! Induction is top-down: every node evaluates all attributes and keeps the
//! split with the largest gain ratio among splits with positive information
//! gain whose children all hold at least `min_instances_per_leaf` rows.
//! Discretized attributes branch once per observed level; numeric attributes
//! split in two at the midpoint between consecutive distinct values, `<= t`
//! going left. Ties go to the earlier attribute, then the smaller threshold.
//!
//! Pruning is pessimistic subtree replacement, bottom-up: a subtree becomes a
//! leaf when the upper confidence bound on the leaf's errors does not exceed
//! the sum of its children's bounds. Subtree raising is not performed.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::dataset::{Attribute, FeatureDataset, Level, Outcome, Representation, Value};
use crate::num::Scalar;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClassCounts {
    pub pass: usize,
    pub fail: usize,
}

impl ClassCounts {
    pub fn new(pass: usize, fail: usize) -> Self {
        ClassCounts { pass, fail }
    }

    pub fn total(&self) -> usize {
        self.pass + self.fail
    }

    pub fn add(&mut self, outcome: Outcome) {
        match outcome {
            Outcome::Pass => self.pass += 1,
            Outcome::Fail => self.fail += 1,
        }
    }

    pub fn is_pure(&self) -> bool {
        self.pass == 0 || self.fail == 0
    }

    /// Majority class; a tie predicts Fail.
    pub fn majority(&self) -> Outcome {
        if self.pass > self.fail {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }

    /// Training errors of a leaf predicting the majority class.
    pub fn errors(&self) -> usize {
        match self.majority() {
            Outcome::Pass => self.fail,
            Outcome::Fail => self.pass,
        }
    }

    pub fn pass_fraction<F: Scalar>(&self) -> F {
        if self.total() == 0 {
            F::zero()
        } else {
            F::from_count(self.pass) / F::from_count(self.total())
        }
    }
}

impl std::ops::Sub for ClassCounts {
    type Output = ClassCounts;

    fn sub(self, rhs: ClassCounts) -> ClassCounts {
        ClassCounts::new(self.pass - rhs.pass, self.fail - rhs.fail)
    }
}

fn plogp<F: Scalar>(part: usize, total: usize) -> F {
    if part == 0 {
        return F::zero();
    }
    let p = F::from_count(part) / F::from_count(total);
    -p * p.log2()
}

/// Shannon entropy in bits; zero for an empty set.
pub fn entropy<F: Scalar>(counts: ClassCounts) -> F {
    let total = counts.total();
    plogp::<F>(counts.pass, total) + plogp::<F>(counts.fail, total)
}

/// Entropy of the partition sizes themselves.
fn split_information<F: Scalar>(children: &[ClassCounts]) -> F {
    let total: usize = children.iter().map(ClassCounts::total).sum();
    children.iter().map(|c| plogp::<F>(c.total(), total)).fold(F::zero(), |a, b| a + b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitScore<F> {
    pub gain: F,
    pub split_info: F,
    /// Zero when the split information is zero.
    pub ratio: F,
    /// Only splits with positive information gain are eligible.
    pub eligible: bool,
}

pub fn gain_ratio<F: Scalar>(parent: ClassCounts, children: &[ClassCounts]) -> SplitScore<F> {
    let total = F::from_count(parent.total());
    let remainder = children
        .iter()
        .filter(|c| c.total() > 0)
        .map(|c| F::from_count(c.total()) / total * entropy::<F>(*c))
        .fold(F::zero(), |a, b| a + b);
    let gain = entropy::<F>(parent) - remainder;
    let split_info = split_information::<F>(children);
    let ratio = if split_info > F::zero() { gain / split_info } else { F::zero() };
    SplitScore { gain, split_info, ratio, eligible: gain > F::tolerance() }
}

fn midpoint<F: Scalar>(lo: F, hi: F) -> F {
    let mid = lo + (hi - lo) / F::lit(2.0);
    if mid < hi {
        mid
    } else {
        lo
    }
}

/// Best binary threshold over `(value, class)` pairs: `(threshold, gain ratio)`.
///
/// Candidates are the midpoints between consecutive distinct values whose
/// sides both hold at least `min_leaf` instances.
pub fn best_numeric_split<F: Scalar>(values: &[(F, Outcome)], min_leaf: usize) -> Option<(F, F)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut parent = ClassCounts::default();
    sorted.iter().for_each(|(_, o)| parent.add(*o));

    let mut left = ClassCounts::default();
    let mut best: Option<(F, F)> = None;
    for i in 0..sorted.len().saturating_sub(1) {
        left.add(sorted[i].1);
        let (lo, hi) = (sorted[i].0, sorted[i + 1].0);
        if !(lo < hi) {
            continue;
        }
        let right = parent - left;
        if left.total() < min_leaf || right.total() < min_leaf {
            continue;
        }
        let score = gain_ratio::<F>(parent, &[left, right]);
        if !score.eligible {
            continue;
        }
        if best.is_none_or(|(_, r)| score.ratio > r + F::tolerance()) {
            best = Some((midpoint(lo, hi), score.ratio));
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch<F> {
    pub level: Level,
    pub node: Node<F>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node<F> {
    Leaf {
        counts: ClassCounts,
    },
    Threshold {
        attribute: usize,
        threshold: F,
        counts: ClassCounts,
        below: Box<Node<F>>,
        above: Box<Node<F>>,
    },
    Categorical {
        attribute: usize,
        counts: ClassCounts,
        branches: Vec<Branch<F>>,
    },
}

impl<F: Scalar> Node<F> {
    pub fn counts(&self) -> ClassCounts {
        match self {
            Node::Leaf { counts } | Node::Threshold { counts, .. } | Node::Categorical { counts, .. } => *counts,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Node::Leaf { .. })
    }

    fn children(&self) -> Vec<&Node<F>> {
        match self {
            Node::Leaf { .. } => Vec::new(),
            Node::Threshold { below, above, .. } => vec![below, above],
            Node::Categorical { branches, .. } => branches.iter().map(|b| &b.node).collect(),
        }
    }

    pub fn leaves(&self) -> usize {
        if self.is_leaf() {
            1
        } else {
            self.children().into_iter().map(Node::leaves).sum()
        }
    }

    pub fn size(&self) -> usize {
        1 + self.children().into_iter().map(Node::size).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        self.children().into_iter().map(|c| 1 + c.depth()).max().unwrap_or(0)
    }

    fn leaf_counts(&self, out: &mut Vec<ClassCounts>) {
        match self {
            Node::Leaf { counts } => out.push(*counts),
            _ => self.children().into_iter().for_each(|c| c.leaf_counts(out)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub min_instances_per_leaf: usize,
    pub pruning_confidence: f64,
    pub pruning_enabled: bool,
    /// Never collapse a subtree that makes no training errors. Plain C4.5
    /// may replace such a subtree when its leaves are small.
    #[serde(default = "default_true")]
    pub keep_error_free_subtrees: bool,
    /// Seed for the class balancer that runs before training.
    pub random_seed: u64,
}

fn default_true() -> bool {
    true
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            min_instances_per_leaf: 2,
            pruning_confidence: 0.25,
            pruning_enabled: true,
            keep_error_free_subtrees: true,
            random_seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TreeError> {
        if self.min_instances_per_leaf == 0 {
            return Err(TreeError::InvalidConfig("min_instances_per_leaf must be positive".into()));
        }
        if !(self.pruning_confidence > 0.0 && self.pruning_confidence <= 0.5) {
            return Err(TreeError::InvalidConfig(format!(
                "pruning_confidence {} outside (0, 0.5]",
                self.pruning_confidence
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("training data for {0} contains a single class")]
    SingleClassDataset(String),
    #[error("training data for {course} has {rows} rows, at least {required} needed")]
    TooFewInstances { course: String, rows: usize, required: usize },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub course_code: String,
    pub representation: Representation,
    pub attributes: Vec<Attribute>,
    pub config: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree<F> {
    pub root: Node<F>,
    pub meta: TrainingMeta,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction<F> {
    pub outcome: Outcome,
    /// Relative frequency of Pass at the leaf.
    pub score: F,
}

enum SplitRule<F> {
    Threshold(F),
    Categorical,
}

struct Candidate<F> {
    attribute: usize,
    rule: SplitRule<F>,
    ratio: F,
}

struct Builder<'a, F> {
    data: &'a FeatureDataset<F>,
    min_leaf: usize,
}

impl<F: Scalar> Builder<'_, F> {
    fn counts(&self, idx: &[usize]) -> ClassCounts {
        let mut c = ClassCounts::default();
        idx.iter().for_each(|&i| c.add(self.data.rows[i].outcome));
        c
    }

    fn level_groups(&self, idx: &[usize], attribute: usize) -> Vec<(Level, Vec<usize>)> {
        Level::ALL
            .iter()
            .map(|&level| {
                let members = idx
                    .iter()
                    .copied()
                    .filter(|&i| self.data.rows[i].values[attribute].level() == Some(level))
                    .collect::<Vec<_>>();
                (level, members)
            })
            .filter(|(_, m)| !m.is_empty())
            .collect()
    }

    fn best_split(&self, idx: &[usize], used: &[bool]) -> Option<Candidate<F>> {
        let parent = self.counts(idx);
        let mut best: Option<Candidate<F>> = None;
        for attribute in 0..self.data.attributes.len() {
            let candidate = match self.data.representation {
                Representation::Numeric => {
                    let pairs: Vec<(F, Outcome)> = idx
                        .iter()
                        .map(|&i| {
                            let row = &self.data.rows[i];
                            (row.values[attribute].number().expect("numeric row"), row.outcome)
                        })
                        .collect();
                    best_numeric_split(&pairs, self.min_leaf)
                        .map(|(t, ratio)| Candidate { attribute, rule: SplitRule::Threshold(t), ratio })
                }
                Representation::Discretized => {
                    if used[attribute] {
                        continue;
                    }
                    let groups = self.level_groups(idx, attribute);
                    if groups.len() < 2 || groups.iter().any(|(_, m)| m.len() < self.min_leaf) {
                        continue;
                    }
                    let children: Vec<ClassCounts> = groups.iter().map(|(_, m)| self.counts(m)).collect();
                    let score = gain_ratio::<F>(parent, &children);
                    score
                        .eligible
                        .then_some(Candidate { attribute, rule: SplitRule::Categorical, ratio: score.ratio })
                }
            };
            if let Some(c) = candidate {
                if best.as_ref().is_none_or(|b| c.ratio > b.ratio + F::tolerance()) {
                    best = Some(c);
                }
            }
        }
        best
    }

    fn grow(&self, idx: &[usize], used: &mut Vec<bool>) -> Node<F> {
        let counts = self.counts(idx);
        if counts.is_pure() || idx.len() < 2 * self.min_leaf {
            return Node::Leaf { counts };
        }
        let Some(split) = self.best_split(idx, used) else {
            return Node::Leaf { counts };
        };
        let attribute = split.attribute;
        match split.rule {
            SplitRule::Threshold(threshold) => {
                let (below, above): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| {
                    self.data.rows[i].values[attribute].number().expect("numeric row") <= threshold
                });
                Node::Threshold {
                    attribute,
                    threshold,
                    counts,
                    below: Box::new(self.grow(&below, used)),
                    above: Box::new(self.grow(&above, used)),
                }
            }
            SplitRule::Categorical => {
                used[attribute] = true;
                let branches = self
                    .level_groups(idx, attribute)
                    .into_iter()
                    .map(|(level, members)| Branch { level, node: self.grow(&members, used) })
                    .collect();
                used[attribute] = false;
                Node::Categorical { attribute, counts, branches }
            }
        }
    }
}

/// Upper confidence bound on the number of errors among `n` instances with
/// `e` observed errors, minus `e` (the classic C4.5 estimate).
pub fn additional_errors<F: Scalar>(n: F, e: F, confidence: F) -> F {
    if n <= F::zero() {
        return F::zero();
    }
    if e < F::one() {
        let base = n * (F::one() - confidence.powf(F::one() / n));
        if e == F::zero() {
            return base;
        }
        return base + e * (additional_errors(n, F::one(), confidence) - base);
    }
    if e + F::lit(0.5) >= n {
        return (n - e).max(F::zero());
    }
    let z = F::lit(
        Normal::new(0.0, 1.0)
            .expect("standard normal")
            .inverse_cdf(1.0 - confidence.to_f64().unwrap_or(0.25)),
    );
    let f = (e + F::lit(0.5)) / n;
    let two = F::lit(2.0);
    let four = F::lit(4.0);
    let r = (f + z * z / (two * n) + z * (f / n - f * f / n + z * z / (four * n * n)).sqrt())
        / (F::one() + z * z / n);
    r * n - e
}

fn leaf_estimate<F: Scalar>(counts: ClassCounts, confidence: F) -> F {
    let e = F::from_count(counts.errors());
    e + additional_errors(F::from_count(counts.total()), e, confidence)
}

/// Prunes in place; returns the subtree's estimated and observed errors
/// after pruning.
fn prune<F: Scalar>(node: &mut Node<F>, confidence: F, keep_error_free: bool) -> (F, usize) {
    let counts = node.counts();
    let children: Vec<(F, usize)> = match node {
        Node::Leaf { .. } => return (leaf_estimate(counts, confidence), counts.errors()),
        Node::Threshold { below, above, .. } => {
            vec![prune(below, confidence, keep_error_free), prune(above, confidence, keep_error_free)]
        }
        Node::Categorical { branches, .. } => {
            branches.iter_mut().map(|b| prune(&mut b.node, confidence, keep_error_free)).collect()
        }
    };
    let subtree = children.iter().fold(F::zero(), |a, c| a + c.0);
    let observed: usize = children.iter().map(|c| c.1).sum();
    if keep_error_free && observed == 0 {
        return (subtree, 0);
    }
    let as_leaf = leaf_estimate(counts, confidence);
    if as_leaf <= subtree {
        *node = Node::Leaf { counts };
        (as_leaf, counts.errors())
    } else {
        (subtree, observed)
    }
}

pub fn train<F: Scalar>(dataset: &FeatureDataset<F>, config: &TrainConfig) -> Result<DecisionTree<F>, TreeError> {
    config.validate()?;
    let required = 2 * config.min_instances_per_leaf;
    if dataset.len() < required {
        return Err(TreeError::TooFewInstances {
            course: dataset.course_code.clone(),
            rows: dataset.len(),
            required,
        });
    }
    let (pass, fail) = dataset.class_counts();
    if pass == 0 || fail == 0 {
        return Err(TreeError::SingleClassDataset(dataset.course_code.clone()));
    }
    for row in &dataset.rows {
        dataset.check_row(&row.values).map_err(|e| TreeError::SchemaMismatch(e.to_string()))?;
    }

    let builder = Builder { data: dataset, min_leaf: config.min_instances_per_leaf };
    let idx: Vec<usize> = (0..dataset.len()).collect();
    let mut root = builder.grow(&idx, &mut vec![false; dataset.attributes.len()]);
    if config.pruning_enabled {
        prune(&mut root, F::lit(config.pruning_confidence), config.keep_error_free_subtrees);
    }
    Ok(DecisionTree {
        root,
        meta: TrainingMeta {
            course_code: dataset.course_code.clone(),
            representation: dataset.representation,
            attributes: dataset.attributes.clone(),
            config: *config,
        },
    })
}

impl<F: Scalar> DecisionTree<F> {
    pub fn num_leaves(&self) -> usize {
        self.root.leaves()
    }

    /// Internal nodes plus leaves.
    pub fn size(&self) -> usize {
        self.root.size()
    }

    pub fn leaf_counts(&self) -> Vec<ClassCounts> {
        let mut out = Vec::new();
        self.root.leaf_counts(&mut out);
        out
    }

    /// Sum over leaves of observed plus pessimistic additional errors.
    pub fn estimated_errors(&self, confidence: F) -> F {
        self.leaf_counts().into_iter().map(|c| leaf_estimate(c, confidence)).fold(F::zero(), |a, b| a + b)
    }

    /// Routes a row to a leaf. A level with no branch follows the branch
    /// that saw the most training rows.
    pub fn predict(&self, values: &[Value<F>]) -> Result<Prediction<F>, TreeError> {
        if values.len() != self.meta.attributes.len() {
            return Err(TreeError::SchemaMismatch(format!(
                "row has {} values, tree expects {}",
                values.len(),
                self.meta.attributes.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| v.representation() != self.meta.representation) {
            return Err(TreeError::SchemaMismatch(format!(
                "{} value given to a {} tree",
                v.representation(),
                self.meta.representation
            )));
        }
        let mut node = &self.root;
        loop {
            node = match node {
                Node::Leaf { counts } => {
                    return Ok(Prediction { outcome: counts.majority(), score: counts.pass_fraction() })
                }
                Node::Threshold { attribute, threshold, below, above, .. } => {
                    if values[*attribute].number().expect("checked representation") <= *threshold {
                        below
                    } else {
                        above
                    }
                }
                Node::Categorical { attribute, branches, .. } => {
                    let level = values[*attribute].level().expect("checked representation");
                    match branches.iter().find(|b| b.level == level) {
                        Some(b) => &b.node,
                        None => {
                            &branches
                                .iter()
                                .rev()
                                .max_by_key(|b| b.node.counts().total())
                                .expect("internal node has branches")
                                .node
                        }
                    }
                }
            };
        }
    }

    pub fn render(&self) -> String {
        render_tree(self)
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

fn format_threshold<F: Scalar>(t: F) -> String {
    let s = format!("{t:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn render_node<F: Scalar>(node: &Node<F>, attributes: &[Attribute], depth: usize, out: &mut String) {
    let indent = "| ".repeat(depth);
    let mut line = |test: String, child: &Node<F>| {
        out.push_str(&indent);
        out.push_str(&test);
        if let Node::Leaf { counts } = child {
            out.push_str(": ");
            out.push_str(counts.majority().as_str());
            out.push('\n');
        } else {
            out.push('\n');
            render_node(child, attributes, depth + 1, out);
        }
    };
    match node {
        Node::Leaf { .. } => {}
        Node::Threshold { attribute, threshold, below, above, .. } => {
            let label = &attributes[*attribute].label;
            let t = format_threshold(*threshold);
            line(format!("{label} <= {t}"), below);
            line(format!("{label} > {t}"), above);
        }
        Node::Categorical { attribute, branches, .. } => {
            let label = &attributes[*attribute].label;
            for b in branches {
                line(format!("{label} = {}", b.level), &b.node);
            }
        }
    }
}

/// Text layout of J48's console output, without per-leaf counts.
pub fn render_tree<F: Scalar>(tree: &DecisionTree<F>) -> String {
    let mut out = String::new();
    out.push_str(if tree.meta.config.pruning_enabled { "J48 pruned tree\n" } else { "J48 unpruned tree\n" });
    out.push_str("------------------\n\n");
    match &tree.root {
        Node::Leaf { counts } => {
            out.push_str(": ");
            out.push_str(counts.majority().as_str());
            out.push('\n');
        }
        root => render_node(root, &tree.meta.attributes, 0, &mut out),
    }
    out.push_str(&format!("\nNumber of Leaves: {}\n", tree.num_leaves()));
    out.push_str(&format!("Size of the tree: {}\n", tree.size()));
    out
}
