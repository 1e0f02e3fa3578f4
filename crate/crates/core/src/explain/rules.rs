use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::ExplainError;
use crate::dataset::DataTable;
use crate::model::{bootstrap, design, DecisionTree, MaxFeatures, TreeParams};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RuleOp {
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "<=")]
    Le,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub feature: String,
    pub op: RuleOp,
    pub threshold: f64,
}

impl Condition {
    pub fn holds(&self, value: f64) -> bool {
        match self.op {
            RuleOp::Gt => value > self.threshold,
            RuleOp::Le => value <= self.threshold,
        }
    }

    fn cmp_key(&self, other: &Self) -> Ordering {
        self.feature
            .cmp(&other.feature)
            .then(self.op.cmp(&other.op))
            .then(self.threshold.total_cmp(&other.threshold))
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.op {
            RuleOp::Gt => ">",
            RuleOp::Le => "<=",
        };
        write!(f, "{} {} {}", self.feature, op, self.threshold)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRule {
    pub conditions: Vec<Condition>,
    pub predicted_class: f64,
    pub precision: f64,
    pub recall: f64,
    pub support: usize,
}

impl DecisionRule {
    pub fn f1(&self) -> f64 {
        if self.precision + self.recall == 0.0 {
            0.0
        } else {
            2.0 * self.precision * self.recall / (self.precision + self.recall)
        }
    }

    pub fn text(&self) -> String {
        let conds: Vec<String> = self.conditions.iter().map(|c| format!("{c}")).collect();
        format!("IF {} THEN class {}", conds.join(" AND "), self.predicted_class)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_precision: f64,
    pub min_recall: f64,
    pub top_k_per_class: usize,
    pub seed: u64,
}

impl Default for RuleParams {
    fn default() -> Self {
        RuleParams {
            n_estimators: 30,
            max_depth: 3,
            min_precision: 0.6,
            min_recall: 0.05,
            top_k_per_class: 3,
            seed: 42,
        }
    }
}

fn cmp_conditions(a: &[Condition], b: &[Condition]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        let o = x.cmp_key(y);
        if o != Ordering::Equal {
            return o;
        }
    }
    a.len().cmp(&b.len())
}

/// Collapse repeated (feature, op) pairs to the tightest threshold and sort
/// conditions by feature, op, threshold.
fn normalize(path: &[(usize, bool, f64)], names: &[String]) -> Vec<Condition> {
    let mut out: Vec<Condition> = Vec::new();
    for &(f, right, t) in path {
        let op = if right { RuleOp::Gt } else { RuleOp::Le };
        match out.iter_mut().find(|c| c.feature == names[f] && c.op == op) {
            Some(c) => {
                c.threshold = match op {
                    RuleOp::Gt => c.threshold.max(t),
                    RuleOp::Le => c.threshold.min(t),
                }
            }
            None => out.push(Condition { feature: names[f].clone(), op, threshold: t }),
        }
    }
    out.sort_by(Condition::cmp_key);
    out
}

/// Precision, recall and support of `conditions => class` over `table`.
pub fn evaluate_rule(table: &DataTable, conditions: &[Condition], class: f64) -> Result<(f64, f64, usize), ExplainError> {
    let cols: Vec<usize> = conditions
        .iter()
        .map(|c| table.feature_index(&c.feature).ok_or_else(|| ExplainError::UnknownFeature(c.feature.clone())))
        .collect::<Result<_, _>>()?;
    let t = table.target_index();
    let (mut support, mut tp, mut positives) = (0usize, 0usize, 0usize);
    for row in table.rows() {
        let is_class = row[t] == class;
        positives += usize::from(is_class);
        if conditions.iter().zip(&cols).all(|(c, &i)| c.holds(row[i])) {
            support += 1;
            tp += usize::from(is_class);
        }
    }
    let precision = if support == 0 { 0.0 } else { tp as f64 / support as f64 };
    let recall = if positives == 0 { 0.0 } else { tp as f64 / positives as f64 };
    Ok((precision, recall, support))
}

/// Harvest decision rules from bagged shallow trees.
///
/// Fits `n_estimators` depth-bounded trees on bootstrap samples, turns every
/// root-to-leaf path into a candidate rule for the leaf's majority class,
/// scores candidates on the full table, drops those under the precision or
/// recall floor, removes repeated condition sets (first kept), and keeps the
/// best `top_k_per_class` per class by F1, then support, then condition order.
pub fn top_decision_rules(train: &DataTable, params: &RuleParams) -> Result<Vec<DecisionRule>, ExplainError> {
    let labels = train.labels();
    if labels.len() != 2 {
        return Err(ExplainError::DegenerateClass);
    }
    let labels = [labels[0], labels[1]];
    let names = train.predictor_names();
    let (x, y) = design(train, labels);
    let tree_params = TreeParams {
        max_depth: Some(params.max_depth),
        min_leaf: 1,
        max_features: MaxFeatures::All,
    };
    let mut candidates: Vec<DecisionRule> = Vec::new();
    for i in 0..params.n_estimators {
        let mut r = rng::stream(params.seed, &[rng::TAG_RULES, i as u64]);
        let samples = bootstrap(x.len(), &mut r);
        let tree = DecisionTree::fit(&x, &y, samples, &tree_params, &mut r);
        for (path, leaf) in tree.paths() {
            let conditions = normalize(&path, &names);
            if conditions.is_empty() {
                continue;
            }
            let class = labels[tree.node_class(leaf) as usize];
            let (precision, recall, support) = evaluate_rule(train, &conditions, class)?;
            candidates.push(DecisionRule { conditions, predicted_class: class, precision, recall, support });
        }
    }
    let mut unique: Vec<DecisionRule> = Vec::new();
    for rule in candidates {
        let passes = rule.precision >= params.min_precision && rule.recall >= params.min_recall;
        if passes && !unique.iter().any(|u| u.conditions == rule.conditions) {
            unique.push(rule);
        }
    }
    let mut out = Vec::new();
    for class in labels {
        let mut kept: Vec<DecisionRule> = unique.iter().filter(|r| r.predicted_class == class).cloned().collect();
        kept.sort_by(|a, b| {
            b.f1()
                .total_cmp(&a.f1())
                .then(b.support.cmp(&a.support))
                .then_with(|| cmp_conditions(&a.conditions, &b.conditions))
        });
        kept.truncate(params.top_k_per_class);
        out.extend(kept);
    }
    Ok(out)
}
