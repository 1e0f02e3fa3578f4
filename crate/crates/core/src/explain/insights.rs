use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{DataTable, FeatureKind};
use crate::quality::{IssueKind, QualityConfig, QualityReport};
use crate::stats::{self, Fences};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InsightMetric {
    ZeroFraction,
    ExtremeFraction,
    SkewFlag,
    ImbalanceNote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyInsight {
    pub feature: String,
    pub metric: InsightMetric,
    pub value_percent: f64,
    pub text: String,
    pub severity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyInsights {
    pub top: Vec<KeyInsight>,
    pub rest: Vec<KeyInsight>,
}

fn insight(feature: &str, metric: InsightMetric, value_percent: f64, text: String) -> KeyInsight {
    KeyInsight {
        feature: feature.into(),
        metric,
        value_percent,
        text,
        severity: value_percent,
    }
}

/// Percent-valued observations about biased and extreme values, one
/// candidate per (feature, metric) with nonzero severity, ranked by severity
/// then feature name. The first `top_k` go to the dashboard tile.
///
/// * zero fraction: share of literal zeros in a `zero_invalid` column
/// * extreme fraction: share of cells outside the interquartile fences
/// * skew flag: for columns the skewness detector flagged, share of values
///   beyond the mean on the long-tail side
/// * imbalance note: majority-class share when the classes differ in size
pub fn key_insights(table: &DataTable, quality: &QualityReport, top_k: usize, cfg: &QualityConfig) -> KeyInsights {
    let n = table.n_rows();
    let mut all = Vec::new();
    let skewed = &quality.issue(IssueKind::Skewness).affected_features;
    for c in table.predictor_indices() {
        let meta = &table.schema()[c];
        if meta.kind != FeatureKind::Numeric {
            continue;
        }
        let col = table.column(c);
        if meta.zero_invalid {
            let zeros = col.iter().filter(|&&v| v == 0.0).count();
            if zeros > 0 {
                let p = 100.0 * zeros as f64 / n as f64;
                all.push(insight(
                    &meta.name,
                    InsightMetric::ZeroFraction,
                    p,
                    format!("{}: {p:.1}% zero values, which are not valid measurements", meta.name),
                ));
            }
        }
        if n >= 4 {
            let fences = Fences::from_values(&col, cfg.iqr_multiplier);
            let extreme = col.iter().filter(|&&v| !fences.contains(v)).count();
            if extreme > 0 {
                let p = 100.0 * extreme as f64 / n as f64;
                all.push(insight(
                    &meta.name,
                    InsightMetric::ExtremeFraction,
                    p,
                    format!(
                        "{}: {p:.1}% extreme values outside [{:.2}, {:.2}]",
                        meta.name, fences.lower, fences.upper
                    ),
                ));
            }
        }
        if skewed.contains(&meta.name) {
            if let Some(g) = stats::skewness(&col) {
                let m = stats::mean(&col);
                let (tail, side) = if g > 0.0 {
                    (col.iter().filter(|&&v| v > m).count(), "above")
                } else {
                    (col.iter().filter(|&&v| v < m).count(), "below")
                };
                let p = 100.0 * tail as f64 / n as f64;
                if tail > 0 {
                    all.push(insight(
                        &meta.name,
                        InsightMetric::SkewFlag,
                        p,
                        format!("{}: skewed distribution, {p:.1}% of values lie {side} the average of {m:.2}", meta.name),
                    ));
                }
            }
        }
    }
    let imbalance = quality.issue(IssueKind::ClassImbalance);
    if imbalance.subscore < 100.0 {
        let counts = table.class_counts();
        if let Some(&(label, count)) = counts.iter().max_by(|a, b| a.1.cmp(&b.1).then(b.0.total_cmp(&a.0))) {
            let p = 100.0 * count as f64 / n as f64;
            all.push(insight(
                table.target_name(),
                InsightMetric::ImbalanceNote,
                p,
                format!("{}: {p:.1}% of records belong to class {label}", table.target_name()),
            ));
        }
    }
    all.sort_by(|a, b| {
        b.severity
            .total_cmp(&a.severity)
            .then_with(|| a.feature.cmp(&b.feature))
            .then(a.metric.cmp(&b.metric))
    });
    let rest = all.split_off(top_k.min(all.len()));
    KeyInsights { top: all, rest }
}
