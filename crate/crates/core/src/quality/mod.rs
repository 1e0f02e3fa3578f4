//! Data-quality profiling: six issue detectors, the equal-weight quality
//! score, and automated corrections.
//!
//! Every detector yields a subscore in `[0, 100]` where 100 means the issue
//! is absent; `impact = 100 - subscore`. The overall score is the plain mean
//! of the six subscores and maps to a level: good above 80, moderate in
//! `[50, 80]`, poor below 50.

mod correct;
mod smote;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

pub use correct::{correct_issue, CorrectionOutcome};
pub use smote::{oversample, Synthesized};

use crate::dataset::{DataTable, DatasetError, FeatureKind};
use crate::stats::{self, Fences};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QualityError {
    #[error("need at least {needed} rows, found {found}")]
    TooFewRows { needed: usize, found: usize },
    #[error("need at least two predictors")]
    TooFewFeatures,
    #[error("both classes must be present")]
    DegenerateClass,
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("no report for issue kind {0}")]
    MissingIssueKind(IssueKind),
    #[error("more than one report for issue kind {0}")]
    DuplicateIssueKind(IssueKind),
    #[error("issue kind {0} has no automated correction")]
    NotCorrectable(IssueKind),
    #[error("issue kind {0} is already absent")]
    NothingToCorrect(IssueKind),
    #[error("correction would remove every row")]
    WouldRemoveAllRows,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IssueKind {
    Outliers,
    RedundantRows,
    CorrelatedFeatures,
    ClassImbalance,
    DataDrift,
    Skewness,
}

impl IssueKind {
    pub const ALL: [IssueKind; 6] = [
        IssueKind::Outliers,
        IssueKind::RedundantRows,
        IssueKind::CorrelatedFeatures,
        IssueKind::ClassImbalance,
        IssueKind::DataDrift,
        IssueKind::Skewness,
    ];

    /// Order in which selected corrections are applied; oversampling runs
    /// last so synthetic rows are built from cleaned data.
    pub const CORRECTION_ORDER: [IssueKind; 5] = [
        IssueKind::RedundantRows,
        IssueKind::Outliers,
        IssueKind::Skewness,
        IssueKind::CorrelatedFeatures,
        IssueKind::ClassImbalance,
    ];

    /// Drift against the baseline is advisory only.
    pub fn is_correctable(self) -> bool {
        self != IssueKind::DataDrift
    }

    pub fn label(self) -> &'static str {
        match self {
            IssueKind::Outliers => "outliers",
            IssueKind::RedundantRows => "redundant data",
            IssueKind::CorrelatedFeatures => "correlated features",
            IssueKind::ClassImbalance => "class imbalance",
            IssueKind::DataDrift => "data drift",
            IssueKind::Skewness => "data skewness",
        }
    }
}

impl fmt::Display for IssueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssueReport {
    pub kind: IssueKind,
    pub subscore: f64,
    pub impact: f64,
    pub affected_features: Vec<String>,
    pub affected_row_ids: Vec<u64>,
    pub correctable: bool,
    pub description: String,
}

impl IssueReport {
    fn new(kind: IssueKind, subscore: f64, features: Vec<String>, row_ids: Vec<u64>, description: String) -> Self {
        let subscore = subscore.clamp(0.0, 100.0);
        IssueReport {
            kind,
            subscore,
            impact: 100.0 - subscore,
            affected_features: features,
            affected_row_ids: row_ids,
            correctable: kind.is_correctable(),
            description,
        }
    }

    /// Report for a detector whose preconditions do not hold on this table.
    pub fn not_applicable(kind: IssueKind, reason: &str) -> Self {
        IssueReport::new(kind, 100.0, Vec::new(), Vec::new(), format!("Not assessed: {reason}."))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityLevel {
    Good,
    Moderate,
    Poor,
}

impl QualityLevel {
    pub fn from_score(score: f64) -> Self {
        if score > 80.0 {
            QualityLevel::Good
        } else if score >= 50.0 {
            QualityLevel::Moderate
        } else {
            QualityLevel::Poor
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub issues: Vec<IssueReport>,
    pub score: f64,
    pub level: QualityLevel,
}

impl QualityReport {
    pub fn issue(&self, kind: IssueKind) -> &IssueReport {
        self.issues
            .iter()
            .find(|i| i.kind == kind)
            .expect("quality report holds every issue kind")
    }
}

/// Detector thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityConfig {
    pub iqr_multiplier: f64,
    pub correlation_threshold: f64,
    pub skew_threshold: f64,
    pub ks_threshold: f64,
    pub smote_k: usize,
}

impl Default for QualityConfig {
    fn default() -> Self {
        QualityConfig {
            iqr_multiplier: 1.5,
            correlation_threshold: 0.8,
            skew_threshold: 1.0,
            ks_threshold: 0.1,
            smote_k: 5,
        }
    }
}

fn ratio_score(bad: usize, total: usize) -> f64 {
    if total == 0 {
        return 100.0;
    }
    100.0 * (1.0 - bad as f64 / total as f64)
}

fn numeric_predictors(table: &DataTable) -> Vec<usize> {
    table
        .predictor_indices()
        .filter(|&c| table.schema()[c].kind == FeatureKind::Numeric)
        .collect()
}

fn pct(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

/// Per-cell outlier flags for column `c`: outside the Tukey fences, or a
/// zero in a `zero_invalid` column.
pub fn outlier_cells(table: &DataTable, c: usize, multiplier: f64) -> Vec<bool> {
    let col = table.column(c);
    let fences = Fences::from_values(&col, multiplier);
    let zero_invalid = table.schema()[c].zero_invalid;
    col.iter()
        .map(|&v| !fences.contains(v) || (zero_invalid && v == 0.0))
        .collect()
}

pub fn detect_outliers(table: &DataTable, cfg: &QualityConfig) -> Result<IssueReport, QualityError> {
    let n = table.n_rows();
    if n < 4 {
        return Err(QualityError::TooFewRows { needed: 4, found: n });
    }
    let mut row_flag = alloc::vec![false; n];
    let mut features = Vec::new();
    for c in numeric_predictors(table) {
        let flags = outlier_cells(table, c, cfg.iqr_multiplier);
        if flags.iter().any(|&f| f) {
            features.push(table.schema()[c].name.clone());
        }
        for (rf, f) in row_flag.iter_mut().zip(flags) {
            *rf |= f;
        }
    }
    let ids: Vec<u64> = (0..n).filter(|&i| row_flag[i]).map(|i| table.row_ids()[i]).collect();
    let description = if ids.is_empty() {
        String::from("No values fall outside the interquartile fences.")
    } else {
        format!(
            "{} of {} rows ({:.1}%) hold extreme values or invalid zeros, in {}. Extreme values can pull decision thresholds away from typical records.",
            ids.len(),
            n,
            pct(ids.len(), n),
            features.join(", ")
        )
    };
    Ok(IssueReport::new(IssueKind::Outliers, ratio_score(ids.len(), n), features, ids, description))
}

/// Indices of rows that repeat an earlier row across every column.
pub fn redundant_rows(table: &DataTable) -> Vec<usize> {
    let mut seen = BTreeMap::new();
    let mut dup = Vec::new();
    for (i, row) in table.rows().iter().enumerate() {
        let key: Vec<u64> = row.iter().map(|v| (v + 0.0).to_bits()).collect();
        if seen.insert(key, i).is_some() {
            dup.push(i);
        }
    }
    dup
}

pub fn detect_duplicates(table: &DataTable) -> IssueReport {
    let n = table.n_rows();
    let dup = redundant_rows(table);
    let ids: Vec<u64> = dup.iter().map(|&i| table.row_ids()[i]).collect();
    let description = if ids.is_empty() {
        String::from("Every row is distinct.")
    } else {
        format!(
            "{} of {} rows ({:.1}%) repeat an earlier row exactly. Repeated records over-weight the same evidence during training.",
            ids.len(),
            n,
            pct(ids.len(), n)
        )
    };
    IssueReport::new(IssueKind::RedundantRows, ratio_score(ids.len(), n), Vec::new(), ids, description)
}

/// A predictor pair with its Pearson coefficient (`None` when a column is constant).
#[derive(Debug, Clone, PartialEq)]
pub struct PairCorrelation {
    pub a: usize,
    pub b: usize,
    pub r: Option<f64>,
}

pub fn pairwise_correlations(table: &DataTable) -> Vec<PairCorrelation> {
    let cols: Vec<Vec<f64>> = table.predictor_indices().map(|c| table.column(c)).collect();
    let mut out = Vec::new();
    for a in 0..cols.len() {
        for b in a + 1..cols.len() {
            out.push(PairCorrelation { a, b, r: stats::pearson(&cols[a], &cols[b]) });
        }
    }
    out
}

pub fn detect_correlated(table: &DataTable, cfg: &QualityConfig) -> Result<IssueReport, QualityError> {
    if table.target_index() < 2 {
        return Err(QualityError::TooFewFeatures);
    }
    if table.n_rows() < 3 {
        return Err(QualityError::TooFewRows { needed: 3, found: table.n_rows() });
    }
    let pairs = pairwise_correlations(table);
    let name = |i: usize| table.schema()[i].name.as_str();
    let offending: Vec<&PairCorrelation> = pairs
        .iter()
        .filter(|p| p.r.is_some_and(|r| libm::fabs(r) >= cfg.correlation_threshold))
        .collect();
    let skipped: Vec<&PairCorrelation> = pairs.iter().filter(|p| p.r.is_none()).collect();
    let mut flagged = alloc::vec![false; table.target_index()];
    for p in &offending {
        flagged[p.a] = true;
        flagged[p.b] = true;
    }
    let features: Vec<String> = (0..flagged.len()).filter(|&i| flagged[i]).map(|i| name(i).into()).collect();
    let mut description = if offending.is_empty() {
        format!("No predictor pair reaches |r| >= {}.", cfg.correlation_threshold)
    } else {
        let list: Vec<String> = offending
            .iter()
            .map(|p| format!("{} ~ {} (r = {:.2})", name(p.a), name(p.b), p.r.unwrap_or(0.0)))
            .collect();
        format!(
            "{} of {} predictor pairs are strongly correlated: {}. Correlated predictors carry overlapping information and blur feature importance.",
            offending.len(),
            pairs.len(),
            list.join("; ")
        )
    };
    if !skipped.is_empty() {
        let list: Vec<String> = skipped.iter().map(|p| format!("{} ~ {}", name(p.a), name(p.b))).collect();
        description.push_str(&format!(" Skipped (constant column): {}.", list.join("; ")));
    }
    Ok(IssueReport::new(
        IssueKind::CorrelatedFeatures,
        ratio_score(offending.len(), pairs.len()),
        features,
        Vec::new(),
        description,
    ))
}

pub fn detect_imbalance(table: &DataTable) -> Result<IssueReport, QualityError> {
    let counts = table.class_counts();
    if counts.len() != 2 {
        return Err(QualityError::DegenerateClass);
    }
    let (lo, hi) = if counts[0].1 <= counts[1].1 { (counts[0], counts[1]) } else { (counts[1], counts[0]) };
    let subscore = 100.0 * (lo.1 as f64 / hi.1 as f64);
    let (features, description) = if lo.1 == hi.1 {
        (Vec::new(), format!("Both classes have {} records.", lo.1))
    } else {
        (
            alloc::vec![String::from(table.target_name())],
            format!(
                "Class {} has {} records against {} for class {}. A skewed class balance biases the model toward the majority class.",
                lo.0, lo.1, hi.1, hi.0
            ),
        )
    };
    Ok(IssueReport::new(IssueKind::ClassImbalance, subscore, features, Vec::new(), description))
}

/// Skewness per numeric predictor (`None` for constant columns).
pub fn column_skewness(table: &DataTable) -> Vec<(usize, Option<f64>)> {
    numeric_predictors(table)
        .into_iter()
        .map(|c| (c, stats::skewness(&table.column(c))))
        .collect()
}

pub fn detect_skewness(table: &DataTable, cfg: &QualityConfig) -> Result<IssueReport, QualityError> {
    if table.n_rows() < 3 {
        return Err(QualityError::TooFewRows { needed: 3, found: table.n_rows() });
    }
    let skews = column_skewness(table);
    let flagged: Vec<(usize, f64)> = skews
        .iter()
        .filter_map(|&(c, g)| g.filter(|g| libm::fabs(*g) > cfg.skew_threshold).map(|g| (c, g)))
        .collect();
    let features: Vec<String> = flagged.iter().map(|&(c, _)| table.schema()[c].name.clone()).collect();
    let description = if flagged.is_empty() {
        format!("No predictor has |skewness| above {}.", cfg.skew_threshold)
    } else {
        let list: Vec<String> = flagged
            .iter()
            .map(|&(c, g)| format!("{} (g1 = {:.2})", table.schema()[c].name, g))
            .collect();
        format!(
            "{} of {} predictors are strongly skewed: {}. Long tails let a few records dominate split thresholds.",
            flagged.len(),
            skews.len(),
            list.join(", ")
        )
    };
    Ok(IssueReport::new(
        IssueKind::Skewness,
        ratio_score(flagged.len(), skews.len()),
        features,
        Vec::new(),
        description,
    ))
}

pub fn detect_drift(current: &DataTable, baseline: &DataTable, cfg: &QualityConfig) -> Result<IssueReport, QualityError> {
    if current.target_name() != baseline.target_name() {
        return Err(QualityError::SchemaMismatch(format!(
            "target `{}` vs `{}`",
            current.target_name(),
            baseline.target_name()
        )));
    }
    let shared: Vec<(usize, usize)> = numeric_predictors(current)
        .into_iter()
        .filter_map(|c| {
            let name = &current.schema()[c].name;
            baseline
                .feature_index(name)
                .filter(|&b| baseline.schema()[b].kind == FeatureKind::Numeric && b != baseline.target_index())
                .map(|b| (c, b))
        })
        .collect();
    if shared.is_empty() {
        return Err(QualityError::SchemaMismatch("no shared numeric predictors".into()));
    }
    let mut features = Vec::new();
    let mut list = Vec::new();
    for &(c, b) in &shared {
        let d = stats::ks_statistic(&current.column(c), &baseline.column(b));
        if d > cfg.ks_threshold {
            let name = current.schema()[c].name.clone();
            list.push(format!("{name} (D = {d:.2})"));
            features.push(name);
        }
    }
    let description = if features.is_empty() {
        String::from("Feature distributions match the original training data.")
    } else {
        format!(
            "{} of {} predictors moved away from the original training data: {}. Check that the configuration did not remove a patient group the model still needs to serve.",
            features.len(),
            shared.len(),
            list.join(", ")
        )
    };
    Ok(IssueReport::new(
        IssueKind::DataDrift,
        ratio_score(features.len(), shared.len()),
        features,
        Vec::new(),
        description,
    ))
}

/// Run the detector for `kind`.
pub fn detect(kind: IssueKind, table: &DataTable, baseline: &DataTable, cfg: &QualityConfig) -> Result<IssueReport, QualityError> {
    match kind {
        IssueKind::Outliers => detect_outliers(table, cfg),
        IssueKind::RedundantRows => Ok(detect_duplicates(table)),
        IssueKind::CorrelatedFeatures => detect_correlated(table, cfg),
        IssueKind::ClassImbalance => detect_imbalance(table),
        IssueKind::DataDrift => detect_drift(table, baseline, cfg),
        IssueKind::Skewness => detect_skewness(table, cfg),
    }
}

/// Like [`detect`], but a table too small for the detector is reported as
/// issue-free with a "not assessed" description.
pub fn detect_or_skip(kind: IssueKind, table: &DataTable, baseline: &DataTable, cfg: &QualityConfig) -> Result<IssueReport, QualityError> {
    match detect(kind, table, baseline, cfg) {
        Err(QualityError::TooFewRows { needed, .. }) => {
            Ok(IssueReport::not_applicable(kind, &format!("fewer than {needed} rows")))
        }
        Err(QualityError::TooFewFeatures) => Ok(IssueReport::not_applicable(kind, "fewer than two predictors")),
        other => other,
    }
}

/// Combine exactly one report per issue kind into the overall score.
pub fn quality_score(issues: Vec<IssueReport>) -> Result<QualityReport, QualityError> {
    let mut ordered = Vec::with_capacity(6);
    for kind in IssueKind::ALL {
        let mut matching = issues.iter().filter(|i| i.kind == kind);
        let first = matching.next().ok_or(QualityError::MissingIssueKind(kind))?;
        if matching.next().is_some() {
            return Err(QualityError::DuplicateIssueKind(kind));
        }
        ordered.push(first.clone());
    }
    let score = ordered.iter().map(|i| i.subscore).sum::<f64>() / ordered.len() as f64;
    Ok(QualityReport {
        issues: ordered,
        score,
        level: QualityLevel::from_score(score),
    })
}

/// Run all six detectors; drift is measured against `baseline`.
pub fn assess(table: &DataTable, baseline: &DataTable, cfg: &QualityConfig) -> Result<QualityReport, QualityError> {
    let issues = IssueKind::ALL
        .iter()
        .map(|&k| detect_or_skip(k, table, baseline, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    quality_score(issues)
}
