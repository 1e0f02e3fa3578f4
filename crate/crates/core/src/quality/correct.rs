//! Automated corrections, one per correctable issue kind.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{detect, detect_or_skip, oversample, pairwise_correlations, IssueKind, IssueReport, QualityConfig, QualityError};
use crate::dataset::DataTable;
use crate::stats;

/// Before/after view of one correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionOutcome {
    pub kind: IssueKind,
    pub before: IssueReport,
    pub after: IssueReport,
    pub table_after: DataTable,
    pub rows_removed: usize,
    pub rows_added: usize,
    pub features_removed: Vec<String>,
    /// Row ids of the two parents of each synthetic row, in the order the
    /// synthetic rows were appended.
    pub synthetic_parents: Vec<(u64, u64)>,
}

/// Apply the automated correction for `kind` and re-run its detector.
///
/// * `Outliers`: drop every flagged row, repeating on the remainder while
///   the re-run detector scores below the original.
/// * `RedundantRows`: keep the first occurrence of each row.
/// * `CorrelatedFeatures`: for each offending pair (strongest first) drop the
///   member less correlated with the target.
/// * `ClassImbalance`: oversample the minority class until counts match.
/// * `Skewness`: replace each flagged column by `ln(1 + x - min)`.
pub fn correct_issue(
    table: &DataTable,
    kind: IssueKind,
    baseline: &DataTable,
    seed: u64,
    cfg: &QualityConfig,
) -> Result<CorrectionOutcome, QualityError> {
    if !kind.is_correctable() {
        return Err(QualityError::NotCorrectable(kind));
    }
    let before = detect(kind, table, baseline, cfg)?;
    if before.subscore >= 100.0 {
        return Err(QualityError::NothingToCorrect(kind));
    }
    let mut features_removed = Vec::new();
    let mut synthetic_parents = Vec::new();
    let table_after = match kind {
        IssueKind::RedundantRows => drop_rows(table, &before.affected_row_ids)?,
        IssueKind::Outliers => {
            // Fences move once rows go, so a pass can expose new outliers;
            // repeat until the subscore is no worse than before.
            let mut t = drop_rows(table, &before.affected_row_ids)?;
            loop {
                let again = detect_or_skip(kind, &t, baseline, cfg)?;
                if again.subscore >= before.subscore {
                    break t;
                }
                t = drop_rows(&t, &again.affected_row_ids)?;
            }
        }
        IssueKind::Skewness => {
            let mut t = table.clone();
            for name in &before.affected_features {
                let c = t.feature_index(name).expect("flagged feature exists");
                let min = stats::sorted(&t.column(c))[0];
                t = t.map_column(c, |v| libm::log1p(v - min));
            }
            t
        }
        IssueKind::CorrelatedFeatures => {
            features_removed = correlated_drop_set(table, cfg);
            table.drop_columns(&features_removed)?
        }
        IssueKind::ClassImbalance => {
            let synth = oversample(table, cfg.smote_k, seed);
            let ids = table.row_ids();
            synthetic_parents = synth.parents.iter().map(|&(a, b)| (ids[a], ids[b])).collect();
            table.append_rows(synth.rows)?
        }
        IssueKind::DataDrift => unreachable!("drift is not correctable"),
    };
    let after = detect_or_skip(kind, &table_after, baseline, cfg)?;
    Ok(CorrectionOutcome {
        kind,
        before,
        rows_removed: table.n_rows().saturating_sub(table_after.n_rows()).min(table.n_rows()),
        rows_added: table_after.n_rows().saturating_sub(table.n_rows()),
        after,
        table_after,
        features_removed,
        synthetic_parents,
    })
}

fn drop_rows(table: &DataTable, ids: &[u64]) -> Result<DataTable, QualityError> {
    let drop: BTreeSet<u64> = ids.iter().copied().collect();
    table
        .filter_rows_with_ids(|id| !drop.contains(&id))
        .ok_or(QualityError::WouldRemoveAllRows)
}

/// Predictors to drop so that no offending pair remains. Pairs are visited
/// by descending |r| (ties by column order); a pair with an already-dropped
/// member is skipped; otherwise the member with the lower |r| to the target
/// goes, the later column on a tie.
fn correlated_drop_set(table: &DataTable, cfg: &QualityConfig) -> Vec<String> {
    let target = table.target_column();
    let to_target: Vec<f64> = table
        .predictor_indices()
        .map(|c| stats::pearson(&table.column(c), &target).map_or(0.0, libm::fabs))
        .collect();
    let mut pairs: Vec<(f64, usize, usize)> = pairwise_correlations(table)
        .into_iter()
        .filter_map(|p| p.r.map(libm::fabs).filter(|r| *r >= cfg.correlation_threshold).map(|r| (r, p.a, p.b)))
        .collect();
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    let mut dropped = alloc::vec![false; to_target.len()];
    for (_, a, b) in pairs {
        if dropped[a] || dropped[b] {
            continue;
        }
        let victim = if to_target[a] < to_target[b] { a } else { b };
        dropped[victim] = true;
    }
    (0..dropped.len())
        .filter(|&i| dropped[i])
        .map(|i| table.schema()[i].name.clone())
        .collect()
}
