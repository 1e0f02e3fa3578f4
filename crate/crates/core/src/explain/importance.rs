use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::ExplainError;
use crate::dataset::DataTable;
use crate::model::TrainedModel;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceScore {
    pub feature: String,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Importances {
    pub scores: Vec<ImportanceScore>,
    /// Set when no feature permutation lowers accuracy; all percents are 0.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

pub const UNINFORMATIVE_NOTE: &str = "uninformative model: permuting any single feature leaves test accuracy unchanged";

/// Raw permutation importances: mean accuracy drop over `repeats` seeded
/// shuffles of each model feature's column, in model feature order.
pub fn raw_permutation_importance(
    model: &TrainedModel,
    test: &DataTable,
    repeats: usize,
    seed: u64,
) -> Result<Vec<f64>, ExplainError> {
    if test.n_rows() == 0 {
        return Err(ExplainError::EmptyTable);
    }
    let cols = model.column_map(test)?;
    let t = test.target_index();
    let y: Vec<f64> = test.rows().iter().map(|r| r[t]).collect();
    let x: Vec<Vec<f64>> = test
        .rows()
        .iter()
        .map(|r| cols.iter().map(|&c| r[c]).collect())
        .collect();
    let accuracy = |x: &[Vec<f64>]| -> f64 {
        let hits = x.iter().zip(&y).filter(|(row, label)| model.vote(row) == **label).count();
        hits as f64 / y.len() as f64
    };
    let baseline = accuracy(&x);
    let repeats = repeats.max(1);
    let mut raw = Vec::with_capacity(cols.len());
    let mut work = x.clone();
    for f in 0..cols.len() {
        let mut total = 0.0;
        for r in 0..repeats {
            let mut column: Vec<f64> = x.iter().map(|row| row[f]).collect();
            column.shuffle(&mut rng::stream(seed, &[rng::TAG_PERMUTE, f as u64, r as u64]));
            for (row, v) in work.iter_mut().zip(column) {
                row[f] = v;
            }
            total += baseline - accuracy(&work);
        }
        for (row, orig) in work.iter_mut().zip(&x) {
            row[f] = orig[f];
        }
        raw.push(total / repeats as f64);
    }
    Ok(raw)
}

/// Permutation importance normalized to percents: negative drops are
/// clipped to zero and the rest scaled to sum to 100. Sorted by percent
/// descending, then feature name.
pub fn feature_importance(
    model: &TrainedModel,
    test: &DataTable,
    repeats: usize,
    seed: u64,
) -> Result<Importances, ExplainError> {
    let raw: Vec<f64> = raw_permutation_importance(model, test, repeats, seed)?
        .into_iter()
        .map(|v| v.max(0.0))
        .collect();
    let total: f64 = raw.iter().sum();
    let mut scores: Vec<ImportanceScore> = model
        .feature_names
        .iter()
        .zip(&raw)
        .map(|(f, &v)| ImportanceScore {
            feature: f.clone(),
            percent: if total > 0.0 { 100.0 * v / total } else { 0.0 },
        })
        .collect();
    scores.sort_by(|a, b| b.percent.total_cmp(&a.percent).then_with(|| a.feature.cmp(&b.feature)));
    Ok(Importances {
        scores,
        note: (total <= 0.0).then(|| String::from(UNINFORMATIVE_NOTE)),
    })
}
