//! Tabular classification data: schema, table, split, column statistics.
//!
//! The target is always the last schema column and must be
//! binary-categorical. Cells are finite `f64`s; literal zeros in
//! `zero_invalid` columns encode missing or impossible measurements and are
//! handled by the quality detectors, not here.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::rng;
use crate::stats;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DatasetError {
    #[error("header mismatch: expected [{expected}], found [{found}]")]
    HeaderMismatch { expected: String, found: String },
    #[error("non-numeric cell at row {row}, column {col}")]
    NonNumericCell { row: usize, col: usize },
    #[error("file has no data rows")]
    EmptyFile,
    #[error("row {row} has {found} cells, expected {expected}")]
    RaggedRow { row: usize, found: usize, expected: usize },
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("feature `{0}` is not numeric")]
    NotNumeric(String),
    #[error("duplicate feature name `{0}`")]
    DuplicateFeature(String),
    #[error("invalid target column: {0}")]
    InvalidTarget(String),
    #[error("binary-categorical column `{0}` has more than two levels")]
    TooManyLevels(String),
    #[error("a class would be absent from the train or test part")]
    DegenerateClass,
    #[error("test fraction must lie in (0, 1), got {0}")]
    InvalidFraction(f64),
    #[error("duplicate row id {0}")]
    DuplicateRowId(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    Numeric,
    BinaryCategorical,
}

/// Per-column semantics, as listed in the metadata sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default)]
    pub unit: String,
    /// A literal 0 is impossible for this measurement and counts as an extreme value.
    #[serde(default)]
    pub zero_invalid: bool,
    /// Display metadata only.
    #[serde(default)]
    pub actionable: bool,
}

impl FeatureMeta {
    pub fn numeric(name: impl Into<String>) -> Self {
        FeatureMeta {
            name: name.into(),
            kind: FeatureKind::Numeric,
            unit: String::new(),
            zero_invalid: false,
            actionable: false,
        }
    }

    pub fn binary(name: impl Into<String>) -> Self {
        FeatureMeta {
            kind: FeatureKind::BinaryCategorical,
            ..FeatureMeta::numeric(name)
        }
    }

    pub fn zero_invalid(mut self) -> Self {
        self.zero_invalid = true;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            test_fraction: 0.2,
            seed: 42,
            stratified: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub feature: String,
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub zero_fraction: f64,
}

/// An immutable table of finite numeric cells with stable row identifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataTable {
    schema: Vec<FeatureMeta>,
    rows: Vec<Vec<f64>>,
    row_ids: Vec<u64>,
}

impl DataTable {
    /// Build a table, validating the schema, the row shape and the row ids.
    pub fn new(
        schema: Vec<FeatureMeta>,
        rows: Vec<Vec<f64>>,
        row_ids: Vec<u64>,
    ) -> Result<Self, DatasetError> {
        let Some(target) = schema.last() else {
            return Err(DatasetError::InvalidTarget("empty schema".into()));
        };
        if target.kind != FeatureKind::BinaryCategorical {
            return Err(DatasetError::InvalidTarget(alloc::format!(
                "`{}` must be binary-categorical",
                target.name
            )));
        }
        for (i, m) in schema.iter().enumerate() {
            if schema[..i].iter().any(|o| o.name == m.name) {
                return Err(DatasetError::DuplicateFeature(m.name.clone()));
            }
        }
        if rows.is_empty() {
            return Err(DatasetError::EmptyFile);
        }
        if rows.len() != row_ids.len() {
            return Err(DatasetError::RaggedRow {
                row: rows.len().min(row_ids.len()),
                found: row_ids.len(),
                expected: rows.len(),
            });
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(DatasetError::RaggedRow {
                    row: r,
                    found: row.len(),
                    expected: schema.len(),
                });
            }
            if let Some(c) = row.iter().position(|v| !v.is_finite()) {
                return Err(DatasetError::NonNumericCell { row: r, col: c });
            }
        }
        let mut ids = row_ids.clone();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(DatasetError::DuplicateRowId(w[0]));
        }
        let table = DataTable {
            schema,
            rows,
            row_ids,
        };
        for (c, m) in table.schema.iter().enumerate() {
            if m.kind == FeatureKind::BinaryCategorical && table.distinct_values(c).len() > 2 {
                return Err(DatasetError::TooManyLevels(m.name.clone()));
            }
        }
        Ok(table)
    }

    /// Build a table from textual records, checking the header against the
    /// schema and parsing every cell as a finite decimal number. Row ids are
    /// assigned `0..n` in record order.
    pub fn from_text_records<H, R, C>(
        schema: Vec<FeatureMeta>,
        header: &[H],
        records: R,
    ) -> Result<Self, DatasetError>
    where
        H: AsRef<str>,
        R: IntoIterator<Item = C>,
        C: AsRef<[String]>,
    {
        let expected: Vec<&str> = schema.iter().map(|m| m.name.as_str()).collect();
        let found: Vec<&str> = header.iter().map(|h| h.as_ref().trim()).collect();
        if expected != found {
            return Err(DatasetError::HeaderMismatch {
                expected: expected.join(","),
                found: found.join(","),
            });
        }
        let mut rows = Vec::new();
        for (r, rec) in records.into_iter().enumerate() {
            let rec = rec.as_ref();
            if rec.len() != schema.len() {
                return Err(DatasetError::RaggedRow {
                    row: r,
                    found: rec.len(),
                    expected: schema.len(),
                });
            }
            let mut row = Vec::with_capacity(rec.len());
            for (c, cell) in rec.iter().enumerate() {
                match cell.trim().parse::<f64>() {
                    Ok(v) if v.is_finite() => row.push(v),
                    _ => return Err(DatasetError::NonNumericCell { row: r, col: c }),
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(DatasetError::EmptyFile);
        }
        let ids = (0..rows.len() as u64).collect();
        DataTable::new(schema, rows, ids)
    }

    pub fn schema(&self) -> &[FeatureMeta] {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row_ids(&self) -> &[u64] {
        &self.row_ids
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn target_index(&self) -> usize {
        self.schema.len() - 1
    }

    pub fn target_name(&self) -> &str {
        &self.schema[self.target_index()].name
    }

    /// Indices of every non-target column.
    pub fn predictor_indices(&self) -> core::ops::Range<usize> {
        0..self.target_index()
    }

    pub fn predictor_names(&self) -> Vec<String> {
        self.predictor_indices()
            .map(|i| self.schema[i].name.clone())
            .collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|m| m.name == name)
    }

    pub fn column(&self, idx: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[idx]).collect()
    }

    pub fn target_column(&self) -> Vec<f64> {
        self.column(self.target_index())
    }

    fn distinct_values(&self, idx: usize) -> Vec<f64> {
        let mut v = stats::sorted(&self.column(idx));
        v.dedup();
        v
    }

    /// Observed target labels in ascending order.
    pub fn labels(&self) -> Vec<f64> {
        self.distinct_values(self.target_index())
    }

    /// `(label, count)` pairs in ascending label order.
    pub fn class_counts(&self) -> Vec<(f64, usize)> {
        let t = self.target_index();
        self.labels()
            .into_iter()
            .map(|l| (l, self.rows.iter().filter(|r| r[t] == l).count()))
            .collect()
    }

    pub fn has_both_classes(&self) -> bool {
        self.labels().len() == 2
    }

    /// Rows at `indices`, keeping their ids.
    pub fn select_rows(&self, indices: &[usize]) -> DataTable {
        DataTable {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            row_ids: indices.iter().map(|&i| self.row_ids[i]).collect(),
        }
    }

    /// Rows for which `keep(row)` holds; `None` when nothing survives.
    pub fn filter_rows(&self, mut keep: impl FnMut(&[f64]) -> bool) -> Option<DataTable> {
        let idx: Vec<usize> = (0..self.n_rows()).filter(|&i| keep(&self.rows[i])).collect();
        (!idx.is_empty()).then(|| self.select_rows(&idx))
    }

    /// Rows whose id satisfies `keep`; `None` when nothing survives.
    pub fn filter_rows_with_ids(&self, mut keep: impl FnMut(u64) -> bool) -> Option<DataTable> {
        let idx: Vec<usize> = (0..self.n_rows()).filter(|&i| keep(self.row_ids[i])).collect();
        (!idx.is_empty()).then(|| self.select_rows(&idx))
    }

    /// Drop the named predictor columns. The target can never be dropped.
    pub fn drop_columns(&self, names: &[String]) -> Result<DataTable, DatasetError> {
        for n in names {
            match self.feature_index(n) {
                None => return Err(DatasetError::UnknownFeature(n.clone())),
                Some(i) if i == self.target_index() => {
                    return Err(DatasetError::InvalidTarget(alloc::format!(
                        "target `{n}` cannot be dropped"
                    )))
                }
                _ => {}
            }
        }
        let keep: Vec<usize> = (0..self.schema.len())
            .filter(|&i| !names.contains(&self.schema[i].name))
            .collect();
        Ok(DataTable {
            schema: keep.iter().map(|&i| self.schema[i].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| keep.iter().map(|&i| r[i]).collect())
                .collect(),
            row_ids: self.row_ids.clone(),
        })
    }

    /// Append rows with fresh ids above the current maximum.
    pub fn append_rows(&self, rows: Vec<Vec<f64>>) -> Result<DataTable, DatasetError> {
        let next = self.row_ids.iter().max().map_or(0, |m| m + 1);
        let mut all_rows = self.rows.clone();
        let mut ids = self.row_ids.clone();
        ids.extend((0..rows.len() as u64).map(|i| next + i));
        all_rows.extend(rows);
        DataTable::new(self.schema.clone(), all_rows, ids)
    }

    /// Replace every cell of column `idx` by `f(cell)`.
    pub fn map_column(&self, idx: usize, f: impl Fn(f64) -> f64) -> DataTable {
        let mut t = self.clone();
        for r in &mut t.rows {
            r[idx] = f(r[idx]);
        }
        t
    }

    /// Row indices sorted by row id.
    pub(crate) fn canonical_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.n_rows()).collect();
        idx.sort_by_key(|&i| self.row_ids[i]);
        idx
    }

    /// The same rows sorted by row id.
    pub fn canonicalized(&self) -> DataTable {
        self.select_rows(&self.canonical_order())
    }

    /// SHA-256 over the schema names, row ids and cell bit patterns, in
    /// canonical row order, as lowercase hex.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for m in &self.schema {
            h.update(m.name.as_bytes());
            h.update([0u8]);
        }
        for i in self.canonical_order() {
            h.update(self.row_ids[i].to_le_bytes());
            for v in &self.rows[i] {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        let mut out = String::with_capacity(64);
        for b in h.finalize() {
            let _ = write!(out, "{b:02x}");
        }
        out
    }

    /// Deterministic train/test partition. Rows are first put in canonical
    /// row-id order, then shuffled per class (or globally) with a stream
    /// derived from `spec.seed`. Each class contributes
    /// `round(n_class * test_fraction)` rows to the test part.
    pub fn split_train_test(&self, spec: &SplitSpec) -> Result<(DataTable, DataTable), DatasetError> {
        if !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) {
            return Err(DatasetError::InvalidFraction(spec.test_fraction));
        }
        if !self.has_both_classes() {
            return Err(DatasetError::DegenerateClass);
        }
        let order = self.canonical_order();
        let t = self.target_index();
        let mut test_idx = Vec::new();
        let mut train_idx = Vec::new();
        if spec.stratified {
            for (c, label) in self.labels().into_iter().enumerate() {
                let mut members: Vec<usize> =
                    order.iter().copied().filter(|&i| self.rows[i][t] == label).collect();
                members.shuffle(&mut rng::stream(spec.seed, &[rng::TAG_SPLIT, c as u64]));
                let n_test = libm::round(members.len() as f64 * spec.test_fraction) as usize;
                if n_test == 0 || n_test >= members.len() {
                    return Err(DatasetError::DegenerateClass);
                }
                test_idx.extend_from_slice(&members[..n_test]);
                train_idx.extend_from_slice(&members[n_test..]);
            }
        } else {
            let mut members = order;
            members.shuffle(&mut rng::stream(spec.seed, &[rng::TAG_SPLIT]));
            let n_test = libm::round(members.len() as f64 * spec.test_fraction) as usize;
            test_idx.extend_from_slice(&members[..n_test]);
            train_idx.extend_from_slice(&members[n_test..]);
        }
        test_idx.sort_by_key(|&i| self.row_ids[i]);
        train_idx.sort_by_key(|&i| self.row_ids[i]);
        let train = self.select_rows(&train_idx);
        let test = self.select_rows(&test_idx);
        if train.n_rows() == 0 || test.n_rows() == 0 || !train.has_both_classes() || !test.has_both_classes() {
            return Err(DatasetError::DegenerateClass);
        }
        Ok((train, test))
    }

    pub fn column_stats(&self, feature: &str) -> Result<ColumnStats, DatasetError> {
        let idx = self
            .feature_index(feature)
            .ok_or_else(|| DatasetError::UnknownFeature(feature.to_string()))?;
        if self.schema[idx].kind != FeatureKind::Numeric {
            return Err(DatasetError::NotNumeric(feature.to_string()));
        }
        let values = stats::sorted(&self.column(idx));
        let (q1, q2, q3) = stats::quartiles_sorted(&values);
        let zeros = values.iter().filter(|&&v| v == 0.0).count();
        Ok(ColumnStats {
            feature: feature.to_string(),
            count: values.len(),
            mean: stats::mean(&values),
            min: values[0],
            max: values[values.len() - 1],
            q1,
            q2,
            q3,
            zero_fraction: zeros as f64 / values.len() as f64,
        })
    }

    /// Map from row id to row index.
    pub fn row_index_by_id(&self) -> BTreeMap<u64, usize> {
        self.row_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect()
    }
}
