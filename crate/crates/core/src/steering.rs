//! Configuration, retraining, history and rollback.
//!
//! A [`Session`] keeps a history of [`ConfigVersion`]s rooted at version 0
//! (the untouched table). Configuration steps are staged in a draft on top
//! of the committed (last saved or reverted-to) version. `retrain` turns the
//! draft into the single unsaved version, replacing any earlier unsaved one;
//! `save` commits it, `discard` drops it together with the draft, and
//! `revert_to` makes an older saved version current again.
//!
//! Versions store their configuration steps and a table digest, not the
//! table itself: the table of any version is rebuilt by replaying the steps
//! along its parent chain from version 0. Every mutation is journaled so a
//! session can be rebuilt and checked with [`Session::replay`].

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::analytics::{AttemptRecord, Mechanism};
use crate::dataset::{DataTable, DatasetError, SplitSpec};
use crate::explain::{explain, ExplainError, ExplainInputs, ExplainParams, ExplanationBundle, Variant};
use crate::model::{train_forest, ForestParams, ModelError, ModelMetrics, TrainedModel};
use crate::quality::{assess, correct_issue, CorrectionOutcome, IssueKind, QualityConfig, QualityError, QualityReport};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SteeringError {
    #[error("the configuration removes every row")]
    AllRowsFiltered,
    #[error("unknown predictor `{0}`")]
    UnknownFeature(String),
    #[error("range for `{feature}` is inverted: {lower} > {upper}")]
    InvertedRange { feature: String, lower: f64, upper: f64 },
    #[error("range given for excluded feature `{0}`")]
    RangeOnExcludedFeature(String),
    #[error("the selection is empty")]
    EmptySelection,
    #[error("every selected issue is already absent")]
    NothingToCorrect,
    #[error("no version {0} in the saved history")]
    UnknownVersion(u64),
    #[error("there are no unsaved changes")]
    NothingUnsaved,
    #[error("replay diverged at version {version_id}: {what}")]
    ReplayMismatch { version_id: u64, what: &'static str },
    #[error("invalid journal: {0}")]
    InvalidJournal(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Quality(#[from] QualityError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
}

impl SteeringError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            SteeringError::AllRowsFiltered => "AllRowsFiltered",
            SteeringError::UnknownFeature(_) => "UnknownFeature",
            SteeringError::InvertedRange { .. } => "InvertedRange",
            SteeringError::RangeOnExcludedFeature(_) => "RangeOnExcludedFeature",
            SteeringError::EmptySelection => "EmptySelection",
            SteeringError::NothingToCorrect => "NothingToCorrect",
            SteeringError::UnknownVersion(_) => "UnknownVersion",
            SteeringError::NothingUnsaved => "NothingUnsaved",
            SteeringError::ReplayMismatch { .. } => "ReplayMismatch",
            SteeringError::InvalidJournal(_) => "InvalidJournal",
            SteeringError::Dataset(DatasetError::DegenerateClass)
            | SteeringError::Model(ModelError::DegenerateClass)
            | SteeringError::Quality(QualityError::DegenerateClass)
            | SteeringError::Explain(ExplainError::DegenerateClass) => "DegenerateClass",
            SteeringError::Model(ModelError::EmptyTable) | SteeringError::Explain(ExplainError::EmptyTable) => {
                "EmptyTable"
            }
            SteeringError::Quality(QualityError::NotCorrectable(_)) => "NotCorrectable",
            SteeringError::Quality(QualityError::WouldRemoveAllRows) => "AllRowsFiltered",
            SteeringError::Dataset(_) => "DatasetError",
            SteeringError::Model(_) => "ModelError",
            SteeringError::Quality(_) => "QualityError",
            SteeringError::Explain(_) => "ExplainError",
        }
    }
}

/// Inclusive bounds of a range filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManualConfig {
    pub included_features: Vec<String>,
    #[serde(default)]
    pub ranges: BTreeMap<String, Bounds>,
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoConfig {
    pub selected_issues: Vec<IssueKind>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConfigStep {
    Manual(ManualConfig),
    Auto(AutoConfig),
}

impl ConfigStep {
    pub fn mechanism(&self) -> Mechanism {
        match self {
            ConfigStep::Manual(_) => Mechanism::Manual,
            ConfigStep::Auto(_) => Mechanism::Automated,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleWarning {
    pub before_rows: usize,
    pub after_rows: usize,
    pub reduction_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigVersion {
    pub version_id: u64,
    pub parent_id: Option<u64>,
    /// Steps applied on top of the parent's table; empty for version 0.
    pub config: Vec<ConfigStep>,
    pub table_digest: String,
    pub metrics: ModelMetrics,
    pub quality: QualityReport,
    pub bundle: ExplanationBundle,
    pub created_at: u64,
    pub saved: bool,
}

impl ConfigVersion {
    /// `default`, `manual`, `auto` or `mixed`.
    pub fn config_kind(&self) -> &'static str {
        let manual = self.config.iter().any(|s| matches!(s, ConfigStep::Manual(_)));
        let auto = self.config.iter().any(|s| matches!(s, ConfigStep::Auto(_)));
        match (manual, auto) {
            (false, false) => "default",
            (true, false) => "manual",
            (false, true) => "auto",
            (true, true) => "mixed",
        }
    }
}

/// Keep the included predictors and the rows inside every range.
pub fn apply_manual(
    table: &DataTable,
    config: &ManualConfig,
    warning_threshold: f64,
) -> Result<(DataTable, Option<SampleWarning>), SteeringError> {
    if config.included_features.is_empty() {
        return Err(SteeringError::EmptySelection);
    }
    let predictors = table.predictor_names();
    for f in &config.included_features {
        if !predictors.contains(f) {
            return Err(SteeringError::UnknownFeature(f.clone()));
        }
    }
    for (f, b) in &config.ranges {
        if !predictors.contains(f) {
            return Err(SteeringError::UnknownFeature(f.clone()));
        }
        if !config.included_features.contains(f) {
            return Err(SteeringError::RangeOnExcludedFeature(f.clone()));
        }
        if b.lower.is_nan() || b.upper.is_nan() || b.lower > b.upper {
            return Err(SteeringError::InvertedRange { feature: f.clone(), lower: b.lower, upper: b.upper });
        }
    }
    let drop: Vec<String> = predictors.into_iter().filter(|p| !config.included_features.contains(p)).collect();
    let checks: Vec<(usize, Bounds)> = config
        .ranges
        .iter()
        .map(|(f, b)| (table.feature_index(f).expect("validated"), *b))
        .collect();
    let kept = table
        .filter_rows(|r| checks.iter().all(|(c, b)| b.contains(r[*c])))
        .ok_or(SteeringError::AllRowsFiltered)?;
    let out = if drop.is_empty() { kept } else { kept.drop_columns(&drop)? };
    let before = table.n_rows();
    let reduction = 1.0 - out.n_rows() as f64 / before as f64;
    let warning = (reduction > warning_threshold).then_some(SampleWarning {
        before_rows: before,
        after_rows: out.n_rows(),
        reduction_fraction: reduction,
    });
    Ok((out, warning))
}

/// Run the selected corrections in the fixed correction order, skipping
/// issues that are already absent.
pub fn apply_auto(
    table: &DataTable,
    config: &AutoConfig,
    original: &DataTable,
    cfg: &QualityConfig,
) -> Result<(DataTable, Vec<CorrectionOutcome>), SteeringError> {
    if config.selected_issues.is_empty() {
        return Err(SteeringError::EmptySelection);
    }
    if let Some(k) = config.selected_issues.iter().find(|k| !k.is_correctable()) {
        return Err(QualityError::NotCorrectable(*k).into());
    }
    let mut current = table.clone();
    let mut outcomes = Vec::new();
    for kind in IssueKind::CORRECTION_ORDER {
        if !config.selected_issues.contains(&kind) {
            continue;
        }
        match correct_issue(&current, kind, original, config.seed, cfg) {
            Ok(o) => {
                current = o.table_after.clone();
                outcomes.push(o);
            }
            Err(QualityError::NothingToCorrect(_)) => {}
            Err(e) => return Err(e.into()),
        }
    }
    if outcomes.is_empty() {
        return Err(SteeringError::NothingToCorrect);
    }
    Ok((current, outcomes))
}

fn apply_step(
    table: &DataTable,
    step: &ConfigStep,
    original: &DataTable,
    settings: &SessionSettings,
) -> Result<DataTable, SteeringError> {
    match step {
        ConfigStep::Manual(m) => Ok(apply_manual(table, m, settings.warning_threshold)?.0),
        ConfigStep::Auto(a) => Ok(apply_auto(table, a, original, &settings.quality)?.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionSettings {
    pub variant: Variant,
    pub split: SplitSpec,
    pub forest: ForestParams,
    pub quality: QualityConfig,
    pub explain: ExplainParams,
    /// Row-reduction fraction above which a [`SampleWarning`] is raised.
    pub warning_threshold: f64,
}

impl SessionSettings {
    /// Defaults with every seed set to `seed`.
    pub fn new(variant: Variant, seed: u64) -> Self {
        SessionSettings {
            variant,
            split: SplitSpec { seed, ..SplitSpec::default() },
            forest: ForestParams { seed, ..ForestParams::default() },
            quality: QualityConfig::default(),
            explain: ExplainParams { seed, ..ExplainParams::default() },
            warning_threshold: 0.5,
        }
    }
}

/// One line of the history journal.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "entry", rename_all = "snake_case")]
pub enum JournalEntry {
    Version(ConfigVersion),
    Saved { version_id: u64 },
    Discarded { version_id: u64 },
    Reverted { version_id: u64 },
}

/// Source of `created_at` timestamps.
pub type Clock = Box<dyn Fn() -> u64 + Send + Sync>;

pub struct RetrainOutcome<'a> {
    pub version: &'a ConfigVersion,
    /// `None` when the draft was empty.
    pub attempt: Option<AttemptRecord>,
}

pub struct Session {
    id: String,
    settings: SessionSettings,
    original: DataTable,
    /// Saved versions in id order, then at most one unsaved version.
    versions: Vec<ConfigVersion>,
    tables: BTreeMap<u64, DataTable>,
    models: BTreeMap<u64, TrainedModel>,
    committed: u64,
    draft: Vec<ConfigStep>,
    /// Committed table with the draft applied.
    draft_table: DataTable,
    /// Leading draft steps already reflected in the unsaved version.
    trained_steps: usize,
    next_id: u64,
    attempts: Vec<AttemptRecord>,
    journal: Vec<JournalEntry>,
    clock: Clock,
}

impl fmt::Debug for Session {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Session")
            .field("id", &self.id)
            .field("variant", &self.settings.variant)
            .field("committed", &self.committed)
            .field("versions", &self.versions.len())
            .field("draft", &self.draft.len())
            .finish()
    }
}

struct Built {
    metrics: ModelMetrics,
    quality: QualityReport,
    bundle: ExplanationBundle,
    model: TrainedModel,
}

fn build(
    table: &DataTable,
    original: &DataTable,
    settings: &SessionSettings,
    previous: Option<&ModelMetrics>,
) -> Result<Built, SteeringError> {
    let (train, test) = table.split_train_test(&settings.split)?;
    let model = train_forest(&train, &test, &settings.forest)?;
    let quality = assess(table, original, &settings.quality)?;
    let inputs = ExplainInputs { table, train: &train, test: &test, model: &model, quality: &quality };
    let bundle = explain(settings.variant, &inputs, previous, &settings.explain, &settings.quality)?;
    Ok(Built { metrics: model.metrics, quality, bundle, model })
}

impl Session {
    /// Start a session: version 0 is trained on `original` and saved.
    pub fn new(id: impl Into<String>, original: DataTable, settings: SessionSettings) -> Result<Self, SteeringError> {
        Self::with_clock(id, original, settings, Box::new(|| 0))
    }

    pub fn with_clock(
        id: impl Into<String>,
        original: DataTable,
        settings: SessionSettings,
        clock: Clock,
    ) -> Result<Self, SteeringError> {
        let original = original.canonicalized();
        let built = build(&original, &original, &settings, None)?;
        let v0 = ConfigVersion {
            version_id: 0,
            parent_id: None,
            config: Vec::new(),
            table_digest: original.digest(),
            metrics: built.metrics,
            quality: built.quality,
            bundle: built.bundle,
            created_at: clock(),
            saved: true,
        };
        let mut tables = BTreeMap::new();
        tables.insert(0, original.clone());
        let mut models = BTreeMap::new();
        models.insert(0, built.model);
        Ok(Session {
            id: id.into(),
            settings,
            draft_table: original.clone(),
            original,
            journal: alloc::vec![JournalEntry::Version(v0.clone())],
            versions: alloc::vec![v0],
            tables,
            models,
            committed: 0,
            draft: Vec::new(),
            trained_steps: 0,
            next_id: 1,
            attempts: Vec::new(),
            clock,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn settings(&self) -> &SessionSettings {
        &self.settings
    }

    pub fn variant(&self) -> Variant {
        self.settings.variant
    }

    pub fn original(&self) -> &DataTable {
        &self.original
    }

    /// Version 0 test accuracy; attempts must beat it to count as successes.
    pub fn default_accuracy(&self) -> f64 {
        self.versions[0].metrics.test_accuracy
    }

    pub fn versions(&self) -> &[ConfigVersion] {
        &self.versions
    }

    pub fn version(&self, id: u64) -> Option<&ConfigVersion> {
        self.versions.iter().find(|v| v.version_id == id)
    }

    fn unsaved(&self) -> Option<&ConfigVersion> {
        self.versions.last().filter(|v| !v.saved)
    }

    pub fn has_unsaved(&self) -> bool {
        self.unsaved().is_some() || !self.draft.is_empty()
    }

    pub fn committed(&self) -> &ConfigVersion {
        self.version(self.committed).expect("committed version exists")
    }

    /// The version the dashboard shows: the unsaved one if any.
    pub fn head(&self) -> &ConfigVersion {
        self.unsaved().unwrap_or_else(|| self.committed())
    }

    pub fn draft(&self) -> &[ConfigStep] {
        &self.draft
    }

    pub fn working_table(&self) -> &DataTable {
        &self.draft_table
    }

    pub fn table(&self, id: u64) -> Option<&DataTable> {
        self.tables.get(&id)
    }

    pub fn model(&self, id: u64) -> Option<&TrainedModel> {
        self.models.get(&id)
    }

    pub fn attempts(&self) -> &[AttemptRecord] {
        &self.attempts
    }

    pub fn journal(&self) -> &[JournalEntry] {
        &self.journal
    }

    /// Stage a manual step. On error nothing changes.
    pub fn apply_manual(&mut self, config: ManualConfig) -> Result<(&DataTable, Option<SampleWarning>), SteeringError> {
        let (table, warning) = apply_manual(&self.draft_table, &config, self.settings.warning_threshold)?;
        self.draft.push(ConfigStep::Manual(config));
        self.draft_table = table;
        Ok((&self.draft_table, warning))
    }

    /// Stage an automated step. On error nothing changes.
    pub fn apply_auto(&mut self, config: AutoConfig) -> Result<Vec<CorrectionOutcome>, SteeringError> {
        let (table, outcomes) = apply_auto(&self.draft_table, &config, &self.original, &self.settings.quality)?;
        self.draft.push(ConfigStep::Auto(config));
        self.draft_table = table;
        Ok(outcomes)
    }

    /// Train on the working table and make the result the unsaved version.
    pub fn retrain(&mut self) -> Result<RetrainOutcome<'_>, SteeringError> {
        let parent = self.committed().metrics;
        let built = build(&self.draft_table, &self.original, &self.settings, Some(&parent))?;
        let id = self.next_id;
        let version = ConfigVersion {
            version_id: id,
            parent_id: Some(self.committed),
            config: self.draft.clone(),
            table_digest: self.draft_table.digest(),
            metrics: built.metrics,
            quality: built.quality,
            bundle: built.bundle,
            created_at: (self.clock)(),
            saved: false,
        };
        self.install(version, built.model);
        let attempt = self.draft.last().map(|step| AttemptRecord {
            attempt_id: id,
            session_id: self.id.clone(),
            mechanism: step.mechanism(),
            resulting_test_accuracy: built.metrics.test_accuracy,
            success: built.metrics.test_accuracy > self.default_accuracy(),
        });
        if let Some(a) = &attempt {
            self.attempts.push(a.clone());
        }
        Ok(RetrainOutcome { version: self.versions.last().expect("just pushed"), attempt })
    }

    fn install(&mut self, version: ConfigVersion, model: TrainedModel) {
        self.drop_unsaved();
        let id = version.version_id;
        self.next_id = id + 1;
        self.trained_steps = self.draft.len();
        self.journal.push(JournalEntry::Version(version.clone()));
        self.tables.insert(id, self.draft_table.clone());
        self.models.insert(id, model);
        self.versions.push(version);
    }

    fn drop_unsaved(&mut self) -> Option<u64> {
        let id = self.unsaved()?.version_id;
        self.versions.pop();
        self.tables.remove(&id);
        self.models.remove(&id);
        Some(id)
    }

    /// Commit the unsaved version. Draft steps staged after its retrain
    /// stay in the draft.
    pub fn save(&mut self) -> Result<&ConfigVersion, SteeringError> {
        let id = self.unsaved().ok_or(SteeringError::NothingUnsaved)?.version_id;
        self.versions.last_mut().expect("unsaved exists").saved = true;
        self.committed = id;
        self.draft.drain(..self.trained_steps);
        self.trained_steps = 0;
        self.journal.push(JournalEntry::Saved { version_id: id });
        Ok(self.committed())
    }

    /// Drop the unsaved version and the draft.
    pub fn discard(&mut self) -> Result<&ConfigVersion, SteeringError> {
        if !self.has_unsaved() {
            return Err(SteeringError::NothingUnsaved);
        }
        if let Some(id) = self.drop_unsaved() {
            self.journal.push(JournalEntry::Discarded { version_id: id });
        }
        self.reset_draft();
        Ok(self.committed())
    }

    /// Make a saved version current again, dropping unsaved work.
    pub fn revert_to(&mut self, version_id: u64) -> Result<&ConfigVersion, SteeringError> {
        if !self.versions.iter().any(|v| v.saved && v.version_id == version_id) {
            return Err(SteeringError::UnknownVersion(version_id));
        }
        self.drop_unsaved();
        self.committed = version_id;
        self.reset_draft();
        self.journal.push(JournalEntry::Reverted { version_id });
        Ok(self.committed())
    }

    fn reset_draft(&mut self) {
        self.draft.clear();
        self.trained_steps = 0;
        self.draft_table = self.tables[&self.committed].clone();
    }

    /// Rebuild the table of `version_id` from version 0 by replaying the
    /// configuration steps along its parent chain.
    pub fn replay_table(&self, version_id: u64) -> Result<DataTable, SteeringError> {
        let mut chain = Vec::new();
        let mut cur = self.version(version_id).ok_or(SteeringError::UnknownVersion(version_id))?;
        loop {
            chain.push(cur);
            match cur.parent_id {
                None => break,
                Some(p) => cur = self.version(p).ok_or(SteeringError::UnknownVersion(p))?,
            }
        }
        let mut table = self.original.clone();
        for v in chain.iter().rev() {
            for step in &v.config {
                table = apply_step(&table, step, &self.original, &self.settings)?;
            }
        }
        Ok(table)
    }

    /// Rebuild a session by re-executing its journal, checking that every
    /// recorded digest and metric is reproduced bit-exactly.
    pub fn replay(
        id: impl Into<String>,
        original: DataTable,
        settings: SessionSettings,
        entries: &[JournalEntry],
        clock: Clock,
    ) -> Result<Self, SteeringError> {
        let Some((JournalEntry::Version(v0), rest)) = entries.split_first() else {
            return Err(SteeringError::InvalidJournal("journal must start with version 0".into()));
        };
        let mut s = Session::with_clock(id, original, settings, Box::new(|| 0))?;
        check(&s.versions[0], v0)?;
        s.versions[0].created_at = v0.created_at;
        s.journal[0] = JournalEntry::Version(s.versions[0].clone());
        for entry in rest {
            match entry {
                JournalEntry::Version(v) => {
                    if v.parent_id != Some(s.committed) || v.version_id < s.next_id {
                        return Err(SteeringError::ReplayMismatch { version_id: v.version_id, what: "lineage" });
                    }
                    let mut table = s.tables[&s.committed].clone();
                    for step in &v.config {
                        table = apply_step(&table, step, &s.original, &s.settings)?;
                    }
                    s.draft = v.config.clone();
                    s.draft_table = table;
                    s.next_id = v.version_id;
                    s.retrain()?;
                    let rebuilt = s.versions.last_mut().expect("retrained");
                    check(rebuilt, v)?;
                    rebuilt.created_at = v.created_at;
                    *s.journal.last_mut().expect("journaled") = JournalEntry::Version(rebuilt.clone());
                }
                JournalEntry::Saved { version_id } => {
                    if s.unsaved().map(|v| v.version_id) != Some(*version_id) {
                        return Err(SteeringError::ReplayMismatch { version_id: *version_id, what: "save target" });
                    }
                    s.save()?;
                    s.reset_draft();
                }
                JournalEntry::Discarded { version_id } => {
                    if s.unsaved().map(|v| v.version_id) != Some(*version_id) {
                        return Err(SteeringError::ReplayMismatch { version_id: *version_id, what: "discard target" });
                    }
                    s.discard()?;
                }
                JournalEntry::Reverted { version_id } => {
                    s.revert_to(*version_id)?;
                }
            }
        }
        s.clock = clock;
        Ok(s)
    }
}

fn check(rebuilt: &ConfigVersion, recorded: &ConfigVersion) -> Result<(), SteeringError> {
    let version_id = recorded.version_id;
    if rebuilt.table_digest != recorded.table_digest {
        return Err(SteeringError::ReplayMismatch { version_id, what: "table digest" });
    }
    let (a, b) = (&rebuilt.metrics, &recorded.metrics);
    if a.train_accuracy.to_bits() != b.train_accuracy.to_bits()
        || a.test_accuracy.to_bits() != b.test_accuracy.to_bits()
        || a.n_train_samples != b.n_train_samples
        || a.n_features != b.n_features
    {
        return Err(SteeringError::ReplayMismatch { version_id, what: "metrics" });
    }
    Ok(())
}

impl fmt::Display for ConfigStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigStep::Manual(m) => write!(f, "manual: {} features, {} ranges", m.included_features.len(), m.ranges.len()),
            ConfigStep::Auto(a) => {
                let names: Vec<String> = a.selected_issues.iter().map(|k| k.to_string()).collect();
                write!(f, "auto: {}", names.join(", "))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FeatureMeta;
    use alloc::vec;

    /// 40 rows; y depends on a, b is noise, c duplicates a.
    fn toy() -> DataTable {
        let schema = vec![
            FeatureMeta::numeric("a"),
            FeatureMeta::numeric("b"),
            FeatureMeta::numeric("c"),
            FeatureMeta::binary("y"),
        ];
        let rows = (0..40)
            .map(|i| {
                let a = i as f64;
                vec![a, ((i * 13) % 7) as f64, 2.0 * a + 1.0, f64::from(u8::from(i % 10 >= 4))]
            })
            .collect();
        DataTable::new(schema, rows, (0..40).collect()).unwrap()
    }

    fn settings() -> SessionSettings {
        let mut s = SessionSettings::new(Variant::HYB, 7);
        s.forest.n_trees = 15;
        s.explain.rules.n_estimators = 5;
        s.explain.importance_repeats = 2;
        s
    }

    fn manual(features: &[&str], ranges: &[(&str, f64, f64)]) -> ManualConfig {
        ManualConfig {
            included_features: features.iter().map(|f| f.to_string()).collect(),
            ranges: ranges.iter().map(|(f, l, u)| (f.to_string(), Bounds { lower: *l, upper: *u })).collect(),
        }
    }

    #[test]
    fn manual_config_examples() {
        let t = toy();
        let (out, w) = apply_manual(&t, &manual(&["a", "c"], &[]), 0.5).unwrap();
        assert_eq!(out.predictor_names(), vec!["a", "c"]);
        assert_eq!((out.n_rows(), w), (40, None));

        let (out, w) = apply_manual(&t, &manual(&["a", "b", "c"], &[("a", 24.0, 39.0)]), 0.5).unwrap();
        assert_eq!(out.n_rows(), 16);
        let w = w.unwrap();
        assert_eq!((w.before_rows, w.after_rows), (40, 16));
        assert!((w.reduction_fraction - 0.6).abs() < 1e-12);

        let half = apply_manual(&t, &manual(&["a"], &[("a", 20.0, 39.0)]), 0.5).unwrap();
        assert!(half.1.is_none());

        assert_eq!(
            apply_manual(&t, &manual(&["a"], &[("a", 5.0, 1.0)]), 0.5).unwrap_err().code(),
            "InvertedRange"
        );
        assert_eq!(
            apply_manual(&t, &manual(&["zz"], &[]), 0.5).unwrap_err(),
            SteeringError::UnknownFeature("zz".into())
        );
        assert_eq!(
            apply_manual(&t, &manual(&["y"], &[]), 0.5).unwrap_err(),
            SteeringError::UnknownFeature("y".into())
        );
        assert_eq!(
            apply_manual(&t, &manual(&["a"], &[("b", 0.0, 1.0)]), 0.5).unwrap_err(),
            SteeringError::RangeOnExcludedFeature("b".into())
        );
        assert_eq!(
            apply_manual(&t, &manual(&["a"], &[("a", 100.0, 200.0)]), 0.5).unwrap_err(),
            SteeringError::AllRowsFiltered
        );
        assert_eq!(apply_manual(&t, &manual(&[], &[]), 0.5).unwrap_err(), SteeringError::EmptySelection);
    }

    #[test]
    fn auto_config_examples() {
        let t = toy();
        let dup = t.append_rows(vec![t.rows()[3].clone()]).unwrap();
        let cfg = AutoConfig { selected_issues: vec![IssueKind::RedundantRows], seed: 1 };
        let (out, outcomes) = apply_auto(&dup, &cfg, &dup, &QualityConfig::default()).unwrap();
        assert_eq!((out.n_rows(), outcomes.len()), (40, 1));
        assert_eq!(
            apply_auto(&t, &cfg, &t, &QualityConfig::default()).unwrap_err(),
            SteeringError::NothingToCorrect
        );
        let empty = AutoConfig { selected_issues: vec![], seed: 1 };
        assert_eq!(apply_auto(&t, &empty, &t, &QualityConfig::default()).unwrap_err(), SteeringError::EmptySelection);
        let drift = AutoConfig { selected_issues: vec![IssueKind::DataDrift], seed: 1 };
        assert_eq!(apply_auto(&t, &drift, &t, &QualityConfig::default()).unwrap_err().code(), "NotCorrectable");
    }

    #[test]
    fn state_machine() {
        let mut s = Session::new("s", toy(), settings()).unwrap();
        assert_eq!(s.discard().unwrap_err(), SteeringError::NothingUnsaved);
        let v0 = s.head().clone();

        let same = s.retrain().unwrap();
        assert!(same.attempt.is_none());
        assert_eq!(same.version.metrics, v0.metrics);
        assert_eq!(same.version.table_digest, v0.table_digest);

        s.apply_manual(manual(&["a", "b"], &[])).unwrap();
        let out = s.retrain().unwrap();
        assert_eq!(out.version.version_id, 2);
        assert_eq!(out.version.parent_id, Some(0));
        assert_eq!(out.attempt.as_ref().unwrap().mechanism, Mechanism::Manual);
        assert_eq!(s.versions().len(), 2, "retrain replaces the unsaved version");

        s.save().unwrap();
        assert_eq!(s.save().unwrap_err(), SteeringError::NothingUnsaved);
        assert_eq!(s.discard().unwrap_err(), SteeringError::NothingUnsaved);
        assert_eq!(s.committed().version_id, 2);

        assert_eq!(s.revert_to(7).unwrap_err(), SteeringError::UnknownVersion(7));
        let back = s.revert_to(0).unwrap().clone();
        assert_eq!(back.metrics, v0.metrics);
        assert_eq!(s.working_table().digest(), v0.table_digest);
        let again = s.retrain().unwrap();
        assert_eq!(again.version.metrics, v0.metrics);
        assert_eq!(again.version.version_id, 3);
    }

    #[test]
    fn failed_steps_leave_state_untouched() {
        let mut s = Session::new("s", toy(), settings()).unwrap();
        let before = s.working_table().digest();
        assert!(s.apply_manual(manual(&["a"], &[("a", 3.0, 1.0)])).is_err());
        assert_eq!(s.working_table().digest(), before);
        assert!(s.draft().is_empty());
        // Only positives survive: retrain fails and nothing is appended.
        s.apply_manual(manual(&["a", "b", "c"], &[("a", 4.0, 9.0)])).unwrap();
        assert!(s.retrain().is_err());
        assert_eq!(s.versions().len(), 1);
        assert_eq!(s.journal().len(), 1);
    }

    #[test]
    fn exclusion_recalibrates_every_tile() {
        let mut s = Session::new("s", toy(), settings()).unwrap();
        s.apply_manual(manual(&["a", "b"], &[])).unwrap();
        let v = s.retrain().unwrap().version;
        let b = &v.bundle;
        assert!(b.importances.as_ref().unwrap().scores.iter().all(|x| x.feature != "c"));
        assert!(b.density.as_ref().unwrap().iter().all(|d| d.feature != "c"));
        assert!(b.rules.as_ref().unwrap().iter().all(|r| r.conditions.iter().all(|c| c.feature != "c")));
        let ki = b.key_insights.as_ref().unwrap();
        assert!(ki.top.iter().chain(&ki.rest).all(|k| k.feature != "c"));
    }

    #[test]
    fn journal_replay_reproduces_history() {
        let mut s = Session::new("s", toy(), settings()).unwrap();
        s.apply_manual(manual(&["a", "b"], &[("a", 0.0, 35.0)])).unwrap();
        s.retrain().unwrap();
        s.save().unwrap();
        s.apply_auto(AutoConfig { selected_issues: vec![IssueKind::ClassImbalance], seed: 3 }).unwrap();
        s.retrain().unwrap();
        s.discard().unwrap();
        s.apply_auto(AutoConfig { selected_issues: vec![IssueKind::ClassImbalance], seed: 4 }).unwrap();
        s.retrain().unwrap();
        s.save().unwrap();
        s.revert_to(0).unwrap();

        let r = Session::replay("s", toy(), settings(), s.journal(), Box::new(|| 0)).unwrap();
        assert_eq!(r.versions(), s.versions());
        assert_eq!(r.committed().version_id, 0);
        assert_eq!(r.journal(), s.journal());
        for v in s.versions() {
            assert_eq!(s.replay_table(v.version_id).unwrap().digest(), v.table_digest);
        }

        let mut tampered = s.journal().to_vec();
        if let JournalEntry::Version(v) = &mut tampered[1] {
            v.table_digest = "00".into();
        }
        assert_eq!(
            Session::replay("s", toy(), settings(), &tampered, Box::new(|| 0)).unwrap_err().code(),
            "ReplayMismatch"
        );
    }
}
