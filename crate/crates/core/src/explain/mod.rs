//! The five global explanation payloads and the variant-filtered bundle.
//!
//! | tile | payload                          | variants  |
//! |------|----------------------------------|-----------|
//! | KI   | [`KeyInsights`]                  | DCE, HYB  |
//! | DDD  | one [`DensityProfile`] per feature | DCE, HYB |
//! | DQ   | [`QualityReport`]                | DCE, HYB  |
//! | IRF  | [`Importances`]                  | MCE, HYB  |
//! | TDR  | [`DecisionRule`]s                | MCE, HYB  |

mod density;
mod importance;
mod insights;
mod rules;

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

pub use density::{density_distribution, DensityProfile};
pub use importance::{feature_importance, raw_permutation_importance, ImportanceScore, Importances, UNINFORMATIVE_NOTE};
pub use insights::{key_insights, InsightMetric, KeyInsight, KeyInsights};
pub use rules::{evaluate_rule, top_decision_rules, Condition, DecisionRule, RuleOp, RuleParams};

use crate::dataset::{DataTable, FeatureKind};
use crate::model::{accuracy_delta, ModelError, ModelMetrics, TrainedModel};
use crate::quality::{QualityConfig, QualityReport};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExplainError {
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("feature `{0}` is not numeric")]
    NotNumeric(String),
    #[error("both classes must be present")]
    DegenerateClass,
    #[error("table has no rows")]
    EmptyTable,
    #[error("variant {variant} requires the {tile} tile")]
    MissingPart { variant: Variant, tile: Tile },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    /// Data-centric explanations only.
    DCE,
    /// Model-centric explanations only.
    MCE,
    /// Both.
    HYB,
}

impl Variant {
    pub fn tiles(self) -> &'static [Tile] {
        match self {
            Variant::DCE => &[Tile::KeyInsights, Tile::DataDensity, Tile::DataQuality],
            Variant::MCE => &[Tile::TopDecisionRules, Tile::RiskFactors],
            Variant::HYB => &[
                Tile::KeyInsights,
                Tile::DataDensity,
                Tile::DataQuality,
                Tile::TopDecisionRules,
                Tile::RiskFactors,
            ],
        }
    }

    pub fn shows(self, tile: Tile) -> bool {
        self.tiles().contains(&tile)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownVariant(pub String);

impl fmt::Display for UnknownVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown dashboard variant `{}` (expected DCE, MCE or HYB)", self.0)
    }
}

impl core::error::Error for UnknownVariant {}

impl FromStr for Variant {
    type Err = UnknownVariant;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "DCE" => Ok(Variant::DCE),
            "MCE" => Ok(Variant::MCE),
            "HYB" => Ok(Variant::HYB),
            _ => Err(UnknownVariant(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tile {
    #[serde(rename = "KI")]
    KeyInsights,
    #[serde(rename = "DDD")]
    DataDensity,
    #[serde(rename = "DQ")]
    DataQuality,
    #[serde(rename = "TDR")]
    TopDecisionRules,
    #[serde(rename = "IRF")]
    RiskFactors,
}

impl Tile {
    pub fn code(self) -> &'static str {
        match self {
            Tile::KeyInsights => "KI",
            Tile::DataDensity => "DDD",
            Tile::DataQuality => "DQ",
            Tile::TopDecisionRules => "TDR",
            Tile::RiskFactors => "IRF",
        }
    }

    pub fn help_text(self) -> &'static str {
        match self {
            Tile::KeyInsights => "Key Insights: percentages of biased and extreme values found in the training data, most severe first. Hover for the remaining insights.",
            Tile::DataDensity => "Data Density Distribution: how the training values of each feature are spread, with the average value and the ranges that hold abnormal values.",
            Tile::DataQuality => "Data Quality: an overall score from six equally weighted data issues. Good above 80, moderate from 50 to 80, poor below 50.",
            Tile::TopDecisionRules => "Top Decision Rules: simple conditions that the training data supports for predicting each outcome, with their precision and recall.",
            Tile::RiskFactors => "Important Risk Factors: how much the model's test accuracy drops when each feature is scrambled, as a share of the total.",
        }
    }
}

impl fmt::Display for Tile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub metrics: ModelMetrics,
    /// Percent change of test accuracy from the previous version.
    pub accuracy_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationBundle {
    pub variant: Variant,
    pub header: Header,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key_insights: Option<KeyInsights>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<Vec<DensityProfile>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality: Option<QualityReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub importances: Option<Importances>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rules: Option<Vec<DecisionRule>>,
    pub help_texts: BTreeMap<String, String>,
}

impl ExplanationBundle {
    /// Tiles this bundle carries, in display order.
    pub fn tiles(&self) -> Vec<Tile> {
        let mut t = Vec::new();
        if self.key_insights.is_some() {
            t.push(Tile::KeyInsights);
        }
        if self.density.is_some() {
            t.push(Tile::DataDensity);
        }
        if self.quality.is_some() {
            t.push(Tile::DataQuality);
        }
        if self.rules.is_some() {
            t.push(Tile::TopDecisionRules);
        }
        if self.importances.is_some() {
            t.push(Tile::RiskFactors);
        }
        t
    }
}

/// Candidate tile payloads; the bundle keeps only those its variant shows.
#[derive(Debug, Clone, Default)]
pub struct BundleParts {
    pub key_insights: Option<KeyInsights>,
    pub density: Option<Vec<DensityProfile>>,
    pub quality: Option<QualityReport>,
    pub importances: Option<Importances>,
    pub rules: Option<Vec<DecisionRule>>,
}

fn take<T>(variant: Variant, tile: Tile, part: Option<T>) -> Result<Option<T>, ExplainError> {
    if !variant.shows(tile) {
        return Ok(None);
    }
    part.map(Some).ok_or(ExplainError::MissingPart { variant, tile })
}

pub fn build_bundle(
    variant: Variant,
    metrics: ModelMetrics,
    previous: Option<&ModelMetrics>,
    parts: BundleParts,
) -> Result<ExplanationBundle, ExplainError> {
    let bundle = ExplanationBundle {
        variant,
        header: Header {
            metrics,
            accuracy_delta: previous.and_then(|p| accuracy_delta(&metrics, p).ok()),
        },
        key_insights: take(variant, Tile::KeyInsights, parts.key_insights)?,
        density: take(variant, Tile::DataDensity, parts.density)?,
        quality: take(variant, Tile::DataQuality, parts.quality)?,
        importances: take(variant, Tile::RiskFactors, parts.importances)?,
        rules: take(variant, Tile::TopDecisionRules, parts.rules)?,
        help_texts: variant
            .tiles()
            .iter()
            .map(|t| (t.code().to_string(), t.help_text().to_string()))
            .collect(),
    };
    Ok(bundle)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplainParams {
    pub top_k_insights: usize,
    pub n_bins: usize,
    pub importance_repeats: usize,
    pub rules: RuleParams,
    pub seed: u64,
}

impl Default for ExplainParams {
    fn default() -> Self {
        ExplainParams {
            top_k_insights: 4,
            n_bins: 10,
            importance_repeats: 10,
            rules: RuleParams::default(),
            seed: 42,
        }
    }
}

/// Inputs from which every tile is computed.
pub struct ExplainInputs<'a> {
    /// The whole configured table (data-centric tiles).
    pub table: &'a DataTable,
    /// Training part (decision rules).
    pub train: &'a DataTable,
    /// Test part (permutation importance).
    pub test: &'a DataTable,
    pub model: &'a TrainedModel,
    pub quality: &'a QualityReport,
}

/// Compute the tiles `variant` shows and assemble the bundle.
pub fn explain(
    variant: Variant,
    inputs: &ExplainInputs<'_>,
    previous: Option<&ModelMetrics>,
    params: &ExplainParams,
    quality_cfg: &QualityConfig,
) -> Result<ExplanationBundle, ExplainError> {
    let table = inputs.table;
    let mut parts = BundleParts::default();
    if variant.shows(Tile::KeyInsights) {
        parts.key_insights = Some(key_insights(table, inputs.quality, params.top_k_insights, quality_cfg));
    }
    if variant.shows(Tile::DataDensity) {
        let profiles = table
            .predictor_indices()
            .filter(|&c| table.schema()[c].kind == FeatureKind::Numeric)
            .map(|c| density_distribution(table, &table.schema()[c].name, params.n_bins, quality_cfg))
            .collect::<Result<Vec<_>, _>>()?;
        parts.density = Some(profiles);
    }
    if variant.shows(Tile::DataQuality) {
        parts.quality = Some(inputs.quality.clone());
    }
    if variant.shows(Tile::RiskFactors) {
        parts.importances = Some(feature_importance(inputs.model, inputs.test, params.importance_repeats, params.seed)?);
    }
    if variant.shows(Tile::TopDecisionRules) {
        let rp = RuleParams { seed: params.seed, ..params.rules };
        parts.rules = Some(top_decision_rules(inputs.train, &rp)?);
    }
    build_bundle(variant, inputs.model.metrics, previous, parts)
}
