//! Model-steering engine for tabular binary classifiers.
//!
//! Domain experts steer a random-forest classifier by configuring its
//! training data, either manually (feature selection and range filters) or
//! automatically (detect-and-correct data issues). After every retrain the
//! global explanations are regenerated:
//!
//! * data-centric tiles: key insights, data density distribution, data quality
//! * model-centric tiles: important risk factors (permutation importance) and
//!   top decision rules (rules harvested from bagged shallow trees)
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the HTTP service
//! and the CLI live in the `exmos` companion crate.
//!
//! Module map:
//!
//! | module      | role                                                   |
//! |-------------|--------------------------------------------------------|
//! | [`dataset`] | tables, schemas, stratified split, column statistics   |
//! | [`model`]   | Gini CART trees and the seeded random forest           |
//! | [`quality`] | six issue detectors, quality score, corrections, SMOTE |
//! | [`explain`] | the five explanation payloads and variant bundles      |
//! | [`steering`]| configuration, retrain, history and rollback           |
//! | [`analytics`]| CPU/HTPU, effectiveness and efficiency               |

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analytics;
pub mod dataset;
pub mod explain;
pub mod model;
pub mod quality;
pub mod rng;
pub mod stats;
pub mod steering;

pub use dataset::{ColumnStats, DataTable, DatasetError, FeatureKind, FeatureMeta, SplitSpec};
pub use explain::{ExplanationBundle, Variant};
pub use model::{ForestParams, ModelError, ModelMetrics, TrainedModel};
pub use quality::{IssueKind, IssueReport, QualityLevel, QualityReport};
pub use steering::{AutoConfig, ConfigVersion, ManualConfig, Session, SteeringError};
