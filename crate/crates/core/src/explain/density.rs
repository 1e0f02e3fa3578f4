use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::ExplainError;
use crate::dataset::{DataTable, FeatureKind};
use crate::quality::QualityConfig;
use crate::stats::{self, Fences};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    pub feature: String,
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub mean: f64,
    pub outlier_bins: Vec<bool>,
}

/// Equal-width histogram over `[min, max]`. Bins are `[e_i, e_{i+1})`
/// except the last, which is closed. A constant column yields one bin.
/// A bin is an outlier bin when it lies wholly outside the interquartile
/// fences.
pub fn density_distribution(
    table: &DataTable,
    feature: &str,
    n_bins: usize,
    cfg: &QualityConfig,
) -> Result<DensityProfile, ExplainError> {
    let c = table
        .feature_index(feature)
        .ok_or_else(|| ExplainError::UnknownFeature(feature.to_string()))?;
    if table.schema()[c].kind != FeatureKind::Numeric {
        return Err(ExplainError::NotNumeric(feature.to_string()));
    }
    let col = table.column(c);
    let sorted = stats::sorted(&col);
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    let n_bins = if min == max { 1 } else { n_bins.max(1) };
    let width = (max - min) / n_bins as f64;
    let mut edges: Vec<f64> = (0..n_bins).map(|i| min + i as f64 * width).collect();
    edges.push(if min == max { min + 1.0 } else { max });

    let mut counts = vec![0usize; n_bins];
    for &v in &col {
        let mut b = if width > 0.0 { ((v - min) / width) as usize } else { 0 };
        b = b.min(n_bins - 1);
        while b > 0 && v < edges[b] {
            b -= 1;
        }
        while b + 1 < n_bins && v >= edges[b + 1] {
            b += 1;
        }
        counts[b] += 1;
    }

    let outlier_bins = if col.len() >= 4 {
        let f = Fences::from_values(&col, cfg.iqr_multiplier);
        (0..n_bins).map(|i| edges[i + 1] < f.lower || edges[i] > f.upper).collect()
    } else {
        vec![false; n_bins]
    };

    Ok(DensityProfile {
        feature: feature.to_string(),
        bin_edges: edges,
        counts,
        mean: stats::mean(&col),
        outlier_bins,
    })
}
