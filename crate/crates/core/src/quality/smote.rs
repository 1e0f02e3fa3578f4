//! Synthetic minority oversampling.

use alloc::vec::Vec;

use rand::Rng;

use crate::dataset::{DataTable, FeatureKind};
use crate::rng;
use crate::stats;

/// New minority rows plus, for each, the table indices of its two parents.
pub struct Synthesized {
    pub rows: Vec<Vec<f64>>,
    pub parents: Vec<(usize, usize)>,
}

/// Generate minority rows until both classes have the same count.
///
/// Each synthetic row picks a minority row uniformly, one of its `k`
/// nearest minority neighbours (Euclidean distance over predictors
/// standardized with the whole table's mean and deviation), and
/// `lambda` uniform in `[0, 1)`; numeric predictors become
/// `row + lambda (neighbour - row)`, binary ones take the nearer parent's value.
pub fn oversample(table: &DataTable, k: usize, seed: u64) -> Synthesized {
    let counts = table.class_counts();
    if counts.len() != 2 || counts[0].1 == counts[1].1 {
        return Synthesized { rows: Vec::new(), parents: Vec::new() };
    }
    let (minority_label, needed) = if counts[0].1 < counts[1].1 {
        (counts[0].0, counts[1].1 - counts[0].1)
    } else {
        (counts[1].0, counts[0].1 - counts[1].1)
    };
    let t = table.target_index();
    let schema = table.schema();
    let mut minority: Vec<usize> = (0..table.n_rows()).filter(|&i| table.rows()[i][t] == minority_label).collect();
    minority.sort_by_key(|&i| table.row_ids()[i]);

    let scales: Vec<(usize, f64, f64)> = table
        .predictor_indices()
        .filter_map(|c| {
            let col = table.column(c);
            let sd = stats::std_dev(&col);
            (sd > 0.0).then(|| (c, stats::mean(&col), sd))
        })
        .collect();
    let z: Vec<Vec<f64>> = minority
        .iter()
        .map(|&i| scales.iter().map(|&(c, m, s)| (table.rows()[i][c] - m) / s).collect())
        .collect();

    let k_eff = k.min(minority.len() - 1);
    let neighbours: Vec<Vec<usize>> = (0..minority.len())
        .map(|a| {
            let mut d: Vec<(f64, usize)> = (0..minority.len())
                .filter(|&b| b != a)
                .map(|b| {
                    let dist = z[a].iter().zip(&z[b]).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
                    (dist, b)
                })
                .collect();
            d.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            d.into_iter().take(k_eff).map(|(_, b)| b).collect()
        })
        .collect();

    let mut r = rng::stream(seed, &[rng::TAG_SMOTE]);
    let mut rows = Vec::with_capacity(needed);
    let mut parents = Vec::with_capacity(needed);
    for _ in 0..needed {
        let a = r.gen_range(0..minority.len());
        let b = if k_eff == 0 { a } else { neighbours[a][r.gen_range(0..k_eff)] };
        let lambda: f64 = r.gen();
        let (pa, pb) = (&table.rows()[minority[a]], &table.rows()[minority[b]]);
        let row: Vec<f64> = (0..schema.len())
            .map(|c| {
                if c == t {
                    minority_label
                } else if schema[c].kind == FeatureKind::BinaryCategorical {
                    if lambda < 0.5 { pa[c] } else { pb[c] }
                } else {
                    let (lo, hi) = if pa[c] <= pb[c] { (pa[c], pb[c]) } else { (pb[c], pa[c]) };
                    (pa[c] + lambda * (pb[c] - pa[c])).clamp(lo, hi)
                }
            })
            .collect();
        rows.push(row);
        parents.push((minority[a], minority[b]));
    }
    Synthesized { rows, parents }
}
