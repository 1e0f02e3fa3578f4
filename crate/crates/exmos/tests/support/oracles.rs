//! Brute-force detector oracles over a random corpus of tiny tables.
//!
//! Every cell is an integer, so the oracles decide each flag with exact
//! integer arithmetic: quartile fences scaled by 8, Pearson and skewness
//! thresholds compared after squaring, KS differences as integer numerators.

use exmos_core::dataset::{DataTable, FeatureMeta};
use exmos_core::quality::{self, IssueReport, QualityConfig, QualityError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct Case {
    pub cols: Vec<Vec<i64>>,
    pub zero_invalid: Vec<bool>,
    pub y: Vec<i64>,
    pub base_cols: Vec<Vec<i64>>,
    pub base_y: Vec<i64>,
}

fn cell(rng: &mut ChaCha8Rng, small: bool) -> i64 {
    let mut v = if small { rng.gen_range(0..=3) } else { rng.gen_range(-1000..=1000) };
    if rng.gen_bool(0.12) {
        let big = rng.gen_range(5000..=20000);
        v = if rng.gen_bool(0.5) { big } else { -big };
    }
    if rng.gen_bool(0.15) {
        v = 0;
    }
    v
}

fn columns(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Vec<Vec<i64>> {
    let mut cols: Vec<Vec<i64>> = Vec::new();
    for c in 0..p {
        let col = match rng.gen_range(0..5) {
            0 if c > 0 => {
                let src = &cols[rng.gen_range(0..c)];
                let (a, b) = (rng.gen_range(-3i64..=3), rng.gen_range(-5i64..=5));
                src.iter().map(|v| a * v + b).collect()
            }
            1 => vec![rng.gen_range(-2..=2); n],
            2 => (0..n).map(|_| cell(rng, true)).collect(),
            _ => (0..n).map(|_| cell(rng, false)).collect(),
        };
        cols.push(col);
    }
    cols
}

fn labels(rng: &mut ChaCha8Rng, n: usize) -> Vec<i64> {
    if rng.gen_bool(0.1) {
        vec![rng.gen_range(0..=1); n]
    } else {
        (0..n).map(|_| rng.gen_range(0..=1)).collect()
    }
}

pub fn random_case(rng: &mut ChaCha8Rng) -> Case {
    let n = rng.gen_range(1..=8);
    let p = rng.gen_range(1..=3);
    let mut cols = columns(rng, n, p);
    let mut y = labels(rng, n);
    if n > 1 && rng.gen_bool(0.3) {
        let (src, dst) = (rng.gen_range(0..n - 1), rng.gen_range(1..n));
        if src != dst {
            for col in &mut cols {
                col[dst] = col[src];
            }
            y[dst] = y[src];
        }
    }
    let zero_invalid = (0..p).map(|_| rng.gen_bool(0.4)).collect();
    let (base_cols, base_y) = if rng.gen_bool(0.5) {
        let m = rng.gen_range(1..=8);
        (columns(rng, m, p), labels(rng, m))
    } else {
        let extra = rng.gen_range(0..=4);
        let more = columns(rng, extra, p);
        let bc = cols.iter().zip(&more).map(|(c, e)| c.iter().chain(e).copied().collect()).collect();
        let by = y.iter().copied().chain(labels(rng, extra)).collect();
        (bc, by)
    };
    Case { cols, zero_invalid, y, base_cols, base_y }
}

pub fn table(cols: &[Vec<i64>], zero_invalid: &[bool], y: &[i64]) -> DataTable {
    let mut schema: Vec<FeatureMeta> = (0..cols.len())
        .map(|c| {
            let m = FeatureMeta::numeric(format!("c{c}"));
            if zero_invalid.get(c).copied().unwrap_or(false) {
                m.zero_invalid()
            } else {
                m
            }
        })
        .collect();
    schema.push(FeatureMeta::binary("y"));
    let rows = (0..y.len())
        .map(|r| cols.iter().map(|c| c[r] as f64).chain([y[r] as f64]).collect())
        .collect();
    DataTable::new(schema, rows, (0..y.len() as u64).collect()).expect("valid table")
}

/// Expected detector result: flagged row ids, flagged feature indices and
/// the subscore, or the name of the expected error.
#[derive(Debug, Clone, PartialEq)]
pub enum Expected {
    Report { rows: Vec<u64>, features: Vec<usize>, subscore: f64 },
    Error(&'static str),
}

fn ratio(bad: usize, total: usize) -> f64 {
    if total == 0 {
        100.0
    } else {
        100.0 * (1.0 - bad as f64 / total as f64)
    }
}

/// Four times the type-7 quantile at `num/4`, using the 1-based position
/// h = 1 + (n - 1) * p over the sorted values.
fn quartile_x4(sorted: &[i64], num: usize) -> i128 {
    let steps = (sorted.len() - 1) * num;
    let (whole, frac) = (steps / 4, (steps % 4) as i128);
    let lo = sorted[whole] as i128;
    if frac == 0 {
        4 * lo
    } else {
        4 * lo + frac * (sorted[whole + 1] as i128 - lo)
    }
}

pub fn outliers(case: &Case) -> Expected {
    let n = case.y.len();
    if n < 4 {
        return Expected::Error("TooFewRows");
    }
    let mut row_flag = vec![false; n];
    let mut features = Vec::new();
    for (c, col) in case.cols.iter().enumerate() {
        let mut sorted = col.clone();
        sorted.sort_unstable();
        let (q1, q3) = (quartile_x4(&sorted, 1), quartile_x4(&sorted, 3));
        // 8 * (Q1 - 1.5 IQR) and 8 * (Q3 + 1.5 IQR)
        let lo8 = 5 * q1 - 3 * q3;
        let hi8 = 5 * q3 - 3 * q1;
        let mut any = false;
        for (r, &v) in col.iter().enumerate() {
            let v8 = 8 * v as i128;
            if v8 < lo8 || v8 > hi8 || (case.zero_invalid[c] && v == 0) {
                row_flag[r] = true;
                any = true;
            }
        }
        if any {
            features.push(c);
        }
    }
    let rows: Vec<u64> = (0..n).filter(|&r| row_flag[r]).map(|r| r as u64).collect();
    let subscore = ratio(rows.len(), n);
    Expected::Report { rows, features, subscore }
}

pub fn duplicates(case: &Case) -> Expected {
    let n = case.y.len();
    let row = |r: usize| -> Vec<i64> { case.cols.iter().map(|c| c[r]).chain([case.y[r]]).collect() };
    let rows: Vec<u64> = (0..n).filter(|&i| (0..i).any(|j| row(i) == row(j))).map(|i| i as u64).collect();
    let subscore = ratio(rows.len(), n);
    Expected::Report { rows, features: vec![], subscore }
}

pub fn correlated(case: &Case) -> Expected {
    let (p, n) = (case.cols.len(), case.y.len());
    if p < 2 {
        return Expected::Error("TooFewFeatures");
    }
    if n < 3 {
        return Expected::Error("TooFewRows");
    }
    let nn = n as i128;
    let mut flagged = vec![false; p];
    let (mut pairs, mut offending) = (0, 0);
    for a in 0..p {
        for b in a + 1..p {
            pairs += 1;
            let (x, y) = (&case.cols[a], &case.cols[b]);
            let sx: i128 = x.iter().map(|&v| v as i128).sum();
            let sy: i128 = y.iter().map(|&v| v as i128).sum();
            let sxx: i128 = x.iter().map(|&v| (v as i128).pow(2)).sum();
            let syy: i128 = y.iter().map(|&v| (v as i128).pow(2)).sum();
            let sxy: i128 = x.iter().zip(y).map(|(&u, &v)| u as i128 * v as i128).sum();
            let vx = nn * sxx - sx * sx;
            let vy = nn * syy - sy * sy;
            if vx == 0 || vy == 0 {
                continue;
            }
            let cov = nn * sxy - sx * sy;
            // |r| >= 0.8  <=>  25 cov^2 >= 16 vx vy
            if 25 * cov * cov >= 16 * vx * vy {
                offending += 1;
                flagged[a] = true;
                flagged[b] = true;
            }
        }
    }
    let features = (0..p).filter(|&c| flagged[c]).collect();
    Expected::Report { rows: vec![], features, subscore: ratio(offending, pairs) }
}

pub fn imbalance(case: &Case) -> Expected {
    let ones = case.y.iter().filter(|&&v| v == 1).count();
    let zeros = case.y.len() - ones;
    if ones == 0 || zeros == 0 {
        return Expected::Error("DegenerateClass");
    }
    let (lo, hi) = (ones.min(zeros), ones.max(zeros));
    let features = if lo == hi { vec![] } else { vec![usize::MAX] };
    Expected::Report { rows: vec![], features, subscore: 100.0 * (lo as f64 / hi as f64) }
}

pub fn skewness(case: &Case) -> Expected {
    let n = case.y.len();
    if n < 3 {
        return Expected::Error("TooFewRows");
    }
    let nn = n as i128;
    let mut features = Vec::new();
    for (c, col) in case.cols.iter().enumerate() {
        let sum: i128 = col.iter().map(|&v| v as i128).sum();
        // d = n * (x - mean), so m2 = S2 / n^3 and m3 = S3 / n^4.
        let d: Vec<i128> = col.iter().map(|&v| nn * v as i128 - sum).collect();
        let s2: i128 = d.iter().map(|v| v * v).sum();
        if s2 == 0 {
            continue;
        }
        let s3: i128 = d.iter().map(|v| v * v * v).sum();
        // |g1| > 1  <=>  m3^2 > m2^3  <=>  n S3^2 > S2^3
        let lhs = s3.checked_mul(s3).and_then(|v| v.checked_mul(nn)).expect("no overflow");
        let rhs = s2.checked_mul(s2).and_then(|v| v.checked_mul(s2)).expect("no overflow");
        if lhs > rhs {
            features.push(c);
        }
    }
    let subscore = ratio(features.len(), case.cols.len());
    Expected::Report { rows: vec![], features, subscore }
}

pub fn drift(case: &Case) -> Expected {
    let mut features = Vec::new();
    for (c, (a, b)) in case.cols.iter().zip(&case.base_cols).enumerate() {
        let (na, nb) = (a.len() as i128, b.len() as i128);
        let d_num = a
            .iter()
            .chain(b)
            .map(|&t| {
                let i = a.iter().filter(|&&v| v <= t).count() as i128;
                let j = b.iter().filter(|&&v| v <= t).count() as i128;
                (i * nb - j * na).abs()
            })
            .max()
            .unwrap_or(0);
        // D > 0.1  <=>  10 * d_num > na * nb
        if 10 * d_num > na * nb {
            features.push(c);
        }
    }
    let subscore = ratio(features.len(), case.cols.len());
    Expected::Report { rows: vec![], features, subscore }
}

fn error_name(e: &QualityError) -> &'static str {
    match e {
        QualityError::TooFewRows { .. } => "TooFewRows",
        QualityError::TooFewFeatures => "TooFewFeatures",
        QualityError::DegenerateClass => "DegenerateClass",
        _ => "Other",
    }
}

fn observed(r: Result<IssueReport, QualityError>, table: &DataTable) -> Expected {
    match r {
        Ok(rep) => {
            let features = rep
                .affected_features
                .iter()
                .map(|f| if f == table.target_name() { usize::MAX } else { table.feature_index(f).expect("known feature") })
                .collect();
            Expected::Report { rows: rep.affected_row_ids, features, subscore: rep.subscore }
        }
        Err(e) => Expected::Error(error_name(&e)),
    }
}

fn agrees(expected: &Expected, got: &Expected) -> bool {
    match (expected, got) {
        (
            Expected::Report { rows: r1, features: f1, subscore: s1 },
            Expected::Report { rows: r2, features: f2, subscore: s2 },
        ) => r1 == r2 && f1 == f2 && (s1 - s2).abs() <= 1e-9,
        (a, b) => a == b,
    }
}

pub struct CorpusReport {
    pub tables: usize,
    pub checks: usize,
    pub mismatches: Vec<String>,
    /// Per detector: cases with at least one flag, and cases expecting an error.
    pub flagged: [usize; 6],
    pub errors: [usize; 6],
}

pub const DETECTORS: [&str; 6] = ["outliers", "duplicates", "correlated", "imbalance", "skewness", "drift"];

/// Compare every detector with its oracle over `tables` random cases.
pub fn check_corpus(tables: usize, seed: u64) -> CorpusReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = QualityConfig::default();
    let mut report = CorpusReport { tables, checks: 0, mismatches: Vec::new(), flagged: [0; 6], errors: [0; 6] };
    for i in 0..tables {
        let case = random_case(&mut rng);
        let t = table(&case.cols, &case.zero_invalid, &case.y);
        let base = table(&case.base_cols, &case.zero_invalid, &case.base_y);
        let pairs: [(&str, Expected, Expected); 6] = [
            ("outliers", outliers(&case), observed(quality::detect_outliers(&t, &cfg), &t)),
            ("duplicates", duplicates(&case), observed(Ok(quality::detect_duplicates(&t)), &t)),
            ("correlated", correlated(&case), observed(quality::detect_correlated(&t, &cfg), &t)),
            ("imbalance", imbalance(&case), observed(quality::detect_imbalance(&t), &t)),
            ("skewness", skewness(&case), observed(quality::detect_skewness(&t, &cfg), &t)),
            ("drift", drift(&case), observed(quality::detect_drift(&t, &base, &cfg), &t)),
        ];
        for (k, (name, expected, got)) in pairs.into_iter().enumerate() {
            report.checks += 1;
            match &expected {
                Expected::Report { rows, features, .. } if !rows.is_empty() || !features.is_empty() => report.flagged[k] += 1,
                Expected::Error(_) => report.errors[k] += 1,
                _ => {}
            }
            if !agrees(&expected, &got) {
                report.mismatches.push(format!("table {i} {name}: expected {expected:?}, got {got:?}; case {case:?}"));
            }
        }
    }
    report
}
