//! CART classification tree with Gini impurity, stored as flat node arrays.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::MaxFeatures;

pub(crate) const LEAF: i64 = -1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub max_features: MaxFeatures,
}

/// `(feature, goes_right, threshold)` along a root-to-leaf path.
pub type PathStep = (usize, bool, f64);

/// A binary classification tree. Node `i` is a leaf when `feature[i] == -1`;
/// otherwise samples with `x[feature[i]] <= threshold[i]` go to `left[i]`.
/// `counts[i]` holds the (bootstrap-weighted) class counts that reached node `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub feature: Vec<i64>,
    pub threshold: Vec<f64>,
    pub left: Vec<i64>,
    pub right: Vec<i64>,
    pub counts: Vec<[u32; 2]>,
}

impl DecisionTree {
    /// A single-leaf tree predicting `class` (0 or 1).
    pub fn constant(class: u8) -> Self {
        let mut counts = [0u32; 2];
        counts[class as usize] = 1;
        DecisionTree {
            feature: vec![LEAF],
            threshold: vec![0.0],
            left: vec![LEAF],
            right: vec![LEAF],
            counts: vec![counts],
        }
    }

    /// A depth-one tree: `x[feature] > threshold` predicts `above`, else `1 - above`.
    pub fn stump(feature: usize, threshold: f64, above: u8) -> Self {
        let mut lo = [0u32; 2];
        let mut hi = [0u32; 2];
        lo[(1 - above) as usize] = 1;
        hi[above as usize] = 1;
        DecisionTree {
            feature: vec![feature as i64, LEAF, LEAF],
            threshold: vec![threshold, 0.0, 0.0],
            left: vec![1, LEAF, LEAF],
            right: vec![2, LEAF, LEAF],
            counts: vec![[1, 1], lo, hi],
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.feature.len()
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.feature[node] == LEAF
    }

    /// Majority class at `node`; ties go to class 0.
    pub fn node_class(&self, node: usize) -> u8 {
        let [a, b] = self.counts[node];
        u8::from(b > a)
    }

    pub fn leaf_for(&self, x: &[f64]) -> usize {
        let mut node = 0usize;
        while !self.is_leaf(node) {
            let f = self.feature[node] as usize;
            node = if x[f] <= self.threshold[node] {
                self.left[node] as usize
            } else {
                self.right[node] as usize
            };
        }
        node
    }

    pub fn predict_class(&self, x: &[f64]) -> u8 {
        self.node_class(self.leaf_for(x))
    }

    /// Grow a tree on `samples` (row indices into `x`, repeats allowed).
    pub fn fit<R: Rng>(x: &[Vec<f64>], y: &[u8], samples: Vec<usize>, params: &TreeParams, rng: &mut R) -> Self {
        let n_features = x.first().map_or(0, Vec::len);
        let mut tree = DecisionTree {
            feature: Vec::new(),
            threshold: Vec::new(),
            left: Vec::new(),
            right: Vec::new(),
            counts: Vec::new(),
        };
        let mut builder = Builder {
            x,
            y,
            params,
            n_features,
            k: params.max_features.resolve(n_features),
        };
        builder.grow(&mut tree, samples, 0, rng);
        tree
    }

    /// Enumerate every root-to-leaf path as `(conditions, leaf)` where each
    /// condition is `(feature, goes_right, threshold)`.
    pub fn paths(&self) -> Vec<(Vec<PathStep>, usize)> {
        let mut out = Vec::new();
        let mut stack = vec![(0usize, Vec::new())];
        while let Some((node, conds)) = stack.pop() {
            if self.is_leaf(node) {
                out.push((conds, node));
                continue;
            }
            let f = self.feature[node] as usize;
            let t = self.threshold[node];
            let mut r = conds.clone();
            r.push((f, true, t));
            let mut l = conds;
            l.push((f, false, t));
            stack.push((self.right[node] as usize, r));
            stack.push((self.left[node] as usize, l));
        }
        out
    }
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [u8],
    params: &'a TreeParams,
    n_features: usize,
    k: usize,
}

struct Split {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

fn gini(c: [u32; 2]) -> f64 {
    let n = (c[0] + c[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p = c[0] as f64 / n;
    let q = c[1] as f64 / n;
    1.0 - p * p - q * q
}

impl Builder<'_> {
    fn counts(&self, samples: &[usize]) -> [u32; 2] {
        let mut c = [0u32; 2];
        for &s in samples {
            c[self.y[s] as usize] += 1;
        }
        c
    }

    fn grow<R: Rng>(&mut self, tree: &mut DecisionTree, samples: Vec<usize>, depth: usize, rng: &mut R) -> usize {
        let id = tree.feature.len();
        let counts = self.counts(&samples);
        tree.feature.push(LEAF);
        tree.threshold.push(0.0);
        tree.left.push(LEAF);
        tree.right.push(LEAF);
        tree.counts.push(counts);

        let pure = counts[0] == 0 || counts[1] == 0;
        let depth_reached = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_reached || samples.len() < 2 * self.params.min_leaf.max(1) {
            return id;
        }
        let Some(split) = self.best_split(&samples, rng) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = samples
            .iter()
            .partition(|&&s| self.x[s][split.feature] <= split.threshold);
        tree.feature[id] = split.feature as i64;
        tree.threshold[id] = split.threshold;
        let left = self.grow(tree, l, depth + 1, rng);
        let right = self.grow(tree, r, depth + 1, rng);
        tree.left[id] = left as i64;
        tree.right[id] = right as i64;
        id
    }

    /// Visit features in a random order; evaluate the first `k`, and keep
    /// drawing past `k` only while no valid split has been found.
    fn best_split<R: Rng>(&self, samples: &[usize], rng: &mut R) -> Option<Split> {
        let mut order: Vec<usize> = (0..self.n_features).collect();
        order.shuffle(rng);
        let mut best: Option<Split> = None;
        let mut buf: Vec<(f64, u8)> = Vec::with_capacity(samples.len());
        for (visited, &f) in order.iter().enumerate() {
            if visited >= self.k && best.is_some() {
                break;
            }
            buf.clear();
            buf.extend(samples.iter().map(|&s| (self.x[s][f], self.y[s])));
            buf.sort_by(|a, b| a.0.total_cmp(&b.0));
            if let Some(s) = self.sweep(f, &buf) {
                if best.as_ref().is_none_or(|b| s.impurity < b.impurity) {
                    best = Some(s);
                }
            }
        }
        best
    }

    fn sweep(&self, feature: usize, sorted: &[(f64, u8)]) -> Option<Split> {
        let n = sorted.len();
        let min_leaf = self.params.min_leaf.max(1);
        let mut total = [0u32; 2];
        for &(_, c) in sorted {
            total[c as usize] += 1;
        }
        let mut left = [0u32; 2];
        let mut best: Option<Split> = None;
        for i in 0..n - 1 {
            left[sorted[i].1 as usize] += 1;
            let nl = i + 1;
            let nr = n - nl;
            if sorted[i].0 == sorted[i + 1].0 || nl < min_leaf || nr < min_leaf {
                continue;
            }
            let right = [total[0] - left[0], total[1] - left[1]];
            let imp = (nl as f64 * gini(left) + nr as f64 * gini(right)) / n as f64;
            if best.as_ref().is_none_or(|b| imp < b.impurity) {
                let (a, b) = (sorted[i].0, sorted[i + 1].0);
                let mut t = a + (b - a) / 2.0;
                if t >= b {
                    t = a;
                }
                best = Some(Split {
                    feature,
                    threshold: t,
                    impurity: imp,
                });
            }
        }
        best
    }
}
