use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::check_xy;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
    /// Features tried per split; `None` means `ceil(d / 3)`.
    pub max_features: Option<usize>,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 300,
            min_samples_split: 2,
            min_samples_leaf: 1,
            bootstrap: true,
            max_features: None,
            max_depth: None,
            seed: 0,
        }
    }
}

const LEAF: u32 = u32::MAX;

/// Internal nodes hold a split; leaves hold an offset into `leaf_values`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    /// `LEAF` for leaves.
    pub feature: u32,
    pub threshold: f64,
    /// Left child for splits, leaf index for leaves.
    pub left: u32,
    pub right: u32,
}

/// One multi-output regression tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    /// `n_outputs` constants per leaf.
    pub leaf_values: Vec<f64>,
    /// Training rows (with bootstrap multiplicity) that reached each leaf.
    pub leaf_sizes: Vec<u32>,
    /// Total squared-error reduction credited to each feature.
    pub importance: Vec<f64>,
}

impl Tree {
    pub fn n_leaves(&self) -> usize {
        self.leaf_sizes.len()
    }

    fn leaf_of(&self, row: &[f64]) -> usize {
        let mut i = 0usize;
        loop {
            let n = &self.nodes[i];
            if n.feature == LEAF {
                return n.left as usize;
            }
            i = if row[n.feature as usize] <= n.threshold { n.left } else { n.right } as usize;
        }
    }

    /// Adds this tree's prediction for `row` into `out`.
    fn accumulate(&self, row: &[f64], out: &mut [f64]) {
        let k = out.len();
        let leaf = self.leaf_of(row);
        for (o, v) in out.iter_mut().zip(&self.leaf_values[leaf * k..(leaf + 1) * k]) {
            *o += v;
        }
    }

    pub fn predict(&self, x: ArrayView2<f64>, n_outputs: usize) -> Array2<f64> {
        let mut out = Array2::zeros((x.nrows(), n_outputs));
        let mut row = vec![0.0; x.ncols()];
        for (i, xr) in x.rows().into_iter().enumerate() {
            row.iter_mut().zip(xr).for_each(|(r, v)| *r = *v);
            let mut o = vec![0.0; n_outputs];
            self.accumulate(&row, &mut o);
            out.row_mut(i).assign(&Array1::from(o));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub n_features: usize,
    pub n_outputs: usize,
    pub config: ForestConfig,
}

impl ForestModel {
    /// Mean of the tree outputs.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::DimensionMismatch { expected: self.n_features, got: x.ncols() });
        }
        if self.trees.is_empty() {
            return Err(Error::invalid("forest has no trees"));
        }
        let k = self.n_outputs;
        let mut out = Array2::zeros((x.nrows(), k));
        let mut row = vec![0.0; x.ncols()];
        let mut acc = vec![0.0; k];
        let scale = 1.0 / self.trees.len() as f64;
        for (i, xr) in x.rows().into_iter().enumerate() {
            row.iter_mut().zip(xr).for_each(|(r, v)| *r = *v);
            acc.iter_mut().for_each(|a| *a = 0.0);
            for t in &self.trees {
                t.accumulate(&row, &mut acc);
            }
            for (j, a) in acc.iter().enumerate() {
                out[[i, j]] = a * scale;
            }
        }
        Ok(out)
    }

    /// Mean decrease in impurity, each tree normalized, then averaged and
    /// renormalized to sum to one. Zero everywhere if no tree ever split.
    pub fn feature_importance(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.n_features];
        for t in &self.trees {
            let s: f64 = t.importance.iter().sum();
            if s > 0.0 {
                total.iter_mut().zip(&t.importance).for_each(|(a, b)| *a += b / s);
            }
        }
        let s: f64 = total.iter().sum();
        if s > 0.0 {
            total.iter_mut().for_each(|v| *v /= s);
        }
        total
    }
}

fn mtry(config: &ForestConfig, d: usize) -> usize {
    config.max_features.unwrap_or(d.div_ceil(3)).clamp(1, d)
}

/// Greedy CART on presorted feature orders: every node owns the same
/// contiguous slice of each feature's sorted row list, and a split
/// partitions those slices stably, so no sorting happens below the root.
struct Builder<'a> {
    x: ArrayView2<'a, f64>,
    y: ArrayView2<'a, f64>,
    weight: Vec<f64>,
    sorted: Vec<Vec<u32>>,
    goes_left: Vec<bool>,
    scratch: Vec<u32>,
    config: &'a ForestConfig,
    mtry: usize,
    tree: Tree,
    features: Vec<usize>,
}

struct Split {
    feature: usize,
    threshold: f64,
    /// Position in the node slice where the right child starts.
    pos: usize,
    gain: f64,
}

impl Builder<'_> {
    fn node_stats(&self, rows: &[u32]) -> (f64, Vec<f64>, f64) {
        let k = self.y.ncols();
        let mut w = 0.0;
        let mut sum = vec![0.0; k];
        let mut sq = 0.0;
        for &r in rows {
            let r = r as usize;
            let wr = self.weight[r];
            w += wr;
            for j in 0..k {
                let v = self.y[[r, j]];
                sum[j] += wr * v;
                sq += wr * v * v;
            }
        }
        (w, sum, sq)
    }

    fn best_split(&mut self, start: usize, end: usize, w_total: f64, sum_total: &[f64], rng: &mut impl Rng) -> Option<Split> {
        let k = self.y.ncols();
        let parent_score: f64 = sum_total.iter().map(|s| s * s).sum::<f64>() / w_total;
        let min_leaf = self.config.min_samples_leaf.max(1);
        let n = end - start;
        self.features.shuffle(rng);
        let mut best: Option<Split> = None;
        let mut left = vec![0.0; k];
        for (tried, &f) in self.features.iter().enumerate() {
            if tried >= self.mtry && best.is_some() {
                break;
            }
            let order = &self.sorted[f][start..end];
            left.iter_mut().for_each(|v| *v = 0.0);
            let mut w_left = 0.0;
            for i in 0..n - 1 {
                let r = order[i] as usize;
                let wr = self.weight[r];
                w_left += wr;
                for j in 0..k {
                    left[j] += wr * self.y[[r, j]];
                }
                let n_left = i + 1;
                if n_left < min_leaf || n - n_left < min_leaf {
                    continue;
                }
                let v = self.x[[r, f]];
                let next = self.x[[order[i + 1] as usize, f]];
                if next <= v {
                    continue;
                }
                let w_right = w_total - w_left;
                let mut score = 0.0;
                for j in 0..k {
                    let sr = sum_total[j] - left[j];
                    score += left[j] * left[j] / w_left + sr * sr / w_right;
                }
                let gain = score - parent_score;
                // Zero-gain splits are allowed: XOR-like interactions only pay off
                // one level further down.
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mut threshold = v + (next - v) / 2.0;
                    if threshold >= next {
                        threshold = v;
                    }
                    best = Some(Split { feature: f, threshold, pos: start + n_left, gain });
                }
            }
        }
        best
    }

    fn partition(&mut self, start: usize, end: usize, split: &Split) {
        let f = split.feature;
        for &r in &self.sorted[f][start..end] {
            self.goes_left[r as usize] = self.x[[r as usize, f]] <= split.threshold;
        }
        for list in &mut self.sorted {
            let slice = &mut list[start..end];
            self.scratch.clear();
            let mut write = 0;
            for i in 0..slice.len() {
                let r = slice[i];
                if self.goes_left[r as usize] {
                    slice[write] = r;
                    write += 1;
                } else {
                    self.scratch.push(r);
                }
            }
            slice[write..].copy_from_slice(&self.scratch);
        }
    }

    fn push_leaf(&mut self, sum: &[f64], w: f64) -> u32 {
        let leaf = self.tree.leaf_sizes.len() as u32;
        self.tree.leaf_values.extend(sum.iter().map(|s| s / w));
        self.tree.leaf_sizes.push(w.round() as u32);
        let id = self.tree.nodes.len() as u32;
        self.tree.nodes.push(Node { feature: LEAF, threshold: 0.0, left: leaf, right: leaf });
        id
    }

    fn grow(&mut self, start: usize, end: usize, depth: usize, rng: &mut impl Rng) -> u32 {
        let rows = &self.sorted[0][start..end];
        let (w, sum, sq) = self.node_stats(rows);
        let sse = sq - sum.iter().map(|s| s * s).sum::<f64>() / w;
        let n = end - start;
        let depth_ok = self.config.max_depth.is_none_or(|m| depth < m);
        if n < self.config.min_samples_split.max(2) || !depth_ok || sse <= 1e-12 * sq.max(1e-300) {
            return self.push_leaf(&sum, w);
        }
        let Some(split) = self.best_split(start, end, w, &sum, rng) else {
            return self.push_leaf(&sum, w);
        };
        self.partition(start, end, &split);
        self.tree.importance[split.feature] += split.gain;
        let id = self.tree.nodes.len() as u32;
        self.tree.nodes.push(Node { feature: split.feature as u32, threshold: split.threshold, left: 0, right: 0 });
        let left = self.grow(start, split.pos, depth + 1, rng);
        let right = self.grow(split.pos, end, depth + 1, rng);
        self.tree.nodes[id as usize].left = left;
        self.tree.nodes[id as usize].right = right;
        id
    }
}

fn grow_tree(x: ArrayView2<f64>, y: ArrayView2<f64>, config: &ForestConfig, seed: u64) -> Tree {
    let (n, d) = x.dim();
    let mut rng = stream_rng(seed, "tree");
    let mut weight = vec![0.0; n];
    if config.bootstrap {
        for _ in 0..n {
            weight[rng.gen_range(0..n)] += 1.0;
        }
    } else {
        weight.iter_mut().for_each(|w| *w = 1.0);
    }
    let present: Vec<u32> = (0..n as u32).filter(|&r| weight[r as usize] > 0.0).collect();
    let sorted = (0..d)
        .map(|f| {
            let mut v = present.clone();
            v.sort_by(|&a, &b| x[[a as usize, f]].total_cmp(&x[[b as usize, f]]).then(a.cmp(&b)));
            v
        })
        .collect();
    let mut b = Builder {
        x: x.view(),
        y: y.view(),
        weight,
        sorted,
        goes_left: vec![false; n],
        scratch: Vec::new(),
        config,
        mtry: mtry(config, d),
        tree: Tree { nodes: Vec::new(), leaf_values: Vec::new(), leaf_sizes: Vec::new(), importance: vec![0.0; d] },
        features: (0..d).collect(),
    };
    b.grow(0, present.len(), 0, &mut rng);
    b.tree
}

fn check(x: ArrayView2<f64>, y: ArrayView2<f64>, config: &ForestConfig) -> Result<()> {
    check_xy(x, y)?;
    if x.nrows() < 2 {
        return Err(Error::invalid("a forest needs at least 2 rows"));
    }
    if config.min_samples_leaf == 0 || config.min_samples_split < 2 {
        return Err(Error::invalid("min_samples_leaf must be >= 1 and min_samples_split >= 2"));
    }
    Ok(())
}

pub fn rf_fit(x: ArrayView2<f64>, y: ArrayView2<f64>, config: &ForestConfig) -> Result<ForestModel> {
    check(x, y, config)?;
    if config.n_trees == 0 {
        return Err(Error::invalid("n_trees must be >= 1"));
    }
    let trees = (0..config.n_trees)
        .map(|b| grow_tree(x, y, config, derive_seed(config.seed, "forest", b as u64)))
        .collect();
    Ok(ForestModel { trees, n_features: x.ncols(), n_outputs: y.ncols(), config: config.clone() })
}

/// Grows `extra_trees` more trees on new data and appends them.
pub fn rf_warmstart_extend(model: &ForestModel, x: ArrayView2<f64>, y: ArrayView2<f64>, extra_trees: usize) -> Result<ForestModel> {
    check(x, y, &model.config)?;
    if x.ncols() != model.n_features {
        return Err(Error::DimensionMismatch { expected: model.n_features, got: x.ncols() });
    }
    if y.ncols() != model.n_outputs {
        return Err(Error::DimensionMismatch { expected: model.n_outputs, got: y.ncols() });
    }
    let mut out = model.clone();
    let first = model.trees.len();
    out.trees.extend(
        (first..first + extra_trees).map(|b| grow_tree(x, y, &model.config, derive_seed(model.config.seed, "forest", b as u64))),
    );
    Ok(out)
}
