use std::collections::HashMap;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::cluster::{cluster_root, ClusterPartition, Dendrogram};
use crate::error::{Error, Result};
use crate::learners::Learner;
use crate::rng::stream_rng;

/// Anything that maps an N × d matrix to N × K predictions.
pub trait Predictor {
    fn n_features(&self) -> usize;
    fn n_outputs(&self) -> usize;
    fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>>;
}

impl Predictor for Learner {
    fn n_features(&self) -> usize {
        Learner::n_features(self)
    }
    fn n_outputs(&self) -> usize {
        Learner::n_outputs(self)
    }
    fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Learner::predict(self, x)
    }
}

/// Adapts a closure to [`Predictor`].
pub struct FnPredictor<F> {
    pub n_features: usize,
    pub n_outputs: usize,
    pub f: F,
}

impl<F: Fn(ArrayView2<f64>) -> Array2<f64>> Predictor for FnPredictor<F> {
    fn n_features(&self) -> usize {
        self.n_features
    }
    fn n_outputs(&self) -> usize {
        self.n_outputs
    }
    fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok((self.f)(x))
    }
}

/// Upper bound on the distinct coalitions one exact attribution may
/// evaluate; each costs one model call per background row.
pub const MAX_EXACT_COALITIONS: usize = 1 << 18;
/// Feature limit of the brute-force Shapley oracle.
pub const ORACLE_MAX_FEATURES: usize = 12;
const MAX_FEATURES: usize = 128;
/// Rows per model call when evaluating coalitions.
const BATCH_ROWS: usize = 1 << 14;

type Mask = u128;

fn bit(i: usize) -> Mask {
    1u128 << i
}

fn mask_of(features: &[usize]) -> Mask {
    features.iter().fold(0, |m, &i| m | bit(i))
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Weight of a coalition of `size` among `n` players in the Shapley sum of
/// one player: `1 / (n * C(n - 1, size))`. Over all coalitions of the other
/// players these weights sum to one.
pub fn shapley_weight(n: usize, size: usize) -> f64 {
    1.0 / (n as f64 * binomial(n - 1, size))
}

/// Attribution of one sample: `phi` is d × K.
#[derive(Debug, Clone, PartialEq)]
pub struct Attribution {
    pub phi: Array2<f64>,
    pub base: Vec<f64>,
    pub prediction: Vec<f64>,
}

impl Attribution {
    /// Largest |sum(phi) + base - prediction| over outputs.
    pub fn efficiency_gap(&self) -> f64 {
        (0..self.base.len())
            .map(|k| (self.phi.column(k).sum() + self.base[k] - self.prediction[k]).abs())
            .fold(0.0, f64::max)
    }
}

/// Interventional value function: features in the coalition keep the
/// sample's values, the rest take each background row's values, and the
/// model output is averaged over the background.
struct Game<'a, P: Predictor + ?Sized> {
    model: &'a P,
    x: ArrayView1<'a, f64>,
    background: ArrayView2<'a, f64>,
    cache: HashMap<Mask, Vec<f64>>,
}

impl<'a, P: Predictor + ?Sized> Game<'a, P> {
    fn new(model: &'a P, x: ArrayView1<'a, f64>, background: ArrayView2<'a, f64>) -> Result<Self> {
        let d = model.n_features();
        if x.len() != d || background.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: if x.len() != d { x.len() } else { background.ncols() } });
        }
        if background.nrows() == 0 {
            return Err(Error::Empty("background set".into()));
        }
        if d > MAX_FEATURES {
            return Err(Error::TooLarge(format!("{d} features exceed the limit of {MAX_FEATURES}")));
        }
        Ok(Game { model, x, background, cache: HashMap::new() })
    }

    fn evaluate(&mut self, masks: impl IntoIterator<Item = Mask>) -> Result<()> {
        let mut todo: Vec<Mask> = masks.into_iter().filter(|m| !self.cache.contains_key(m)).collect();
        todo.sort_unstable();
        todo.dedup();
        let (nb, d) = self.background.dim();
        let k = self.model.n_outputs();
        let per_batch = (BATCH_ROWS / nb).max(1);
        for chunk in todo.chunks(per_batch) {
            let mut rows = Array2::zeros((chunk.len() * nb, d));
            for (c, &mask) in chunk.iter().enumerate() {
                for b in 0..nb {
                    let mut row = rows.row_mut(c * nb + b);
                    for j in 0..d {
                        row[j] = if mask & bit(j) != 0 { self.x[j] } else { self.background[[b, j]] };
                    }
                }
            }
            let out = self.model.predict(rows.view())?;
            if out.ncols() != k {
                return Err(Error::DimensionMismatch { expected: k, got: out.ncols() });
            }
            for (c, &mask) in chunk.iter().enumerate() {
                let mut mean = vec![0.0; k];
                for b in 0..nb {
                    for (m, v) in mean.iter_mut().zip(out.row(c * nb + b)) {
                        *m += v;
                    }
                }
                mean.iter_mut().for_each(|m| *m /= nb as f64);
                self.cache.insert(mask, mean);
            }
        }
        Ok(())
    }

    fn value(&self, mask: Mask) -> &[f64] {
        &self.cache[&mask]
    }

    fn finish(mut self, phi: Array2<f64>) -> Result<Attribution> {
        self.evaluate([0])?;
        let base = self.value(0).to_vec();
        let x = self.x.to_owned().insert_axis(ndarray::Axis(0));
        let prediction = self.model.predict(x.view())?.row(0).to_vec();
        Ok(Attribution { phi, base, prediction })
    }
}

fn check_partition(partition: &ClusterPartition, d: usize) -> Result<()> {
    if partition.n_features != d {
        return Err(Error::DimensionMismatch { expected: d, got: partition.n_features });
    }
    Ok(())
}

/// Coalitions of the other clusters with their outer weights.
fn outer_coalitions(partition: &ClusterPartition, k: usize) -> Vec<(Mask, f64)> {
    let m = partition.n_clusters();
    let others: Vec<Mask> = (0..m).filter(|&j| j != k).map(|j| mask_of(&partition.clusters[j])).collect();
    (0..1usize << others.len())
        .map(|sel| {
            let q = others.iter().enumerate().filter(|(j, _)| sel >> j & 1 == 1).fold(0, |acc, (_, &mk)| acc | mk);
            (q, shapley_weight(m, sel.count_ones() as usize))
        })
        .collect()
}

fn guard(count: f64) -> Result<()> {
    if count > MAX_EXACT_COALITIONS as f64 {
        return Err(Error::TooLarge(format!(
            "{count} coalitions exceed the exact limit of {MAX_EXACT_COALITIONS}; use sampled mode or a different partition"
        )));
    }
    Ok(())
}

/// Exact Owen values: Shapley across clusters, then Shapley within the
/// sample feature's own cluster.
pub fn owen_values<P: Predictor + ?Sized>(
    model: &P,
    x: ArrayView1<f64>,
    background: ArrayView2<f64>,
    partition: &ClusterPartition,
) -> Result<Attribution> {
    let d = model.n_features();
    check_partition(partition, d)?;
    let m = partition.n_clusters();
    guard(partition.clusters.iter().map(|c| 2f64.powi((m - 1) as i32 + c.len() as i32)).sum())?;
    let mut game = Game::new(model, x.view(), background.view())?;
    let k_out = model.n_outputs();
    let mut phi = Array2::zeros((d, k_out));

    for (k, cluster) in partition.clusters.iter().enumerate() {
        let outer = outer_coalitions(partition, k);
        let b = cluster.len();
        let inner: Vec<Mask> = (0..1usize << b)
            .map(|t| cluster.iter().enumerate().filter(|(j, _)| t >> j & 1 == 1).fold(0, |acc, (_, &i)| acc | bit(i)))
            .collect();
        game.evaluate(outer.iter().flat_map(|&(q, _)| inner.iter().map(move |&t| q | t)))?;
        for (pos, &i) in cluster.iter().enumerate() {
            for &(q, wr) in &outer {
                for (t, &tm) in inner.iter().enumerate() {
                    if t >> pos & 1 == 1 {
                        continue;
                    }
                    let w = wr * shapley_weight(b, t.count_ones() as usize);
                    let with = game.value(q | tm | bit(i));
                    let without = game.value(q | tm);
                    for o in 0..k_out {
                        phi[[i, o]] += w * (with[o] - without[o]);
                    }
                }
            }
        }
    }
    game.finish(phi)
}

/// Sibling subtrees met on the way from `root` down to `leaf`.
fn siblings_on_path(dendrogram: &Dendrogram, root: usize, leaf: usize) -> Vec<Mask> {
    let mut out = Vec::new();
    let mut node = root;
    while let Some((a, b)) = dendrogram.children(node) {
        let (toward, away) = if dendrogram.members(a).contains(&leaf) { (a, b) } else { (b, a) };
        out.push(mask_of(&dendrogram.members(away)));
        node = toward;
    }
    out
}

/// Owen values that also respect the dendrogram inside each cluster: the
/// value of every ordering in which each subtree stays contiguous,
/// averaged uniformly at every level.
pub fn owen_values_nested<P: Predictor + ?Sized>(
    model: &P,
    x: ArrayView1<f64>,
    background: ArrayView2<f64>,
    partition: &ClusterPartition,
    dendrogram: &Dendrogram,
) -> Result<Attribution> {
    let d = model.n_features();
    check_partition(partition, d)?;
    if dendrogram.n_leaves() != d {
        return Err(Error::DimensionMismatch { expected: d, got: dendrogram.n_leaves() });
    }
    let m = partition.n_clusters();
    let mut paths = Vec::with_capacity(m);
    let mut count = 0.0;
    for cluster in &partition.clusters {
        let root = cluster_root(dendrogram, cluster)
            .ok_or_else(|| Error::invalid("nested mode needs clusters that are subtrees of the dendrogram"))?;
        let per: Vec<Vec<Mask>> = cluster.iter().map(|&i| siblings_on_path(dendrogram, root, i)).collect();
        count += per.iter().map(|p| 2f64.powi(m as i32 + p.len() as i32)).sum::<f64>();
        paths.push(per);
    }
    guard(count)?;

    let mut game = Game::new(model, x.view(), background.view())?;
    let k_out = model.n_outputs();
    let mut phi = Array2::zeros((d, k_out));
    for (k, cluster) in partition.clusters.iter().enumerate() {
        let outer = outer_coalitions(partition, k);
        for (&i, sibs) in cluster.iter().zip(&paths[k]) {
            let inner: Vec<Mask> = (0..1usize << sibs.len())
                .map(|s| sibs.iter().enumerate().filter(|(j, _)| s >> j & 1 == 1).fold(0, |acc, (_, &mk)| acc | mk))
                .collect();
            game.evaluate(outer.iter().flat_map(|&(q, _)| inner.iter().flat_map(move |&p| [q | p, q | p | bit(i)])))?;
            let wi = 1.0 / inner.len() as f64;
            for &(q, wr) in &outer {
                for &p in &inner {
                    let with = game.value(q | p | bit(i));
                    let without = game.value(q | p);
                    for o in 0..k_out {
                        phi[[i, o]] += wr * wi * (with[o] - without[o]);
                    }
                }
            }
        }
    }
    game.finish(phi)
}

/// Monte Carlo Owen values from random orderings that keep every cluster
/// contiguous: clusters are shuffled, then features within each cluster.
pub fn owen_values_sampled<P: Predictor + ?Sized>(
    model: &P,
    x: ArrayView1<f64>,
    background: ArrayView2<f64>,
    partition: &ClusterPartition,
    n_permutations: usize,
    seed: u64,
) -> Result<Attribution> {
    let d = model.n_features();
    check_partition(partition, d)?;
    if n_permutations == 0 {
        return Err(Error::invalid("n_permutations must be >= 1"));
    }
    let mut game = Game::new(model, x.view(), background.view())?;
    let mut rng = stream_rng(seed, "owen/permutations");
    let mut orders = Vec::with_capacity(n_permutations);
    let mut clusters = partition.clusters.clone();
    for _ in 0..n_permutations {
        clusters.shuffle(&mut rng);
        for c in &mut clusters {
            c.shuffle(&mut rng);
        }
        orders.push(clusters.concat());
    }
    game.evaluate(std::iter::once(0).chain(orders.iter().flat_map(|o| {
        o.iter().scan(0 as Mask, |m, &i| {
            *m |= bit(i);
            Some(*m)
        })
    })))?;
    let k_out = model.n_outputs();
    let mut phi = Array2::zeros((d, k_out));
    let scale = 1.0 / n_permutations as f64;
    for order in &orders {
        let mut before: Mask = 0;
        for &i in order {
            let after = before | bit(i);
            let (with, without) = (game.value(after), game.value(before));
            for o in 0..k_out {
                phi[[i, o]] += scale * (with[o] - without[o]);
            }
            before = after;
        }
    }
    game.finish(phi)
}

/// Classical Shapley values by enumerating all coalitions.
pub fn shapley_oracle<P: Predictor + ?Sized>(model: &P, x: ArrayView1<f64>, background: ArrayView2<f64>) -> Result<Attribution> {
    let d = model.n_features();
    if d > ORACLE_MAX_FEATURES {
        return Err(Error::TooLarge(format!("oracle supports at most {ORACLE_MAX_FEATURES} features, got {d}")));
    }
    let mut game = Game::new(model, x.view(), background.view())?;
    game.evaluate(0..(1 as Mask) << d)?;
    let k_out = model.n_outputs();
    let mut phi = Array2::zeros((d, k_out));
    for i in 0..d {
        for s in 0..(1 as Mask) << d {
            if s & bit(i) != 0 {
                continue;
            }
            let w = shapley_weight(d, s.count_ones() as usize);
            let (with, without) = (game.value(s | bit(i)), game.value(s));
            for o in 0..k_out {
                phi[[i, o]] += w * (with[o] - without[o]);
            }
        }
    }
    game.finish(phi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum Estimator {
    Exact,
    Nested,
    Sampled { permutations: usize, seed: u64 },
}

impl Estimator {
    pub fn tag(&self) -> String {
        match self {
            Estimator::Exact => "exact".into(),
            Estimator::Nested => "nested".into(),
            Estimator::Sampled { permutations, .. } => format!("sampled({permutations})"),
        }
    }
}
