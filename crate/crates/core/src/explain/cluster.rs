use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric feature distance `1 - |corr|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.names.len();
        if self.values.len() != d || self.values.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("distance matrix is not square"));
        }
        for i in 0..d {
            if self.values[i][i] != 0.0 {
                return Err(Error::invalid("distance matrix diagonal must be zero"));
            }
            for j in 0..d {
                let v = self.values[i][j];
                if !(0.0..=1.0).contains(&v) || v != self.values[j][i] {
                    return Err(Error::invalid("distances must be symmetric and within [0, 1]"));
                }
            }
        }
        Ok(())
    }
}

/// Pearson distance between the columns of `x`. A constant column is at
/// distance 1 from every other column.
pub fn pearson_distance(x: ArrayView2<f64>, names: &[String]) -> Result<DistanceMatrix> {
    let (n, d) = x.dim();
    if n < 2 {
        return Err(Error::invalid(format!("correlation needs at least 2 rows, got {n}")));
    }
    if names.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: names.len() });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("distance input".into()));
    }
    let centered: Vec<Vec<f64>> = x
        .columns()
        .into_iter()
        .map(|c| {
            let m = c.sum() / n as f64;
            c.iter().map(|v| v - m).collect()
        })
        .collect();
    let norms: Vec<f64> = centered.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let mut values = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in i + 1..d {
            let dist = if norms[i] == 0.0 || norms[j] == 0.0 {
                1.0
            } else {
                let dot: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
                (1.0 - (dot / (norms[i] * norms[j])).abs()).clamp(0.0, 1.0)
            };
            values[i][j] = dist;
            values[j][i] = dist;
        }
    }
    Ok(DistanceMatrix { names: names.to_vec(), values })
}

/// One agglomeration step. Leaves are nodes `0..d`; merge `t` creates node
/// `d + t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub id: usize,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub leaves: Vec<String>,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    /// Leaf indices under `node`, ascending.
    pub fn members(&self, node: usize) -> Vec<usize> {
        let d = self.n_leaves();
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(v) = stack.pop() {
            if v < d {
                out.push(v);
            } else {
                let m = &self.merges[v - d];
                stack.push(m.a);
                stack.push(m.b);
            }
        }
        out.sort_unstable();
        out
    }

    /// Children of an internal node.
    pub fn children(&self, node: usize) -> Option<(usize, usize)> {
        let d = self.n_leaves();
        (node >= d).then(|| (self.merges[node - d].a, self.merges[node - d].b))
    }
}

/// Average-linkage agglomerative clustering. Ties go to the pair with the
/// smallest (lower id, higher id) node ids.
pub fn agglomerate(dist: &DistanceMatrix) -> Result<Dendrogram> {
    dist.validate()?;
    let d = dist.len();
    if d == 0 {
        return Err(Error::Empty("no features to cluster".into()));
    }
    // Active nodes with their sizes; `between[i][j]` indexes by active slot.
    let mut nodes: Vec<(usize, usize)> = (0..d).map(|i| (i, 1)).collect();
    let mut between = dist.values.clone();
    let mut merges = Vec::with_capacity(d - 1);
    while nodes.len() > 1 {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for i in 0..nodes.len() {
            for j in i + 1..nodes.len() {
                let h = between[i][j];
                let (lo, hi) = (nodes[i].0.min(nodes[j].0), nodes[i].0.max(nodes[j].0));
                let better = match best {
                    None => true,
                    Some((bh, _, _, blo, bhi)) => h < bh || (h == bh && (lo, hi) < (blo, bhi)),
                };
                if better {
                    best = Some((h, i, j, lo, hi));
                }
            }
        }
        let (height, i, j, lo, hi) = best.expect("at least two active nodes");
        let (ni, nj) = (nodes[i].1 as f64, nodes[j].1 as f64);
        let id = d + merges.len();
        let size = nodes[i].1 + nodes[j].1;
        merges.push(Merge { a: lo, b: hi, height, id, size });

        let merged: Vec<f64> = (0..nodes.len()).map(|k| (ni * between[i][k] + nj * between[j][k]) / (ni + nj)).collect();
        // Slot i becomes the new node, slot j is removed.
        for k in 0..nodes.len() {
            between[i][k] = merged[k];
            between[k][i] = merged[k];
        }
        between[i][i] = 0.0;
        nodes[i] = (id, size);
        nodes.remove(j);
        between.remove(j);
        for row in &mut between {
            row.remove(j);
        }
    }
    Ok(Dendrogram { leaves: dist.names.clone(), merges })
}

/// Disjoint clusters covering every feature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterPartition {
    /// Each cluster ascending; clusters ordered by their smallest member.
    pub clusters: Vec<Vec<usize>>,
    pub n_features: usize,
}

impl ClusterPartition {
    pub fn new(mut clusters: Vec<Vec<usize>>, n_features: usize) -> Result<Self> {
        let mut seen = vec![false; n_features];
        for c in &mut clusters {
            if c.is_empty() {
                return Err(Error::invalid("empty cluster"));
            }
            c.sort_unstable();
            for &i in c.iter() {
                if i >= n_features || std::mem::replace(&mut seen[i], true) {
                    return Err(Error::invalid(format!("feature {i} is out of range or in two clusters")));
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::invalid("clusters do not cover every feature"));
        }
        clusters.sort_by_key(|c| c[0]);
        Ok(ClusterPartition { clusters, n_features })
    }

    pub fn singletons(n_features: usize) -> Self {
        ClusterPartition { clusters: (0..n_features).map(|i| vec![i]).collect(), n_features }
    }

    pub fn single(n_features: usize) -> Self {
        ClusterPartition { clusters: vec![(0..n_features).collect()], n_features }
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    /// Cluster index of each feature.
    pub fn assignment(&self) -> Vec<usize> {
        let mut a = vec![0; self.n_features];
        for (k, c) in self.clusters.iter().enumerate() {
            for &i in c {
                a[i] = k;
            }
        }
        a
    }
}

/// Undoes the last `n_clusters - 1` merges.
pub fn cut_partition(dendrogram: &Dendrogram, n_clusters: usize) -> Result<ClusterPartition> {
    let d = dendrogram.n_leaves();
    if n_clusters == 0 || n_clusters > d {
        return Err(Error::invalid(format!("n_clusters must be in 1..={d}, got {n_clusters}")));
    }
    let kept = &dendrogram.merges[..d - n_clusters];
    let tops: Vec<usize> = (0..d + kept.len())
        .filter(|&node| !kept.iter().any(|m| m.a == node || m.b == node))
        .collect();
    ClusterPartition::new(tops.into_iter().map(|t| dendrogram.members(t)).collect(), d)
}

/// Root node of the sub-dendrogram spanning exactly `cluster`, if any.
pub(crate) fn cluster_root(dendrogram: &Dendrogram, cluster: &[usize]) -> Option<usize> {
    if cluster.len() == 1 {
        return Some(cluster[0]);
    }
    dendrogram
        .merges
        .iter()
        .find(|m| m.size == cluster.len() && dendrogram.members(m.id) == cluster)
        .map(|m| m.id)
}
