use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use super::cluster::{pearson_distance, ClusterPartition, Dendrogram, Merge};
use super::native::top_k;
use super::AttributionResult;
use crate::error::{Error, Result};

/// Features shown in a beeswarm.
pub const TOP_FEATURES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportKind {
    Beeswarm,
    Dependence,
    Dendrogram,
    Groupbar,
}

impl FromStr for ExportKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "beeswarm" => Ok(ExportKind::Beeswarm),
            "dependence" => Ok(ExportKind::Dependence),
            "dendrogram" => Ok(ExportKind::Dendrogram),
            "groupbar" => Ok(ExportKind::Groupbar),
            other => Err(Error::invalid(format!("unknown export kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExportOptions {
    /// Target index; `None` averages phi over targets.
    pub target: Option<usize>,
    /// Feature for the dependence export; defaults to the top feature.
    pub feature: Option<usize>,
    /// Coloring feature; defaults to the most correlated other feature.
    pub color: Option<usize>,
}

/// phi of one sample and feature for the chosen target, or the mean over
/// targets.
fn phi_at(r: &AttributionResult, s: usize, i: usize, target: Option<usize>) -> f64 {
    match target {
        Some(k) => r.phi[[s, i, k]],
        None => r.phi.slice(ndarray::s![s, i, ..]).mean().unwrap_or(0.0),
    }
}

fn mean_abs_feature(r: &AttributionResult, target: Option<usize>) -> Vec<f64> {
    let n = r.n_samples() as f64;
    (0..r.features.len())
        .map(|i| (0..r.n_samples()).map(|s| phi_at(r, s, i, target).abs()).sum::<f64>() / n)
        .collect()
}

fn check_target(r: &AttributionResult, target: Option<usize>) -> Result<()> {
    match target {
        Some(k) if k >= r.targets.len() => Err(Error::invalid(format!("target index {k} out of range"))),
        _ => Ok(()),
    }
}

/// `rank,feature,sample,feature_value,phi` for the ten features with the
/// largest mean |phi|, ten rows per sample.
pub fn export_beeswarm(r: &AttributionResult, target: Option<usize>) -> Result<String> {
    check_target(r, target)?;
    let top = top_k(&mean_abs_feature(r, target), TOP_FEATURES.min(r.features.len()));
    let mut out = String::from("rank,feature,sample,feature_value,phi\n");
    for (rank, &i) in top.iter().enumerate() {
        for s in 0..r.n_samples() {
            writeln!(out, "{},{},{},{},{}", rank + 1, r.features[i], s, r.inputs[[s, i]], phi_at(r, s, i, target)).expect("string write");
        }
    }
    Ok(out)
}

/// Other feature with the smallest Pearson distance to `feature` over the
/// explained samples.
pub fn strongest_partner(r: &AttributionResult, feature: usize) -> Result<usize> {
    let d = r.features.len();
    if d < 2 {
        return Err(Error::invalid("a partner feature needs at least two features"));
    }
    if r.n_samples() < 2 {
        return Ok((feature + 1) % d);
    }
    let dist = pearson_distance(r.inputs.view(), &r.features)?;
    Ok((0..d)
        .filter(|&j| j != feature)
        .min_by(|&a, &b| dist.get(feature, a).total_cmp(&dist.get(feature, b)).then(a.cmp(&b)))
        .expect("d >= 2"))
}

/// `sample,feature_value,phi,color_value` for one feature.
pub fn export_dependence(r: &AttributionResult, options: &ExportOptions) -> Result<String> {
    check_target(r, options.target)?;
    let d = r.features.len();
    let feature = match options.feature {
        Some(f) if f >= d => return Err(Error::invalid(format!("feature index {f} out of range"))),
        Some(f) => f,
        None => top_k(&mean_abs_feature(r, options.target), 1)[0],
    };
    let color = match options.color {
        Some(c) if c >= d => return Err(Error::invalid(format!("feature index {c} out of range"))),
        Some(c) => c,
        None => strongest_partner(r, feature)?,
    };
    let mut out = format!("# feature={} color={}\nsample,feature_value,phi,color_value\n", r.features[feature], r.features[color]);
    for s in 0..r.n_samples() {
        writeln!(out, "{},{},{},{}", s, r.inputs[[s, feature]], phi_at(r, s, feature, options.target), r.inputs[[s, color]]).expect("string write");
    }
    Ok(out)
}

/// `cluster,members,target,mean_abs_phi`: per cluster and target, the sum
/// over member features of mean |phi|.
pub fn export_groupbar(r: &AttributionResult) -> Result<String> {
    let mean_abs = r.mean_abs();
    let mut out = String::from("cluster,members,target,mean_abs_phi\n");
    for (c, members) in r.partition.clusters.iter().enumerate() {
        let names: Vec<&str> = members.iter().map(|&i| r.features[i].as_str()).collect();
        for (k, target) in r.targets.iter().enumerate() {
            let v: f64 = members.iter().map(|&i| mean_abs[[i, k]]).sum();
            writeln!(out, "{},{},{},{}", c, names.join(";"), target, v).expect("string write");
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct DendrogramDoc<'a> {
    leaves: &'a [String],
    merges: &'a [Merge],
    n_clusters: usize,
    clusters: &'a [Vec<usize>],
}

/// JSON merge list plus the cut that produced `partition`.
pub fn export_dendrogram(dendrogram: &Dendrogram, partition: &ClusterPartition) -> Result<String> {
    Ok(serde_json::to_string_pretty(&DendrogramDoc {
        leaves: &dendrogram.leaves,
        merges: &dendrogram.merges,
        n_clusters: partition.n_clusters(),
        clusters: &partition.clusters,
    })?)
}

pub fn export_plotdata(
    r: &AttributionResult,
    dendrogram: Option<&Dendrogram>,
    kind: ExportKind,
    options: &ExportOptions,
) -> Result<String> {
    if r.n_samples() == 0 {
        return Err(Error::Empty("no attributions to export".into()));
    }
    match kind {
        ExportKind::Beeswarm => export_beeswarm(r, options.target),
        ExportKind::Dependence => export_dependence(r, options),
        ExportKind::Groupbar => export_groupbar(r),
        ExportKind::Dendrogram => {
            let dg = dendrogram.ok_or_else(|| Error::invalid("dendrogram export needs a dendrogram"))?;
            export_dendrogram(dg, &r.partition)
        }
    }
}
