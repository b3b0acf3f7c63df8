use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::harness::scenario_frame;
use crate::error::{Error, Result};
use crate::explain::{
    agglomerate, cut_partition, explain_samples, export_beeswarm, export_dendrogram, export_dependence, export_groupbar,
    native_importance, pearson_distance, rank_overlap, sample_rows, top_k, AttributionResult, DataDrivenFunction,
    Dendrogram, Estimator, ExportOptions, HybridFunction, Predictor, DEFAULT_BACKGROUND, DEFAULT_CLUSTERS,
};
use crate::hybrid::{DataDrivenModel, HybridModel};
use crate::learners::Learner;
use crate::physics::columns;
use crate::rng::derive_seed;
use crate::timeseries::TimeSeriesFrame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorMode {
    Exact,
    Nested,
    Sampled,
}

impl FromStr for EstimatorMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" => Ok(EstimatorMode::Exact),
            "nested" => Ok(EstimatorMode::Nested),
            "sampled" => Ok(EstimatorMode::Sampled),
            other => Err(Error::invalid(format!("unknown estimator '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainOptions {
    /// Test rows explained.
    pub samples: usize,
    /// Training rows used as the background set.
    pub background: usize,
    pub clusters: usize,
    pub mode: EstimatorMode,
    /// Permutations per sample in sampled mode.
    pub permutations: usize,
    pub seed: u64,
    /// Ranks in the native-vs-Owen table.
    pub top_k: usize,
}

impl Default for ExplainOptions {
    fn default() -> Self {
        ExplainOptions {
            samples: 500,
            background: DEFAULT_BACKGROUND,
            clusters: DEFAULT_CLUSTERS,
            mode: EstimatorMode::Sampled,
            permutations: 10,
            seed: 0,
            top_k: 5,
        }
    }
}

impl ExplainOptions {
    pub fn estimator(&self) -> Estimator {
        match self.mode {
            EstimatorMode::Exact => Estimator::Exact,
            EstimatorMode::Nested => Estimator::Nested,
            EstimatorMode::Sampled => Estimator::Sampled { permutations: self.permutations, seed: self.seed },
        }
    }
}

/// A fitted model entering the study.
#[derive(Debug, Clone, Copy)]
pub enum StudyModel<'a> {
    Hybrid(&'a HybridModel),
    DataDriven(&'a DataDrivenModel),
}

impl StudyModel<'_> {
    fn learner(&self) -> &Learner {
        match self {
            StudyModel::Hybrid(m) => &m.learner,
            StudyModel::DataDriven(m) => &m.learner,
        }
    }

    /// `AR` when simulated columns are explained inputs, `DAS` otherwise.
    pub fn clustering(&self) -> &'static str {
        match self {
            StudyModel::Hybrid(m) if HybridFunction { model: m }.inputs().len() > m.features.len() => "AR",
            _ => "DAS",
        }
    }

    fn targets(&self) -> Vec<String> {
        let rooms = match self {
            StudyModel::Hybrid(m) => &m.rooms,
            StudyModel::DataDriven(m) => &m.rooms,
        };
        rooms.iter().map(|r| columns::room_target(r)).collect()
    }
}

/// Raw explained inputs, raw rows and standardized learner rows of a frame.
struct Views {
    names: Vec<String>,
    raw: Array2<f64>,
    learner_names: Vec<String>,
    design: Array2<f64>,
}

fn views(model: StudyModel, frame: &TimeSeriesFrame) -> Result<Views> {
    match model {
        StudyModel::Hybrid(m) => {
            let view = scenario_frame(frame, &m.scenario.spec());
            let sim = m.physics.simulate(&view)?;
            let f = HybridFunction { model: m };
            Ok(Views { names: f.inputs(), raw: f.matrix(&view, &sim)?, learner_names: m.learner_inputs(), design: m.design(&view, &sim)? })
        }
        StudyModel::DataDriven(m) => Ok(Views {
            names: m.features.clone(),
            raw: frame.to_matrix(&m.features)?,
            learner_names: m.features.clone(),
            design: m.design(frame)?,
        }),
    }
}

/// Per-model output of the study.
#[derive(Debug, Clone)]
pub struct StudyEntry {
    pub label: String,
    pub clustering: &'static str,
    pub attribution: AttributionResult,
    pub dendrogram: Dendrogram,
    /// Learner input names with native importance and Owen mean |phi|,
    /// both averaged over targets.
    pub learner_inputs: Vec<String>,
    pub native: Vec<f64>,
    pub owen: Vec<f64>,
    pub overlap: usize,
}

#[derive(Debug, Clone)]
pub struct ExplainStudy {
    pub entries: Vec<StudyEntry>,
    pub files: Vec<PathBuf>,
}

pub const RANK_HEADER: &str = "model,rank,native_feature,native_importance,owen_feature,owen_mean_abs_phi";

impl ExplainStudy {
    /// `top_k` rows per model pairing the native and Owen rankings.
    pub fn rank_table(&self, k: usize) -> String {
        let mut out = format!("{RANK_HEADER}\n");
        for e in &self.entries {
            let a = top_k(&e.native, k);
            let b = top_k(&e.owen, k);
            for (rank, (i, j)) in a.iter().zip(&b).enumerate() {
                writeln!(out, "{},{},{},{},{},{}", e.label, rank + 1, e.learner_inputs[*i], e.native[*i], e.learner_inputs[*j], e.owen[*j])
                    .expect("string write");
            }
        }
        out
    }

    pub fn overlap_table(&self, k: usize) -> String {
        let mut out = String::from("model,clustering,top_k,overlap\n");
        for e in &self.entries {
            writeln!(out, "{},{},{},{}", e.label, e.clustering, k.min(e.native.len()), e.overlap).expect("string write");
        }
        out
    }
}

fn file_stem(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

/// Owen values of each model on a seeded subsample of `test`, against a
/// background drawn from `train`, with the feature partition cut from a
/// Pearson-distance dendrogram of the training inputs. Writes per-model
/// beeswarm, dependence, dendrogram and groupbar exports plus
/// `rank_table.csv` and `rank_overlap.csv` when `out_dir` is given.
pub fn run_explain_study(
    models: &[(String, StudyModel)],
    train: &TimeSeriesFrame,
    test: &TimeSeriesFrame,
    options: &ExplainOptions,
    out_dir: Option<&Path>,
) -> Result<ExplainStudy> {
    if models.is_empty() {
        return Err(Error::invalid("no models to explain"));
    }
    if options.samples == 0 || options.background == 0 || options.clusters == 0 || options.top_k == 0 {
        return Err(Error::invalid("samples, background, clusters and top_k must be positive"));
    }
    let mut entries = Vec::new();
    for (label, model) in models {
        let entry = explain_one(label, *model, train, test, options).map_err(|e| e.context(format!("explaining {label}")))?;
        entries.push(entry);
    }
    let mut study = ExplainStudy { entries, files: Vec::new() };
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let mut files: Vec<(String, String)> = Vec::new();
        for e in &study.entries {
            let stem = file_stem(&e.label);
            files.push((format!("{stem}_beeswarm.csv"), export_beeswarm(&e.attribution, None)?));
            files.push((format!("{stem}_dependence.csv"), export_dependence(&e.attribution, &ExportOptions::default())?));
            files.push((format!("{stem}_dendrogram.json"), export_dendrogram(&e.dendrogram, &e.attribution.partition)?));
            files.push((format!("{stem}_groupbar.csv"), export_groupbar(&e.attribution)?));
        }
        files.push(("rank_table.csv".into(), study.rank_table(options.top_k)));
        files.push(("rank_overlap.csv".into(), study.overlap_table(options.top_k)));
        for (name, body) in files {
            let path = dir.join(name);
            std::fs::write(&path, body)?;
            study.files.push(path);
        }
    }
    Ok(study)
}

fn explain_one(label: &str, model: StudyModel, train: &TimeSeriesFrame, test: &TimeSeriesFrame, options: &ExplainOptions) -> Result<StudyEntry> {
    let tr = views(model, train)?;
    let te = views(model, test)?;
    let dendrogram = agglomerate(&pearson_distance(tr.raw.view(), &tr.names)?)?;
    let partition = cut_partition(&dendrogram, options.clusters.min(tr.names.len()))?;
    let background = sample_rows(tr.raw.view(), options.background, derive_seed(options.seed, "study/background", 0));
    let pick = derive_seed(options.seed, "study/samples", 0);
    let samples = sample_rows(te.raw.view(), options.samples, pick);
    let design = sample_rows(te.design.view(), options.samples, pick);
    let targets = model.targets();

    let attribution = match model {
        StudyModel::Hybrid(m) => {
            let f = HybridFunction { model: m };
            run_estimator(&f, &samples, &background, &partition, &dendrogram, options, &te.names, &targets)?
        }
        StudyModel::DataDriven(m) => {
            let f = DataDrivenFunction { model: m };
            run_estimator(&f, &samples, &background, &partition, &dendrogram, options, &te.names, &targets)?
        }
    };

    let native = native_importance(model.learner(), design.view())?.mean_axis(Axis(1)).expect("at least one target").to_vec();
    let owen_all = attribution.mean_abs().mean_axis(Axis(1)).expect("at least one target");
    let owen: Vec<f64> = te
        .learner_names
        .iter()
        .map(|n| te.names.iter().position(|m| m == n).map_or(0.0, |i| owen_all[i]))
        .collect();
    let overlap = rank_overlap(&native, &owen, options.top_k.min(native.len()))?;
    Ok(StudyEntry {
        label: label.to_string(),
        clustering: model.clustering(),
        attribution,
        dendrogram,
        learner_inputs: te.learner_names,
        native,
        owen,
        overlap,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_estimator<P: Predictor>(
    f: &P,
    samples: &Array2<f64>,
    background: &Array2<f64>,
    partition: &crate::explain::ClusterPartition,
    dendrogram: &Dendrogram,
    options: &ExplainOptions,
    names: &[String],
    targets: &[String],
) -> Result<AttributionResult> {
    explain_samples(f, samples.view(), background.view(), partition, Some(dendrogram), options.estimator(), names, targets)
}
