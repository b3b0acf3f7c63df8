//! Feature attribution: Pearson-distance feature clustering, Owen values
//! over the resulting partition, model-native importances and plot-data
//! exporters.
//!
//! The value of a coalition is interventional: absent features are filled
//! from a background set rather than drawn from a conditional density.

mod cluster;
mod export;
mod native;
mod owen;

use ndarray::{concatenate, s, Array2, Array3, ArrayView2, Axis};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

pub use cluster::{agglomerate, cut_partition, pearson_distance, ClusterPartition, Dendrogram, DistanceMatrix, Merge};
pub use export::{
    export_beeswarm, export_dendrogram, export_dependence, export_groupbar, export_plotdata, strongest_partner, ExportKind,
    ExportOptions, TOP_FEATURES,
};
pub use native::{native_importance, rank_overlap, top_k};
pub use owen::{
    binomial, owen_values, owen_values_nested, owen_values_sampled, shapley_oracle, shapley_weight, Attribution, Estimator,
    FnPredictor, Predictor, MAX_EXACT_COALITIONS, ORACLE_MAX_FEATURES,
};

use crate::error::{Error, Result};
use crate::hybrid::{DataDrivenModel, HybridModel, HybridStrategy};
use crate::rng::{derive_seed, stream_rng};
use crate::timeseries::TimeSeriesFrame;

/// Default number of clusters for grouped analyses.
pub const DEFAULT_CLUSTERS: usize = 5;
pub const DEFAULT_BACKGROUND: usize = 200;

/// Owen values for a batch of samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionResult {
    pub features: Vec<String>,
    pub targets: Vec<String>,
    /// Raw sample values, n × d.
    pub inputs: Array2<f64>,
    /// n × d × K, in target units.
    pub phi: Array3<f64>,
    /// Mean prediction over the background, per target.
    pub base: Vec<f64>,
    /// n × K
    pub predictions: Array2<f64>,
    pub partition: ClusterPartition,
    pub estimator: Estimator,
    pub value_function: String,
}

impl AttributionResult {
    pub fn n_samples(&self) -> usize {
        self.inputs.nrows()
    }

    /// Mean |phi| over samples, d × K.
    pub fn mean_abs(&self) -> Array2<f64> {
        self.phi.mapv(f64::abs).mean_axis(Axis(0)).expect("at least one sample")
    }

    /// Largest efficiency violation over samples and targets.
    pub fn max_efficiency_gap(&self) -> f64 {
        let sums = self.phi.sum_axis(Axis(1));
        let mut gap = 0.0f64;
        for ((s, k), v) in sums.indexed_iter() {
            gap = gap.max((v + self.base[k] - self.predictions[[s, k]]).abs());
        }
        gap
    }
}

/// Attributes every row of `samples`.
#[allow(clippy::too_many_arguments)]
pub fn explain_samples<P: Predictor + ?Sized>(
    model: &P,
    samples: ArrayView2<f64>,
    background: ArrayView2<f64>,
    partition: &ClusterPartition,
    dendrogram: Option<&Dendrogram>,
    estimator: Estimator,
    features: &[String],
    targets: &[String],
) -> Result<AttributionResult> {
    let (n, d) = samples.dim();
    let k = model.n_outputs();
    if n == 0 {
        return Err(Error::Empty("no samples to explain".into()));
    }
    if features.len() != d || targets.len() != k {
        return Err(Error::invalid("feature or target names do not match the model"));
    }
    let mut phi = Array3::zeros((n, d, k));
    let mut predictions = Array2::zeros((n, k));
    let mut base = Vec::new();
    for (s, x) in samples.rows().into_iter().enumerate() {
        let a = match estimator {
            Estimator::Exact => owen_values(model, x, background, partition)?,
            Estimator::Nested => {
                let dg = dendrogram.ok_or_else(|| Error::invalid("nested mode needs a dendrogram"))?;
                owen_values_nested(model, x, background, partition, dg)?
            }
            Estimator::Sampled { permutations, seed } => {
                owen_values_sampled(model, x, background, partition, permutations, derive_seed(seed, "owen", s as u64))?
            }
        };
        phi.slice_mut(s![s, .., ..]).assign(&a.phi);
        predictions.row_mut(s).assign(&ndarray::Array1::from(a.prediction));
        base = a.base;
    }
    Ok(AttributionResult {
        features: features.to_vec(),
        targets: targets.to_vec(),
        inputs: samples.to_owned(),
        phi,
        base,
        predictions,
        partition: partition.clone(),
        estimator,
        value_function: "interventional".into(),
    })
}

/// Uniform sample of `size` rows without replacement, kept in row order.
pub fn sample_rows(x: ArrayView2<f64>, size: usize, seed: u64) -> Array2<f64> {
    let n = x.nrows();
    if size >= n {
        return x.to_owned();
    }
    let mut idx = sample(&mut stream_rng(seed, "explain/rows"), n, size).into_vec();
    idx.sort_unstable();
    x.select(Axis(0), &idx)
}

/// A hybrid model seen as a function of raw (unstandardized) inputs. For
/// Assistant and Residual the simulated columns are inputs too, so a
/// Residual prediction is `sim + learner(x)` over the same feature set.
pub struct HybridFunction<'a> {
    pub model: &'a HybridModel,
}

impl HybridFunction<'_> {
    /// Raw input column names, simulated columns last.
    pub fn inputs(&self) -> Vec<String> {
        let mut names = self.model.features.clone();
        if matches!(self.model.strategy, HybridStrategy::Assistant | HybridStrategy::Residual) {
            names.extend(self.model.physics.simulated_names());
        }
        names
    }

    /// Raw input matrix built from a data frame and its simulation.
    pub fn matrix(&self, frame: &TimeSeriesFrame, sim: &TimeSeriesFrame) -> Result<Array2<f64>> {
        let x = frame.to_matrix(&self.model.features)?;
        let n_sim = self.inputs().len() - self.model.features.len();
        if n_sim == 0 {
            return Ok(x);
        }
        let s = sim.to_matrix(&self.model.physics.simulated_names())?;
        Ok(concatenate(Axis(1), &[x.view(), s.view()]).expect("same row count"))
    }
}

impl Predictor for HybridFunction<'_> {
    fn n_features(&self) -> usize {
        self.inputs().len()
    }

    fn n_outputs(&self) -> usize {
        self.model.rooms.len()
    }

    fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let nf = self.model.features.len();
        let mut z = match self.model.strategy {
            HybridStrategy::Assistant => x.to_owned(),
            _ => x.slice(s![.., ..nf]).to_owned(),
        };
        self.model.standardizer.transform_matrix(&mut z)?;
        let g = self.model.learner.predict(z.view())?;
        Ok(match self.model.strategy {
            HybridStrategy::Residual => g + x.slice(s![.., nf..]),
            _ => g,
        })
    }
}

/// The pure data-driven baseline as a function of raw inputs.
pub struct DataDrivenFunction<'a> {
    pub model: &'a DataDrivenModel,
}

impl Predictor for DataDrivenFunction<'_> {
    fn n_features(&self) -> usize {
        self.model.features.len()
    }

    fn n_outputs(&self) -> usize {
        self.model.rooms.len()
    }

    fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut z = x.to_owned();
        self.model.standardizer.transform_matrix(&mut z)?;
        self.model.learner.predict(z.view())
    }
}
