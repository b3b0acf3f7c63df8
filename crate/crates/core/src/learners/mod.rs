//! Multi-output regressors with a shared fit / predict / fine-tune contract:
//! least squares, a feedforward network and a random forest.

pub mod ffnn;
pub mod forest;
pub mod linear;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

pub use ffnn::{ffnn_finetune, ffnn_fit, Activation, FfnnConfig, FfnnModel, FinetuneConfig, Layer};
pub use forest::{rf_fit, rf_warmstart_extend, ForestConfig, ForestModel, Tree};
pub use linear::{lr_fit, lr_fit_with, LinearModel, LinearOptions};

use crate::error::{Error, Result};

/// Loss traces of an iterative fit. Empty for closed-form fits.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub epochs: usize,
    pub early_stopped: bool,
    /// 1-based epoch whose weights were kept.
    pub best_epoch: Option<usize>,
}

pub(crate) fn check_xy(x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<()> {
    if x.nrows() != y.nrows() {
        return Err(Error::DimensionMismatch { expected: x.nrows(), got: y.nrows() });
    }
    if x.nrows() == 0 || x.ncols() == 0 || y.ncols() == 0 {
        return Err(Error::Empty("training matrix".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("features".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("targets".into()));
    }
    Ok(())
}

/// Adam fine-tuning of an affine map, treated as a network with a single
/// linear layer.
pub fn lr_finetune(
    model: &LinearModel,
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    config: &FinetuneConfig,
) -> Result<(LinearModel, FitReport)> {
    let net = FfnnModel {
        layers: vec![Layer {
            weights: model.weights.clone(),
            bias: model.intercept.clone(),
            activation: Activation::Identity,
        }],
    };
    let (tuned, report) = ffnn_finetune(&net, x, y, config)?;
    let layer = tuned.layers.into_iter().next().expect("one layer");
    Ok((LinearModel::new(layer.weights, layer.bias)?, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Lr,
    Ffnn,
    Rf,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 3] = [LearnerKind::Lr, LearnerKind::Ffnn, LearnerKind::Rf];

    pub fn as_str(self) -> &'static str {
        match self {
            LearnerKind::Lr => "lr",
            LearnerKind::Ffnn => "ffnn",
            LearnerKind::Rf => "rf",
        }
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LearnerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lr" | "linear" => Ok(LearnerKind::Lr),
            "ffnn" | "nn" => Ok(LearnerKind::Ffnn),
            "rf" | "forest" => Ok(LearnerKind::Rf),
            _ => Err(Error::invalid(format!("unknown learner '{s}' (expected lr, ffnn or rf)"))),
        }
    }
}

/// Hyperparameters for every learner family plus the fine-tuning knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    pub linear: LinearOptions,
    pub ffnn: FfnnConfig,
    pub forest: ForestConfig,
    pub finetune: FinetuneConfig,
    /// Trees added when a forest is fine-tuned.
    pub warmstart_trees: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            linear: LinearOptions::default(),
            ffnn: FfnnConfig::default(),
            forest: ForestConfig::default(),
            finetune: FinetuneConfig::default(),
            warmstart_trees: 100,
        }
    }
}

impl LearnerConfig {
    /// Same hyperparameters, every random stream reseeded.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.ffnn.seed = seed;
        c.forest.seed = seed;
        c.finetune.seed = seed;
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "lowercase")]
pub enum Learner {
    Lr(LinearModel),
    Ffnn(FfnnModel),
    Rf(ForestModel),
}

impl Learner {
    pub fn kind(&self) -> LearnerKind {
        match self {
            Learner::Lr(_) => LearnerKind::Lr,
            Learner::Ffnn(_) => LearnerKind::Ffnn,
            Learner::Rf(_) => LearnerKind::Rf,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Learner::Lr(m) => m.n_features(),
            Learner::Ffnn(m) => m.n_features(),
            Learner::Rf(m) => m.n_features,
        }
    }

    pub fn n_outputs(&self) -> usize {
        match self {
            Learner::Lr(m) => m.n_outputs(),
            Learner::Ffnn(m) => m.n_outputs(),
            Learner::Rf(m) => m.n_outputs,
        }
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let out = match self {
            Learner::Lr(m) => m.predict(x)?,
            Learner::Ffnn(m) => m.predict(x)?,
            Learner::Rf(m) => m.predict(x)?,
        };
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("{} produced non-finite predictions", self.kind())));
        }
        Ok(out)
    }

    /// Continues training on new data: Adam for LR and FFNN, extra trees
    /// for the forest.
    pub fn finetune(&self, x: ArrayView2<f64>, y: ArrayView2<f64>, config: &LearnerConfig) -> Result<(Learner, FitReport)> {
        match self {
            Learner::Lr(m) => lr_finetune(m, x, y, &config.finetune).map(|(m, r)| (Learner::Lr(m), r)),
            Learner::Ffnn(m) => ffnn_finetune(m, x, y, &config.finetune).map(|(m, r)| (Learner::Ffnn(m), r)),
            Learner::Rf(m) => {
                rf_warmstart_extend(m, x, y, config.warmstart_trees).map(|m| (Learner::Rf(m), FitReport::default()))
            }
        }
    }

    /// Impurity importance for forests, |coefficient| scaled by feature
    /// spread for linear models; `None` for networks.
    pub fn native_importance(&self, feature_std: Option<&Array1<f64>>) -> Option<Vec<f64>> {
        match self {
            Learner::Rf(m) => Some(m.feature_importance()),
            Learner::Lr(m) => Some(
                m.weights
                    .rows()
                    .into_iter()
                    .enumerate()
                    .map(|(i, row)| {
                        let s = feature_std.map_or(1.0, |s| s[i]);
                        row.iter().map(|w| (w * s).abs()).sum::<f64>() / row.len() as f64
                    })
                    .collect(),
            ),
            Learner::Ffnn(_) => None,
        }
    }

    /// Writes the model. LR and forests become one versioned JSON document;
    /// a network becomes a JSON header at `path` plus a little-endian f64
    /// weight blob next to it with the extension `bin`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let doc = match self {
            Learner::Ffnn(m) => {
                let blob = blob_path(path);
                let bytes: Vec<u8> = m.parameters().iter().flat_map(|v| v.to_le_bytes()).collect();
                fs::write(&blob, bytes)?;
                let header = FfnnHeader {
                    layers: m
                        .layers
                        .iter()
                        .map(|l| (l.weights.nrows(), l.weights.ncols(), l.activation))
                        .collect(),
                    blob: blob.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
                };
                Saved { format: FORMAT.into(), version: VERSION, body: SavedBody::Ffnn(header) }
            }
            other => Saved { format: FORMAT.into(), version: VERSION, body: SavedBody::Model(other.clone()) },
        };
        fs::write(path, serde_json::to_vec(&doc)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Learner> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let doc: Saved = serde_json::from_slice(&fs::read(path)?)?;
        if doc.format != FORMAT || doc.version != VERSION {
            return Err(Error::invalid(format!("unsupported model file {} v{}", doc.format, doc.version)));
        }
        match doc.body {
            SavedBody::Model(m) => Ok(m),
            SavedBody::Ffnn(h) => {
                let blob = path.with_file_name(&h.blob);
                if !blob.exists() {
                    return Err(Error::MissingFile(blob));
                }
                let bytes = fs::read(&blob)?;
                if bytes.len() % 8 != 0 {
                    return Err(Error::invalid("weight blob length is not a multiple of 8"));
                }
                let values: Vec<f64> =
                    bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
                let mut model = FfnnModel {
                    layers: h
                        .layers
                        .iter()
                        .map(|&(i, o, activation)| Layer {
                            weights: Array2::zeros((i, o)),
                            bias: Array1::zeros(o),
                            activation,
                        })
                        .collect(),
                };
                model.set_parameters(&values)?;
                model.validate()?;
                Ok(Learner::Ffnn(model))
            }
        }
    }
}

const FORMAT: &str = "hybridtherm-learner";
const VERSION: u32 = 1;

fn blob_path(path: &Path) -> PathBuf {
    path.with_extension("bin")
}

#[derive(Serialize, Deserialize)]
struct FfnnHeader {
    /// (inputs, outputs, activation) per layer.
    layers: Vec<(usize, usize, Activation)>,
    blob: String,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum SavedBody {
    Model(Learner),
    Ffnn(FfnnHeader),
}

#[derive(Serialize, Deserialize)]
struct Saved {
    format: String,
    version: u32,
    body: SavedBody,
}

/// Fits a fresh model of `kind`.
pub fn fit(kind: LearnerKind, x: ArrayView2<f64>, y: ArrayView2<f64>, config: &LearnerConfig) -> Result<(Learner, FitReport)> {
    match kind {
        LearnerKind::Lr => Ok((Learner::Lr(lr_fit_with(x, y, &config.linear)?), FitReport::default())),
        LearnerKind::Ffnn => ffnn_fit(x, y, &config.ffnn).map(|(m, r)| (Learner::Ffnn(m), r)),
        LearnerKind::Rf => Ok((Learner::Rf(rf_fit(x, y, &config.forest)?), FitReport::default())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array};

    fn line(n: usize, slope: f64, offset: f64) -> (Array2<f64>, Array2<f64>) {
        let x = Array::linspace(-1.0, 1.0, n).into_shape_with_order((n, 1)).unwrap();
        let y = x.mapv(|v| slope * v + offset);
        (x, y)
    }

    fn quick() -> LearnerConfig {
        let mut c = LearnerConfig::default();
        c.ffnn.hidden_layers = vec![8];
        c.ffnn.max_epochs = 20;
        c.forest.n_trees = 5;
        c.warmstart_trees = 3;
        c
    }

    #[test]
    fn lr_finetune_keeps_exact_fit() {
        let (x, y) = line(50, 2.0, 1.0);
        let m = lr_fit(x.view(), y.view()).unwrap();
        let (t, _) = lr_finetune(&m, x.view(), y.view(), &FinetuneConfig::default()).unwrap();
        assert!((t.weights[[0, 0]] - m.weights[[0, 0]]).abs() < 1e-6);
        assert!((t.intercept[0] - m.intercept[0]).abs() < 1e-6);
    }

    #[test]
    fn lr_finetune_zero_epochs_identity() {
        let (x, y) = line(50, 2.0, 1.0);
        let m = LinearModel::new(array![[0.5]], array![0.0]).unwrap();
        let cfg = FinetuneConfig { max_epochs: 0, ..Default::default() };
        assert_eq!(lr_finetune(&m, x.view(), y.view(), &cfg).unwrap().0, m);
    }

    #[test]
    fn lr_finetune_converges_from_zero() {
        let (x, y) = line(200, 2.0, 0.0);
        let m = LinearModel::new(array![[0.0]], array![0.0]).unwrap();
        let cfg = FinetuneConfig { max_epochs: 500, patience: 50, learning_rate: 1e-2, ..Default::default() };
        let (t, _) = lr_finetune(&m, x.view(), y.view(), &cfg).unwrap();
        assert!((t.weights[[0, 0]] - 2.0).abs() < 1e-2, "{}", t.weights[[0, 0]]);
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("RF".parse::<LearnerKind>().unwrap(), LearnerKind::Rf);
        assert_eq!("lr".parse::<LearnerKind>().unwrap(), LearnerKind::Lr);
        assert!("svm".parse::<LearnerKind>().is_err());
    }

    #[test]
    fn dispatch_and_finetune() {
        let (x, y) = line(60, 1.0, 0.0);
        for kind in LearnerKind::ALL {
            let (m, _) = fit(kind, x.view(), y.view(), &quick()).unwrap();
            assert_eq!(m.kind(), kind);
            assert_eq!((m.n_features(), m.n_outputs()), (1, 1));
            let (t, _) = m.finetune(x.view(), (&y + 1.0).view(), &quick()).unwrap();
            assert_eq!(t.predict(x.view()).unwrap().dim(), (60, 1));
            if let Learner::Rf(f) = &t {
                assert_eq!(f.trees.len(), 8);
            }
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (x, y) = line(60, 1.5, 0.3);
        for kind in LearnerKind::ALL {
            let (m, _) = fit(kind, x.view(), y.view(), &quick()).unwrap();
            let path = dir.path().join(format!("{kind}.json"));
            m.save(&path).unwrap();
            let back = Learner::load(&path).unwrap();
            assert_eq!(back, m);
            assert_eq!(back.predict(x.view()).unwrap(), m.predict(x.view()).unwrap());
        }
        assert!(dir.path().join("ffnn.bin").exists());
        assert!(matches!(Learner::load(&dir.path().join("nope.json")), Err(Error::MissingFile(_))));
    }

    #[test]
    fn refits_are_bit_identical() {
        let (x, y) = line(60, 1.0, 0.0);
        for kind in LearnerKind::ALL {
            assert_eq!(fit(kind, x.view(), y.view(), &quick()).unwrap().0, fit(kind, x.view(), y.view(), &quick()).unwrap().0);
        }
    }

    #[test]
    fn rejects_non_finite() {
        let (mut x, y) = line(20, 1.0, 0.0);
        x[[3, 0]] = f64::NAN;
        for kind in LearnerKind::ALL {
            assert!(matches!(fit(kind, x.view(), y.view(), &quick()), Err(Error::NonFinite(_))));
        }
    }
}
