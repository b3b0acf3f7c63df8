use ndarray::{s, Array1, Array2, Array3, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_xy, FitReport};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Sigmoid,
    Identity,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        if self == Activation::Sigmoid {
            z.mapv_inplace(|v| 1.0 / (1.0 + (-v).exp()));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// fan_in × fan_out
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

/// Fully connected network; the last layer is linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FfnnModel {
    pub layers: Vec<Layer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FfnnConfig {
    pub hidden_layers: Vec<usize>,
    pub activation: Activation,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Trailing share of rows held out for early stopping.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for FfnnConfig {
    fn default() -> Self {
        FfnnConfig {
            hidden_layers: vec![128, 128],
            activation: Activation::Sigmoid,
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 1000,
            patience: 10,
            validation_fraction: 0.2,
            seed: 0,
        }
    }
}

/// Continued training of an already fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 1000,
            patience: 3,
            validation_fraction: 0.2,
            seed: 0,
        }
    }
}

/// Gradient of the loss with respect to one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl FfnnModel {
    /// Uniform weights in `±1/sqrt(fan_in)`, zero biases.
    pub fn init(n_inputs: usize, hidden: &[usize], n_outputs: usize, activation: Activation, seed: u64) -> Self {
        let mut rng = stream_rng(seed, "ffnn/init");
        let mut sizes = vec![n_inputs];
        sizes.extend_from_slice(hidden);
        sizes.push(n_outputs);
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                Layer {
                    weights: Array2::from_shape_simple_fn((w[0], w[1]), || rng.gen_range(-bound..bound)),
                    bias: Array1::zeros(w[1]),
                    activation: if i + 2 == sizes.len() { Activation::Identity } else { activation },
                }
            })
            .collect();
        FfnnModel { layers }
    }

    pub fn n_features(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn n_outputs(&self) -> usize {
        self.layers.last().expect("at least one layer").weights.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::invalid("network has no layers"));
        }
        for w in self.layers.windows(2) {
            if w[0].weights.ncols() != w[1].weights.nrows() {
                return Err(Error::DimensionMismatch { expected: w[0].weights.ncols(), got: w[1].weights.nrows() });
            }
        }
        for l in &self.layers {
            if l.bias.len() != l.weights.ncols() {
                return Err(Error::DimensionMismatch { expected: l.weights.ncols(), got: l.bias.len() });
            }
        }
        if self.layers.last().map(|l| l.activation) != Some(Activation::Identity) {
            return Err(Error::invalid("the output layer must be linear"));
        }
        Ok(())
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.n_features() {
            return Err(Error::DimensionMismatch { expected: self.n_features(), got: x.ncols() });
        }
        Ok(self.forward(x).pop().expect("forward keeps the output"))
    }

    /// Activations of every layer, input excluded.
    fn forward(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let mut acts: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let input = acts.last().map_or(x.view(), |a| a.view());
            let mut z = input.dot(&layer.weights) + &layer.bias;
            layer.activation.apply(&mut z);
            acts.push(z);
        }
        acts
    }

    /// Mean squared error over all rows and outputs, and its gradient.
    pub fn loss_and_gradient(&self, x: ArrayView2<f64>, y: ArrayView2<f64>) -> (f64, Vec<LayerGradient>) {
        let acts = self.forward(x);
        let out = acts.last().expect("forward keeps the output");
        let diff = out - &y;
        let scale = 1.0 / diff.len() as f64;
        let loss = diff.iter().map(|d| d * d).sum::<f64>() * scale;

        let mut delta = diff * (2.0 * scale);
        let mut grads = Vec::with_capacity(self.layers.len());
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            if layer.activation == Activation::Sigmoid {
                Zip::from(&mut delta).and(&acts[li]).for_each(|d, &a| *d *= a * (1.0 - a));
            }
            let input = if li == 0 { x.view() } else { acts[li - 1].view() };
            grads.push(LayerGradient {
                weights: input.t().dot(&delta),
                bias: delta.sum_axis(Axis(0)),
            });
            if li > 0 {
                delta = delta.dot(&layer.weights.t());
            }
        }
        grads.reverse();
        (loss, grads)
    }

    /// d(output k) / d(input j) for every row: shape n × d × K.
    pub fn input_jacobian(&self, x: ArrayView2<f64>) -> Array3<f64> {
        let acts = self.forward(x);
        let (n, k) = (x.nrows(), self.n_outputs());
        let mut jac = Array3::zeros((n, x.ncols(), k));
        for out in 0..k {
            let mut delta = Array2::zeros((n, k));
            delta.column_mut(out).fill(1.0);
            for li in (0..self.layers.len()).rev() {
                let layer = &self.layers[li];
                if layer.activation == Activation::Sigmoid {
                    Zip::from(&mut delta).and(&acts[li]).for_each(|d, &a| *d *= a * (1.0 - a));
                }
                delta = delta.dot(&layer.weights.t());
            }
            jac.slice_mut(s![.., .., out]).assign(&delta);
        }
        jac
    }

    pub fn mse(&self, x: ArrayView2<f64>, y: ArrayView2<f64>) -> f64 {
        let out = self.forward(x).pop().expect("forward keeps the output");
        (out - y).mapv(|d| d * d).mean().unwrap_or(0.0)
    }

    /// All weights and biases, layer by layer, weights row-major first.
    pub fn parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    pub fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        let total: usize = self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum();
        if values.len() != total {
            return Err(Error::DimensionMismatch { expected: total, got: values.len() });
        }
        let mut it = values.iter();
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|p| *p = *it.next().expect("length checked"));
        }
        Ok(())
    }

    /// Rescales the output layer so that it predicts `y * scale + shift`.
    fn affine_output(&mut self, scale: &Array1<f64>, shift: &Array1<f64>) {
        let last = self.layers.last_mut().expect("at least one layer");
        last.weights *= scale;
        last.bias = &last.bias * scale + shift;
    }
}

/// Per-output mean and standard deviation, constant outputs get std 1.
fn target_stats(y: ArrayView2<f64>) -> (Array1<f64>, Array1<f64>) {
    let mean = y.mean_axis(Axis(0)).expect("rows checked");
    let std = y.std_axis(Axis(0), 0.0).mapv(|s| if s > 1e-12 { s } else { 1.0 });
    (mean, std)
}

struct Adam {
    lr: f64,
    t: i32,
    m: Vec<(Array2<f64>, Array1<f64>)>,
    v: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-7;

    fn new(model: &FfnnModel, lr: f64) -> Self {
        let zeros = || {
            model
                .layers
                .iter()
                .map(|l| (Array2::zeros(l.weights.raw_dim()), Array1::zeros(l.bias.len())))
                .collect()
        };
        Adam { lr, t: 0, m: zeros(), v: zeros() }
    }

    fn step(&mut self, model: &mut FfnnModel, grads: &[LayerGradient]) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        let lr = self.lr;
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        };
        for (((layer, g), m), v) in model.layers.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            Zip::from(&mut layer.weights)
                .and(&g.weights)
                .and(&mut m.0)
                .and(&mut v.0)
                .for_each(|p, &g, m, v| update(p, g, m, v));
            Zip::from(&mut layer.bias)
                .and(&g.bias)
                .and(&mut m.1)
                .and(&mut v.1)
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
    }
}

struct Schedule {
    learning_rate: f64,
    batch_size: usize,
    max_epochs: usize,
    patience: usize,
    validation_fraction: f64,
    seed: u64,
}

/// Mini-batch Adam on normalized targets with early stopping on the
/// chronologically last rows; the best-validation weights are kept.
fn train(model: &mut FfnnModel, x: ArrayView2<f64>, y: ArrayView2<f64>, s: &Schedule) -> Result<FitReport> {
    if s.batch_size == 0 || !(0.0..1.0).contains(&s.validation_fraction) || !(s.learning_rate > 0.0) {
        return Err(Error::invalid("batch_size, validation_fraction or learning_rate out of range"));
    }
    let n = x.nrows();
    let n_val = (n as f64 * s.validation_fraction).round() as usize;
    let n_train = n - n_val;
    if n_train == 0 || (s.validation_fraction > 0.0 && n_val == 0) {
        return Err(Error::invalid(format!("{n} rows are too few for a {} validation split", s.validation_fraction)));
    }
    let (xt, yt) = (x.slice(s![..n_train, ..]), y.slice(s![..n_train, ..]));
    let (xv, yv) = if n_val > 0 {
        (x.slice(s![n_train.., ..]), y.slice(s![n_train.., ..]))
    } else {
        (xt, yt)
    };

    let mut report = FitReport::default();
    let mut rng = stream_rng(s.seed, "ffnn/shuffle");
    let mut order: Vec<usize> = (0..n_train).collect();
    let mut adam = Adam::new(model, s.learning_rate);
    let mut best = (f64::INFINITY, model.clone());
    let mut stale = 0;

    for _ in 0..s.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(s.batch_size) {
            let xb = xt.select(Axis(0), batch);
            let yb = yt.select(Axis(0), batch);
            let (loss, grads) = model.loss_and_gradient(xb.view(), yb.view());
            epoch_loss += loss * batch.len() as f64;
            adam.step(model, &grads);
        }
        let val = model.mse(xv, yv);
        if !val.is_finite() {
            return Err(Error::Numerical("training diverged".into()));
        }
        report.train_loss.push(epoch_loss / n_train as f64);
        report.val_loss.push(val);
        report.epochs += 1;
        if val < best.0 {
            best = (val, model.clone());
            report.best_epoch = Some(report.epochs);
            stale = 0;
        } else {
            stale += 1;
            if stale >= s.patience {
                report.early_stopped = true;
                break;
            }
        }
    }
    if report.epochs > 0 {
        *model = best.1;
    }
    Ok(report)
}

fn check_rows(x: ArrayView2<f64>) -> Result<()> {
    if x.nrows() < 10 {
        return Err(Error::invalid(format!("at least 10 rows needed, got {}", x.nrows())));
    }
    Ok(())
}

pub fn ffnn_fit(x: ArrayView2<f64>, y: ArrayView2<f64>, config: &FfnnConfig) -> Result<(FfnnModel, FitReport)> {
    check_xy(x, y)?;
    check_rows(x)?;
    let mut model = FfnnModel::init(x.ncols(), &config.hidden_layers, y.ncols(), config.activation, config.seed);
    let (mean, std) = target_stats(y);
    let yn = (&y - &mean) / &std;
    let report = train(
        &mut model,
        x,
        yn.view(),
        &Schedule {
            learning_rate: config.learning_rate,
            batch_size: config.batch_size,
            max_epochs: config.max_epochs,
            patience: config.patience,
            validation_fraction: config.validation_fraction,
            seed: config.seed,
        },
    )?;
    model.affine_output(&std, &mean);
    Ok((model, report))
}

pub fn ffnn_finetune(
    model: &FfnnModel,
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    config: &FinetuneConfig,
) -> Result<(FfnnModel, FitReport)> {
    check_xy(x, y)?;
    check_rows(x)?;
    model.validate()?;
    if x.ncols() != model.n_features() {
        return Err(Error::DimensionMismatch { expected: model.n_features(), got: x.ncols() });
    }
    if y.ncols() != model.n_outputs() {
        return Err(Error::DimensionMismatch { expected: model.n_outputs(), got: y.ncols() });
    }
    if config.max_epochs == 0 {
        return Ok((model.clone(), FitReport::default()));
    }
    let (mean, std) = target_stats(y);
    let mut tuned = model.clone();
    tuned.affine_output(&std.mapv(f64::recip), &(-&mean / &std));
    let yn = (&y - &mean) / &std;
    let report = train(
        &mut tuned,
        x,
        yn.view(),
        &Schedule {
            learning_rate: config.learning_rate,
            batch_size: config.batch_size,
            max_epochs: config.max_epochs,
            patience: config.patience,
            validation_fraction: config.validation_fraction,
            seed: config.seed,
        },
    )?;
    tuned.affine_output(&std, &mean);
    Ok((tuned, report))
}
