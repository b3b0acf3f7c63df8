//! The four ways of combining a physics tier with a learner.
//!
//! * Assistant: the simulation is an extra input.
//! * Residual: the learner predicts the simulation error.
//! * Surrogate: the learner imitates the simulation.
//! * Augmentation: a surrogate fine-tuned on measurements.

mod bundle;
mod cache;

use std::fmt;
use std::str::FromStr;

use ndarray::{concatenate, Array2, Axis};
use serde::{Deserialize, Serialize};

pub use bundle::{load_bundle, save_bundle};
pub use cache::SimCache;

use crate::error::{Error, Result};
use crate::learners::{fit, FitReport, Learner, LearnerConfig, LearnerKind};
use crate::physics::{columns, PhysicsTier};
use crate::timeseries::{Column, ColumnSpec, FeatureGroup, ScenarioId, ScenarioSpec, Standardizer, TimeSeriesFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HybridStrategy {
    Assistant,
    Residual,
    Surrogate,
    Augmentation,
}

impl HybridStrategy {
    pub const ALL: [HybridStrategy; 4] = [
        HybridStrategy::Assistant,
        HybridStrategy::Residual,
        HybridStrategy::Surrogate,
        HybridStrategy::Augmentation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            HybridStrategy::Assistant => "assistant",
            HybridStrategy::Residual => "residual",
            HybridStrategy::Surrogate => "surrogate",
            HybridStrategy::Augmentation => "augmentation",
        }
    }

    /// Whether the simulated columns enter the learner as features.
    pub fn reads_simulation(self) -> bool {
        self == HybridStrategy::Assistant
    }
}

impl fmt::Display for HybridStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HybridStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        HybridStrategy::ALL
            .into_iter()
            .find(|h| h.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid(format!("unknown strategy '{s}'")))
    }
}

pub fn prediction_column(room: &str) -> String {
    format!("pred_{room}")
}

/// Learner inputs a scenario may use, in frame order.
pub fn feature_columns(frame: &TimeSeriesFrame, scenario: &ScenarioSpec) -> Vec<String> {
    let groups: Vec<FeatureGroup> = scenario
        .allowed_groups
        .iter()
        .copied()
        .filter(|g| !matches!(g, FeatureGroup::Target | FeatureGroup::Simulated))
        .collect();
    frame.names_in_groups(&groups)
}

/// A fitted physics + learner combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridModel {
    pub strategy: HybridStrategy,
    pub scenario: ScenarioId,
    pub learner: Learner,
    pub physics: PhysicsTier,
    /// Covers `features`, then the simulated columns for Assistant.
    pub standardizer: Standardizer,
    pub features: Vec<String>,
    pub rooms: Vec<String>,
}

impl HybridModel {
    /// Names of the learner's input columns, simulated ones included.
    pub fn learner_inputs(&self) -> Vec<String> {
        let mut names = self.features.clone();
        if self.strategy.reads_simulation() {
            names.extend(self.physics.simulated_names());
        }
        names
    }

    pub fn targets(&self) -> Vec<String> {
        self.rooms.iter().map(|r| columns::room_target(r)).collect()
    }

    /// Standardized learner input matrix for `frame` with its simulation.
    pub fn design(&self, frame: &TimeSeriesFrame, sim: &TimeSeriesFrame) -> Result<Array2<f64>> {
        design(frame, sim, &self.features, self.strategy, &self.physics, &self.standardizer)
    }
}

fn raw_design(frame: &TimeSeriesFrame, sim: &TimeSeriesFrame, features: &[String], strategy: HybridStrategy, physics: &PhysicsTier) -> Result<Array2<f64>> {
    let x = frame.to_matrix(features)?;
    if strategy.reads_simulation() {
        let s = sim.to_matrix(&physics.simulated_names())?;
        Ok(concatenate(Axis(1), &[x.view(), s.view()]).expect("same row count"))
    } else {
        Ok(x)
    }
}

fn design(
    frame: &TimeSeriesFrame,
    sim: &TimeSeriesFrame,
    features: &[String],
    strategy: HybridStrategy,
    physics: &PhysicsTier,
    standardizer: &Standardizer,
) -> Result<Array2<f64>> {
    let mut x = raw_design(frame, sim, features, strategy, physics)?;
    standardizer.transform_matrix(&mut x)?;
    Ok(x)
}

fn check_scenario(physics: &PhysicsTier, scenario: &ScenarioSpec) -> Result<()> {
    if physics.kind != scenario.physics_tier {
        return Err(Error::invalid(format!(
            "scenario {} pairs with the {} tier, got {}",
            scenario.id, scenario.physics_tier, physics.kind
        )));
    }
    Ok(())
}

fn check_sim(sim: &TimeSeriesFrame, frame: &TimeSeriesFrame) -> Result<()> {
    if sim.timestamps() != frame.timestamps() {
        return Err(Error::invalid("simulation and data frames are not aligned"));
    }
    Ok(())
}

/// Fits a hybrid model, simulating the physics tier over `train`.
pub fn hybrid_fit(
    strategy: HybridStrategy,
    kind: LearnerKind,
    config: &LearnerConfig,
    physics: &PhysicsTier,
    train: &TimeSeriesFrame,
    scenario: &ScenarioSpec,
) -> Result<(HybridModel, FitReport)> {
    check_scenario(physics, scenario)?;
    let sim = physics.simulate(train)?;
    hybrid_fit_with_sim(strategy, kind, config, physics, train, &sim, scenario)
}

/// As [`hybrid_fit`] with a precomputed simulation of `train`.
pub fn hybrid_fit_with_sim(
    strategy: HybridStrategy,
    kind: LearnerKind,
    config: &LearnerConfig,
    physics: &PhysicsTier,
    train: &TimeSeriesFrame,
    sim: &TimeSeriesFrame,
    scenario: &ScenarioSpec,
) -> Result<(HybridModel, FitReport)> {
    check_scenario(physics, scenario)?;
    check_sim(sim, train)?;
    let rooms = physics.rooms.clone();
    let targets: Vec<String> = rooms.iter().map(|r| columns::room_target(r)).collect();
    let y = train.to_matrix(&targets)?;
    let y_sim = sim.to_matrix(&physics.simulated_names())?;

    let features = feature_columns(train, scenario);
    let mut x = raw_design(train, sim, &features, strategy, physics)?;
    let mut input_names = features.clone();
    if strategy.reads_simulation() {
        input_names.extend(physics.simulated_names());
    }
    let standardizer = Standardizer::fit_matrix(&input_names, &x)?;
    standardizer.transform_matrix(&mut x)?;

    let (learner, report) = match strategy {
        HybridStrategy::Assistant => fit(kind, x.view(), y.view(), config)?,
        HybridStrategy::Residual => fit(kind, x.view(), (&y - &y_sim).view(), config)?,
        HybridStrategy::Surrogate => fit(kind, x.view(), y_sim.view(), config)?,
        HybridStrategy::Augmentation => {
            let (pre, mut first) = fit(kind, x.view(), y_sim.view(), config)?;
            let (tuned, second) = pre.finetune(x.view(), y.view(), config)?;
            first.train_loss.extend(second.train_loss);
            first.val_loss.extend(second.val_loss);
            first.epochs += second.epochs;
            first.early_stopped = second.early_stopped;
            (tuned, first)
        }
    };
    let model = HybridModel {
        strategy,
        scenario: scenario.id,
        learner,
        physics: physics.clone(),
        standardizer,
        features,
        rooms,
    };
    Ok((model, report))
}

fn prediction_frame(frame: &TimeSeriesFrame, rooms: &[String], values: &Array2<f64>) -> Result<TimeSeriesFrame> {
    let cols = rooms
        .iter()
        .enumerate()
        .map(|(j, r)| Column::new(ColumnSpec::new(prediction_column(r), FeatureGroup::Simulated, "degC"), values.column(j).to_vec()))
        .collect();
    TimeSeriesFrame::new(frame.timestamps().to_vec(), frame.step_minutes(), cols)
}

/// One `pred_<room>` column per room.
pub fn hybrid_predict(model: &HybridModel, frame: &TimeSeriesFrame) -> Result<TimeSeriesFrame> {
    let sim = model.physics.simulate(frame)?;
    hybrid_predict_with_sim(model, frame, &sim)
}

pub fn hybrid_predict_with_sim(model: &HybridModel, frame: &TimeSeriesFrame, sim: &TimeSeriesFrame) -> Result<TimeSeriesFrame> {
    check_sim(sim, frame)?;
    let x = model.design(frame, sim)?;
    let g = model.learner.predict(x.view())?;
    let out = match model.strategy {
        HybridStrategy::Residual => g + sim.to_matrix(&model.physics.simulated_names())?,
        _ => g,
    };
    prediction_frame(frame, &model.rooms, &out)
}

/// The physics tier alone, renamed to prediction columns.
pub fn physics_only_predict(physics: &PhysicsTier, frame: &TimeSeriesFrame) -> Result<TimeSeriesFrame> {
    let sim = physics.simulate(frame)?;
    Ok(physics_only_from_sim(physics, &sim))
}

pub fn physics_only_from_sim(physics: &PhysicsTier, sim: &TimeSeriesFrame) -> TimeSeriesFrame {
    let cols = physics
        .rooms
        .iter()
        .map(|r| {
            let values = sim.values(&columns::simulated(r)).expect("tier output has every room").to_vec();
            Column::new(ColumnSpec::new(prediction_column(r), FeatureGroup::Simulated, "degC"), values)
        })
        .collect();
    TimeSeriesFrame::new(sim.timestamps().to_vec(), sim.step_minutes(), cols).expect("same shape as the simulation")
}

/// Pure data-driven baseline: the learner on scenario features only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataDrivenModel {
    pub scenario: ScenarioId,
    pub learner: Learner,
    pub standardizer: Standardizer,
    pub features: Vec<String>,
    pub rooms: Vec<String>,
}

impl DataDrivenModel {
    pub fn design(&self, frame: &TimeSeriesFrame) -> Result<Array2<f64>> {
        let mut x = frame.to_matrix(&self.features)?;
        self.standardizer.transform_matrix(&mut x)?;
        Ok(x)
    }
}

pub fn data_driven_fit(
    kind: LearnerKind,
    config: &LearnerConfig,
    rooms: &[String],
    train: &TimeSeriesFrame,
    scenario: &ScenarioSpec,
) -> Result<(DataDrivenModel, FitReport)> {
    let targets: Vec<String> = rooms.iter().map(|r| columns::room_target(r)).collect();
    let y = train.to_matrix(&targets)?;
    let features = feature_columns(train, scenario);
    let mut x = train.to_matrix(&features)?;
    let standardizer = Standardizer::fit_matrix(&features, &x)?;
    standardizer.transform_matrix(&mut x)?;
    let (learner, report) = fit(kind, x.view(), y.view(), config)?;
    let model = DataDrivenModel {
        scenario: scenario.id,
        learner,
        standardizer,
        features,
        rooms: rooms.to_vec(),
    };
    Ok((model, report))
}

pub fn data_driven_predict(model: &DataDrivenModel, frame: &TimeSeriesFrame) -> Result<TimeSeriesFrame> {
    let x = model.design(frame)?;
    let out = model.learner.predict(x.view())?;
    prediction_frame(frame, &model.rooms, &out)
}

#[cfg(test)]
mod tests;
