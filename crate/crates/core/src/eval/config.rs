use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::study::ExplainOptions;
use crate::error::{Error, Result};
use crate::hybrid::HybridStrategy;
use crate::learners::{LearnerConfig, LearnerKind};
use crate::physics::CalibrationOptions;
use crate::synth::WorldConfig;
use crate::timeseries::{datetime_to_minutes, parse_key_values, parse_timestamp, Minutes, ScenarioId};

/// Default data-quantity windows, in months.
pub const DEFAULT_WINDOWS: [u32; 7] = [12, 6, 5, 4, 3, 2, 1];

/// Which cells an experiment runs and how.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub scenarios: Vec<ScenarioId>,
    pub strategies: Vec<HybridStrategy>,
    pub learners: Vec<LearnerKind>,
    pub seeds: Vec<u64>,
    pub windows_months: Vec<u32>,
    /// Working resolution after gap filling.
    pub resolution_minutes: u32,
    /// First test instant; defaults to the start of the last calendar year.
    pub test_start: Option<Minutes>,
    /// End of the data-quantity windows; defaults to `test_start`.
    pub window_end: Option<Minutes>,
    /// Also run the physics-only and pure data-driven baselines.
    pub baselines: bool,
    pub monthly: bool,
    pub learner: LearnerConfig,
    pub calibration: CalibrationOptions,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            scenarios: ScenarioId::ALL.to_vec(),
            strategies: HybridStrategy::ALL.to_vec(),
            learners: LearnerKind::ALL.to_vec(),
            seeds: vec![0, 1, 2, 3, 4],
            windows_months: DEFAULT_WINDOWS.to_vec(),
            resolution_minutes: 60,
            test_start: None,
            window_end: None,
            baselines: true,
            monthly: true,
            learner: LearnerConfig::default(),
            calibration: CalibrationOptions::default(),
            output_dir: None,
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() || self.strategies.is_empty() || self.learners.is_empty() || self.seeds.is_empty() {
            return Err(Error::invalid("plan needs at least one scenario, strategy, learner and seed"));
        }
        if self.windows_months.is_empty() || self.windows_months.contains(&0) {
            return Err(Error::invalid("windows must be a non-empty list of positive month counts"));
        }
        if self.resolution_minutes == 0 {
            return Err(Error::invalid("resolution_minutes must be positive"));
        }
        Ok(())
    }
}

/// Everything a CLI run can be configured with.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HarnessConfig {
    pub world: WorldConfig,
    pub plan: ExperimentPlan,
    pub explain: ExplainOptions,
}

/// Recognised configuration keys with a one-line description each.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("seed", "base seed: world seed, single experiment seed and explain seed"),
    ("seeds", "comma list of experiment seeds"),
    ("scenarios", "comma list of W, WB, WBR"),
    ("strategies", "comma list of assistant, residual, surrogate, augmentation"),
    ("learners", "comma list of lr, ffnn, rf"),
    ("windows", "comma list of training-window lengths in months"),
    ("resolution_minutes", "working resolution after gap filling"),
    ("test_start", "first test timestamp, e.g. 2022-01-01T00:00"),
    ("window_end", "end of the trailing training windows"),
    ("baselines", "true/false: physics-only and data-driven baselines"),
    ("monthly", "true/false: per-month breakdown"),
    ("world.seed", "synthetic world seed"),
    ("world.n_rooms", "number of rooms"),
    ("world.years", "simulated years"),
    ("world.days", "simulated days, overrides world.years"),
    ("world.start_year", "first calendar year"),
    ("world.step_minutes", "raw sampling step"),
    ("world.sensor_noise_std", "room sensor noise, degC"),
    ("world.missing_fraction", "probability of a dropped sensor cell"),
    ("ffnn.hidden", "comma list of hidden layer widths"),
    ("ffnn.learning_rate", "Adam step size"),
    ("ffnn.batch_size", "mini-batch size"),
    ("ffnn.max_epochs", "epoch cap"),
    ("ffnn.patience", "early-stopping patience"),
    ("ffnn.validation_fraction", "trailing validation share"),
    ("rf.n_trees", "number of trees"),
    ("rf.max_depth", "depth cap, 0 for none"),
    ("rf.min_samples_leaf", "minimum rows per leaf"),
    ("rf.max_features", "features tried per split, 0 for a third"),
    ("finetune.learning_rate", "fine-tuning step size"),
    ("finetune.max_epochs", "fine-tuning epoch cap"),
    ("finetune.patience", "fine-tuning patience"),
    ("warmstart_trees", "trees added when a forest is fine-tuned"),
    ("calibration.max_cycles", "calibration sweeps"),
    ("calibration.tolerance", "relative improvement that ends calibration"),
    ("explain.samples", "explained test rows"),
    ("explain.background", "background rows"),
    ("explain.clusters", "clusters in the feature partition"),
    ("explain.estimator", "exact, nested or sampled"),
    ("explain.permutations", "permutations for the sampled estimator"),
    ("explain.top_k", "ranks in the native-vs-Owen table"),
];

fn list<T: FromStr>(value: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| e.to_string()))
        .collect()
}

fn scalar<T: FromStr>(value: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| format!("'{value}': {e}"))
}

fn optional_count(value: &str) -> std::result::Result<Option<usize>, String> {
    Ok(Some(scalar::<usize>(value)?).filter(|&v| v > 0))
}

fn instant(value: &str) -> std::result::Result<Minutes, String> {
    parse_timestamp(value)
        .or_else(|| {
            chrono::NaiveDate::parse_from_str(value, "%Y-%m-%d")
                .ok()
                .map(|d| datetime_to_minutes(d.and_hms_opt(0, 0, 0).expect("midnight").and_utc()))
        })
        .ok_or_else(|| format!("bad timestamp '{value}'"))
}

impl HarnessConfig {
    /// Parses a `key=value` file on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = HarnessConfig::default();
        for (line, key, value) in parse_key_values(text)? {
            config.set(&key, &value).map_err(|message| Error::Parse { line, message })?;
        }
        config.plan.validate()?;
        Ok(config)
    }

    /// Applies one setting; `seed` also resets the seed list.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "seed" => {
                let s = scalar(value)?;
                self.world.seed = s;
                self.plan.seeds = vec![s];
                self.explain.seed = s;
            }
            "seeds" => self.plan.seeds = list(value)?,
            "scenarios" => self.plan.scenarios = list(value)?,
            "strategies" => self.plan.strategies = list(value)?,
            "learners" => self.plan.learners = list(value)?,
            "windows" => self.plan.windows_months = list(value)?,
            "resolution_minutes" => self.plan.resolution_minutes = scalar(value)?,
            "test_start" => self.plan.test_start = Some(instant(value)?),
            "window_end" => self.plan.window_end = Some(instant(value)?),
            "baselines" => self.plan.baselines = scalar(value)?,
            "monthly" => self.plan.monthly = scalar(value)?,
            "world.seed" => self.world.seed = scalar(value)?,
            "world.n_rooms" => self.world.n_rooms = scalar(value)?,
            "world.years" => self.world.years = scalar(value)?,
            "world.days" => self.world.days = Some(scalar(value)?),
            "world.start_year" => self.world.start_year = scalar(value)?,
            "world.step_minutes" => self.world.step_minutes = scalar(value)?,
            "world.sensor_noise_std" => self.world.sensor_noise_std = scalar(value)?,
            "world.missing_fraction" => self.world.missing_fraction = scalar(value)?,
            "ffnn.hidden" => self.plan.learner.ffnn.hidden_layers = list(value)?,
            "ffnn.learning_rate" => self.plan.learner.ffnn.learning_rate = scalar(value)?,
            "ffnn.batch_size" => self.plan.learner.ffnn.batch_size = scalar(value)?,
            "ffnn.max_epochs" => self.plan.learner.ffnn.max_epochs = scalar(value)?,
            "ffnn.patience" => self.plan.learner.ffnn.patience = scalar(value)?,
            "ffnn.validation_fraction" => self.plan.learner.ffnn.validation_fraction = scalar(value)?,
            "rf.n_trees" => self.plan.learner.forest.n_trees = scalar(value)?,
            "rf.max_depth" => self.plan.learner.forest.max_depth = optional_count(value)?,
            "rf.min_samples_leaf" => self.plan.learner.forest.min_samples_leaf = scalar(value)?,
            "rf.max_features" => self.plan.learner.forest.max_features = optional_count(value)?,
            "finetune.learning_rate" => self.plan.learner.finetune.learning_rate = scalar(value)?,
            "finetune.max_epochs" => self.plan.learner.finetune.max_epochs = scalar(value)?,
            "finetune.patience" => self.plan.learner.finetune.patience = scalar(value)?,
            "warmstart_trees" => self.plan.learner.warmstart_trees = scalar(value)?,
            "calibration.max_cycles" => self.plan.calibration.max_cycles = scalar(value)?,
            "calibration.tolerance" => self.plan.calibration.tolerance = scalar(value)?,
            "explain.samples" => self.explain.samples = scalar(value)?,
            "explain.background" => self.explain.background = scalar(value)?,
            "explain.clusters" => self.explain.clusters = scalar(value)?,
            "explain.estimator" => self.explain.mode = scalar(value)?,
            "explain.permutations" => self.explain.permutations = scalar(value)?,
            "explain.top_k" => self.explain.top_k = scalar(value)?,
            other => return Err(format!("unknown key '{other}'")),
        }
        Ok(())
    }
}
