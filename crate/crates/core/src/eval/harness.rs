use std::path::Path;

use chrono::Months;
use log::info;

use super::config::ExperimentPlan;
use super::metrics::{evaluate_predictions, monthly_breakdown, MetricReport, ReportMeta};
use super::report::{boxplot_csv, boxplot_summary_csv, metrics_csv, monthly_csv};
use crate::error::{Error, Result};
use crate::hybrid::{
    data_driven_fit, data_driven_predict, hybrid_fit_with_sim, hybrid_predict_with_sim, physics_only_from_sim, HybridModel,
};
use crate::learners::{LearnerConfig, LearnerKind};
use crate::physics::{columns, make_tier, CalibrationOptions, PhysicsTier, RcNetwork};
use crate::synth::World;
use crate::timeseries::{
    datetime_to_minutes, interpolate_missing, minutes_to_datetime, resample, split_train_test, year_month, year_start,
    FeatureGroup, Minutes, ScenarioSpec, TimeSeriesFrame,
};

/// Gap-filled data at the working resolution plus the building documentation.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub frame: TimeSeriesFrame,
    pub documented: RcNetwork,
    pub rooms: Vec<String>,
}

impl ExperimentData {
    /// Interpolates gaps and resamples to `resolution_minutes` when coarser
    /// than the raw step.
    pub fn prepare(raw: TimeSeriesFrame, documented: RcNetwork, rooms: Vec<String>, resolution_minutes: u32) -> Result<Self> {
        let mut frame = interpolate_missing(raw)?;
        if resolution_minutes != frame.step_minutes() {
            frame = resample(&frame, resolution_minutes)?;
        }
        for room in &rooms {
            if !frame.has_column(&columns::room_target(room)) {
                return Err(Error::UnknownColumn(columns::room_target(room)));
            }
        }
        Ok(ExperimentData { frame, documented, rooms })
    }

    pub fn from_world(world: &World, resolution_minutes: u32) -> Result<Self> {
        Self::prepare(world.frame.clone(), world.truth.documented_network(), world.rooms(), resolution_minutes)
    }
}

/// Room names inferred from the target columns of a frame.
pub fn rooms_from_frame(frame: &TimeSeriesFrame) -> Vec<String> {
    frame
        .names_in_groups(&[FeatureGroup::Target])
        .into_iter()
        .filter_map(|n| n.strip_suffix("_temp").map(str::to_string))
        .collect()
}

/// The scenario's visible columns plus the targets. Physics tiers are driven
/// by whatever driver columns they find, so they must see this view only.
pub fn scenario_frame(frame: &TimeSeriesFrame, scenario: &ScenarioSpec) -> TimeSeriesFrame {
    let mut groups = scenario.allowed_groups.clone();
    groups.push(FeatureGroup::Target);
    frame.select_groups(&groups)
}

/// First test instant: the plan's choice or the start of the last calendar
/// year in the data.
pub fn test_boundary(plan: &ExperimentPlan, frame: &TimeSeriesFrame) -> Result<Minutes> {
    match plan.test_start {
        Some(b) => Ok(b),
        None => {
            let last = *frame.timestamps().last().ok_or_else(|| Error::Empty("experiment data".into()))?;
            Ok(year_start(year_month(last).0))
        }
    }
}

/// Structural no-leakage check: every training row precedes the boundary.
pub fn ensure_before(train: &TimeSeriesFrame, boundary: Minutes) -> Result<()> {
    match train.timestamps().last() {
        Some(&t) if t >= boundary => Err(Error::invalid(format!("training row at {t} is not before the test boundary {boundary}"))),
        None => Err(Error::Empty("training data".into())),
        _ => Ok(()),
    }
}

/// The rows of `train` in the `months` calendar months before `end`.
pub fn trailing_window(train: &TimeSeriesFrame, end: Minutes, months: u32) -> Result<TimeSeriesFrame> {
    let start = minutes_to_datetime(end)
        .checked_sub_months(Months::new(months))
        .map(datetime_to_minutes)
        .ok_or_else(|| Error::invalid("window start out of range"))?;
    let first = *train.timestamps().first().ok_or_else(|| Error::Empty("training data".into()))?;
    if start < first {
        return Err(Error::invalid(format!("a {months}-month window exceeds the training range")));
    }
    let window = train.slice_time(start, end);
    if window.is_empty() {
        return Err(Error::Empty(format!("{months}-month window")));
    }
    Ok(window)
}

/// Train/test views of one scenario.
struct ScenarioData {
    spec: ScenarioSpec,
    train: TimeSeriesFrame,
    test: TimeSeriesFrame,
}

fn split_scenario(data: &ExperimentData, spec: ScenarioSpec, boundary: Minutes) -> Result<ScenarioData> {
    let (train, test) = split_train_test(&scenario_frame(&data.frame, &spec), boundary)?;
    ensure_before(&train, boundary)?;
    Ok(ScenarioData { spec, train, test })
}

/// Physics tier of a scenario for one seed. Calibration uses `train`.
pub fn build_tier(
    data: &ExperimentData,
    spec: &ScenarioSpec,
    seed: u64,
    train: &TimeSeriesFrame,
    calibration: &CalibrationOptions,
) -> Result<PhysicsTier> {
    make_tier(spec.physics_tier, &data.documented, &data.rooms, seed, Some(train), calibration)
}

fn meta(scenario: &ScenarioSpec, strategy: &str, learner: &str, seed: u64, window: Option<u32>, train_rows: usize) -> ReportMeta {
    ReportMeta {
        scenario: scenario.id.to_string(),
        strategy: strategy.to_string(),
        learner: learner.to_string(),
        seed,
        window_months: window,
        train_rows,
    }
}

fn score(test: &TimeSeriesFrame, pred: &TimeSeriesFrame, rooms: &[String], meta: ReportMeta, monthly: bool) -> Result<MetricReport> {
    let mut report = evaluate_predictions(test, pred, rooms, meta)?;
    if monthly {
        report.monthly = monthly_breakdown(test, pred, rooms)?;
    }
    Ok(report)
}

/// Everything fitted for one (scenario, seed) at one training window.
struct CellRun<'a> {
    plan: &'a ExperimentPlan,
    data: &'a ExperimentData,
    sd: &'a ScenarioData,
    tier: &'a PhysicsTier,
    seed: u64,
    config: LearnerConfig,
    window: Option<u32>,
    train: TimeSeriesFrame,
    sim_train: TimeSeriesFrame,
    sim_test: &'a TimeSeriesFrame,
}

impl CellRun<'_> {
    fn tag(&self, strategy: &str, learner: &str) -> String {
        let window = self.window.map_or(String::from("full"), |w| format!("{w}m"));
        format!("cell {}/{strategy}/{learner}/seed {}/{window}", self.sd.spec.id, self.seed)
    }

    fn run(&self, out: &mut Vec<MetricReport>) -> Result<()> {
        let rows = self.train.n_rows();
        let rooms = &self.data.rooms;
        let monthly = self.plan.monthly;
        if self.plan.baselines {
            let pred = physics_only_from_sim(self.tier, self.sim_test);
            let m = meta(&self.sd.spec, "physics", "-", self.seed, self.window, rows);
            out.push(score(&self.sd.test, &pred, rooms, m, monthly).map_err(|e| e.context(self.tag("physics", "-")))?);
        }
        for &kind in &self.plan.learners {
            for &strategy in &self.plan.strategies {
                let report = self
                    .hybrid_cell(strategy, kind)
                    .map_err(|e| e.context(self.tag(strategy.as_str(), kind.as_str())))?;
                out.push(report);
            }
            if self.plan.baselines {
                let report = self.data_driven_cell(kind).map_err(|e| e.context(self.tag("data-driven", kind.as_str())))?;
                out.push(report);
            }
        }
        Ok(())
    }

    fn hybrid_cell(&self, strategy: crate::hybrid::HybridStrategy, kind: LearnerKind) -> Result<MetricReport> {
        info!("{}", self.tag(strategy.as_str(), kind.as_str()));
        let model = self.fit_hybrid(strategy, kind)?;
        let pred = hybrid_predict_with_sim(&model, &self.sd.test, self.sim_test)?;
        let m = meta(&self.sd.spec, strategy.as_str(), kind.as_str(), self.seed, self.window, self.train.n_rows());
        score(&self.sd.test, &pred, &self.data.rooms, m, self.plan.monthly)
    }

    fn fit_hybrid(&self, strategy: crate::hybrid::HybridStrategy, kind: LearnerKind) -> Result<HybridModel> {
        let (model, _) = hybrid_fit_with_sim(strategy, kind, &self.config, self.tier, &self.train, &self.sim_train, &self.sd.spec)?;
        Ok(model)
    }

    fn data_driven_cell(&self, kind: LearnerKind) -> Result<MetricReport> {
        info!("{}", self.tag("data-driven", kind.as_str()));
        let (model, _) = data_driven_fit(kind, &self.config, &self.data.rooms, &self.train, &self.sd.spec)?;
        let pred = data_driven_predict(&model, &self.sd.test)?;
        let m = meta(&self.sd.spec, "data-driven", kind.as_str(), self.seed, self.window, self.train.n_rows());
        score(&self.sd.test, &pred, &self.data.rooms, m, self.plan.monthly)
    }
}

/// Results of a scenario matrix or data-quantity sweep, in run order.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub reports: Vec<MetricReport>,
    pub boundary: Minutes,
}

impl RunOutcome {
    /// Reports matching the given coordinates.
    pub fn select<'a>(&'a self, scenario: &'a str, strategy: &'a str, learner: &'a str) -> impl Iterator<Item = &'a MetricReport> + 'a {
        self.reports
            .iter()
            .filter(move |r| r.meta.scenario == scenario && r.meta.strategy == strategy && r.meta.learner == learner)
    }
}

fn write_outputs(dir: &Path, files: &[(&str, String)]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, body) in files {
        std::fs::write(dir.join(name), body)?;
    }
    Ok(())
}

/// Runs every (scenario, seed, learner, strategy) cell on the full training
/// range and scores it on the test year, with the physics-only and pure
/// data-driven baselines when the plan asks for them.
///
/// Writes `metrics.csv`, `boxplot.csv`, `boxplot_summary.csv` and, with the
/// monthly breakdown on, `monthly.csv` when the plan has an output directory.
pub fn run_scenario_matrix(plan: &ExperimentPlan, data: &ExperimentData) -> Result<RunOutcome> {
    plan.validate()?;
    let boundary = test_boundary(plan, &data.frame)?;
    let mut reports = Vec::new();
    for &scenario in &plan.scenarios {
        let sd = split_scenario(data, scenario.spec(), boundary)?;
        for &seed in &plan.seeds {
            let tier = build_tier(data, &sd.spec, seed, &sd.train, &plan.calibration)
                .map_err(|e| e.context(format!("physics tier {scenario}/seed {seed}")))?;
            let sim_test = tier.simulate(&sd.test)?;
            let run = CellRun {
                plan,
                data,
                sd: &sd,
                tier: &tier,
                seed,
                config: plan.learner.with_seed(seed),
                window: None,
                sim_train: tier.simulate(&sd.train)?,
                train: sd.train.clone(),
                sim_test: &sim_test,
            };
            run.run(&mut reports)?;
        }
    }
    if let Some(dir) = &plan.output_dir {
        let mut files = vec![
            ("metrics.csv", metrics_csv(&reports)),
            ("boxplot.csv", boxplot_csv(&reports)),
            ("boxplot_summary.csv", boxplot_summary_csv(&reports)),
        ];
        if plan.monthly {
            files.push(("monthly.csv", monthly_csv(&reports)));
        }
        write_outputs(dir, &files)?;
    }
    Ok(RunOutcome { reports, boundary })
}

/// Refits on trailing training windows of each plan length and scores on
/// the same test year. The physics tier, calibration included, is built
/// once per (scenario, seed) from the full training range, and each
/// window's simulation is the matching slice of the full-range run.
///
/// Writes `sweep.csv` when the plan has an output directory.
pub fn run_data_quantity_sweep(plan: &ExperimentPlan, data: &ExperimentData) -> Result<RunOutcome> {
    plan.validate()?;
    let boundary = test_boundary(plan, &data.frame)?;
    let end = plan.window_end.unwrap_or(boundary);
    if end > boundary {
        return Err(Error::invalid("window end lies after the test boundary"));
    }
    let mut reports = Vec::new();
    for &scenario in &plan.scenarios {
        let sd = split_scenario(data, scenario.spec(), boundary)?;
        let windows = plan
            .windows_months
            .iter()
            .map(|&w| Ok((w, trailing_window(&sd.train, end, w)?)))
            .collect::<Result<Vec<_>>>()?;
        for &seed in &plan.seeds {
            let tier = build_tier(data, &sd.spec, seed, &sd.train, &plan.calibration)
                .map_err(|e| e.context(format!("physics tier {scenario}/seed {seed}")))?;
            let sim_full = tier.simulate(&sd.train)?;
            let sim_test = tier.simulate(&sd.test)?;
            for (w, train) in &windows {
                let ts = train.timestamps();
                let run = CellRun {
                    plan,
                    data,
                    sd: &sd,
                    tier: &tier,
                    seed,
                    config: plan.learner.with_seed(seed),
                    window: Some(*w),
                    sim_train: sim_full.slice_time(ts[0], ts[ts.len() - 1] + 1),
                    train: train.clone(),
                    sim_test: &sim_test,
                };
                run.run(&mut reports)?;
            }
        }
    }
    if let Some(dir) = &plan.output_dir {
        write_outputs(dir, &[("sweep.csv", metrics_csv(&reports))])?;
    }
    Ok(RunOutcome { reports, boundary })
}
