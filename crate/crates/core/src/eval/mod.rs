//! Error metrics, experiment drivers and report generation.

mod config;
mod harness;
mod metrics;
mod report;
mod study;

pub use config::{ExperimentPlan, HarnessConfig, CONFIG_KEYS, DEFAULT_WINDOWS};
pub use harness::{
    build_tier, ensure_before, rooms_from_frame, run_data_quantity_sweep, run_scenario_matrix, scenario_frame, test_boundary,
    trailing_window, ExperimentData, RunOutcome,
};
pub use metrics::{
    evaluate_predictions, mae, mape, monthly_breakdown, rmse, MetricReport, Metrics, MonthMetrics, ReportMeta, RoomMetrics,
    MAPE_GUARD,
};
pub use report::{
    boxplot_csv, boxplot_summary_csv, median, metrics_csv, monthly_csv, quantile, BOXPLOT_HEADER, BOXPLOT_SUMMARY_HEADER,
    METRICS_HEADER, MONTHLY_HEADER,
};
pub use study::{run_explain_study, EstimatorMode, ExplainOptions, ExplainStudy, StudyEntry, StudyModel, RANK_HEADER};
