//! Multivariate building time series: the frame type, CSV and schema I/O,
//! gap filling, resampling, chronological splitting and standardization.

mod frame;
mod io;
mod ops;
mod scenario;
mod standardize;

pub use frame::{
    datetime_columns, datetime_to_minutes, daytime, minutes_to_datetime, month_start, season,
    week_flag, year_month, year_start, Aggregation, Column, ColumnSpec, FeatureGroup, Minutes,
    TimeSeriesFrame, DATETIME_FEATURES,
};
pub use io::{
    format_timestamp, load_csv, parse_key_values, parse_timestamp, read_csv, save_csv, write_csv,
    Schema,
};
pub(crate) use io::read_to_string;
pub use ops::{interpolate_missing, resample, split_train_test};
pub use scenario::{ScenarioId, ScenarioSpec};
pub use standardize::Standardizer;
