use std::collections::HashMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use chrono::{DateTime, Datelike, TimeZone, Timelike, Utc};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minutes since the Unix epoch, UTC.
pub type Minutes = i64;

/// Tag that places every column into one of the sensor/feature families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureGroup {
    Datetime,
    Weather,
    Building,
    Room,
    Simulated,
    Target,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 6] = [
        FeatureGroup::Datetime,
        FeatureGroup::Weather,
        FeatureGroup::Building,
        FeatureGroup::Room,
        FeatureGroup::Simulated,
        FeatureGroup::Target,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureGroup::Datetime => "datetime",
            FeatureGroup::Weather => "weather",
            FeatureGroup::Building => "building",
            FeatureGroup::Room => "room",
            FeatureGroup::Simulated => "simulated",
            FeatureGroup::Target => "target",
        }
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureGroup::ALL
            .into_iter()
            .find(|g| g.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid(format!("unknown feature group '{s}'")))
    }
}

/// How a column is reduced when several rows fall into one resampling bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Arithmetic mean, for continuous measurements.
    #[default]
    Mean,
    /// Last observed value, for binary and categorical states.
    Last,
}

impl Aggregation {
    pub fn as_str(self) -> &'static str {
        match self {
            Aggregation::Mean => "mean",
            Aggregation::Last => "last",
        }
    }
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mean" => Ok(Aggregation::Mean),
            "last" => Ok(Aggregation::Last),
            other => Err(Error::invalid(format!("unknown aggregation '{other}'"))),
        }
    }
}

/// Column metadata without values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub group: FeatureGroup,
    pub unit: String,
    #[serde(default)]
    pub aggregation: Aggregation,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, group: FeatureGroup, unit: impl Into<String>) -> Self {
        ColumnSpec {
            name: name.into(),
            group,
            unit: unit.into(),
            aggregation: Aggregation::Mean,
        }
    }

    pub fn categorical(mut self) -> Self {
        self.aggregation = Aggregation::Last;
        self
    }
}

/// A named, tagged value array. Missing cells are stored as NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub spec: ColumnSpec,
    pub values: Vec<f64>,
}

impl Column {
    pub fn new(spec: ColumnSpec, values: Vec<f64>) -> Self {
        Column { spec, values }
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn group(&self) -> FeatureGroup {
        self.spec.group
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }
}

/// Timestamped, column-named numeric table.
///
/// Timestamps are strictly increasing; every column has one value per
/// timestamp; column names are unique.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesFrame {
    timestamps: Vec<Minutes>,
    step_minutes: u32,
    columns: Vec<Column>,
    index: HashMap<String, usize>,
}

impl TimeSeriesFrame {
    pub fn new(timestamps: Vec<Minutes>, step_minutes: u32, columns: Vec<Column>) -> Result<Self> {
        if step_minutes == 0 {
            return Err(Error::invalid("step_minutes must be positive"));
        }
        if let Some(row) = timestamps.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::NonMonotonicTimestamps { row: row + 1 });
        }
        let mut index = HashMap::with_capacity(columns.len());
        for (i, c) in columns.iter().enumerate() {
            if c.values.len() != timestamps.len() {
                return Err(Error::DimensionMismatch {
                    expected: timestamps.len(),
                    got: c.values.len(),
                }
                .context(format!("column {}", c.name())));
            }
            if index.insert(c.spec.name.clone(), i).is_some() {
                return Err(Error::DuplicateColumn(c.spec.name.clone()));
            }
        }
        Ok(TimeSeriesFrame {
            timestamps,
            step_minutes,
            columns,
            index,
        })
    }

    pub fn empty_like(&self) -> Self {
        let columns = self
            .columns
            .iter()
            .map(|c| Column::new(c.spec.clone(), Vec::new()))
            .collect();
        TimeSeriesFrame::new(Vec::new(), self.step_minutes, columns).expect("empty frame is valid")
    }

    pub fn n_rows(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn step_minutes(&self) -> u32 {
        self.step_minutes
    }

    pub fn timestamps(&self) -> &[Minutes] {
        &self.timestamps
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.spec.name.clone()).collect()
    }

    pub fn specs(&self) -> Vec<ColumnSpec> {
        self.columns.iter().map(|c| c.spec.clone()).collect()
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.index.get(name).map(|&i| &self.columns[i])
    }

    pub fn values(&self, name: &str) -> Result<&[f64]> {
        self.column(name)
            .map(|c| c.values.as_slice())
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn names_in_groups(&self, groups: &[FeatureGroup]) -> Vec<String> {
        self.columns
            .iter()
            .filter(|c| groups.contains(&c.spec.group))
            .map(|c| c.spec.name.clone())
            .collect()
    }

    pub fn datetime(&self, row: usize) -> DateTime<Utc> {
        minutes_to_datetime(self.timestamps[row])
    }

    pub fn missing_count(&self) -> usize {
        self.columns.iter().map(Column::missing_count).sum()
    }

    /// Appends a column, replacing nothing.
    pub fn push_column(&mut self, column: Column) -> Result<()> {
        if column.values.len() != self.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: self.n_rows(),
                got: column.values.len(),
            }
            .context(format!("column {}", column.name())));
        }
        if self.index.contains_key(column.name()) {
            return Err(Error::DuplicateColumn(column.name().to_string()));
        }
        self.index.insert(column.name().to_string(), self.columns.len());
        self.columns.push(column);
        Ok(())
    }

    /// Frame restricted to the named columns, in the given order.
    pub fn select(&self, names: &[String]) -> Result<TimeSeriesFrame> {
        let columns = names
            .iter()
            .map(|n| {
                self.column(n)
                    .cloned()
                    .ok_or_else(|| Error::UnknownColumn(n.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        TimeSeriesFrame::new(self.timestamps.clone(), self.step_minutes, columns)
    }

    pub fn select_groups(&self, groups: &[FeatureGroup]) -> TimeSeriesFrame {
        let names = self.names_in_groups(groups);
        self.select(&names).expect("names come from this frame")
    }

    pub fn slice_rows(&self, rows: Range<usize>) -> TimeSeriesFrame {
        let columns = self
            .columns
            .iter()
            .map(|c| Column::new(c.spec.clone(), c.values[rows.clone()].to_vec()))
            .collect();
        TimeSeriesFrame::new(self.timestamps[rows].to_vec(), self.step_minutes, columns)
            .expect("row slice of a valid frame is valid")
    }

    /// Rows with `start <= t < end`.
    pub fn slice_time(&self, start: Minutes, end: Minutes) -> TimeSeriesFrame {
        let lo = self.timestamps.partition_point(|&t| t < start);
        let hi = self.timestamps.partition_point(|&t| t < end);
        self.slice_rows(lo..hi.max(lo))
    }

    /// Row-major N x d matrix of the named columns.
    pub fn to_matrix(&self, names: &[String]) -> Result<Array2<f64>> {
        let cols = names
            .iter()
            .map(|n| self.values(n))
            .collect::<Result<Vec<_>>>()?;
        let n = self.n_rows();
        Ok(Array2::from_shape_fn((n, cols.len()), |(i, j)| cols[j][i]))
    }

    pub(crate) fn into_parts(self) -> (Vec<Minutes>, u32, Vec<Column>) {
        (self.timestamps, self.step_minutes, self.columns)
    }
}

pub fn minutes_to_datetime(minutes: Minutes) -> DateTime<Utc> {
    Utc.timestamp_opt(minutes * 60, 0)
        .single()
        .expect("minute timestamps are in chrono range")
}

pub fn datetime_to_minutes(dt: DateTime<Utc>) -> Minutes {
    dt.timestamp().div_euclid(60)
}

/// Minutes at 00:00 UTC on the first day of `year`.
pub fn year_start(year: i32) -> Minutes {
    datetime_to_minutes(Utc.with_ymd_and_hms(year, 1, 1, 0, 0, 0).unwrap())
}

/// Minutes at 00:00 UTC on the first day of `month` in `year`, months may overflow/underflow.
pub fn month_start(year: i32, month: i32) -> Minutes {
    let m0 = month - 1;
    let y = year + m0.div_euclid(12);
    let m = m0.rem_euclid(12) + 1;
    datetime_to_minutes(Utc.with_ymd_and_hms(y, m as u32, 1, 0, 0, 0).unwrap())
}

/// Calendar month (1..=12) and year of a timestamp.
pub fn year_month(minutes: Minutes) -> (i32, u32) {
    let dt = minutes_to_datetime(minutes);
    (dt.year(), dt.month())
}

/// Ordinal season: 0 winter (DJF), 1 spring, 2 summer, 3 autumn.
pub fn season(month: u32) -> u8 {
    match month {
        12 | 1 | 2 => 0,
        3..=5 => 1,
        6..=8 => 2,
        _ => 3,
    }
}

/// 0 on weekdays, 1 on weekends.
pub fn week_flag(dt: &DateTime<Utc>) -> u8 {
    u8::from(dt.weekday().number_from_monday() >= 6)
}

/// Ordinal daytime: 0 night, 1 morning, 2 afternoon, 3 evening.
pub fn daytime(hour: u32) -> u8 {
    match hour {
        0..=5 => 0,
        6..=11 => 1,
        12..=17 => 2,
        _ => 3,
    }
}

/// Names of the three ordinal calendar features.
pub const DATETIME_FEATURES: [&str; 3] = ["season", "week", "daytime"];

/// Calendar feature columns for a timestamp vector.
pub fn datetime_columns(timestamps: &[Minutes]) -> Vec<Column> {
    let mut season_v = Vec::with_capacity(timestamps.len());
    let mut week_v = Vec::with_capacity(timestamps.len());
    let mut day_v = Vec::with_capacity(timestamps.len());
    for &t in timestamps {
        let dt = minutes_to_datetime(t);
        season_v.push(f64::from(season(dt.month())));
        week_v.push(f64::from(week_flag(&dt)));
        day_v.push(f64::from(daytime(dt.hour())));
    }
    [season_v, week_v, day_v]
        .into_iter()
        .zip(DATETIME_FEATURES)
        .map(|(v, name)| {
            Column::new(
                ColumnSpec::new(name, FeatureGroup::Datetime, "-").categorical(),
                v,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(name: &str, values: Vec<f64>) -> Column {
        Column::new(ColumnSpec::new(name, FeatureGroup::Weather, "degC"), values)
    }

    #[test]
    fn rejects_duplicate_columns() {
        let err = TimeSeriesFrame::new(vec![0, 1], 1, vec![col("a", vec![1.0, 2.0]), col("a", vec![1.0, 2.0])])
            .unwrap_err();
        assert!(matches!(err, Error::DuplicateColumn(_)));
    }

    #[test]
    fn rejects_non_monotonic() {
        let err = TimeSeriesFrame::new(vec![0, 2, 1], 1, vec![]).unwrap_err();
        assert!(matches!(err, Error::NonMonotonicTimestamps { row: 2 }));
    }

    #[test]
    fn rejects_length_mismatch() {
        assert!(TimeSeriesFrame::new(vec![0, 1], 1, vec![col("a", vec![1.0])]).is_err());
    }

    #[test]
    fn calendar_encodings() {
        assert_eq!(season(1), 0);
        assert_eq!(season(4), 1);
        assert_eq!(season(7), 2);
        assert_eq!(season(10), 3);
        assert_eq!(daytime(3), 0);
        assert_eq!(daytime(13), 2);
        // 2021-01-02 is a Saturday
        let sat = minutes_to_datetime(year_start(2021) + 24 * 60);
        assert_eq!(week_flag(&sat), 1);
        assert_eq!(month_start(2021, 13), year_start(2022));
        assert_eq!(month_start(2021, 0), month_start(2020, 12));
    }

    #[test]
    fn slice_time_is_half_open() {
        let f = TimeSeriesFrame::new(vec![0, 1, 2, 3], 1, vec![col("a", vec![0.0, 1.0, 2.0, 3.0])]).unwrap();
        let s = f.slice_time(1, 3);
        assert_eq!(s.timestamps(), &[1, 2]);
        assert_eq!(s.values("a").unwrap(), &[1.0, 2.0]);
    }
}
