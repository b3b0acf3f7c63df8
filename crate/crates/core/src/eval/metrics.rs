use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hybrid::prediction_column;
use crate::physics::columns;
use crate::timeseries::{year_month, TimeSeriesFrame};

/// Smallest |y| accepted by [`mape`], °C.
pub const MAPE_GUARD: f64 = 0.5;

fn check_pair(y: &[f64], y_hat: &[f64]) -> Result<()> {
    if y.len() != y_hat.len() {
        return Err(Error::DimensionMismatch { expected: y.len(), got: y_hat.len() });
    }
    if y.is_empty() {
        return Err(Error::Empty("metric inputs".into()));
    }
    if y.iter().chain(y_hat).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("metric inputs".into()));
    }
    Ok(())
}

/// Mean absolute error.
pub fn mae(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_pair(y, y_hat)?;
    Ok(y.iter().zip(y_hat).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64)
}

/// Mean absolute percentage error as a fraction. Every |y| must be at least
/// [`MAPE_GUARD`].
pub fn mape(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_pair(y, y_hat)?;
    if let Some(v) = y.iter().find(|v| v.abs() < MAPE_GUARD) {
        return Err(Error::invalid(format!("MAPE undefined: |y| = {} below {MAPE_GUARD}", v.abs())));
    }
    Ok(y.iter().zip(y_hat).map(|(a, b)| ((a - b) / a).abs()).sum::<f64>() / y.len() as f64)
}

/// Root mean squared error.
pub fn rmse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_pair(y, y_hat)?;
    Ok((y.iter().zip(y_hat).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64).sqrt())
}

fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    /// Fraction, not percent.
    pub mape: f64,
    pub rmse: f64,
}

impl Metrics {
    pub fn compute(y: &[f64], y_hat: &[f64]) -> Result<Self> {
        Ok(Metrics { mae: mae(y, y_hat)?, mape: mape(y, y_hat)?, rmse: rmse(y, y_hat)? })
    }

    /// Unweighted mean, as used for room and month averages.
    pub fn mean(items: &[Metrics]) -> Metrics {
        let n = items.len() as f64;
        Metrics {
            mae: items.iter().map(|m| m.mae).sum::<f64>() / n,
            mape: items.iter().map(|m| m.mape).sum::<f64>() / n,
            rmse: items.iter().map(|m| m.rmse).sum::<f64>() / n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomMetrics {
    pub room: String,
    pub metrics: Metrics,
    /// Standard deviation of the prediction over that of the measurement.
    pub std_ratio: f64,
}

/// Room-averaged metrics of one calendar month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthMetrics {
    pub year: i32,
    pub month: u32,
    pub n_rows: usize,
    /// `None` when the month has no rows; such months are flagged, not scored.
    pub metrics: Option<Metrics>,
}

impl MonthMetrics {
    pub fn skipped(&self) -> bool {
        self.metrics.is_none()
    }
}

/// Coordinates of an experiment cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub scenario: String,
    /// A hybrid strategy, `physics` or `data-driven`.
    pub strategy: String,
    /// `-` for the physics-only baseline.
    pub learner: String,
    pub seed: u64,
    /// Training window in months; `None` for the full training range.
    pub window_months: Option<u32>,
    pub train_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub meta: ReportMeta,
    pub rooms: Vec<RoomMetrics>,
    /// Unweighted mean of the per-room values.
    pub average: Metrics,
    pub std_ratio: f64,
    pub monthly: Vec<MonthMetrics>,
}

fn room_series<'a>(truth: &'a TimeSeriesFrame, pred: &'a TimeSeriesFrame, room: &str) -> Result<(&'a [f64], &'a [f64])> {
    Ok((truth.values(&columns::room_target(room))?, pred.values(&prediction_column(room))?))
}

fn check_aligned(truth: &TimeSeriesFrame, pred: &TimeSeriesFrame, rooms: &[String]) -> Result<()> {
    if truth.timestamps() != pred.timestamps() {
        return Err(Error::invalid("measured and predicted frames are not aligned"));
    }
    if rooms.is_empty() {
        return Err(Error::invalid("no rooms to evaluate"));
    }
    Ok(())
}

/// Scores `pred_<room>` columns against `<room>_temp` targets.
pub fn evaluate_predictions(truth: &TimeSeriesFrame, pred: &TimeSeriesFrame, rooms: &[String], meta: ReportMeta) -> Result<MetricReport> {
    check_aligned(truth, pred, rooms)?;
    let mut per_room = Vec::with_capacity(rooms.len());
    for room in rooms {
        let (y, y_hat) = room_series(truth, pred, room)?;
        let metrics = Metrics::compute(y, y_hat).map_err(|e| e.context(format!("room {room}")))?;
        let sd = std_dev(y);
        let std_ratio = if sd > 0.0 { std_dev(y_hat) / sd } else { f64::NAN };
        per_room.push(RoomMetrics { room: room.clone(), metrics, std_ratio });
    }
    let average = Metrics::mean(&per_room.iter().map(|r| r.metrics).collect::<Vec<_>>());
    let std_ratio = per_room.iter().map(|r| r.std_ratio).sum::<f64>() / per_room.len() as f64;
    Ok(MetricReport { meta, rooms: per_room, average, std_ratio, monthly: Vec::new() })
}

/// Room-averaged metrics per calendar month, covering every month from the
/// first to the last timestamp. Months without rows are flagged as skipped.
pub fn monthly_breakdown(truth: &TimeSeriesFrame, pred: &TimeSeriesFrame, rooms: &[String]) -> Result<Vec<MonthMetrics>> {
    check_aligned(truth, pred, rooms)?;
    let ts = truth.timestamps();
    let (first, last) = match (ts.first(), ts.last()) {
        (Some(&a), Some(&b)) => (year_month(a), year_month(b)),
        _ => return Err(Error::Empty("monthly breakdown of an empty frame".into())),
    };
    let series = rooms.iter().map(|r| room_series(truth, pred, r)).collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    let (mut year, mut month) = first;
    let mut start = 0;
    loop {
        let end = start + ts[start..].iter().take_while(|&&t| year_month(t) == (year, month)).count();
        let metrics = if end > start {
            let per_room = series
                .iter()
                .map(|(y, p)| Metrics::compute(&y[start..end], &p[start..end]))
                .collect::<Result<Vec<_>>>()?;
            Some(Metrics::mean(&per_room))
        } else {
            None
        };
        out.push(MonthMetrics { year, month, n_rows: end - start, metrics });
        start = end;
        if (year, month) == last {
            break;
        }
        (year, month) = if month == 12 { (year + 1, 1) } else { (year, month + 1) };
    }
    Ok(out)
}
