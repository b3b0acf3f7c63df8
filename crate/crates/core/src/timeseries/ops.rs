use super::frame::{Aggregation, Column, Minutes, TimeSeriesFrame};
use crate::error::{Error, Result};

/// Fills every missing cell.
///
/// Mean-aggregated columns are interpolated linearly in time between the
/// neighbouring observations. Categorical (last-aggregated) columns hold the
/// previous observation. Leading and trailing gaps take the nearest
/// observed value.
pub fn interpolate_missing(frame: TimeSeriesFrame) -> Result<TimeSeriesFrame> {
    let (timestamps, step, mut columns) = frame.into_parts();
    for col in &mut columns {
        fill_column(col, &timestamps)?;
    }
    TimeSeriesFrame::new(timestamps, step, columns)
}

fn fill_column(col: &mut Column, timestamps: &[Minutes]) -> Result<()> {
    let values = &mut col.values;
    if values.is_empty() || !values.iter().any(|v| v.is_nan()) {
        return Ok(());
    }
    let observed: Vec<usize> = (0..values.len()).filter(|&i| !values[i].is_nan()).collect();
    let (&first, &last) = match (observed.first(), observed.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::AllMissing(col.spec.name.clone())),
    };
    let lead = values[first];
    values[..first].iter_mut().for_each(|v| *v = lead);
    let trail = values[last];
    values[last + 1..].iter_mut().for_each(|v| *v = trail);

    for pair in observed.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b == a + 1 {
            continue;
        }
        let (va, vb) = (values[a], values[b]);
        match col.spec.aggregation {
            Aggregation::Last => values[a + 1..b].iter_mut().for_each(|v| *v = va),
            Aggregation::Mean => {
                let (ta, tb) = (timestamps[a] as f64, timestamps[b] as f64);
                for i in a + 1..b {
                    let w = (timestamps[i] as f64 - ta) / (tb - ta);
                    values[i] = va + w * (vb - va);
                }
            }
        }
    }
    Ok(())
}

/// Aggregates rows into clock-aligned bins of `step_minutes`.
///
/// Each output row is stamped with its bin start. Mean columns average the
/// covered rows; categorical columns take the last row in the bin.
pub fn resample(frame: &TimeSeriesFrame, step_minutes: u32) -> Result<TimeSeriesFrame> {
    let nominal = frame.step_minutes();
    if step_minutes == 0 || !step_minutes.is_multiple_of(nominal) {
        return Err(Error::invalid(format!(
            "resample step {step_minutes} is not a multiple of the nominal step {nominal}"
        )));
    }
    if step_minutes == nominal {
        return Ok(frame.clone());
    }
    if let Some(c) = frame.columns().iter().find(|c| c.missing_count() > 0) {
        return Err(Error::invalid(format!(
            "column {} has missing values; interpolate before resampling",
            c.name()
        )));
    }
    let step = i64::from(step_minutes);
    // bin boundaries as row ranges
    let mut bins: Vec<(Minutes, usize, usize)> = Vec::new();
    for (i, &t) in frame.timestamps().iter().enumerate() {
        let key = t.div_euclid(step) * step;
        match bins.last_mut() {
            Some((k, _, end)) if *k == key => *end = i + 1,
            _ => bins.push((key, i, i + 1)),
        }
    }
    let timestamps = bins.iter().map(|b| b.0).collect();
    let columns = frame
        .columns()
        .iter()
        .map(|c| {
            let values = bins
                .iter()
                .map(|&(_, lo, hi)| match c.spec.aggregation {
                    Aggregation::Mean => c.values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64,
                    Aggregation::Last => c.values[hi - 1],
                })
                .collect();
            Column::new(c.spec.clone(), values)
        })
        .collect();
    TimeSeriesFrame::new(timestamps, step_minutes, columns)
}

/// Rows strictly before `boundary` go to the first frame, the rest to the
/// second. Both parts must be non-empty.
pub fn split_train_test(frame: &TimeSeriesFrame, boundary: Minutes) -> Result<(TimeSeriesFrame, TimeSeriesFrame)> {
    let ts = frame.timestamps();
    let (first, last) = match (ts.first(), ts.last()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => return Err(Error::Empty("cannot split an empty frame".into())),
    };
    if boundary <= first || boundary > last {
        return Err(Error::invalid(format!(
            "split boundary {boundary} outside covered range ({first}, {last}]"
        )));
    }
    let cut = ts.partition_point(|&t| t < boundary);
    Ok((frame.slice_rows(0..cut), frame.slice_rows(cut..ts.len())))
}
