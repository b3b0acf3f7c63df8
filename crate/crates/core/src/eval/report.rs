//! CSV renderings of metric reports. MAPE is written in percent with two
//! decimals, temperatures in °C with four.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::metrics::MetricReport;

pub const METRICS_HEADER: &str = "scenario,strategy,learner,seed,window_months,train_rows,mae,mape_pct,rmse,std_ratio";
pub const BOXPLOT_HEADER: &str = "scenario,strategy,learner,seed,room,mape_pct";
pub const BOXPLOT_SUMMARY_HEADER: &str = "scenario,strategy,learner,n,min,q1,median,q3,max,mean";
pub const MONTHLY_HEADER: &str = "scenario,strategy,learner,seed,window_months,year,month,n_rows,mae,mape_pct,rmse";

fn window(r: &MetricReport) -> String {
    r.meta.window_months.map_or_else(|| "all".into(), |w| w.to_string())
}

fn pct(fraction: f64) -> String {
    format!("{:.2}", fraction * 100.0)
}

/// One row per report with room-averaged metrics.
pub fn metrics_csv(reports: &[MetricReport]) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for r in reports {
        let m = &r.meta;
        writeln!(
            out,
            "{},{},{},{},{},{},{:.4},{},{:.4},{:.4}",
            m.scenario,
            m.strategy,
            m.learner,
            m.seed,
            window(r),
            m.train_rows,
            r.average.mae,
            pct(r.average.mape),
            r.average.rmse,
            r.std_ratio
        )
        .expect("string write");
    }
    out
}

/// One row per report and room.
pub fn boxplot_csv(reports: &[MetricReport]) -> String {
    let mut out = format!("{BOXPLOT_HEADER}\n");
    for r in reports {
        let m = &r.meta;
        for room in &r.rooms {
            writeln!(out, "{},{},{},{},{},{}", m.scenario, m.strategy, m.learner, m.seed, room.room, pct(room.metrics.mape))
                .expect("string write");
        }
    }
    out
}

/// Linear-interpolation quantile of sorted values.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Median of an unsorted sample.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

/// Quartiles, extremes and mean of the per-room MAPE points of every
/// (scenario, strategy, learner), pooled over seeds and windows.
pub fn boxplot_summary_csv(reports: &[MetricReport]) -> String {
    let mut groups: BTreeMap<(&str, &str, &str), Vec<f64>> = BTreeMap::new();
    for r in reports {
        let m = &r.meta;
        groups
            .entry((&m.scenario, &m.strategy, &m.learner))
            .or_default()
            .extend(r.rooms.iter().map(|room| room.metrics.mape));
    }
    let mut out = format!("{BOXPLOT_SUMMARY_HEADER}\n");
    for ((scenario, strategy, learner), mut v) in groups {
        v.sort_by(f64::total_cmp);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        writeln!(
            out,
            "{scenario},{strategy},{learner},{},{},{},{},{},{},{}",
            v.len(),
            pct(v[0]),
            pct(quantile(&v, 0.25)),
            pct(quantile(&v, 0.5)),
            pct(quantile(&v, 0.75)),
            pct(v[v.len() - 1]),
            pct(mean)
        )
        .expect("string write");
    }
    out
}

/// One row per report and calendar month; skipped months have empty metrics.
pub fn monthly_csv(reports: &[MetricReport]) -> String {
    let mut out = format!("{MONTHLY_HEADER}\n");
    for r in reports {
        let m = &r.meta;
        for month in &r.monthly {
            let values = month
                .metrics
                .map_or_else(|| ",,".to_string(), |x| format!("{:.4},{},{:.4}", x.mae, pct(x.mape), x.rmse));
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                m.scenario,
                m.strategy,
                m.learner,
                m.seed,
                window(r),
                month.year,
                month.month,
                month.n_rows,
                values
            )
            .expect("string write");
        }
    }
    out
}
