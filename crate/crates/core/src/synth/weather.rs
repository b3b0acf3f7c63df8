use std::f64::consts::{PI, TAU};

use chrono::{Datelike, Timelike};
use rand::Rng;
use rand_distr::StandardNormal;

use super::config::WorldConfig;
use crate::error::Result;
use crate::rng::{stream_rng, StreamRng};
use crate::timeseries::{minutes_to_datetime, Column, ColumnSpec, FeatureGroup, Minutes, TimeSeriesFrame};

pub const WEATHER_COLUMNS: [(&str, &str); 7] = [
    ("drybulb_temp", "degC"),
    ("dewpoint_temp", "degC"),
    ("direct_solar", "W/m2"),
    ("diffuse_solar", "W/m2"),
    ("rel_humidity", "%"),
    ("wind_direction", "deg"),
    ("wind_speed", "m/s"),
];

/// Calendar position of one row.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Instant {
    /// Zero-based day of year.
    pub doy: u32,
    /// Local hour with fraction.
    pub hour: f64,
    pub month: u32,
    pub weekend: bool,
    /// Monday 00:00 starts a new week.
    pub week_start: bool,
}

pub(crate) fn calendar(timestamps: &[Minutes]) -> Vec<Instant> {
    timestamps
        .iter()
        .map(|&t| {
            let dt = minutes_to_datetime(t);
            let weekday = dt.weekday().num_days_from_monday();
            Instant {
                doy: dt.ordinal0(),
                hour: f64::from(dt.hour()) + f64::from(dt.minute()) / 60.0,
                month: dt.month(),
                weekend: weekday >= 5,
                week_start: weekday == 0 && dt.hour() == 0 && dt.minute() == 0,
            }
        })
        .collect()
}

/// Stationary Gaussian AR(1) process sampled at a fixed step.
struct Ar1 {
    phi: f64,
    innovation: f64,
    state: f64,
    rng: StreamRng,
}

impl Ar1 {
    fn new(rng: StreamRng, hourly_coefficient: f64, std: f64, step_minutes: u32) -> Self {
        let phi = hourly_coefficient.powf(f64::from(step_minutes) / 60.0);
        let mut rng = rng;
        let state = std * rng.sample::<f64, _>(StandardNormal);
        Ar1 {
            phi,
            innovation: std * (1.0 - phi * phi).sqrt(),
            state,
            rng,
        }
    }

    fn next(&mut self) -> f64 {
        let v = self.state;
        let e: f64 = self.rng.sample(StandardNormal);
        self.state = self.phi * self.state + self.innovation * e;
        v
    }
}

fn seasonal(doy: u32) -> f64 {
    // +1 at the summer solstice, -1 at the winter one.
    (TAU * (f64::from(doy) - 79.0) / 365.0).sin()
}

/// Sun-up weight in [0, 1]: a half sine between sunrise and sunset.
pub(crate) fn daylight(doy: u32, hour: f64) -> f64 {
    let length = 12.0 + 4.2 * seasonal(doy);
    let sunrise = 12.0 - length / 2.0;
    if hour <= sunrise || hour >= sunrise + length {
        0.0
    } else {
        (PI * (hour - sunrise) / length).sin()
    }
}

/// Relative humidity from the Magnus approximation, %.
fn relative_humidity(t: f64, dew: f64) -> f64 {
    let e = |x: f64| (17.625 * x / (243.04 + x)).exp();
    (100.0 * e(dew) / e(t)).clamp(0.0, 100.0)
}

pub fn generate_weather(config: &WorldConfig) -> Result<TimeSeriesFrame> {
    config.validate()?;
    let ts = config.timestamps();
    let cal = calendar(&ts);
    let w = &config.weather;
    let step = config.step_minutes;
    let seed = config.seed;

    let mut temp_noise = Ar1::new(stream_rng(seed, "weather/drybulb"), w.ar_coefficient, w.noise_std, step);
    let mut cloud = Ar1::new(stream_rng(seed, "weather/cloud"), 0.9, 1.3, step);
    let mut dew_noise = Ar1::new(stream_rng(seed, "weather/dewpoint"), 0.95, 1.2, step);
    let mut wind = Ar1::new(stream_rng(seed, "weather/wind_speed"), 0.9, 1.6, step);
    let mut wind_dir = Ar1::new(stream_rng(seed, "weather/wind_direction"), 0.95, 60.0, step);

    let n = ts.len();
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n); WEATHER_COLUMNS.len()];
    for c in &cal {
        let season = seasonal(c.doy);
        // Fraction of clear sky; cloudier in winter.
        let clear = 1.0 / (1.0 + (-(0.3 + 0.6 * season + cloud.next())).exp());

        let annual = w.annual_mean - w.annual_amplitude * (TAU * (f64::from(c.doy) - 15.0) / 365.0).cos();
        let diurnal = w.diurnal_amplitude * (0.5 + 0.5 * clear) * (TAU * (c.hour - 15.0) / 24.0).cos();
        let drybulb = (annual + diurnal + temp_noise.next()).clamp(-20.0, 40.0);

        let sun = daylight(c.doy, c.hour);
        let peak = 550.0 + 300.0 * season;
        let direct = peak * sun.powf(1.2) * clear;
        let diffuse = sun * (40.0 + 160.0 * (1.0 - clear)) * (0.7 + 0.3 * season);

        let depression = 1.0 + 4.0 * clear * (0.5 + 0.5 * (TAU * (c.hour - 15.0) / 24.0).cos()) + dew_noise.next().abs();
        let dewpoint = drybulb - depression;

        cols[0].push(drybulb);
        cols[1].push(dewpoint);
        cols[2].push(direct);
        cols[3].push(diffuse);
        cols[4].push(relative_humidity(drybulb, dewpoint));
        cols[5].push((230.0 + wind_dir.next()).rem_euclid(360.0));
        cols[6].push((3.0 + wind.next()).max(0.0));
    }

    let columns = cols
        .into_iter()
        .zip(WEATHER_COLUMNS)
        .map(|(v, (name, unit))| Column::new(ColumnSpec::new(name, FeatureGroup::Weather, unit), v))
        .collect();
    TimeSeriesFrame::new(ts, step, columns)
}
