use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::{year_start, Minutes};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherParams {
    /// °C
    pub annual_mean: f64,
    /// Half the summer-winter swing of daily means, °C.
    pub annual_amplitude: f64,
    /// Half the day-night swing on a clear day, °C.
    pub diurnal_amplitude: f64,
    /// Lag-one-hour autocorrelation of the temperature anomaly.
    pub ar_coefficient: f64,
    /// Stationary standard deviation of the temperature anomaly, °C.
    pub noise_std: f64,
}

impl Default for WeatherParams {
    fn default() -> Self {
        WeatherParams {
            annual_mean: 9.5,
            annual_amplitude: 9.0,
            diurnal_amplitude: 4.0,
            ar_coefficient: 0.97,
            noise_std: 2.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupantParams {
    /// Probability a bedroom is occupied at night.
    pub night_presence: f64,
    /// Probability a living room is occupied during weekday working hours.
    pub weekday_day_presence: f64,
    /// Same on weekends.
    pub weekend_day_presence: f64,
    /// Probability the living room is occupied in the evening.
    pub evening_presence: f64,
    /// Mean number of multi-day window openings per room each spring.
    pub window_episode_rate: f64,
    /// Bounds on the length of one such opening, hours.
    pub window_episode_hours: (f64, f64),
    /// °C
    pub setpoint_day: f64,
    /// °C
    pub setpoint_night: f64,
    /// Occupant heat and hidden disturbances (showers, cooking, appliances).
    pub gains_enabled: bool,
}

impl Default for OccupantParams {
    fn default() -> Self {
        OccupantParams {
            night_presence: 0.95,
            weekday_day_presence: 0.2,
            weekend_day_presence: 0.6,
            evening_presence: 0.85,
            window_episode_rate: 2.0,
            window_episode_hours: (48.0, 96.0),
            setpoint_day: 21.0,
            setpoint_night: 19.0,
            gains_enabled: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub seed: u64,
    pub n_rooms: usize,
    pub years: u32,
    /// Overrides `years` when set; handy for short runs.
    #[serde(default)]
    pub days: Option<u32>,
    pub start_year: i32,
    pub step_minutes: u32,
    pub weather: WeatherParams,
    pub occupants: OccupantParams,
    /// Standard deviation of the room temperature sensors, °C.
    pub sensor_noise_std: f64,
    /// Probability that any one sensor cell is dropped.
    pub missing_fraction: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            seed: 42,
            n_rooms: 5,
            years: 2,
            days: None,
            start_year: 2021,
            step_minutes: 1,
            weather: WeatherParams::default(),
            occupants: OccupantParams::default(),
            sensor_noise_std: 0.1,
            missing_fraction: 0.005,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::invalid(format!("world config: {msg}")));
        if self.step_minutes == 0 || 60 % self.step_minutes != 0 {
            return bad("step_minutes must divide 60");
        }
        if !(0.0..1.0).contains(&self.weather.ar_coefficient) {
            return bad("ar_coefficient must lie in [0, 1)");
        }
        let w = &self.weather;
        if !(w.annual_amplitude >= 0.0 && w.diurnal_amplitude >= 0.0 && w.noise_std >= 0.0) {
            return bad("amplitudes and noise must be >= 0");
        }
        if !w.annual_mean.is_finite() {
            return bad("annual_mean must be finite");
        }
        if self.n_rooms == 0 {
            return bad("n_rooms must be >= 1");
        }
        if self.years == 0 && self.days.is_none() || self.days == Some(0) {
            return bad("duration must be positive");
        }
        let o = &self.occupants;
        for p in [o.night_presence, o.weekday_day_presence, o.weekend_day_presence, o.evening_presence] {
            if !(0.0..=1.0).contains(&p) {
                return bad("presence probabilities must lie in [0, 1]");
            }
        }
        let (lo, hi) = o.window_episode_hours;
        if !(lo > 0.0 && hi >= lo) || o.window_episode_rate < 0.0 {
            return bad("window episode settings invalid");
        }
        if !(self.sensor_noise_std >= 0.0) || !(0.0..0.01).contains(&self.missing_fraction) {
            return bad("sensor_noise_std must be >= 0 and missing_fraction in [0, 0.01)");
        }
        Ok(())
    }

    pub fn start(&self) -> Minutes {
        year_start(self.start_year)
    }

    pub fn end(&self) -> Minutes {
        match self.days {
            Some(d) => self.start() + Minutes::from(d) * 1440,
            None => year_start(self.start_year + self.years as i32),
        }
    }

    pub fn timestamps(&self) -> Vec<Minutes> {
        let step = Minutes::from(self.step_minutes);
        (self.start()..self.end()).step_by(step as usize).collect()
    }

    pub fn room_names(&self) -> Vec<String> {
        (1..=self.n_rooms).map(|i| format!("R{i}")).collect()
    }
}
