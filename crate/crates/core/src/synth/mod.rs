//! Seeded synthetic apartment: weather, occupant behaviour, a thermostat and
//! a hidden two-node-per-room building that produces the measured room
//! temperatures.

mod behaviour;
mod config;
mod truth;
mod weather;

use rand::Rng;
use rand_distr::StandardNormal;

pub use behaviour::RoomKind;
pub use config::{OccupantParams, WeatherParams, WorldConfig};
pub use truth::{ControllerParams, DisturbanceParams, GroundTruthModel, RoomPhysics};
pub use weather::{generate_weather, WEATHER_COLUMNS};

use crate::error::Result;
use crate::physics::columns;
use crate::rng::stream_rng;
use crate::timeseries::{datetime_columns, Column, ColumnSpec, FeatureGroup, TimeSeriesFrame};

/// A generated dataset together with the model that produced it.
#[derive(Debug, Clone)]
pub struct World {
    pub config: WorldConfig,
    pub truth: GroundTruthModel,
    pub frame: TimeSeriesFrame,
}

impl World {
    pub fn rooms(&self) -> Vec<String> {
        self.config.room_names()
    }
}

struct Generated {
    weather: TimeSeriesFrame,
    behaviour: Vec<Column>,
    targets: Vec<Column>,
}

fn generate(config: &WorldConfig, truth: &GroundTruthModel) -> Result<Generated> {
    let weather = generate_weather(config)?;
    let cal = weather::calendar(weather.timestamps());
    let schedules = behaviour::room_schedules(config, &cal);
    let t_out = weather.values(columns::OUTDOOR_TEMP)?;
    let irradiance: Vec<f64> = weather
        .values(columns::DIRECT_SOLAR)?
        .iter()
        .zip(weather.values(columns::DIFFUSE_SOLAR)?)
        .map(|(a, b)| a + b)
        .collect();
    let run = truth::run_closed_loop(truth, config, &cal, t_out, &irradiance, &schedules);

    let building = |name: &str, unit: &str| ColumnSpec::new(name, FeatureGroup::Building, unit);
    let room = |name: String, unit: &str| ColumnSpec::new(name, FeatureGroup::Room, unit);
    let mut behaviour = vec![
        Column::new(building(columns::HEATING_FLOW, "kg/s"), run.heating_flow),
        Column::new(building(columns::COOLING_FLOW, "kg/s"), run.cooling_flow),
        Column::new(building("network_temp", "degC"), run.network_temp),
        Column::new(building(columns::AC_MODE, "-").categorical(), run.ac_mode),
    ];
    let mut targets = Vec::new();
    for ((name, sched), (flow, temp)) in config
        .room_names()
        .iter()
        .zip(schedules)
        .zip(run.room_flows.into_iter().zip(run.air_temps))
    {
        behaviour.push(Column::new(room(columns::room_flow(name), "kg/s"), flow));
        behaviour.push(Column::new(room(columns::room_occupancy(name), "-").categorical(), sched.occupancy));
        behaviour.push(Column::new(room(columns::room_window(name), "-").categorical(), sched.window));
        behaviour.push(Column::new(room(columns::room_blinds(name), "-").categorical(), sched.blinds));
        behaviour.push(Column::new(room(columns::room_setpoint(name), "degC").categorical(), sched.setpoint));

        let mut rng = stream_rng(config.seed, &format!("sensor/{name}"));
        let noisy = temp
            .into_iter()
            .map(|t| t + config.sensor_noise_std * rng.sample::<f64, _>(StandardNormal))
            .collect();
        targets.push(Column::new(ColumnSpec::new(columns::room_target(name), FeatureGroup::Target, "degC"), noisy));
    }
    Ok(Generated { weather, behaviour, targets })
}

/// Building and room drivers: thermostat flows, operating mode, supply
/// temperature, occupancy, windows, blinds and setpoints.
pub fn generate_occupant_behaviour(config: &WorldConfig) -> Result<TimeSeriesFrame> {
    config.validate()?;
    let g = generate(config, &GroundTruthModel::new(config))?;
    TimeSeriesFrame::new(g.weather.timestamps().to_vec(), config.step_minutes, g.behaviour)
}

/// The full table: calendar, weather, building, room and target columns,
/// with sensor noise and a sprinkling of missing cells.
pub fn generate_dataset(config: &WorldConfig) -> Result<TimeSeriesFrame> {
    Ok(generate_world(config)?.frame)
}

pub fn generate_world(config: &WorldConfig) -> Result<World> {
    config.validate()?;
    let truth = GroundTruthModel::new(config);
    let g = generate(config, &truth)?;
    let (timestamps, _, weather_cols) = g.weather.into_parts();
    let mut cols = datetime_columns(&timestamps);
    let first_sensor = cols.len();
    cols.extend(weather_cols);
    cols.extend(g.behaviour);
    cols.extend(g.targets);
    for col in &mut cols[first_sensor..] {
        let mut rng = stream_rng(config.seed, &format!("missing/{}", col.spec.name));
        for v in &mut col.values {
            if rng.gen::<f64>() < config.missing_fraction {
                *v = f64::NAN;
            }
        }
    }
    let frame = TimeSeriesFrame::new(timestamps, config.step_minutes, cols)?;
    Ok(World {
        config: config.clone(),
        truth,
        frame,
    })
}
