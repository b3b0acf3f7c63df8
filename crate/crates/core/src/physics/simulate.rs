use super::network::{RcNetwork, StepInputs, ThermalSystem};
use crate::error::{Error, Result};
use crate::timeseries::{Column, ColumnSpec, FeatureGroup, TimeSeriesFrame};

/// Driver column names read by the simulator.
pub mod columns {
    pub const OUTDOOR_TEMP: &str = "drybulb_temp";
    pub const DIRECT_SOLAR: &str = "direct_solar";
    pub const DIFFUSE_SOLAR: &str = "diffuse_solar";
    pub const HEATING_FLOW: &str = "heating_mass_flow";
    pub const COOLING_FLOW: &str = "cooling_mass_flow";
    pub const AC_MODE: &str = "ac_mode";

    pub fn room_flow(room: &str) -> String {
        format!("{room}_mass_flow")
    }
    pub fn room_occupancy(room: &str) -> String {
        format!("{room}_occupancy")
    }
    pub fn room_window(room: &str) -> String {
        format!("{room}_window")
    }
    pub fn room_blinds(room: &str) -> String {
        format!("{room}_blinds")
    }
    pub fn room_setpoint(room: &str) -> String {
        format!("{room}_setpoint")
    }
    pub fn room_target(room: &str) -> String {
        format!("{room}_temp")
    }
    pub fn simulated(name: &str) -> String {
        format!("sim_{name}")
    }
}

/// Raw per-node driver signals, independent of network parameters.
#[derive(Debug, Clone)]
pub(crate) struct ZoneSignals {
    /// Signed heating-circuit mass flow, kg/s (negative while cooling).
    pub flow: Vec<f64>,
    /// Global irradiance, W/m².
    pub irradiance: Vec<f64>,
    pub blinds: Vec<f64>,
    pub occupancy: Vec<f64>,
    pub window: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct Drivers {
    pub t_out: Vec<f64>,
    pub zones: Vec<ZoneSignals>,
}

impl Drivers {
    pub fn n_rows(&self) -> usize {
        self.t_out.len()
    }
}

fn finite_column<'a>(frame: &'a TimeSeriesFrame, name: &str) -> Result<Option<&'a [f64]>> {
    match frame.column(name) {
        None => Ok(None),
        Some(c) => {
            if c.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("driver column {name}")));
            }
            Ok(Some(&c.values))
        }
    }
}

/// Reads the columns each node needs. Absent columns are zero input;
/// only the outdoor temperature is mandatory.
pub(crate) fn resolve_drivers(net: &RcNetwork, frame: &TimeSeriesFrame) -> Result<Drivers> {
    let n = frame.n_rows();
    let t_out = finite_column(frame, columns::OUTDOOR_TEMP)?
        .ok_or_else(|| Error::UnknownColumn(columns::OUTDOOR_TEMP.to_string()))?
        .to_vec();
    let zeros = vec![0.0; n];
    let or_zero = |name: &str| -> Result<Vec<f64>> {
        Ok(finite_column(frame, name)?.map_or_else(|| zeros.clone(), <[f64]>::to_vec))
    };

    let direct = or_zero(columns::DIRECT_SOLAR)?;
    let diffuse = or_zero(columns::DIFFUSE_SOLAR)?;
    let irradiance: Vec<f64> = direct.iter().zip(&diffuse).map(|(a, b)| a + b).collect();

    let heating = finite_column(frame, columns::HEATING_FLOW)?;
    let cooling = finite_column(frame, columns::COOLING_FLOW)?;
    let net_building: Vec<f64> = (0..n)
        .map(|i| heating.map_or(0.0, |h| h[i]) - cooling.map_or(0.0, |c| c[i]))
        .collect();
    let ac_mode = finite_column(frame, columns::AC_MODE)?;

    let heated_rooms = net
        .zones
        .iter()
        .filter(|z| z.room.is_some() && z.heating_gain > 0.0)
        .count()
        .max(1) as f64;

    let mut zones = Vec::with_capacity(net.n_zones());
    for z in &net.zones {
        let signals = match &z.room {
            None => ZoneSignals {
                flow: net_building.clone(),
                irradiance: irradiance.clone(),
                blinds: zeros.clone(),
                occupancy: zeros.clone(),
                window: zeros.clone(),
            },
            Some(room) => {
                let flow = match finite_column(frame, &columns::room_flow(room))? {
                    Some(f) => f
                        .iter()
                        .enumerate()
                        .map(|(i, v)| match ac_mode {
                            Some(m) if m[i] >= 0.5 => -v,
                            _ => *v,
                        })
                        .collect(),
                    None => net_building.iter().map(|v| v / heated_rooms).collect(),
                };
                ZoneSignals {
                    flow,
                    irradiance: irradiance.clone(),
                    blinds: or_zero(&columns::room_blinds(room))?,
                    occupancy: or_zero(&columns::room_occupancy(room))?,
                    window: or_zero(&columns::room_window(room))?,
                }
            }
        };
        zones.push(signals);
    }
    Ok(Drivers { t_out, zones })
}

fn fill_inputs(net: &RcNetwork, drivers: &Drivers, row: usize, inputs: &mut StepInputs) {
    inputs.t_out = drivers.t_out[row];
    for (i, (z, s)) in net.zones.iter().zip(&drivers.zones).enumerate() {
        let shade = 1.0 - (1.0 - z.blinds_transmission) * s.blinds[row];
        inputs.heat[i] = z.heating_gain * s.flow[row]
            + z.solar_aperture * s.irradiance[row] * shade
            + z.occupant_gain * s.occupancy[row];
        inputs.conductance[i] = z.window_conductance * s.window[row];
    }
}

/// Node trajectories, node-major. Row `t` holds the state at the start of
/// interval `t`; the interval's drivers act over `[t, t+1)`.
pub(crate) fn trajectories(
    net: &RcNetwork,
    drivers: &Drivers,
    step_seconds: f64,
    substeps: u32,
) -> Vec<Vec<f64>> {
    let n_rows = drivers.n_rows();
    let nz = net.n_zones();
    let mut system = ThermalSystem::new(net);
    let mut inputs = StepInputs::zeros(nz);
    let mut temps: Vec<f64> = net.zones.iter().map(|z| z.initial_temp).collect();
    let dt = step_seconds / f64::from(substeps.max(1));

    if net.warmup_days > 0 && n_rows > 0 {
        let day_rows = ((86_400.0 / step_seconds).round() as usize).clamp(1, n_rows);
        for _ in 0..net.warmup_days {
            for row in 0..day_rows {
                fill_inputs(net, drivers, row, &mut inputs);
                for _ in 0..substeps.max(1) {
                    system.rk4_step(&mut temps, &inputs, dt);
                }
            }
        }
    }

    let mut out = vec![Vec::with_capacity(n_rows); nz];
    for row in 0..n_rows {
        for (traj, t) in out.iter_mut().zip(&temps) {
            traj.push(*t);
        }
        fill_inputs(net, drivers, row, &mut inputs);
        for _ in 0..substeps.max(1) {
            system.rk4_step(&mut temps, &inputs, dt);
        }
    }
    out
}

/// Forward simulation at the driver resolution with one RK4 step per row.
///
/// Returns one `Simulated` column `sim_<zone>` per node.
pub fn simulate(network: &RcNetwork, drivers: &TimeSeriesFrame, step_minutes: u32) -> Result<TimeSeriesFrame> {
    simulate_substeps(network, drivers, step_minutes, 1)
}

/// As [`simulate`], splitting each driver interval into `substeps` RK4 steps.
pub fn simulate_substeps(
    network: &RcNetwork,
    drivers: &TimeSeriesFrame,
    step_minutes: u32,
    substeps: u32,
) -> Result<TimeSeriesFrame> {
    network.validate()?;
    if step_minutes == 0 || substeps == 0 {
        return Err(Error::invalid("step_minutes and substeps must be positive"));
    }
    if step_minutes != drivers.step_minutes() {
        return Err(Error::invalid(format!(
            "simulation step {step_minutes} min differs from driver step {} min",
            drivers.step_minutes()
        )));
    }
    let resolved = resolve_drivers(network, drivers)?;
    let traj = trajectories(network, &resolved, f64::from(step_minutes) * 60.0, substeps);
    let columns = network
        .zones
        .iter()
        .zip(traj)
        .map(|(z, values)| {
            Column::new(
                ColumnSpec::new(columns::simulated(&z.name), FeatureGroup::Simulated, "degC"),
                values,
            )
        })
        .collect();
    TimeSeriesFrame::new(drivers.timestamps().to_vec(), drivers.step_minutes(), columns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::network::{Coupling, Zone};

    pub(crate) fn driver_frame(step: u32, t_out: Vec<f64>, extra: Vec<(&str, Vec<f64>)>) -> TimeSeriesFrame {
        let n = t_out.len();
        let mut cols = vec![Column::new(
            ColumnSpec::new(columns::OUTDOOR_TEMP, FeatureGroup::Weather, "degC"),
            t_out,
        )];
        for (name, v) in extra {
            cols.push(Column::new(ColumnSpec::new(name, FeatureGroup::Room, "-"), v));
        }
        let ts = (0..n as i64).map(|i| i * i64::from(step)).collect();
        TimeSeriesFrame::new(ts, step, cols).unwrap()
    }

    #[test]
    fn equilibrium_is_constant() {
        let net = RcNetwork::new(vec![Zone::new("a", 1e6, 0.01, 20.0)], vec![]).unwrap();
        let f = driver_frame(1, vec![20.0; 500], vec![]);
        let sim = simulate(&net, &f, 1).unwrap();
        assert!(sim.values("sim_a").unwrap().iter().all(|&t| t == 20.0));
    }

    #[test]
    fn missing_outdoor_is_error() {
        let net = RcNetwork::new(vec![Zone::new("a", 1e6, 0.01, 20.0)], vec![]).unwrap();
        let f = TimeSeriesFrame::new(vec![0, 1], 1, vec![]).unwrap();
        assert!(matches!(simulate(&net, &f, 1), Err(Error::UnknownColumn(_))));
    }

    #[test]
    fn non_finite_driver_is_error() {
        let net = RcNetwork::new(vec![Zone::new("a", 1e6, 0.01, 20.0)], vec![]).unwrap();
        let f = driver_frame(1, vec![1.0, f64::NAN], vec![]);
        assert!(matches!(simulate(&net, &f, 1), Err(Error::NonFinite(_))));
    }

    #[test]
    fn symmetric_zones_match() {
        let mut a = Zone::new("a", 2e6, 0.02, 18.0).with_room("R1");
        a.heating_gain = 3e4;
        a.solar_aperture = 2.0;
        let mut b = a.clone();
        b.name = "b".into();
        b.room = Some("R2".into());
        let net = RcNetwork::new(vec![a, b], vec![Coupling { a: 0, b: 1, resistance: 0.05 }]).unwrap();
        let n = 300;
        let flow: Vec<f64> = (0..n).map(|i| if i % 50 < 20 { 0.02 } else { 0.0 }).collect();
        let f = driver_frame(
            5,
            (0..n).map(|i| 5.0 + (i as f64 * 0.05).sin()).collect(),
            vec![("R1_mass_flow", flow.clone()), ("R2_mass_flow", flow)],
        );
        let sim = simulate(&net, &f, 5).unwrap();
        assert_eq!(sim.values("sim_a").unwrap(), sim.values("sim_b").unwrap());
    }

    #[test]
    fn absent_room_flow_uses_building_share() {
        let mut a = Zone::new("a", 1e6, 0.02, 18.0).with_room("R1");
        a.heating_gain = 1e4;
        let net = RcNetwork::new(vec![a], vec![]).unwrap();
        let f = driver_frame(1, vec![0.0; 3], vec![("heating_mass_flow", vec![0.1; 3]), ("cooling_mass_flow", vec![0.04; 3])]);
        let d = resolve_drivers(&net, &f).unwrap();
        assert!((d.zones[0].flow[0] - 0.06).abs() < 1e-15);
    }

    #[test]
    fn cooling_mode_flips_room_flow() {
        let mut a = Zone::new("a", 1e6, 0.02, 18.0).with_room("R1");
        a.heating_gain = 1e4;
        let net = RcNetwork::new(vec![a], vec![]).unwrap();
        let f = driver_frame(1, vec![0.0; 2], vec![("R1_mass_flow", vec![0.1, 0.1]), ("ac_mode", vec![0.0, 1.0])]);
        let d = resolve_drivers(&net, &f).unwrap();
        assert_eq!(d.zones[0].flow, vec![0.1, -0.1]);
    }

    #[test]
    fn step_mismatch_rejected() {
        let net = RcNetwork::new(vec![Zone::new("a", 1e6, 0.01, 20.0)], vec![]).unwrap();
        let f = driver_frame(15, vec![20.0; 4], vec![]);
        assert!(simulate(&net, &f, 1).is_err());
    }

    #[test]
    fn warmup_moves_initial_state_toward_drivers() {
        let net = RcNetwork::new(vec![Zone::new("a", 1e6, 0.01, 40.0)], vec![]).unwrap();
        let f = driver_frame(60, vec![10.0; 48], vec![]);
        let cold = simulate(&net, &f, 60).unwrap();
        let warm = simulate(&net.clone().with_warmup_days(5), &f, 60).unwrap();
        assert_eq!(cold.values("sim_a").unwrap()[0], 40.0);
        assert!((warm.values("sim_a").unwrap()[0] - 10.0).abs() < 1e-3);
    }
}
