use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::calibrate::{calibrate, CalibrationOptions, CalibrationResult};
use super::network::{RcNetwork, Zone};
use super::simulate::{columns, simulate};
use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::timeseries::{Column, ColumnSpec, FeatureGroup, TimeSeriesFrame};

/// Warm-up days replayed before every tier simulation.
pub const TIER_WARMUP_DAYS: u32 = 7;

/// Range of the multiplicative perturbation applied to documented parameters.
pub const PERTURBATION_RANGE: (f64, f64) = (0.7, 1.3);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TierKind {
    Archetype,
    UncalibratedDetailed,
    CalibratedDetailed,
}

impl TierKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TierKind::Archetype => "archetype",
            TierKind::UncalibratedDetailed => "uncalibrated",
            TierKind::CalibratedDetailed => "calibrated",
        }
    }
}

impl fmt::Display for TierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "archetype" => Ok(TierKind::Archetype),
            "uncalibrated" | "uncalibrateddetailed" => Ok(TierKind::UncalibratedDetailed),
            "calibrated" | "calibrateddetailed" => Ok(TierKind::CalibratedDetailed),
            other => Err(Error::invalid(format!("unknown physics tier '{other}'"))),
        }
    }
}

/// Summary of the calibration that produced a calibrated tier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    pub initial_rmse: f64,
    pub rmse: f64,
    pub rmse_per_zone: Vec<f64>,
    pub iterations: u32,
    pub converged: bool,
}

impl From<&CalibrationResult> for CalibrationSummary {
    fn from(r: &CalibrationResult) -> Self {
        CalibrationSummary {
            initial_rmse: r.initial_rmse,
            rmse: r.rmse,
            rmse_per_zone: r.rmse_per_zone.clone(),
            iterations: r.iterations,
            converged: r.converged,
        }
    }
}

/// A physics sub-model at one fidelity level, bound to the rooms it predicts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicsTier {
    pub kind: TierKind,
    pub network: RcNetwork,
    pub rooms: Vec<String>,
    /// Network node whose trajectory is reported for each room.
    pub room_zones: Vec<usize>,
    #[serde(default)]
    pub calibration: Option<CalibrationSummary>,
}

impl PhysicsTier {
    pub fn simulated_names(&self) -> Vec<String> {
        self.rooms.iter().map(|r| columns::simulated(r)).collect()
    }

    /// One `sim_<room>` column per room at the driver resolution.
    pub fn simulate(&self, drivers: &TimeSeriesFrame) -> Result<TimeSeriesFrame> {
        let sim = simulate(&self.network, drivers, drivers.step_minutes())?;
        let columns = self
            .rooms
            .iter()
            .zip(&self.room_zones)
            .map(|(room, &zi)| {
                let src = columns::simulated(&self.network.zones[zi].name);
                Column::new(
                    ColumnSpec::new(columns::simulated(room), FeatureGroup::Simulated, "degC"),
                    sim.values(&src).expect("simulate emits every zone").to_vec(),
                )
            })
            .collect();
        TimeSeriesFrame::new(drivers.timestamps().to_vec(), drivers.step_minutes(), columns)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let tier: PhysicsTier = serde_json::from_str(text)?;
        tier.network.validate()?;
        if tier.rooms.len() != tier.room_zones.len()
            || tier.room_zones.iter().any(|&z| z >= tier.network.n_zones())
        {
            return Err(Error::invalid("tier room mapping does not match its network"));
        }
        Ok(tier)
    }
}

/// Generic single-zone stand-in built from coarse building information:
/// one lumped node for the whole unit, driven by building-level totals.
pub fn archetype_network(n_rooms: usize) -> RcNetwork {
    let n = n_rooms.max(1) as f64;
    let mut z = Zone::new("building", 5.0e6 * n, 0.04 / n, 20.0);
    z.heating_gain = 2.5e4 / n;
    z.solar_aperture = 0.8 * n;
    z.blinds_transmission = 1.0;
    RcNetwork::new(vec![z], vec![])
        .expect("archetype parameters are valid")
        .with_warmup_days(TIER_WARMUP_DAYS)
}

/// Multiplies every physical parameter by an independent factor drawn
/// uniformly from [`PERTURBATION_RANGE`].
pub fn perturb(network: &RcNetwork, seed: u64) -> RcNetwork {
    let mut rng = stream_rng(seed, "tier-perturbation");
    let (lo, hi) = PERTURBATION_RANGE;
    let mut net = network.clone();
    for z in &mut net.zones {
        z.capacitance *= rng.gen_range(lo..hi);
        z.r_out *= rng.gen_range(lo..hi);
        z.heating_gain *= rng.gen_range(lo..hi);
        z.solar_aperture *= rng.gen_range(lo..hi);
        z.occupant_gain *= rng.gen_range(lo..hi);
        z.window_conductance *= rng.gen_range(lo..hi);
    }
    for c in &mut net.couplings {
        c.resistance *= rng.gen_range(lo..hi);
    }
    net
}

/// Builds a physics tier.
///
/// `documented` is the multi-zone network from detailed documentation;
/// `training` (with `<room>_temp` targets) is required for the calibrated tier.
pub fn make_tier(
    kind: TierKind,
    documented: &RcNetwork,
    rooms: &[String],
    seed: u64,
    training: Option<&TimeSeriesFrame>,
    options: &CalibrationOptions,
) -> Result<PhysicsTier> {
    if rooms.is_empty() {
        return Err(Error::invalid("a tier needs at least one room"));
    }
    if kind == TierKind::Archetype {
        return Ok(PhysicsTier {
            kind,
            network: archetype_network(rooms.len()),
            rooms: rooms.to_vec(),
            room_zones: vec![0; rooms.len()],
            calibration: None,
        });
    }

    let room_zones = rooms
        .iter()
        .map(|r| {
            documented
                .zones
                .iter()
                .position(|z| z.room.as_deref() == Some(r.as_str()))
                .ok_or_else(|| Error::invalid(format!("documented network has no zone for room {r}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let network = perturb(documented, seed).with_warmup_days(TIER_WARMUP_DAYS);

    if kind == TierKind::UncalibratedDetailed {
        return Ok(PhysicsTier {
            kind,
            network,
            rooms: rooms.to_vec(),
            room_zones,
            calibration: None,
        });
    }

    let training = training.ok_or_else(|| Error::invalid("calibrated tier needs training data"))?;
    let zone_room: Vec<String> = network
        .zones
        .iter()
        .map(|z| {
            z.room
                .clone()
                .ok_or_else(|| Error::invalid(format!("zone {} has no room to calibrate against", z.name)))
        })
        .collect::<Result<_>>()?;
    let targets = training.select(
        &zone_room
            .iter()
            .map(|r| columns::room_target(r))
            .collect::<Vec<_>>(),
    )?;
    let result = calibrate(&network, training, &targets, options)?;
    Ok(PhysicsTier {
        kind,
        calibration: Some(CalibrationSummary::from(&result)),
        network: result.network,
        rooms: rooms.to_vec(),
        room_zones,
    })
}
