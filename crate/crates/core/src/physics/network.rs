use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NETWORK_FORMAT_VERSION: u32 = 1;

/// One thermal node of the network.
///
/// A node reads its driver columns through `room`: `{room}_mass_flow`,
/// `{room}_occupancy`, `{room}_window` and `{room}_blinds`. A node without
/// a room reads building-level totals only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub name: String,
    #[serde(default)]
    pub room: Option<String>,
    /// J/K
    pub capacitance: f64,
    /// Envelope resistance to outdoor air, K/W.
    pub r_out: f64,
    /// W per kg/s of heating-circuit mass flow.
    #[serde(default)]
    pub heating_gain: f64,
    /// Effective solar aperture, m².
    #[serde(default)]
    pub solar_aperture: f64,
    /// Fraction of solar gain admitted when blinds are down.
    #[serde(default = "one")]
    pub blinds_transmission: f64,
    /// W per occupant.
    #[serde(default)]
    pub occupant_gain: f64,
    /// Extra conductance to outdoor air while the window is open, W/K.
    #[serde(default)]
    pub window_conductance: f64,
    /// °C
    pub initial_temp: f64,
}

fn one() -> f64 {
    1.0
}

impl Zone {
    pub fn new(name: impl Into<String>, capacitance: f64, r_out: f64, initial_temp: f64) -> Self {
        Zone {
            name: name.into(),
            room: None,
            capacitance,
            r_out,
            heating_gain: 0.0,
            solar_aperture: 0.0,
            blinds_transmission: 1.0,
            occupant_gain: 0.0,
            window_conductance: 0.0,
            initial_temp,
        }
    }

    pub fn with_room(mut self, room: impl Into<String>) -> Self {
        self.room = Some(room.into());
        self
    }
}

/// Symmetric conductive link between two nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub a: usize,
    pub b: usize,
    /// K/W
    pub resistance: f64,
}

/// Multi-node resistance-capacitance thermal network.
///
/// Each node obeys
/// `C_i dT_i/dt = (T_out - T_i)(1/R_i + u_win,i) + Σ_j (T_j - T_i)/R_ij + Q_i`
/// where `Q_i` collects heating, solar and occupant gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcNetwork {
    #[serde(default = "format_version")]
    pub version: u32,
    pub zones: Vec<Zone>,
    #[serde(default)]
    pub couplings: Vec<Coupling>,
    /// Days of first-day drivers replayed before the simulated period.
    #[serde(default)]
    pub warmup_days: u32,
}

fn format_version() -> u32 {
    NETWORK_FORMAT_VERSION
}

impl RcNetwork {
    pub fn new(zones: Vec<Zone>, couplings: Vec<Coupling>) -> Result<Self> {
        let net = RcNetwork {
            version: NETWORK_FORMAT_VERSION,
            zones,
            couplings,
            warmup_days: 0,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn with_warmup_days(mut self, days: u32) -> Self {
        self.warmup_days = days;
        self
    }

    pub fn n_zones(&self) -> usize {
        self.zones.len()
    }

    pub fn zone_index(&self, name: &str) -> Option<usize> {
        self.zones.iter().position(|z| z.name == name)
    }

    pub fn validate(&self) -> Result<()> {
        if self.zones.is_empty() {
            return Err(Error::invalid("network has no zones"));
        }
        for z in &self.zones {
            let positive = [("capacitance", z.capacitance), ("r_out", z.r_out)];
            for (what, v) in positive {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::invalid(format!("zone {}: {what} must be > 0, got {v}", z.name)));
                }
            }
            let nonneg = [
                ("heating_gain", z.heating_gain),
                ("solar_aperture", z.solar_aperture),
                ("occupant_gain", z.occupant_gain),
                ("window_conductance", z.window_conductance),
            ];
            for (what, v) in nonneg {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::invalid(format!("zone {}: {what} must be >= 0, got {v}", z.name)));
                }
            }
            if !(0.0..=1.0).contains(&z.blinds_transmission) {
                return Err(Error::invalid(format!("zone {}: blinds_transmission outside [0,1]", z.name)));
            }
            if !z.initial_temp.is_finite() {
                return Err(Error::NonFinite(format!("zone {} initial temperature", z.name)));
            }
        }
        let n = self.zones.len();
        let mut seen = std::collections::HashSet::new();
        for c in &self.couplings {
            if c.a >= n || c.b >= n || c.a == c.b {
                return Err(Error::invalid(format!("bad coupling {}-{}", c.a, c.b)));
            }
            if !(c.resistance.is_finite() && c.resistance > 0.0) {
                return Err(Error::invalid(format!("coupling {}-{} resistance must be > 0", c.a, c.b)));
            }
            if !seen.insert((c.a.min(c.b), c.a.max(c.b))) {
                return Err(Error::invalid(format!("duplicate coupling {}-{}", c.a, c.b)));
            }
        }
        Ok(())
    }

    /// Dense symmetric inter-zone resistance matrix; `None` where unlinked.
    pub fn resistance_matrix(&self) -> Vec<Vec<Option<f64>>> {
        let n = self.n_zones();
        let mut m = vec![vec![None; n]; n];
        for c in &self.couplings {
            m[c.a][c.b] = Some(c.resistance);
            m[c.b][c.a] = Some(c.resistance);
        }
        m
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let net: RcNetwork = serde_json::from_str(text)?;
        if net.version != NETWORK_FORMAT_VERSION {
            return Err(Error::invalid(format!("unsupported network version {}", net.version)));
        }
        net.validate()?;
        Ok(net)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        RcNetwork::from_json(&crate::timeseries::read_to_string(path)?)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Stable content hash, used as a cache key.
    pub fn fingerprint(&self) -> u64 {
        let text = serde_json::to_string(self).expect("network serializes");
        fnv1a(text.as_bytes())
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Per-step inputs after resolving drivers and gains.
#[derive(Debug, Clone)]
pub struct StepInputs {
    pub t_out: f64,
    /// Total injected heat per node, W.
    pub heat: Vec<f64>,
    /// Extra node-to-outdoor conductance, W/K.
    pub conductance: Vec<f64>,
}

impl StepInputs {
    pub fn zeros(n: usize) -> Self {
        StepInputs {
            t_out: 0.0,
            heat: vec![0.0; n],
            conductance: vec![0.0; n],
        }
    }
}

/// Network flattened for fast derivative evaluation.
#[derive(Debug, Clone)]
pub struct ThermalSystem {
    inv_c: Vec<f64>,
    g_out: Vec<f64>,
    neighbours: Vec<Vec<(usize, f64)>>,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl ThermalSystem {
    pub fn new(net: &RcNetwork) -> Self {
        let n = net.n_zones();
        let mut neighbours = vec![Vec::new(); n];
        for c in &net.couplings {
            let g = 1.0 / c.resistance;
            neighbours[c.a].push((c.b, g));
            neighbours[c.b].push((c.a, g));
        }
        ThermalSystem {
            inv_c: net.zones.iter().map(|z| 1.0 / z.capacitance).collect(),
            g_out: net.zones.iter().map(|z| 1.0 / z.r_out).collect(),
            neighbours,
            k: [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            tmp: vec![0.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.inv_c.len()
    }

    fn derivative(&self, temps: &[f64], inputs: &StepInputs, out: &mut [f64]) {
        for i in 0..temps.len() {
            let ti = temps[i];
            let mut flux = (inputs.t_out - ti) * (self.g_out[i] + inputs.conductance[i]) + inputs.heat[i];
            for &(j, g) in &self.neighbours[i] {
                flux += (temps[j] - ti) * g;
            }
            out[i] = flux * self.inv_c[i];
        }
    }

    /// Advances `temps` by `dt` seconds with classical fourth-order
    /// Runge-Kutta, inputs held constant over the step.
    pub fn rk4_step(&mut self, temps: &mut [f64], inputs: &StepInputs, dt: f64) {
        let n = temps.len();
        let mut k = std::mem::take(&mut self.k);
        let mut tmp = std::mem::take(&mut self.tmp);

        self.derivative(temps, inputs, &mut k[0]);
        for i in 0..n {
            tmp[i] = temps[i] + 0.5 * dt * k[0][i];
        }
        self.derivative(&tmp, inputs, &mut k[1]);
        for i in 0..n {
            tmp[i] = temps[i] + 0.5 * dt * k[1][i];
        }
        self.derivative(&tmp, inputs, &mut k[2]);
        for i in 0..n {
            tmp[i] = temps[i] + dt * k[2][i];
        }
        self.derivative(&tmp, inputs, &mut k[3]);
        for i in 0..n {
            temps[i] += dt / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
        }

        self.k = k;
        self.tmp = tmp;
    }
}
