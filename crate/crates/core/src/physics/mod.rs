//! Multi-zone resistance-capacitance thermal network: forward simulation
//! with fixed-step RK4, derivative-free calibration, and the three fidelity
//! tiers used by the scenario ladder.

mod calibrate;
pub(crate) mod network;
mod simulate;
mod tier;

pub use calibrate::{calibrate, CalibrationOptions, CalibrationResult, Parameter};
pub use network::{Coupling, RcNetwork, StepInputs, ThermalSystem, Zone, NETWORK_FORMAT_VERSION};
pub use simulate::{columns, simulate, simulate_substeps};
pub use tier::{
    archetype_network, make_tier, perturb, CalibrationSummary, PhysicsTier, TierKind,
    PERTURBATION_RANGE, TIER_WARMUP_DAYS,
};
