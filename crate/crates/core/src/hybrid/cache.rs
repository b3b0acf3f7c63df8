use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::error::Result;
use crate::physics::network::fnv1a;
use crate::physics::PhysicsTier;
use crate::timeseries::TimeSeriesFrame;

/// Memoizes tier simulations by (tier content, frame content). Physics runs
/// dominate the cost of a hybrid experiment, and many cells share both.
#[derive(Debug, Default)]
pub struct SimCache {
    entries: Mutex<HashMap<(u64, u64), Arc<TimeSeriesFrame>>>,
}

fn tier_key(tier: &PhysicsTier) -> Result<u64> {
    Ok(fnv1a(serde_json::to_string(tier)?.as_bytes()))
}

fn frame_key(frame: &TimeSeriesFrame) -> u64 {
    let mut bytes = Vec::with_capacity(16 * frame.n_rows());
    bytes.extend_from_slice(&frame.step_minutes().to_le_bytes());
    for t in frame.timestamps() {
        bytes.extend_from_slice(&t.to_le_bytes());
    }
    for c in frame.columns() {
        bytes.extend_from_slice(c.name().as_bytes());
        bytes.push(0);
        for v in &c.values {
            bytes.extend_from_slice(&v.to_bits().to_le_bytes());
        }
    }
    fnv1a(&bytes)
}

impl SimCache {
    pub fn new() -> Self {
        SimCache::default()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn simulate(&self, tier: &PhysicsTier, frame: &TimeSeriesFrame) -> Result<Arc<TimeSeriesFrame>> {
        let key = (tier_key(tier)?, frame_key(frame));
        if let Some(hit) = self.entries.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let sim = Arc::new(tier.simulate(frame)?);
        self.entries.lock().expect("cache lock").insert(key, Arc::clone(&sim));
        Ok(sim)
    }
}
