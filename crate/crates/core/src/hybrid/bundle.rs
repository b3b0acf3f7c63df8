use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{HybridModel, HybridStrategy};
use crate::error::{Error, Result};
use crate::learners::Learner;
use crate::physics::PhysicsTier;
use crate::timeseries::{ScenarioId, Standardizer};

const MANIFEST: &str = "manifest.json";
const PHYSICS: &str = "physics.json";
const LEARNER: &str = "learner.json";
const BUNDLE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Manifest {
    version: u32,
    strategy: HybridStrategy,
    scenario: ScenarioId,
    learner_kind: String,
    features: Vec<String>,
    rooms: Vec<String>,
    standardizer: Standardizer,
    physics_file: String,
    learner_file: String,
}

/// Writes `manifest.json`, `physics.json` and the learner files into `dir`.
pub fn save_bundle(model: &HybridModel, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(PHYSICS), model.physics.to_json()?)?;
    model.learner.save(&dir.join(LEARNER))?;
    let manifest = Manifest {
        version: BUNDLE_VERSION,
        strategy: model.strategy,
        scenario: model.scenario,
        learner_kind: model.learner.kind().to_string(),
        features: model.features.clone(),
        rooms: model.rooms.clone(),
        standardizer: model.standardizer.clone(),
        physics_file: PHYSICS.into(),
        learner_file: LEARNER.into(),
    };
    fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

pub fn load_bundle(dir: &Path) -> Result<HybridModel> {
    let path = dir.join(MANIFEST);
    if !path.exists() {
        return Err(Error::MissingFile(path));
    }
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(&path)?)?;
    if manifest.version != BUNDLE_VERSION {
        return Err(Error::invalid(format!("unsupported bundle version {}", manifest.version)));
    }
    let physics_path = dir.join(&manifest.physics_file);
    if !physics_path.exists() {
        return Err(Error::MissingFile(physics_path));
    }
    let physics = PhysicsTier::from_json(&fs::read_to_string(&physics_path)?)?;
    let learner = Learner::load(&dir.join(&manifest.learner_file))?;
    let model = HybridModel {
        strategy: manifest.strategy,
        scenario: manifest.scenario,
        learner,
        physics,
        standardizer: manifest.standardizer,
        features: manifest.features,
        rooms: manifest.rooms,
    };
    if model.learner.n_features() != model.learner_inputs().len() || model.standardizer.len() != model.learner_inputs().len() {
        return Err(Error::invalid("bundle learner does not match its feature list"));
    }
    if model.learner.n_outputs() != model.rooms.len() {
        return Err(Error::invalid("bundle learner does not match its room list"));
    }
    Ok(model)
}
