use ndarray::Array1;

use super::*;
use crate::learners::{LinearModel, LinearOptions};
use crate::physics::{make_tier, TierKind};
use crate::synth::{generate_world, WorldConfig};

struct Fixture {
    frame: TimeSeriesFrame,
    rooms: Vec<String>,
    tier: PhysicsTier,
    archetype: PhysicsTier,
}

fn fixture() -> Fixture {
    let cfg = WorldConfig { days: Some(30), step_minutes: 60, missing_fraction: 0.0, ..Default::default() };
    let world = generate_world(&cfg).unwrap();
    let rooms = world.rooms();
    let doc = world.truth.documented_network();
    let tier = make_tier(TierKind::UncalibratedDetailed, &doc, &rooms, 3, None, &Default::default()).unwrap();
    let archetype = make_tier(TierKind::Archetype, &doc, &rooms, 3, None, &Default::default()).unwrap();
    Fixture { frame: world.frame, rooms, tier, archetype }
}

fn quick() -> LearnerConfig {
    let mut c = LearnerConfig::default();
    c.ffnn.hidden_layers = vec![6];
    c.ffnn.max_epochs = 5;
    c.finetune.max_epochs = 5;
    c.forest.n_trees = 4;
    c.warmstart_trees = 2;
    c
}

fn wb() -> ScenarioSpec {
    ScenarioId::WB.spec()
}

/// The fixture frame with every target replaced by its simulation.
fn targets_from_sim(f: &Fixture) -> TimeSeriesFrame {
    let sim = f.tier.simulate(&f.frame).unwrap();
    let cols = f
        .frame
        .columns()
        .iter()
        .map(|c| match c.name().strip_suffix("_temp").filter(|r| f.rooms.iter().any(|x| x == r)) {
            Some(room) => Column::new(c.spec.clone(), sim.values(&columns::simulated(room)).unwrap().to_vec()),
            None => c.clone(),
        })
        .collect();
    TimeSeriesFrame::new(f.frame.timestamps().to_vec(), f.frame.step_minutes(), cols).unwrap()
}

#[test]
fn residual_of_exact_physics_is_null() {
    let f = fixture();
    let data = targets_from_sim(&f);
    let (m, _) = hybrid_fit(HybridStrategy::Residual, LearnerKind::Lr, &quick(), &f.tier, &data, &wb()).unwrap();
    let Learner::Lr(lr) = &m.learner else { panic!("expected LR") };
    assert!(lr.weights.iter().chain(lr.intercept.iter()).all(|v| v.abs() < 1e-9));
}

#[test]
fn assistant_adds_one_input_per_room() {
    let f = fixture();
    let base = feature_columns(&f.frame, &wb()).len();
    let (a, _) = hybrid_fit(HybridStrategy::Assistant, LearnerKind::Lr, &quick(), &f.tier, &f.frame, &wb()).unwrap();
    assert_eq!(a.learner.n_features(), base + f.rooms.len());
    for s in [HybridStrategy::Residual, HybridStrategy::Surrogate, HybridStrategy::Augmentation] {
        let (m, _) = hybrid_fit(s, LearnerKind::Lr, &quick(), &f.tier, &f.frame, &wb()).unwrap();
        assert_eq!(m.learner.n_features(), base);
    }
}

#[test]
fn surrogate_reproduces_affine_simulation() {
    let f = fixture();
    let features = feature_columns(&f.frame, &wb());
    let x = f.frame.to_matrix(&features).unwrap();
    // Simulated label = 0.5 * first feature + 0.1 * second feature + 20.
    let cols = f
        .tier
        .simulated_names()
        .into_iter()
        .enumerate()
        .map(|(j, name)| {
            let v = x.rows().into_iter().map(|r| 0.5 * r[0] + 0.1 * r[1] * j as f64 + 20.0).collect();
            Column::new(ColumnSpec::new(name, FeatureGroup::Simulated, "degC"), v)
        })
        .collect();
    let sim = TimeSeriesFrame::new(f.frame.timestamps().to_vec(), 60, cols).unwrap();
    let (m, _) = hybrid_fit_with_sim(HybridStrategy::Surrogate, LearnerKind::Lr, &quick(), &f.tier, &f.frame, &sim, &wb()).unwrap();
    let p = hybrid_predict_with_sim(&m, &f.frame, &sim).unwrap();
    for (room, name) in f.rooms.iter().zip(f.tier.simulated_names()) {
        let got = p.values(&prediction_column(room)).unwrap();
        let want = sim.values(&name).unwrap();
        assert!(got.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-8));
    }
}

#[test]
fn residual_with_null_learner_is_physics() {
    let f = fixture();
    let (mut m, _) = hybrid_fit(HybridStrategy::Residual, LearnerKind::Lr, &quick(), &f.tier, &f.frame, &wb()).unwrap();
    let d = m.learner.n_features();
    m.learner = Learner::Lr(LinearModel::new(Array2::zeros((d, f.rooms.len())), Array1::zeros(f.rooms.len())).unwrap());
    let p = hybrid_predict(&m, &f.frame).unwrap();
    let phys = physics_only_predict(&f.tier, &f.frame).unwrap();
    assert_eq!(p, phys);
}

#[test]
fn residual_is_physics_plus_learner() {
    let f = fixture();
    let (m, _) = hybrid_fit(HybridStrategy::Residual, LearnerKind::Rf, &quick(), &f.tier, &f.frame, &wb()).unwrap();
    let sim = f.tier.simulate(&f.frame).unwrap();
    let g = m.learner.predict(m.design(&f.frame, &sim).unwrap().view()).unwrap();
    let p = hybrid_predict(&m, &f.frame).unwrap();
    let phys = physics_only_predict(&f.tier, &f.frame).unwrap();
    for (j, room) in f.rooms.iter().enumerate() {
        let name = prediction_column(room);
        for (i, (a, b)) in p.values(&name).unwrap().iter().zip(phys.values(&name).unwrap()).enumerate() {
            assert!((a - b - g[[i, j]]).abs() < 1e-12);
        }
    }
}

#[test]
fn simulation_is_shared_through_the_cache() {
    let f = fixture();
    let cache = SimCache::new();
    let s1 = cache.simulate(&f.tier, &f.frame).unwrap();
    let s2 = cache.simulate(&f.tier, &f.frame).unwrap();
    assert!(std::sync::Arc::ptr_eq(&s1, &s2));
    assert_eq!(cache.len(), 1);
    let (a, _) = hybrid_fit_with_sim(HybridStrategy::Assistant, LearnerKind::Lr, &quick(), &f.tier, &f.frame, &s1, &wb()).unwrap();
    let (r, _) = hybrid_fit_with_sim(HybridStrategy::Residual, LearnerKind::Lr, &quick(), &f.tier, &f.frame, &s2, &wb()).unwrap();
    assert_eq!(hybrid_predict_with_sim(&a, &f.frame, &s1).unwrap(), hybrid_predict(&a, &f.frame).unwrap());
    assert_eq!(hybrid_predict_with_sim(&r, &f.frame, &s2).unwrap(), hybrid_predict(&r, &f.frame).unwrap());
    assert_eq!(cache.len(), 1);
    cache.simulate(&f.archetype, &f.frame).unwrap();
    assert_eq!(cache.len(), 2);
}

#[test]
fn physics_only_aliases_simulation() {
    let f = fixture();
    let p = physics_only_predict(&f.tier, &f.frame).unwrap();
    let sim = f.tier.simulate(&f.frame).unwrap();
    for room in &f.rooms {
        assert_eq!(p.values(&prediction_column(room)).unwrap(), sim.values(&columns::simulated(room)).unwrap());
    }
    assert_eq!(p, physics_only_predict(&f.tier, &f.frame).unwrap());
    let a = physics_only_predict(&f.archetype, &f.frame).unwrap();
    let first = a.values(&prediction_column(&f.rooms[0])).unwrap();
    for room in &f.rooms[1..] {
        assert_eq!(a.values(&prediction_column(room)).unwrap(), first);
    }
}

#[test]
fn augmentation_without_finetune_is_surrogate() {
    let f = fixture();
    let mut cfg = quick();
    cfg.finetune.max_epochs = 0;
    cfg.warmstart_trees = 0;
    for kind in LearnerKind::ALL {
        let (s, _) = hybrid_fit(HybridStrategy::Surrogate, kind, &cfg, &f.tier, &f.frame, &wb()).unwrap();
        let (a, _) = hybrid_fit(HybridStrategy::Augmentation, kind, &cfg, &f.tier, &f.frame, &wb()).unwrap();
        assert_eq!(a.learner, s.learner, "{kind}");
        assert_eq!(hybrid_predict(&a, &f.frame).unwrap(), hybrid_predict(&s, &f.frame).unwrap());
    }
}

#[test]
fn strategies_learn_different_targets() {
    let f = fixture();
    let mut cfg = quick();
    cfg.linear = LinearOptions::default();
    let models: Vec<HybridModel> = HybridStrategy::ALL
        .into_iter()
        .map(|s| hybrid_fit(s, LearnerKind::Lr, &cfg, &f.tier, &f.frame, &wb()).unwrap().0)
        .collect();
    for i in 0..models.len() {
        for j in i + 1..models.len() {
            assert_ne!(models[i].learner, models[j].learner);
        }
    }
}

#[test]
fn augmentation_forest_grows_extra_trees() {
    let f = fixture();
    let (m, _) = hybrid_fit(HybridStrategy::Augmentation, LearnerKind::Rf, &quick(), &f.tier, &f.frame, &wb()).unwrap();
    let Learner::Rf(rf) = &m.learner else { panic!("expected RF") };
    assert_eq!(rf.trees.len(), 4 + 2);
}

#[test]
fn validation_errors() {
    let f = fixture();
    let wbr = ScenarioId::WBR.spec();
    assert!(hybrid_fit(HybridStrategy::Residual, LearnerKind::Lr, &quick(), &f.tier, &f.frame, &wbr).is_err());
    let drivers = f.frame.select(&feature_columns(&f.frame, &wb())).unwrap();
    let err = hybrid_fit(HybridStrategy::Residual, LearnerKind::Lr, &quick(), &f.tier, &drivers, &wb()).unwrap_err();
    assert!(matches!(err, Error::UnknownColumn(_)), "{err}");
}

#[test]
fn data_driven_baseline_ignores_physics() {
    let f = fixture();
    let (m, _) = data_driven_fit(LearnerKind::Lr, &quick(), &f.rooms, &f.frame, &wb()).unwrap();
    assert_eq!(m.learner.n_features(), feature_columns(&f.frame, &wb()).len());
    let p = data_driven_predict(&m, &f.frame).unwrap();
    assert_eq!(p.column_names(), f.rooms.iter().map(|r| prediction_column(r)).collect::<Vec<_>>());
}

#[test]
fn bundle_round_trip() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    for kind in LearnerKind::ALL {
        let (m, _) = hybrid_fit(HybridStrategy::Assistant, kind, &quick(), &f.tier, &f.frame, &wb()).unwrap();
        let path = dir.path().join(kind.as_str());
        save_bundle(&m, &path).unwrap();
        let back = load_bundle(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(hybrid_predict(&back, &f.frame).unwrap(), hybrid_predict(&m, &f.frame).unwrap());
    }
    assert!(matches!(load_bundle(&dir.path().join("missing")), Err(Error::MissingFile(_))));
}
