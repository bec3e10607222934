use gagsl::autodiff::{ParamGroup, Tape};
use gagsl::experiment::augment;
use gagsl::graph::{Dataset, Split};
use gagsl::harness::{evaluate, sbm_generate, SbmConfig};
use gagsl::structure::EstimatorConfig;
use gagsl::train::{train, train_gcn, Checkpoint, Phase, TrainSchedule, Trainer};
use gagsl::Error;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn dataset(nodes: usize, shift: f64, seed: u64) -> Dataset {
    let config = SbmConfig {
        nodes,
        feature_shift: shift,
        ..Default::default()
    };
    sbm_generate(&config, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn short(epochs: usize) -> TrainSchedule {
    TrainSchedule {
        epochs,
        seed: 3,
        ..Default::default()
    }
}

fn fit(data: &Dataset, schedule: &TrainSchedule) -> gagsl::train::TrainOutcome {
    let views = augment(data, &Default::default(), &Default::default()).unwrap();
    train(
        data,
        &views.structural,
        &views.diffusion.matrix,
        &EstimatorConfig::default(),
        schedule,
    )
    .unwrap()
}

#[test]
fn structure_loss_touches_only_theta() {
    let data = dataset(40, 1.0, 1);
    let views = augment(&data, &Default::default(), &Default::default()).unwrap();
    let schedule = short(1);
    let trainer = Trainer::new(
        &data,
        &views.structural,
        &views.diffusion.matrix,
        &Default::default(),
        &schedule,
    )
    .unwrap();
    let (theta, phi, omega) = trainer.init_params();
    let sample = trainer.sample(Phase::Structure, 0, 0);

    let mut tape = Tape::new();
    let tv = theta.bind(&mut tape, true);
    let pv = phi.bind(&mut tape, false);
    let ov = omega.bind(&mut tape, false);
    let loss = trainer.theta_loss(&mut tape, &tv, &pv, &ov, &sample, None);
    tape.backward(loss.total);
    assert!(tv
        .all()
        .iter()
        .any(|&v| tape.grad(v).is_some_and(|g| g.iter().any(|&x| x != 0.0))));
    assert!(pv
        .all()
        .iter()
        .chain(ov.all().iter())
        .all(|&v| tape.grad(v).is_none()));
}

#[test]
fn mi_loss_does_not_reach_the_classifier() {
    let data = dataset(40, 1.0, 2);
    let views = augment(&data, &Default::default(), &Default::default()).unwrap();
    let schedule = short(1);
    let trainer = Trainer::new(
        &data,
        &views.structural,
        &views.diffusion.matrix,
        &Default::default(),
        &schedule,
    )
    .unwrap();
    let (theta, phi, omega) = trainer.init_params();
    let (redefined, fused) = trainer.learner().materialize(&theta);
    let sample = trainer.sample(Phase::MutualInformation, 0, 0);

    let mut tape = Tape::new();
    let pv = phi.bind(&mut tape, true);
    let ov = omega.bind(&mut tape, true);
    let loss = trainer.phi_loss(&mut tape, &pv, &redefined, &fused, &sample, None);
    tape.backward(loss);
    for v in ov.all() {
        assert!(tape.grad(v).is_none_or(|g| g.iter().all(|&x| x == 0.0)));
    }
}

#[test]
fn samples_are_distinct_and_seeded() {
    let data = dataset(60, 1.0, 3);
    let views = augment(&data, &Default::default(), &Default::default()).unwrap();
    let schedule = TrainSchedule {
        contrastive_samples: Some(20),
        ..short(1)
    };
    let trainer = Trainer::new(
        &data,
        &views.structural,
        &views.diffusion.matrix,
        &Default::default(),
        &schedule,
    )
    .unwrap();
    let a = trainer.sample(Phase::Structure, 4, 0);
    let mut sorted = a.clone();
    sorted.sort_unstable();
    sorted.dedup();
    assert_eq!(sorted.len(), 20);
    assert!(a.iter().all(|&i| i < 60));
    assert_eq!(a, trainer.sample(Phase::Structure, 4, 0));
    assert_ne!(a, trainer.sample(Phase::Structure, 5, 0));
    assert_ne!(a, trainer.sample(Phase::MutualInformation, 4, 0));
}

#[test]
fn loss_traces_are_reproducible() {
    let data = dataset(60, 0.5, 4);
    let a = fit(&data, &short(4));
    let b = fit(&data, &short(4));
    assert_eq!(a.report, b.report);
    assert_eq!(a.a_star.matrix(), b.a_star.matrix());
}

#[test]
fn learns_a_separable_block_model() {
    let data = dataset(200, 1.0, 5);
    let outcome = fit(&data, &short(60));
    let cls = &outcome.report.cls;
    assert!(
        cls.last().unwrap() < cls.first().unwrap(),
        "classification loss did not fall: {cls:?}"
    );
    let train = data.indices(Split::Train);
    let logits = outcome.logits(data.graph.features());
    let acc = evaluate(&logits, data.labels(), &train).f1_micro;
    assert!(acc >= 0.95, "train accuracy {acc}");
}

#[test]
fn model_selection_keeps_the_first_best_epoch() {
    let data = dataset(80, 0.3, 6);
    let outcome = fit(&data, &short(12));
    let val = &outcome.report.val_f1_macro;
    assert_eq!(val.len(), 12);
    let best = val.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let first = val.iter().position(|&v| v == best).unwrap();
    assert_eq!(outcome.best_epoch, first);
    assert_eq!(outcome.report.best_epoch, Some(first));
}

#[test]
fn trace_lengths_follow_the_schedule() {
    let data = dataset(40, 1.0, 7);
    let schedule = TrainSchedule {
        structure_steps: 2,
        mi_steps: 3,
        classifier_steps: 1,
        ..short(3)
    };
    let r = fit(&data, &schedule).report;
    assert_eq!(r.structure_total.len(), 6);
    assert_eq!(r.structure_cls.len(), 6);
    assert_eq!(r.mi.len(), 9);
    assert_eq!(r.cls.len(), 3);
    for ((t, c), m) in r
        .structure_total
        .iter()
        .zip(&r.structure_cls)
        .zip(&r.structure_mi)
    {
        assert!((t - (c - schedule.beta * m)).abs() < 1e-12);
    }
}

#[test]
fn baseline_keeps_the_input_structure() {
    let data = dataset(40, 1.0, 8);
    let outcome = train_gcn(&data, &short(3)).unwrap();
    assert_eq!(outcome.a_star.matrix(), data.graph.adjacency());
    assert!(outcome.redefined.is_none());
    assert!(outcome.report.structure_total.is_empty() && outcome.report.mi.is_empty());
}

#[test]
fn checkpoint_round_trips() {
    let data = dataset(40, 1.0, 9);
    let checkpoint = fit(&data, &short(2)).checkpoint.unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("checkpoint.json");
    checkpoint.save(&path).unwrap();
    let loaded = Checkpoint::load(&path).unwrap();
    assert_eq!(loaded.theta, checkpoint.theta);
    assert_eq!(loaded.phi, checkpoint.phi);
    assert_eq!(loaded.omega, checkpoint.omega);
    assert_eq!(loaded.adam_theta.step_count(), 2);
    assert_eq!(
        serde_json::to_string(&loaded).unwrap(),
        serde_json::to_string(&checkpoint).unwrap()
    );

    let mut value: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    value["version"] = serde_json::json!(999);
    std::fs::write(&path, value.to_string()).unwrap();
    assert!(Checkpoint::load(&path).is_err());
}

#[test]
fn non_finite_features_stop_training_with_the_trace() {
    let clean = dataset(40, 1.0, 10);
    let mut x = clean.graph.features().clone();
    x[[0, 0]] = f64::NAN;
    let graph = clean.graph.with_features(x);
    // Construction may reject NaN outright; otherwise training must.
    let Ok(graph) = graph else { return };
    let data = clean.with_graph(graph).unwrap();
    let structural = Array2::zeros((40, 4));
    let diffusion = Array2::eye(40);
    let err = train(
        &data,
        &structural,
        &diffusion,
        &Default::default(),
        &short(2),
    )
    .unwrap_err();
    assert!(matches!(err, Error::NonFinite { .. }), "{err}");
}

#[test]
fn parameter_groups_are_consistent() {
    let data = dataset(40, 1.0, 11);
    let views = augment(&data, &Default::default(), &Default::default()).unwrap();
    let schedule = short(1);
    let trainer = Trainer::new(
        &data,
        &views.structural,
        &views.diffusion.matrix,
        &Default::default(),
        &schedule,
    )
    .unwrap();
    let (mut theta, mut phi, mut omega) = trainer.init_params();
    assert_eq!(theta.tensors().len(), 10);
    assert_eq!(phi.tensors().len(), 7);
    assert_eq!(omega.tensors().len(), 2);
    let shapes = |g: &dyn ParamGroup| g.tensors().iter().map(|t| t.dim()).collect::<Vec<_>>();
    let before = (shapes(&theta), shapes(&phi), shapes(&omega));
    assert_eq!(
        theta.tensors_mut().len() + phi.tensors_mut().len() + omega.tensors_mut().len(),
        19
    );
    assert_eq!(before, (shapes(&theta), shapes(&phi), shapes(&omega)));
}
