use ndarray::Array2;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::checkpoint::{Checkpoint, RngState, CHECKPOINT_VERSION};
use super::{
    classification_loss, classify, mi_loss, ClassifierParams, ClassifierVars, DropoutKey,
    PhiParams, PhiVars, TrainSchedule,
};
use crate::autodiff::{adam_step, AdamConfig, AdamState, ParamGroup, Tape, Var};
use crate::graph::{gcn_normalize, Dataset, Split};
use crate::harness::evaluate;
use crate::rng::{self, streams};
use crate::structure::{
    EstimatorConfig, FusedStructure, RedefinedStructure, StructureLearner, ThetaParams, ThetaVars,
};
use crate::{Error, Result};

/// The three alternating phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Structure,
    MutualInformation,
    Classifier,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Structure => "structure",
            Phase::MutualInformation => "mutual_information",
            Phase::Classifier => "classifier",
        }
    }

    fn stream(self) -> &'static str {
        match self {
            Phase::Structure => streams::THETA,
            Phase::MutualInformation => streams::PHI,
            Phase::Classifier => streams::OMEGA,
        }
    }

    fn id(self) -> u64 {
        self as u64
    }
}

/// Loss traces, one entry per completed step of the corresponding phase.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    /// `L_cls - β L_MI` during structure steps.
    pub structure_total: Vec<f64>,
    pub structure_cls: Vec<f64>,
    pub structure_mi: Vec<f64>,
    /// `L_MI` during MI-calculator steps.
    pub mi: Vec<f64>,
    /// `L_cls` during classifier steps.
    pub cls: Vec<f64>,
    /// Validation F1-macro after each epoch.
    pub val_f1_macro: Vec<f64>,
    pub best_epoch: Option<usize>,
}

/// `L_cls - β L_MI`.
pub fn structure_loss(tape: &mut Tape, l_cls: Var, l_mi: Var, beta: f64) -> Var {
    let weighted = tape.scale(l_mi, beta);
    tape.sub(l_cls, weighted)
}

/// Result of a training run: the selected structure and classifier.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub a_star: FusedStructure,
    /// Absent for the plain-GCN baseline.
    pub redefined: Option<RedefinedStructure>,
    pub classifier: ClassifierParams,
    pub report: LossReport,
    pub best_epoch: usize,
    /// Union of the estimators' candidate pairs, `(i, j)` with `i < j`.
    pub candidate_pairs: Vec<(usize, usize)>,
    pub checkpoint: Option<Checkpoint>,
}

impl TrainOutcome {
    /// Evaluation-mode logits of the selected classifier on the selected
    /// structure.
    pub fn logits(&self, features: &Array2<f64>) -> Array2<f64> {
        eval_logits(
            &gcn_normalize(self.a_star.matrix()),
            features,
            &self.classifier,
        )
    }
}

fn eval_logits(
    propagation: &Array2<f64>,
    features: &Array2<f64>,
    omega: &ClassifierParams,
) -> Array2<f64> {
    let mut tape = Tape::eval();
    let p = tape.constant(propagation.clone());
    let x = tape.constant(features.clone());
    let o = omega.bind(&mut tape, false);
    let z = classify(&mut tape, p, x, &o, 0.0, None);
    tape.value(z).clone()
}

fn checked(
    tape: &Tape,
    loss: Var,
    phase: Phase,
    epoch: usize,
    step: usize,
    report: &LossReport,
) -> Result<f64> {
    let value = tape.scalar(loss);
    if let Some(bad) = tape.non_finite() {
        log::error!(
            "non-finite {} at tape index {} during {} epoch {epoch} step {step}",
            bad.primitive,
            bad.index,
            phase.as_str()
        );
        return Err(Error::NonFinite {
            what: bad.primitive.to_string(),
            phase: phase.as_str(),
            epoch,
            step,
            report: Box::new(report.clone()),
        });
    }
    if !value.is_finite() {
        return Err(Error::NonFinite {
            what: "loss".into(),
            phase: phase.as_str(),
            epoch,
            step,
            report: Box::new(report.clone()),
        });
    }
    Ok(value)
}

/// State of the classifier phase, shared verbatim by the structure-learning
/// trainer and the plain-GCN baseline.
struct ClassifierTask<'a> {
    features: &'a Array2<f64>,
    labels: &'a [usize],
    train_idx: Vec<usize>,
    val_idx: Vec<usize>,
    schedule: &'a TrainSchedule,
}

impl<'a> ClassifierTask<'a> {
    fn new(dataset: &'a Dataset, schedule: &'a TrainSchedule) -> Result<Self> {
        let val_idx = dataset.indices(Split::Val);
        if val_idx.is_empty() {
            return Err(Error::Validation(
                "model selection needs at least one validation node".into(),
            ));
        }
        Ok(ClassifierTask {
            features: dataset.graph.features(),
            labels: dataset.labels(),
            train_idx: dataset.indices(Split::Train),
            val_idx,
            schedule,
        })
    }

    fn init(&self, classes: usize) -> (ClassifierParams, AdamState) {
        let s = self.schedule;
        let mut rng = rng::stream(s.seed, streams::OMEGA, rng::counter(&[]));
        let omega = ClassifierParams::init(self.features.ncols(), s.hidden, classes, &mut rng);
        let config = AdamConfig {
            weight_decay: s.weight_decay,
            ..AdamConfig::with_lr(s.lr_classifier)
        };
        let adam = AdamState::new(config, omega.tensors());
        (omega, adam)
    }

    fn key(&self, epoch: usize, step: usize) -> DropoutKey {
        DropoutKey {
            seed: self.schedule.seed,
            stream: Phase::Classifier.stream(),
            epoch: epoch as u64,
            step: step as u64,
        }
    }

    fn loss(
        &self,
        tape: &mut Tape,
        propagation: Var,
        omega: &ClassifierVars,
        key: Option<DropoutKey>,
    ) -> Var {
        let x = tape.constant(self.features.clone());
        let z = classify(
            tape,
            propagation,
            x,
            omega,
            self.schedule.classifier_dropout,
            key,
        );
        classification_loss(tape, z, self.labels, &self.train_idx)
    }

    fn epoch(
        &self,
        omega: &mut ClassifierParams,
        adam: &mut AdamState,
        propagation: &Array2<f64>,
        epoch: usize,
        report: &mut LossReport,
    ) -> Result<()> {
        for step in 0..self.schedule.classifier_steps {
            let mut tape = Tape::new();
            let p = tape.constant(propagation.clone());
            let vars = omega.bind(&mut tape, true);
            let loss = self.loss(&mut tape, p, &vars, Some(self.key(epoch, step)));
            let value = checked(&tape, loss, Phase::Classifier, epoch, step, report)?;
            tape.backward(loss);
            adam_step(adam, omega, &tape, &vars.all());
            report.cls.push(value);
        }
        Ok(())
    }

    fn validate(&self, omega: &ClassifierParams, propagation: &Array2<f64>) -> f64 {
        let logits = eval_logits(propagation, self.features, omega);
        evaluate(&logits, self.labels, &self.val_idx).f1_macro
    }
}

/// Scalar pieces of the structure objective.
#[derive(Debug, Clone, Copy)]
pub struct ThetaLoss {
    pub total: Var,
    pub cls: Var,
    pub mi: Var,
}

/// Alternating optimizer over a fixed (possibly attacked) dataset and its
/// precomputed augmentations.
pub struct Trainer<'a> {
    dataset: &'a Dataset,
    learner: StructureLearner,
    estimator: EstimatorConfig,
    schedule: &'a TrainSchedule,
    task: ClassifierTask<'a>,
}

impl<'a> Trainer<'a> {
    /// `structural` is the structural embedding `X̂` and `diffusion` the
    /// diffusion matrix `Â` of `dataset`'s graph.
    pub fn new(
        dataset: &'a Dataset,
        structural: &Array2<f64>,
        diffusion: &Array2<f64>,
        estimator: &EstimatorConfig,
        schedule: &'a TrainSchedule,
    ) -> Result<Self> {
        let n = dataset.node_count();
        schedule.validate(n)?;
        estimator.validate()?;
        if structural.nrows() != n || diffusion.dim() != (n, n) {
            return Err(Error::Validation(format!(
                "augmentations have shapes {:?} and {:?} for {n} nodes",
                structural.dim(),
                diffusion.dim()
            )));
        }
        let learner = StructureLearner::from_config(
            dataset.graph.adjacency(),
            diffusion,
            structural,
            dataset.graph.features(),
            estimator,
        );
        Ok(Trainer {
            dataset,
            learner,
            estimator: *estimator,
            schedule,
            task: ClassifierTask::new(dataset, schedule)?,
        })
    }

    pub fn learner(&self) -> &StructureLearner {
        &self.learner
    }

    /// Freshly initialized `(Θ, Φ, Ω)`.
    pub fn init_params(&self) -> (ThetaParams, PhiParams, ClassifierParams) {
        let s = self.schedule;
        let f = self.dataset.graph.feature_dim();
        let structural = self.learner.feature_view.propagated.ncols();
        let mut rng = rng::stream(s.seed, streams::THETA, rng::counter(&[]));
        let theta = ThetaParams::init(
            structural,
            f,
            self.estimator.hidden,
            self.estimator.mlp_hidden,
            &mut rng,
        );
        let mut rng = rng::stream(s.seed, streams::PHI, rng::counter(&[]));
        let phi = PhiParams::init(f, s.hidden, s.projection_dim, &mut rng);
        let (omega, _) = self.task.init(self.dataset.class_count());
        (theta, phi, omega)
    }

    /// Contrastive sample for one step, drawn without replacement.
    pub fn sample(&self, phase: Phase, epoch: usize, step: usize) -> Vec<usize> {
        let n = self.dataset.node_count();
        let b = self.schedule.sample_size(n);
        let mut rng = rng::stream(
            self.schedule.seed,
            streams::SAMPLING,
            rng::counter(&[phase.id(), epoch as u64, step as u64]),
        );
        index::sample(&mut rng, n, b).into_vec()
    }

    pub fn key(&self, phase: Phase, epoch: usize, step: usize) -> DropoutKey {
        DropoutKey {
            seed: self.schedule.seed,
            stream: phase.stream(),
            epoch: epoch as u64,
            step: step as u64,
        }
    }

    /// Structure objective `L_cls - β L_MI` as a function of Θ, with Φ and Ω
    /// bound by the caller.
    pub fn theta_loss(
        &self,
        tape: &mut Tape,
        theta: &ThetaVars,
        phi: &PhiVars,
        omega: &ClassifierVars,
        sample: &[usize],
        key: Option<DropoutKey>,
    ) -> ThetaLoss {
        let s = self.learner.forward(tape, theta);
        let p_star = tape.gcn_normalize(s.a_star);
        let cls = self.task.loss(tape, p_star, omega, key);
        let x = tape.constant(self.dataset.graph.features().clone());
        let mi = mi_loss(
            tape,
            s.a_star,
            s.a_r1,
            s.a_r2,
            x,
            phi,
            self.schedule.tau,
            sample,
            self.schedule.mi_dropout,
            key,
        );
        let total = structure_loss(tape, cls, mi, self.schedule.beta);
        ThetaLoss { total, cls, mi }
    }

    /// MI-calculator objective for fixed structures.
    pub fn phi_loss(
        &self,
        tape: &mut Tape,
        phi: &PhiVars,
        redefined: &RedefinedStructure,
        fused: &FusedStructure,
        sample: &[usize],
        key: Option<DropoutKey>,
    ) -> Var {
        let a = tape.constant(fused.0.clone());
        let r1 = tape.constant(redefined.a_r1.clone());
        let r2 = tape.constant(redefined.a_r2.clone());
        let x = tape.constant(self.dataset.graph.features().clone());
        mi_loss(
            tape,
            a,
            r1,
            r2,
            x,
            phi,
            self.schedule.tau,
            sample,
            self.schedule.mi_dropout,
            key,
        )
    }

    /// Classification loss for a fixed structure as a function of Ω.
    pub fn omega_loss(
        &self,
        tape: &mut Tape,
        structure: &Array2<f64>,
        omega: &ClassifierVars,
        key: Option<DropoutKey>,
    ) -> Var {
        let p = tape.constant(gcn_normalize(structure));
        self.task.loss(tape, p, omega, key)
    }

    pub fn run(&self) -> Result<TrainOutcome> {
        let s = self.schedule;
        let (mut theta, mut phi, _) = self.init_params();
        let (mut omega, mut adam_omega) = self.task.init(self.dataset.class_count());
        let mut adam_theta = AdamState::new(AdamConfig::with_lr(s.lr_structure), theta.tensors());
        let mut adam_phi = AdamState::new(AdamConfig::with_lr(s.lr_mi), phi.tensors());
        let mut report = LossReport::default();
        let mut best: Option<(
            f64,
            usize,
            FusedStructure,
            RedefinedStructure,
            ClassifierParams,
        )> = None;

        for epoch in 0..s.epochs {
            for step in 0..s.structure_steps {
                let sample = self.sample(Phase::Structure, epoch, step);
                let mut tape = Tape::new();
                let tv = theta.bind(&mut tape, true);
                let pv = phi.bind(&mut tape, false);
                let ov = omega.bind(&mut tape, false);
                let loss = self.theta_loss(
                    &mut tape,
                    &tv,
                    &pv,
                    &ov,
                    &sample,
                    Some(self.key(Phase::Structure, epoch, step)),
                );
                let total = checked(&tape, loss.total, Phase::Structure, epoch, step, &report)?;
                tape.backward(loss.total);
                adam_step(&mut adam_theta, &mut theta, &tape, &tv.all());
                report.structure_total.push(total);
                report.structure_cls.push(tape.scalar(loss.cls));
                report.structure_mi.push(tape.scalar(loss.mi));
            }
            let (redefined, fused) = self.learner.materialize(&theta);

            for step in 0..s.mi_steps {
                let sample = self.sample(Phase::MutualInformation, epoch, step);
                let mut tape = Tape::new();
                let pv = phi.bind(&mut tape, true);
                let key = self.key(Phase::MutualInformation, epoch, step);
                let loss = self.phi_loss(&mut tape, &pv, &redefined, &fused, &sample, Some(key));
                let value = checked(&tape, loss, Phase::MutualInformation, epoch, step, &report)?;
                tape.backward(loss);
                adam_step(&mut adam_phi, &mut phi, &tape, &pv.all());
                report.mi.push(value);
            }

            let propagation = gcn_normalize(fused.matrix());
            self.task.epoch(
                &mut omega,
                &mut adam_omega,
                &propagation,
                epoch,
                &mut report,
            )?;
            let f1 = self.task.validate(&omega, &propagation);
            report.val_f1_macro.push(f1);
            log::debug!("epoch {epoch}: val f1-macro {f1:.4}");
            if best.as_ref().is_none_or(|b| f1 > b.0) {
                best = Some((f1, epoch, fused, redefined, omega.clone()));
            }
        }

        let (_, best_epoch, a_star, redefined, classifier) = best.expect("at least one epoch");
        report.best_epoch = Some(best_epoch);
        let checkpoint = Checkpoint {
            version: CHECKPOINT_VERSION,
            schedule: s.clone(),
            estimator: self.estimator,
            theta,
            phi,
            omega: classifier.clone(),
            adam_theta,
            adam_phi,
            adam_omega,
            rng: RngState {
                seed: s.seed,
                epochs_completed: s.epochs,
            },
        };
        Ok(TrainOutcome {
            a_star,
            redefined: Some(redefined),
            classifier,
            report,
            best_epoch,
            candidate_pairs: self.learner.candidate_pairs(),
            checkpoint: Some(checkpoint),
        })
    }
}

/// Trains the full model. `structural` and `diffusion` are the
/// augmentations of `dataset`'s graph.
pub fn train(
    dataset: &Dataset,
    structural: &Array2<f64>,
    diffusion: &Array2<f64>,
    estimator: &EstimatorConfig,
    schedule: &TrainSchedule,
) -> Result<TrainOutcome> {
    Trainer::new(dataset, structural, diffusion, estimator, schedule)?.run()
}

/// Plain two-layer GCN on the given adjacency, running exactly the
/// classifier phase and model selection of [`train`].
pub fn train_gcn(dataset: &Dataset, schedule: &TrainSchedule) -> Result<TrainOutcome> {
    schedule.validate(dataset.node_count())?;
    let task = ClassifierTask::new(dataset, schedule)?;
    let (mut omega, mut adam) = task.init(dataset.class_count());
    let adjacency = dataset.graph.adjacency();
    let propagation = gcn_normalize(adjacency);
    let mut report = LossReport::default();
    let mut best: Option<(f64, usize, ClassifierParams)> = None;
    for epoch in 0..schedule.epochs {
        task.epoch(&mut omega, &mut adam, &propagation, epoch, &mut report)?;
        let f1 = task.validate(&omega, &propagation);
        report.val_f1_macro.push(f1);
        if best.as_ref().is_none_or(|b| f1 > b.0) {
            best = Some((f1, epoch, omega.clone()));
        }
    }
    let (_, best_epoch, classifier) = best.expect("at least one epoch");
    report.best_epoch = Some(best_epoch);
    Ok(TrainOutcome {
        a_star: FusedStructure(adjacency.clone()),
        redefined: None,
        classifier,
        report,
        best_epoch,
        candidate_pairs: Vec::new(),
        checkpoint: None,
    })
}
