use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{DatasetSource, DiffusionSettings, ExperimentConfig, WaveletSettings};
use crate::augment::{
    ppr_diffusion, sparsify_topk, structural_embedding_from_eigen, DiffusionMatrix, WaveletConfig,
};
use crate::graph::{
    eigendecompose_sym, knn_graph, load_dataset, normalized_laplacian, Dataset, DatasetPaths,
};
use crate::harness::{
    apply_attack, candidate_pair_means, evaluate, sbm_generate, Metrics, PairMeans,
};
use crate::rng::{self, streams};
use crate::train::{train, train_gcn, Checkpoint, LossReport, TrainSchedule};
use crate::Error;

/// Pipeline stage names reported on failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    LoadDataset,
    Attack,
    Augment,
    Train,
    Baseline,
    Output,
    PlotData,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::LoadDataset => "load_dataset",
            Stage::Attack => "attack",
            Stage::Augment => "augment",
            Stage::Train => "train",
            Stage::Baseline => "baseline",
            Stage::Output => "output",
            Stage::PlotData => "plot_data",
        }
    }

    /// Process exit code for a failure in this stage: 2 for problems with
    /// the user's inputs, 1 for everything else.
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Config | Stage::LoadDataset => 2,
            _ => 1,
        }
    }
}

/// An error tagged with the stage that produced it.
#[derive(Debug)]
pub struct StageError {
    pub stage: Stage,
    pub trial: Option<usize>,
    pub source: Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.trial {
            Some(t) => write!(
                f,
                "stage {} (trial {t}): {}",
                self.stage.as_str(),
                self.source
            ),
            None => write!(f, "stage {}: {}", self.stage.as_str(), self.source),
        }
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

pub(crate) trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, StageError>;
}

impl<T> AtStage<T> for crate::Result<T> {
    fn at(self, stage: Stage) -> Result<T, StageError> {
        self.map_err(|source| StageError {
            stage,
            trial: None,
            source,
        })
    }
}

/// Loads or generates the base dataset.
pub fn load_dataset_source(source: &DatasetSource, seed: u64) -> crate::Result<Dataset> {
    match source {
        DatasetSource::Sbm(config) => {
            sbm_generate(config, &mut rng::stream(seed, streams::DATA, 0))
        }
        DatasetSource::Files { dir, knn } => {
            let dataset = load_dataset(&DatasetPaths::in_dir(dir))?;
            match knn {
                None => Ok(dataset),
                Some(k) => {
                    let adjacency = knn_graph(dataset.graph.features(), k.k, k.metric)?;
                    dataset.with_graph(dataset.graph.with_adjacency(adjacency)?)
                }
            }
        }
    }
}

/// The two global views of a graph.
#[derive(Debug, Clone)]
pub struct Augmentations {
    pub structural: Array2<f64>,
    pub diffusion: DiffusionMatrix,
    pub wavelet: WaveletConfig,
}

pub fn augment(
    dataset: &Dataset,
    wavelet: &WaveletSettings,
    diffusion: &DiffusionSettings,
) -> crate::Result<Augmentations> {
    let graph = &dataset.graph;
    let eigen = eigendecompose_sym(&normalized_laplacian(graph.adjacency()))?;
    let gap = crate::augment::spectral_gap(&eigen.eigenvalues);
    let defaults = WaveletConfig::from_gap(
        gap,
        &wavelet.scale_factors,
        wavelet.sample_count,
        wavelet.t_max,
    );
    let config = WaveletConfig::new(
        wavelet
            .scales
            .clone()
            .unwrap_or_else(|| defaults.scales().to_vec()),
        wavelet
            .sample_points
            .clone()
            .unwrap_or_else(|| defaults.sample_points().to_vec()),
    )?;
    let structural = structural_embedding_from_eigen(&eigen, &config).into_inner();
    let mut diff = ppr_diffusion(graph, diffusion.alpha)?;
    if let Some(k) = diffusion.top_k {
        diff = sparsify_topk(&diff, k);
    }
    Ok(Augmentations {
        structural,
        diffusion: diff,
        wavelet: config,
    })
}

/// Everything one trial produces.
#[derive(Debug, Clone)]
pub struct TrialOutput {
    pub index: usize,
    pub seed: u64,
    pub metrics: Metrics,
    pub baseline: Option<Metrics>,
    pub report: LossReport,
    pub baseline_report: Option<LossReport>,
    pub best_epoch: usize,
    pub a_star: Array2<f64>,
    /// Graph after the configured attacks (equal to the base graph when
    /// there are none).
    pub attacked: Dataset,
    /// Mean `A*` weight over intra- and inter-community candidate pairs.
    pub pair_means: PairMeans,
    pub checkpoint: Option<Checkpoint>,
}

/// Attack, augment, train and evaluate one trial. Attacks are applied to
/// `base` before any training state exists.
pub fn run_trial(
    base: &Dataset,
    config: &ExperimentConfig,
    index: usize,
) -> Result<TrialOutput, StageError> {
    let seed = rng::trial_seed(config.seed, index);
    let tag = |e: StageError| StageError {
        trial: Some(index),
        ..e
    };
    let mut attacked = base.clone();
    for (k, attack) in config.attacks.iter().enumerate() {
        let mut r = rng::stream(seed, streams::ATTACK, k as u64);
        attacked = apply_attack(&attacked, attack, &mut r)
            .at(Stage::Attack)
            .map_err(tag)?;
    }
    let views = augment(&attacked, &config.wavelet, &config.diffusion)
        .at(Stage::Augment)
        .map_err(tag)?;
    let schedule = TrainSchedule {
        seed,
        ..config.schedule.clone()
    };
    let outcome = train(
        &attacked,
        &views.structural,
        &views.diffusion.matrix,
        &config.estimator,
        &schedule,
    )
    .at(Stage::Train)
    .map_err(tag)?;
    let test = attacked.indices(crate::graph::Split::Test);
    let features = attacked.graph.features();
    let metrics = evaluate(&outcome.logits(features), attacked.labels(), &test);
    let (baseline, baseline_report) = if config.baseline {
        let gcn = train_gcn(&attacked, &schedule)
            .at(Stage::Baseline)
            .map_err(tag)?;
        (
            Some(evaluate(&gcn.logits(features), attacked.labels(), &test)),
            Some(gcn.report),
        )
    } else {
        (None, None)
    };
    let pair_means = candidate_pair_means(
        outcome.a_star.matrix(),
        &outcome.candidate_pairs,
        attacked.labels(),
    );
    log::info!(
        "trial {index}: f1-micro {:.4}{}",
        metrics.f1_micro,
        baseline
            .map(|b| format!(" (gcn {:.4})", b.f1_micro))
            .unwrap_or_default()
    );
    Ok(TrialOutput {
        index,
        seed,
        metrics,
        baseline,
        report: outcome.report,
        baseline_report,
        best_epoch: outcome.best_epoch,
        a_star: outcome.a_star.0,
        attacked,
        pair_means,
        checkpoint: outcome.checkpoint,
    })
}
