//! Experiment orchestration: configuration, the per-trial pipeline
//! (attack, augment, train, evaluate), run directories with manifests, attack
//! sweeps and plot-data emission.

mod check;
mod config;
mod pipeline;
mod run;

pub use check::{self_check, CheckOutcome};
pub use config::{
    DatasetSource, DiffusionSettings, ExperimentConfig, KnnSettings, WaveletSettings,
};
pub use pipeline::{
    augment, load_dataset_source, run_trial, Augmentations, Stage, StageError, TrialOutput,
};
pub use run::{
    emit_plot_data, run_attack_sweep, run_experiment, ExperimentResult, FileRecord, PlotData,
    RunManifest, RunStatus, SweepReport, SweepRow,
};
