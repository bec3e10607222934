use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::pipeline::AtStage;
use super::{load_dataset_source, run_trial, ExperimentConfig, Stage, StageError, TrialOutput};
use crate::graph::{read_matrix_csv, write_matrix_csv};
use crate::harness::{
    community_prob_matrix, weight_histogram, AttackKind, AttackSpec, MetricsReport, PairMeans,
};
use crate::train::{LossReport, CHECKPOINT_VERSION};
use crate::{Error, Result};

pub const MANIFEST: &str = "manifest.json";
const METRICS: &str = "metrics.json";
const TRACES: &str = "traces.json";
const LABELS: &str = "labels.txt";
const ORIGINAL: &str = "original_adjacency.csv";
const ATTACKED: &str = "attacked_adjacency.csv";
const LEARNED: &str = "a_star.csv";
const QUALITY: &str = "structure_quality.json";
const CHECKPOINT: &str = "checkpoint.json";
const CONFIG: &str = "config.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Complete,
    Failed,
}

/// One output file with its SHA-256 checksum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Written before any compute and finalized afterwards. `config` records
/// every default, so the run can be reproduced from the manifest alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub status: RunStatus,
    pub config_hash: String,
    pub versions: BTreeMap<String, String>,
    pub base_seed: u64,
    pub trial_seeds: Vec<u64>,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
    pub attacked: bool,
    pub failed_stage: Option<Stage>,
    pub error: Option<String>,
    pub outputs: Vec<FileRecord>,
    pub config: ExperimentConfig,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn sha256_file(path: &Path) -> Result<(String, u64)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok((hex::encode(Sha256::digest(&bytes)), bytes.len() as u64))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

impl RunManifest {
    fn start(config: &ExperimentConfig) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("gagsl".to_string(), env!("CARGO_PKG_VERSION").to_string());
        versions.insert("checkpoint".to_string(), CHECKPOINT_VERSION.to_string());
        RunManifest {
            status: RunStatus::Running,
            config_hash: config.hash(),
            versions,
            base_seed: config.seed,
            trial_seeds: (0..config.trials)
                .map(|i| crate::rng::trial_seed(config.seed, i))
                .collect(),
            started_unix: now(),
            finished_unix: None,
            attacked: !config.attacks.is_empty(),
            failed_stage: None,
            error: None,
            outputs: Vec::new(),
            config: config.clone(),
        }
    }

    pub fn load(run_dir: &Path) -> Result<Self> {
        read_json(&run_dir.join(MANIFEST))
    }

    fn save(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(MANIFEST), self)
    }

    fn record(&mut self, dir: &Path, name: &str) -> Result<()> {
        let (sha256, bytes) = sha256_file(&dir.join(name))?;
        self.outputs.retain(|r| r.path != name);
        self.outputs.push(FileRecord {
            path: name.to_string(),
            sha256,
            bytes,
        });
        Ok(())
    }

    /// Marks the run failed, keeping whatever outputs exist.
    fn fail(&mut self, dir: &Path, err: &StageError) {
        self.status = RunStatus::Failed;
        self.failed_stage = Some(err.stage);
        self.error = Some(err.to_string());
        self.finished_unix = Some(now());
        if let Err(e) = self.save(dir) {
            log::error!("could not write manifest: {e}");
        }
    }

    /// Recomputes the checksum of every recorded output.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for record in &self.outputs {
            let path = dir.join(&record.path);
            if !path.exists() {
                return Err(Error::Integrity {
                    file: path,
                    reason: "file listed in the manifest is missing".into(),
                });
            }
            let (sha, _) = sha256_file(&path)?;
            if sha != record.sha256 {
                return Err(Error::Integrity {
                    file: path,
                    reason: format!(
                        "checksum {sha} does not match the recorded {}",
                        record.sha256
                    ),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MetricsFile {
    gagsl: MetricsReport,
    gcn: Option<MetricsReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TraceEntry {
    trial: usize,
    seed: u64,
    best_epoch: usize,
    gagsl: LossReport,
    gcn: Option<LossReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct QualityEntry {
    trial: usize,
    candidate_pairs: PairMeans,
}

/// A finished experiment: the manifest plus in-memory trial results.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub manifest: RunManifest,
    pub gagsl: MetricsReport,
    pub baseline: Option<MetricsReport>,
    pub trials: Vec<TrialOutput>,
}

fn reports(trials: &[TrialOutput]) -> (MetricsReport, Option<MetricsReport>) {
    let seeds: Vec<u64> = trials.iter().map(|t| t.seed).collect();
    let gagsl = MetricsReport::new(seeds.clone(), trials.iter().map(|t| t.metrics).collect());
    let baseline = trials
        .iter()
        .map(|t| t.baseline)
        .collect::<Option<Vec<_>>>()
        .map(|b| MetricsReport::new(seeds, b));
    (gagsl, baseline)
}

fn run_trials(
    config: &ExperimentConfig,
    dataset: &crate::graph::Dataset,
) -> std::result::Result<Vec<TrialOutput>, StageError> {
    let results: Vec<_> = (0..config.trials)
        .into_par_iter()
        .map(|i| run_trial(dataset, config, i))
        .collect();
    results.into_iter().collect()
}

fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let text: String = labels.iter().map(|l| format!("{l}\n")).collect();
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_outputs(
    dir: &Path,
    manifest: &mut RunManifest,
    base: &crate::graph::Dataset,
    trials: &[TrialOutput],
    gagsl: &MetricsReport,
    baseline: &Option<MetricsReport>,
) -> Result<()> {
    write_json(
        &dir.join(METRICS),
        &MetricsFile {
            gagsl: gagsl.clone(),
            gcn: baseline.clone(),
        },
    )?;
    manifest.record(dir, METRICS)?;
    let traces: Vec<TraceEntry> = trials
        .iter()
        .map(|t| TraceEntry {
            trial: t.index,
            seed: t.seed,
            best_epoch: t.best_epoch,
            gagsl: t.report.clone(),
            gcn: t.baseline_report.clone(),
        })
        .collect();
    write_json(&dir.join(TRACES), &traces)?;
    manifest.record(dir, TRACES)?;
    let quality: Vec<QualityEntry> = trials
        .iter()
        .map(|t| QualityEntry {
            trial: t.index,
            candidate_pairs: t.pair_means,
        })
        .collect();
    write_json(&dir.join(QUALITY), &quality)?;
    manifest.record(dir, QUALITY)?;

    write_labels(&dir.join(LABELS), base.labels())?;
    manifest.record(dir, LABELS)?;
    write_matrix_csv(&dir.join(ORIGINAL), base.graph.adjacency())?;
    manifest.record(dir, ORIGINAL)?;
    let first = &trials[0];
    if manifest.attacked {
        write_matrix_csv(&dir.join(ATTACKED), first.attacked.graph.adjacency())?;
        manifest.record(dir, ATTACKED)?;
    }
    write_matrix_csv(&dir.join(LEARNED), &first.a_star)?;
    manifest.record(dir, LEARNED)?;
    if let Some(cp) = &first.checkpoint {
        cp.save(&dir.join(CHECKPOINT))?;
        manifest.record(dir, CHECKPOINT)?;
    }
    Ok(())
}

/// Runs every trial of `config` and writes the run directory `out_dir`.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_dir: &Path,
) -> std::result::Result<ExperimentResult, StageError> {
    config.validate().at(Stage::Config)?;
    fs::create_dir_all(out_dir)
        .map_err(|e| Error::io(out_dir, e))
        .at(Stage::Output)?;
    let mut manifest = RunManifest::start(config);
    manifest.save(out_dir).at(Stage::Output)?;
    fs::write(out_dir.join(CONFIG), config.to_toml())
        .map_err(|e| Error::io(out_dir.join(CONFIG), e))
        .at(Stage::Output)?;
    manifest.record(out_dir, CONFIG).at(Stage::Output)?;

    let outcome = (|| {
        let base = load_dataset_source(&config.dataset, config.seed).at(Stage::LoadDataset)?;
        let trials = run_trials(config, &base)?;
        let (gagsl, baseline) = reports(&trials);
        write_outputs(out_dir, &mut manifest, &base, &trials, &gagsl, &baseline)
            .at(Stage::Output)?;
        Ok((trials, gagsl, baseline))
    })();
    match outcome {
        Ok((trials, gagsl, baseline)) => {
            manifest.status = RunStatus::Complete;
            manifest.finished_unix = Some(now());
            manifest.save(out_dir).at(Stage::Output)?;
            Ok(ExperimentResult {
                manifest,
                gagsl,
                baseline,
                trials,
            })
        }
        Err(e) => {
            manifest.fail(out_dir, &e);
            Err(e)
        }
    }
}

/// One `(model, rate)` line of a sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub model: String,
    pub attack: AttackKind,
    pub rate: f64,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config_hash: String,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "model,attack,rate,trials,auc_mean,auc_std,f1_macro_mean,f1_macro_std,f1_micro_mean,f1_micro_std\n",
        );
        for r in &self.rows {
            let m = &r.report;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.model,
                r.attack.as_str(),
                r.rate,
                m.trials,
                m.auc.mean,
                m.auc.std,
                m.f1_macro.mean,
                m.f1_macro.std,
                m.f1_micro.mean,
                m.f1_micro.std
            ));
        }
        out
    }
}

/// Runs the full model and the GCN baseline at every rate of one attack
/// kind, on identical attacked graphs, and writes `sweep.csv` and
/// `sweep.json` to `out_dir`. Attacks listed in `config` are replaced.
pub fn run_attack_sweep(
    config: &ExperimentConfig,
    kind: AttackKind,
    rates: &[f64],
    out_dir: &Path,
) -> std::result::Result<SweepReport, StageError> {
    if rates.is_empty() {
        return Err(Error::Config("sweep needs at least one rate".into())).at(Stage::Config);
    }
    let configs: Vec<ExperimentConfig> = rates
        .iter()
        .map(|&rate| ExperimentConfig {
            attacks: vec![AttackSpec { kind, rate }],
            baseline: true,
            ..config.clone()
        })
        .collect();
    for c in &configs {
        c.validate().at(Stage::Config)?;
    }
    fs::create_dir_all(out_dir)
        .map_err(|e| Error::io(out_dir, e))
        .at(Stage::Output)?;
    let base = load_dataset_source(&config.dataset, config.seed).at(Stage::LoadDataset)?;
    let jobs: Vec<(usize, usize)> = (0..rates.len())
        .flat_map(|r| (0..config.trials).map(move |t| (r, t)))
        .collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(r, t)| run_trial(&base, &configs[r], t))
        .collect();
    let results: Vec<TrialOutput> = results.into_iter().collect::<std::result::Result<_, _>>()?;
    let mut gagsl_rows = Vec::new();
    let mut gcn_rows = Vec::new();
    for (r, &rate) in rates.iter().enumerate() {
        let trials: Vec<TrialOutput> = results[r * config.trials..(r + 1) * config.trials].to_vec();
        let (g, b) = reports(&trials);
        gagsl_rows.push(SweepRow {
            model: "gagsl".into(),
            attack: kind,
            rate,
            report: g,
        });
        gcn_rows.push(SweepRow {
            model: "gcn".into(),
            attack: kind,
            rate,
            report: b.expect("sweeps always train the baseline"),
        });
    }
    gagsl_rows.extend(gcn_rows);
    let report = SweepReport {
        config_hash: config.hash(),
        rows: gagsl_rows,
    };
    let csv = out_dir.join("sweep.csv");
    fs::write(&csv, report.to_csv())
        .map_err(|e| Error::io(&csv, e))
        .at(Stage::Output)?;
    write_json(&out_dir.join("sweep.json"), &report).at(Stage::Output)?;
    Ok(report)
}

/// Files written by [`emit_plot_data`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlotData {
    pub heatmaps: Vec<PathBuf>,
    pub histogram: PathBuf,
}

fn read_labels(path: &Path) -> Result<Vec<usize>> {
    Ok(crate::graph::read_labels(path)?
        .into_iter()
        .map(|l| l as usize)
        .collect())
}

/// Community-probability heatmaps of the original, attacked (if any) and
/// learned structures, plus intra/inter histograms of the learned weights.
pub fn emit_plot_data(run_dir: &Path) -> std::result::Result<PlotData, StageError> {
    let manifest = RunManifest::load(run_dir).at(Stage::PlotData)?;
    if manifest.status != RunStatus::Complete {
        return Err(Error::Validation(format!(
            "run in {} is not complete",
            run_dir.display()
        )))
        .at(Stage::PlotData);
    }
    let mut required = vec![LABELS, ORIGINAL, LEARNED];
    if manifest.attacked {
        required.push(ATTACKED);
    }
    let missing: Vec<&str> = required
        .iter()
        .copied()
        .filter(|f| !run_dir.join(f).exists() || !manifest.outputs.iter().any(|r| r.path == *f))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Validation(format!(
            "missing artifacts: {}",
            missing.join(", ")
        )))
        .at(Stage::PlotData);
    }
    manifest.verify(run_dir).at(Stage::PlotData)?;

    let labels = read_labels(&run_dir.join(LABELS)).at(Stage::PlotData)?;
    let communities = labels.iter().max().map_or(0, |m| m + 1);
    let mut heatmaps = Vec::new();
    let mut sources = vec![("original", ORIGINAL)];
    if manifest.attacked {
        sources.push(("attacked", ATTACKED));
    }
    sources.push(("learned", LEARNED));
    let mut learned = None;
    for (name, file) in sources {
        let m = read_matrix_csv(&run_dir.join(file)).at(Stage::PlotData)?;
        if m.nrows() != labels.len() {
            return Err(Error::Integrity {
                file: run_dir.join(file),
                reason: format!("{} rows for {} labelled nodes", m.nrows(), labels.len()),
            })
            .at(Stage::PlotData);
        }
        let out = run_dir.join(format!("heatmap_{name}.csv"));
        write_matrix_csv(&out, &community_prob_matrix(&m, &labels, communities))
            .at(Stage::PlotData)?;
        heatmaps.push(out);
        if name == "learned" {
            learned = Some(m);
        }
    }
    let learned = learned.expect("learned structure is always read");
    let histogram = run_dir.join("histogram.json");
    write_json(&histogram, &weight_histogram(&learned, &labels, 10)).at(Stage::PlotData)?;
    Ok(PlotData {
        heatmaps,
        histogram,
    })
}
