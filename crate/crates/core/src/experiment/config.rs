use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::graph::Metric;
use crate::harness::{AttackSpec, SbmConfig};
use crate::structure::EstimatorConfig;
use crate::train::TrainSchedule;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnnSettings {
    pub k: usize,
    #[serde(default)]
    pub metric: Metric,
}

/// Where the base graph comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetSource {
    /// Synthetic block model, drawn from the `data` stream of the base seed.
    Sbm(SbmConfig),
    /// `edges.tsv`, `features.csv`, `labels.txt` and `splits.txt` in `dir`.
    /// With `knn` set, the edge file is replaced by a feature kNN graph.
    Files {
        dir: PathBuf,
        #[serde(default)]
        knn: Option<KnnSettings>,
    },
}

/// Structural-embedding settings. Explicit `scales` and `sample_points`
/// override the spectral defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveletSettings {
    pub scale_factors: Vec<f64>,
    pub sample_count: usize,
    pub t_max: f64,
    pub scales: Option<Vec<f64>>,
    pub sample_points: Option<Vec<f64>>,
}

impl Default for WaveletSettings {
    fn default() -> Self {
        WaveletSettings {
            scale_factors: vec![0.5, 2.0],
            sample_count: 8,
            t_max: 20.0,
            scales: None,
            sample_points: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffusionSettings {
    pub alpha: f64,
    /// Keep only this many off-diagonal entries per row.
    pub top_k: Option<usize>,
}

impl Default for DiffusionSettings {
    fn default() -> Self {
        DiffusionSettings {
            alpha: 0.15,
            top_k: None,
        }
    }
}

/// A complete, self-describing experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub trials: usize,
    /// Also train the plain-GCN baseline on every trial.
    #[serde(default = "yes")]
    pub baseline: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub dataset: DatasetSource,
    #[serde(default)]
    pub attacks: Vec<AttackSpec>,
    #[serde(default)]
    pub wavelet: WaveletSettings,
    #[serde(default)]
    pub diffusion: DiffusionSettings,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    /// `schedule.seed` is ignored: each trial derives its own seed.
    #[serde(default)]
    pub schedule: TrainSchedule,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

impl ExperimentConfig {
    /// Parses TOML. Relative dataset paths are resolved against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let DatasetSource::Files { dir, .. } = &mut config.dataset {
            if dir.is_relative() {
                *dir = base_dir.join(&*dir);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config is always representable as TOML")
    }

    /// Checks every numeric range and referenced path before any compute.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        match &self.dataset {
            DatasetSource::Sbm(sbm) => sbm.validate()?,
            DatasetSource::Files { knn, .. } => {
                if knn.as_ref().is_some_and(|k| k.k == 0) {
                    return Err(Error::Config("knn.k must be positive".into()));
                }
            }
        }
        for attack in &self.attacks {
            attack.validate()?;
        }
        let w = &self.wavelet;
        if w.scales.is_none()
            && (w.scale_factors.is_empty() || w.scale_factors.iter().any(|&f| f.is_nan() || f <= 0.0))
        {
            return Err(Error::Config(
                "wavelet.scale_factors must be nonempty and positive".into(),
            ));
        }
        if w.sample_points.is_none() && (w.sample_count == 0 || w.t_max.is_nan() || w.t_max < 0.0) {
            return Err(Error::Config(
                "wavelet.sample_count must be positive and t_max nonnegative".into(),
            ));
        }
        let d = &self.diffusion;
        if !(d.alpha > 0.0 && d.alpha <= 1.0) {
            return Err(Error::Config(format!(
                "diffusion.alpha must lie in (0, 1], got {}",
                d.alpha
            )));
        }
        if d.top_k == Some(0) {
            return Err(Error::Config("diffusion.top_k must be positive".into()));
        }
        self.estimator.validate()?;
        if let DatasetSource::Sbm(sbm) = &self.dataset {
            self.schedule.validate(sbm.nodes)?;
        }
        Ok(())
    }

    /// Canonical JSON form: object keys sorted, no whitespace.
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        serde_json::to_string(&value).expect("value serializes")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}
