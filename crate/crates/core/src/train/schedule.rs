use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Alternating-optimization schedule and optimizer settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSchedule {
    /// Outer epochs `T`.
    pub epochs: usize,
    /// Structure-estimator steps per epoch `T_v`.
    pub structure_steps: usize,
    /// MI-calculator steps per epoch `T_m`.
    pub mi_steps: usize,
    /// Classifier steps per epoch `T_c`.
    pub classifier_steps: usize,
    pub lr_structure: f64,
    pub lr_mi: f64,
    pub lr_classifier: f64,
    /// Decoupled weight decay applied to the classifier only.
    pub weight_decay: f64,
    pub beta: f64,
    pub tau: f64,
    /// Contrastive sample count `B`; `None` means `min(N, 256)`.
    pub contrastive_samples: Option<usize>,
    pub classifier_dropout: f64,
    pub mi_dropout: f64,
    pub hidden: usize,
    pub projection_dim: usize,
    pub seed: u64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            epochs: 100,
            structure_steps: 1,
            mi_steps: 1,
            classifier_steps: 1,
            lr_structure: 0.01,
            lr_mi: 0.01,
            lr_classifier: 0.01,
            weight_decay: 5e-4,
            beta: 0.1,
            tau: 0.5,
            contrastive_samples: None,
            classifier_dropout: 0.5,
            mi_dropout: 0.2,
            hidden: 16,
            projection_dim: 16,
            seed: 0,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self, nodes: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.epochs == 0
            || self.structure_steps == 0
            || self.mi_steps == 0
            || self.classifier_steps == 0
        {
            return bad("epoch counts must be at least 1".into());
        }
        for (name, lr) in [
            ("lr_structure", self.lr_structure),
            ("lr_mi", self.lr_mi),
            ("lr_classifier", self.lr_classifier),
        ] {
            if !(lr > 0.0 && lr.is_finite()) {
                return bad(format!("{name} must be positive, got {lr}"));
            }
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be nonnegative, got {}", self.beta));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return bad(format!(
                "weight_decay must be nonnegative, got {}",
                self.weight_decay
            ));
        }
        for (name, p) in [
            ("classifier_dropout", self.classifier_dropout),
            ("mi_dropout", self.mi_dropout),
        ] {
            if !(0.0..1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1), got {p}"));
            }
        }
        if self.hidden == 0 || self.projection_dim == 0 {
            return bad("hidden and projection_dim must be positive".into());
        }
        let b = self.sample_size(nodes);
        if b < 2 || b > nodes {
            return bad(format!(
                "contrastive sample count {b} must lie in [2, {nodes}]"
            ));
        }
        Ok(())
    }

    pub fn sample_size(&self, nodes: usize) -> usize {
        self.contrastive_samples.unwrap_or(nodes.min(256))
    }
}
