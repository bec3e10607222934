use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::graph::{Dataset, Graph, Split};
use crate::{Error, Result};

/// Parameters of a planted-partition stochastic block model with Gaussian
/// class-dependent features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SbmConfig {
    pub nodes: usize,
    pub blocks: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    /// Feature means are `+shift` on a class's own coordinates
    /// (`j % blocks == class`) and `-shift` on the others.
    pub feature_shift: f64,
    pub train_fraction: f64,
    pub val_fraction: f64,
}

impl Default for SbmConfig {
    fn default() -> Self {
        SbmConfig {
            nodes: 200,
            blocks: 2,
            p_in: 0.1,
            p_out: 0.01,
            feature_dim: 16,
            feature_shift: 1.0,
            train_fraction: 0.1,
            val_fraction: 0.2,
        }
    }
}

impl SbmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.p_out && self.p_out <= self.p_in && self.p_in <= 1.0) {
            return Err(Error::Config(format!(
                "need 0 <= p_out <= p_in <= 1, got p_in={} p_out={}",
                self.p_in, self.p_out
            )));
        }
        if self.blocks == 0 || self.nodes / self.blocks < 2 {
            return Err(Error::Config(format!(
                "{} nodes in {} blocks leaves a block with fewer than 2 nodes",
                self.nodes, self.blocks
            )));
        }
        if self.feature_dim == 0 {
            return Err(Error::Config("feature_dim must be positive".into()));
        }
        let (t, v) = (self.train_fraction, self.val_fraction);
        if !(t > 0.0 && v >= 0.0 && t + v < 1.0) {
            return Err(Error::Config(format!(
                "invalid split fractions train={t} val={v}"
            )));
        }
        Ok(())
    }

    /// Block of node `i`: contiguous, sizes differing by at most one.
    pub fn block_of(&self, i: usize) -> usize {
        i * self.blocks / self.nodes
    }
}

/// Per class, shuffles the members and assigns the leading
/// `round(train_fraction * n_c)` (at least one) to train, the next
/// `round(val_fraction * n_c)` to validation and the rest to test.
pub fn stratified_split<R: Rng + ?Sized>(
    labels: &[usize],
    classes: usize,
    train_fraction: f64,
    val_fraction: f64,
    rng: &mut R,
) -> Vec<Split> {
    let mut splits = vec![Split::Test; labels.len()];
    for c in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(rng);
        let n = members.len() as f64;
        let n_train = ((train_fraction * n).round() as usize)
            .max(1)
            .min(members.len());
        let n_val = ((val_fraction * n).round() as usize).min(members.len() - n_train);
        for (k, &i) in members.iter().enumerate() {
            splits[i] = if k < n_train {
                Split::Train
            } else if k < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
        }
    }
    splits
}

pub fn sbm_generate<R: Rng + ?Sized>(config: &SbmConfig, rng: &mut R) -> Result<Dataset> {
    config.validate()?;
    let n = config.nodes;
    let labels: Vec<usize> = (0..n).map(|i| config.block_of(i)).collect();
    let mut adjacency = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let p = if labels[i] == labels[j] {
                config.p_in
            } else {
                config.p_out
            };
            if rng.random_bool(p) {
                adjacency[[i, j]] = 1.0;
                adjacency[[j, i]] = 1.0;
            }
        }
    }
    let features = Array2::from_shape_fn((n, config.feature_dim), |(i, j)| {
        let sign = if j % config.blocks == labels[i] {
            1.0
        } else {
            -1.0
        };
        let eps: f64 = StandardNormal.sample(rng);
        sign * config.feature_shift + eps
    });
    let splits = stratified_split(
        &labels,
        config.blocks,
        config.train_fraction,
        config.val_fraction,
        rng,
    );
    Dataset::new(
        Graph::new(adjacency, features)?,
        labels,
        splits,
        config.blocks,
    )
}
