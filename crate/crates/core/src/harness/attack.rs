use ndarray::Array2;
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::graph::{Dataset, Graph};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    EdgeAdd,
    EdgeDelete,
    FeatureNoise,
}

impl AttackKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AttackKind::EdgeAdd => "edge_add",
            AttackKind::EdgeDelete => "edge_delete",
            AttackKind::FeatureNoise => "feature_noise",
        }
    }
}

impl std::str::FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edge_add" => Ok(AttackKind::EdgeAdd),
            "edge_delete" => Ok(AttackKind::EdgeDelete),
            "feature_noise" => Ok(AttackKind::FeatureNoise),
            other => Err(Error::Config(format!(
                "unknown attack `{other}` (expected edge_add, edge_delete or feature_noise)"
            ))),
        }
    }
}

/// A random poisoning perturbation. `rate` is an edge ratio relative to
/// `|E|` for edge attacks and the noise level `λ` for feature noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub rate: f64,
}

impl AttackSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match self.kind {
            AttackKind::EdgeAdd | AttackKind::FeatureNoise => {
                self.rate >= 0.0 && self.rate.is_finite()
            }
            AttackKind::EdgeDelete => (0.0..=1.0).contains(&self.rate),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid rate {} for {}",
                self.rate,
                self.kind.as_str()
            )))
        }
    }
}

/// Adds or deletes `floor(ratio * |E|)` undirected edges chosen uniformly.
/// Added edges have weight 1 and are drawn from all non-adjacent pairs.
pub fn attack_edges<R: Rng + ?Sized>(
    graph: &Graph,
    kind: AttackKind,
    ratio: f64,
    rng: &mut R,
) -> Result<Graph> {
    AttackSpec { kind, rate: ratio }.validate()?;
    let edges = graph.edges();
    let count = (ratio * edges.len() as f64).floor() as usize;
    let n = graph.node_count();
    let mut adjacency = graph.adjacency().clone();
    match kind {
        AttackKind::EdgeAdd => {
            let candidates: Vec<(usize, usize)> = (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .filter(|&(i, j)| adjacency[[i, j]] == 0.0)
                .collect();
            if count > candidates.len() {
                return Err(Error::InsufficientNonEdges {
                    requested: count,
                    available: candidates.len(),
                });
            }
            for k in index::sample(rng, candidates.len(), count) {
                let (i, j) = candidates[k];
                adjacency[[i, j]] = 1.0;
                adjacency[[j, i]] = 1.0;
            }
        }
        AttackKind::EdgeDelete => {
            for k in index::sample(rng, edges.len(), count) {
                let (i, j) = edges[k];
                adjacency[[i, j]] = 0.0;
                adjacency[[j, i]] = 0.0;
            }
        }
        AttackKind::FeatureNoise => {
            return Err(Error::Config(
                "attack_edges called with feature_noise".into(),
            ));
        }
    }
    graph.with_adjacency(adjacency)
}

/// Adds `λ r ε` to every feature entry, `ε ~ N(0, 1)` and `r` the mean over
/// nodes of the largest feature of each node.
pub fn attack_features<R: Rng + ?Sized>(graph: &Graph, lambda: f64, rng: &mut R) -> Result<Graph> {
    AttackSpec {
        kind: AttackKind::FeatureNoise,
        rate: lambda,
    }
    .validate()?;
    let x = graph.features();
    let n = x.nrows().max(1);
    let r = x
        .rows()
        .into_iter()
        .map(|row| row.fold(f64::NEG_INFINITY, |a, &b| a.max(b)))
        .filter(|v| v.is_finite())
        .sum::<f64>()
        / n as f64;
    let amplitude = lambda * r;
    let noisy = Array2::from_shape_fn(x.dim(), |(i, j)| {
        let eps: f64 = StandardNormal.sample(rng);
        x[[i, j]] + amplitude * eps
    });
    graph.with_features(noisy)
}

pub fn apply_attack<R: Rng + ?Sized>(
    dataset: &Dataset,
    attack: &AttackSpec,
    rng: &mut R,
) -> Result<Dataset> {
    let graph = match attack.kind {
        AttackKind::FeatureNoise => attack_features(&dataset.graph, attack.rate, rng)?,
        kind => attack_edges(&dataset.graph, kind, attack.rate, rng)?,
    };
    dataset.with_graph(graph)
}
