use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Cosine,
    Euclidean,
}

impl Metric {
    /// Larger is more similar.
    fn similarity(self, a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
        match self {
            Metric::Cosine => {
                let na = a.dot(&a).sqrt().max(1e-12);
                let nb = b.dot(&b).sqrt().max(1e-12);
                a.dot(&b) / (na * nb)
            }
            Metric::Euclidean => -a
                .iter()
                .zip(b.iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
        }
    }
}

/// Symmetric 0/1 kNN adjacency over feature rows.
///
/// Node `i` links to its `k` most similar other nodes; ties go to the smaller
/// index. Links are union-symmetrized and self-loops never appear. `k >= N`
/// yields the complete graph.
pub fn knn_graph(features: &Array2<f64>, k: usize, metric: Metric) -> Result<Array2<f64>> {
    let n = features.nrows();
    if k == 0 {
        return Err(Error::Validation("knn_graph needs k >= 1".into()));
    }
    if n < 2 {
        return Err(Error::Validation("knn_graph needs at least 2 nodes".into()));
    }
    if k >= n {
        log::warn!("knn_graph: k = {k} >= N = {n}, returning the complete graph");
    }
    let keep = k.min(n - 1);
    let mut adj = Array2::zeros((n, n));
    for i in 0..n {
        let xi = features.row(i);
        let mut scored: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (metric.similarity(xi, features.row(j)), j))
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, j) in scored.iter().take(keep) {
            adj[[i, j]] = 1.0;
            adj[[j, i]] = 1.0;
        }
    }
    Ok(adj)
}
