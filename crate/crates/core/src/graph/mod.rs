//! Graph and dataset model plus the dense linear algebra the rest of the
//! pipeline relies on.

mod io;
mod knn;
mod linalg;
mod normalize;

pub(crate) use io::read_labels;
pub use io::{load_dataset, read_matrix_csv, save_dataset, write_matrix_csv, DatasetPaths};
pub use knn::{knn_graph, Metric};
pub use linalg::{
    eigendecompose_sym, eigendecompose_sym_with, solve, JacobiOptions, SymmetricEigen,
};
pub use normalize::{
    gcn_normalize, normalize, normalized_laplacian, sym_normalized_transition, NormalizedOperators,
    DEGREE_FLOOR,
};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-9;

/// Undirected graph with dense adjacency and node features.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: Array2<f64>,
    features: Array2<f64>,
}

impl Graph {
    /// Validates and wraps an adjacency/feature pair. The adjacency must be
    /// square, symmetric, nonnegative, finite and have a zero diagonal.
    pub fn new(adjacency: Array2<f64>, features: Array2<f64>) -> Result<Self> {
        let n = adjacency.nrows();
        if adjacency.ncols() != n {
            return Err(Error::Validation(format!(
                "adjacency is {}x{}, expected square",
                n,
                adjacency.ncols()
            )));
        }
        if features.nrows() != n {
            return Err(Error::Validation(format!(
                "features have {} rows for {} nodes",
                features.nrows(),
                n
            )));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation("features contain NaN or Inf".into()));
        }
        for i in 0..n {
            if adjacency[[i, i]] != 0.0 {
                return Err(Error::Validation(format!(
                    "adjacency has a nonzero diagonal entry at node {i}"
                )));
            }
            for j in 0..n {
                let a = adjacency[[i, j]];
                if !a.is_finite() || a < 0.0 {
                    return Err(Error::Validation(format!(
                        "adjacency entry ({i},{j}) = {a} is negative or non-finite"
                    )));
                }
                if j > i && (a - adjacency[[j, i]]).abs() > SYMMETRY_TOL {
                    return Err(Error::Validation(format!(
                        "adjacency is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Graph {
            adjacency,
            features,
        })
    }

    /// Builds a 0/1 graph from an undirected edge list. Duplicates collapse
    /// and self-loops are dropped.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], features: Array2<f64>) -> Result<Self> {
        let mut adjacency = Array2::zeros((n, n));
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Validation(format!(
                    "edge ({u},{v}) references a node outside 0..{n}"
                )));
            }
            if u != v {
                adjacency[[u, v]] = 1.0;
                adjacency[[v, u]] = 1.0;
            }
        }
        Graph::new(adjacency, features)
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn adjacency(&self) -> &Array2<f64> {
        &self.adjacency
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    /// Undirected edges `(i, j)` with `i < j`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.node_count();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if self.adjacency[[i, j]] != 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.edges().len()
    }

    pub fn with_features(&self, features: Array2<f64>) -> Result<Self> {
        Graph::new(self.adjacency.clone(), features)
    }

    pub fn with_adjacency(&self, adjacency: Array2<f64>) -> Result<Self> {
        Graph::new(adjacency, self.features.clone())
    }

    pub fn into_parts(self) -> (Array2<f64>, Array2<f64>) {
        (self.adjacency, self.features)
    }
}

/// Role of a node in the semi-supervised split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
    None,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::None => "none",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            "none" => Ok(Split::None),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

/// A graph with integer labels and a train/val/test assignment per node.
///
/// Each node carries exactly one [`Split`], so the three masks are disjoint
/// by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graph: Graph,
    labels: Vec<usize>,
    splits: Vec<Split>,
    class_count: usize,
}

impl Dataset {
    pub fn new(
        graph: Graph,
        labels: Vec<usize>,
        splits: Vec<Split>,
        class_count: usize,
    ) -> Result<Self> {
        let n = graph.node_count();
        if labels.len() != n || splits.len() != n {
            return Err(Error::Validation(format!(
                "{} labels and {} split entries for {} nodes",
                labels.len(),
                splits.len(),
                n
            )));
        }
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= class_count) {
            return Err(Error::Validation(format!(
                "label {y} of node {i} is out of range for {class_count} classes"
            )));
        }
        if !splits.contains(&Split::Train) {
            return Err(Error::Validation("train mask is empty".into()));
        }
        Ok(Dataset {
            graph,
            labels,
            splits,
            class_count,
        })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        self.splits
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == split)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn mask(&self, split: Split) -> Vec<bool> {
        self.splits.iter().map(|&s| s == split).collect()
    }

    /// Same labels and split on a different (e.g. attacked) graph.
    pub fn with_graph(&self, graph: Graph) -> Result<Self> {
        Dataset::new(
            graph,
            self.labels.clone(),
            self.splits.clone(),
            self.class_count,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn from_edges_collapses_duplicates_and_self_loops() {
        let g = Graph::from_edges(3, &[(1, 2), (2, 1), (0, 0)], Array2::zeros((3, 1))).unwrap();
        assert_eq!(g.edges(), vec![(1, 2)]);
        assert_eq!(g.adjacency()[[1, 2]], 1.0);
        assert_eq!(g.adjacency()[[2, 1]], 1.0);
        assert_eq!(g.adjacency()[[0, 0]], 0.0);
    }

    #[test]
    fn rejects_asymmetric_and_negative() {
        let f = Array2::zeros((2, 1));
        assert!(Graph::new(array![[0.0, 1.0], [0.0, 0.0]], f.clone()).is_err());
        assert!(Graph::new(array![[0.0, -1.0], [-1.0, 0.0]], f.clone()).is_err());
        assert!(Graph::new(array![[0.0, f64::NAN], [f64::NAN, 0.0]], f).is_err());
    }

    #[test]
    fn dataset_validation() {
        let g = Graph::from_edges(2, &[(0, 1)], Array2::zeros((2, 1))).unwrap();
        assert!(Dataset::new(g.clone(), vec![0, 2], vec![Split::Train, Split::Test], 2).is_err());
        assert!(Dataset::new(g.clone(), vec![0, 1], vec![Split::Val, Split::Test], 2).is_err());
        let d = Dataset::new(g, vec![0, 1], vec![Split::Train, Split::Test], 2).unwrap();
        assert_eq!(d.indices(Split::Train), vec![0]);
        assert_eq!(d.mask(Split::Test), vec![false, true]);
    }
}
