//! Personalized PageRank diffusion `alpha (I - (1 - alpha) T)^{-1}` with
//! `T = D^{-1/2} A D^{-1/2}`.

use ndarray::Array2;

use crate::graph::{solve, sym_normalized_transition, Graph};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionMatrix {
    pub matrix: Array2<f64>,
    pub alpha: f64,
    /// Entries kept per row when sparsified.
    pub top_k: Option<usize>,
    /// `max |(I - (1 - alpha) T) (A_hat / alpha) - I|` at construction.
    pub residual: f64,
}

/// Dense closed-form PPR diffusion.
pub fn ppr_diffusion(graph: &Graph, alpha: f64) -> Result<DiffusionMatrix> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Validation(format!(
            "restart probability {alpha} outside (0, 1]"
        )));
    }
    let n = graph.node_count();
    let t = sym_normalized_transition(graph.adjacency());
    let system = Array2::<f64>::eye(n) - &t * (1.0 - alpha);
    let inverse = solve(&system, &Array2::eye(n))?;
    let residual = (system.dot(&inverse) - Array2::<f64>::eye(n))
        .iter()
        .fold(0.0_f64, |acc, x| acc.max(x.abs()));
    if residual > 1e-8 {
        log::warn!("ppr_diffusion: linear-system residual {residual:e}");
    }
    Ok(DiffusionMatrix {
        matrix: inverse * alpha,
        alpha,
        top_k: None,
        residual,
    })
}

/// Keeps the diagonal and the `k` largest off-diagonal entries of each row
/// (ties prefer the lower column), then symmetrizes with an elementwise max.
/// Kept weights are not renormalized.
pub fn sparsify_topk(diffusion: &DiffusionMatrix, k: usize) -> DiffusionMatrix {
    assert!(k >= 1, "sparsify_topk needs k >= 1");
    let m = &diffusion.matrix;
    let n = m.nrows();
    let mut kept = Array2::zeros((n, n));
    for i in 0..n {
        kept[[i, i]] = m[[i, i]];
        for j in top_k_row(m, i, k) {
            kept[[i, j]] = m[[i, j]];
        }
    }
    let sym = Array2::from_shape_fn((n, n), |(i, j)| kept[[i, j]].max(kept[[j, i]]));
    DiffusionMatrix {
        matrix: sym,
        alpha: diffusion.alpha,
        top_k: Some(k),
        residual: diffusion.residual,
    }
}

/// Column indices of the `k` largest off-diagonal entries of row `i`,
/// highest first, ties broken toward the lower column.
pub(crate) fn top_k_row(m: &Array2<f64>, i: usize, k: usize) -> Vec<usize> {
    let mut cols: Vec<usize> = (0..m.ncols()).filter(|&j| j != i).collect();
    cols.sort_by(|&a, &b| m[[i, b]].total_cmp(&m[[i, a]]).then(a.cmp(&b)));
    cols.truncate(k);
    cols
}

/// Like [`top_k_row`] but drops entries that are not strictly positive.
pub(crate) fn top_k_row_positive(m: &Array2<f64>, i: usize, k: usize) -> Vec<usize> {
    let mut cols: Vec<usize> = (0..m.ncols())
        .filter(|&j| j != i && m[[i, j]] > 0.0)
        .collect();
    cols.sort_by(|&a, &b| m[[i, b]].total_cmp(&m[[i, a]]).then(a.cmp(&b)));
    cols.truncate(k);
    cols
}
