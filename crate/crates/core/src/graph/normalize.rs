//! Degree-normalized operators.
//!
//! Self-loops only ever appear inside [`gcn_normalize`]; the raw adjacency
//! stored in a [`Graph`] keeps a zero diagonal.

use ndarray::{Array1, Array2};

use super::Graph;

/// Floor applied to degrees before taking `d^{-1/2}`.
pub const DEGREE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct NormalizedOperators {
    /// `D~^{-1/2} (A + I) D~^{-1/2}`.
    pub sym_norm_adj: Array2<f64>,
    /// `I - D^{-1/2} A D^{-1/2}`, with isolated nodes mapped to a zero row.
    pub laplacian: Array2<f64>,
    /// Row sums of `A` (no self-loops).
    pub degree: Array1<f64>,
}

pub fn normalize(graph: &Graph) -> NormalizedOperators {
    let a = graph.adjacency();
    NormalizedOperators {
        sym_norm_adj: gcn_normalize(a),
        laplacian: normalized_laplacian(a),
        degree: a.sum_axis(ndarray::Axis(1)),
    }
}

fn inv_sqrt_degrees(adjacency: &Array2<f64>, self_loop: f64) -> Vec<f64> {
    adjacency
        .rows()
        .into_iter()
        .map(|row| {
            let d: f64 = row.iter().sum::<f64>() + self_loop;
            1.0 / d.max(DEGREE_FLOOR).sqrt()
        })
        .collect()
}

/// GCN propagation operator `D~^{-1/2} (A + I) D~^{-1/2}` where `D~` holds
/// the row sums of `A + I`.
pub fn gcn_normalize(adjacency: &Array2<f64>) -> Array2<f64> {
    let n = adjacency.nrows();
    let r = inv_sqrt_degrees(adjacency, 1.0);
    Array2::from_shape_fn((n, n), |(i, j)| {
        let m = adjacency[[i, j]] + if i == j { 1.0 } else { 0.0 };
        r[i] * m * r[j]
    })
}

/// `D^{-1/2} A D^{-1/2}` with the degree floor; isolated nodes get zero rows.
pub fn sym_normalized_transition(adjacency: &Array2<f64>) -> Array2<f64> {
    let n = adjacency.nrows();
    let r = inv_sqrt_degrees(adjacency, 0.0);
    Array2::from_shape_fn((n, n), |(i, j)| r[i] * adjacency[[i, j]] * r[j])
}

/// Symmetric normalized Laplacian `D^{-1/2} (D - A) D^{-1/2}`.
///
/// Equals `I - D^{-1/2} A D^{-1/2}` on nodes with positive degree; an
/// isolated node contributes a zero row and column.
pub fn normalized_laplacian(adjacency: &Array2<f64>) -> Array2<f64> {
    let n = adjacency.nrows();
    let degree: Vec<f64> = adjacency.rows().into_iter().map(|r| r.sum()).collect();
    let r: Vec<f64> = degree
        .iter()
        .map(|d| 1.0 / d.max(DEGREE_FLOOR).sqrt())
        .collect();
    Array2::from_shape_fn((n, n), |(i, j)| {
        let d = if i == j { degree[i] } else { 0.0 };
        r[i] * (d - adjacency[[i, j]]) * r[j]
    })
}
