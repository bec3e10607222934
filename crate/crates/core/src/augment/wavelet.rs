//! Heat-kernel spectral wavelets summarized by their empirical
//! characteristic functions.
//!
//! For scale `s` the wavelet centred on node `i` is
//! `psi = U diag(exp(-lambda s)) U^T e_i`, with `(lambda, U)` the spectrum of
//! the normalized Laplacian. Treating the `N` coefficients of `psi` as a
//! sample, node `i` is described by `phi(t) = mean_n exp(-i psi[n] t)`
//! evaluated on a grid of `t` values, for every scale.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::graph::{eigendecompose_sym, normalize, Graph, SymmetricEigen};
use crate::{Error, Result};

/// Eigenvalues below this are treated as zero when locating the spectral gap.
const ZERO_EIGENVALUE: f64 = 1e-8;
const GAP_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletConfig {
    scales: Vec<f64>,
    sample_points: Vec<f64>,
}

impl WaveletConfig {
    pub fn new(scales: Vec<f64>, sample_points: Vec<f64>) -> Result<Self> {
        if scales.is_empty() || sample_points.is_empty() {
            return Err(Error::Validation(
                "wavelet config needs at least one scale and one sample point".into(),
            ));
        }
        if scales.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::Validation(
                "wavelet scales must be positive and finite".into(),
            ));
        }
        if scales.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation(
                "wavelet scales must be strictly ascending".into(),
            ));
        }
        if sample_points.iter().any(|t| !t.is_finite())
            || sample_points.windows(2).any(|w| w[0] > w[1])
        {
            return Err(Error::Validation(
                "sample points must be finite and ascending".into(),
            ));
        }
        Ok(WaveletConfig {
            scales,
            sample_points,
        })
    }

    /// Scales `{0.5, 2.0} / gap` and 8 points evenly spaced on `[0, 20]`.
    pub fn spectral_default(eigenvalues: &Array1<f64>) -> Self {
        Self::from_gap(spectral_gap(eigenvalues), &[0.5, 2.0], 8, 20.0)
    }

    pub fn from_gap(gap: f64, factors: &[f64], sample_count: usize, t_max: f64) -> Self {
        let scales = factors.iter().map(|f| f / gap).collect();
        let sample_points = if sample_count == 1 {
            vec![0.0]
        } else {
            (0..sample_count)
                .map(|j| t_max * j as f64 / (sample_count - 1) as f64)
                .collect()
        };
        WaveletConfig {
            scales,
            sample_points,
        }
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn sample_points(&self) -> &[f64] {
        &self.sample_points
    }

    /// Embedding width `2 * d * m`.
    pub fn width(&self) -> usize {
        2 * self.scales.len() * self.sample_points.len()
    }
}

/// Smallest eigenvalue above numerical zero, floored at `1e-3`.
pub fn spectral_gap(eigenvalues: &Array1<f64>) -> f64 {
    let gap = eigenvalues
        .iter()
        .copied()
        .filter(|&l| l > ZERO_EIGENVALUE)
        .fold(f64::INFINITY, f64::min);
    if gap.is_finite() {
        gap.max(GAP_FLOOR)
    } else {
        GAP_FLOOR
    }
}

/// `N x (2 d m)` structural-role features; entries lie in `[-1, 1]`.
///
/// Columns are grouped by scale; within a scale each sample point
/// contributes an adjacent `(Re, Im)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralEmbedding(pub Array2<f64>);

impl StructuralEmbedding {
    pub fn matrix(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

/// All wavelets at scale `s`: column `i` is the wavelet centred on node `i`.
pub fn wavelet_matrix(eigen: &SymmetricEigen, s: f64) -> Array2<f64> {
    let u = &eigen.eigenvectors;
    let g = eigen.eigenvalues.mapv(|l| (-l * s).exp());
    let scaled = u * &g;
    scaled.dot(&u.t())
}

/// Wavelet centred on `node` at scale `s`.
pub fn heat_wavelet(eigen: &SymmetricEigen, s: f64, node: usize) -> Array1<f64> {
    let u = &eigen.eigenvectors;
    assert!(node < u.nrows(), "heat_wavelet: node {node} out of range");
    if s == 0.0 {
        // The kernel is identically 1, so U U^T is the identity; skip the
        // round trip through the eigenvectors and return the exact one-hot.
        let mut delta = Array1::zeros(u.nrows());
        delta[node] = 1.0;
        return delta;
    }
    let coeffs = Array1::from_shape_fn(u.ncols(), |k| {
        (-eigen.eigenvalues[k] * s).exp() * u[[node, k]]
    });
    u.dot(&coeffs)
}

/// `(mean cos(psi t), -mean sin(psi t))`, the empirical characteristic
/// function of the coefficients with an `exp(-i psi t)` kernel.
pub fn characteristic_function(psi: ArrayView1<f64>, t: f64) -> (f64, f64) {
    let n = psi.len() as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for &p in psi {
        let (sin, cos) = (p * t).sin_cos();
        re += cos;
        im -= sin;
    }
    (re / n, im / n)
}

pub fn structural_embedding_from_eigen(
    eigen: &SymmetricEigen,
    config: &WaveletConfig,
) -> StructuralEmbedding {
    let n = eigen.eigenvalues.len();
    let d = config.sample_points.len();
    let mut out = Array2::zeros((n, config.width()));
    for (a, &s) in config.scales.iter().enumerate() {
        let w = wavelet_matrix(eigen, s);
        for i in 0..n {
            for (j, &t) in config.sample_points.iter().enumerate() {
                let (re, im) = characteristic_function(w.column(i), t);
                let col = 2 * (a * d + j);
                out[[i, col]] = re;
                out[[i, col + 1]] = im;
            }
        }
    }
    StructuralEmbedding(out)
}

pub fn structural_embedding(graph: &Graph, config: &WaveletConfig) -> Result<StructuralEmbedding> {
    let eigen = eigendecompose_sym(&normalize(graph).laplacian)?;
    Ok(structural_embedding_from_eigen(&eigen, config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use std::f64::consts::PI;

    fn laplacian_eigen(g: &Graph) -> SymmetricEigen {
        eigendecompose_sym(&normalize(g).laplacian).unwrap()
    }

    fn graph(n: usize, edges: &[(usize, usize)]) -> Graph {
        Graph::from_edges(n, edges, Array2::zeros((n, 1))).unwrap()
    }

    /// exp(-sL) by a truncated Taylor series, independent of the eigensolver.
    fn heat_kernel_taylor(l: &Array2<f64>, s: f64) -> Array2<f64> {
        let n = l.nrows();
        let mut term = Array2::<f64>::eye(n);
        let mut sum = term.clone();
        for k in 1..60 {
            term = term.dot(l) * (-s / k as f64);
            sum += &term;
        }
        sum
    }

    #[test]
    fn zero_scale_is_a_delta() {
        let g = graph(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]);
        let e = laplacian_eigen(&g);
        for i in 0..4 {
            let psi = heat_wavelet(&e, 0.0, i);
            for (n, &v) in psi.iter().enumerate() {
                let want = if n == i { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn large_scale_projects_onto_null_space() {
        // 5-cycle is regular, so the zero-eigenvalue eigenvector is constant.
        let g = graph(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]);
        let e = laplacian_eigen(&g);
        let psi = heat_wavelet(&e, 200.0, 2);
        for &v in &psi {
            assert!((v - 0.2).abs() < 1e-10);
        }
    }

    #[test]
    fn path3_matches_taylor_heat_kernel() {
        let g = graph(3, &[(0, 1), (1, 2)]);
        let l = normalize(&g).laplacian;
        let oracle = heat_kernel_taylor(&l, 1.0);
        let psi = heat_wavelet(&laplacian_eigen(&g), 1.0, 0);
        for n in 0..3 {
            assert!((psi[n] - oracle[[n, 0]]).abs() < 1e-12);
        }
    }

    #[test]
    fn wavelet_mass_matches_spectral_sum() {
        let g = graph(5, &[(0, 1), (1, 2), (1, 3), (3, 4)]);
        let e = laplacian_eigen(&g);
        let u = &e.eigenvectors;
        for s in [0.0, 0.7, 3.0] {
            for i in 0..5 {
                let mass: f64 = heat_wavelet(&e, s, i).sum();
                let spectral: f64 = (0..5)
                    .map(|k| (-e.eigenvalues[k] * s).exp() * u[[i, k]] * u.column(k).sum())
                    .sum();
                assert!((mass - spectral).abs() < 1e-12);
                if s == 0.0 {
                    assert!((mass - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn characteristic_function_cases() {
        assert_eq!(
            characteristic_function(array![0.3, -2.0, 5.0].view(), 0.0),
            (1.0, 0.0)
        );
        assert_eq!(
            characteristic_function(array![0.0, 0.0].view(), 7.5),
            (1.0, 0.0)
        );
        let (re, im) = characteristic_function(array![PI, -PI].view(), 1.0);
        assert!((re + 1.0).abs() < 1e-15);
        assert!(im.abs() < 1e-15);
    }

    #[test]
    fn imaginary_part_uses_negative_exponent() {
        let (_, im) = characteristic_function(array![0.5].view(), 1.0);
        assert!((im + 0.5_f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn column_layout_is_scale_major_re_im_pairs() {
        let g = graph(3, &[(0, 1), (1, 2)]);
        let e = laplacian_eigen(&g);
        let cfg = WaveletConfig::new(vec![0.5, 2.0], vec![1.0, 3.0]).unwrap();
        let emb = structural_embedding_from_eigen(&e, &cfg);
        assert_eq!(emb.matrix().ncols(), 8);
        let w = wavelet_matrix(&e, 2.0);
        let (re, im) = characteristic_function(w.column(1), 3.0);
        // scale index 1, point index 1 -> columns 6 and 7
        assert!((emb.matrix()[[1, 6]] - re).abs() < 1e-15);
        assert!((emb.matrix()[[1, 7]] - im).abs() < 1e-15);
    }

    #[test]
    fn path3_endpoints_share_embedding() {
        let g = graph(3, &[(0, 1), (1, 2)]);
        let e = laplacian_eigen(&g);
        let emb =
            structural_embedding_from_eigen(&e, &WaveletConfig::spectral_default(&e.eigenvalues));
        let m = emb.matrix();
        for c in 0..m.ncols() {
            assert!((m[[0, c]] - m[[2, c]]).abs() <= 1e-9);
            assert!(m[[0, c]].abs() <= 1.0);
        }
    }

    #[test]
    fn default_grid() {
        let cfg = WaveletConfig::spectral_default(&array![0.0, 0.5, 1.5]);
        assert_eq!(cfg.scales(), &[1.0, 4.0]);
        assert_eq!(cfg.sample_points().len(), 8);
        assert_eq!(cfg.sample_points()[0], 0.0);
        assert_eq!(cfg.sample_points()[7], 20.0);
        assert_eq!(spectral_gap(&array![0.0, 0.0]), 1e-3);
    }

    #[test]
    fn config_validation() {
        assert!(WaveletConfig::new(vec![], vec![1.0]).is_err());
        assert!(WaveletConfig::new(vec![2.0, 1.0], vec![1.0]).is_err());
        assert!(WaveletConfig::new(vec![-1.0], vec![1.0]).is_err());
        assert!(WaveletConfig::new(vec![1.0], vec![2.0, 1.0]).is_err());
    }
}
