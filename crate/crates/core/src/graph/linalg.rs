//! Cyclic Jacobi eigensolver for dense symmetric matrices, and a dense
//! linear solve.

use ndarray::{Array1, Array2};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct JacobiOptions {
    /// Stop once `off(M) <= tolerance * ||M||_F`.
    pub tolerance: f64,
    pub max_sweeps: usize,
    pub max_dim: usize,
    /// Allowed `|M_ij - M_ji|`, relative to `max(1, ||M||_max)`.
    pub symmetry_tol: f64,
}

impl Default for JacobiOptions {
    fn default() -> Self {
        JacobiOptions {
            tolerance: 1e-10,
            max_sweeps: 100,
            max_dim: 4000,
            symmetry_tol: 1e-8,
        }
    }
}

/// Eigenvalues in ascending order; column `k` of `eigenvectors` pairs with
/// `eigenvalues[k]`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub eigenvalues: Array1<f64>,
    pub eigenvectors: Array2<f64>,
    pub sweeps: usize,
}

pub fn eigendecompose_sym(m: &Array2<f64>) -> Result<SymmetricEigen> {
    eigendecompose_sym_with(m, &JacobiOptions::default())
}

pub fn eigendecompose_sym_with(m: &Array2<f64>, opts: &JacobiOptions) -> Result<SymmetricEigen> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Validation(format!(
            "{}x{} matrix is not square",
            n,
            m.ncols()
        )));
    }
    if n > opts.max_dim {
        return Err(Error::TooLarge {
            dim: n,
            cap: opts.max_dim,
        });
    }
    let scale = m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs())).max(1.0);
    for i in 0..n {
        for j in i + 1..n {
            let gap = (m[[i, j]] - m[[j, i]]).abs();
            if gap > opts.symmetry_tol * scale || gap.is_nan() {
                return Err(Error::NotSymmetric {
                    row: i,
                    col: j,
                    gap,
                });
            }
        }
    }

    // Work on the symmetrized copy in row-major scratch buffers.
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = 0.5 * (m[[i, j]] + m[[j, i]]);
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let frob = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let target = opts.tolerance * frob;
    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&a, n);
        if off <= target || frob == 0.0 {
            break;
        }
        if sweeps == opts.max_sweeps {
            log::warn!(
                "jacobi stopped after {sweeps} sweeps with off(M) = {off:e} (target {target:e})"
            );
            break;
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, &mut v, n, p, q, c, s);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]).then(i.cmp(&j)));
    let eigenvalues = Array1::from_iter(order.iter().map(|&k| a[k * n + k]));
    let mut eigenvectors = Array2::zeros((n, n));
    for (col, &k) in order.iter().enumerate() {
        for row in 0..n {
            eigenvectors[[row, col]] = v[row * n + k];
        }
    }
    Ok(SymmetricEigen {
        eigenvalues,
        eigenvectors,
        sweeps,
    })
}

fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[i * n + j] * a[i * n + j];
            }
        }
    }
    sum.sqrt()
}

/// Applies `A <- P^T A P` and `V <- V P` for the plane rotation in (p, q).
fn rotate(a: &mut [f64], v: &mut [f64], n: usize, p: usize, q: usize, c: f64, s: f64) {
    for k in 0..n {
        let akp = a[k * n + p];
        let akq = a[k * n + q];
        a[k * n + p] = c * akp - s * akq;
        a[k * n + q] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[p * n + k];
        let aqk = a[q * n + k];
        a[p * n + k] = c * apk - s * aqk;
        a[q * n + k] = s * apk + c * aqk;
    }
    a[p * n + q] = 0.0;
    a[q * n + p] = 0.0;
    for k in 0..n {
        let vkp = v[k * n + p];
        let vkq = v[k * n + q];
        v[k * n + p] = c * vkp - s * vkq;
        v[k * n + q] = s * vkp + c * vkq;
    }
}

/// Solves `M X = rhs` for square `M`. Tries Cholesky first, then LU.
pub fn solve(m: &Array2<f64>, rhs: &Array2<f64>) -> Result<Array2<f64>> {
    let n = m.nrows();
    if m.ncols() != n || rhs.nrows() != n {
        return Err(Error::Validation("solve: shape mismatch".into()));
    }
    let mat = nalgebra::DMatrix::from_fn(n, n, |i, j| m[[i, j]]);
    let b = nalgebra::DMatrix::from_fn(n, rhs.ncols(), |i, j| rhs[[i, j]]);
    let x = match mat.clone().cholesky() {
        Some(chol) => chol.solve(&b),
        None => mat.lu().solve(&b).ok_or(Error::Singular)?,
    };
    if x.iter().any(|x| !x.is_finite()) {
        return Err(Error::Singular);
    }
    Ok(Array2::from_shape_fn((n, rhs.ncols()), |(i, j)| x[(i, j)]))
}
