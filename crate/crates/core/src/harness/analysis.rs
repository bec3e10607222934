use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Empirical connection density between communities. Entry `(a, b)` is the
/// total weight on node pairs joining `a` and `b` divided by the number of
/// such pairs; diagonal entries use `n_a (n_a - 1) / 2` pairs and self-loops
/// are ignored.
pub fn community_prob_matrix(
    adjacency: &Array2<f64>,
    communities: &[usize],
    count: usize,
) -> Array2<f64> {
    let n = adjacency.nrows();
    assert_eq!(communities.len(), n, "one community per node");
    let mut sizes = vec![0usize; count];
    for &c in communities {
        sizes[c] += 1;
    }
    let mut weight = Array2::<f64>::zeros((count, count));
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (communities[i], communities[j]);
            weight[[a, b]] += adjacency[[i, j]];
            if a != b {
                weight[[b, a]] += adjacency[[i, j]];
            }
        }
    }
    Array2::from_shape_fn((count, count), |(a, b)| {
        let pairs = if a == b {
            sizes[a] * sizes[a].saturating_sub(1) / 2
        } else {
            sizes[a] * sizes[b]
        };
        if pairs == 0 {
            0.0
        } else {
            weight[[a, b]] / pairs as f64
        }
    })
}

/// Frequency-normalized histograms of nonzero off-diagonal weights, split by
/// whether the endpoints share a community.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightHistogram {
    pub bin_edges: Vec<f64>,
    pub intra: Vec<f64>,
    pub inter: Vec<f64>,
    pub intra_count: usize,
    pub inter_count: usize,
    /// Weights above 1 that were placed in the last bin.
    pub clipped: usize,
    pub inter_empty: bool,
    pub intra_empty: bool,
}

pub fn weight_histogram(
    adjacency: &Array2<f64>,
    communities: &[usize],
    bins: usize,
) -> WeightHistogram {
    assert!(bins > 0, "histogram needs at least one bin");
    let n = adjacency.nrows();
    let mut intra = vec![0usize; bins];
    let mut inter = vec![0usize; bins];
    let mut clipped = 0;
    for i in 0..n {
        for j in i + 1..n {
            let w = adjacency[[i, j]];
            if w <= 0.0 {
                continue;
            }
            if w > 1.0 {
                clipped += 1;
            }
            let bin = ((w.min(1.0) * bins as f64) as usize).min(bins - 1);
            if communities[i] == communities[j] {
                intra[bin] += 1;
            } else {
                inter[bin] += 1;
            }
        }
    }
    let normalize = |h: &[usize]| {
        let total: usize = h.iter().sum();
        h.iter()
            .map(|&c| {
                if total == 0 {
                    0.0
                } else {
                    c as f64 / total as f64
                }
            })
            .collect::<Vec<_>>()
    };
    let intra_count = intra.iter().sum();
    let inter_count = inter.iter().sum();
    if inter_count == 0 {
        log::warn!("weight histogram: no inter-community weights");
    }
    WeightHistogram {
        bin_edges: (0..=bins).map(|k| k as f64 / bins as f64).collect(),
        intra: normalize(&intra),
        inter: normalize(&inter),
        intra_count,
        inter_count,
        clipped,
        inter_empty: inter_count == 0,
        intra_empty: intra_count == 0,
    }
}

/// Mean weight over a set of node pairs, split by community agreement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMeans {
    pub intra: f64,
    pub inter: f64,
    pub intra_pairs: usize,
    pub inter_pairs: usize,
}

/// Means of `weights[i, j]` over the given pairs. Each unordered pair counts
/// once however often it is listed.
pub fn candidate_pair_means(
    weights: &Array2<f64>,
    pairs: &[(usize, usize)],
    communities: &[usize],
) -> PairMeans {
    let mut seen: Vec<(usize, usize)> = pairs
        .iter()
        .map(|&(i, j)| (i.min(j), i.max(j)))
        .filter(|(i, j)| i != j)
        .collect();
    seen.sort_unstable();
    seen.dedup();
    let (mut si, mut ni, mut so, mut no) = (0.0, 0, 0.0, 0);
    for (i, j) in seen {
        if communities[i] == communities[j] {
            si += weights[[i, j]];
            ni += 1;
        } else {
            so += weights[[i, j]];
            no += 1;
        }
    }
    let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
    PairMeans {
        intra: mean(si, ni),
        inter: mean(so, no),
        intra_pairs: ni,
        inter_pairs: no,
    }
}
