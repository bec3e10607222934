use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::autodiff::row_softmax;

/// One evaluation of a trained classifier on a node subset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// One-vs-rest macro AUC over softmax scores.
    pub auc: f64,
    pub f1_macro: f64,
    pub f1_micro: f64,
}

/// Mean and sample standard deviation over trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Summary {
                mean: 0.0,
                std: 0.0,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Summary { mean, std }
    }
}

/// Aggregated metrics over independent trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub auc_convention: String,
    pub trials: usize,
    pub seeds: Vec<u64>,
    pub per_trial: Vec<Metrics>,
    pub auc: Summary,
    pub f1_macro: Summary,
    pub f1_micro: Summary,
}

impl MetricsReport {
    pub fn new(seeds: Vec<u64>, per_trial: Vec<Metrics>) -> Self {
        assert_eq!(seeds.len(), per_trial.len(), "one seed per trial");
        let col = |f: fn(&Metrics) -> f64| per_trial.iter().map(f).collect::<Vec<_>>();
        MetricsReport {
            auc_convention: "one-vs-rest macro".into(),
            trials: per_trial.len(),
            seeds,
            auc: Summary::of(&col(|m| m.auc)),
            f1_macro: Summary::of(&col(|m| m.f1_macro)),
            f1_micro: Summary::of(&col(|m| m.f1_micro)),
            per_trial,
        }
    }
}

/// Row-wise softmax of logits.
pub fn softmax_scores(logits: &Array2<f64>) -> Array2<f64> {
    row_softmax(logits)
}

/// `(micro, macro)` F1 for single-label multi-class predictions. A class
/// that never occurs in `truth` or `pred` contributes an F1 of 0.
pub fn f1_scores(pred: &[usize], truth: &[usize], classes: usize) -> (f64, f64) {
    assert_eq!(pred.len(), truth.len(), "f1: length mismatch");
    assert!(!truth.is_empty(), "f1: empty evaluation set");
    let mut tp = vec![0usize; classes];
    let mut fp = vec![0usize; classes];
    let mut fneg = vec![0usize; classes];
    for (&p, &t) in pred.iter().zip(truth) {
        if p == t {
            tp[t] += 1;
        } else {
            fp[p] += 1;
            fneg[t] += 1;
        }
    }
    let micro = tp.iter().sum::<usize>() as f64 / truth.len() as f64;
    let macro_ = (0..classes)
        .map(|c| {
            let denom = 2 * tp[c] + fp[c] + fneg[c];
            if denom == 0 {
                0.0
            } else {
                2.0 * tp[c] as f64 / denom as f64
            }
        })
        .sum::<f64>()
        / classes as f64;
    (micro, macro_)
}

/// Average ranks (1-based), ties sharing the mean of their positions.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// One-vs-rest AUC averaged over classes that have both positive and
/// negative examples. Classes without both are skipped with a warning; if
/// none qualify the result is 0.5.
pub fn macro_auc(scores: &Array2<f64>, truth: &[usize]) -> f64 {
    assert_eq!(scores.nrows(), truth.len(), "auc: one score row per label");
    let mut total = 0.0;
    let mut used = 0;
    for c in 0..scores.ncols() {
        let pos = truth.iter().filter(|&&t| t == c).count();
        let neg = truth.len() - pos;
        if pos == 0 || neg == 0 {
            log::warn!(
                "auc: class {c} has no {} examples, skipped",
                if pos == 0 { "positive" } else { "negative" }
            );
            continue;
        }
        let col: Vec<f64> = scores.column(c).to_vec();
        let ranks = average_ranks(&col);
        let rank_sum: f64 = truth
            .iter()
            .zip(&ranks)
            .filter(|(&t, _)| t == c)
            .map(|(_, r)| r)
            .sum();
        let (p, n) = (pos as f64, neg as f64);
        total += (rank_sum - p * (p + 1.0) / 2.0) / (p * n);
        used += 1;
    }
    if used == 0 {
        0.5
    } else {
        total / used as f64
    }
}

fn argmax(row: ndarray::ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Metrics of `logits` on the nodes in `index`.
pub fn evaluate(logits: &Array2<f64>, labels: &[usize], index: &[usize]) -> Metrics {
    assert!(!index.is_empty(), "evaluate: empty mask");
    let classes = logits.ncols();
    let sub = logits.select(ndarray::Axis(0), index);
    let truth: Vec<usize> = index.iter().map(|&i| labels[i]).collect();
    for c in 0..classes {
        if !truth.contains(&c) {
            log::warn!("evaluate: class {c} absent from the evaluated nodes");
        }
    }
    let pred: Vec<usize> = sub.rows().into_iter().map(argmax).collect();
    let (f1_micro, f1_macro) = f1_scores(&pred, &truth, classes);
    let auc = macro_auc(&softmax_scores(&sub), &truth);
    Metrics {
        auc,
        f1_macro,
        f1_micro,
    }
}
