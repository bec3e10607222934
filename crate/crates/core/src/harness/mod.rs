//! Robustness harness: poisoning attacks, evaluation metrics, community
//! statistics of learned structures and a stochastic-block-model generator.

mod analysis;
mod attack;
mod metrics;
mod sbm;

pub use analysis::{
    candidate_pair_means, community_prob_matrix, weight_histogram, PairMeans, WeightHistogram,
};
pub use attack::{apply_attack, attack_edges, attack_features, AttackKind, AttackSpec};
pub use metrics::{
    evaluate, f1_scores, macro_auc, softmax_scores, Metrics, MetricsReport, Summary,
};
pub use sbm::{sbm_generate, stratified_split, SbmConfig};
