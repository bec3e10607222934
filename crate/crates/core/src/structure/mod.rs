//! Learned structure: candidate edges, the two structure estimators, the
//! redefined structures and their fusion into `A*`.

mod candidates;
mod estimator;

pub use candidates::CandidateEdgeSet;
pub use estimator::{
    estimator_embed, fuse, normalize_candidates, pairwise_logits, redefine, Combination,
    EstimatorConfig, EstimatorInput, EstimatorParams, EstimatorVars, FusedStructure,
    RedefinedStructure, StructureLearner, StructureVars, ThetaParams, ThetaVars, View,
};
