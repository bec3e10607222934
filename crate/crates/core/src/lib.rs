//! Global-augmented graph structure learning (GaGSL).
//!
//! The crate learns a denoised graph structure for semi-supervised node
//! classification. Two global views of the input graph are built first: a
//! structural-role feature matrix from heat-kernel wavelets
//! ([`augment::structural_embedding`]) and a personalized-PageRank diffusion
//! matrix ([`augment::ppr_diffusion`]). Two structure estimators score
//! candidate edges on those views, the scores are blended back into the
//! observed adjacency and averaged into a fused structure `A*`, and a
//! three-phase alternating optimizer ([`train::train`]) trades classification
//! loss against an InfoNCE estimate of the information `A*` shares with the
//! redefined views.
//!
//! Module map:
//!
//! | module | contents |
//! |--------|----------|
//! | [`graph`] | graph/dataset model, Jacobi eigensolver, normalization, kNN graphs, file IO |
//! | [`autodiff`] | dense reverse-mode tape, Adam, finite-difference checker |
//! | [`augment`] | structural-role embedding and PPR diffusion |
//! | [`structure`] | candidate sets, structure estimators, redefinition and fusion |
//! | [`train`] | MI calculator, classifier, losses, alternating trainer, checkpoints |
//! | [`harness`] | attacks, metrics, SBM generator, heatmap and histogram data |
//! | [`experiment`] | config, run/sweep orchestration, plot data, self-check |

pub mod augment;
pub mod autodiff;
mod error;
pub mod experiment;
pub mod graph;
pub mod harness;
pub mod rng;
pub mod structure;
pub mod train;

pub use error::{Error, Result};
