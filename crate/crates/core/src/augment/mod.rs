//! Global views of a graph: structural-role features and PPR diffusion.

mod ppr;
mod wavelet;

pub(crate) use ppr::top_k_row_positive;
pub use ppr::{ppr_diffusion, sparsify_topk, DiffusionMatrix};
pub use wavelet::{
    characteristic_function, heat_wavelet, spectral_gap, structural_embedding,
    structural_embedding_from_eigen, wavelet_matrix, StructuralEmbedding, WaveletConfig,
};
