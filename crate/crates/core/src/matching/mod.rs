//! Correspondence generation and consistency-based selection.

pub mod consistency;
mod correspondence;
pub mod dense;
pub mod sparse;

pub use consistency::{
    binary_score, consistency_matrices, gaussian_weight, second_order, trims_distance,
    ConsistencyMatrix,
};
pub use correspondence::{Correspondence, CorrespondenceSet, Stage, CSV_HEADER};
pub use dense::{
    dense_loose_generate, prior_guided_group_select, sparse_to_dense_consistency, DenseGroup,
    DenseGroupSet,
};
pub use sparse::{
    feature_similarity, one_to_many_generate, second_order_filter, spectral_key_selection,
    KeySelection, MatchConfig,
};
