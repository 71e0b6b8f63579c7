//! Identification and controllability/observability analysis of homogeneous
//! polynomial dynamical systems `ẋ = 𝒜 x^{k−1} + B u`, `y = C x`, with the
//! dynamics tensor held densely, as a tensor train or in hierarchical Tucker
//! form.

pub mod analysis;
pub mod error;
pub mod ht;
pub mod io;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod sysid;
pub mod tensor;
pub mod tt;

pub use analysis::{
    controllability, controllability_full, controllability_full_with, controllability_ht, controllability_ht_with,
    controllability_tt, controllability_tt_with, gradient_sum, lift_operator, observability, observability_full,
    observability_ht, observability_matrix_full, observability_matrix_ht, observability_matrix_tt, observability_tt,
    recursive_j_ht, recursive_j_tt, ControllabilityResult, Enumeration, ObservabilityResult, Verdict,
};
pub use error::{Error, Result};
pub use ht::{build_tree, htd_contract, htd_decompose, htd_eval_hpds, htd_param_count, htd_reconstruct, DimensionTree, HTucker};
pub use linalg::{compact_svd, least_squares, numerical_rank, pinv, subspace_equal, CompactSvd, Matrix, RankTolerance, Vector};
pub use model::{add_noise, eval_derivative, simulate_continuous, simulate_discrete, Dynamics, HpdsModel, Integrator, Representation, SampleSet};
pub use sysid::{
    check_identifiability_autonomous, check_identifiability_io, dense_dynamics, identify_full, identify_ht, identify_io,
    identify_io_noisy, identify_tt, identify_tt_with, parameter_error, required_rank, CoreInit, IdentifiabilityReport,
};
pub use tensor::{almost_symmetrize, hpds_eval_full, is_almost_symmetric, is_symmetric, symmetrize, khatri_rao, khatri_rao_power, kron, psi_index, unfold, fold, mode_vec_product, DenseTensor, MultiIndex};
pub use tt::{tt_contract, tt_decompose, tt_decompose_tensor, tt_eval_hpds, tt_param_count, tt_reconstruct, TensorTrain};
