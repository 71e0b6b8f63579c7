//! Controllability and observability tests in all three representations.

pub mod controllability;
pub mod observability;

pub use controllability::{
    controllability, controllability_full, controllability_full_with, controllability_ht, controllability_ht_with,
    controllability_tt, controllability_tt_with, ControllabilityResult, Enumeration, Verdict,
};
pub use observability::{
    gradient_sum, lift_operator, observability, observability_full, observability_ht, observability_matrix_full,
    observability_matrix_ht, observability_matrix_tt, observability_tt, recursive_j_ht, recursive_j_tt,
    ObservabilityResult,
};
