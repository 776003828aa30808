//! Low-dimensional quantum-state arithmetic: Bell-basis bookkeeping, density
//! matrices, Pauli decomposition, twirls, purifications and the asymptotic
//! output state of a distillation protocol.

mod asymptotic;
mod bell;
mod density;
mod purification;
mod twirl;

pub use asymptotic::{asymptotic_state, asymptotic_state_labeled, purified_labeled_state};
pub use bell::{
    bell_projector, bell_slot, bell_vector, ensemble_index, kron_all, pauli_matrix, BellDiagonalState,
    LabeledEnsembleState, PauliLabel, BELL_ORDER,
};
pub use density::{
    kron, kron_vec, partial_trace, partial_trace_matrix, pauli_decompose, pauli_reconstruct, pauli_string_matrix, random_density,
    random_pure_vector, trace_norm,
    trace_norm_of, Cplx, DensityMatrix, CMat, CVec, HERMITIAN_TOL, POSITIVITY_TOL, TRACE_TOL,
};
pub use purification::{canonical_purification, fidelity, pure_trace_distance, uhlmann_purifications};
pub use twirl::{bell_block, bell_twirl, max_bell_offdiagonal, secret_twirl, stabilizer_k1, stabilizer_k2};

pub(crate) use density::hermitian_eigen;
