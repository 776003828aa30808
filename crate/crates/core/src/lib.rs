//! Numerical toolkit for recurrence-type entanglement distillation.
//!
//! The crate covers the DEJMPS and BBPSSW recurrences under noisy local
//! operations, their fixed points and Jacobian stability, the arithmetic of
//! the associated confidentiality and robustness bounds, a numerical audit of
//! the steering argument behind the product-form reduction, and a seeded
//! Monte Carlo simulation of the full protocol against an honest channel.
//!
//! Conventions used throughout:
//!
//! * Bell states are `|B_ij> = (id ⊗ X^j Z^i)|B_00>` with
//!   `|B_00> = (|00> + |11>)/√2`.
//! * Four-component Bell-diagonal vectors are stored in the order
//!   `(00, 11, 01, 10)`, see [`BELL_ORDER`].
//! * Pauli labels `(α, β)` map to `σ_00 = id`, `σ_01 = X`, `σ_10 = Z`,
//!   `σ_11 = Y`; Pauli-coefficient vectors use the per-qubit order
//!   `(id, X, Z, Y)`.
//! * Qubit 0 is the most significant bit of a computational-basis index, so
//!   that `kron(a, b)` places `a` on the leading qubits.

// Domain checks are written as `!(x >= lo)` so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fixed_point;
pub mod montecarlo;
pub mod noise_models;
pub mod quantum_core;
pub mod recurrence;
pub mod scalar;
pub mod security_bounds;
pub mod steering_verify;

pub use error::{DistillError, Result};
pub use noise_models::{
    BinaryNoise, ChannelBeta, NoiseDistribution, NoiseModel, SingleQubitWhiteNoise,
    TwoQubitCorrelatedNoise, WorstCaseNoise,
};
pub use quantum_core::{
    BellDiagonalState, DensityMatrix, LabeledEnsembleState, PauliLabel, BELL_ORDER,
};
pub use recurrence::{FlagUpdate, RecurrenceMap};
