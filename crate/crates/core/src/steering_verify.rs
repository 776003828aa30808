//! Numerical audit of the steering argument behind the product-form
//! reduction for a two-qubit | two-qubit split.
//!
//! Subsystem `A` is formed by the two leading qubits of a four-qubit state
//! and `B` by the two trailing ones.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DistillError, Result};
use crate::quantum_core::{
    hermitian_eigen, kron, kron_vec, partial_trace, pauli_matrix, trace_norm_of, CMat, CVec, Cplx, DensityMatrix,
    PauliLabel,
};

/// Probability threshold above which outcomes on `A` are considered.
pub const PROBABILITY_THRESHOLD: f64 = 1.0 / 16.0;

/// Discrepancies and distances below this value are reported as zero; they
/// are rounding noise of the `f64` linear algebra.
pub const NUMERICAL_ZERO: f64 = 1e-13;

fn snap(x: f64) -> f64 {
    if x.abs() < NUMERICAL_ZERO {
        0.0
    } else {
        x
    }
}

/// The single-qubit tomographic states `|+>, |+i>, |0>, |−>`.
pub fn single_qubit_states() -> [CVec; 4] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let c = |a: Cplx, b: Cplx| CVec::from_vec(vec![a, b]);
    [
        c(Cplx::new(h, 0.0), Cplx::new(h, 0.0)),
        c(Cplx::new(h, 0.0), Cplx::new(0.0, h)),
        c(Cplx::new(1.0, 0.0), Cplx::new(0.0, 0.0)),
        c(Cplx::new(h, 0.0), Cplx::new(-h, 0.0)),
    ]
}

/// Product projectors `|φ_{j1}> ⊗ ... ⊗ |φ_{jq}>` on `qubits` qubits, with
/// the first factor varying slowest.
#[derive(Debug, Clone)]
pub struct TomographicSet {
    qubits: usize,
    vectors: Vec<CVec>,
}

impl TomographicSet {
    pub fn new(qubits: usize) -> Self {
        let single = single_qubit_states();
        let mut vectors = vec![CVec::from_element(1, Cplx::new(1.0, 0.0))];
        for _ in 0..qubits {
            vectors = vectors
                .iter()
                .flat_map(|v| single.iter().map(move |s| kron_vec(v, s)))
                .collect();
        }
        TomographicSet { qubits, vectors }
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vector(&self, k: usize) -> &CVec {
        &self.vectors[k]
    }

    pub fn projector(&self, k: usize) -> CMat {
        let v = &self.vectors[k];
        v * v.adjoint()
    }

    /// `<φ_k|ρ|φ_k>` for every element of the set.
    pub fn probabilities(&self, rho: &DensityMatrix) -> Result<Vec<f64>> {
        if rho.dim() != 1 << self.qubits {
            return Err(DistillError::Dimension(format!("state on {} qubits, set on {}", rho.qubits(), self.qubits)));
        }
        Ok(self.vectors.iter().map(|v| v.dotc(&(rho.matrix() * v)).re).collect())
    }
}

/// The 4×4 block `<φ_j|σ_c|φ_j>` with Pauli columns in the order
/// `(id, X, Z, Y)`.
pub fn single_qubit_block() -> DMatrix<f64> {
    let states = single_qubit_states();
    DMatrix::from_fn(4, 4, |r, c| {
        let s = pauli_matrix(PauliLabel::all()[c]);
        states[r].dotc(&(&s * &states[r])).re
    })
}

/// The tomography matrix `T` on `qubits` qubits assembled entry by entry
/// from the tomographic set: `T[k, i] = <φ_k|σ_i|φ_k>`.
pub fn build_t_matrix_direct(qubits: usize) -> DMatrix<f64> {
    let set = TomographicSet::new(qubits);
    let d = set.len();
    let paulis: Vec<CMat> = (0..d).map(|code| crate::quantum_core::pauli_string_matrix(code, qubits)).collect();
    DMatrix::from_fn(d, d, |k, i| {
        let v = set.vector(k);
        v.dotc(&(&paulis[i] * v)).re
    })
}

/// `T` as the tensor power of [`single_qubit_block`].
pub fn build_t_matrix_tensor(qubits: usize) -> DMatrix<f64> {
    let block = single_qubit_block();
    let mut acc = DMatrix::from_element(1, 1, 1.0);
    for _ in 0..qubits {
        acc = acc.kronecker(&block);
    }
    acc
}

/// The four-qubit `T` used by the steering argument.
pub fn build_t_matrix() -> DMatrix<f64> {
    build_t_matrix_direct(4)
}

/// Maximum absolute column sum.
pub fn induced_one_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols()).map(|c| m.column(c).iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn invert(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| DistillError::Precondition("tomography matrix is singular".into()))
}

/// Induced 1-norm of `T⁻¹` for the four-qubit set.
pub fn t_inverse_norm() -> Result<f64> {
    Ok(induced_one_norm(&invert(&build_t_matrix())?))
}

/// Induced 1-norm of the inverse single-qubit block.
pub fn single_block_inverse_norm() -> Result<f64> {
    Ok(induced_one_norm(&invert(&single_qubit_block())?))
}

/// Exact inverse of the single-qubit block and its induced 1-norm, by
/// Gauss-Jordan elimination over the rationals.
pub fn single_block_inverse_exact() -> (Vec<Vec<BigRational>>, BigRational) {
    let block = single_qubit_block();
    // every entry of the block is 0 or ±1
    let int = |x: f64| BigRational::from_integer(BigInt::from(x.round() as i64));
    let mut a: Vec<Vec<BigRational>> = (0..4).map(|r| (0..4).map(|c| int(block[(r, c)])).collect()).collect();
    let mut inv: Vec<Vec<BigRational>> =
        (0..4).map(|r| (0..4).map(|c| if r == c { BigRational::one() } else { BigRational::zero() }).collect()).collect();
    for col in 0..4 {
        let pivot = (col..4).find(|&r| !a[r][col].is_zero()).expect("block is invertible");
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let d = a[col][col].clone();
        for c in 0..4 {
            a[col][c] = &a[col][c] / &d;
            inv[col][c] = &inv[col][c] / &d;
        }
        for r in 0..4 {
            if r != col && !a[r][col].is_zero() {
                let factor = a[r][col].clone();
                for c in 0..4 {
                    let (ac, ic) = (&a[col][c] * &factor, &inv[col][c] * &factor);
                    a[r][c] = &a[r][c] - ac;
                    inv[r][c] = &inv[r][c] - ic;
                }
            }
        }
    }
    let norm = (0..4)
        .map(|c| (0..4).map(|r| inv[r][c].abs()).fold(BigRational::zero(), |s, x| s + x))
        .max()
        .expect("four columns");
    (inv, norm)
}

/// `C = ‖T⁻¹‖ · 4^{n+m} · 2^{n+m}` for an `n | m` qubit split.
pub fn steering_constant(n: u32, m: u32, t_inverse_norm: f64) -> f64 {
    t_inverse_norm * 4f64.powi((n + m) as i32) * 2f64.powi((n + m) as i32)
}

/// Recovers the Pauli coefficients `α_i = tr(σ_i ρ)` from tomographic
/// probabilities by solving `p = T a / 2^q`.
pub fn recover_pauli_coefficients(t: &DMatrix<f64>, probabilities: &[f64], qubits: usize) -> Result<Vec<f64>> {
    if t.nrows() != probabilities.len() {
        return Err(DistillError::Dimension(format!("{} probabilities for T of size {}", probabilities.len(), t.nrows())));
    }
    let lu = t.clone().lu();
    let rhs = nalgebra::DVector::from_iterator(
        probabilities.len(),
        probabilities.iter().map(|p| p * (1u64 << qubits) as f64),
    );
    let a = lu.solve(&rhs).ok_or_else(|| DistillError::Precondition("tomography matrix is singular".into()))?;
    Ok(a.iter().cloned().collect())
}

fn check_two_two(rho: &DensityMatrix) -> Result<()> {
    if rho.qubits() != 4 {
        return Err(DistillError::Dimension(format!("expected a 4-qubit state, got {} qubits", rho.qubits())));
    }
    Ok(())
}

/// Unnormalized conditional state `tr_A((|φ><φ| ⊗ I) ρ)` on `B`.
fn conditional_b(rho: &CMat, phi: &CVec) -> CMat {
    CMat::from_fn(4, 4, |b, bp| {
        let mut acc = Cplx::new(0.0, 0.0);
        for a in 0..4 {
            for ap in 0..4 {
                acc += phi[a].conj() * rho[(a * 4 + b, ap * 4 + bp)] * phi[ap];
            }
        }
        acc
    })
}

/// Conditional-state data of one outcome on `A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteeringOutcome {
    pub index: usize,
    pub probability: f64,
    /// `‖ρ_B^φ − ρ_B‖₁`, or `None` below the threshold.
    pub discrepancy: Option<f64>,
}

/// Per-outcome scan over the sixteen tomographic projectors on `A`.
pub fn steering_outcomes(rho: &DensityMatrix, threshold: f64) -> Result<Vec<SteeringOutcome>> {
    check_two_two(rho)?;
    if !(0.0..1.0).contains(&threshold) {
        return Err(DistillError::Domain(format!("threshold {threshold} outside [0, 1)")));
    }
    let set = TomographicSet::new(2);
    let rho_b = partial_trace(rho, &[2, 3], &[2, 2, 2, 2])?;
    let outcomes = (0..set.len())
        .into_par_iter()
        .map(|k| {
            let cond = conditional_b(rho.matrix(), set.vector(k));
            let probability = cond.trace().re;
            let discrepancy = (probability >= threshold && probability > 0.0)
                .then(|| snap(trace_norm_of(&(cond / Cplx::new(probability, 0.0) - rho_b.matrix()))));
            SteeringOutcome { index: k, probability, discrepancy }
        })
        .collect();
    Ok(outcomes)
}

/// `max_φ ‖ρ_B^φ − ρ_B‖₁` over tomographic outcomes on `A` whose probability
/// is at least `threshold`.
pub fn steering_discrepancy(rho: &DensityMatrix, threshold: f64) -> Result<f64> {
    let outcomes = steering_outcomes(rho, threshold)?;
    outcomes
        .iter()
        .filter_map(|o| o.discrepancy)
        .reduce(f64::max)
        .ok_or_else(|| DistillError::Precondition(format!("every outcome on A has probability below {threshold}")))
}

/// Local unitary `U` on `A` mapping the leading eigenvector of `ρ_A` to
/// `|00>`, together with `(U ⊗ I) ρ (U ⊗ I)†`.
///
/// Eigenvectors are placed in order of decreasing eigenvalue; among equal
/// largest eigenvalues the one listed first by the eigensolver is used.
pub fn steer_rotate(rho: &DensityMatrix) -> Result<(CMat, DensityMatrix)> {
    check_two_two(rho)?;
    let rho_a = partial_trace(rho, &[0, 1], &[2, 2, 2, 2])?;
    let (vals, vecs) = hermitian_eigen(rho_a.matrix());
    let lead_val = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lead = vals.iter().position(|&v| v == lead_val).expect("nonempty spectrum");
    let mut order = vec![lead];
    order.extend((0..4).rev().filter(|&c| c != lead));
    let v = CMat::from_fn(4, 4, |r, c| vecs[(r, order[c])]);
    let u = v.adjoint();
    let full = kron(&u, &CMat::identity(4, 4));
    let rotated = rho.conjugate(&full)?;
    Ok((u, rotated))
}

/// Smallest tomographic probability on `A`.
pub fn min_outcome_probability(rho: &DensityMatrix) -> Result<f64> {
    Ok(steering_outcomes(rho, 0.0)?.iter().map(|o| o.probability).fold(f64::INFINITY, f64::min))
}

/// Both sides of `‖ρ_AB − ρ_A ⊗ ρ_B‖₁ ≤ 2Cε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductFormVerdict {
    pub epsilon: f64,
    /// Discrepancy of the rotated state at the probability threshold.
    pub discrepancy: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `C` for the two-qubit | two-qubit split.
pub fn two_two_constant() -> f64 {
    steering_constant(2, 2, 16.0)
}

/// Distance of `ρ` from the product of its marginals.
pub fn product_distance(rho: &DensityMatrix) -> Result<f64> {
    check_two_two(rho)?;
    let dims = [2, 2, 2, 2];
    let rho_a = partial_trace(rho, &[0, 1], &dims)?;
    let rho_b = partial_trace(rho, &[2, 3], &dims)?;
    Ok(snap(trace_norm_of(&(rho.matrix() - rho_a.tensor(&rho_b).matrix()))))
}

/// Checks the product-form inequality for a state whose rotated version has
/// steering discrepancy at most `epsilon` at the threshold `1/16`.
pub fn product_form_check(rho: &DensityMatrix, epsilon: f64) -> Result<ProductFormVerdict> {
    let (_, rotated) = steer_rotate(rho)?;
    let discrepancy = steering_discrepancy(&rotated, PROBABILITY_THRESHOLD)?;
    if discrepancy > epsilon {
        return Err(DistillError::Precondition(format!(
            "steering discrepancy {discrepancy:e} exceeds ε = {epsilon:e}"
        )));
    }
    let lhs = product_distance(rho)?;
    let rhs = 2.0 * two_two_constant() * epsilon;
    Ok(ProductFormVerdict { epsilon, discrepancy, lhs, rhs, holds: lhs <= rhs })
}

/// One row of a steering audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringAudit {
    pub state_id: String,
    pub epsilon: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

/// Audits `ρ` with `ε` set to its own rotated steering discrepancy.
pub fn audit_state(state_id: &str, rho: &DensityMatrix) -> Result<SteeringAudit> {
    let (_, rotated) = steer_rotate(rho)?;
    let epsilon = steering_discrepancy(&rotated, PROBABILITY_THRESHOLD)?;
    let v = product_form_check(rho, epsilon)?;
    Ok(SteeringAudit { state_id: state_id.to_string(), epsilon, lhs: v.lhs, rhs: v.rhs, slack: v.rhs - v.lhs })
}
