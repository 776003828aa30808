use serde::{Deserialize, Serialize};

use super::density::{kron, CMat, CVec, Cplx};
use crate::error::{DistillError, Result};

/// Storage order of Bell labels `(i, j)` in every four-component vector.
pub const BELL_ORDER: [(u8, u8); 4] = [(0, 0), (1, 1), (0, 1), (1, 0)];

const PROB_TOL: f64 = 1e-12;

/// Position of the Bell label `(i, j)` inside a vector stored in [`BELL_ORDER`].
pub fn bell_slot(i: u8, j: u8) -> usize {
    match (i & 1, j & 1) {
        (0, 0) => 0,
        (1, 1) => 1,
        (0, 1) => 2,
        _ => 3,
    }
}

/// Position of `p_{ijkl}` in a 16-component ensemble vector.
///
/// The layout is plain binary: `i` is the most significant bit and `l` the
/// least significant one.
pub fn ensemble_index(i: u8, j: u8, k: u8, l: u8) -> usize {
    ((i & 1) as usize) << 3 | ((j & 1) as usize) << 2 | ((k & 1) as usize) << 1 | (l & 1) as usize
}

/// Label `(α, β)` of the single-qubit Pauli operator `σ_{α,β}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliLabel {
    pub alpha: u8,
    pub beta: u8,
}

impl PauliLabel {
    pub const ID: PauliLabel = PauliLabel { alpha: 0, beta: 0 };
    pub const X: PauliLabel = PauliLabel { alpha: 0, beta: 1 };
    pub const Z: PauliLabel = PauliLabel { alpha: 1, beta: 0 };
    pub const Y: PauliLabel = PauliLabel { alpha: 1, beta: 1 };

    pub fn new(alpha: u8, beta: u8) -> Result<Self> {
        if alpha > 1 || beta > 1 {
            return Err(DistillError::Domain(format!("Pauli label ({alpha},{beta})")));
        }
        Ok(PauliLabel { alpha, beta })
    }

    /// The four labels in coefficient order `(id, X, Z, Y)`.
    pub fn all() -> [PauliLabel; 4] {
        [Self::ID, Self::X, Self::Z, Self::Y]
    }

    /// Index of this operator in the coefficient order `(id, X, Z, Y)`.
    pub fn index(self) -> usize {
        (self.alpha as usize) << 1 | self.beta as usize
    }

    /// Action on Bell labels when applied to one side of a pair:
    /// `σ_{α,β} ⊗ id` maps `|B_ij>` to `|B_{(i⊕α)(j⊕β)}>` up to a phase.
    pub fn act_on_bell(self, i: u8, j: u8) -> (u8, u8) {
        (i ^ self.alpha, j ^ self.beta)
    }
}

/// The 2×2 matrix of `σ_{α,β}`.
pub fn pauli_matrix(label: PauliLabel) -> CMat {
    let o = Cplx::new(0.0, 0.0);
    let one = Cplx::new(1.0, 0.0);
    let i = Cplx::new(0.0, 1.0);
    match (label.alpha, label.beta) {
        (0, 0) => CMat::from_row_slice(2, 2, &[one, o, o, one]),
        (0, 1) => CMat::from_row_slice(2, 2, &[o, one, one, o]),
        (1, 0) => CMat::from_row_slice(2, 2, &[one, o, o, -one]),
        _ => CMat::from_row_slice(2, 2, &[o, -i, i, o]),
    }
}

/// Kronecker product of a sequence of matrices, leading factor first.
pub fn kron_all(factors: &[CMat]) -> CMat {
    let mut acc = CMat::from_element(1, 1, Cplx::new(1.0, 0.0));
    for f in factors {
        acc = kron(&acc, f);
    }
    acc
}

/// `|B_ij> = (id ⊗ X^j Z^i)|B_00>` as a 4-component state vector.
pub fn bell_vector(i: u8, j: u8) -> CVec {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let s = if i & 1 == 1 { -h } else { h };
    let mut v = CVec::zeros(4);
    if j & 1 == 0 {
        v[0] = Cplx::new(h, 0.0);
        v[3] = Cplx::new(s, 0.0);
    } else {
        v[1] = Cplx::new(h, 0.0);
        v[2] = Cplx::new(s, 0.0);
    }
    v
}

/// `|B_ij><B_ij|` as a 4×4 matrix.
pub fn bell_projector(i: u8, j: u8) -> CMat {
    let v = bell_vector(i, j);
    &v * v.adjoint()
}

fn check_probabilities(p: &[f64]) -> Result<()> {
    if let Some(x) = p.iter().find(|x| !x.is_finite() || **x < -PROB_TOL) {
        return Err(DistillError::InvalidState(format!("probability entry {x}")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > PROB_TOL {
        return Err(DistillError::InvalidState(format!("probabilities sum to {s}")));
    }
    Ok(())
}

/// A two-qubit state diagonal in the Bell basis, stored in [`BELL_ORDER`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellDiagonalState {
    p: [f64; 4],
}

impl BellDiagonalState {
    pub fn new(p: [f64; 4]) -> Result<Self> {
        check_probabilities(&p)?;
        Ok(BellDiagonalState { p })
    }

    pub(crate) fn new_unnormalized(p: [f64; 4]) -> Self {
        BellDiagonalState { p }
    }

    /// Werner state of fidelity `f` with `|B_00>`.
    pub fn werner(f: f64) -> Result<Self> {
        let r = (1.0 - f) / 3.0;
        Self::new([f, r, r, r])
    }

    pub fn perfect() -> Self {
        BellDiagonalState { p: [1.0, 0.0, 0.0, 0.0] }
    }

    pub fn maximally_mixed() -> Self {
        BellDiagonalState { p: [0.25; 4] }
    }

    pub fn probs(&self) -> [f64; 4] {
        self.p
    }

    /// Weight of `|B_ij>`.
    pub fn get(&self, i: u8, j: u8) -> f64 {
        self.p[bell_slot(i, j)]
    }

    /// Fidelity with `|B_00>`.
    pub fn fidelity(&self) -> f64 {
        self.p[0]
    }

    /// One-norm distance between the probability vectors, which equals the
    /// trace distance of the corresponding density matrices.
    pub fn l1_distance(&self, other: &Self) -> f64 {
        self.p.iter().zip(other.p.iter()).map(|(a, b)| (a - b).abs()).sum()
    }

    pub fn to_density(&self) -> super::DensityMatrix {
        let mut m = CMat::zeros(4, 4);
        for &(i, j) in BELL_ORDER.iter() {
            m += bell_projector(i, j) * Cplx::new(self.get(i, j), 0.0);
        }
        super::DensityMatrix::from_matrix_unchecked(m)
    }
}

/// Sixteen probabilities `p_{ijkl}` over a Bell label `(i, j)` and a
/// lab-demon flag `(k, l)`, laid out by [`ensemble_index`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledEnsembleState {
    p: [f64; 16],
}

impl LabeledEnsembleState {
    pub fn new(p: [f64; 16]) -> Result<Self> {
        check_probabilities(&p)?;
        Ok(LabeledEnsembleState { p })
    }

    /// Wraps a nonnegative vector without checking its normalization.
    pub(crate) fn new_unnormalized(p: [f64; 16]) -> Self {
        LabeledEnsembleState { p }
    }

    /// Flags that record the Bell label exactly: `p_{ijkl} = δ_{ik}δ_{jl} p_ij`.
    pub fn correlated(bell: &BellDiagonalState) -> Self {
        let mut p = [0.0; 16];
        for &(i, j) in BELL_ORDER.iter() {
            p[ensemble_index(i, j, i, j)] = bell.get(i, j);
        }
        LabeledEnsembleState { p }
    }

    /// Flags carrying no information: every pair is labelled `(0, 0)`.
    pub fn unflagged(bell: &BellDiagonalState) -> Self {
        let mut p = [0.0; 16];
        for &(i, j) in BELL_ORDER.iter() {
            p[ensemble_index(i, j, 0, 0)] = bell.get(i, j);
        }
        LabeledEnsembleState { p }
    }

    pub fn probs(&self) -> [f64; 16] {
        self.p
    }

    pub fn get(&self, i: u8, j: u8, k: u8, l: u8) -> f64 {
        self.p[ensemble_index(i, j, k, l)]
    }

    /// Bell-diagonal state obtained by discarding the flag register.
    pub fn bell_marginal(&self) -> BellDiagonalState {
        let mut q = [0.0; 4];
        for (idx, x) in self.p.iter().enumerate() {
            let (i, j) = ((idx >> 3) as u8 & 1, (idx >> 2) as u8 & 1);
            q[bell_slot(i, j)] += x;
        }
        BellDiagonalState { p: q }
    }

    /// Largest probability with a flag that differs from the Bell label.
    pub fn max_cross_probability(&self) -> f64 {
        self.p
            .iter()
            .enumerate()
            .filter(|(idx, _)| idx >> 2 != idx & 3)
            .map(|(_, x)| *x)
            .fold(0.0, f64::max)
    }

    /// The four correlated weights `p_{ijij}` in [`BELL_ORDER`].
    pub fn correlated_part(&self) -> [f64; 4] {
        let mut q = [0.0; 4];
        for (s, &(i, j)) in BELL_ORDER.iter().enumerate() {
            q[s] = self.get(i, j, i, j);
        }
        q
    }

    pub fn l1_distance(&self, other: &Self) -> f64 {
        self.p.iter().zip(other.p.iter()).map(|(a, b)| (a - b).abs()).sum()
    }
}
