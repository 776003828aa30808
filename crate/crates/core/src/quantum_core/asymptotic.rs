use super::bell::{bell_projector, bell_vector, ensemble_index, BellDiagonalState, LabeledEnsembleState, BELL_ORDER};
use super::density::{kron, CMat, CVec, Cplx, DensityMatrix};

/// `Σ_ij p_ij |B_ij><B_ij| ⊗ |η_ij><η_ij|` with flag states `|η_ij>` taken
/// as the computational basis state `|ij>` of a two-qubit register.
///
/// The result lives on four qubits, pair first.
pub fn asymptotic_state(fix: &BellDiagonalState) -> DensityMatrix {
    let mut m = CMat::zeros(16, 16);
    for &(i, j) in BELL_ORDER.iter() {
        let w = fix.get(i, j);
        if w == 0.0 {
            continue;
        }
        let mut flag = CMat::zeros(4, 4);
        let f = ((i as usize) << 1) | j as usize;
        flag[(f, f)] = Cplx::new(1.0, 0.0);
        m += kron(&bell_projector(i, j), &flag) * Cplx::new(w, 0.0);
    }
    DensityMatrix::from_matrix_unchecked(m)
}

/// `Σ_{ijkl} e^{iθ_{ijkl}} √p_{ijkl} |B_ij>_AB |kl>_L |ijkl>_E` on eight
/// qubits ordered pair, lab-demon register, environment.
pub fn purified_labeled_state(p: &LabeledEnsembleState, phases: Option<&[f64; 16]>) -> CVec {
    let mut psi = CVec::zeros(256);
    for idx in 0..16 {
        let w = p.probs()[idx];
        if w <= 0.0 {
            continue;
        }
        let (i, j, k, l) = ((idx >> 3) as u8 & 1, (idx >> 2) as u8 & 1, (idx >> 1) as u8 & 1, idx as u8 & 1);
        let theta = phases.map_or(0.0, |t| t[idx]);
        let amp = Cplx::from_polar(w.sqrt(), theta);
        let b = bell_vector(i, j);
        let flag = ((k as usize) << 1) | l as usize;
        let env = ensemble_index(i, j, k, l);
        for (ab, z) in b.iter().enumerate() {
            psi[(ab * 4 + flag) * 16 + env] += amp * z;
        }
    }
    psi
}

/// `Σ_ij ω_ij |B_ij><B_ij| ⊗ |η_ij><η_ij|` on pair ⊗ lab demon ⊗ environment,
/// where `ω_ij = Σ_kl p_ijkl` and `|η_ij> ∝ Σ_kl √p_ijkl |kl>|ijkl>`.
///
/// The flag states are orthogonal for distinct `(i, j)` because the
/// environment register records the Bell label.
pub fn asymptotic_state_labeled(p: &LabeledEnsembleState) -> DensityMatrix {
    let mut m = CMat::zeros(256, 256);
    for &(i, j) in BELL_ORDER.iter() {
        let mut sub = [0.0; 16];
        for k in 0..2u8 {
            for l in 0..2u8 {
                let idx = ensemble_index(i, j, k, l);
                sub[idx] = p.probs()[idx];
            }
        }
        if sub.iter().all(|x| *x == 0.0) {
            continue;
        }
        let block = LabeledEnsembleState::new_unnormalized(sub);
        let v = purified_labeled_state(&block, None);
        m += &v * v.adjoint();
    }
    DensityMatrix::from_matrix_unchecked(m)
}
