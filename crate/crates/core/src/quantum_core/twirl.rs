use super::bell::{bell_vector, pauli_matrix, BellDiagonalState, PauliLabel, BELL_ORDER};
use super::density::{kron, CMat, CVec, Cplx, DensityMatrix};
use crate::error::{DistillError, Result};

/// `σx ⊗ σx` on the leading pair, identity on the remaining `env_dim` levels.
pub fn stabilizer_k1(env_dim: usize) -> CMat {
    let x = pauli_matrix(PauliLabel::X);
    kron(&kron(&x, &x), &CMat::identity(env_dim, env_dim))
}

/// `σz ⊗ σz` on the leading pair, identity on the remaining `env_dim` levels.
pub fn stabilizer_k2(env_dim: usize) -> CMat {
    let z = pauli_matrix(PauliLabel::Z);
    kron(&kron(&z, &z), &CMat::identity(env_dim, env_dim))
}

/// Bell-basis projection `p_ij = <B_ij|ρ|B_ij>` of a two-qubit state.
pub fn bell_twirl(rho: &DensityMatrix) -> Result<BellDiagonalState> {
    if rho.dim() != 4 {
        return Err(DistillError::Dimension(format!("bell_twirl needs 2 qubits, got dim {}", rho.dim())));
    }
    let mut p = [0.0; 4];
    for (s, &(i, j)) in BELL_ORDER.iter().enumerate() {
        let v = bell_vector(i, j);
        p[s] = v.dotc(&(rho.matrix() * &v)).re.max(0.0);
    }
    let total: f64 = p.iter().sum();
    for x in p.iter_mut() {
        *x /= total;
    }
    BellDiagonalState::new(p)
}

/// Averages `ρ` over the four conjugations by `K1^{r1} K2^{r2}`, where the
/// stabilizers act on the leading pair and trivially on the environment.
pub fn secret_twirl(rho: &DensityMatrix) -> Result<DensityMatrix> {
    let d = rho.dim();
    if d < 4 || d % 4 != 0 {
        return Err(DistillError::Dimension(format!("dimension {d} is not a multiple of 4")));
    }
    let env = d / 4;
    let k1 = stabilizer_k1(env);
    let k2 = stabilizer_k2(env);
    let k12 = &k1 * &k2;
    let m = rho.matrix();
    let mut acc = m.clone();
    for k in [&k1, &k2, &k12] {
        acc += k * m * k.adjoint();
    }
    Ok(DensityMatrix::from_matrix_unchecked(acc * Cplx::new(0.25, 0.0)))
}

fn as_column(v: CVec) -> CMat {
    let n = v.len();
    v.reshape_generic(nalgebra::Dyn(n), nalgebra::Dyn(1))
}

/// The environment operator `(<B_ij| ⊗ id) ρ (|B_kl> ⊗ id)`.
pub fn bell_block(rho: &DensityMatrix, row: (u8, u8), col: (u8, u8)) -> Result<CMat> {
    let d = rho.dim();
    if d < 4 || d % 4 != 0 {
        return Err(DistillError::Dimension(format!("dimension {d} is not a multiple of 4")));
    }
    let env = d / 4;
    let id = CMat::identity(env, env);
    let bra = kron(&as_column(bell_vector(row.0, row.1)), &id);
    let ket = kron(&as_column(bell_vector(col.0, col.1)), &id);
    Ok(bra.adjoint() * rho.matrix() * ket)
}

/// Largest entry magnitude over all Bell-basis blocks with distinct labels.
pub fn max_bell_offdiagonal(rho: &DensityMatrix) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &a in BELL_ORDER.iter() {
        for &b in BELL_ORDER.iter() {
            if a == b {
                continue;
            }
            let blk = bell_block(rho, a, b)?;
            worst = worst.max(blk.iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn werner_twirl() {
        let w = BellDiagonalState::werner(0.75).unwrap();
        let p = bell_twirl(&w.to_density()).unwrap().probs();
        let e = [0.75, 1.0 / 12.0, 1.0 / 12.0, 1.0 / 12.0];
        for s in 0..4 {
            assert!((p[s] - e[s]).abs() < 1e-15);
        }
        let mixed = bell_twirl(&DensityMatrix::maximally_mixed(2)).unwrap().probs();
        assert!(mixed.iter().all(|x| (x - 0.25).abs() < 1e-15));
    }

    #[test]
    fn secret_twirl_kills_bell_coherence() {
        // (|B00> + |B01>)/√2 ⊗ |0> has coherent Bell blocks
        let mut v = bell_vector(0, 0) + bell_vector(0, 1);
        v /= Cplx::new(2f64.sqrt(), 0.0);
        let psi = crate::quantum_core::kron_vec(&v, &CVec::from_vec(vec![Cplx::new(1.0, 0.0), Cplx::new(0.0, 0.0)]));
        let rho = DensityMatrix::pure(&psi).unwrap();
        assert!(max_bell_offdiagonal(&rho).unwrap() > 0.4);
        let tw = secret_twirl(&rho).unwrap();
        assert!(max_bell_offdiagonal(&tw).unwrap() < 1e-15);
        assert!(secret_twirl(&DensityMatrix::maximally_mixed(1)).is_err());
    }
}
