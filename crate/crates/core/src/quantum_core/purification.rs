use super::density::{hermitian_eigen, psd_sqrt, CMat, CVec, DensityMatrix};
use crate::error::{DistillError, Result};

/// `Σ_k √λ_k |v_k> ⊗ |k>` for the eigendecomposition `ρ = Σ_k λ_k |v_k><v_k|`,
/// on system ⊗ ancilla of equal dimension.
pub fn canonical_purification(rho: &DensityMatrix) -> CVec {
    let d = rho.dim();
    let (vals, vecs) = hermitian_eigen(rho.matrix());
    let mut psi = CVec::zeros(d * d);
    for k in 0..d {
        let w = vals[k].max(0.0).sqrt();
        for r in 0..d {
            psi[r * d + k] += vecs[(r, k)] * w;
        }
    }
    psi
}

/// Uhlmann fidelity `‖√ρ √σ‖₁`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(DistillError::Dimension(format!("{} vs {}", rho.dim(), sigma.dim())));
    }
    let prod = psd_sqrt(rho.matrix()) * psd_sqrt(sigma.matrix());
    Ok(prod.singular_values().iter().sum::<f64>().min(1.0))
}

fn vectorize(m: &CMat) -> CVec {
    let d = m.nrows();
    CVec::from_fn(d * d, |idx, _| m[(idx / d, idx % d)])
}

/// Purifications `(|ψ_ρ>, |ψ_σ>)` on system ⊗ ancilla whose overlap attains
/// the fidelity of `ρ` and `σ`.
///
/// `|ψ_σ>` is the canonical vectorization of `√σ`; the ancilla unitary on
/// `|ψ_ρ>` comes from the polar part of `√σ √ρ`.
pub fn uhlmann_purifications(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<(CVec, CVec)> {
    if rho.dim() != sigma.dim() {
        return Err(DistillError::Dimension(format!("{} vs {}", rho.dim(), sigma.dim())));
    }
    let sr = psd_sqrt(rho.matrix());
    let ss = psd_sqrt(sigma.matrix());
    let svd = (&ss * &sr).svd(true, true);
    let (a, b_adj) = (svd.u.expect("requested U"), svd.v_t.expect("requested V^T"));
    // √σ√ρ = A Σ B†; tr(√σ√ρ Uᵀ) is maximal for Uᵀ = B A†.
    let ut = b_adj.adjoint() * a.adjoint();
    let psi_rho = vectorize(&(&sr * &ut));
    let psi_sigma = vectorize(&ss);
    Ok((psi_rho, psi_sigma))
}

/// Trace distance `‖|a><a| − |b><b|‖₁ = 2√(1 − |<a|b>|²)` of unit vectors.
pub fn pure_trace_distance(a: &CVec, b: &CVec) -> f64 {
    let ov = a.dotc(b).norm_sqr() / (a.norm_squared() * b.norm_squared());
    2.0 * (1.0 - ov.min(1.0)).max(0.0).sqrt()
}
