use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{DistillError, Result};

pub type Cplx = Complex<f64>;
pub type CMat = DMatrix<Cplx>;
pub type CVec = DVector<Cplx>;

/// Maximum entrywise deviation from Hermiticity accepted for a state.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Maximum deviation of the trace from one accepted for a state.
pub const TRACE_TOL: f64 = 1e-12;
/// Most negative eigenvalue accepted for a state.
pub const POSITIVITY_TOL: f64 = -1e-10;

/// A Hermitian, positive semidefinite, unit-trace matrix on `q` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: CMat,
}

impl DensityMatrix {
    /// Validates and wraps `m`.
    pub fn new(m: CMat) -> Result<Self> {
        let d = m.nrows();
        if d != m.ncols() || d == 0 || !d.is_power_of_two() {
            return Err(DistillError::Dimension(format!("{}x{} is not a qubit operator", d, m.ncols())));
        }
        let herm_dev = (&m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm_dev > HERMITIAN_TOL {
            return Err(DistillError::InvalidState(format!("not Hermitian (deviation {herm_dev:e})")));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(DistillError::InvalidState(format!("trace {tr}")));
        }
        let min_eig = hermitian_eigenvalues(&m).iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eig < POSITIVITY_TOL {
            return Err(DistillError::InvalidState(format!("negative eigenvalue {min_eig:e}")));
        }
        Ok(DensityMatrix { m })
    }

    /// Wraps a matrix known to be a valid state by construction.
    pub(crate) fn from_matrix_unchecked(m: CMat) -> Self {
        DensityMatrix { m }
    }

    /// Symmetrizes `m`, divides by its trace and validates the result.
    pub fn normalized(m: CMat) -> Result<Self> {
        let h = (&m + m.adjoint()) * Cplx::new(0.5, 0.0);
        let tr = h.trace().re;
        if tr <= 0.0 {
            return Err(DistillError::InvalidState(format!("trace {tr}")));
        }
        Self::new(h / Cplx::new(tr, 0.0))
    }

    pub fn pure(psi: &CVec) -> Result<Self> {
        let n = psi.norm();
        if n == 0.0 {
            return Err(DistillError::InvalidState("zero vector".into()));
        }
        let v = psi / Cplx::new(n, 0.0);
        Self::new(&v * v.adjoint())
    }

    pub fn maximally_mixed(qubits: usize) -> Self {
        let d = 1usize << qubits;
        DensityMatrix { m: CMat::identity(d, d) / Cplx::new(d as f64, 0.0) }
    }

    /// Computational-basis projector `|idx><idx|` on `qubits` qubits.
    pub fn basis(qubits: usize, idx: usize) -> Self {
        let d = 1usize << qubits;
        let mut m = CMat::zeros(d, d);
        m[(idx, idx)] = Cplx::new(1.0, 0.0);
        DensityMatrix { m }
    }

    pub fn matrix(&self) -> &CMat {
        &self.m
    }

    pub fn into_matrix(self) -> CMat {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix { m: kron(&self.m, &other.m) }
    }

    /// `U ρ U†` for a unitary `u`.
    pub fn conjugate(&self, u: &CMat) -> Result<DensityMatrix> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(DistillError::Dimension(format!("unitary {}x{} on dim {}", u.nrows(), u.ncols(), self.dim())));
        }
        Ok(DensityMatrix { m: u * &self.m * u.adjoint() })
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.m)
    }

    /// Expectation value `tr(ρ O)` of a Hermitian operator.
    pub fn expectation(&self, op: &CMat) -> f64 {
        (&self.m * op).trace().re
    }
}

pub(crate) fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let h = (m + m.adjoint()) * Cplx::new(0.5, 0.0);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().cloned().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Eigenvalues (ascending) and matching orthonormal eigenvectors (columns)
/// of a Hermitian matrix.
pub(crate) fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let h = (m + m.adjoint()) * Cplx::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = CMat::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// Principal square root of a positive semidefinite Hermitian matrix;
/// eigenvalues below zero from rounding are treated as zero.
pub(crate) fn psd_sqrt(m: &CMat) -> CMat {
    let (vals, vecs) = hermitian_eigen(m);
    let d = CMat::from_diagonal(&CVec::from_iterator(vals.len(), vals.iter().map(|v| Cplx::new(v.max(0.0).sqrt(), 0.0))));
    &vecs * d * vecs.adjoint()
}

/// Random state on `qubits` qubits of the given rank, drawn from the
/// induced (Ginibre) measure `G G† / tr(G G†)` with `G` of size `d × rank`.
pub fn random_density<R: rand::Rng + ?Sized>(qubits: usize, rank: usize, rng: &mut R) -> Result<DensityMatrix> {
    let d = 1usize << qubits;
    if rank == 0 || rank > d {
        return Err(DistillError::Dimension(format!("rank {rank} on dimension {d}")));
    }
    let g = CMat::from_fn(d, rank, |_, _| {
        let re: f64 = rng.sample(rand_distr::StandardNormal);
        let im: f64 = rng.sample(rand_distr::StandardNormal);
        Cplx::new(re, im)
    });
    DensityMatrix::normalized(&g * g.adjoint())
}

/// Random pure state vector on `qubits` qubits, uniform on the unit sphere.
pub fn random_pure_vector<R: rand::Rng + ?Sized>(qubits: usize, rng: &mut R) -> CVec {
    let d = 1usize << qubits;
    let v = CVec::from_fn(d, |_, _| {
        let re: f64 = rng.sample(rand_distr::StandardNormal);
        let im: f64 = rng.sample(rand_distr::StandardNormal);
        Cplx::new(re, im)
    });
    let n = v.norm();
    v / Cplx::new(n, 0.0)
}

/// Kronecker product of state vectors `a ⊗ b`.
pub fn kron_vec(a: &CVec, b: &CVec) -> CVec {
    a.kronecker(b)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Trace norm `‖x‖₁`, the sum of singular values.
pub fn trace_norm_of(x: &CMat) -> f64 {
    let herm_dev = (x - x.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if herm_dev <= HERMITIAN_TOL {
        hermitian_eigenvalues(x).iter().map(|e| e.abs()).sum()
    } else {
        x.clone().singular_values().iter().sum()
    }
}

/// Trace distance `‖a − b‖₁` between two states of equal dimension.
pub fn trace_norm(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(DistillError::Dimension(format!("{} vs {}", a.dim(), b.dim())));
    }
    Ok(trace_norm_of(&(a.matrix() - b.matrix())))
}

/// Partial trace of an operator over every subsystem not listed in `keep`.
///
/// `dims` gives the dimension of each subsystem, leading subsystem first.
pub fn partial_trace_matrix(m: &CMat, keep: &[usize], dims: &[usize]) -> Result<CMat> {
    let total: usize = dims.iter().product();
    if total != m.nrows() || m.nrows() != m.ncols() {
        return Err(DistillError::Dimension(format!("dims {:?} vs matrix {}x{}", dims, m.nrows(), m.ncols())));
    }
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort_unstable();
    keep_sorted.dedup();
    if keep_sorted.len() != keep.len() || keep_sorted.iter().any(|&k| k >= dims.len()) {
        return Err(DistillError::Dimension(format!("keep set {:?} for {} subsystems", keep, dims.len())));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|s| !keep_sorted.contains(s)).collect();
    let kd: Vec<usize> = keep_sorted.iter().map(|&s| dims[s]).collect();
    let td: Vec<usize> = traced.iter().map(|&s| dims[s]).collect();
    let dk: usize = kd.iter().product();
    let dt: usize = td.iter().product();

    let strides: Vec<usize> = (0..dims.len()).map(|s| dims[s + 1..].iter().product()).collect();
    let compose = |kept: usize, tr: usize| -> usize {
        let mut idx = 0;
        let mut rem = kept;
        for (pos, &s) in keep_sorted.iter().enumerate().rev() {
            idx += (rem % kd[pos]) * strides[s];
            rem /= kd[pos];
        }
        let mut rem = tr;
        for (pos, &s) in traced.iter().enumerate().rev() {
            idx += (rem % td[pos]) * strides[s];
            rem /= td[pos];
        }
        idx
    };

    let mut out = CMat::zeros(dk, dk);
    for r in 0..dk {
        for c in 0..dk {
            let mut acc = Cplx::new(0.0, 0.0);
            for t in 0..dt {
                acc += m[(compose(r, t), compose(c, t))];
            }
            out[(r, c)] = acc;
        }
    }
    Ok(out)
}

/// Reduced state on the subsystems listed in `keep`.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize], dims: &[usize]) -> Result<DensityMatrix> {
    Ok(DensityMatrix::from_matrix_unchecked(partial_trace_matrix(rho.matrix(), keep, dims)?))
}

/// Matrix element structure of one Pauli string: for row `r` the only
/// nonzero entry sits in column `r ^ flip` with value `phase(r)`.
fn pauli_string_entry(code: usize, qubits: usize, row: usize) -> (usize, Cplx) {
    let mut col = row;
    let mut phase = Cplx::new(1.0, 0.0);
    for pos in 0..qubits {
        let op = (code >> (2 * (qubits - 1 - pos))) & 3;
        let bit_shift = qubits - 1 - pos;
        let bit = (row >> bit_shift) & 1;
        match op {
            1 => col ^= 1 << bit_shift,
            2 => {
                if bit == 1 {
                    phase = -phase;
                }
            }
            3 => {
                col ^= 1 << bit_shift;
                // <0|Y|1> = -i, <1|Y|0> = i
                phase *= if bit == 0 { Cplx::new(0.0, -1.0) } else { Cplx::new(0.0, 1.0) };
            }
            _ => {}
        }
    }
    (col, phase)
}

/// Dense matrix of the Pauli string with base-4 code `code`; digit order is
/// `(id, X, Z, Y)` and qubit 0 is the leading digit.
pub fn pauli_string_matrix(code: usize, qubits: usize) -> CMat {
    let d = 1usize << qubits;
    let mut m = CMat::zeros(d, d);
    for r in 0..d {
        let (c, ph) = pauli_string_entry(code, qubits, r);
        m[(r, c)] = ph;
    }
    m
}

/// Coefficients `α_s = tr(ρ σ_s)` with `ρ = 2^{-q} Σ_s α_s σ_s`.
pub fn pauli_decompose(rho: &DensityMatrix) -> Vec<f64> {
    let q = rho.qubits();
    let d = rho.dim();
    let m = rho.matrix();
    (0..1usize << (2 * q))
        .map(|code| {
            let mut acc = Cplx::new(0.0, 0.0);
            for r in 0..d {
                let (c, ph) = pauli_string_entry(code, q, r);
                acc += ph * m[(c, r)];
            }
            acc.re
        })
        .collect()
}

/// Inverse of [`pauli_decompose`].
pub fn pauli_reconstruct(coeffs: &[f64], qubits: usize) -> Result<CMat> {
    if coeffs.len() != 1usize << (2 * qubits) {
        return Err(DistillError::Dimension(format!("{} coefficients for {} qubits", coeffs.len(), qubits)));
    }
    let d = 1usize << qubits;
    let mut m = CMat::zeros(d, d);
    for (code, &a) in coeffs.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        for r in 0..d {
            let (c, ph) = pauli_string_entry(code, qubits, r);
            m[(r, c)] += ph * a;
        }
    }
    Ok(m / Cplx::new(d as f64, 0.0))
}
