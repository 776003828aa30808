//! One-round update maps of the DEJMPS and BBPSSW recurrences.
//!
//! Each map sends a probability vector to the normalized post-selected
//! vector together with the success probability `N` of the round. The core
//! formulas are generic over [`Scalar`] so that test oracles can evaluate
//! them in exact rational arithmetic.

use serde::{Deserialize, Serialize};

use crate::error::{DistillError, Result};
use crate::noise_models::NoiseDistribution;
use crate::quantum_core::{bell_slot, ensemble_index, BellDiagonalState, LabeledEnsembleState, BELL_ORDER};
use crate::scalar::{ratio, Scalar};

fn normalize<T: Scalar, const D: usize>(raw: [T; D]) -> Result<([T; D], T)> {
    let n = raw.iter().cloned().fold(T::zero(), |a, b| a + b);
    if n.is_zero() {
        return Err(DistillError::ZeroSuccess);
    }
    Ok((raw.map(|x| x / n.clone()), n))
}

/// Lab-demon flag update `u(k1, l1, k2, l2) = (γ0, γ1)`, stored as a total
/// lookup table indexed by `k1·8 + l1·4 + k2·2 + l2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagUpdate {
    table: [(u8, u8); 16],
}

impl FlagUpdate {
    /// Builds the table from an arbitrary rule.
    pub fn from_fn(rule: impl Fn(u8, u8, u8, u8) -> (u8, u8)) -> Self {
        let mut table = [(0, 0); 16];
        for (idx, slot) in table.iter_mut().enumerate() {
            let (k1, l1, k2, l2) = ((idx >> 3) as u8 & 1, (idx >> 2) as u8 & 1, (idx >> 1) as u8 & 1, idx as u8 & 1);
            let (g0, g1) = rule(k1, l1, k2, l2);
            *slot = (g0 & 1, g1 & 1);
        }
        FlagUpdate { table }
    }

    /// Treats the two flags as the Bell labels of the pairs: if they predict
    /// coinciding parities, the new flag is the Bell label the kept pair
    /// would then carry, `(k1⊕k2, k1⊕l1)`; if they predict a failed round
    /// that nevertheless succeeded, the flag is reset to `(0, 0)`.
    ///
    /// Restricted to bit-flip noise on mixtures of `|B_00>` and `|B_01>`
    /// this yields `l = l1 ∧ l2`, which is the binary-pair recurrence.
    pub fn consistent_reset() -> Self {
        Self::from_fn(|k1, l1, k2, l2| if k1 ^ l1 ^ k2 ^ l2 == 0 { (k1 ^ k2, k1 ^ l1) } else { (0, 0) })
    }

    /// `(k1⊕k2, k1⊕l1)` on every input. Keeps correlated flags correlated
    /// without noise, but leaves cross-probabilities undamped, so the
    /// distillation fixed point is not attracting under this rule.
    pub fn bell_mirror() -> Self {
        Self::from_fn(|k1, l1, k2, _| (k1 ^ k2, k1 ^ l1))
    }

    pub fn apply(&self, k1: u8, l1: u8, k2: u8, l2: u8) -> (u8, u8) {
        self.table[((k1 as usize & 1) << 3) | ((l1 as usize & 1) << 2) | ((k2 as usize & 1) << 1) | (l2 as usize & 1)]
    }
}

impl Default for FlagUpdate {
    fn default() -> Self {
        Self::consistent_reset()
    }
}

/// The flag update used by every recurrence in this crate unless another
/// one is passed explicitly; see [`FlagUpdate::consistent_reset`].
pub fn default_flag_update() -> FlagUpdate {
    FlagUpdate::consistent_reset()
}

/// Noiseless DEJMPS on a Bell-diagonal vector in the order `(00, 11, 01, 10)`.
pub fn dejmps_noiseless_generic<T: Scalar>(p: &[T; 4]) -> Result<([T; 4], T)> {
    let [p00, p11, p01, p10] = p.clone();
    let two: T = ratio(2, 1);
    let raw = [
        p00.clone() * p00.clone() + p11.clone() * p11.clone(),
        two.clone() * p01.clone() * p10.clone(),
        p01.clone() * p01 + p10.clone() * p10,
        two * p00 * p11,
    ];
    normalize(raw)
}

/// DEJMPS with two-qubit Pauli noise acting on the Bell labels only; this is
/// the flag-register marginal of [`dejmps_noisy_generic`].
pub fn dejmps_noisy_bell_generic<T: Scalar>(p: &[T; 4], f: &[T; 16]) -> Result<([T; 4], T)> {
    let pb = |i: u8, j: u8| p[bell_slot(i, j)].clone();
    let zero = T::zero();
    let mut raw: [T; 4] = std::array::from_fn(|_| T::zero());
    for (a, w) in f.iter().enumerate() {
        if *w == zero {
            continue;
        }
        let (a1, b1, a2, b2) = ((a >> 3) as u8 & 1, (a >> 2) as u8 & 1, (a >> 1) as u8 & 1, a as u8 & 1);
        for t in 0..8u8 {
            let (i1, j1, i2) = (t >> 2 & 1, t >> 1 & 1, t & 1);
            let j2 = i1 ^ j1 ^ i2;
            let x = pb(i1 ^ a1, j1 ^ b1) * pb(i2 ^ a2, j2 ^ b2);
            let s = bell_slot(i1 ^ i2, i1 ^ j1);
            raw[s] = raw[s].clone() + w.clone() * x;
        }
    }
    normalize(raw)
}

/// Noisy DEJMPS on the joint Bell-label and flag distribution.
///
/// For each output `p̃_{δ0δ1γ0γ1}` the sum runs over noise labels and pair
/// labels with `i1⊕i2 = δ0`, `i1⊕j1 = δ1`, the second pair's `j2` fixed to
/// `i1⊕j1⊕i2` by coincidence of the measured parities, and
/// `u(k1, l1, k2, l2) = (γ0, γ1)`.
pub fn dejmps_noisy_generic<T: Scalar>(p: &[T; 16], f: &[T; 16], u: &FlagUpdate) -> Result<([T; 16], T)> {
    let zero = T::zero();
    let mut raw: [T; 16] = std::array::from_fn(|_| T::zero());
    for (a, w) in f.iter().enumerate() {
        if *w == zero {
            continue;
        }
        let (a1, b1, a2, b2) = ((a >> 3) as u8 & 1, (a >> 2) as u8 & 1, (a >> 1) as u8 & 1, a as u8 & 1);
        for t in 0..8u8 {
            let (i1, j1, i2) = (t >> 2 & 1, t >> 1 & 1, t & 1);
            let j2 = i1 ^ j1 ^ i2;
            for fl in 0..16u8 {
                let (k1, l1, k2, l2) = (fl >> 3 & 1, fl >> 2 & 1, fl >> 1 & 1, fl & 1);
                let x1 = &p[ensemble_index(i1 ^ a1, j1 ^ b1, k1 ^ a1, l1 ^ b1)];
                if *x1 == zero {
                    continue;
                }
                let x2 = &p[ensemble_index(i2 ^ a2, j2 ^ b2, k2 ^ a2, l2 ^ b2)];
                if *x2 == zero {
                    continue;
                }
                let (g0, g1) = u.apply(k1, l1, k2, l2);
                let o = ensemble_index(i1 ^ i2, i1 ^ j1, g0, g1);
                raw[o] = raw[o].clone() + w.clone() * x1.clone() * x2.clone();
            }
        }
    }
    normalize(raw)
}

/// Binary-pair recurrence on `(p00, p01, p10, p11)`, where the first index
/// is the Bell label of `|B_0i>` and the second the flag.
///
/// With `f̃₁ = 1 − f̃₀` and `q_ab = f̃₀ p_ab + f̃₁ p_{(1−a)(1−b)}` the
/// unnormalized outputs are `q00² + 2q00q01`, `q01²`, `q10² + 2q10q11`, `q11²`.
pub fn binary_step_generic<T: Scalar>(p: &[T; 4], f0: &T) -> Result<([T; 4], T)> {
    let f1 = T::one() - f0.clone();
    let q = |a: usize, b: usize| f0.clone() * p[2 * a + b].clone() + f1.clone() * p[2 * (1 - a) + (1 - b)].clone();
    let (q00, q01, q10, q11) = (q(0, 0), q(0, 1), q(1, 0), q(1, 1));
    let two: T = ratio(2, 1);
    let raw = [
        q00.clone() * q00.clone() + two.clone() * q00 * q01.clone(),
        q01.clone() * q01,
        q10.clone() * q10.clone() + two * q10 * q11.clone(),
        q11.clone() * q11,
    ];
    normalize(raw)
}

/// BBPSSW map `b(p) = (4p²f² + 2pf)/(3p²f² + 3)` on the Werner parameter
/// `p` of `p|B_00><B_00| + (1 − p) id/4`, with success probability
/// `(3p²f² + 3)/6`.
pub fn bbpssw_generic<T: Scalar>(p: &T, f: &T) -> (T, T) {
    let x = p.clone() * f.clone();
    let x2 = x.clone() * x.clone();
    let num = ratio::<T>(4, 1) * x2.clone() + ratio::<T>(2, 1) * x;
    let den = ratio::<T>(3, 1) * x2 + ratio::<T>(3, 1);
    let success = den.clone() / ratio::<T>(6, 1);
    (num / den, success)
}

fn werner_quadratics<T: Scalar>(fid: &T) -> (T, T) {
    let r = (T::one() - fid.clone()) / ratio::<T>(3, 1);
    let a = fid.clone() * fid.clone() + r.clone() * r.clone();
    let d = fid.clone() * fid.clone()
        + ratio::<T>(2, 1) * fid.clone() * r.clone()
        + ratio::<T>(5, 1) * r.clone() * r;
    (a, d)
}

/// BBPSSW fidelity recurrence under two-qubit depolarizing noise `f̃`;
/// returns `(F', success probability)`.
pub fn bbpssw_two_qubit_generic<T: Scalar>(fid: &T, ft: &T) -> (T, T) {
    let (a, d) = werner_quadratics(fid);
    let ft2 = ft.clone() * ft.clone();
    let rest = T::one() - ft2.clone();
    let num = ft2.clone() * a + rest.clone() / ratio::<T>(8, 1);
    let den = ft2 * d + rest / ratio::<T>(2, 1);
    (num / den.clone(), den)
}

/// Worst-case BBPSSW fidelity recurrence `f_I A / (f_I D + 1 − f_I)`;
/// returns `(F', success probability)`.
pub fn bbpssw_worstcase_generic<T: Scalar>(fid: &T, f_i: &T) -> (T, T) {
    let (a, d) = werner_quadratics(fid);
    let den = f_i.clone() * d + T::one() - f_i.clone();
    (f_i.clone() * a / den.clone(), den)
}

/// Noiseless DEJMPS step.
pub fn dejmps_noiseless_step(p: &BellDiagonalState) -> Result<(BellDiagonalState, f64)> {
    let (q, n) = dejmps_noiseless_generic(&p.probs())?;
    Ok((BellDiagonalState::new_unnormalized(q), n))
}

/// Noisy DEJMPS step on the Bell-diagonal marginal.
pub fn dejmps_noisy_bell_step(p: &BellDiagonalState, noise: &NoiseDistribution) -> Result<(BellDiagonalState, f64)> {
    let (q, n) = dejmps_noisy_bell_generic(&p.probs(), &noise.weights())?;
    Ok((BellDiagonalState::new_unnormalized(q), n))
}

/// Noisy DEJMPS step on the labelled ensemble.
pub fn dejmps_noisy_step(
    p: &LabeledEnsembleState,
    noise: &NoiseDistribution,
    u: &FlagUpdate,
) -> Result<(LabeledEnsembleState, f64)> {
    let (q, n) = dejmps_noisy_generic(&p.probs(), &noise.weights(), u)?;
    Ok((LabeledEnsembleState::new_unnormalized(q), n))
}

/// Binary-pair step, see [`binary_step_generic`].
pub fn binary_step(p: &[f64; 4], f0: f64) -> Result<([f64; 4], f64)> {
    binary_step_generic(p, &f0)
}

/// BBPSSW step on the Werner parameter; returns `(b(p), success)`.
pub fn bbpssw_step(p: f64, f: f64) -> (f64, f64) {
    bbpssw_generic(&p, &f)
}

/// BBPSSW fidelity step under two-qubit depolarizing noise.
pub fn bbpssw_two_qubit_step(fid: f64, ft: f64) -> f64 {
    bbpssw_two_qubit_generic(&fid, &ft).0
}

/// Worst-case BBPSSW fidelity step.
pub fn bbpssw_worstcase_step(fid: f64, f_i: f64) -> f64 {
    bbpssw_worstcase_generic(&fid, &f_i).0
}

/// Embeds a binary-pair vector into the labelled ensemble: Bell label
/// `(0, a)` and flag `(0, b)`.
pub fn binary_to_ensemble(p: &[f64; 4]) -> LabeledEnsembleState {
    let mut q = [0.0; 16];
    for a in 0..2u8 {
        for b in 0..2u8 {
            q[ensemble_index(0, a, 0, b)] = p[2 * a as usize + b as usize];
        }
    }
    LabeledEnsembleState::new_unnormalized(q)
}

/// A recurrence together with its parameters, acting on raw probability
/// vectors of dimension [`RecurrenceMap::dim`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum RecurrenceMap {
    DejmpsNoiseless,
    DejmpsBell { noise: NoiseDistribution },
    DejmpsNoisy { noise: NoiseDistribution, flags: FlagUpdate },
    Binary { f0: f64 },
    Bbpssw { f: f64 },
    BbpsswTwoQubit { f: f64 },
    BbpsswWorstCase { f_i: f64 },
}

impl RecurrenceMap {
    /// Length of the probability vector the map acts on.
    pub fn dim(&self) -> usize {
        match self {
            RecurrenceMap::DejmpsNoiseless | RecurrenceMap::DejmpsBell { .. } | RecurrenceMap::Binary { .. } => 4,
            RecurrenceMap::DejmpsNoisy { .. } => 16,
            RecurrenceMap::Bbpssw { .. } | RecurrenceMap::BbpsswTwoQubit { .. } | RecurrenceMap::BbpsswWorstCase { .. } => 1,
        }
    }

    /// One round: normalized output and pre-normalization success `N`.
    pub fn step(&self, p: &[f64]) -> Result<(Vec<f64>, f64)> {
        if p.len() != self.dim() {
            return Err(DistillError::Dimension(format!("map acts on {} entries, got {}", self.dim(), p.len())));
        }
        Ok(match self {
            RecurrenceMap::DejmpsNoiseless => {
                let (q, n) = dejmps_noiseless_generic(&to4(p))?;
                (q.to_vec(), n)
            }
            RecurrenceMap::DejmpsBell { noise } => {
                let (q, n) = dejmps_noisy_bell_generic(&to4(p), &noise.weights())?;
                (q.to_vec(), n)
            }
            RecurrenceMap::DejmpsNoisy { noise, flags } => {
                let mut a = [0.0; 16];
                a.copy_from_slice(p);
                let (q, n) = dejmps_noisy_generic(&a, &noise.weights(), flags)?;
                (q.to_vec(), n)
            }
            RecurrenceMap::Binary { f0 } => {
                let (q, n) = binary_step_generic(&to4(p), f0)?;
                (q.to_vec(), n)
            }
            RecurrenceMap::Bbpssw { f } => {
                let (q, n) = bbpssw_generic(&p[0], f);
                (vec![q], n)
            }
            RecurrenceMap::BbpsswTwoQubit { f } => {
                let (q, n) = bbpssw_two_qubit_generic(&p[0], f);
                (vec![q], n)
            }
            RecurrenceMap::BbpsswWorstCase { f_i } => {
                let (q, n) = bbpssw_worstcase_generic(&p[0], f_i);
                (vec![q], n)
            }
        })
    }

    /// Fidelity with `|B_00>` encoded by a vector this map acts on.
    pub fn fidelity_of(&self, p: &[f64]) -> f64 {
        match self {
            RecurrenceMap::DejmpsNoisy { .. } => p[..4].iter().sum(),
            RecurrenceMap::Binary { .. } => p[0] + p[1],
            RecurrenceMap::Bbpssw { .. } => (3.0 * p[0] + 1.0) / 4.0,
            _ => p[0],
        }
    }
}

fn to4(p: &[f64]) -> [f64; 4] {
    [p[0], p[1], p[2], p[3]]
}

/// One row of a recurrence trace: state after `round` rounds and the success
/// probability of the round that produced it (1 for the initial row).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub round: usize,
    pub p: Vec<f64>,
    pub success: f64,
}

/// Iterates `map` for `rounds` rounds from `p0`, recording every state.
pub fn trace(map: &RecurrenceMap, p0: &[f64], rounds: usize) -> Result<Vec<TraceRow>> {
    let mut rows = vec![TraceRow { round: 0, p: p0.to_vec(), success: 1.0 }];
    let mut p = p0.to_vec();
    for r in 1..=rounds {
        let (q, n) = map.step(&p)?;
        rows.push(TraceRow { round: r, p: q.clone(), success: n });
        p = q;
    }
    Ok(rows)
}

/// The Bell-diagonal vector in [`BELL_ORDER`] for a Werner state of fidelity `fid`.
pub fn werner_vector(fid: f64) -> [f64; 4] {
    let r = (1.0 - fid) / 3.0;
    let mut p = [0.0; 4];
    for (s, &(i, j)) in BELL_ORDER.iter().enumerate() {
        p[s] = if (i, j) == (0, 0) { fid } else { r };
    }
    p
}
