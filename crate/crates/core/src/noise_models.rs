//! Pauli noise models applied by the lab demon on Alice's qubits, the
//! depolarizing transmission channel, and standard-form bookkeeping.
//!
//! Noise is only ever applied on Alice's side: by the symmetry of the Bell
//! basis, a Pauli on Bob's qubit acts on Bell labels exactly like the same
//! Pauli on Alice's qubit.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{DistillError, Result};
use crate::quantum_core::{bell_projector, kron, BellDiagonalState, CMat, Cplx, DensityMatrix};

fn check_unit(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) || !x.is_finite() {
        return Err(DistillError::Domain(format!("{name} = {x} outside [0, 1]")));
    }
    Ok(())
}

/// Sixteen probabilities `f̃_{α1β1α2β2}` of the two-qubit Pauli operator
/// `σ_{α1β1} ⊗ σ_{α2β2}` applied to Alice's qubits of the two pairs
/// entering one distillation step.
///
/// Index layout: `α1·8 + β1·4 + α2·2 + β2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseDistribution {
    f: [f64; 16],
}

impl NoiseDistribution {
    pub fn new(f: [f64; 16]) -> Result<Self> {
        if f.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(DistillError::Domain("negative noise weight".into()));
        }
        let s: f64 = f.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(DistillError::Domain(format!("noise weights sum to {s}")));
        }
        Ok(NoiseDistribution { f })
    }

    pub fn trivial() -> Self {
        let mut f = [0.0; 16];
        f[0] = 1.0;
        NoiseDistribution { f }
    }

    /// Independent noise on the two qubits, each distributed by `single`
    /// (indexed `α·2 + β`).
    pub fn product(single: [f64; 4]) -> Result<Self> {
        let mut f = [0.0; 16];
        for a in 0..4 {
            for b in 0..4 {
                f[a * 4 + b] = single[a] * single[b];
            }
        }
        Self::new(f)
    }

    pub fn weights(&self) -> [f64; 16] {
        self.f
    }

    pub fn get(&self, a1: u8, b1: u8, a2: u8, b2: u8) -> f64 {
        self.f[((a1 as usize) << 3) | ((b1 as usize) << 2) | ((a2 as usize) << 1) | b2 as usize]
    }

    /// Marginal distribution of the Pauli acting on the second qubit.
    pub fn second_marginal(&self) -> [f64; 4] {
        let mut m = [0.0; 4];
        for (idx, w) in self.f.iter().enumerate() {
            m[idx & 3] += w;
        }
        m
    }
}

/// Independent single-qubit white noise: identity with probability `f`,
/// each nontrivial Pauli with probability `(1 − f)/3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleQubitWhiteNoise {
    pub f: f64,
}

/// Two-qubit depolarizing noise: with probability `f̃` nothing happens,
/// otherwise a uniformly random two-qubit Pauli is applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoQubitCorrelatedNoise {
    pub f: f64,
}

/// Bit-flip-only noise: identity with probability `f̃₀`, `σx` otherwise,
/// independently on each pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryNoise {
    pub f0: f64,
}

/// Worst-case decomposition of a noisy step: the ideal step with
/// probability `f_I`, otherwise a constant map with a useless output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseNoise {
    pub f_i: f64,
}

/// Depolarizing transmission channel `Φ(ρ) = βρ + (1 − β) id/d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelBeta {
    pub beta: f64,
}

impl SingleQubitWhiteNoise {
    pub fn new(f: f64) -> Result<Self> {
        check_unit("f", f)?;
        Ok(SingleQubitWhiteNoise { f })
    }

    pub fn single(&self) -> [f64; 4] {
        let r = (1.0 - self.f) / 3.0;
        [self.f, r, r, r]
    }

    pub fn distribution(&self) -> NoiseDistribution {
        NoiseDistribution::product(self.single()).expect("white noise weights are valid")
    }
}

impl TwoQubitCorrelatedNoise {
    pub fn new(f: f64) -> Result<Self> {
        check_unit("f̃", f)?;
        Ok(TwoQubitCorrelatedNoise { f })
    }

    pub fn distribution(&self) -> NoiseDistribution {
        let mut w = [(1.0 - self.f) / 16.0; 16];
        w[0] += self.f;
        NoiseDistribution { f: w }
    }
}

impl BinaryNoise {
    pub fn new(f0: f64) -> Result<Self> {
        check_unit("f̃₀", f0)?;
        Ok(BinaryNoise { f0 })
    }

    /// Supported only on `σ_{0β1} ⊗ σ_{0β2}`.
    pub fn distribution(&self) -> NoiseDistribution {
        NoiseDistribution::product([self.f0, 1.0 - self.f0, 0.0, 0.0]).expect("binary noise weights are valid")
    }
}

impl WorstCaseNoise {
    pub fn new(f_i: f64) -> Result<Self> {
        check_unit("f_I", f_i)?;
        Ok(WorstCaseNoise { f_i })
    }
}

/// The constant branch of the worst-case decomposition: every input on the
/// two pairs is replaced by `|B_01><B_01| ⊗ |B_00><B_00|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorstCaseChannel {
    pub f_i: f64,
}

impl WorstCaseChannel {
    /// The fixed output of the failure branch, on four qubits.
    pub fn failure_output(&self) -> DensityMatrix {
        DensityMatrix::new(kron(&bell_projector(0, 1), &bell_projector(0, 0))).expect("projector is a state")
    }

    /// Output of the failure branch for any four-qubit input.
    pub fn apply_failure(&self, input: &DensityMatrix) -> Result<DensityMatrix> {
        if input.dim() != 16 {
            return Err(DistillError::Dimension(format!("two-pair input must have dim 16, got {}", input.dim())));
        }
        Ok(self.failure_output())
    }

    /// `f_I · ideal + (1 − f_I) · failure` for a given ideal-branch output.
    pub fn apply(&self, ideal_output: &DensityMatrix) -> Result<DensityMatrix> {
        let bad = self.apply_failure(ideal_output)?;
        let m = ideal_output.matrix() * Cplx::new(self.f_i, 0.0) + bad.matrix() * Cplx::new(1.0 - self.f_i, 0.0);
        DensityMatrix::new(m)
    }
}

/// Structural description of the worst-case map for a given `f_I`.
pub fn worstcase_map_check(f_i: f64) -> Result<WorstCaseChannel> {
    check_unit("f_I", f_i)?;
    Ok(WorstCaseChannel { f_i })
}

impl ChannelBeta {
    pub fn new(beta: f64) -> Result<Self> {
        check_unit("β", beta)?;
        Ok(ChannelBeta { beta })
    }

    pub fn apply_bell(&self, p: &BellDiagonalState) -> BellDiagonalState {
        let q = p.probs().map(|x| self.beta * x + (1.0 - self.beta) / 4.0);
        BellDiagonalState::new_unnormalized(q)
    }

    pub fn apply_density(&self, rho: &DensityMatrix) -> DensityMatrix {
        let d = rho.dim();
        let m = rho.matrix() * Cplx::new(self.beta, 0.0)
            + CMat::identity(d, d) * Cplx::new((1.0 - self.beta) / d as f64, 0.0);
        DensityMatrix::from_matrix_unchecked(m)
    }

    /// Fidelity of the channel output on a perfect pair, `(3β + 1)/4`.
    pub fn output_fidelity(&self) -> f64 {
        (3.0 * self.beta + 1.0) / 4.0
    }
}

/// Lower bound `1 − 17x` on the gate fidelity after depolarization to
/// standard form, for a gate of infidelity `x`.
///
/// For `x > 1/17` the bound is no longer positive and the conversion is not
/// guaranteed to yield a useful gate, which is reported as an error.
pub fn standard_form_fidelity(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(DistillError::Domain(format!("gate infidelity {x} outside [0, 1]")));
    }
    if x > 1.0 / 17.0 {
        return Err(DistillError::Domain(format!("standard form not guaranteed useful for infidelity {x}")));
    }
    Ok(1.0 - 17.0 * x)
}

/// A named noise model as selected on the command line or in a config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "parameter", rename_all = "lowercase")]
pub enum NoiseModel {
    White(f64),
    Corr2(f64),
    Binary(f64),
    Worst(f64),
}

impl NoiseModel {
    pub fn parameter(&self) -> f64 {
        match *self {
            NoiseModel::White(x) | NoiseModel::Corr2(x) | NoiseModel::Binary(x) | NoiseModel::Worst(x) => x,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            NoiseModel::White(_) => "white",
            NoiseModel::Corr2(_) => "corr2",
            NoiseModel::Binary(_) => "binary",
            NoiseModel::Worst(_) => "worst",
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_unit(self.kind(), self.parameter())
    }

    /// The Pauli distribution of the model. The worst-case model is not a
    /// Pauli mixture and has none.
    pub fn distribution(&self) -> Result<NoiseDistribution> {
        self.validate()?;
        match *self {
            NoiseModel::White(f) => Ok(SingleQubitWhiteNoise { f }.distribution()),
            NoiseModel::Corr2(f) => Ok(TwoQubitCorrelatedNoise { f }.distribution()),
            NoiseModel::Binary(f0) => Ok(BinaryNoise { f0 }.distribution()),
            NoiseModel::Worst(_) => Err(DistillError::Domain("worst-case noise has no Pauli distribution".into())),
        }
    }
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind(), self.parameter())
    }
}

impl FromStr for NoiseModel {
    type Err = DistillError;

    /// Parses `kind:parameter`, e.g. `white:0.99`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, value) = s
            .split_once(':')
            .ok_or_else(|| DistillError::Domain(format!("noise spec '{s}' is not kind:parameter")))?;
        let x: f64 = value
            .trim()
            .parse()
            .map_err(|_| DistillError::Domain(format!("noise parameter '{value}' is not a number")))?;
        let model = match kind.trim() {
            "white" => NoiseModel::White(x),
            "corr2" => NoiseModel::Corr2(x),
            "binary" => NoiseModel::Binary(x),
            "worst" => NoiseModel::Worst(x),
            other => return Err(DistillError::Domain(format!("unknown noise kind '{other}'"))),
        };
        model.validate()?;
        Ok(model)
    }
}
