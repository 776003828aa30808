//! Arithmetic of the confidentiality, reduction and robustness bounds.
//!
//! Bounds are reported as computed, without clamping; a bound of at least
//! one carries `vacuous = true`.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{DistillError, Result};
use crate::fixed_point::log_power_norms;
use crate::recurrence::binary_step_generic;
use crate::scalar::rational_to_f64;

/// Above this `n`, `g_{n,d}` is evaluated in the log domain only.
pub const LOG_DOMAIN_THRESHOLD: u64 = 10_000;

/// A named bound value with its inputs and the intermediate terms of the
/// chain that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub bound_name: String,
    pub inputs: Vec<(String, f64)>,
    /// `exp(log_value)`; infinite when it overflows.
    pub value: f64,
    pub log_value: f64,
    pub vacuous: bool,
    pub chain_terms: Vec<(String, f64)>,
}

impl BoundResult {
    fn from_log(name: &str, inputs: Vec<(String, f64)>, log_value: f64, chain_terms: Vec<(String, f64)>) -> Self {
        BoundResult {
            bound_name: name.to_string(),
            inputs,
            value: log_value.exp(),
            log_value,
            vacuous: log_value >= 0.0,
            chain_terms,
        }
    }
}

/// `34·4⁸ + 1`, the constant of the de-Finetti-based reduction.
pub fn definetti_constant() -> BigUint {
    BigUint::from(34u32) * BigUint::from(4u32).pow(8) + BigUint::one()
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(DistillError::Domain(format!("ε = {eps} must be a nonnegative number")));
    }
    Ok(())
}

/// `(34·4⁸ + 1)(64k/n + ε_P)`.
pub fn definetti_bound(n: u64, k: u64, eps_p: f64) -> Result<BoundResult> {
    if k < 1 || k > n {
        return Err(DistillError::Domain(format!("need 1 ≤ k ≤ n, got k = {k}, n = {n}")));
    }
    if !(0.0..=2.0).contains(&eps_p) {
        return Err(DistillError::Domain(format!("ε_P = {eps_p} outside [0, 2]")));
    }
    let c = definetti_constant().to_f64().expect("small constant");
    let inner = 64.0 * k as f64 / n as f64 + eps_p;
    let value = c * inner;
    Ok(BoundResult {
        bound_name: "definetti".into(),
        inputs: vec![("n".into(), n as f64), ("k".into(), k as f64), ("epsilon_P".into(), eps_p)],
        value,
        log_value: value.ln(),
        vacuous: value >= 1.0,
        chain_terms: vec![("constant".into(), c), ("64k/n + epsilon_P".into(), inner)],
    })
}

/// `g_{n,d} = C(n + d² − 1, n)` exactly.
pub fn g_nd(n: u64, d: u64) -> BigUint {
    let top = BigUint::from(n) + BigUint::from(d * d - 1);
    num_integer::binomial(top, BigUint::from(d * d - 1))
}

/// Natural logarithm of a positive big integer.
pub fn ln_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().expect("fits in f64").ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().expect("64-bit mantissa");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// `ln g_{n,d}`: exact binomial for `n ≤` [`LOG_DOMAIN_THRESHOLD`], otherwise
/// the product form `Σ_{i=1}^{d²−1} ln((n + i)/i)`.
pub fn ln_g_nd(n: u64, d: u64) -> f64 {
    if n <= LOG_DOMAIN_THRESHOLD {
        ln_big(&g_nd(n, d))
    } else {
        (1..d * d).map(|i| ((n as f64 + i as f64) / i as f64).ln()).sum()
    }
}

/// `√ε`: distance of suitably chosen purifications of states at trace
/// distance `ε`, as used for the state of pair, lab demon and environment.
pub fn purification_lift(eps: f64) -> Result<f64> {
    check_eps(eps)?;
    Ok(eps.sqrt())
}

/// `2√ε`: confidentiality when the noisy apparatus leaks its transcript.
pub fn leak_bound(eps: f64) -> Result<f64> {
    check_eps(eps)?;
    Ok(2.0 * eps.sqrt())
}

/// `4√ε`: distance to a state with matching local marginals.
pub fn localstates_lift(eps: f64) -> Result<f64> {
    check_eps(eps)?;
    Ok(4.0 * eps.sqrt())
}

/// `4√2 · g_{n,4} · ε_P^{1/4}`, assembled from the lifts:
/// `g · localstates_lift(2 · purification_lift(ε_P))`.
pub fn postselection_bound(n: u64, eps_p: f64) -> Result<BoundResult> {
    if n < 1 {
        return Err(DistillError::Domain("n must be at least 1".into()));
    }
    check_eps(eps_p)?;
    let pur = purification_lift(eps_p)?;
    let leak = leak_bound(eps_p)?;
    let local = localstates_lift(2.0 * pur)?;
    let ln_g = ln_g_nd(n, 4);
    let log_value = if local == 0.0 { f64::NEG_INFINITY } else { ln_g + local.ln() };
    let mut result = BoundResult::from_log(
        "postselection",
        vec![("n".into(), n as f64), ("epsilon_P".into(), eps_p)],
        log_value,
        vec![
            ("purification_lift".into(), pur),
            ("leak_bound".into(), leak),
            ("localstates_lift".into(), local),
            ("ln_g".into(), ln_g),
        ],
    );
    // multiply directly while g is representable, avoiding exp/ln rounding
    if n <= LOG_DOMAIN_THRESHOLD {
        if let Some(g) = g_nd(n, 4).to_f64().filter(|g| g.is_finite()) {
            result.value = g * local;
            result.vacuous = result.value >= 1.0;
        }
    }
    Ok(result)
}

/// How the i.i.d. convergence distance `ε_P(n)` is supplied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EpsilonModel {
    Value { epsilon: f64 },
    /// `ε_P(n) = a · n^{−b}`.
    Fitted { a: f64, b: f64 },
}

impl EpsilonModel {
    /// `ε_P(n)`, or `ε_P(n − √n)` when the parameter-estimation sacrifice is
    /// taken into account.
    pub fn eval(&self, n: u64, with_estimation: bool) -> f64 {
        let m = if with_estimation { n as f64 - (n as f64).sqrt() } else { n as f64 };
        match *self {
            EpsilonModel::Value { epsilon } => epsilon,
            EpsilonModel::Fitted { a, b } => a * m.powf(-b),
        }
    }
}

/// `exp(−η²√k/2)`.
pub fn hoeffding_pe_abort(eta: f64, k: f64) -> Result<f64> {
    if !(eta > 0.0) || !(k >= 1.0) {
        return Err(DistillError::Domain(format!("need η > 0 and k ≥ 1, got η = {eta}, k = {k}")));
    }
    Ok((-eta * eta * k.sqrt() / 2.0).exp())
}

/// Pair budget of the robustness statement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairBudget {
    /// `c = ξ·2^{M+2}`.
    pub c: f64,
    /// `c·2^M`, the pairs left for distillation.
    pub distillation_pairs: f64,
    /// Real solution of `k − √k = c·2^M`.
    pub k: f64,
    pub k_ceil: u64,
}

/// Solves `k − √k = t` for `k` through the quadratic in `√k`.
pub fn invert_k_minus_sqrt_k(t: f64) -> f64 {
    let s = (1.0 + (1.0 + 4.0 * t).sqrt()) / 2.0;
    s * s
}

pub fn pair_budget(m: u32, xi: f64) -> Result<PairBudget> {
    if m < 1 || !(xi > 0.0) {
        return Err(DistillError::Domain(format!("need M ≥ 1 and ξ > 0, got M = {m}, ξ = {xi}")));
    }
    let c = xi * 2f64.powi(m as i32 + 2);
    let t = c * 2f64.powi(m as i32);
    let k = invert_k_minus_sqrt_k(t);
    Ok(PairBudget { c, distillation_pairs: t, k, k_ceil: k.ceil() as u64 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustnessInput {
    pub beta: f64,
    pub f_min: f64,
    pub k: f64,
    pub m: u32,
    pub xi: f64,
}

impl RobustnessInput {
    /// Checks ranges and the consistency `k − √k = ξ·2^{2M+2}`.
    pub fn new(beta: f64, f_min: f64, k: f64, m: u32, xi: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) || !(0.0..=1.0).contains(&f_min) {
            return Err(DistillError::Domain(format!("β = {beta}, F_min = {f_min} must lie in [0, 1]")));
        }
        if m < 1 || !(xi > 0.0) || !(k >= 1.0) {
            return Err(DistillError::Domain(format!("need M ≥ 1, ξ > 0, k ≥ 1 (M = {m}, ξ = {xi}, k = {k})")));
        }
        let lhs = k - k.sqrt();
        let rhs = xi * 2f64.powi(2 * m as i32 + 2);
        if (lhs - rhs).abs() > 1e-9 * lhs.abs().max(1.0) {
            return Err(DistillError::Precondition(format!("k − √k = {lhs} but ξ·2^(2M+2) = {rhs}")));
        }
        Ok(RobustnessInput { beta, f_min, k, m, xi })
    }

    /// Input whose `ξ` is implied by `k` total pairs.
    pub fn from_pairs(beta: f64, f_min: f64, k: f64, m: u32) -> Result<Self> {
        let xi = (k - k.sqrt()) / 2f64.powi(2 * m as i32 + 2);
        Self::new(beta, f_min, k, m, xi)
    }

    /// Input whose `k` is implied by the budget multiplier `ξ`.
    pub fn from_budget(beta: f64, f_min: f64, m: u32, xi: f64) -> Result<Self> {
        let b = pair_budget(m, xi)?;
        Self::new(beta, f_min, b.k, m, xi)
    }

    /// `3β + 1 − 4F_min`: four times the margin of the channel output
    /// fidelity `(3β + 1)/4` over `F_min`.
    pub fn fidelity_gap(&self) -> f64 {
        3.0 * self.beta + 1.0 - 4.0 * self.f_min
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessBound {
    pub value: f64,
    pub vacuous: bool,
    /// `exp(−(3β + 1 − 4F_min)²√k/128)`.
    pub estimation_term: f64,
    /// `M·exp(−ξ)`.
    pub distillation_term: f64,
    /// Per-round Chernoff bounds `exp(−(d²/2)(1 − d)^{m−1} p^m c 2^M)` for
    /// `d = p = 1/2`, `m = 1..=M`.
    pub per_round: Vec<f64>,
    pub c: f64,
}

/// Abort-probability bound against an honest channel `Φ_β`:
/// `exp(−(3β + 1 − 4F_min)²√k/128) + M·exp(−ξ)`.
///
/// The estimation term uses the margin `η = (3β + 1 − 4F_min)/8`, half the
/// gap between the channel output fidelity and `F_min`.
pub fn robustness_bound(input: &RobustnessInput) -> Result<RobustnessBound> {
    let threshold = (4.0 * input.f_min - 1.0) / 3.0;
    if input.beta <= threshold {
        return Err(DistillError::Undistillable { beta: input.beta, threshold });
    }
    let gap = input.fidelity_gap();
    let estimation_term = (-gap * gap * input.k.sqrt() / 128.0).exp();
    let c = input.xi * 2f64.powi(input.m as i32 + 2);
    let scale = c * 2f64.powi(input.m as i32);
    let (d, p) = (0.5f64, 0.5f64);
    let per_round: Vec<f64> = (1..=input.m)
        .map(|r| (-(d * d / 2.0) * (1.0 - d).powi(r as i32 - 1) * p.powi(r as i32) * scale).exp())
        .collect();
    let distillation_term = input.m as f64 * (-input.xi).exp();
    let value = estimation_term + distillation_term;
    Ok(RobustnessBound { value, vacuous: value >= 1.0, estimation_term, distillation_term, per_round, c })
}

/// Square root of a nonnegative rational to within `10^{-digits}`.
pub fn rational_sqrt(x: &BigRational, digits: u32) -> BigRational {
    let scale = BigInt::from(10u32).pow(digits);
    let scaled = (x * BigRational::from_integer(&scale * &scale)).to_integer();
    let root = if scaled <= BigInt::zero() { BigInt::zero() } else { scaled.sqrt() };
    BigRational::new(root, scale)
}

/// Data behind the post-selection crossing analysis for binary pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryPostselectSeries {
    pub noise_rate: f64,
    /// `ln ‖J^n‖₁` for `n = 1..=rounds`.
    pub log_norm: Vec<f64>,
    /// `−4 ln g_{2^n,4}` for `n = 1..=rounds`.
    pub neg4_log_g: Vec<f64>,
    /// Asymptotic per-round slope of `ln ‖J^n‖₁`.
    pub slope_norm: f64,
    /// Per-round slope of `−4 ln g_{2^n,4}` at the last round.
    pub slope_neg4_log_g: f64,
    /// `slope_norm − slope_neg4_log_g`; negative means `g_{2^n,4} ε_n^{1/4}`
    /// eventually decays.
    pub gap: f64,
}

/// Jacobian of the binary-pair map at its distillation fixed point for the
/// noise rate `x = 1 − f̃₀`, computed in exact rational arithmetic (central
/// differences of width `10^{-40}` around a fixed point accurate to
/// `10^{-100}`) and rounded to `f64` at the end.
pub fn binary_jacobian_high_precision(x: &BigRational) -> Result<nalgebra::DMatrix<f64>> {
    let one = BigRational::one();
    let f0 = &one - x;
    let four = BigRational::from_integer(BigInt::from(4));
    let two = BigRational::from_integer(BigInt::from(2));
    let rad = &four * &f0 - BigRational::from_integer(BigInt::from(3));
    if rad < BigRational::zero() {
        return Err(DistillError::Domain("noise rate above 1/4".into()));
    }
    let s = rational_sqrt(&rad, 100) / (&four * &f0 - &two);
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let p_fix = [&half + &s, BigRational::zero(), BigRational::zero(), &half - &s];
    let h = BigRational::new(BigInt::one(), BigInt::from(10u32).pow(40));
    let mut jac = nalgebra::DMatrix::zeros(4, 4);
    for c in 0..4 {
        let mut plus = p_fix.clone();
        let mut minus = p_fix.clone();
        plus[c] = &plus[c] + &h;
        minus[c] = &minus[c] - &h;
        let (fp, _) = binary_step_generic(&plus, &f0)?;
        let (fm, _) = binary_step_generic(&minus, &f0)?;
        for r in 0..4 {
            jac[(r, c)] = rational_to_f64(&((&fp[r] - &fm[r]) / (&two * &h)));
        }
    }
    Ok(jac)
}

/// Compares the decay of `ln ‖J^n‖₁` with the growth of `4 ln g_{2^n,4}`
/// for binary pairs at noise rate `x`, over `rounds ≤ 62` rounds.
pub fn binary_postselect_series(x: f64, rounds: u32) -> Result<BinaryPostselectSeries> {
    if !(x > 0.0 && x <= 0.25) || !(2..=62).contains(&rounds) {
        return Err(DistillError::Domain(format!("need 0 < x ≤ 1/4 and 2 ≤ rounds ≤ 62 (x = {x}, rounds = {rounds})")));
    }
    let xr = BigRational::from_float(x).ok_or_else(|| DistillError::Domain("noise rate not finite".into()))?;
    let jac = binary_jacobian_high_precision(&xr)?;
    let log_norm = log_power_norms(&jac, rounds as usize);
    let neg4_log_g: Vec<f64> = (1..=rounds).map(|n| -4.0 * ln_g_nd(1u64 << n, 4)).collect();
    let r = rounds as usize;
    let slope_norm = log_norm[r - 1] - log_norm[r - 2];
    let slope_neg4_log_g = neg4_log_g[r - 1] - neg4_log_g[r - 2];
    Ok(BinaryPostselectSeries {
        noise_rate: x,
        gap: slope_norm - slope_neg4_log_g,
        log_norm,
        neg4_log_g,
        slope_norm,
        slope_neg4_log_g,
    })
}
