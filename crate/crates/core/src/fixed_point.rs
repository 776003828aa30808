//! Fixed points of the recurrences, their attractivity, and convergence
//! rates.
//!
//! Attractivity is certified by the spectral radius of a central
//! finite-difference Jacobian of the normalized map, taken in the raw
//! coordinates the map acts on. The normalization direction contributes an
//! eigenvalue of zero and does not affect the radius.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{DistillError, Result};
use crate::noise_models::NoiseDistribution;
use crate::quantum_core::{ensemble_index, LabeledEnsembleState, BELL_ORDER};
use crate::recurrence::{FlagUpdate, RecurrenceMap};
use crate::scalar::{ratio, Scalar};

/// Default finite-difference step.
pub const FD_STEP: f64 = 1e-6;
/// Errors below this bound are considered to be in the linear regime.
pub const LINEAR_REGIME: f64 = 1e-2;
/// Largest fixed-point residual accepted by [`jacobian_spectral_radius`].
pub const JACOBIAN_RESIDUAL_TOL: f64 = 1e-8;
/// Negative radicands down to this size are rounding artifacts of a
/// vanishing radicand and are treated as zero.
pub const RADICAND_ROUNDING: f64 = 1e-12;

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub location: Vec<f64>,
    /// `‖f(p∞) − p∞‖₁`.
    pub residual: f64,
    /// `None` when the iteration did not converge.
    pub attracting: Option<bool>,
    /// Spectral radius of the Jacobian at `location`, when converged.
    pub lambda_max: Option<f64>,
    pub iterations_used: usize,
    pub converged: bool,
}

/// Iterates `map` until successive iterates differ by less than `tol` in
/// 1-norm, or `maxiter` rounds have been applied.
pub fn iterate_to_fixed_point(map: &RecurrenceMap, p0: &[f64], tol: f64, maxiter: usize) -> Result<FixedPointReport> {
    if tol <= 0.0 {
        return Err(DistillError::Domain(format!("tolerance {tol} must be positive")));
    }
    let mut p = p0.to_vec();
    let mut last_step = f64::INFINITY;
    let mut used = 0;
    while used < maxiter {
        let (q, _) = map.step(&p)?;
        last_step = l1(&q, &p);
        p = q;
        used += 1;
        if last_step < tol {
            break;
        }
    }
    let converged = last_step < tol;
    let (fp, _) = map.step(&p)?;
    let residual = l1(&fp, &p);
    let (attracting, lambda_max) = if converged {
        let (rho, _) = jacobian_at(map, &p, FD_STEP)?;
        (Some(rho < 1.0), Some(rho))
    } else {
        (None, None)
    };
    Ok(FixedPointReport { location: p, residual, attracting, lambda_max, iterations_used: used, converged })
}

/// Central finite-difference Jacobian of the normalized map at `p`.
pub fn jacobian(map: &RecurrenceMap, p: &[f64], h: f64) -> Result<DMatrix<f64>> {
    if h <= 0.0 {
        return Err(DistillError::Domain(format!("step {h} must be positive")));
    }
    let d = map.dim();
    let mut jac = DMatrix::zeros(d, d);
    for c in 0..d {
        let mut plus = p.to_vec();
        let mut minus = p.to_vec();
        plus[c] += h;
        minus[c] -= h;
        let (fp, _) = map.step(&plus)?;
        let (fm, _) = map.step(&minus)?;
        for r in 0..d {
            jac[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Largest eigenvalue magnitude of a real square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)].abs();
    }
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn jacobian_at(map: &RecurrenceMap, p: &[f64], h: f64) -> Result<(f64, DMatrix<f64>)> {
    let jac = jacobian(map, p, h)?;
    Ok((spectral_radius(&jac), jac))
}

/// Spectral radius and Jacobian of `map` at the fixed point `p_fix`.
pub fn jacobian_spectral_radius(map: &RecurrenceMap, p_fix: &[f64], h: f64) -> Result<(f64, DMatrix<f64>)> {
    let (fp, _) = map.step(p_fix)?;
    let res = l1(&fp, p_fix);
    if res > JACOBIAN_RESIDUAL_TOL {
        return Err(DistillError::Precondition(format!("fixed-point residual {res:e} too large")));
    }
    jacobian_at(map, p_fix, h)
}

/// Induced 1-norm (largest absolute column sum).
pub fn induced_one_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols()).map(|c| m.column(c).iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// `ln ‖J^n‖₁` for `n = 1..=rounds`, accumulated with rescaling so that
/// very small norms do not underflow.
pub fn log_power_norms(jac: &DMatrix<f64>, rounds: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(rounds);
    let mut acc = DMatrix::<f64>::identity(jac.nrows(), jac.ncols());
    let mut log_scale = 0.0;
    for _ in 0..rounds {
        acc = jac * acc;
        let nrm = induced_one_norm(&acc);
        if nrm == 0.0 {
            out.push(f64::NEG_INFINITY);
            continue;
        }
        log_scale += nrm.ln();
        acc /= nrm;
        out.push(log_scale);
    }
    out
}

fn binary_radical(f0: f64) -> Result<f64> {
    let r = 4.0 * f0 - 3.0;
    if r < 0.0 || !(0.0..=1.0).contains(&f0) {
        return Err(DistillError::Domain(format!("f̃₀ = {f0} has no real distillation fixed point (needs f̃₀ ≥ 3/4)")));
    }
    Ok(r.sqrt())
}

/// Distillation fixed point `(1/2 + s, 0, 0, 1/2 − s)` of the binary-pair
/// recurrence, `s = √(4f̃₀ − 3)/(4f̃₀ − 2)`.
pub fn binary_fixed_point(f0: f64) -> Result<[f64; 4]> {
    let s = binary_radical(f0)? / (4.0 * f0 - 2.0);
    Ok([0.5 + s, 0.0, 0.0, 0.5 - s])
}

/// Leading eigenvalue `(f̃₀√(4f̃₀ − 3) − f̃₀)/(2f̃₀ − 1)` of the binary-pair
/// Jacobian at [`binary_fixed_point`]; signed.
pub fn binary_lambda_max(f0: f64) -> Result<f64> {
    let s = binary_radical(f0)?;
    Ok((f0 * s - f0) / (2.0 * f0 - 1.0))
}

/// [`binary_lambda_max`] expressed through the noise rate `x = 1 − f̃₀`,
/// evaluated without cancellation so that rates far below machine epsilon
/// remain accurate.
pub fn binary_lambda_max_from_noise(x: f64) -> Result<f64> {
    if !(0.0..=0.25).contains(&x) {
        return Err(DistillError::Domain(format!("noise rate {x} outside [0, 1/4]")));
    }
    // √(1 − 4x) − 1 = −4x / (√(1 − 4x) + 1)
    let root_minus_one = -4.0 * x / ((1.0 - 4.0 * x).sqrt() + 1.0);
    Ok((1.0 - x) * root_minus_one / (1.0 - 2.0 * x))
}

/// Distillation fixed point `2/3 + √(4 − 9/f² + 6/f)/3` of the BBPSSW map.
pub fn bbpssw_fixed_point(f: f64) -> Result<f64> {
    let rad = 4.0 - 9.0 / (f * f) + 6.0 / f;
    if !(rad >= 0.0) {
        return Err(DistillError::Domain(format!("f = {f} admits no distillation fixed point")));
    }
    Ok(2.0 / 3.0 + rad.sqrt() / 3.0)
}

/// Derivative `b'(p) = 2f(1 + 4fp − f²p²)/(3(1 + f²p²)²)` of the BBPSSW map.
pub fn bbpssw_derivative(p: f64, f: f64) -> f64 {
    let x = f * p;
    2.0 * f * (1.0 + 4.0 * x - x * x) / (3.0 * (1.0 + x * x).powi(2))
}

/// Closed form `(9 − 3f)/(f(3 + 2(2 + √(4 − 9/f² + 6/f))f))` of `b'(p∞)`.
pub fn bbpssw_fixed_point_derivative(f: f64) -> Result<f64> {
    let rad = 4.0 - 9.0 / (f * f) + 6.0 / f;
    if !(rad >= 0.0) {
        return Err(DistillError::Domain(format!("f = {f} admits no distillation fixed point")));
    }
    Ok((9.0 - 3.0 * f) / (f * (3.0 + 2.0 * (2.0 + rad.sqrt()) * f)))
}

/// `(F_min, F_max) = (3 ∓ √(10 − 9/f̃²))/4` of the two-qubit-noise BBPSSW
/// fidelity recurrence.
pub fn bbpssw_two_qubit_fixed_points(ft: f64) -> Result<(f64, f64)> {
    let rad = 10.0 - 9.0 / (ft * ft);
    // at f̃ = 3/√10 the radicand vanishes but rounds to about −2e-15
    if !(rad >= -RADICAND_ROUNDING) || ft > 1.0 {
        return Err(DistillError::Domain(format!("f̃ = {ft} below 3/√10")));
    }
    let s = rad.max(0.0).sqrt();
    Ok(((3.0 - s) / 4.0, (3.0 + s) / 4.0))
}

/// Coefficients `(c0, c1, c2, c3)` of the worst-case fixed-point cubic
/// `−f_I + (9 − 2f_I)F − 14f_I F² + 8f_I F³`.
pub fn worstcase_cubic<T: Scalar>(f_i: &T) -> [T; 4] {
    [
        T::zero() - f_i.clone(),
        ratio::<T>(9, 1) - ratio::<T>(2, 1) * f_i.clone(),
        T::zero() - ratio::<T>(14, 1) * f_i.clone(),
        ratio::<T>(8, 1) * f_i.clone(),
    ]
}

/// Generic discriminant `18abcd − 4b³d + b²c² − 4ac³ − 27a²d²` of
/// `aF³ + bF² + cF + d`.
pub fn cubic_discriminant<T: Scalar>(coeffs: &[T; 4]) -> T {
    let [d, c, b, a] = coeffs.clone();
    let k = |n: i64| ratio::<T>(n, 1);
    k(18) * a.clone() * b.clone() * c.clone() * d.clone() - k(4) * b.clone() * b.clone() * b.clone() * d.clone()
        + b.clone() * b.clone() * c.clone() * c.clone()
        - k(4) * a.clone() * c.clone() * c.clone() * c
        - k(27) * a.clone() * a * d.clone() * d
}

/// `Δ(f_I) = −36(648f_I − 873f_I² − 212f_I³ + 436f_I⁴)`.
pub fn worstcase_discriminant_generic<T: Scalar>(f: &T) -> T {
    let f2 = f.clone() * f.clone();
    let f3 = f2.clone() * f.clone();
    let f4 = f3.clone() * f.clone();
    let inner = ratio::<T>(648, 1) * f.clone() - ratio::<T>(873, 1) * f2 - ratio::<T>(212, 1) * f3
        + ratio::<T>(436, 1) * f4;
    ratio::<T>(-36, 1) * inner
}

pub fn worstcase_discriminant(f_i: f64) -> f64 {
    worstcase_discriminant_generic(&f_i)
}

fn polish_root(c: &[f64; 4], mut x: f64) -> f64 {
    for _ in 0..50 {
        let v = ((c[3] * x + c[2]) * x + c[1]) * x + c[0];
        let dv = (3.0 * c[3] * x + 2.0 * c[2]) * x + c[1];
        if dv == 0.0 {
            break;
        }
        let step = v / dv;
        x -= step;
        if step.abs() <= 1e-16 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

/// Real roots, ascending, of `c3 F³ + c2 F² + c1 F + c0` with `c3 ≠ 0`.
pub fn real_cubic_roots(c: &[f64; 4]) -> Vec<f64> {
    let (a, b, cc, d) = (c[3], c[2], c[1], c[0]);
    let (b, cc, d) = (b / a, cc / a, d / a);
    // depressed cubic t³ + pt + q with F = t − b/3
    let p = cc - b * b / 3.0;
    let q = 2.0 * b.powi(3) / 27.0 - b * cc / 3.0 + d;
    let shift = -b / 3.0;
    let disc = -(4.0 * p.powi(3) + 27.0 * q * q);
    let scale = 1e-12 * (p.abs().powf(1.5) + q.abs()).max(1e-300);
    let mut roots = if disc > scale {
        let m = 2.0 * (-p / 3.0).sqrt();
        let theta = (3.0 * q / (p * m)).clamp(-1.0, 1.0).acos() / 3.0;
        (0..3).map(|k| m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() + shift).collect::<Vec<_>>()
    } else if disc < -scale {
        let s = (q * q / 4.0 + p.powi(3) / 27.0).sqrt();
        vec![(-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt() + shift]
    } else if p.abs() < 1e-14 {
        vec![shift]
    } else {
        let r = (q / 2.0).cbrt();
        vec![-2.0 * r + shift, r + shift]
    };
    for r in roots.iter_mut() {
        *r = polish_root(c, *r);
    }
    roots.sort_by(|a, b| a.total_cmp(b));
    roots
}

/// Real fixed points of the worst-case BBPSSW recurrence, ascending.
pub fn worstcase_fixed_points(f_i: f64) -> Result<Vec<f64>> {
    if !(f_i > 0.0 && f_i <= 1.0) {
        return Err(DistillError::Domain(format!("f_I = {f_i} outside (0, 1]")));
    }
    Ok(real_cubic_roots(&worstcase_cubic(&f_i)))
}

/// Bisection for a sign change of `g` on `[lo, hi]`.
pub fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let (glo, ghi) = (g(lo), g(hi));
    if glo == 0.0 {
        return Ok(lo);
    }
    if ghi == 0.0 {
        return Ok(hi);
    }
    if glo.signum() == ghi.signum() {
        return Err(DistillError::Bracket { lo, hi });
    }
    let neg_lo = glo < 0.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm == 0.0 {
            return Ok(mid);
        }
        if (gm < 0.0) == neg_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Critical noise `f_I` at which the worst-case discriminant changes sign;
/// above it the cubic has three real fixed points.
pub fn critical_noise() -> Result<f64> {
    bisect(worstcase_discriminant, 0.9, 1.0, 1e-15)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceFit {
    /// Slope `−b` of `ln ‖p_n − p∞‖₁` against the round `n`.
    pub slope: f64,
    /// Intercept `a`.
    pub intercept: f64,
    pub r_squared: f64,
    pub rounds_used: usize,
    /// Exponent `b'` in `ε ∈ O(N^{−b'})` for `N = 2^n` input pairs.
    pub pair_exponent: f64,
    pub fixed_point: Vec<f64>,
}

/// Least-squares line through `(n, ln ‖p_n − p∞‖₁)` over the rounds in the
/// linear regime whose error is still above `100·ε_mach`.
pub fn convergence_exponent(map: &RecurrenceMap, p0: &[f64], rounds: usize) -> Result<ConvergenceFit> {
    let fix = iterate_to_fixed_point(map, p0, 1e-17, 100_000)?;
    if fix.residual > 1e-14 {
        return Err(DistillError::NoConvergence { iterations: fix.iterations_used, residual: fix.residual });
    }
    let floor = 1e2 * f64::EPSILON;
    let mut pts = Vec::new();
    let mut p = p0.to_vec();
    for n in 1..=rounds {
        p = map.step(&p)?.0;
        let e = l1(&p, &fix.location);
        if e < floor {
            break;
        }
        if e < LINEAR_REGIME {
            pts.push((n as f64, e.ln()));
        }
    }
    if pts.len() < 10 {
        return Err(DistillError::Precondition(format!("only {} usable rounds for the fit (need 10)", pts.len())));
    }
    let m = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    let intercept = (sy - slope * sx) / m;
    let mean = sy / m;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - mean).powi(2)).sum();
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(ConvergenceFit {
        slope,
        intercept,
        r_squared,
        rounds_used: pts.len(),
        pair_exponent: -slope / std::f64::consts::LN_2,
        fixed_point: fix.location,
    })
}

fn embed_correlated(c: &[f64; 4]) -> [f64; 16] {
    let mut p = [0.0; 16];
    for (s, &(i, j)) in BELL_ORDER.iter().enumerate() {
        p[ensemble_index(i, j, i, j)] = c[s];
    }
    p
}

/// Fixed point of the noisy DEJMPS recurrence under the ansatz of vanishing
/// cross-probabilities, returned as the correlated weights `p_{ijij}` in
/// Bell order.
///
/// The four-equation system is solved by damped iteration with factor 1/2,
/// falling back to plain iteration; the solution is checked against the
/// full sixteen-component map.
pub fn reduced_noisy_dejmps_fixed_point(noise: &NoiseDistribution, flags: &FlagUpdate) -> Result<[f64; 4]> {
    let map = RecurrenceMap::DejmpsNoisy { noise: *noise, flags: *flags };
    let reduced = |c: &[f64; 4]| -> Result<[f64; 4]> {
        let (q, _) = map.step(&embed_correlated(c))?;
        let s = LabeledEnsembleState::new_unnormalized(q.try_into().expect("16 entries"));
        let part = s.correlated_part();
        let tot: f64 = part.iter().sum();
        Ok(part.map(|x| x / tot))
    };
    let solve = |damping: f64| -> Result<Option<[f64; 4]>> {
        let mut c = [1.0, 0.0, 0.0, 0.0];
        for _ in 0..100_000 {
            let g = reduced(&c)?;
            let next: [f64; 4] = std::array::from_fn(|s| damping * c[s] + (1.0 - damping) * g[s]);
            let delta = l1(&next, &c);
            c = next;
            if delta < 1e-16 {
                return Ok(Some(c));
            }
        }
        Ok(None)
    };
    let c = match solve(0.5)? {
        Some(c) => c,
        None => solve(0.0)?.ok_or(DistillError::NoConvergence { iterations: 100_000, residual: f64::NAN })?,
    };
    let full = embed_correlated(&c);
    let (img, _) = map.step(&full)?;
    let residual = l1(&img, &full);
    if residual > 1e-10 {
        return Err(DistillError::NoConvergence { iterations: 100_000, residual });
    }
    Ok(c)
}

/// `F_min` of noisy DEJMPS on Werner inputs: the infimum of the Werner
/// fidelities from which the Bell-diagonal recurrence converges to the
/// distillation fixed point. Located by bisection on `(1/4, 1)`.
pub fn dejmps_min_fidelity(noise: &NoiseDistribution) -> Result<f64> {
    let map = RecurrenceMap::DejmpsBell { noise: *noise };
    let target = iterate_to_fixed_point(&map, &[1.0, 0.0, 0.0, 0.0], 1e-15, 100_000)?;
    if !target.converged || target.attracting != Some(true) || target.location[0] <= 0.5 {
        return Err(DistillError::Domain("noise admits no attracting distillation fixed point".into()));
    }
    let goal = target.location[0];
    let distills = |fid: f64| -> f64 {
        let p0 = crate::recurrence::werner_vector(fid);
        match iterate_to_fixed_point(&map, &p0, 1e-13, 20_000) {
            Ok(r) if (r.location[0] - goal).abs() < 1e-6 => 1.0,
            _ => -1.0,
        }
    };
    bisect(distills, 0.25, 1.0, 1e-9)
}
