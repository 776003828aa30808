//! Deterministic regeneration of the data behind the standard plots.

use anyhow::Result;
use clap::ValueEnum;
use distill_core::fixed_point::{
    binary_lambda_max_from_noise, critical_noise, iterate_to_fixed_point, real_cubic_roots,
    reduced_noisy_dejmps_fixed_point, worstcase_cubic, worstcase_discriminant, worstcase_fixed_points,
};
use distill_core::recurrence::bbpssw_worstcase_step;
use distill_core::security_bounds::binary_postselect_series;
use distill_core::{
    BellDiagonalState, FlagUpdate, LabeledEnsembleState, NoiseModel, RecurrenceMap, SingleQubitWhiteNoise,
    TwoQubitCorrelatedNoise,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emit::{Cell, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Figure {
    /// Log-distance to the flagged DEJMPS fixed point per round under white noise.
    DejmpsConvergence,
    /// Jacobian spectral radius at the DEJMPS fixed point against the noise rate.
    LambdaMax,
    /// The fixed-point weight p∞_0000 against the noise rate.
    P0000Fixed,
    /// Log fidelity error per round of BBPSSW under white noise.
    BbpsswConvergence,
    /// Discriminant of the worst-case fixed-point cubic.
    Discriminant,
    /// The worst-case fixed-point cubic g_fix(F, f_I).
    Gfix,
    /// Fidelity gain F' − F of the worst-case BBPSSW map.
    WorstcaseAttractivity,
    /// Post-selection crossing analysis for binary pairs at noise 1e-19.
    BinaryPostselect,
}

/// Noise parameters of the convergence plots.
const CONVERGENCE_NOISE: [f64; 3] = [0.97, 0.98, 0.99];

/// Worst-case noise parameters of the g_fix and attractivity plots.
const WORSTCASE_NOISE: [f64; 4] = [0.97, 0.98, 0.99, 1.0];

/// Fidelity of the Werner state every convergence series starts from.
const START_FIDELITY: f64 = 0.9;

/// Rounds applied to obtain the reference fixed point of a convergence plot.
const REFERENCE_ROUNDS: usize = 500;

/// Convergence series stop once the distance falls below this floor.
const ERROR_FLOOR: f64 = 1e-14;

/// Rounds plotted per convergence series at most.
const MAX_ROUNDS: usize = 60;

/// Noise rate of the binary post-selection plot.
const POSTSELECT_NOISE: f64 = 1e-19;

/// Rounds of the binary post-selection plot.
const POSTSELECT_ROUNDS: u32 = 60;

/// `count` log-spaced points from 1e-4 to 1e-1.
fn noise_rates(count: usize) -> Vec<f64> {
    (0..count).map(|i| 10f64.powf(-4.0 + 3.0 * i as f64 / (count - 1) as f64)).collect()
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// `(round, ln distance)` pairs of a trajectory against its reference limit.
fn log_distances(map: &RecurrenceMap, p0: &[f64], distance: impl Fn(&[f64], &[f64]) -> f64) -> Result<Vec<(usize, f64)>> {
    let mut reference = p0.to_vec();
    for _ in 0..REFERENCE_ROUNDS {
        reference = map.step(&reference)?.0;
    }
    let mut p = p0.to_vec();
    let mut out = Vec::new();
    for n in 0..=MAX_ROUNDS {
        let d = distance(&p, &reference);
        if d < ERROR_FLOOR {
            break;
        }
        out.push((n, d.ln()));
        p = map.step(&p)?.0;
    }
    Ok(out)
}

pub fn emit(figure: Figure) -> Result<Table> {
    match figure {
        Figure::DejmpsConvergence => dejmps_convergence(),
        Figure::LambdaMax => lambda_max(),
        Figure::P0000Fixed => p0000_fixed(),
        Figure::BbpsswConvergence => bbpssw_convergence(),
        Figure::Discriminant => discriminant(),
        Figure::Gfix => gfix(),
        Figure::WorstcaseAttractivity => worstcase_attractivity(),
        Figure::BinaryPostselect => binary_postselect(),
    }
}

fn dejmps_convergence() -> Result<Table> {
    let mut t = Table::new(&["f", "round", "log_error"]);
    t.comment("flagged DEJMPS under single-qubit white noise from a correlated Werner state of fidelity 0.9")
        .comment("f: white-noise parameter")
        .comment("round: successful distillation rounds n")
        .comment(format!("log_error: ln ‖p_n − p_fix‖₁ with p_fix after {REFERENCE_ROUNDS} rounds, down to {ERROR_FLOOR:e}"));
    let start = LabeledEnsembleState::correlated(&BellDiagonalState::werner(START_FIDELITY)?).probs();
    for f in CONVERGENCE_NOISE {
        let map = RecurrenceMap::DejmpsNoisy {
            noise: SingleQubitWhiteNoise::new(f)?.distribution(),
            flags: FlagUpdate::default(),
        };
        for (n, e) in log_distances(&map, &start, l1)? {
            t.push(vec![f.into(), n.into(), e.into()]);
        }
    }
    Ok(t)
}

fn flagged_lambda(noise: NoiseModel) -> Option<f64> {
    let map = RecurrenceMap::DejmpsNoisy { noise: noise.distribution().ok()?, flags: FlagUpdate::default() };
    let start = LabeledEnsembleState::correlated(&BellDiagonalState::werner(0.95).ok()?).probs();
    iterate_to_fixed_point(&map, &start, 1e-15, 100_000).ok()?.lambda_max
}

fn lambda_max() -> Result<Table> {
    let mut t = Table::new(&["noise_rate", "white_lambda_max", "corr2_lambda_max", "binary_lambda_max"]);
    t.comment("Jacobian spectral radius at the distillation fixed point of flagged DEJMPS")
        .comment("noise_rate: 1 − f for white noise, 1 − f̃ for correlated noise, 1 − f̃₀ for binary pairs")
        .comment("white_lambda_max: finite-difference spectral radius, single-qubit white noise")
        .comment("corr2_lambda_max: finite-difference spectral radius, two-qubit correlated noise")
        .comment("binary_lambda_max: signed closed-form leading eigenvalue for binary pairs")
        .comment("empty cells: the iteration from a Werner state of fidelity 0.95 did not converge");
    let rows: Vec<Vec<Cell>> = noise_rates(31)
        .into_par_iter()
        .map(|x| {
            vec![
                x.into(),
                flagged_lambda(NoiseModel::White(1.0 - x)).into(),
                flagged_lambda(NoiseModel::Corr2(1.0 - x)).into(),
                binary_lambda_max_from_noise(x).ok().into(),
            ]
        })
        .collect();
    rows.into_iter().for_each(|r| t.push(r));
    Ok(t)
}

fn p0000_fixed() -> Result<Table> {
    let mut t = Table::new(&["noise_rate", "white_p0000", "corr2_p0000"]);
    t.comment("weight p∞_0000 of |B_00> with flag 00 at the flagged DEJMPS fixed point")
        .comment("noise_rate: 1 − f for white noise and 1 − f̃ for correlated noise")
        .comment("white_p0000: single-qubit white noise")
        .comment("corr2_p0000: two-qubit correlated noise")
        .comment("empty cells: the reduced fixed-point solver did not converge");
    let flags = FlagUpdate::default();
    let rows: Vec<Vec<Cell>> = noise_rates(31)
        .into_par_iter()
        .map(|x| {
            let white = SingleQubitWhiteNoise::new(1.0 - x)
                .ok()
                .and_then(|n| reduced_noisy_dejmps_fixed_point(&n.distribution(), &flags).ok());
            let corr = TwoQubitCorrelatedNoise::new(1.0 - x)
                .ok()
                .and_then(|n| reduced_noisy_dejmps_fixed_point(&n.distribution(), &flags).ok());
            vec![x.into(), white.map(|p| p[0]).into(), corr.map(|p| p[0]).into()]
        })
        .collect();
    rows.into_iter().for_each(|r| t.push(r));
    Ok(t)
}

fn bbpssw_convergence() -> Result<Table> {
    let mut t = Table::new(&["f", "round", "log_error"]);
    t.comment("BBPSSW under single-qubit white noise from a Werner state of fidelity 0.9")
        .comment("f: white-noise parameter")
        .comment("round: successful distillation rounds n")
        .comment(format!("log_error: ln |F_n − F_fix| with F_fix after {REFERENCE_ROUNDS} rounds, down to {ERROR_FLOOR:e}"));
    for f in CONVERGENCE_NOISE {
        let map = RecurrenceMap::Bbpssw { f };
        let fidelity_gap = |a: &[f64], b: &[f64]| (map.fidelity_of(a) - map.fidelity_of(b)).abs();
        for (n, e) in log_distances(&map, &[(4.0 * START_FIDELITY - 1.0) / 3.0], fidelity_gap)? {
            t.push(vec![f.into(), n.into(), e.into()]);
        }
    }
    Ok(t)
}

fn discriminant() -> Result<Table> {
    let mut t = Table::new(&["f_i", "discriminant", "real_roots"]);
    t.comment("discriminant Δ(f_I) of the worst-case fixed-point cubic g_fix(F, f_I)")
        .comment("f_i: worst-case noise parameter")
        .comment("discriminant: Δ(f_I); positive means three real fixed points")
        .comment("real_roots: number of real roots found")
        .comment(format!("sign change at f_I = {}", critical_noise()?));
    for i in 0..=200 {
        let f = 0.9 + 0.1 * i as f64 / 200.0;
        let roots = worstcase_fixed_points(f)?;
        t.push(vec![f.into(), worstcase_discriminant(f).into(), roots.len().into()]);
    }
    Ok(t)
}

fn gfix() -> Result<Table> {
    let mut t = Table::new(&["f_i", "fidelity", "g_fix"]);
    t.comment("worst-case fixed-point cubic g_fix(F, f_I) = −f_I + (9 − 2f_I)F − 14f_I F² + 8f_I F³")
        .comment("f_i: worst-case noise parameter")
        .comment("fidelity: F")
        .comment("g_fix: value of the cubic; its zeros are the fixed points");
    for f in WORSTCASE_NOISE {
        let c = worstcase_cubic(&f);
        let roots = real_cubic_roots(&c);
        t.comment(format!("roots at f_I = {f}: {roots:?}"));
        for i in 0..=200 {
            let x = i as f64 / 200.0;
            let v = ((c[3] * x + c[2]) * x + c[1]) * x + c[0];
            t.push(vec![f.into(), x.into(), v.into()]);
        }
    }
    Ok(t)
}

fn worstcase_attractivity() -> Result<Table> {
    let mut t = Table::new(&["f_i", "fidelity", "gain"]);
    t.comment("fidelity gain of one worst-case BBPSSW round")
        .comment("f_i: worst-case noise parameter")
        .comment("fidelity: input fidelity F")
        .comment("gain: F' − F; positive between the middle and largest fixed points");
    for f in WORSTCASE_NOISE {
        for i in 0..=200 {
            let x = i as f64 / 200.0;
            t.push(vec![f.into(), x.into(), (bbpssw_worstcase_step(x, f) - x).into()]);
        }
    }
    Ok(t)
}

fn binary_postselect() -> Result<Table> {
    let s = binary_postselect_series(POSTSELECT_NOISE, POSTSELECT_ROUNDS)?;
    let mut t = Table::new(&["round", "log_norm", "neg4_log_g"]);
    t.comment(format!("binary pairs at noise rate 1 − f̃₀ = {POSTSELECT_NOISE:e}"))
        .comment("round: distillation rounds n")
        .comment("log_norm: ln ‖J^n‖₁ of the Jacobian at the fixed point, induced 1-norm")
        .comment("neg4_log_g: −4 ln g_{2^n,4}")
        .comment(format!("asymptotic slopes: log_norm {}, neg4_log_g {}, gap {}", s.slope_norm, s.slope_neg4_log_g, s.gap));
    for (i, (a, b)) in s.log_norm.iter().zip(&s.neg4_log_g).enumerate() {
        t.push(vec![(i + 1).into(), (*a).into(), (*b).into()]);
    }
    Ok(t)
}
