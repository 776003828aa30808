//! Seeded simulation of the full protocol against an honest channel.
//!
//! Every transmitted `|B_00>` leaves the depolarizing channel `Φ_β` as a
//! Werner state. The pairs are shuffled; `⌊√n⌋` of them are sacrificed for
//! parameter estimation and the rest enter the recurrence, whose per-round
//! success is drawn from the deterministic ensemble description.
//!
//! Trial `t` draws from `ChaCha8Rng::seed_from_u64(seed)` on stream `t`, so
//! results do not depend on scheduling.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DistillError, Result};
use crate::fixed_point::{bbpssw_fixed_point, dejmps_min_fidelity, iterate_to_fixed_point};
use crate::noise_models::{ChannelBeta, NoiseModel};
use crate::recurrence::{werner_vector, RecurrenceMap};
use crate::security_bounds::{robustness_bound, RobustnessInput};

/// Two-sided 99% standard normal quantile.
pub const Z_99: f64 = 2.575_829_303_548_900_4;

/// Abort margin used when the channel cannot reach `F_min`.
pub const UNDISTILLABLE_MARGIN: f64 = 0.01;

/// The recurrence run after parameter estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "lowercase")]
pub enum ProtocolKind {
    /// DEJMPS with a Pauli noise model on the local operations.
    Dejmps { noise: NoiseModel },
    /// BBPSSW with single-qubit white noise of parameter `f`.
    Bbpssw { f: f64 },
}

impl ProtocolKind {
    fn map(&self) -> Result<RecurrenceMap> {
        match *self {
            ProtocolKind::Dejmps { noise } => Ok(RecurrenceMap::DejmpsBell { noise: noise.distribution()? }),
            ProtocolKind::Bbpssw { f } => {
                if !(0.0..=1.0).contains(&f) {
                    return Err(DistillError::Domain(format!("f = {f} outside [0, 1]")));
                }
                Ok(RecurrenceMap::Bbpssw { f })
            }
        }
    }

    /// Recurrence input for a Werner state with parameter `beta`.
    fn initial_state(&self, beta: f64) -> Vec<f64> {
        match self {
            ProtocolKind::Dejmps { .. } => werner_vector((3.0 * beta + 1.0) / 4.0).to_vec(),
            ProtocolKind::Bbpssw { .. } => vec![beta],
        }
    }

    /// Smallest Werner fidelity from which the recurrence distills.
    pub fn min_fidelity(&self) -> Result<f64> {
        match *self {
            ProtocolKind::Dejmps { noise } => dejmps_min_fidelity(&noise.distribution()?),
            ProtocolKind::Bbpssw { f } => {
                let upper = bbpssw_fixed_point(f)?;
                // the two nonzero fixed points sum to 4/3
                let lower = 4.0 / 3.0 - upper;
                Ok((3.0 * lower + 1.0) / 4.0)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub n_pairs: u64,
    /// Depolarizing parameter of the channel.
    pub beta: f64,
    pub protocol: ProtocolKind,
    /// Target number of distillation rounds `M`.
    pub rounds: u32,
    /// Abort margin `δ`; defaults to half the gap `(3β + 1)/4 − F_min`.
    pub delta: Option<f64>,
    /// Overrides the computed `F_min`.
    pub f_min: Option<f64>,
    pub seed: u64,
    pub trials: u64,
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_pairs < 4 {
            return Err(DistillError::Domain(format!("n_pairs = {} below 4", self.n_pairs)));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(DistillError::Domain(format!("β = {} outside [0, 1]", self.beta)));
        }
        if self.rounds < 1 {
            return Err(DistillError::Domain("at least one round is required".into()));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0) {
                return Err(DistillError::Domain(format!("δ = {d} must be positive")));
            }
        }
        Ok(())
    }

    /// `⌊√n⌋` pairs sacrificed for parameter estimation.
    pub fn estimation_pairs(&self) -> u64 {
        (self.n_pairs as f64).sqrt().floor() as u64
    }
}

/// Deterministic data shared by all trials of a configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolPlan {
    pub config: ProtocolConfig,
    pub map: RecurrenceMap,
    /// Bell-diagonal output of the channel in Bell order.
    pub channel_output: [f64; 4],
    pub f_min: f64,
    pub delta: f64,
    /// Abort threshold `F_min + δ` of the fidelity estimate.
    pub threshold: f64,
    /// Recurrence state before each round and after the last, `M + 1` rows.
    pub states: Vec<Vec<f64>>,
    /// Success probability of each round.
    pub success: Vec<f64>,
}

impl ProtocolPlan {
    pub fn new(config: &ProtocolConfig) -> Result<Self> {
        config.validate()?;
        let map = config.protocol.map()?;
        let f_min = match config.f_min {
            Some(f) => f,
            None => config.protocol.min_fidelity()?,
        };
        let channel = ChannelBeta::new(config.beta)?;
        let gap = channel.output_fidelity() - f_min;
        let delta = config.delta.unwrap_or(if gap > 0.0 { gap / 2.0 } else { UNDISTILLABLE_MARGIN });
        let threshold = f_min + delta;
        if threshold > 1.0 {
            return Err(DistillError::Domain(format!("abort threshold {threshold} above 1")));
        }
        let mut states = vec![config.protocol.initial_state(config.beta)];
        let mut success = Vec::with_capacity(config.rounds as usize);
        for _ in 0..config.rounds {
            let (q, n) = map.step(states.last().expect("nonempty"))?;
            success.push(n.clamp(0.0, 1.0));
            states.push(q);
        }
        let channel_output = werner_vector(channel.output_fidelity());
        Ok(ProtocolPlan { config: *config, map, channel_output, f_min, delta, threshold, states, success })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flag {
    Ok,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "stage", content = "round", rename_all = "snake_case")]
pub enum AbortStage {
    ParameterEstimation,
    Round(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub flag: Flag,
    pub abort_stage: Option<AbortStage>,
    pub rounds_completed: u32,
    /// Pairs entering round 1, then the survivors of every completed round.
    pub pair_counts: Vec<u64>,
    /// Fidelity estimate from parameter estimation.
    pub estimate: f64,
    /// Recurrence state after the last completed round.
    pub final_state: Vec<f64>,
}

/// The random stream of trial `trial` for a campaign seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn sample_label<R: Rng + ?Sized>(p: &[f64; 4], rng: &mut R) -> u8 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (s, &w) in p.iter().enumerate().take(3) {
        acc += w;
        if u < acc {
            return s as u8;
        }
    }
    3
}

/// `σ_x ⊗ σ_x` eigenvalue of the Bell pair stored in slot `s`.
fn xx_eigenvalue(s: u8) -> f64 {
    // slots (00, 11, 01, 10): the first label index is 0 for slots 0 and 2
    if s == 0 || s == 2 {
        1.0
    } else {
        -1.0
    }
}

/// `σ_z ⊗ σ_z` eigenvalue of the Bell pair stored in slot `s`.
fn zz_eigenvalue(s: u8) -> f64 {
    if s == 0 || s == 3 {
        1.0
    } else {
        -1.0
    }
}

/// Fidelity estimator `1/4 + (3/8)(s_1 + s_2)` of one pair of pairs, where
/// `s_1` is the `σ_x ⊗ σ_x` outcome on the first pair and `s_2` the
/// `σ_z ⊗ σ_z` outcome on the second. Its mean is the fidelity of any Werner
/// state.
pub fn pair_of_pairs_estimate(first: u8, second: u8) -> f64 {
    0.25 + 0.375 * (xx_eigenvalue(first) + zz_eigenvalue(second))
}

/// One protocol run.
pub fn simulate_run<R: Rng + ?Sized>(plan: &ProtocolPlan, rng: &mut R) -> RunOutcome {
    let cfg = &plan.config;
    let n = cfg.n_pairs as usize;
    let mut labels: Vec<u8> = (0..n).map(|_| sample_label(&plan.channel_output, rng)).collect();
    let k_est = cfg.estimation_pairs() as usize;
    let (sacrificed, _) = labels.partial_shuffle(rng, k_est);
    let estimates = sacrificed.chunks_exact(2).map(|c| pair_of_pairs_estimate(c[0], c[1]));
    let (sum, count) = estimates.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    let estimate = if count > 0 { sum / count as f64 } else { f64::NAN };

    let mut outcome = RunOutcome {
        flag: Flag::Fail,
        abort_stage: None,
        rounds_completed: 0,
        pair_counts: vec![(n - k_est) as u64],
        estimate,
        final_state: plan.states[0].clone(),
    };
    if !(estimate >= plan.threshold) {
        outcome.abort_stage = Some(AbortStage::ParameterEstimation);
        return outcome;
    }
    let mut available = (n - k_est) as u64;
    for m in 1..=cfg.rounds {
        if available < 2 {
            outcome.abort_stage = Some(AbortStage::Round(m));
            return outcome;
        }
        let attempts = available / 2;
        let binom = Binomial::new(attempts, plan.success[m as usize - 1]).expect("probability in [0, 1]");
        available = binom.sample(rng);
        if available == 0 {
            outcome.abort_stage = Some(AbortStage::Round(m));
            return outcome;
        }
        outcome.pair_counts.push(available);
        outcome.rounds_completed = m;
        outcome.final_state = plan.states[m as usize].clone();
    }
    outcome.flag = Flag::Ok;
    outcome
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbortEstimate {
    pub trials: u64,
    pub aborts: u64,
    pub estimation_aborts: u64,
    pub round_aborts: u64,
    pub rate: f64,
    /// Wilson score interval at 99% confidence.
    pub ci: (f64, f64),
    pub standard_error: f64,
    /// Mean and standard error of the fidelity estimate over trials.
    pub mean_estimate: f64,
    pub estimate_standard_error: f64,
    pub f_min: f64,
    pub threshold: f64,
    /// Robustness bound, or `None` for an undistillable channel.
    pub bound: Option<f64>,
    /// `rate ≤ bound + 3·standard_error`; `None` without a bound.
    pub within_bound: Option<bool>,
}

/// Wilson score interval for `successes` out of `trials` at normal quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Runs all trials of `plan` and returns the individual outcomes in trial order.
pub fn run_trials(plan: &ProtocolPlan) -> Vec<RunOutcome> {
    (0..plan.config.trials)
        .into_par_iter()
        .map(|t| simulate_run(plan, &mut trial_rng(plan.config.seed, t)))
        .collect()
}

/// Summarizes the outcomes of a campaign.
pub fn summarize(plan: &ProtocolPlan, outcomes: &[RunOutcome]) -> Result<AbortEstimate> {
    let trials = outcomes.len() as u64;
    if trials == 0 {
        return Err(DistillError::Domain("no trials".into()));
    }
    let estimation_aborts =
        outcomes.iter().filter(|o| o.abort_stage == Some(AbortStage::ParameterEstimation)).count() as u64;
    let round_aborts = outcomes.iter().filter(|o| matches!(o.abort_stage, Some(AbortStage::Round(_)))).count() as u64;
    let aborts = estimation_aborts + round_aborts;
    let rate = aborts as f64 / trials as f64;
    let standard_error = (rate * (1.0 - rate) / trials as f64).sqrt();
    let n = trials as f64;
    let mean_estimate = outcomes.iter().map(|o| o.estimate).sum::<f64>() / n;
    let var = outcomes.iter().map(|o| (o.estimate - mean_estimate).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let cfg = &plan.config;
    let bound = match RobustnessInput::from_pairs(cfg.beta, plan.f_min, cfg.n_pairs as f64, cfg.rounds)
        .and_then(|input| robustness_bound(&input))
    {
        Ok(b) => Some(b.value),
        Err(DistillError::Undistillable { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(AbortEstimate {
        trials,
        aborts,
        estimation_aborts,
        round_aborts,
        rate,
        ci: wilson_interval(aborts, trials, Z_99),
        standard_error,
        mean_estimate,
        estimate_standard_error: (var / n).sqrt(),
        f_min: plan.f_min,
        threshold: plan.threshold,
        bound,
        within_bound: bound.map(|b| rate <= b + 3.0 * standard_error),
    })
}

/// Empirical abort probability of `config` with its Wilson interval.
pub fn estimate_abort_probability(config: &ProtocolConfig) -> Result<AbortEstimate> {
    if config.trials < 100 {
        return Err(DistillError::Domain(format!("{} trials, at least 100 required", config.trials)));
    }
    let plan = ProtocolPlan::new(config)?;
    summarize(&plan, &run_trials(&plan))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub round: u32,
    /// Bell-diagonal state in Bell order.
    pub state: [f64; 4],
    pub fidelity: f64,
    /// Success probability of the round that produced this row.
    pub success: f64,
    /// Trace distance to the distillation fixed point.
    pub distance_to_fixed_point: f64,
    /// Pairs alive after this round in the sampled run; `None` after an abort.
    pub pairs: Option<u64>,
}

fn bell_state_of(map: &RecurrenceMap, p: &[f64]) -> [f64; 4] {
    match map {
        RecurrenceMap::Bbpssw { .. } => werner_vector(map.fidelity_of(p)),
        _ => [p[0], p[1], p[2], p[3]],
    }
}

/// The deterministic state evolution of `config` together with the pair
/// counts of the sampled run `trial`.
pub fn fidelity_trajectory(config: &ProtocolConfig, trial: u64) -> Result<Vec<TrajectoryRow>> {
    let plan = ProtocolPlan::new(config)?;
    let last = plan.states.last().expect("nonempty");
    let fix = iterate_to_fixed_point(&plan.map, last, 1e-15, 100_000)?;
    let fix_bell = bell_state_of(&plan.map, &fix.location);
    let run = simulate_run(&plan, &mut trial_rng(config.seed, trial));
    let rows = plan
        .states
        .iter()
        .enumerate()
        .map(|(r, s)| {
            let state = bell_state_of(&plan.map, s);
            let distance = state.iter().zip(fix_bell.iter()).map(|(a, b)| (a - b).abs()).sum();
            TrajectoryRow {
                round: r as u32,
                state,
                fidelity: state[0],
                success: if r == 0 { 1.0 } else { plan.success[r - 1] },
                distance_to_fixed_point: distance,
                pairs: run.pair_counts.get(r).copied(),
            }
        })
        .collect();
    Ok(rows)
}
