//! Command parameters, the configuration file and their resolution.
//!
//! Every command reads its parameters from the command line, then from its
//! section of the `--config` file, then from built-in defaults. The file is
//! TOML, or JSON when its name ends in `.json`:
//!
//! ```toml
//! seed = 7
//!
//! [fixed_point]
//! protocol = "dejmps"
//! noise = "white:0.99"
//!
//! [montecarlo]
//! beta = 0.98
//! n = 16384
//! ```
//!
//! The seed is taken from `--seed`, then from the `DISTILL_SEED` environment
//! variable, then from the file.

use std::path::Path;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Environment variable that overrides the seed of the configuration file.
pub const SEED_ENV: &str = "DISTILL_SEED";

/// Seed used when none is given anywhere.
pub const DEFAULT_SEED: u64 = 0;

/// A problem with the parameters, reported with exit code 2.
#[derive(Debug)]
pub struct ValidationError(pub String);

impl std::fmt::Display for ValidationError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ValidationError {}

/// Fails with a [`ValidationError`].
macro_rules! invalid {
    ($($arg:tt)*) => {
        return Err(anyhow::Error::new($crate::config::ValidationError(format!($($arg)*))))
    };
}
pub(crate) use invalid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Dejmps,
    Bbpssw,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Chain {
    /// `(34·4⁸ + 1)(64k/n + ε_P)`.
    Definetti,
    /// `4√2 · g_{n,4} · ε_P^{1/4}` with its lift chain.
    Postselection,
    /// Abort probability against an honest channel.
    Robustness,
    /// Parameter-estimation abort probability `exp(−η²√k/2)`.
    Hoeffding,
    /// Pair count `k` needed for `M` rounds at budget `ξ`.
    Budget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    /// Random mixed four-qubit states.
    Random,
    /// Products of random two-qubit states.
    Product,
    /// Products mixed with a random pure state of weight `delta`.
    Weak,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedPointArgs {
    /// Recurrence to iterate.
    #[arg(long, value_enum)]
    pub protocol: Option<Protocol>,
    /// Noise model as kind:parameter with kind in {white, corr2, binary, worst}.
    #[arg(long)]
    pub noise: Option<String>,
    /// Fidelity of the initial Werner state [default: 0.9].
    #[arg(long)]
    pub start: Option<f64>,
    /// Track the 16-component flagged ensemble (DEJMPS only).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub flagged: Option<bool>,
    /// Stop when successive iterates differ by less than this in 1-norm [default: 1e-15].
    #[arg(long)]
    pub tol: Option<f64>,
    /// Iteration limit [default: 100000].
    #[arg(long)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointConfig {
    pub protocol: Protocol,
    pub noise: String,
    pub start: f64,
    pub flagged: bool,
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanArgs {
    #[arg(long, value_enum)]
    pub protocol: Option<Protocol>,
    /// Noise parameter grid a:b:step, both ends included.
    #[arg(long)]
    pub noise_grid: Option<String>,
    /// Noise kind swept by the grid [default: binary for the binary protocol, white otherwise].
    #[arg(long)]
    pub noise_kind: Option<String>,
    /// Fidelity of the initial Werner state [default: 0.9].
    #[arg(long)]
    pub start: Option<f64>,
    /// Track the 16-component flagged ensemble (DEJMPS only).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub flagged: Option<bool>,
    /// Rounds traced for the convergence-slope fit [default: 200].
    #[arg(long)]
    pub fit_rounds: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub protocol: Protocol,
    pub noise_grid: String,
    pub noise_kind: String,
    pub start: f64,
    pub flagged: bool,
    pub fit_rounds: usize,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsArgs {
    /// Bound to evaluate.
    #[arg(long, value_enum)]
    pub chain: Option<Chain>,
    /// Number of input pairs `n`.
    #[arg(long)]
    pub n: Option<u64>,
    /// Number of output systems `k` (de Finetti).
    #[arg(long)]
    pub k: Option<u64>,
    /// i.i.d. convergence distance `ε_P`.
    #[arg(long = "epsP", alias = "eps-p")]
    pub eps_p: Option<f64>,
    /// Fitted model `ε_P(n) = a·n^(−b)`: the prefactor `a`.
    #[arg(long)]
    pub fit_a: Option<f64>,
    /// Fitted model `ε_P(n) = a·n^(−b)`: the exponent `b`.
    #[arg(long)]
    pub fit_b: Option<f64>,
    /// Evaluate `ε_P` at `n − √n` to account for parameter estimation.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub pe_correction: Option<bool>,
    /// Depolarizing parameter `β` of the channel.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Smallest distillable fidelity `F_min`.
    #[arg(long)]
    pub f_min: Option<f64>,
    /// Number of distillation rounds `M`.
    #[arg(long)]
    pub rounds: Option<u32>,
    /// Distillation budget `ξ`.
    #[arg(long)]
    pub xi: Option<f64>,
    /// Pairs `k` entering parameter estimation and distillation.
    #[arg(long)]
    pub pairs: Option<f64>,
    /// Estimation margin `η` (Hoeffding).
    #[arg(long)]
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SteeringArgs {
    /// Number of states to audit [default: 100].
    #[arg(long)]
    pub states: Option<usize>,
    /// Family of sampled states [default: random].
    #[arg(long, value_enum)]
    pub kind: Option<StateKind>,
    /// Rank of the random states [default: 4].
    #[arg(long)]
    pub rank: Option<usize>,
    /// Weight of the correlated admixture for the weak family [default: 0.001].
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringConfig {
    pub states: usize,
    pub kind: StateKind,
    pub rank: usize,
    pub delta: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MontecarloArgs {
    /// Recurrence run after parameter estimation (dejmps or bbpssw).
    #[arg(long, value_enum)]
    pub protocol: Option<Protocol>,
    /// Noise of the local operations; BBPSSW accepts white noise only [default: white:1].
    #[arg(long)]
    pub noise: Option<String>,
    /// Depolarizing parameter `β` of the channel.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Pairs sent through the channel [default: 16384].
    #[arg(long)]
    pub n: Option<u64>,
    /// Distillation rounds `M` [default: 4].
    #[arg(long)]
    pub rounds: Option<u32>,
    /// Number of protocol runs [default: 1000].
    #[arg(long)]
    pub trials: Option<u64>,
    /// Abort margin `δ` [default: half the fidelity gap].
    #[arg(long)]
    pub delta: Option<f64>,
    /// Overrides the computed `F_min`.
    #[arg(long)]
    pub f_min: Option<f64>,
    /// Per-trial CSV path [default: next to --out with extension .trials.csv].
    #[arg(long)]
    pub trials_out: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MontecarloConfig {
    pub protocol: Protocol,
    pub noise: String,
    pub beta: f64,
    pub n: u64,
    pub rounds: u32,
    pub trials: u64,
    pub delta: Option<f64>,
    pub f_min: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceArgs {
    #[arg(long, value_enum)]
    pub protocol: Option<Protocol>,
    #[arg(long)]
    pub noise: Option<String>,
    /// Fidelity of the initial Werner state [default: 0.9].
    #[arg(long)]
    pub start: Option<f64>,
    /// Rounds to trace [default: 20].
    #[arg(long)]
    pub rounds: Option<usize>,
    /// Track the 16-component flagged ensemble (DEJMPS only).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub flagged: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceConfig {
    pub protocol: Protocol,
    pub noise: String,
    pub start: f64,
    pub rounds: usize,
    pub flagged: bool,
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub fixed_point: Option<FixedPointArgs>,
    pub scan: Option<ScanArgs>,
    pub bounds: Option<BoundsArgs>,
    pub steering_audit: Option<SteeringArgs>,
    pub montecarlo: Option<MontecarloArgs>,
    pub trace: Option<TraceArgs>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config file {}", path.display()))?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        match parsed {
            Ok(c) => Ok(c),
            Err(e) => invalid!("malformed config file {}: {e}", path.display()),
        }
    }
}

/// Fields set on the command line win over those of the file section.
pub fn overlay<T: Serialize + DeserializeOwned + Clone>(cli: &T, file: Option<&T>) -> Result<T> {
    let Some(file) = file else { return Ok(cli.clone()) };
    let mut merged = serde_json::to_value(file)?;
    if let (Value::Object(base), Value::Object(top)) = (&mut merged, serde_json::to_value(cli)?) {
        for (k, v) in top {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
    }
    Ok(serde_json::from_value(merged)?)
}

pub fn resolve_seed(cli: Option<u64>, file: Option<u64>) -> Result<u64> {
    if let Some(s) = cli {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => match v.trim().parse() {
            Ok(s) => Ok(s),
            Err(_) => invalid!("{SEED_ENV}={v} is not an unsigned 64-bit integer"),
        },
        Err(std::env::VarError::NotPresent) => Ok(file.unwrap_or(DEFAULT_SEED)),
        Err(e) => invalid!("{SEED_ENV}: {e}"),
    }
}

fn required<T>(value: Option<T>, name: &str) -> Result<T> {
    match value {
        Some(v) => Ok(v),
        None => invalid!("missing required parameter --{}", name.replace('_', "-")),
    }
}

fn unit_interval(x: f64, name: &str) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        invalid!("--{name} = {x} outside [0, 1]");
    }
    Ok(x)
}

/// Parses `a:b:step` into the grid `a, a + step, …` up to `b` inclusive.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let nums: Option<Vec<f64>> = parts.iter().map(|p| p.trim().parse().ok()).collect();
    let Some([a, b, step]) = nums.as_deref().and_then(|v| <[f64; 3]>::try_from(v).ok()) else {
        invalid!("noise grid '{spec}' is not a:b:step");
    };
    if !(step > 0.0) || !(b >= a) || !a.is_finite() || !b.is_finite() {
        invalid!("noise grid '{spec}' needs a ≤ b and step > 0");
    }
    // tolerate rounding in (b − a)/step
    let count = ((b - a) / step + 1e-9).floor() as usize + 1;
    if count > 1_000_000 {
        invalid!("noise grid '{spec}' has {count} points");
    }
    Ok((0..count).map(|i| if i + 1 == count && (a + i as f64 * step - b).abs() < 1e-9 * step { b } else { a + i as f64 * step }).collect())
}

impl FixedPointConfig {
    pub fn resolve(a: FixedPointArgs) -> Result<Self> {
        let protocol = required(a.protocol, "protocol")?;
        let tol = a.tol.unwrap_or(1e-15);
        if !(tol > 0.0) {
            invalid!("--tol = {tol} must be positive");
        }
        Ok(FixedPointConfig {
            protocol,
            noise: default_noise(a.noise, protocol),
            start: unit_interval(a.start.unwrap_or(0.9), "start")?,
            flagged: a.flagged.unwrap_or(false),
            tol,
            max_iter: a.max_iter.unwrap_or(100_000),
        })
    }
}

fn default_noise(noise: Option<String>, protocol: Protocol) -> String {
    noise.unwrap_or_else(|| if protocol == Protocol::Binary { "binary:1" } else { "white:1" }.to_string())
}

impl ScanConfig {
    pub fn resolve(a: ScanArgs) -> Result<Self> {
        let protocol = required(a.protocol, "protocol")?;
        let noise_grid = required(a.noise_grid, "noise_grid")?;
        parse_grid(&noise_grid)?;
        let kind = a.noise_kind.unwrap_or_else(|| if protocol == Protocol::Binary { "binary" } else { "white" }.into());
        if !["white", "corr2", "binary", "worst"].contains(&kind.as_str()) {
            invalid!("unknown noise kind '{kind}'");
        }
        Ok(ScanConfig {
            protocol,
            noise_grid,
            noise_kind: kind,
            start: unit_interval(a.start.unwrap_or(0.9), "start")?,
            flagged: a.flagged.unwrap_or(false),
            fit_rounds: a.fit_rounds.unwrap_or(200),
        })
    }
}

impl SteeringConfig {
    pub fn resolve(a: SteeringArgs, seed: u64) -> Result<Self> {
        let rank = a.rank.unwrap_or(4);
        if !(1..=16).contains(&rank) {
            invalid!("--rank = {rank} outside 1..=16");
        }
        Ok(SteeringConfig {
            states: a.states.unwrap_or(100),
            kind: a.kind.unwrap_or(StateKind::Random),
            rank,
            delta: unit_interval(a.delta.unwrap_or(1e-3), "delta")?,
            seed,
        })
    }
}

impl MontecarloConfig {
    pub fn resolve(a: MontecarloArgs, seed: u64) -> Result<Self> {
        let protocol = a.protocol.unwrap_or(Protocol::Dejmps);
        if protocol == Protocol::Binary {
            invalid!("the binary recurrence has no channel model; use dejmps or bbpssw");
        }
        let trials = a.trials.unwrap_or(1000);
        if trials == 0 {
            invalid!("--trials must be positive");
        }
        Ok(MontecarloConfig {
            protocol,
            noise: default_noise(a.noise, protocol),
            beta: unit_interval(required(a.beta, "beta")?, "beta")?,
            n: a.n.unwrap_or(1 << 14),
            rounds: a.rounds.unwrap_or(4),
            trials,
            delta: a.delta,
            f_min: a.f_min,
            seed,
        })
    }
}

impl TraceConfig {
    pub fn resolve(a: TraceArgs) -> Result<Self> {
        let protocol = required(a.protocol, "protocol")?;
        Ok(TraceConfig {
            protocol,
            noise: default_noise(a.noise, protocol),
            start: unit_interval(a.start.unwrap_or(0.9), "start")?,
            rounds: a.rounds.unwrap_or(20),
            flagged: a.flagged.unwrap_or(false),
        })
    }
}
