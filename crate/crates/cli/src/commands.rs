//! One function per subcommand. Each resolves its parameters, logs them with
//! the seed to standard error, computes, and writes its artifacts.

use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use distill_core::fixed_point::{
    bbpssw_fixed_point_derivative, convergence_exponent, iterate_to_fixed_point, FixedPointReport,
};
use distill_core::montecarlo::{run_trials, summarize, AbortStage, Flag, ProtocolConfig, ProtocolKind, ProtocolPlan};
use distill_core::quantum_core::{random_density, random_pure_vector, Cplx, DensityMatrix};
use distill_core::recurrence::{trace, werner_vector};
use distill_core::security_bounds::{
    definetti_bound, hoeffding_pe_abort, pair_budget, postselection_bound, robustness_bound, BoundResult, EpsilonModel,
    RobustnessInput,
};
use distill_core::steering_verify::{audit_state, min_outcome_probability, steer_rotate};
use distill_core::{BellDiagonalState, DistillError, FlagUpdate, LabeledEnsembleState, NoiseModel, RecurrenceMap};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{
    invalid, overlay, parse_grid, BoundsArgs, Chain, ConfigFile, FixedPointArgs, FixedPointConfig, MontecarloArgs,
    MontecarloConfig, Protocol, ScanArgs, ScanConfig, StateKind, SteeringArgs, SteeringConfig, TraceArgs, TraceConfig,
};
use crate::emit::{flattened, json_string, to_value, write_output, Cell, Emit, Table};

/// How a command finished when it did not fail outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Done,
    /// Artifacts were written but some iteration did not converge.
    NotConverged,
}

/// Options shared by all commands.
pub struct Context {
    pub out: Option<PathBuf>,
    pub emit: Option<Emit>,
    pub seed: u64,
    pub file: ConfigFile,
}

impl Context {
    fn log<T: Serialize>(&self, command: &str, config: &T) -> Result<()> {
        eprintln!("distill {command}: seed = {}", self.seed);
        eprintln!("distill {command}: config = {}", serde_json::to_string(config)?);
        Ok(())
    }

    /// The resolved configuration as a file that reproduces this run.
    fn reproducer<T: Serialize>(&self, section: &str, config: &T) -> Result<Value> {
        let mut section_value = to_value(config)?;
        if let Value::Object(m) = &mut section_value {
            m.remove("seed");
        }
        Ok(json!({ "seed": self.seed, section: section_value }))
    }

    /// Writes a single result: JSON by default, or a flattened CSV.
    fn single(&self, command: &str, section: &str, config: &impl Serialize, result: Value) -> Result<()> {
        let doc = json!({
            "command": command,
            "seed": self.seed,
            "config": self.reproducer(section, config)?,
            "result": result,
        });
        let text = match self.emit.unwrap_or(Emit::Json) {
            Emit::Json => json_string(&doc),
            Emit::Csv => flattened(&doc).to_csv()?,
        };
        write_output(self.out.as_deref(), &text)
    }

    /// Writes a series: CSV by default, or JSON rows.
    fn series(&self, command: &str, section: Option<&str>, config: &impl Serialize, mut table: Table) -> Result<()> {
        let reproducer = match section {
            Some(s) => self.reproducer(s, config)?,
            None => to_value(config)?,
        };
        let text = match self.emit.unwrap_or(Emit::Csv) {
            Emit::Csv => {
                table.comment(format!("seed: {}", self.seed));
                table.comment(format!("config: {}", serde_json::to_string(&reproducer)?));
                table.to_csv()?
            }
            Emit::Json => json_string(&json!({
                "command": command,
                "seed": self.seed,
                "config": reproducer,
                "columns": table.comments,
                "rows": table.rows_json(),
            })),
        };
        write_output(self.out.as_deref(), &text)
    }
}

fn parse_noise(spec: &str) -> Result<NoiseModel> {
    match spec.parse::<NoiseModel>() {
        Ok(m) => Ok(m),
        Err(e) => invalid!("--noise {spec}: {e}"),
    }
}

/// The recurrence selected by a protocol and noise model.
pub fn recurrence_map(protocol: Protocol, noise: NoiseModel, flagged: bool) -> Result<RecurrenceMap> {
    if flagged && protocol != Protocol::Dejmps {
        invalid!("--flagged applies to DEJMPS only");
    }
    Ok(match (protocol, noise) {
        (Protocol::Dejmps, NoiseModel::Worst(_)) => invalid!("DEJMPS needs a Pauli noise model, not worst-case noise"),
        (Protocol::Dejmps, m) if flagged => {
            RecurrenceMap::DejmpsNoisy { noise: m.distribution()?, flags: FlagUpdate::default() }
        }
        (Protocol::Dejmps, m) => RecurrenceMap::DejmpsBell { noise: m.distribution()? },
        (Protocol::Bbpssw, NoiseModel::White(f)) => RecurrenceMap::Bbpssw { f },
        (Protocol::Bbpssw, NoiseModel::Corr2(f)) => RecurrenceMap::BbpsswTwoQubit { f },
        (Protocol::Bbpssw, NoiseModel::Worst(f_i)) => RecurrenceMap::BbpsswWorstCase { f_i },
        (Protocol::Bbpssw, NoiseModel::Binary(_)) => invalid!("BBPSSW has no binary-pair noise model"),
        (Protocol::Binary, NoiseModel::Binary(f0)) => RecurrenceMap::Binary { f0 },
        (Protocol::Binary, m) => invalid!("the binary recurrence needs binary:f0 noise, got {m}"),
    })
}

/// The state vector of `map` for a Werner input of fidelity `fidelity`.
pub fn initial_state(map: &RecurrenceMap, fidelity: f64) -> Result<Vec<f64>> {
    Ok(match map {
        RecurrenceMap::DejmpsNoisy { .. } => {
            LabeledEnsembleState::correlated(&BellDiagonalState::werner(fidelity)?).probs().to_vec()
        }
        // binary entries are (Bell label 00 or 01) × flag; a correlated start
        RecurrenceMap::Binary { .. } => vec![fidelity, 0.0, 0.0, 1.0 - fidelity],
        RecurrenceMap::Bbpssw { .. } => vec![(4.0 * fidelity - 1.0) / 3.0],
        RecurrenceMap::BbpsswTwoQubit { .. } | RecurrenceMap::BbpsswWorstCase { .. } => vec![fidelity],
        RecurrenceMap::DejmpsNoiseless | RecurrenceMap::DejmpsBell { .. } => werner_vector(fidelity).to_vec(),
    })
}

fn report_json(map: &RecurrenceMap, report: &FixedPointReport) -> Result<Value> {
    let mut v = to_value(report)?;
    if let Value::Object(m) = &mut v {
        m.insert("fidelity".into(), json!(map.fidelity_of(&report.location)));
    }
    Ok(v)
}

pub fn fixed_point(ctx: &Context, args: &FixedPointArgs) -> Result<Status> {
    let cfg = FixedPointConfig::resolve(overlay(args, ctx.file.fixed_point.as_ref())?)?;
    ctx.log("fixed-point", &cfg)?;
    let map = recurrence_map(cfg.protocol, parse_noise(&cfg.noise)?, cfg.flagged)?;
    let report = iterate_to_fixed_point(&map, &initial_state(&map, cfg.start)?, cfg.tol, cfg.max_iter)?;
    ctx.single("fixed-point", "fixed_point", &cfg, report_json(&map, &report)?)?;
    Ok(if report.converged { Status::Done } else { Status::NotConverged })
}

struct ScanRow {
    noise: f64,
    report: FixedPointReport,
    derivative: Option<f64>,
    slope_b: Option<f64>,
}

pub fn scan(ctx: &Context, args: &ScanArgs) -> Result<Status> {
    let cfg = ScanConfig::resolve(overlay(args, ctx.file.scan.as_ref())?)?;
    ctx.log("scan", &cfg)?;
    let grid = parse_grid(&cfg.noise_grid)?;
    let maps: Vec<RecurrenceMap> = grid
        .iter()
        .map(|x| recurrence_map(cfg.protocol, parse_noise(&format!("{}:{x}", cfg.noise_kind))?, cfg.flagged))
        .collect::<Result<_>>()?;
    let rows: Vec<ScanRow> = grid
        .par_iter()
        .zip(maps.par_iter())
        .map(|(&noise, map)| -> Result<ScanRow> {
            let p0 = initial_state(map, cfg.start)?;
            let report = iterate_to_fixed_point(map, &p0, 1e-15, 100_000)?;
            let derivative = match map {
                RecurrenceMap::Bbpssw { f } if report.location[0] > 0.0 => bbpssw_fixed_point_derivative(*f).ok(),
                _ => None,
            };
            let slope_b = convergence_exponent(map, &p0, cfg.fit_rounds).ok().map(|fit| fit.pair_exponent);
            Ok(ScanRow { noise, report, derivative, slope_b })
        })
        .collect::<Result<_>>()?;
    let dim = maps.first().map_or(0, RecurrenceMap::dim);
    let mut headers = vec!["noise".to_string()];
    headers.extend((0..dim).map(|i| format!("fixed_point_{i}")));
    headers.extend(["fidelity", "derivative", "lambda_max", "slope_b", "converged"].map(String::from));
    let mut table = Table { headers, ..Table::default() };
    table
        .comment(format!("{} fixed points over {} noise parameters from a Werner start of fidelity {}", protocol_name(cfg.protocol), cfg.noise_kind, cfg.start))
        .comment("noise: noise parameter of the grid")
        .comment("fixed_point_i: entry i of the limit state vector")
        .comment("fidelity: fidelity of the limit with |B_00>")
        .comment("derivative: signed slope b'(p∞) of the scalar BBPSSW map at a nonzero limit, empty otherwise")
        .comment("lambda_max: spectral radius of the finite-difference Jacobian at the limit, empty without convergence")
        .comment("slope_b: exponent b' in ‖p_n − p∞‖₁ ∈ O(N^(−b')) for N = 2^n pairs, empty when no linear regime is resolved")
        .comment("converged: whether the iteration met the 1e-15 step tolerance");
    let mut all_converged = true;
    for (row, map) in rows.iter().zip(&maps) {
        all_converged &= row.report.converged;
        let mut cells: Vec<Cell> = vec![row.noise.into()];
        cells.extend(row.report.location.iter().map(|&x| Cell::F(x)));
        cells.push(map.fidelity_of(&row.report.location).into());
        cells.push(row.derivative.into());
        cells.push(row.report.lambda_max.into());
        cells.push(row.slope_b.into());
        cells.push(row.report.converged.into());
        table.push(cells);
    }
    ctx.series("scan", Some("scan"), &cfg, table)?;
    Ok(if all_converged { Status::Done } else { Status::NotConverged })
}

fn protocol_name(p: Protocol) -> &'static str {
    match p {
        Protocol::Dejmps => "DEJMPS",
        Protocol::Bbpssw => "BBPSSW",
        Protocol::Binary => "binary-pair",
    }
}

fn bound_json(b: &BoundResult) -> Value {
    let pairs = |v: &[(String, f64)]| v.iter().map(|(k, x)| json!({ "name": k, "value": x })).collect::<Vec<_>>();
    json!({
        "bound_name": b.bound_name,
        "inputs": b.inputs.iter().map(|(k, x)| (k.clone(), json!(x))).collect::<serde_json::Map<_, _>>(),
        "value": b.value,
        "log_value": b.log_value,
        "vacuous_flag": b.vacuous,
        "chain_terms": pairs(&b.chain_terms),
    })
}

fn need<T>(x: Option<T>, name: &str, chain: Chain) -> Result<T> {
    match x {
        Some(v) => Ok(v),
        None => invalid!("--chain {chain:?} needs --{name}"),
    }
}

fn epsilon_model(a: &BoundsArgs, chain: Chain) -> Result<EpsilonModel> {
    match (a.eps_p, a.fit_a, a.fit_b) {
        (Some(epsilon), None, None) => Ok(EpsilonModel::Value { epsilon }),
        (None, Some(a), Some(b)) => Ok(EpsilonModel::Fitted { a, b }),
        _ => invalid!("--chain {chain:?} needs either --epsP or both --fit-a and --fit-b"),
    }
}

pub fn bounds(ctx: &Context, args: &BoundsArgs) -> Result<Status> {
    let a = overlay(args, ctx.file.bounds.as_ref())?;
    let Some(chain) = a.chain else { invalid!("missing required parameter --chain") };
    ctx.log("bounds", &a)?;
    let result = match chain {
        Chain::Definetti | Chain::Postselection => {
            let n = need(a.n, "n", chain)?;
            let model = epsilon_model(&a, chain)?;
            let eps = model.eval(n, a.pe_correction.unwrap_or(false));
            let b = if chain == Chain::Definetti {
                definetti_bound(n, need(a.k, "k", chain)?, eps)?
            } else {
                postselection_bound(n, eps)?
            };
            let mut v = bound_json(&b);
            v["epsilon_model"] = to_value(&model)?;
            v
        }
        Chain::Robustness => {
            let (beta, f_min, m) = (need(a.beta, "beta", chain)?, need(a.f_min, "f-min", chain)?, need(a.rounds, "rounds", chain)?);
            let input = match (a.pairs, a.xi) {
                (Some(k), Some(xi)) => RobustnessInput::new(beta, f_min, k, m, xi)?,
                (Some(k), None) => RobustnessInput::from_pairs(beta, f_min, k, m)?,
                (None, Some(xi)) => RobustnessInput::from_budget(beta, f_min, m, xi)?,
                (None, None) => invalid!("--chain robustness needs --pairs or --xi"),
            };
            let inputs = json!({ "beta": beta, "f_min": f_min, "rounds": m, "pairs": input.k, "xi": input.xi });
            match robustness_bound(&input) {
                Ok(b) => json!({
                    "bound_name": "robustness",
                    "inputs": inputs,
                    "value": b.value,
                    "vacuous_flag": b.vacuous,
                    "undistillable": false,
                    "chain_terms": [
                        { "name": "estimation_term", "value": b.estimation_term },
                        { "name": "distillation_term", "value": b.distillation_term },
                    ],
                    "per_round": b.per_round,
                    "c": b.c,
                }),
                Err(DistillError::Undistillable { threshold, .. }) => json!({
                    "bound_name": "robustness",
                    "inputs": inputs,
                    "value": null,
                    "vacuous_flag": true,
                    "undistillable": true,
                    "beta_threshold": threshold,
                    "chain_terms": [],
                }),
                Err(e) => return Err(e.into()),
            }
        }
        Chain::Hoeffding => {
            let (eta, k) = (need(a.eta, "eta", chain)?, need(a.pairs, "pairs", chain)?);
            let value = hoeffding_pe_abort(eta, k)?;
            json!({
                "bound_name": "hoeffding",
                "inputs": { "eta": eta, "pairs": k },
                "value": value,
                "vacuous_flag": value >= 1.0,
                "chain_terms": [],
            })
        }
        Chain::Budget => {
            let b = pair_budget(need(a.rounds, "rounds", chain)?, need(a.xi, "xi", chain)?)?;
            json!({ "bound_name": "pair_budget", "inputs": { "rounds": a.rounds, "xi": a.xi }, "budget": to_value(&b)? })
        }
    };
    ctx.single("bounds", "bounds", &a, result)?;
    Ok(Status::Done)
}

fn sample_state(cfg: &SteeringConfig, index: usize) -> Result<DensityMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let rank = cfg.rank.min(4);
    Ok(match cfg.kind {
        StateKind::Random => random_density(4, cfg.rank, &mut rng)?,
        StateKind::Product => random_density(2, rank, &mut rng)?.tensor(&random_density(2, rank, &mut rng)?),
        StateKind::Weak => {
            let product = random_density(2, rank, &mut rng)?.tensor(&random_density(2, rank, &mut rng)?);
            let pure = DensityMatrix::pure(&random_pure_vector(4, &mut rng))?;
            let (w, d) = (Cplx::new(1.0 - cfg.delta, 0.0), Cplx::new(cfg.delta, 0.0));
            DensityMatrix::new(product.matrix() * w + pure.matrix() * d)?
        }
    })
}

pub fn steering_audit(ctx: &Context, args: &SteeringArgs) -> Result<Status> {
    let cfg = SteeringConfig::resolve(overlay(args, ctx.file.steering_audit.as_ref())?, ctx.seed)?;
    ctx.log("steering-audit", &cfg)?;
    let kind = format!("{:?}", cfg.kind).to_lowercase();
    let rows: Vec<Vec<Cell>> = (0..cfg.states)
        .into_par_iter()
        .map(|i| -> Result<Vec<Cell>> {
            let rho = sample_state(&cfg, i)?;
            let id = format!("{kind}-{i}");
            let audit = audit_state(&id, &rho)?;
            let (_, rotated) = steer_rotate(&rho)?;
            let min_p = min_outcome_probability(&rotated)?;
            Ok(vec![
                id.into(),
                audit.epsilon.into(),
                audit.lhs.into(),
                audit.rhs.into(),
                audit.slack.into(),
                (audit.lhs <= audit.rhs).into(),
                min_p.into(),
            ])
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new(&["state_id", "epsilon", "lhs", "rhs", "slack", "holds", "min_probability"]);
    table
        .comment("product-form audit ‖ρ_AB − ρ_A ⊗ ρ_B‖₁ ≤ 2Cε with C = 65536 on two-plus-two-qubit states")
        .comment("state_id: family and index; state i is drawn from ChaCha8 stream i of the seed")
        .comment("epsilon: steering discrepancy of the rotated state over outcomes of probability ≥ 1/16")
        .comment("lhs: ‖ρ_AB − ρ_A ⊗ ρ_B‖₁")
        .comment("rhs: 2Cε")
        .comment("slack: rhs − lhs")
        .comment("holds: lhs ≤ rhs")
        .comment("min_probability: smallest tomographic outcome probability on A after the rotation");
    rows.into_iter().for_each(|r| table.push(r));
    ctx.series("steering-audit", Some("steering_audit"), &cfg, table)?;
    Ok(Status::Done)
}

fn config_hash(cfg: &MontecarloConfig) -> Result<String> {
    let canonical = serde_json::to_string(cfg)?;
    Ok(Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect())
}

fn trials_path(out: Option<&Path>, explicit: Option<&str>) -> Option<PathBuf> {
    match (explicit, out) {
        (Some(p), _) => Some(PathBuf::from(p)),
        (None, Some(o)) => Some(o.with_extension("trials.csv")),
        (None, None) => None,
    }
}

pub fn montecarlo(ctx: &Context, args: &MontecarloArgs) -> Result<Status> {
    let merged = overlay(args, ctx.file.montecarlo.as_ref())?;
    let trials_out = merged.trials_out.clone();
    let cfg = MontecarloConfig::resolve(merged, ctx.seed)?;
    ctx.log("montecarlo", &cfg)?;
    let noise = parse_noise(&cfg.noise)?;
    let protocol = match (cfg.protocol, noise) {
        (Protocol::Dejmps, NoiseModel::Worst(_)) => invalid!("DEJMPS needs a Pauli noise model, not worst-case noise"),
        (Protocol::Dejmps, noise) => ProtocolKind::Dejmps { noise },
        (Protocol::Bbpssw, NoiseModel::White(f)) => ProtocolKind::Bbpssw { f },
        (Protocol::Bbpssw, m) => invalid!("the BBPSSW campaign accepts white noise only, got {m}"),
        (Protocol::Binary, _) => invalid!("the binary recurrence has no channel model"),
    };
    let pc = ProtocolConfig {
        n_pairs: cfg.n,
        beta: cfg.beta,
        protocol,
        rounds: cfg.rounds,
        delta: cfg.delta,
        f_min: cfg.f_min,
        seed: cfg.seed,
        trials: cfg.trials,
    };
    let plan = ProtocolPlan::new(&pc)?;
    let outcomes = run_trials(&plan);
    let est = summarize(&plan, &outcomes)?;
    let doc = json!({
        "config_hash": config_hash(&cfg)?,
        "trials": est.trials,
        "abort_rate": est.rate,
        "ci": [est.ci.0, est.ci.1],
        "bound": est.bound,
        "seed": cfg.seed,
        "aborts": est.aborts,
        "estimation_aborts": est.estimation_aborts,
        "round_aborts": est.round_aborts,
        "standard_error": est.standard_error,
        "within_bound": est.within_bound,
        "f_min": est.f_min,
        "delta": plan.delta,
        "threshold": est.threshold,
        "mean_estimate": est.mean_estimate,
        "estimate_standard_error": est.estimate_standard_error,
        "config": ctx.reproducer("montecarlo", &cfg)?,
    });
    if let Some(path) = trials_path(ctx.out.as_deref(), trials_out.as_deref()) {
        let mut table = Table::new(&["trial", "flag", "abort_stage", "rounds_completed", "estimate", "fidelity", "pairs_left"]);
        table
            .comment("one row per protocol run")
            .comment("trial: index t; run t draws from ChaCha8 stream t of the seed")
            .comment("flag: ok or fail")
            .comment("abort_stage: estimation, round:m, or empty without an abort")
            .comment("rounds_completed: distillation rounds finished")
            .comment("estimate: fidelity estimate from the sacrificed pairs")
            .comment("fidelity: fidelity of the state after the last completed round")
            .comment("pairs_left: pairs alive after the last completed round")
            .comment(format!("config_hash: {}", doc["config_hash"].as_str().unwrap_or_default()));
        for (t, o) in outcomes.iter().enumerate() {
            let stage = match o.abort_stage {
                None => Cell::Empty,
                Some(AbortStage::ParameterEstimation) => "estimation".into(),
                Some(AbortStage::Round(m)) => format!("round:{m}").into(),
            };
            table.push(vec![
                t.into(),
                if o.flag == Flag::Ok { "ok" } else { "fail" }.into(),
                stage,
                o.rounds_completed.into(),
                o.estimate.into(),
                plan.map.fidelity_of(&o.final_state).into(),
                (*o.pair_counts.last().unwrap_or(&0)).into(),
            ]);
        }
        write_output(Some(&path), &table.to_csv()?)?;
        eprintln!("distill montecarlo: per-trial results in {}", path.display());
    }
    let text = match ctx.emit.unwrap_or(Emit::Json) {
        Emit::Json => json_string(&doc),
        Emit::Csv => flattened(&doc).to_csv()?,
    };
    write_output(ctx.out.as_deref(), &text).context("writing the campaign summary")?;
    Ok(Status::Done)
}

pub fn trace_cmd(ctx: &Context, args: &TraceArgs) -> Result<Status> {
    let cfg = TraceConfig::resolve(overlay(args, ctx.file.trace.as_ref())?)?;
    ctx.log("trace", &cfg)?;
    let map = recurrence_map(cfg.protocol, parse_noise(&cfg.noise)?, cfg.flagged)?;
    let rows = trace(&map, &initial_state(&map, cfg.start)?, cfg.rounds)?;
    let mut headers = vec!["round".to_string()];
    headers.extend((0..map.dim()).map(|i| format!("p_{i}")));
    headers.extend(["success", "fidelity"].map(String::from));
    let mut table = Table { headers, ..Table::default() };
    table
        .comment(format!("{} recurrence with {} noise from a Werner start of fidelity {}", protocol_name(cfg.protocol), cfg.noise, cfg.start))
        .comment("round: rounds applied")
        .comment("p_i: entry i of the normalized state vector")
        .comment("success: success probability N of the round that produced the row, 1 for round 0")
        .comment("fidelity: fidelity with |B_00>");
    for r in rows {
        let mut cells: Vec<Cell> = vec![r.round.into()];
        let fid = map.fidelity_of(&r.p);
        cells.extend(r.p.into_iter().map(Cell::F));
        cells.push(r.success.into());
        cells.push(fid.into());
        table.push(cells);
    }
    ctx.series("trace", Some("trace"), &cfg, table)?;
    Ok(Status::Done)
}

pub fn emit_figure(ctx: &Context, config: &Value, table: Table) -> Result<Status> {
    ctx.series("figure", None, config, table)?;
    Ok(Status::Done)
}
