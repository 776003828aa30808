//! End-to-end tests of the `distill` binary: documented examples, exit
//! codes, reproducibility through emitted configurations, and figure data.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

/// Tolerance between the closed-form BBPSSW slope and the finite-difference
/// Jacobian radius reported in the same scan row.
const JACOBIAN_TOL: f64 = 1e-8;
/// Fidelity reached by the DEJMPS fixed point under white noise f = 0.99,
/// computed by iterating the exact recurrence.
const DEJMPS_099_FIDELITY: f64 = 0.992_934_142_348_157_4;
const FIDELITY_TOL: f64 = 1e-12;
/// Critical white-noise parameter of the worst-case discriminant.
const CRITICAL_NOISE: f64 = 0.9641;
/// Half-width of the window in which the discriminant must change sign.
const CRITICAL_WINDOW: f64 = 5e-4;

fn distill(args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_distill"));
    cmd.args(args).env_remove("DISTILL_SEED");
    cmd
}

fn run(args: &[&str]) -> Output {
    distill(args).output().expect("spawning distill")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "distill failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).expect("utf-8 output")
}

fn json(out: &Output) -> Value {
    serde_json::from_str(&stdout(out)).expect("valid JSON")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

/// Data rows of a CSV text with `#` header comments, keyed by column name.
fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let headers = lines.next().expect("header line").split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (headers, rows)
}

fn column(headers: &[String], name: &str) -> usize {
    headers.iter().position(|h| h == name).unwrap_or_else(|| panic!("missing column {name}"))
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).expect("writing test input");
}

#[test]
fn fixed_point_report_for_dejmps_white_noise() {
    let doc = json(&run(&["fixed-point", "--protocol", "dejmps", "--noise", "white:0.99"]));
    let r = &doc["result"];
    assert_eq!(doc["command"], "fixed-point");
    assert_eq!(r["converged"], true);
    assert_eq!(r["attracting"], true);
    assert!((r["fidelity"].as_f64().unwrap() - DEJMPS_099_FIDELITY).abs() < FIDELITY_TOL);
    let lambda = r["lambda_max"].as_f64().unwrap();
    assert!(lambda > 0.0 && lambda < 1.0);
    let location: Vec<f64> = r["location"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(location.len(), 4);
    assert!((location.iter().sum::<f64>() - 1.0).abs() < FIDELITY_TOL);
}

#[test]
fn floats_carry_seventeen_significant_digits() {
    let text = stdout(&run(&["fixed-point", "--protocol", "dejmps", "--noise", "white:0.99"]));
    let line = text.lines().find(|l| l.contains("\"fidelity\"")).unwrap();
    let mantissa = line.split(':').nth(1).unwrap().trim().trim_end_matches(',').split('e').next().unwrap();
    assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
}

#[test]
fn bbpssw_scan_emits_limit_and_slope_per_grid_point() {
    let text = stdout(&run(&["scan", "--protocol", "bbpssw", "--noise-grid", "0.97:0.995:0.005", "--emit", "csv"]));
    assert!(text.starts_with("# "));
    let (h, rows) = csv_rows(&text);
    assert_eq!(rows.len(), 6);
    let (noise, p, fid, der, lam) =
        (column(&h, "noise"), column(&h, "fixed_point_0"), column(&h, "fidelity"), column(&h, "derivative"), column(&h, "lambda_max"));
    column(&h, "slope_b");
    for (i, row) in rows.iter().enumerate() {
        let f: f64 = row[noise].parse().unwrap();
        assert!((f - (0.97 + 0.005 * i as f64)).abs() < 1e-12);
        let p: f64 = row[p].parse().unwrap();
        let fidelity: f64 = row[fid].parse().unwrap();
        assert!((fidelity - (3.0 * p + 1.0) / 4.0).abs() < FIDELITY_TOL);
        let d: f64 = row[der].parse().unwrap();
        let l: f64 = row[lam].parse().unwrap();
        assert!((d.abs() - l).abs() < JACOBIAN_TOL, "row {i}: derivative {d} against radius {l}");
        assert!(l < 1.0);
    }
}

#[test]
fn postselection_bound_at_desk_scale_is_vacuous() {
    let doc = json(&run(&["bounds", "--chain", "postselection", "--n", "1024", "--epsP", "1e-12"]));
    let r = &doc["result"];
    assert_eq!(r["bound_name"], "postselection");
    assert_eq!(r["vacuous_flag"], true);
    assert!(r["value"].as_f64().unwrap() > 1.0);
    assert!(!r["chain_terms"].as_array().unwrap().is_empty());
    assert!(r["inputs"].is_object());
}

#[test]
fn every_run_logs_seed_and_resolved_config() {
    let out = run(&["fixed-point", "--protocol", "bbpssw", "--noise", "white:0.98", "--seed", "11"]);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("seed = 11"), "{err}");
    assert!(err.contains("config = {") && err.contains("white:0.98"), "{err}");
}

#[test]
fn fixed_point_config_round_trips_through_a_json_file() {
    let dir = tempfile::tempdir().unwrap();
    let first = json(&run(&["fixed-point", "--protocol", "bbpssw", "--noise", "corr2:0.985", "--start", "0.8"]));
    let cfg = dir.path().join("fixed.json");
    write(&cfg, &first["config"].to_string());
    let again = json(&run(&["fixed-point", "--config", cfg.to_str().unwrap()]));
    assert_eq!(again["config"], first["config"]);
    assert_eq!(again["result"], first["result"]);
}

#[test]
fn montecarlo_reproduces_from_its_emitted_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mc.json");
    let args = ["montecarlo", "--beta", "0.97", "--noise", "white:0.99", "--trials", "64", "--n", "4096", "--seed", "42"];
    let mut with_out = args.to_vec();
    with_out.extend(["--out", out.to_str().unwrap()]);
    stdout(&run(&with_out));
    let first: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(first["seed"], 42);

    let cfg = dir.path().join("mc-config.json");
    write(&cfg, &first["config"].to_string());
    let out2 = dir.path().join("mc2.json");
    stdout(&run(&["montecarlo", "--config", cfg.to_str().unwrap(), "--out", out2.to_str().unwrap()]));
    let second: Value = serde_json::from_str(&std::fs::read_to_string(&out2).unwrap()).unwrap();
    assert_eq!(first, second);
    assert_eq!(
        std::fs::read_to_string(out.with_extension("trials.csv")).unwrap(),
        std::fs::read_to_string(out2.with_extension("trials.csv")).unwrap()
    );
}

#[test]
fn montecarlo_aggregate_and_per_trial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("agg.json");
    let trials = dir.path().join("runs.csv");
    stdout(&run(&[
        "montecarlo", "--beta", "0.97", "--noise", "white:0.99", "--trials", "50", "--n", "4096", "--out",
        out.to_str().unwrap(), "--trials-out", trials.to_str().unwrap(),
    ]));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    for key in ["config_hash", "trials", "abort_rate", "ci", "bound", "seed"] {
        assert!(doc.get(key).is_some(), "missing {key}");
    }
    assert_eq!(doc["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(doc["trials"], 50);
    let rate = doc["abort_rate"].as_f64().unwrap();
    let ci: Vec<f64> = doc["ci"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!(ci[0] <= rate && rate <= ci[1]);

    let (h, rows) = csv_rows(&std::fs::read_to_string(&trials).unwrap());
    assert_eq!(rows.len(), 50);
    for name in ["trial", "flag", "abort_stage", "rounds_completed", "estimate", "fidelity", "pairs_left"] {
        column(&h, name);
    }
    let flag = column(&h, "flag");
    let fails = rows.iter().filter(|r| r[flag] == "fail").count() as f64;
    assert_eq!(fails / 50.0, rate);
}

#[test]
fn environment_seed_overrides_the_file_and_the_flag_overrides_both() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    write(&cfg, "seed = 5\n\n[steering_audit]\nstates = 3\nkind = \"weak\"\n");
    let from_file = stdout(&run(&["steering-audit", "--config", cfg.to_str().unwrap()]));
    assert!(from_file.contains("# seed: 5"));

    let with_env = distill(&["steering-audit", "--config", cfg.to_str().unwrap()]).env("DISTILL_SEED", "9").output().unwrap();
    let with_env = stdout(&with_env);
    assert!(with_env.contains("# seed: 9"));
    assert_ne!(csv_rows(&with_env).1, csv_rows(&from_file).1);
    let direct = stdout(&run(&["steering-audit", "--states", "3", "--kind", "weak", "--seed", "9"]));
    assert_eq!(csv_rows(&with_env).1, csv_rows(&direct).1);

    let with_flag =
        distill(&["steering-audit", "--config", cfg.to_str().unwrap(), "--seed", "5"]).env("DISTILL_SEED", "9").output().unwrap();
    assert_eq!(csv_rows(&stdout(&with_flag)).1, csv_rows(&from_file).1);
}

#[test]
fn steering_audit_inequality_holds_on_sampled_states() {
    let text = stdout(&run(&["steering-audit", "--states", "8", "--seed", "1"]));
    let (h, rows) = csv_rows(&text);
    assert_eq!(rows.len(), 8);
    let holds = column(&h, "holds");
    assert!(rows.iter().all(|r| r[holds] == "true"));
}

#[test]
fn concurrent_runs_with_distinct_outputs_do_not_interfere() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = (0..3).map(|i| dir.path().join(format!("c{i}.json"))).collect();
    let spawn = |i: usize| {
        let seed = (100 + i).to_string();
        distill(&["montecarlo", "--beta", "0.97", "--trials", "40", "--n", "2048", "--seed", &seed, "--out", paths[i].to_str().unwrap()])
            .stderr(std::process::Stdio::null())
            .spawn()
            .unwrap()
    };
    let children: Vec<_> = (0..3).map(spawn).collect();
    for mut c in children {
        assert!(c.wait().unwrap().success());
    }
    for (i, p) in paths.iter().enumerate() {
        let concurrent = std::fs::read_to_string(p).unwrap();
        let seed = (100 + i).to_string();
        let solo = dir.path().join(format!("s{i}.json"));
        stdout(&run(&["montecarlo", "--beta", "0.97", "--trials", "40", "--n", "2048", "--seed", &seed, "--out", solo.to_str().unwrap()]));
        assert_eq!(concurrent, std::fs::read_to_string(&solo).unwrap());
    }
}

#[test]
fn trace_rows_start_at_round_zero() {
    let text = stdout(&run(&["trace", "--protocol", "dejmps", "--noise", "white:0.99", "--rounds", "5"]));
    let (h, rows) = csv_rows(&text);
    assert_eq!(rows.len(), 6);
    let round = column(&h, "round");
    assert_eq!(rows[0][round], "0");
    assert_eq!(rows[5][round], "5");
}

#[test]
fn validation_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad_toml = dir.path().join("bad.toml");
    write(&bad_toml, "[fixed_point\nnoise = ");
    let unknown_key = dir.path().join("unknown.toml");
    write(&unknown_key, "[fixed_point]\nnoyse = \"white:0.9\"\n");
    let unwritable = dir.path().join("missing").join("out.json");
    let cases: Vec<Vec<&str>> = vec![
        vec!["frobnicate"],
        vec!["fixed-point", "--protocol", "dejmps", "--noise", "white:1.5"],
        vec!["fixed-point", "--protocol", "dejmps", "--noise", "pink:0.9"],
        vec!["fixed-point", "--protocol", "binary", "--noise", "white:0.9"],
        vec!["montecarlo", "--protocol", "binary", "--beta", "0.9"],
        vec!["montecarlo", "--noise", "white:0.99"],
        vec!["fixed-point", "--config", bad_toml.to_str().unwrap()],
        vec!["fixed-point", "--config", unknown_key.to_str().unwrap()],
        vec!["fixed-point", "--protocol", "dejmps", "--out", unwritable.to_str().unwrap()],
        vec!["scan", "--protocol", "bbpssw", "--noise-grid", "0.99:0.97:0.005"],
        vec!["figure", "no-such-figure"],
    ];
    for args in cases {
        assert_eq!(code(&run(&args)), 2, "{args:?}");
    }
    assert!(!unwritable.exists());
}

#[test]
fn non_convergence_exits_with_code_three() {
    let out = run(&["fixed-point", "--protocol", "dejmps", "--noise", "white:0.99", "--max-iter", "3"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn every_figure_documents_its_columns() {
    for name in [
        "dejmps-convergence", "lambda-max", "p0000-fixed", "bbpssw-convergence", "discriminant", "gfix",
        "worstcase-attractivity", "binary-postselect",
    ] {
        let text = stdout(&run(&["figure", name]));
        let (headers, rows) = csv_rows(&text);
        assert!(!rows.is_empty(), "{name}");
        for h in &headers {
            assert!(text.lines().any(|l| l.starts_with(&format!("# {h}:"))), "{name}: column {h} undocumented");
        }
        assert_eq!(text, stdout(&run(&["figure", name])), "{name} is not deterministic");
    }
}

#[test]
fn dejmps_convergence_has_three_series() {
    let (h, rows) = csv_rows(&stdout(&run(&["figure", "dejmps-convergence"])));
    let f = column(&h, "f");
    let mut series: Vec<&str> = rows.iter().map(|r| r[f].as_str()).collect();
    series.dedup();
    assert_eq!(series.len(), 3);
}

#[test]
fn discriminant_changes_sign_near_the_critical_noise() {
    let (h, rows) = csv_rows(&stdout(&run(&["figure", "discriminant"])));
    let (fi, disc) = (column(&h, "f_i"), column(&h, "discriminant"));
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r[fi].parse().unwrap(), r[disc].parse().unwrap())).collect();
    let crossings: Vec<f64> =
        points.windows(2).filter(|w| w[0].1.signum() != w[1].1.signum()).map(|w| 0.5 * (w[0].0 + w[1].0)).collect();
    assert!(
        crossings.iter().any(|c| (c - CRITICAL_NOISE).abs() < CRITICAL_WINDOW),
        "crossings {crossings:?}"
    );
}

#[test]
fn lambda_max_stays_below_one_for_noise_below_a_tenth() {
    let (h, rows) = csv_rows(&stdout(&run(&["figure", "lambda-max"])));
    let rate = column(&h, "noise_rate");
    for name in ["white_lambda_max", "corr2_lambda_max", "binary_lambda_max"] {
        let c = column(&h, name);
        for r in &rows {
            let x: f64 = r[rate].parse().unwrap();
            assert!(x <= 0.1 + 1e-15);
            let l: f64 = r[c].parse().unwrap_or_else(|_| panic!("{name} empty at {x}"));
            assert!(l.abs() < 1.0, "{name} = {l} at {x}");
        }
    }
}

#[test]
fn json_emission_of_a_series() {
    let doc = json(&run(&["trace", "--protocol", "bbpssw", "--noise", "white:0.99", "--rounds", "2", "--emit", "json"]));
    assert_eq!(doc["rows"].as_array().unwrap().len(), 3);
    assert!(doc["columns"].as_array().unwrap().iter().any(|c| c.as_str().unwrap().starts_with("fidelity")));
}
