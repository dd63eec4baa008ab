//! End-to-end tests of the perflab binary: exit codes, output files and
//! rerun determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use approx::assert_relative_eq;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_perflab"))
        .args(args)
        .output()
        .expect("the binary should run")
}

fn run_in(out_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_perflab"))
        .args(args)
        .args(["--out", out_dir.to_str().unwrap()])
        .output()
        .expect("the binary should run")
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name))
        .unwrap_or_else(|e| panic!("reading {name}: {e}"))
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

/// A chronometric record series following delta e^{-a u} + b on normalised
/// time, with optional noise small enough to keep the marks improving.
fn record_csv(noise: f64, n: usize) -> String {
    let (delta, a, b) = (20.0, 3.0, 100.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut out =
        String::from("event_id,discipline,chronometric,unit,date,value,performer_id\n");
    for k in 0..n {
        let u = k as f64 / (n - 1) as f64;
        let value = delta * (-a * u).exp() + b + noise * (rng.gen::<f64>() - 0.5);
        out.push_str(&format!("evt,track,true,seconds,{}-07-01,{value},\n", 1950 + k));
    }
    out
}

fn sim_config() -> &'static str {
    "gamma = 10\n\
     lambda = 3\n\
     omega = 0.5\n\
     beta1 = 2\n\
     beta2 = 1.2\n\
     betaK = 10\n\
     phi1 = 0.1\n\
     phi2 = 0.6\n\
     phi3 = 0.001\n\
     xi1 = 24\n\
     xi2 = 100\n\
     xi3 = 0.8\n\
     xi4 = 0.6\n\
     xi5 = 2\n\
     xi6 = 14.3\n\
     s = 8\n\
     t_max = 20\n\
     n_agents = 6\n\
     n_fossil = 100\n\
     n_food = 50\n\
     n_eco = 80\n\
     n_urban = 4\n\
     seed = 9\n\
     alpha3 = 0.5\n\
     alpha4 = 0.02\n\
     alpha5 = 0.5\n\
     beta_alpha = 3\n"
}

fn points_csv() -> String {
    let mut out = String::from("x,y\n");
    for i in 0..40 {
        let x = 1900 + i % 11;
        let y = 60 + (i * 7) % 21;
        out.push_str(&format!("{x},{y}\n"));
    }
    out
}

fn toplist_csv() -> String {
    let mut out = String::from("event_id,year,value\n");
    for year in 1990..2010 {
        for rank in 0..10 {
            let value = 100.0
                + (2009 - year) as f64 * 0.8
                + rank as f64 * 0.5
                + 0.01 * ((year * 13 + rank * 7) % 17) as f64;
            out.push_str(&format!("evt,{year},{value}\n"));
        }
    }
    out
}

#[test]
fn fit_recovers_a_synthetic_exponential() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("records.csv");
    fs::write(&input, record_csv(0.01, 30)).unwrap();

    let out = run_in(dir.path(), &["fit", input.to_str().unwrap(), "--model", "exp_wr"]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    let fit = read(dir.path(), "fit.csv");
    let rows = data_rows(&fit);
    assert_eq!(rows.len(), 1);
    let row = &rows[0];
    assert_eq!(row[0], "exp_wr");
    assert_eq!(row[2], "true", "fit should converge");
    let delta: f64 = row[8].parse().unwrap();
    let a: f64 = row[9].parse().unwrap();
    let b: f64 = row[10].parse().unwrap();
    assert_relative_eq!(delta, 20.0, max_relative = 0.01);
    assert_relative_eq!(a, 3.0, max_relative = 0.01);
    assert_relative_eq!(b, 100.0, max_relative = 0.001);

    let residuals = read(dir.path(), "fit_residuals.csv");
    assert_eq!(residuals.lines().count(), 31, "header plus one row per mark");
    assert!(dir.path().join("fit_manifest.json").exists());
}

#[test]
fn fit_rejects_an_unknown_model_listing_the_registry() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("records.csv");
    fs::write(&input, record_csv(0.0, 10)).unwrap();

    let out = run_in(dir.path(), &["fit", input.to_str().unwrap(), "--model", "nope"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = stderr_of(&out);
    assert!(stderr.contains("unknown model 'nope'"), "stderr: {stderr}");
    assert!(stderr.contains("exp_wr") && stderr.contains("moore"), "stderr: {stderr}");
}

#[test]
fn fit_cites_the_line_of_a_malformed_row() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("records.csv");
    fs::write(
        &input,
        "event_id,discipline,chronometric,unit,date,value,performer_id\n\
         evt,track,true,seconds,1950-07-01,10,\n\
         evt,track,true,seconds,1951-07-01,abc,\n",
    )
    .unwrap();

    let out = run_in(dir.path(), &["fit", input.to_str().unwrap(), "--model", "exp_wr"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("line 3"), "stderr: {}", stderr_of(&out));
}

#[test]
fn fit_signals_non_convergence_with_exit_two() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("records.csv");
    fs::write(&input, record_csv(0.01, 30)).unwrap();

    let out = run_in(
        dir.path(),
        &["fit", input.to_str().unwrap(), "--model", "exp_wr", "--max-iter", "1"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("did not converge"));

    let fit = read(dir.path(), "fit.csv");
    assert_eq!(data_rows(&fit)[0][2], "false", "best-so-far fit is still written");
}

#[test]
fn compare_ranks_the_generating_model_first() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("records.csv");
    fs::write(&input, record_csv(0.01, 30)).unwrap();

    let out = run_in(
        dir.path(),
        &["compare", input.to_str().unwrap(), "--models", "exp_wr,linear"],
    );
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let table = read(dir.path(), "compare.csv");
    let rows = data_rows(&table);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "exp_wr", "the generating model wins");
    assert_eq!(rows[0][4], "0", "best row has delta zero");
    let runner_up: f64 = rows[1][4].parse().unwrap();
    assert!(runner_up > 0.0, "table is sorted by delta ascending");

    let out = run_in(dir.path(), &["compare", input.to_str().unwrap(), "--models", "exp_wr"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("at least two models"));
}

#[test]
fn segment_keeps_a_single_regime_whole() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("records.csv");
    fs::write(&input, record_csv(0.0, 12)).unwrap();

    let out = run_in(dir.path(), &["segment", input.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let rows = data_rows(&read(dir.path(), "segment.csv"));
    assert_eq!(rows.len(), 1, "one period for one regime");
    assert_eq!(rows[0][0], "evt");
    assert_eq!(rows[0][4], "12", "the period holds every mark");
}

#[test]
fn predict_reruns_are_byte_identical_and_seeded() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("records.csv");
    fs::write(&input, record_csv(0.01, 30)).unwrap();
    let input = input.to_str().unwrap();

    let (a, b, env, other) = (
        dir.path().join("a"),
        dir.path().join("b"),
        dir.path().join("env"),
        dir.path().join("other"),
    );
    assert!(run_in(&a, &["predict", input, "--seed", "7"]).status.success());
    assert!(run_in(&b, &["predict", input, "--seed", "7"]).status.success());
    assert_eq!(read(&a, "predict.csv"), read(&b, "predict.csv"));

    let out = Command::new(env!("CARGO_BIN_EXE_perflab"))
        .args(["predict", input, "--out", env.to_str().unwrap()])
        .env("PERFLAB_SEED", "7")
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    assert_eq!(read(&a, "predict.csv"), read(&env, "predict.csv"));

    assert!(run_in(&other, &["predict", input, "--seed", "8"]).status.success());
    assert_ne!(
        read(&a, "predict.csv"),
        read(&other, "predict.csv"),
        "the seed drives the Monte Carlo bounds"
    );

    let manifest_a: serde_json::Value =
        serde_json::from_str(&read(&a, "predict_manifest.json")).unwrap();
    let manifest_b: serde_json::Value =
        serde_json::from_str(&read(&b, "predict_manifest.json")).unwrap();
    assert_eq!(manifest_a["config_hash"], manifest_b["config_hash"]);
    assert_eq!(manifest_a["seed"], 7);

    let rows = data_rows(&read(&a, "predict.csv"));
    assert_eq!(rows.len(), 1);
    let year: f64 = rows[0][2].parse().unwrap();
    let lo: f64 = rows[0][3].parse().unwrap();
    let hi: f64 = rows[0][4].parse().unwrap();
    assert!(lo <= year && year <= hi, "point estimate inside the interval");
    let beta: f64 = rows[0][6].parse().unwrap();
    let beta_prime: f64 = rows[0][7].parse().unwrap();
    assert!(beta < beta_prime && beta_prime < 100.0, "progression approaches 100");
}

#[test]
fn report_joins_forecasts_and_collects_exceptions() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("records.csv");
    let mut csv = record_csv(0.01, 30);
    csv.push_str("tiny,track,true,seconds,1950-07-01,50,\n");
    csv.push_str("tiny,track,true,seconds,1951-07-01,49,\n");
    csv.push_str("tiny,track,true,seconds,1952-07-01,48,\n");
    fs::write(&input, csv).unwrap();

    let out = run_in(dir.path(), &["report", input.to_str().unwrap(), "--seed", "7"]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    let rows = data_rows(&read(dir.path(), "report.csv"));
    assert_eq!(rows.len(), 1, "one row per successful event");
    assert_eq!(rows[0][0], "evt");

    let decades = data_rows(&read(dir.path(), "report_decades.csv"));
    let total: u64 = decades.iter().map(|r| r[1].parse::<u64>().unwrap()).sum();
    assert_eq!(total, 1, "histogram sums to the successful events");

    let exceptions = data_rows(&read(dir.path(), "report_exceptions.csv"));
    assert_eq!(exceptions.len(), 1);
    assert_eq!(exceptions[0][0], "tiny");
    assert_eq!(exceptions[0][1], "segment");
}

#[test]
fn report_with_no_usable_event_exits_one() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("records.csv");
    fs::write(
        &input,
        "event_id,discipline,chronometric,unit,date,value,performer_id\n\
         tiny,track,true,seconds,1950-07-01,50,\n\
         tiny,track,true,seconds,1951-07-01,49,\n",
    )
    .unwrap();

    let out = run_in(dir.path(), &["report", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(data_rows(&read(dir.path(), "report_exceptions.csv")).len(), 1);

    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "event_id,discipline,chronometric,unit,date,value,performer_id\n").unwrap();
    let out = run_in(dir.path(), &["report", empty.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("no events"));
}

#[test]
fn simulate_is_deterministic_and_names_missing_keys() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("sim.conf");
    fs::write(&config, sim_config()).unwrap();
    let config = config.to_str().unwrap();

    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run_in(&a, &["simulate", "--config", config, "--turns"]).status.success());
    assert!(run_in(&b, &["simulate", "--config", config, "--turns"]).status.success());
    assert_eq!(read(&a, "simulate.csv"), read(&b, "simulate.csv"));
    assert_eq!(read(&a, "simulate_turns.csv"), read(&b, "simulate_turns.csv"));
    let turns = data_rows(&read(&a, "simulate_turns.csv"));
    assert!(!turns.is_empty());

    let broken = dir.path().join("broken.conf");
    let without_xi6: String = sim_config()
        .lines()
        .filter(|l| !l.starts_with("xi6"))
        .map(|l| format!("{l}\n"))
        .collect();
    fs::write(&broken, without_xi6).unwrap();
    let out = run_in(dir.path(), &["simulate", "--config", broken.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("xi6"), "stderr: {}", stderr_of(&out));
}

#[test]
fn sweep_writes_the_exact_grid_and_ignores_worker_count() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("sim.conf");
    fs::write(&config, sim_config()).unwrap();
    let config = config.to_str().unwrap();

    let (one, two) = (dir.path().join("one"), dir.path().join("two"));
    let out = run_in(&one, &["sweep", "--config", config, "--m", "2", "--n", "1", "--jobs", "1"]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let out = run_in(&two, &["sweep", "--config", config, "--m", "2", "--n", "1", "--jobs", "2"]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    let sweep = read(&one, "sweep.csv");
    assert_eq!(
        sweep.lines().next().unwrap(),
        "node_idx,alpha3,alpha5,beta_alpha,run,seed,t_e,reached_tmax"
    );
    assert_eq!(sweep.lines().count(), 9, "header plus 2^3 runs");
    assert_eq!(sweep, read(&two, "sweep.csv"), "results are jobs-independent");
    assert_eq!(read(&one, "sweep_summary.csv"), read(&two, "sweep_summary.csv"));
}

#[test]
fn density_conserves_points_and_rejects_bad_spacing() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("points.csv");
    fs::write(&input, points_csv()).unwrap();
    let input = input.to_str().unwrap();

    let out = run_in(dir.path(), &["density", input, "--resolution", "1", "--smoothed"]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let counts: u64 = data_rows(&read(dir.path(), "density.csv"))
        .iter()
        .map(|r| r[2].parse::<u64>().unwrap())
        .sum();
    assert_eq!(counts, 40, "every point lands in exactly one node");
    assert!(dir.path().join("density_smoothed.csv").exists());

    let out = run_in(dir.path(), &["density", input, "--resolution", "3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("invalid mesh resolution"));
}

#[test]
fn density_scan_writes_the_entropy_curve() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("points.csv");
    fs::write(&input, points_csv()).unwrap();

    let out = run_in(dir.path(), &["density", input.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let curve = data_rows(&read(dir.path(), "density_curve.csv"));
    assert!(curve.len() >= 100, "spacings from 0.1 up in steps of 0.1");
    assert_eq!(curve[0][0], "0.1");
    assert!(
        curve.iter().any(|r| r[1].is_empty()),
        "non-tiling spacings appear with an empty entropy"
    );
}

#[test]
fn atypicity_scores_every_top_list() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("toplists.csv");
    fs::write(&input, toplist_csv()).unwrap();

    let out = run_in(dir.path(), &["atypicity", input.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let records = data_rows(&read(dir.path(), "atypicity.csv"));
    assert_eq!(records.len(), 20, "one row per event-year");
    let yearly = data_rows(&read(dir.path(), "atypicity_yearly.csv"));
    assert_eq!(yearly.len(), 20);
    for row in &records {
        let a: f64 = row[9].parse().unwrap();
        assert!(a.is_finite() && a >= 0.0);
    }
}

#[test]
fn ingest_summarises_records_and_converts_person_dates() {
    let dir = TempDir::new().unwrap();
    let records = dir.path().join("records.csv");
    fs::write(&records, record_csv(0.0, 10)).unwrap();
    let out = run_in(dir.path(), &["ingest", records.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let rows = data_rows(&read(dir.path(), "ingest.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "evt");
    assert_eq!(rows[0][4], "10");

    let people = dir.path().join("people.csv");
    fs::write(
        &people,
        "person_id,birth_date,death_date\n\
         p1,1900-06-15,1970-06-15\n\
         p2,1905-01-01,1980-01-01\n",
    )
    .unwrap();
    let out = run_in(dir.path(), &["ingest", people.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let points = read(dir.path(), "ingest.csv");
    assert_eq!(points.lines().next().unwrap(), "x,y");
    assert_eq!(points.lines().count(), 3);

    let odd = dir.path().join("odd.csv");
    fs::write(&odd, "foo,bar\n1,2\n").unwrap();
    let out = run_in(dir.path(), &["ingest", odd.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("unrecognised input header"));
}

#[test]
fn help_and_usage_errors_use_the_documented_exit_codes() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));

    let out = run(&["not-a-command"]);
    assert_eq!(out.status.code(), Some(1));

    let out = run(&["fit"]);
    assert_eq!(out.status.code(), Some(1), "missing required arguments");
}
