use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lune(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lune"))
        .args(args)
        .env_remove("LUNE_SEED")
        .output()
        .unwrap()
}

fn lune_env(args: &[&str], seed: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lune"))
        .args(args)
        .env("LUNE_SEED", seed)
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(text.as_bytes())
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect()
}

#[test]
fn mz_analytic_quarter() {
    let v = json(&lune(&[
        "--setup",
        "mz",
        "--mode",
        "analytic",
        "--kappa",
        "1",
        "--kappa-prime",
        "1",
        "--theta3",
        "0",
        "--theta4",
        "0",
    ]));
    let total = v["result"]["breakdown"]["total"].as_f64().unwrap();
    assert!((total - 0.25).abs() < 1e-12);
    assert_eq!(v["result"]["mode"], "analytic");
    assert_eq!(v["tool"], "lune");
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(
        v["result"]["breakdown"]["terms"].as_object().unwrap().len(),
        16
    );
}

#[test]
fn hbt_equal_angles_have_no_phase() {
    let v = json(&lune(&[
        "--setup", "hbt", "--mode", "analytic", "--theta3", "0.3", "--theta4", "0.3",
    ]));
    let b = &v["result"]["breakdown"];
    assert!(b["trace_phase"].as_f64().unwrap().abs() < 1e-12);
    assert_eq!(b["solid_angle"].as_f64().unwrap(), 0.0);
    assert!(v["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn degrees_flag_converts_angles() {
    let rad = json(&lune(&[
        "--theta3",
        "0.5235987755982988",
        "--theta4",
        "0.2",
    ]));
    let deg = json(&lune(&[
        "--degrees",
        "--theta3",
        "30",
        "--theta4",
        "11.459155902616466",
    ]));
    let (a, b) = (
        &rad["result"]["breakdown"]["total"],
        &deg["result"]["breakdown"]["total"],
    );
    assert!((a.as_f64().unwrap() - b.as_f64().unwrap()).abs() < 1e-14);
}

#[test]
fn sweep_endpoints_one_period_apart_agree() {
    for var in ["theta3", "theta4"] {
        for setup in ["mz", "hbt"] {
            let text = stdout(&lune(&[
                "--setup",
                setup,
                "--mode",
                "sweep",
                "--var",
                var,
                "--start",
                "0.4",
                "--stop",
                &(0.4 + PI).to_string(),
                "--steps",
                "2",
                "--theta3",
                "0.1",
                "--theta4",
                "0.9",
                "--output",
                "csv",
            ]));
            let rows = csv_rows(&text);
            assert_eq!(rows.len(), 3);
            let (a, b) = (&rows[1], &rows[2]);
            let f = |row: &Vec<String>, i: usize| row[i].parse::<f64>().unwrap();
            let g = f(a, 1);
            assert!(
                (g - f(b, 1)).abs() <= 1e-12 * g.abs(),
                "{setup}/{var}: {a:?} vs {b:?}"
            );
            assert!((f(a, 5) - f(b, 5)).abs() < 1e-9, "{a:?} vs {b:?}");
            // the lune angle advances by a full sphere
            let turns = (f(a, 6) - f(b, 6)) / (4.0 * PI);
            assert!((turns - turns.round()).abs() < 1e-12 && turns.round().abs() == 1.0);
            assert_eq!(a[2..5], b[2..5]);
        }
    }
}

#[test]
fn sweep_with_mc_fills_columns() {
    let text = stdout(&lune(&[
        "--mode",
        "sweep",
        "--var",
        "kappa_prime",
        "--start",
        "0.5",
        "--stop",
        "2",
        "--steps",
        "4",
        "--mc",
        "--n-samples",
        "20000",
        "--output",
        "csv",
    ]));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 5);
    for row in &rows[1..] {
        assert!(row[2..5].iter().all(|c| !c.is_empty()));
        let z: f64 = row[4].parse().unwrap();
        assert!(z.abs() < 5.0);
    }
}

#[test]
fn csv_headers_are_fixed() {
    let header = |args: &[&str]| csv_rows(&stdout(&lune(args)))[0].join(",");
    assert_eq!(
        header(&["--mode", "sweep", "--var", "theta3", "--output", "csv"]),
        "var_value,gamma_analytic,gamma_mc_mean,gamma_mc_stderr,z_score,trace_phase,solid_angle"
    );
    assert_eq!(
        header(&["--mode", "montecarlo", "--n-samples", "1000", "--output", "csv"]),
        "setup,kappa,kappa_prime,theta3,theta4,seed,n_streams,n_effective,mean,std_error,analytic,z_score"
    );
    assert_eq!(
        header(&["--mode", "audit", "--n-samples", "1000", "--output", "csv"]),
        "moment,order,estimate_re,estimate_im,expected_re,expected_im,stderr_re,stderr_im,z"
    );
    let analytic = header(&["--output", "csv"]);
    assert!(analytic.starts_with(
        "setup,kappa,kappa_prime,theta3,theta4,total,geometric_term,trace_re,trace_im,trace_phase,solid_angle,\
         term_1111_re,term_1111_im,term_1112_re"
    ));
    assert!(analytic.ends_with("term_2222_re,term_2222_im"));
    assert_eq!(analytic.split(',').count(), 11 + 32);
}

#[test]
fn csv_numbers_carry_fifteen_digits() {
    let rows = csv_rows(&stdout(&lune(&["--output", "csv"])));
    assert_eq!(rows[1][5], "2.50000000000000e-1");
    let mantissa = rows[1][1].split('e').next().unwrap();
    assert_eq!(mantissa.replace(['.', '-'], "").len(), 15);
}

#[test]
fn json_output_round_trips_as_config() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.json");
    let second = dir.path().join("second.json");
    let out = lune(&[
        "--mode",
        "montecarlo",
        "--setup",
        "hbt",
        "--theta3",
        "0.4",
        "--kappa-prime",
        "2",
        "--n-samples",
        "50000",
        "--seed",
        "42",
        "--scan",
        "theta3",
        "--scan-points",
        "4",
        "--out",
        first.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let out = lune(&[
        "--config",
        first.to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let read =
        |p: &Path| serde_json::from_str::<Value>(&std::fs::read_to_string(p).unwrap()).unwrap();
    let (a, b) = (read(&first), read(&second));
    assert_eq!(a["config"], b["config"]);
    assert_eq!(a["result"], b["result"]);
    assert_eq!(a["seed"], 42);
    assert!(a["config"].get("out_path").is_none());
}

#[test]
fn flat_config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, r#"{"setup": "mz", "kappa": 2.0, "theta3": 0.25}"#).unwrap();
    let v = json(&lune(&[
        "--config",
        path.to_str().unwrap(),
        "--kappa-prime",
        "3",
    ]));
    assert_eq!(v["config"]["kappa"], 2.0);
    assert_eq!(v["config"]["kappa_prime"], 3.0);
    assert_eq!(v["config"]["theta3"], 0.25);
}

#[test]
fn seed_precedence() {
    let seed = |out: Output| json(&out)["seed"].as_u64().unwrap();
    assert_eq!(seed(lune(&[])), 1);
    assert_eq!(seed(lune_env(&[], "77")), 77);
    assert_eq!(seed(lune_env(&["--seed", "5"], "77")), 5);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, r#"{"seed": 9}"#).unwrap();
    assert_eq!(
        seed(lune_env(&["--config", path.to_str().unwrap()], "77")),
        9
    );

    let bad = lune_env(&[], "not-a-number");
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("LUNE_SEED"));
}

#[test]
fn env_seed_changes_monte_carlo_draws() {
    let mean = |out: Output| {
        json(&out)["result"]["estimates"][0]["estimate"]["mean"]
            .as_f64()
            .unwrap()
    };
    let args = ["--mode", "montecarlo", "--n-samples", "10000"];
    assert_eq!(
        mean(lune_env(&args, "3")),
        mean(lune(&[
            "--seed",
            "3",
            "--mode",
            "montecarlo",
            "--n-samples",
            "10000"
        ]))
    );
    assert_ne!(mean(lune_env(&args, "3")), mean(lune_env(&args, "4")));
}

#[test]
fn unwritable_output_path_fails() {
    let out = lune(&["--out", "/nonexistent-dir/sub/out.json"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent-dir/sub/out.json"));
}

#[test]
fn paraxial_warning_is_reported() {
    let v = json(&lune(&["--setup", "hbt", "--source-separation", "0.5"]));
    assert_eq!(v["warnings"].as_array().unwrap().len(), 1);
}

#[test]
fn malformed_inputs_fail_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let unknown_key = dir.path().join("unknown.json");
    std::fs::write(&unknown_key, r#"{"kapa": 1.0}"#).unwrap();
    let bad_type = dir.path().join("type.json");
    std::fs::write(&bad_type, r#"{"n_samples": "many"}"#).unwrap();
    let not_json = dir.path().join("broken.json");
    std::fs::write(&not_json, "{ mode = analytic").unwrap();
    let bad_steps = dir.path().join("steps.json");
    std::fs::write(
        &bad_steps,
        r#"{"mode": "sweep", "sweep_var": "theta3", "sweep_steps": 1}"#,
    )
    .unwrap();
    let missing = dir.path().join("missing.json");

    let corpus: Vec<(Vec<String>, &str)> = vec![
        (vec!["--kappa", "-1"], "kappa"),
        (vec!["--kappa-prime", "-0.5"], "kappa_prime"),
        (vec!["--kappa", "NaN"], "kappa"),
        (vec!["--kappa", "abc"], "--kappa"),
        (vec!["--theta3", "inf"], "theta3"),
        (vec!["--theta4", "x"], "--theta4"),
        (vec!["--setup", "hbt", "--distance", "0"], "distance"),
        (vec!["--setup", "hbt", "--k0", "-3"], "k0"),
        (vec!["--setup", "hbt", "--area1", "0"], "area1"),
        (
            vec!["--setup", "hbt", "--source-separation", "-1e-3"],
            "source_separation",
        ),
        (vec!["--setup", "triangle"], "--setup"),
        (vec!["--mode", "plot"], "--mode"),
        (vec!["--mode", "sweep"], "sweep_var"),
        (
            vec!["--mode", "sweep", "--var", "theta3", "--steps", "1"],
            "sweep_steps",
        ),
        (
            vec!["--mode", "sweep", "--var", "theta3", "--stop", "nan"],
            "sweep_stop",
        ),
        (
            vec!["--mode", "sweep", "--var", "kappa", "--start", "-1"],
            "sweep_start",
        ),
        (vec!["--mode", "sweep", "--var", "phi"], "--var"),
        (
            vec!["--mode", "montecarlo", "--n-samples", "0"],
            "n_samples",
        ),
        (vec!["--mode", "audit", "--n-streams", "0"], "n_streams"),
        (
            vec!["--mode", "montecarlo", "--n-samples", "-5"],
            "--n-samples",
        ),
        (
            vec![
                "--mode",
                "montecarlo",
                "--scan",
                "theta3",
                "--scan-points",
                "0",
            ],
            "scan_points",
        ),
        (vec!["--seed", "-1"], "--seed"),
        (vec!["--output", "xml"], "--output"),
        (vec!["--bogus"], "--bogus"),
        (vec!["--config", unknown_key.to_str().unwrap()], "kapa"),
        (vec!["--config", bad_type.to_str().unwrap()], "n_samples"),
        (vec!["--config", not_json.to_str().unwrap()], "broken.json"),
        (vec!["--config", bad_steps.to_str().unwrap()], "sweep_steps"),
        (vec!["--config", missing.to_str().unwrap()], "missing.json"),
    ]
    .into_iter()
    .map(|(a, f)| (a.into_iter().map(String::from).collect(), f))
    .collect();

    for (args, field) in corpus {
        let argv: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = lune(&argv);
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(!out.status.success(), "{args:?} succeeded");
        assert!(out.stdout.is_empty(), "{args:?} wrote output");
        assert!(
            err.contains(field),
            "{args:?}: diagnostic does not name `{field}`: {err}"
        );
    }
}

#[test]
fn csv_file_gets_json_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("sweep.csv");
    let out = lune(&[
        "--mode",
        "sweep",
        "--var",
        "theta4",
        "--steps",
        "3",
        "--seed",
        "11",
        "--output",
        "csv",
        "--out",
        table.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let meta: Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("sweep.csv.meta.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(meta["seed"], 11);
    assert_eq!(meta["config"]["sweep_var"], "theta4");
    assert_eq!(meta["result"]["rows"].as_array().unwrap().len(), 3);
    let rows = csv_rows(&std::fs::read_to_string(&table).unwrap());
    assert_eq!(rows.len(), 4);
}
