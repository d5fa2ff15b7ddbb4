use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

fn cli(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_local-consensus"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn window_trace_holds_eleven_point_means() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(dir.path(), &["simulate", "--set", "algorithm.variant=window", "--set", "algorithm.L=5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let meta = json(&dir.path().join("trace.meta.json"));
    assert_eq!(meta["schema_version"], 1);
    let omega = meta["config"]["field"]["omega"].as_f64().unwrap();
    let n = 64i64;
    for row in csv_rows(&dir.path().join("trace.csv")) {
        if row[0] != "5" {
            continue;
        }
        let i: i64 = row[1].parse().unwrap();
        let y: f64 = row[2].parse().unwrap();
        let mean = (-5..=5).map(|j| (omega * (i + j).rem_euclid(n) as f64).cos()).sum::<f64>() / 11.0;
        assert!((y - mean).abs() < 1e-12, "sensor {i}: {y} vs {mean}");
    }
}

#[test]
fn embedded_config_reproduces_the_trace() {
    let a = tempfile::tempdir().unwrap();
    let out = cli(
        a.path(),
        &["simulate", "--set", "algorithm.variant=dyn_window", "--set", "algorithm.l=3", "--set", "chain.rounds=12"],
    );
    assert!(out.status.success());
    let meta = json(&a.path().join("trace.meta.json"));
    let cfg = a.path().join("resolved.toml");
    std::fs::write(&cfg, meta["config_toml"].as_str().unwrap()).unwrap();
    let b = tempfile::tempdir().unwrap();
    let out = cli(b.path(), &["simulate", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let first = std::fs::read(a.path().join("trace.csv")).unwrap();
    assert_eq!(first, std::fs::read(b.path().join("trace.csv")).unwrap());
    assert!(String::from_utf8(first).unwrap().starts_with("round,sensor,y,z0,z1,z2,z3\n"));
}

#[test]
fn variable_window_metadata_reports_weight_sums() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(
        dir.path(),
        &["simulate", "--set", "chain.n=7", "--set", "algorithm.variant=variable_window", "--set", "algorithm.l=[2,2,3,3,3,2,2]"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let meta = json(&dir.path().join("trace.meta.json"));
    assert_eq!(meta["weights_normalized"], false);
    assert_eq!(meta["weight_sums"].as_array().unwrap().len(), 7);
}

#[test]
fn figures_start_at_unit_gain() {
    let dir = tempfile::tempdir().unwrap();
    assert!(cli(dir.path(), &["figures"]).status.success());
    let rows = csv_rows(&dir.path().join("fig_h_exp.csv"));
    let dc: Vec<_> = rows.iter().filter(|r| r[0].parse::<f64>().unwrap() == 0.0).collect();
    assert_eq!(dc.len(), 4);
    assert!(dc.iter().all(|r| (r[1].parse::<f64>().unwrap() - 1.0).abs() < 1e-15));
    for f in ["fig_h_exp_origin", "fig_k_exp_origin", "fig_k_exp", "fig_k_window"] {
        assert!(dir.path().join(format!("{f}.csv")).exists());
    }
}

#[test]
fn frequency_tables_agree_with_analytic_columns() {
    let dir = tempfile::tempdir().unwrap();
    assert!(cli(dir.path(), &["freq-spatial", "--set", "chain.n=128"]).status.success());
    let rows = csv_rows(&dir.path().join("freq_spatial.csv"));
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0][0].parse::<f64>().unwrap(), 2.0 * PI / 128.0);
    assert!(rows.iter().all(|r| r[5].parse::<f64>().unwrap() < 1e-9));

    let out = cli(dir.path(), &["freq-temporal", "--set", "algorithm.variant=dyn_exponential", "--set", "algorithm.rho=0.8", "--set", "chain.n=8"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("freq_temporal.csv"));
    assert!(rows.iter().all(|r| r[5].parse::<f64>().unwrap() < 1e-3));
}

#[test]
fn stochastic_commands_need_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(dir.path(), &["noise"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("chain.master_seed"));

    let args = ["noise", "--seed", "5", "--set", "algorithm.rho=0.5", "--set", "analysis.replicates=400"];
    assert!(cli(dir.path(), &args).status.success());
    let first = std::fs::read(dir.path().join("noise.json")).unwrap();
    assert!(cli(dir.path(), &args).status.success());
    assert_eq!(first, std::fs::read(dir.path().join("noise.json")).unwrap());
    let report = json(&dir.path().join("noise.json"));
    assert!((report["reports"][0]["analytic_variance"].as_f64().unwrap() - 5.0 / 27.0).abs() < 1e-15);
    assert_eq!(report["master_seed"], 5);

    let out = cli(dir.path(), &["spacing", "--seed", "2", "--set", "analysis.replicates=2000"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&dir.path().join("spacing.json"))["report"]["replicates"], 2000);
}

#[test]
fn errors_name_the_key_and_set_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(dir.path(), &["simulate", "--set", "algorithm.rhoo=0.3"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("`algorithm`") && err.contains("rhoo"), "{err}");

    let out = cli(dir.path(), &["simulate", "--set", "chain.n=8", "--set", "algorithm.variant=window", "--set", "algorithm.l=4"]);
    assert_eq!(out.status.code(), Some(1));

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[chain]\nn = 16\n[plot]\nx = 1\n").unwrap();
    let out = cli(dir.path(), &["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("plot"));

    let out = cli(
        dir.path(),
        &["simulate", "--set", "field.kind=constant", "--set", "field.value=1.7e308", "--set", "algorithm.variant=dyn_window", "--set", "algorithm.l=3"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_reports_each_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(dir.path(), &["verify", "--criterion", "2", "--criterion", "9"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains(" 2 PASS") && text.contains(" 9 PASS"), "{text}");
    assert!(text.contains("2 of 2 criteria passed"));

    // the L = 5 variance ratio exceeds its bound, so this criterion fails
    let out = cli(dir.path(), &["verify", "--criterion", "7"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).contains(" 7 FAIL"));
}

#[test]
fn uneven_weight_rows_need_an_explicit_opt_out() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("arb.toml");
    let text = "[chain]\nn = 5\nrounds = 3\n\n[algorithm]\nvariant = \"arbitrary\"\n\n[algorithm.table]\nK = 4.0\nradius = 1\n\
                rows = [[1.0, 2.0, 1.0], [1.0, 2.0, 1.0], [1.0, 2.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 1.0]]\n";
    std::fs::write(&cfg, text).unwrap();
    let path = cfg.to_str().unwrap();
    let out = cli(dir.path(), &["simulate", "--config", path]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("algorithm.table"));

    let out = cli(dir.path(), &["simulate", "--config", path, "--set", "analysis.check_weights=false"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let meta = json(&dir.path().join("trace.meta.json"));
    assert_eq!(meta["weight_check"]["row_sum_violations"][0][0], 4);
}
