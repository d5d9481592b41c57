use std::process::{Command, Output};

fn ptheta(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ptheta"))
        .args(args)
        .env_remove("THETA_PRECISION")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 output")
}

/// Rows of a CSV table without provenance line, split into fields.
fn rows(text: &str) -> Vec<Vec<String>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    reader
        .records()
        .map(|r| r.expect("valid csv").iter().map(str::to_string).collect())
        .collect()
}

fn field(table: &[Vec<String>], row: usize, column: &str) -> String {
    let idx = table[0].iter().position(|c| c == column).expect("column exists");
    table[row][idx].clone()
}

fn parse_f64(s: &str) -> f64 {
    s.parse().expect("numeric field")
}

#[test]
fn eval_reports_value_bound_and_terms() {
    let out = ptheta(&["eval", "--q", "0.5", "--x", "0", "--no-timestamp"]);
    assert!(out.status.success());
    let t = rows(&stdout(&out));
    assert_eq!(t[0], ["q", "x", "value", "tail_bound", "terms_used"]);
    assert_eq!(parse_f64(&field(&t, 1, "value")), 1.0);

    let out = ptheta(&["eval", "--q", "0.5", "--x", "-1", "--no-timestamp"]);
    let t = rows(&stdout(&out));
    // 1 − 1/2 + 1/8 − 1/64 + 1/1024 − 2^-15 + 2^-21 − 2^-28 + …
    let direct: f64 = (0..12).map(|n: i32| 0.5f64.powi(n * (n + 1) / 2) * (-1f64).powi(n)).sum();
    assert!((parse_f64(&field(&t, 1, "value")) - direct).abs() < 1e-15);
    assert!(field(&t, 1, "value").starts_with("6.10321518"));

    let out = ptheta(&["eval", "--q", "0.3092493386", "--x", "-7.5032559833", "--no-timestamp"]);
    let t = rows(&stdout(&out));
    assert!(parse_f64(&field(&t, 1, "value")).abs() < 1e-12);
}

#[test]
fn exit_codes_follow_the_contract() {
    assert_eq!(ptheta(&["eval", "--q", "1.5", "--x", "1"]).status.code(), Some(2));
    assert_eq!(ptheta(&["eval", "--q", "abc", "--x", "1"]).status.code(), Some(2));
    assert_eq!(ptheta(&["eval", "--q", "0.5"]).status.code(), Some(2));
    assert_eq!(ptheta(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(ptheta(&["spectral", "--j", "5..3"]).status.code(), Some(2));
    assert_eq!(ptheta(&["--precision", "10", "eval", "--q", "0.5", "--x", "1"]).status.code(), Some(2));
    assert_eq!(ptheta(&["fit", "qtilde", "--j", "1..5"]).status.code(), Some(2));
    let budget = ptheta(&["eval", "--q", "0.99999", "--x", "-1000000"]);
    assert_eq!(budget.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&budget.stderr).contains("precision budget"));
}

#[test]
fn spectral_rows_have_the_fixed_schema() {
    let out = ptheta(&["spectral", "--j", "1..5", "--no-timestamp"]);
    assert!(out.status.success());
    let t = rows(&stdout(&out));
    assert_eq!(t[0], ["j", "q_tilde", "y", "theta_residual", "dtheta_residual", "error"]);
    assert_eq!(t.len(), 6);
    assert!((parse_f64(&field(&t, 1, "q_tilde")) - 0.309_249_338_6).abs() < 1e-9);
    // The listed y_2..y_5 carry one decimal, truncated.
    for (row, listed) in [(2, -11.7), (3, -14.0), (4, -15.5), (5, -16.6)] {
        let y = parse_f64(&field(&t, row, "y"));
        assert_eq!((y * 10.0).trunc() / 10.0, listed, "y_{row} = {y}");
    }
    for row in 1..=5 {
        assert_eq!(field(&t, row, "error"), "");
        assert!(parse_f64(&field(&t, row, "theta_residual")) < 1e-39);
    }
}

#[test]
fn spectral_values_are_stable_under_more_precision() {
    let base = rows(&stdout(&ptheta(&["spectral", "--j", "10..12", "--no-timestamp"])));
    let fine = rows(&stdout(&ptheta(&["spectral", "--j", "10..12", "--precision", "80", "--no-timestamp"])));
    for row in 1..=3 {
        let a = field(&base, row, "q_tilde");
        let b = field(&fine, row, "q_tilde");
        // Compare the leading 31 significant digits of the mantissas.
        assert_eq!(a[..33], b[..33], "j row {row}");
        assert_eq!(a.rsplit('e').next(), b.rsplit('e').next());
    }
    assert!(field(&fine, 1, "q_tilde").len() > field(&base, 1, "q_tilde").len());
}

#[test]
fn output_is_deterministic_across_runs_and_pool_sizes() {
    let args = |n: &'static str| ["rtilde", "--s", "1..6", "--no-timestamp", "--parallelism", n];
    let one = ptheta(&args("1"));
    let again = ptheta(&args("1"));
    let four = ptheta(&args("4"));
    assert!(one.status.success());
    assert_eq!(one.stdout, again.stdout);
    assert_eq!(one.stdout, four.stdout);

    let one = ptheta(&["spectral", "--j", "1..4", "--no-timestamp", "--parallelism", "1"]);
    let three = ptheta(&["spectral", "--j", "1..4", "--no-timestamp", "--parallelism", "3"]);
    assert_eq!(one.stdout, three.stdout);
}

#[test]
fn provenance_line_is_optional() {
    let with = stdout(&ptheta(&["eval", "--q", "0.5", "--x", "2"]));
    let without = stdout(&ptheta(&["eval", "--q", "0.5", "--x", "2", "--no-timestamp"]));
    let first = with.lines().next().unwrap();
    assert!(first.starts_with("# generated at unix time"));
    assert!(first.contains("\"grid_spec\":\"eval q=0.5 x=2\""));
    assert_eq!(with.lines().skip(1).collect::<Vec<_>>(), without.lines().collect::<Vec<_>>());
    assert!(without.starts_with("q,x,value"));
}

#[test]
fn json_mirrors_the_csv_columns() {
    let csv = rows(&stdout(&ptheta(&["spectral", "--j", "1..2", "--no-timestamp"])));
    let out = ptheta(&["spectral", "--j", "1..2", "--no-timestamp", "--format", "json"]);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).expect("valid json");
    assert!(doc.get("generated").is_none());
    let columns: Vec<&str> = doc["columns"].as_array().unwrap().iter().map(|c| c.as_str().unwrap()).collect();
    assert_eq!(columns, csv[0]);
    let json_rows = doc["rows"].as_array().unwrap();
    assert_eq!(json_rows.len(), 2);
    for (i, row) in json_rows.iter().enumerate() {
        let keys: Vec<&String> = row.as_object().unwrap().keys().collect();
        assert_eq!(keys, csv[0].iter().collect::<Vec<_>>());
        assert_eq!(row["j"].as_u64(), Some(i as u64 + 1));
        assert_eq!(row["q_tilde"].as_str().unwrap(), field(&csv, i + 1, "q_tilde"));
        assert!(row["error"].is_null());
    }

    let stamped = ptheta(&["eval", "--q", "0.5", "--x", "1", "--format", "json"]);
    let doc: serde_json::Value = serde_json::from_slice(&stamped.stdout).unwrap();
    assert_eq!(doc["config"]["precision_digits"], 60);
    assert_eq!(doc["config"]["output_format"], "json");
}

#[test]
fn out_flag_writes_the_table_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("zeros.csv");
    let out = ptheta(&["zeros", "--q", "0.2", "--count", "4", "--no-timestamp", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let t = rows(&std::fs::read_to_string(&path).unwrap());
    assert_eq!(t.len(), 5);
    let locations: Vec<f64> = (1..=4).map(|r| parse_f64(&field(&t, r, "location"))).collect();
    assert!(locations.windows(2).all(|w| w[1] < w[0]) && locations[0] < 0.0);

    let missing = dir.path().join("no/such/dir.csv");
    let out = ptheta(&["eval", "--q", "0.5", "--x", "1", "--out", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn precision_layers_default_environment_and_flag() {
    let digits = |out: &Output| {
        let t = rows(&stdout(out));
        let v = field(&t, 1, "value");
        v.split('e').next().unwrap().trim_start_matches('-').replace('.', "").len()
    };
    let base = ["eval", "--q", "0.5", "--x", "-1", "--no-timestamp"];
    assert_eq!(digits(&ptheta(&base)), 60);
    let env = Command::new(env!("CARGO_BIN_EXE_ptheta"))
        .args(base)
        .env("THETA_PRECISION", "40")
        .output()
        .unwrap();
    assert_eq!(digits(&env), 40);
    let flag = Command::new(env!("CARGO_BIN_EXE_ptheta"))
        .args(base)
        .args(["--precision", "50"])
        .env("THETA_PRECISION", "40")
        .output()
        .unwrap();
    assert_eq!(digits(&flag), 50);
    let bad = Command::new(env!("CARGO_BIN_EXE_ptheta"))
        .args(base)
        .env("THETA_PRECISION", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn zero_rows_report_complex_pairs_per_row() {
    let out = ptheta(&["zeros", "--q", "0.32", "--count", "4", "--no-timestamp"]);
    assert!(out.status.success());
    let t = rows(&stdout(&out));
    assert!(field(&t, 1, "error").contains("not real"));
    assert!(field(&t, 2, "error").contains("not real"));
    assert_eq!(field(&t, 3, "error"), "");
}

#[test]
fn critical_points_alternate_in_sign() {
    let out = ptheta(&["critical", "--q", "0.2", "--s", "1..2", "--no-timestamp"]);
    let t = rows(&stdout(&out));
    assert_eq!(t.len(), 5);
    for row in 1..=4 {
        let value = parse_f64(&field(&t, row, "theta_value"));
        match field(&t, row, "kind").as_str() {
            "minimum" => assert!(value < 0.0),
            "maximum" => assert!(value > 0.0),
            other => panic!("unexpected kind {other}"),
        }
    }
}

#[test]
fn psi_table_at_one_half() {
    let out = ptheta(&["psi-table", "--q", "0.5", "--no-timestamp"]);
    let t = rows(&stdout(&out));
    let psi = parse_f64(&field(&t, 1, "psi"));
    // 1 + 2Σ (−1)^j q^{j²}
    let direct: f64 = 1.0 + 2.0 * (1..8).map(|j: i32| 0.5f64.powi(j * j) * (-1f64).powi(j)).sum::<f64>();
    assert!((psi - direct).abs() < 1e-15);
    let grid = rows(&stdout(&ptheta(&["psi-table", "--points", "4", "--no-timestamp"])));
    assert_eq!(grid.len(), 5);
    assert_eq!(field(&grid, 1, "q"), "0.125000");
}

#[test]
fn synthetic_fit_recovers_the_planted_constant() {
    let out = ptheta(&["fit", "qtilde", "--synthetic", "b=2.0", "--no-timestamp"]);
    assert!(out.status.success());
    let t = rows(&stdout(&out));
    let last = t.len() - 1;
    assert_eq!(field(&t, last, "row"), "extrapolated");
    assert!((parse_f64(&field(&t, last, "estimate")) - 2.0).abs() < 1e-6);
    assert_eq!(field(&t, last, "in_interval"), "true");
    assert_eq!(ptheta(&["fit", "qtilde", "--synthetic", "alpha=1"]).status.code(), Some(2));
    assert_eq!(ptheta(&["fit", "qtilde", "--synthetic", "c=1"]).status.code(), Some(2));
}

#[test]
fn rtilde_fit_converges_to_the_expansion_constant() {
    let out = ptheta(&["fit", "rtilde", "--s", "50..400", "--no-timestamp"]);
    assert!(out.status.success());
    let t = rows(&stdout(&out));
    let last = t.len() - 1;
    // π²/8 + ln 2/2 + ln(1 + e^{−π})/4
    let pi = std::f64::consts::PI;
    let expansion = pi * pi / 8.0 + 2f64.ln() / 2.0 + (1.0 + (-pi).exp()).ln() / 4.0;
    assert!((parse_f64(&field(&t, last, "estimate")) - expansion).abs() < 2e-3);
    assert_eq!(field(&t, 1, "constant"), "b*");
}

#[test]
fn verify_minimal_run_passes() {
    let out = ptheta(&["verify", "all", "--j-max", "1", "--no-timestamp"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let t = rows(&stdout(&out));
    assert_eq!(t[0], ["suite", "name", "grid_size", "worst_margin", "pass", "note"]);
    for suite in ["theta", "psi", "spectral", "asymptotics"] {
        assert!((1..t.len()).any(|r| field(&t, r, "suite") == suite));
    }
    let chain = (1..t.len())
        .find(|&r| field(&t, r, "name").starts_with("r~_j <= q~_j"))
        .expect("ordering row");
    assert_eq!(field(&t, chain, "pass"), "true");
    assert_eq!(field(&t, chain, "note"), "threshold j = 1");
    assert_eq!(ptheta(&["verify", "everything"]).status.code(), Some(2));
}

#[test]
fn verify_failures_exit_one_and_are_listed() {
    // With 41 indices s >= 50 the b* fit runs; its limit 1.5909 lies outside
    // the reference band, so this row fails.
    let out = ptheta(&["verify", "asymptotics", "--j-max", "90", "--no-timestamp"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("FAIL asymptotics: b* from r~_s"), "{stderr}");
    let t = rows(&stdout(&out));
    let failing: Vec<String> = (1..t.len()).filter(|&r| field(&t, r, "pass") == "false").map(|r| field(&t, r, "name")).collect();
    assert_eq!(failing.len(), 1, "{failing:?}");
}
