use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bai(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bai")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = bai(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SWEEP: [&str; 13] = [
    "sweep", "--algs", "unif,sh,shvar", "--K", "16", "--n", "500,1000,2000", "--runs", "2000", "--seed", "7", "--format", "csv",
];

#[test]
fn bounds_prints_the_known_variance_value() {
    let text = ok(&["bounds", "--means", "1,0", "--vars", "1,1", "--n", "32"]);
    let line = text.lines().find(|l| l.starts_with("shvar ")).expect(&text);
    let value: f64 = line.split_whitespace().nth(1).unwrap().parse().unwrap();
    let expected = 2.0 * (-4.0f64).exp();
    assert!((value - expected).abs() <= 1e-15 * expected, "{value} vs {expected}");

    let json: serde_json::Value =
        serde_json::from_str(&ok(&["bounds", "--means", "1,0", "--vars", "1,1", "--n", "32", "--format", "json"])).unwrap();
    assert_eq!(json["bounds"]["shvar"]["value"].as_f64().unwrap(), value);
    assert_eq!(json["bounds"]["shadavar"]["vacuous"], true);
}

#[test]
fn sweep_matches_golden_and_is_reproducible() {
    let golden = std::fs::read_to_string(golden_path("sweep_k16_seed7.csv")).unwrap();
    assert_eq!(golden.lines().count(), 10);
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let mut args = SWEEP.to_vec();
    args.extend(["--output", s(&out)]);
    assert_eq!(ok(&args), "");
    assert_eq!(std::fs::read_to_string(&out).unwrap(), golden);

    let mut one_thread = SWEEP.to_vec();
    one_thread.extend(["--threads", "1"]);
    assert_eq!(ok(&one_thread), golden);
}

#[test]
fn sweep_json_rows() {
    let text = ok(&["sweep", "--algs", "sh", "--K", "4", "--n", "100", "--runs", "10", "--format", "json"]);
    let rows: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(rows[0]["algorithm"], "sh");
    assert_eq!(rows[0]["runs"], 10);
}

#[test]
fn degraded_simulation_warns_and_finishes() {
    let out = bai(&["simulate", "--alg", "shadavar", "--K", "2", "--n", "10", "--runs", "50"]);
    assert!(out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("warning[degraded]: 50 of 50 runs"), "{stderr}");
    let stdout = String::from_utf8(out.stdout).unwrap();
    let row = stdout.lines().nth(1).unwrap();
    assert!(row.starts_with("shadavar"), "{stdout}");
    assert!(row.trim_end().ends_with("50"), "{stdout}");
}

#[test]
fn trace_covers_the_whole_budget() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.txt");
    ok(&["simulate", "--alg", "shvar", "--K", "8", "--n", "120", "--runs", "3", "--trace", s(&trace)]);
    let text = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(text.lines().count(), 120);
    assert!(bai(&["simulate", "--alg", "unif", "--K", "8", "--n", "120", "--trace", s(&trace)]).status.code() != Some(0));
}

#[test]
fn errors_exit_nonzero_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never.csv");
    let cases: [&[&str]; 5] = [
        &["sweep", "--n", "100", "--bogus"],
        &["sweep", "--algs", "vbr", "--K", "16", "--n", "100"],
        &["sweep", "--algs", "thompson", "--n", "100"],
        &["simulate", "--alg", "sh", "--K", "16", "--n", "63"],
        &["bounds", "--means", "1,0", "--vars", "1", "--n", "32"],
    ];
    for case in cases {
        let mut args = case.to_vec();
        args.extend(["--output", s(&out)]);
        let res = bai(&args);
        assert!(!res.status.success(), "{case:?}");
        assert!(!res.stderr.is_empty(), "{case:?}");
        assert!(res.stdout.is_empty(), "{case:?}");
        assert!(!out.exists(), "{case:?}");
    }
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn config_file_values_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("grid.conf");
    std::fs::write(
        &conf,
        "# the golden grid\nalgs = unif,sh,shvar\nK = 16\nn = 500,1000,2000\nruns = 2000\nseed = 7\nformat = csv\ntiming = false\n",
    )
    .unwrap();
    let golden = std::fs::read_to_string(golden_path("sweep_k16_seed7.csv")).unwrap();
    assert_eq!(ok(&["sweep", "--config", s(&conf)]), golden);

    let overridden = ok(&["--config", s(&conf), "sweep", "--runs", "30", "--algs", "sh"]);
    let rows: Vec<_> = overridden.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.starts_with("sh,16,") && r.split(',').nth(3) == Some("30")));

    std::fs::write(&conf, "nonsense = 1\n").unwrap();
    assert!(!bai(&["sweep", "--n", "100", "--config", s(&conf)]).status.success());
}

#[test]
fn generated_instance_is_the_sweeps_first_draw() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("k8.txt");
    ok(&["gen-instance", "--K", "8", "--seed", "3", "--output", s(&inst)]);
    let text = std::fs::read_to_string(&inst).unwrap();
    assert!(text.contains("means = ") && text.contains("variances = "));
    let common = ["sweep", "--algs", "sh,shadavar", "--n", "200", "--runs", "100", "--seed", "3", "--format", "csv"];
    let mut from_file = common.to_vec();
    from_file.extend(["--instance", s(&inst)]);
    let mut drawn = common.to_vec();
    drawn.extend(["--K", "8", "--fixed-instance"]);
    assert_eq!(ok(&from_file), ok(&drawn));
    assert!(!bai(&["sweep", "--n", "200", "--instance", s(&inst), "--K", "16"]).status.success());
}

#[test]
fn movie_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let ratings = dir.path().join("ratings.dat");
    let mut text = String::new();
    for u in 1..=30u32 {
        for m in 1..=12u32 {
            if (u + 2 * m) % 3 != 0 {
                let r = 1 + (u * m + m) % 5;
                writeln!(text, "{u}::{m}::{r}::97830076{}", m % 10).unwrap();
            }
        }
    }
    std::fs::write(&ratings, text).unwrap();
    let bin = dir.path().join("completed.bin");
    let summary = ok(&[
        "prepare-movielens", "--input", s(&ratings), "--output", s(&bin), "--max-users", "25", "--max-movies", "10", "--format", "json",
    ]);
    let json: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(json["users"], 25);
    assert_eq!(json["movies"], 10);
    assert!(json["observed_rmse"].as_f64().unwrap().is_finite());
    assert!(bin.exists());

    let table = ok(&["sweep", "--ratings", s(&bin), "--algs", "shvar,unif", "--K", "4", "--n", "80", "--runs", "40", "--format", "csv"]);
    assert_eq!(table.lines().count(), 3);
    assert!(!bai(&["sweep", "--ratings", s(&bin), "--K", "11", "--n", "1000"]).status.success());

    let missing = dir.path().join("absent.dat");
    let out = dir.path().join("none.bin");
    assert!(!bai(&["prepare-movielens", "--input", s(&missing), "--output", s(&out)]).status.success());
    assert!(!out.exists());
}
