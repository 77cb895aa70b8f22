use std::fs;
use std::path::{Path, PathBuf};

use sieve_cli::run;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn sieve(args: &[&str]) -> i32 {
    let mut argv = vec!["sieve"];
    argv.extend_from_slice(args);
    run(argv)
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const SMALL_RATE: &str = r#"
reps = 4
seed = 5
n_grid = [200, 400, 800]

[dgp]
dim = 1
regressor = { kind = "ar_copula", rho = 0.5 }
error = { kind = "student_t", df = 3.0, scale = 1.0 }
h0 = { kind = "smooth_sine" }

[basis]
family = "bspline"
order = 3

[k_rule]
constant = 2.0
exponent = 0.2
"#;

#[test]
fn fit_smoke_on_bundled_sample() {
    let out = tempfile::tempdir().unwrap();
    let cfg = configs().join("fit.toml");
    let code = sieve(&["fit", "--config", cfg.to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    let coef = fs::read_to_string(out.path().join("coefficients.csv")).unwrap();
    assert_eq!(coef.lines().count(), 1 + 12);
    let curve = fs::read_to_string(out.path().join("fitted.csv")).unwrap();
    assert_eq!(curve.lines().count(), 1 + 512);
    assert!(curve.starts_with("x,fitted\n"));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["k"], 12);
    assert_eq!(summary["n"], 200);
    assert!(out.path().join("detail.csv").exists());
}

#[test]
fn synthetic_oracle_slope_is_exact() {
    let out = tempfile::tempdir().unwrap();
    let cfg = configs().join("rate.toml");
    let code = sieve(&[
        "rate-study",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
        "--synthetic-oracle",
    ]);
    assert_eq!(code, 0);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.path().join("summary.json")).unwrap()).unwrap();
    let slope = summary["sup_slope"]["slope"].as_f64().unwrap();
    assert!((slope + 0.4).abs() < 1e-12, "{slope}");
}

#[test]
fn missing_reps_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL_RATE.replace("reps = 4\n", "");
    let cfg = write(dir.path(), "rate.toml", &text);
    let out = dir.path().join("out");
    let code = sieve(&["rate-study", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
}

#[test]
fn unknown_key_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "rate.toml", &format!("rep = 3\n{SMALL_RATE}"));
    let out = dir.path().join("out");
    assert_eq!(sieve(&["rate-study", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), 2);
}

#[test]
fn missing_seed_is_config_error_unless_flag_given() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "rate.toml", &SMALL_RATE.replace("seed = 5\n", ""));
    let out = dir.path().join("out");
    let (c, o) = (cfg.to_str().unwrap(), out.to_str().unwrap());
    assert_eq!(sieve(&["rate-study", "--config", c, "--out", o]), 2);
    assert_eq!(sieve(&["rate-study", "--config", c, "--out", o, "--seed", "5"]), 0);
}

#[test]
fn violated_threshold_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{SMALL_RATE}\n[thresholds]\nsup_slope = [5.0, 6.0]\n");
    let cfg = write(dir.path(), "rate.toml", &text);
    let out = dir.path().join("out");
    assert_eq!(sieve(&["rate-study", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), 3);
    assert!(out.join("summary.json").exists());
}

#[test]
fn oversized_blocking_length_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
reps = 5
seed = 1
n = 50
q = 40
t_grid = [0.1]
[generator]
kind = "haar_gram_deviation"
level = 3
regressor = { kind = "ar_copula", rho = 0.5 }
"#;
    let cfg = write(dir.path(), "c.toml", text);
    let out = dir.path().join("out");
    let code = sieve(&["concentration-study", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
}

#[test]
fn rank_deficient_design_still_reports() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "x.csv", "x\n0.1\n0.2\n");
    let text = format!(
        "[basis]\nfamily = \"bspline\"\norder = 3\nsize = 8\n[design]\nsource = \"csv\"\npath = {:?}\n",
        data
    );
    let cfg = write(dir.path(), "g.toml", &text);
    let out = dir.path().join("out");
    assert_eq!(sieve(&["gram-report", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), 0);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["lebesgue_empirical"]["rank_deficient"], true);
}

#[test]
fn bad_arguments_exit_2() {
    assert_eq!(sieve(&["no-such-command"]), 2);
    assert_eq!(sieve(&["fit"]), 2);
}

fn read_outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn run_in(out: &Path, cmd: &str, cfg: &Path, threads: &str) {
    let code = sieve(&[cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", threads]);
    assert_eq!(code, 0, "{cmd}");
}

#[test]
fn commands_are_idempotent_and_thread_count_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let coverage = write(
        dir.path(),
        "coverage.toml",
        &fs::read_to_string(configs().join("coverage.toml"))
            .unwrap()
            .replace("reps = 1000", "reps = 40")
            .replace("n = 2000", "n = 500"),
    );
    let stability = write(
        dir.path(),
        "stability.toml",
        &fs::read_to_string(configs().join("stability.toml"))
            .unwrap()
            .replace("reps = 5", "reps = 2")
            .replace("[8, 16, 32, 64, 128]", "[8, 16]")
            .replace("[20000]", "[600]"),
    );
    let concentration = write(
        dir.path(),
        "concentration.toml",
        &fs::read_to_string(configs().join("concentration.toml"))
            .unwrap()
            .replace("reps = 10000", "reps = 200"),
    );
    let rate = write(dir.path(), "rate.toml", SMALL_RATE);
    let cases = [
        ("fit", configs().join("fit.toml")),
        ("gram-report", configs().join("gram.toml")),
        ("rate-study", rate),
        ("coverage-study", coverage),
        ("stability-study", stability),
        ("concentration-study", concentration),
    ];
    for (cmd, cfg) in &cases {
        let a = dir.path().join(format!("{cmd}-a"));
        let b = dir.path().join(format!("{cmd}-b"));
        run_in(&a, cmd, cfg, "1");
        let first = read_outputs(&a);
        run_in(&a, cmd, cfg, "1");
        assert_eq!(first, read_outputs(&a), "{cmd} rerun");
        run_in(&b, cmd, cfg, "4");
        assert_eq!(first, read_outputs(&b), "{cmd} threads");
    }
}
