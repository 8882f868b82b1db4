//! End-to-end runs of the `setpar` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use setpar::estimation::{fit_fixed_threshold, FitConfig};
use setpar::model::simulate;
use setpar::SetparParams;
use setpar_cli::data::read_counts;
use setpar_cli::output::FitDocument;

const EXPLOSIVE_LOWER_SIM: &str = "threshold = 6
n = 500
seed = 1
[lower]
d = 0.5
a = 0.8
b = 0.7
[upper]
d = 0.2
a = 0.2
b = 0.1
";

fn setpar(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_setpar")).args(args.iter().map(|a| a.as_ref())).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn ok(out: Output) -> Output {
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    out
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn table(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path).unwrap().lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn simulation_is_deterministic_and_round_trips_through_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sim.toml", EXPLOSIVE_LOWER_SIM);
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    ok(setpar(&[&"simulate", &"--config", &cfg, &"-o", &a]));
    ok(setpar(&[&"simulate", &"--config", &cfg, &"-o", &b]));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(dir.path().join("a.csv.manifest.toml").exists());

    let truth = SetparParams::from_slice(6, &[0.5, 0.8, 0.7, 0.2, 0.2, 0.1]).unwrap();
    let (y, lambda) = simulate(&truth, 500, 1, 500, None).unwrap();
    assert_eq!(read_counts(&a, Some("y")).unwrap(), y);
    let rows = table(&a);
    assert_eq!(rows[0], ["t", "y", "lambda"]);
    for (row, l) in rows[1..].iter().zip(lambda.values()) {
        assert_eq!(row[2].parse::<f64>().unwrap(), *l);
    }

    // A single-candidate grid is the fixed-threshold fit.
    let fit = dir.path().join("fit.toml");
    ok(setpar(&[&"fit", &"--data", &a, &"--column", &"y", &"--thresholds", &"6", &"-o", &fit]));
    let doc = FitDocument::read(&fit).unwrap();
    let fixed = fit_fixed_threshold(&y, 6, &FitConfig::default()).unwrap();
    assert_eq!(doc.result.threshold, Some(6));
    assert_eq!(doc.result.theta, fixed.theta);
    assert_eq!(doc.result.loglik, fixed.loglik);
    assert_eq!(doc.series.residuals.len(), 500);
}

#[test]
fn input_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sim.toml", &EXPLOSIVE_LOWER_SIM.replace("n = 500", "n = 0"));
    let out = setpar(&[&"simulate", &"--config", &cfg, &"-o", &dir.path().join("s.csv")]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("n:"), "{}", stderr(&out));

    let cfg = write(dir.path(), "typo.toml", &EXPLOSIVE_LOWER_SIM.replace("seed", "sed"));
    let out = setpar(&[&"simulate", &"--config", &cfg, &"-o", &dir.path().join("s.csv")]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("sed"), "{}", stderr(&out));

    let data = write(dir.path(), "bad.txt", "count\n3\n-2\n4\n");
    let out = setpar(&[&"fit", &"--data", &data, &"-o", &dir.path().join("f.toml")]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));

    let data = write(dir.path(), "frac.txt", "3\n1.5\n");
    assert_eq!(code(&setpar(&[&"fit", &"--data", &data, &"-o", &dir.path().join("f.toml")])), 2);
}

#[test]
fn ill_posed_regimes_exit_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "flat.txt", &"2\n".repeat(60));
    let out = setpar(&[&"fit", &"--data", &data, &"--thresholds", &"10", &"-o", &dir.path().join("f.toml")]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn diagnose_writes_plot_tables_and_checks_lengths() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sim.toml", EXPLOSIVE_LOWER_SIM);
    let data = dir.path().join("s.csv");
    ok(setpar(&[&"simulate", &"--config", &cfg, &"-o", &data]));
    let fit = dir.path().join("fit.toml");
    ok(setpar(&[&"fit", &"--data", &data, &"--column", &"y", &"-o", &fit]));

    let out_dir = dir.path().join("diag");
    ok(setpar(&[&"diagnose", &"--fit", &fit, &"--data", &data, &"--column", &"y", &"--output-dir", &out_dir]));
    for name in ["residual_acf.csv", "data_acf.csv"] {
        let rows = table(&out_dir.join(name));
        assert_eq!(rows[0], ["lag", "acf", "band"]);
        assert_eq!(rows[1][0], "0");
        assert_eq!(rows[1][1], "1");
        assert_eq!(rows.len(), 22);
    }
    let fitted = table(&out_dir.join("fitted.csv"));
    assert_eq!(fitted.len(), 501);
    let doc = FitDocument::read(&fit).unwrap();
    assert_eq!(fitted[1][3].parse::<f64>().unwrap(), doc.series.residuals[0]);
    let summary = table(&out_dir.join("residual_summary.csv"));
    let mean: f64 = summary.iter().find(|r| r[0] == "mean").unwrap()[1].parse().unwrap();
    assert_eq!(mean, doc.residual_moments.mean);

    let out = setpar(&[
        &"diagnose", &"--fit", &fit, &"--data", &data, &"--column", &"y", &"--head", &"400", &"--output-dir", &out_dir,
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn forecast_of_a_constant_intensity_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let history = write(dir.path(), "hist.txt", &"3\n4\n2\n3\n".repeat(20));
    let fit = dir.path().join("fit.toml");
    ok(setpar(&[&"fit", &"--data", &history, &"--model", &"par", &"-o", &fit]));
    // With a = b = 0 every forecast is d.
    let mut doc = FitDocument::read(&fit).unwrap();
    doc.result.theta = vec![3.0, 0.0, 0.0, 3.0, 0.0, 0.0];
    doc.write(&fit).unwrap();
    let future = write(dir.path(), "fut.txt", "3\n3\n3\n");
    let out_dir = dir.path().join("fc");
    ok(setpar(&[&"forecast", &"--fit", &fit, &"--history", &history, &"--future", &future, &"--output-dir", &out_dir]));
    let summary = table(&out_dir.join("forecast_summary.csv"));
    assert_eq!(summary[1], ["horizon", "3"]);
    assert_eq!(summary[2], ["mse", "0"]);
}

#[test]
fn mc_output_is_independent_of_workers() {
    let dir = tempfile::tempdir().unwrap();
    let design = "threshold = 6
sample_sizes = [300]
replications = 6
seed = 99
[lower]
d = 0.5
a = 0.8
b = 0.7
[upper]
d = 0.2
a = 0.2
b = 0.1
";
    let cfg = write(dir.path(), "mc.toml", design);
    let (one, three) = (dir.path().join("one.csv"), dir.path().join("three.csv"));
    ok(setpar(&[&"mc", &"--config", &cfg, &"-o", &one, &"--workers", &"1"]));
    ok(setpar(&[&"mc", &"--config", &cfg, &"-o", &three, &"--workers", &"3"]));
    assert_eq!(std::fs::read(&one).unwrap(), std::fs::read(&three).unwrap());
    let rows = table(&one);
    assert_eq!(rows[0], ["n", "statistic", "r", "d1", "a1", "b1", "d2", "a2", "b2"]);
    assert_eq!(rows[1][1], "mean");

    let cfg = write(dir.path(), "r1.toml", &design.replace("replications = 6", "replications = 1"));
    let r1 = dir.path().join("r1.csv");
    ok(setpar(&[&"mc", &"--config", &cfg, &"-o", &r1]));
    let n_cov = table(&r1).into_iter().find(|r| r[1] == "n_cov").unwrap();
    assert!(n_cov[2..].iter().all(|v| v == "NA"));

    let cfg = write(dir.path(), "bad.toml", &design.replace("replications = 6", "replications = 0"));
    assert_eq!(code(&setpar(&[&"mc", &"--config", &cfg, &"-o", &r1])), 2);
}

#[test]
fn earthquake_fit_and_forecasts() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/earthquakes.csv");
    let Ok(text) = std::fs::read_to_string(&root) else {
        eprintln!("data/earthquakes.csv not present; skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let history = write(dir.path(), "hist.csv", &(lines[..101].join("\n") + "\n"));
    let future = write(dir.path(), "fut.csv", &(format!("{}\n", lines[0]) + &lines[101..].join("\n") + "\n"));

    let mut mse = Vec::new();
    for model in ["setpar", "par"] {
        let fit = dir.path().join(format!("{model}.toml"));
        ok(setpar(&[
            &"fit", &"--data", &root, &"--column", &"count", &"--head", &"100", &"--lambda-init", &"first", &"--model", &model,
            &"-o", &fit,
        ]));
        let doc = FitDocument::read(&fit).unwrap();
        if model == "setpar" {
            assert_eq!(doc.result.threshold, Some(25));
        }
        let out_dir = dir.path().join(model);
        ok(setpar(&[
            &"forecast", &"--fit", &fit, &"--history", &history, &"--future", &future, &"--column", &"count",
            &"--output-dir", &out_dir,
        ]));
        mse.push(table(&out_dir.join("forecast_summary.csv"))[2][1].parse::<f64>().unwrap());
    }
    // Reference values, to one decimal: 12.8 and 13.4.
    assert_eq!((mse[0] * 10.0).round() / 10.0, 12.8);
    assert_eq!((mse[1] * 10.0).round() / 10.0, 13.4);
}
