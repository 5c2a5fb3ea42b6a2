use std::fs;
use std::path::Path;
use std::process::Command;

use tvvar::io::{read_fit_archive, RunConfig, WindowSpec};
use tvvar::model::TimeSeries;
use tvvar_cli::{cmd_evaluate, cmd_fit, cmd_simulate, cmd_summarize, fit_to_archive, replicate_study, Overrides};

fn tiny_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.model.p = 1;
    cfg.model.h = 1;
    cfg.chain.n_iter = 50;
    cfg.chain.burn_in = Some(10);
    cfg.chain.thin = 2;
    cfg.chain.seed = 9;
    cfg
}

fn tiny_data() -> TimeSeries {
    let v: Vec<f64> = (0..40).map(|k| ((k * 7 % 11) as f64 - 5.0) / 3.0).collect();
    TimeSeries::from_rows(2, v).unwrap()
}

/// All files of an archive with the wall-clock line removed from the manifest.
fn archive_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            let mut bytes = fs::read(&p).unwrap();
            if name == "manifest.toml" {
                let text = String::from_utf8(bytes).unwrap();
                bytes = text
                    .lines()
                    .filter(|l| !l.starts_with("wall_clock_seconds"))
                    .collect::<Vec<_>>()
                    .join("\n")
                    .into_bytes();
            }
            (name, bytes)
        })
        .collect();
    out.sort();
    out
}

#[test]
fn tiny_fit_completes_and_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let fit = fit_to_archive(&tiny_config(), &tiny_data(), dir.path()).unwrap();
    assert_eq!(fit.draws.len(), 20);
    let (m, back) = read_fit_archive(dir.path()).unwrap();
    assert_eq!((m.n, m.p, m.h, m.t_len, m.draws), (2, 1, 1, 20, 20));
    assert_eq!(back.posterior_mean_a, fit.posterior_mean_a);
    assert_eq!(back.gamma_prob, fit.gamma_prob);
    assert_eq!(back.component_mean, fit.component_mean);
    for f in ["draws_margins.csv", "draws_paths.csv", "draws_scalars.csv", "config.toml"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
}

#[test]
fn equal_seeds_give_identical_archives() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut cfg = tiny_config();
    cfg.chain.chains = 3;
    fit_to_archive(&cfg, &tiny_data(), a.path()).unwrap();
    cfg.chain.threads = Some(3);
    fit_to_archive(&cfg, &tiny_data(), b.path()).unwrap();
    let (x, y) = (archive_bytes(a.path()), archive_bytes(b.path()));
    assert_eq!(x.len(), y.len());
    for ((name, u), (_, v)) in x.iter().zip(&y) {
        assert!(u == v, "{name} differs");
    }
}

#[test]
fn simulate_fit_evaluate_summarize_through_files() {
    let root = tempfile::tempdir().unwrap();
    let sim = root.path().join("sim");
    let fit = root.path().join("fit");
    let mut cfg = RunConfig::default();
    cfg.simulate.n = Some(3);
    cfg.simulate.t = Some(40);
    cfg.simulate.p = Some(1);
    cfg.simulate.h = Some(2);
    cfg.model.p = 2;
    cfg.model.h = 2;
    cfg.chain.n_iter = 60;
    Overrides { out: Some(sim.clone()), seed: Some(4), ..Default::default() }.apply(&mut cfg);
    cmd_simulate(&cfg).unwrap();
    for f in ["data.csv", "truth_components.csv", "truth_paths.csv", "manifest.toml"] {
        assert!(sim.join(f).exists(), "{f} missing");
    }

    Overrides { out: Some(fit.clone()), data: Some(sim.join("data.csv")), ..Default::default() }
        .apply(&mut cfg);
    cmd_fit(&cfg).unwrap();

    let eval = root.path().join("eval");
    Overrides {
        out: Some(eval.clone()),
        fit: Some(fit.clone()),
        truth: Some(sim.clone()),
        ..Default::default()
    }
    .apply(&mut cfg);
    let r = cmd_evaluate(&cfg).unwrap();
    assert!(r.err_a.is_finite());
    let metrics = fs::read_to_string(eval.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("metric,value\nerr_a,"));
    assert!(eval.join("report.txt").exists());

    let windows: Vec<WindowSpec> = vec!["5:5".parse().unwrap(), "5:5".parse().unwrap()];
    let summary = root.path().join("windows");
    cfg.paths.out = Some(summary.clone());
    cmd_summarize(&cfg, &windows).unwrap();
    let diffs = fs::read_to_string(summary.join("window_differences.csv")).unwrap();
    for line in diffs.lines().skip(1) {
        assert_eq!(line.rsplit(',').next().unwrap(), "0");
    }
    let (_, archived) = read_fit_archive(&fit).unwrap();
    let means = fs::read_to_string(summary.join("window_means.csv")).unwrap();
    let first: f64 = means.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert_eq!(first, archived.posterior_mean_a[5 - 2 - 1].get(0, 0, 0));
}

#[test]
fn replicates_write_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.simulate.n = Some(2);
    cfg.simulate.t = Some(30);
    cfg.simulate.p = Some(1);
    cfg.simulate.h = Some(1);
    cfg.simulate.replicates = 2;
    cfg.model.p = 1;
    cfg.model.h = 2;
    cfg.chain.n_iter = 30;
    cfg.paths.out = Some(dir.path().to_path_buf());
    let reps = replicate_study(&cfg, 1).unwrap();
    assert_eq!(reps.len(), 2);
    let table = fs::read_to_string(dir.path().join("replicates.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(dir.path().join("replicate_002/report.txt").exists());
}

fn tvvar() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tvvar"))
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[model]\nq = 3\n").unwrap();
    let s = tvvar().args(["fit", "--config"]).arg(&bad).output().unwrap().status;
    assert_eq!(s.code(), Some(2));

    let data = dir.path().join("ragged.csv");
    fs::write(&data, "a,b\n1,2\n3\n").unwrap();
    let s = tvvar()
        .args(["fit", "--data"])
        .arg(&data)
        .arg("--out")
        .arg(dir.path().join("fit"))
        .output()
        .unwrap()
        .status;
    assert_eq!(s.code(), Some(3));

    let sim = dir.path().join("sim");
    let s = tvvar().args(["simulate", "--seed", "3", "--out"]).arg(&sim).output().unwrap().status;
    assert_eq!(s.code(), Some(0));
    assert!(sim.join("data.csv").exists());
}
