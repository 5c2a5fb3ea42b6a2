//! Command implementations behind the `tvvar` binary.
//!
//! Every command takes a fully resolved [`RunConfig`]; command-line flags are
//! folded in beforehand by [`Overrides::apply`].

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use tvvar::io::{
    load_timeseries_csv, read_fit_archive, read_truth, save_timeseries_csv, series_names,
    window_means, write_fit_archive, write_truth, write_window_summary, Manifest, RunConfig,
    WindowSpec, FORMAT_VERSION, TOOL_VERSION,
};
use tvvar::sim::{evaluate, generate_study1_dataset, generate_study2_dataset, EvalReport, Truth};
use tvvar::{run_chain, Error, FitResult, Result, TimeSeries};

/// Values given on the command line; each one replaces the config entry.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub chains: Option<usize>,
    pub threads: Option<usize>,
    pub data: Option<PathBuf>,
    pub fit: Option<PathBuf>,
    pub truth: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(s) = self.seed {
            cfg.chain.seed = s;
        }
        if let Some(c) = self.chains {
            cfg.chain.chains = c;
        }
        if let Some(t) = self.threads {
            cfg.chain.threads = Some(t);
        }
        let paths = &mut cfg.paths;
        for (slot, val) in [
            (&mut paths.out, &self.out),
            (&mut paths.data, &self.data),
            (&mut paths.fit, &self.fit),
            (&mut paths.truth, &self.truth),
        ] {
            if val.is_some() {
                *slot = val.clone();
            }
        }
    }
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Config(format!("no {what} path given (flag or [paths] entry)")))
}

/// Runs `f` on a pool of `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::Config("threads must be at least 1".into())),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| Error::Config(format!("cannot start {k} threads: {e}"))),
    }
}

fn mkdir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn manifest(cfg: &RunConfig, kind: &str, y: &TimeSeries, h: usize, p: usize) -> Manifest {
    Manifest {
        format_version: FORMAT_VERSION,
        tool_version: TOOL_VERSION.into(),
        kind: kind.into(),
        config_hash: cfg.hash(),
        seed: cfg.chain.seed,
        n: y.n(),
        p,
        h,
        t_len: y.len(),
        chains: cfg.chain.chains,
        draws: 0,
        series: y.names().to_vec(),
        wall_clock_seconds: 0.0,
    }
}

fn simulate_dataset(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<(TimeSeries, Truth)> {
    let design = cfg.sim_design()?;
    if cfg.simulate.study == 2 && design == tvvar::sim::SimDesign::study2() {
        generate_study2_dataset(rng)
    } else {
        generate_study1_dataset(&design, rng)
    }
}

/// Draws one simulated dataset and writes `data.csv`, the truth files and a
/// manifest into the output directory.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<PathBuf> {
    let out = required(&cfg.paths.out, "output")?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.chain.seed);
    let (y, truth) = simulate_dataset(cfg, &mut rng)?;
    mkdir(out)?;
    save_timeseries_csv(&out.join("data.csv"), &y)?;
    write_truth(out, &truth)?;
    let m = manifest(cfg, "simulation", &y, truth.paths.len(), truth.p());
    m.write(out)?;
    write_text(&out.join("config.toml"), &cfg.to_toml())?;
    Ok(out.to_path_buf())
}

/// Fits the model to `y` and writes the archive into `out`.
pub fn fit_to_archive(cfg: &RunConfig, y: &TimeSeries, out: &Path) -> Result<FitResult> {
    let hp = cfg.hyper_params(y.n())?;
    let chain = cfg.chain_config()?;
    let start = Instant::now();
    let fit = with_threads(cfg.chain.threads, || run_chain(y, &hp, &chain))??;
    let mut m = manifest(cfg, "fit", y, hp.h, hp.p);
    m.draws = fit.draws.len();
    m.wall_clock_seconds = start.elapsed().as_secs_f64();
    write_fit_archive(out, &fit, &m)?;
    write_text(&out.join("config.toml"), &cfg.canonical().to_toml())?;
    Ok(fit)
}

/// Loads the data file, runs the sampler and writes a fit archive.
pub fn cmd_fit(cfg: &RunConfig) -> Result<FitResult> {
    let data = required(&cfg.paths.data, "data")?;
    let out = required(&cfg.paths.out, "output")?;
    let y = load_timeseries_csv(data)?;
    fit_to_archive(cfg, &y, out)
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| format!("{v}"))
}

/// `metric, value` rows of a report.
pub fn report_rows(r: &EvalReport, h: usize) -> Vec<(&'static str, String)> {
    let g = &r.gamma;
    vec![
        ("err_a", format!("{}", r.err_a)),
        ("err_a_squared", format!("{}", r.err_a_squared)),
        ("err_components", format!("{}", r.err_components.all)),
        ("last_lag_frobenius", format!("{}", r.last_lag_frobenius)),
        ("non_empty_components", (h - r.empty_components.len()).to_string()),
        ("gamma_accuracy", opt(g.accuracy)),
        ("gamma_sensitivity", opt(g.sensitivity)),
        ("gamma_specificity", opt(g.specificity)),
        ("gamma_precision", opt(g.precision)),
        ("tp", g.tp.to_string()),
        ("tn", g.tn.to_string()),
        ("fp", g.fp.to_string()),
        ("fn", g.fn_.to_string()),
    ]
}

fn write_report(dir: &Path, r: &EvalReport, h: usize) -> Result<()> {
    mkdir(dir)?;
    let mut csv = String::from("metric,value\n");
    for (k, v) in report_rows(r, h) {
        csv.push_str(&format!("{k},{v}\n"));
    }
    write_text(&dir.join("metrics.csv"), &csv)?;

    let mut txt = String::new();
    txt.push_str(&format!("coefficient error        {:.6}\n", r.err_a));
    txt.push_str(&format!("component error          {:.6}\n", r.err_components.all));
    txt.push_str(&format!("mean last-lag Frobenius  {:.6}\n", r.last_lag_frobenius));
    txt.push_str(&format!(
        "non-empty components     {} of {h} (empty: {:?})\n",
        h - r.empty_components.len(),
        r.empty_components.iter().map(|e| e + 1).collect::<Vec<_>>()
    ));
    let pairs: Vec<String> = r.matching.iter().map(|(e, t)| format!("{}->{}", e + 1, t + 1)).collect();
    txt.push_str(&format!("matching (fit->truth)    {}\n", pairs.join(" ")));
    let g = &r.gamma;
    txt.push_str(&format!(
        "gamma accuracy {} sensitivity {} specificity {} precision {}\n",
        opt(g.accuracy),
        opt(g.sensitivity),
        opt(g.specificity),
        opt(g.precision)
    ));
    write_text(&dir.join("report.txt"), &txt)
}

/// Scores an archive against truth files and writes `metrics.csv` and
/// `report.txt`.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<EvalReport> {
    let fit_dir = required(&cfg.paths.fit, "fit archive")?;
    let truth_dir = required(&cfg.paths.truth, "truth")?;
    let out = cfg.paths.out.as_deref().unwrap_or(fit_dir);
    let (_, fit) = read_fit_archive(fit_dir)?;
    let truth = read_truth(truth_dir)?;
    let e = &cfg.evaluate;
    let r = evaluate(&fit, &truth, e.empty_threshold, e.gamma_threshold, cfg.matching()?)?;
    write_report(out, &r, fit.h)?;
    Ok(r)
}

/// Per-window mean coefficient matrices and their pairwise differences.
pub fn cmd_summarize(cfg: &RunConfig, windows: &[WindowSpec]) -> Result<()> {
    if windows.is_empty() {
        return Err(Error::Config("at least one --window start:end is needed".into()));
    }
    let fit_dir = required(&cfg.paths.fit, "fit archive")?;
    let out = cfg.paths.out.as_deref().unwrap_or(fit_dir);
    let (m, fit) = read_fit_archive(fit_dir)?;
    let means = window_means(&fit, windows)?;
    write_window_summary(out, &series_names(&m), windows, &means)
}

/// Outcome of one simulation replicate.
#[derive(Debug, Clone)]
pub struct Replicate {
    pub index: usize,
    pub report: EvalReport,
    pub seconds: f64,
}

/// Seeds of replicate `r`: one for the dataset, one for the chains.
pub fn replicate_seeds(seed: u64, r: usize) -> (u64, u64) {
    let base = seed.wrapping_mul(1_000_003).wrapping_add(r as u64);
    (base.wrapping_add(0x5eed_da7a), base)
}

fn run_replicate(cfg: &RunConfig, r: usize, out: Option<&Path>) -> Result<Replicate> {
    let (data_seed, chain_seed) = replicate_seeds(cfg.chain.seed, r);
    let mut rng = ChaCha8Rng::seed_from_u64(data_seed);
    let (y, truth) = simulate_dataset(cfg, &mut rng)?;
    let hp = cfg.hyper_params(y.n())?;
    let mut chain = cfg.chain_config()?;
    chain.seed = chain_seed;
    let start = Instant::now();
    let fit = run_chain(&y, &hp, &chain)?;
    let seconds = start.elapsed().as_secs_f64();
    let e = &cfg.evaluate;
    let report = evaluate(&fit, &truth, e.empty_threshold, e.gamma_threshold, cfg.matching()?)?;
    if let Some(dir) = out {
        let dir = dir.join(format!("replicate_{:03}", r + 1));
        mkdir(&dir)?;
        save_timeseries_csv(&dir.join("data.csv"), &y)?;
        write_truth(&dir, &truth)?;
        write_report(&dir, &report, fit.h)?;
    }
    Ok(Replicate {
        index: r,
        report,
        seconds,
    })
}

/// Mean of the defined values and how many there were.
pub fn mean_defined(xs: impl Iterator<Item = Option<f64>>) -> (Option<f64>, usize) {
    let v: Vec<f64> = xs.flatten().collect();
    if v.is_empty() {
        (None, 0)
    } else {
        (Some(v.iter().sum::<f64>() / v.len() as f64), v.len())
    }
}

fn write_replicate_table(out: &Path, reps: &[Replicate]) -> Result<()> {
    let mut csv = String::from(
        "replicate,seconds,err_a,err_a_squared,err_components,last_lag_frobenius,empty_components,accuracy,sensitivity,specificity,precision\n",
    );
    for r in reps {
        let x = &r.report;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.index + 1,
            r.seconds,
            x.err_a,
            x.err_a_squared,
            x.err_components.all,
            x.last_lag_frobenius,
            x.empty_components.len(),
            opt(x.gamma.accuracy),
            opt(x.gamma.sensitivity),
            opt(x.gamma.specificity),
            opt(x.gamma.precision)
        ));
    }
    write_text(&out.join("replicates.csv"), &csv)?;

    let n = reps.len() as f64;
    let mean = |f: &dyn Fn(&EvalReport) -> f64| reps.iter().map(|r| f(&r.report)).sum::<f64>() / n;
    let (acc, na) = mean_defined(reps.iter().map(|r| r.report.gamma.accuracy));
    let (sens, ns) = mean_defined(reps.iter().map(|r| r.report.gamma.sensitivity));
    let txt = format!(
        "replicates               {}\nmean coefficient error   {:.6}\nmean last-lag Frobenius  {:.6}\nmean gamma accuracy      {} ({na} defined)\nmean gamma sensitivity   {} ({ns} defined)\n",
        reps.len(),
        mean(&|r| r.err_a),
        mean(&|r| r.last_lag_frobenius),
        opt(acc),
        opt(sens),
    );
    write_text(&out.join("summary.txt"), &txt)
}

/// Runs `simulate.replicates` independent simulate-fit-evaluate rounds of
/// the given study in parallel; chains inside a replicate run serially.
pub fn replicate_study(cfg: &RunConfig, study: u8) -> Result<Vec<Replicate>> {
    let mut cfg = cfg.clone();
    cfg.simulate.study = study;
    let out = cfg.paths.out.clone();
    if let Some(dir) = &out {
        mkdir(dir)?;
        write_text(&dir.join("config.toml"), &cfg.to_toml())?;
    }
    let reps = with_threads(cfg.chain.threads, || {
        (0..cfg.simulate.replicates)
            .into_par_iter()
            .map(|r| run_replicate(&cfg, r, out.as_deref()))
            .collect::<Result<Vec<_>>>()
    })??;
    if let Some(dir) = &out {
        write_replicate_table(dir, &reps)?;
    }
    Ok(reps)
}
