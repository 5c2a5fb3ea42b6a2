//! Configuration, CSV files and fit archives.
//!
//! A fit archive is a directory holding
//!
//! | file | columns |
//! |------|---------|
//! | `manifest.toml` | format and tool versions, config hash, seed, dimensions, wall clock |
//! | `posterior_mean_a.csv` | `t, lag, row, <series…>`: posterior mean of `A_{lag,t}` row by row |
//! | `gamma_prob.csv` | `t, h1…hH`: activation probabilities |
//! | `component_mean.csv` | `component, lag, row, <series…>`: posterior mean of each base |
//! | `draws_margins.csv` | `draw, chain, component, a1_1…a1_N, a2_1…a2_N, a3_1…a3_P` |
//! | `draws_paths.csv` | `draw, component, t…`: stored activation paths as 0/1 |
//! | `draws_scalars.csv` | `draw, chain, alpha, tau, log_lik, phi_h…, theta_h…, kappa_h…, sigma2_n…` |
//! | `diagnostics.csv` | `component, ising_acceptance` |
//! | `alpha_counts.csv` | `alpha, count` |
//!
//! Times and indices are 1-based. Floats use the shortest representation that
//! parses back to the same bits.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gibbs::{AuxSampler, ChainConfig, Diagnostics, FitResult};
use crate::model::{ActivationPath, CoefMatrixSet, TensorComponent, TimeSeries};
use crate::priors::{even_grid, HyperParams, IsingBox};
use crate::sim::{Matching, SimDesign, Truth};

pub const FORMAT_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

// ---------------------------------------------------------------------------
// Configuration

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub hyper: HyperSection,
    pub chain: ChainSection,
    pub simulate: SimulateSection,
    pub paths: PathsSection,
    pub evaluate: EvaluateSection,
}

/// Fitted order and number of components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub p: usize,
    pub h: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection { p: 4, h: 4 }
    }
}

/// Prior hyperparameters. `b_lambda` defaults to `3^{1/6}`, `b_tau` to `H⁴`
/// and the concentration grid to `alpha_grid_size` even points on
/// `[H⁻³, H^{-0.1}]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperSection {
    pub a_lambda: f64,
    pub b_lambda: Option<f64>,
    pub b_tau: Option<f64>,
    pub alpha_grid: Option<Vec<f64>>,
    pub alpha_grid_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub a_w: f64,
    pub b_w: f64,
    pub w_inf: f64,
    pub a_sigma: f64,
    pub b_sigma: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub kappa_max: f64,
    /// Optional per-component `[theta_min, theta_max, kappa_max]`.
    pub ising_boxes: Option<Vec<[f64; 3]>>,
}

impl Default for HyperSection {
    fn default() -> Self {
        HyperSection {
            a_lambda: 3.0,
            b_lambda: None,
            b_tau: None,
            alpha_grid: None,
            alpha_grid_size: 10,
            beta1: 1.0,
            beta2: 5.0,
            a_w: 2.0,
            b_w: 2.0,
            w_inf: 0.01,
            a_sigma: 1.0,
            b_sigma: 1.0,
            theta_min: -4.0,
            theta_max: 4.0,
            kappa_max: 4.0,
            ising_boxes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSection {
    pub n_iter: usize,
    /// Defaults to a third of `n_iter`.
    pub burn_in: Option<usize>,
    pub thin: usize,
    pub seed: u64,
    pub chains: usize,
    pub threads: Option<usize>,
    pub griddy_inner_draws: usize,
    pub theta_step: f64,
    pub kappa_step: f64,
    /// `"cftp"` or `"transfer"`.
    pub aux_sampler: String,
    pub progress_every: usize,
}

impl Default for ChainSection {
    fn default() -> Self {
        ChainSection {
            n_iter: 5000,
            burn_in: None,
            thin: 3,
            seed: 0,
            chains: 1,
            threads: None,
            griddy_inner_draws: 10,
            theta_step: 0.5,
            kappa_step: 0.5,
            aux_sampler: "cftp".into(),
            progress_every: 0,
        }
    }
}

/// Simulation design; unset fields fall back to the chosen study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub study: u8,
    pub n: Option<usize>,
    pub t: Option<usize>,
    pub p: Option<usize>,
    pub h: Option<usize>,
    pub noise_sd: Option<Vec<f64>>,
    pub inclusion: Option<f64>,
    pub replicates: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection {
            study: 1,
            n: None,
            t: None,
            p: None,
            h: None,
            noise_sd: None,
            inclusion: None,
            replicates: 10,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub data: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub fit: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub empty_threshold: f64,
    pub gamma_threshold: f64,
    /// `"greedy"` or `"optimal"`.
    pub matching: String,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        EvaluateSection {
            empty_threshold: 0.01,
            gamma_threshold: 0.5,
            matching: "greedy".into(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(d) => Error::Config(format!("{}: {d}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }

    /// The settings that influence results: file locations, thread count
    /// and progress reporting are cleared.
    pub fn canonical(&self) -> Self {
        let mut c = self.clone();
        c.paths = PathsSection::default();
        c.chain.threads = None;
        c.chain.progress_every = 0;
        c
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().to_toml().as_bytes()))
    }

    pub fn hyper_params(&self, n: usize) -> Result<HyperParams> {
        let (p, h) = (self.model.p, self.model.h);
        if p == 0 || h == 0 {
            return Err(Error::Config("model.p and model.h must be positive".into()));
        }
        let hs = &self.hyper;
        let mut hp = HyperParams::defaults(n, p, h);
        hp.a_lambda = hs.a_lambda;
        if let Some(b) = hs.b_lambda {
            hp.b_lambda = b;
        }
        if let Some(b) = hs.b_tau {
            hp.b_tau = b;
        }
        hp.alpha_grid = match &hs.alpha_grid {
            Some(g) => g.clone(),
            None => {
                let hf = h as f64;
                even_grid(hf.powf(-3.0), hf.powf(-0.1), hs.alpha_grid_size)
            }
        };
        hp.beta1 = hs.beta1;
        hp.beta2 = hs.beta2;
        hp.a_w = hs.a_w;
        hp.b_w = hs.b_w;
        hp.w_inf = hs.w_inf;
        hp.a_sigma = hs.a_sigma;
        hp.b_sigma = hs.b_sigma;
        hp.ising_boxes = match &hs.ising_boxes {
            Some(b) => b
                .iter()
                .map(|&[theta_min, theta_max, kappa_max]| IsingBox {
                    theta_min,
                    theta_max,
                    kappa_max,
                })
                .collect(),
            None => vec![
                IsingBox {
                    theta_min: hs.theta_min,
                    theta_max: hs.theta_max,
                    kappa_max: hs.kappa_max,
                };
                h
            ],
        };
        hp.validate()?;
        Ok(hp)
    }

    pub fn chain_config(&self) -> Result<ChainConfig> {
        let c = &self.chain;
        let aux = match c.aux_sampler.as_str() {
            "cftp" => AuxSampler::Cftp,
            "transfer" => AuxSampler::TransferMatrix,
            other => {
                return Err(Error::Config(format!(
                    "chain.aux_sampler must be \"cftp\" or \"transfer\", got {other:?}"
                )))
            }
        };
        let cfg = ChainConfig {
            n_iter: c.n_iter,
            burn_in: c.burn_in.unwrap_or(c.n_iter / 3),
            thin: c.thin,
            seed: c.seed,
            n_chains: c.chains,
            griddy_inner_draws: c.griddy_inner_draws,
            theta_step: c.theta_step,
            kappa_step: c.kappa_step,
            aux_sampler: aux,
            progress_every: c.progress_every,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn sim_design(&self) -> Result<SimDesign> {
        let s = &self.simulate;
        let mut d = match s.study {
            1 => SimDesign::study1(),
            2 => SimDesign::study2(),
            other => return Err(Error::Config(format!("simulate.study must be 1 or 2, got {other}"))),
        };
        if let Some(n) = s.n {
            d.n = n;
            if s.noise_sd.is_none() {
                d.noise_sd = (1..=n).map(|i| i as f64 / 5.0).collect();
            }
        }
        if let Some(t) = s.t {
            d.t_len = t;
        }
        if let Some(p) = s.p {
            d.p = p;
        }
        if let Some(h) = s.h {
            d.h = h;
        }
        if let Some(sd) = &s.noise_sd {
            d.noise_sd = sd.clone();
        }
        if let Some(q) = s.inclusion {
            d.inclusion = q;
        }
        d.validate()?;
        Ok(d)
    }

    pub fn matching(&self) -> Result<Matching> {
        match self.evaluate.matching.as_str() {
            "greedy" => Ok(Matching::Greedy),
            "optimal" => Ok(Matching::Optimal),
            other => Err(Error::Config(format!(
                "evaluate.matching must be \"greedy\" or \"optimal\", got {other:?}"
            ))),
        }
    }
}

// ---------------------------------------------------------------------------
// CSV helpers

fn fmt(x: f64) -> String {
    format!("{x}")
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_err(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => Error::Parse {
            path: path.display().to_string(),
            line,
            detail: format!("ragged row: expected {expected_len} fields, found {len}"),
        },
        other => Error::Parse {
            path: path.display().to_string(),
            line,
            detail: format!("{other:?}"),
        },
    }
}

fn write_row<I, S>(w: &mut csv::Writer<fs::File>, path: &Path, row: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(row).map_err(|e| csv_err(path, e))
}

fn flush(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a header row and numeric records. Returns `(header, rows, lines)`.
fn read_numeric(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let mut records = r.records();
    let header: Vec<String> = match records.next() {
        None => {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: 1,
                detail: "file is empty".into(),
            })
        }
        Some(rec) => rec.map_err(|e| csv_err(path, e))?.iter().map(|s| s.trim().to_string()).collect(),
    };
    if header.iter().all(|h| h.parse::<f64>().is_ok()) {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 1,
            detail: "expected a header row of column names".into(),
        });
    }
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let row = rec
            .iter()
            .enumerate()
            .map(|(i, cell)| {
                cell.trim().parse::<f64>().map_err(|_| Error::Parse {
                    path: path.display().to_string(),
                    line,
                    detail: format!("column {} is not a number: {cell:?}", i + 1),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Loads a `T × N` series: one header row of names, one row per time point.
pub fn load_timeseries_csv(path: &Path) -> Result<TimeSeries> {
    let (header, rows) = read_numeric(path)?;
    if rows.is_empty() {
        return Err(Error::Data(format!("{}: no observations", path.display())));
    }
    let n = header.len();
    let mut values = Vec::with_capacity(rows.len() * n);
    for (i, row) in rows.iter().enumerate() {
        if row.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: i + 2,
                detail: "non-finite value".into(),
            });
        }
        values.extend_from_slice(row);
    }
    TimeSeries::from_rows(n, values)?.with_names(header)
}

pub fn save_timeseries_csv(path: &Path, y: &TimeSeries) -> Result<()> {
    let mut w = writer(path)?;
    write_row(&mut w, path, y.names())?;
    for t in 0..y.len() {
        write_row(&mut w, path, y.row(t).iter().map(|x| fmt(*x)))?;
    }
    flush(w, path)
}

fn default_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("y{i}")).collect()
}

// ---------------------------------------------------------------------------
// Truth files

/// Writes `truth_components.csv` (`component, margin, index, value`),
/// `truth_paths.csv` (`t, h1…hH`) and `truth_noise.csv` (`series, sd`).
pub fn write_truth(dir: &Path, truth: &Truth) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("truth_components.csv");
    let mut w = writer(&path)?;
    write_row(&mut w, &path, ["component", "margin", "index", "value"])?;
    for (h, c) in truth.components.iter().enumerate() {
        for (m, v) in [&c.alpha1, &c.alpha2, &c.alpha3].iter().enumerate() {
            for (i, x) in v.iter().enumerate() {
                write_row(
                    &mut w,
                    &path,
                    [(h + 1).to_string(), (m + 1).to_string(), (i + 1).to_string(), fmt(*x)],
                )?;
            }
        }
    }
    flush(w, &path)?;

    let path = dir.join("truth_paths.csv");
    let p = truth.p();
    let mut w = writer(&path)?;
    let mut head = vec!["t".to_string()];
    head.extend((1..=truth.paths.len()).map(|h| format!("h{h}")));
    write_row(&mut w, &path, &head)?;
    for l in 0..truth.paths[0].len() {
        let mut row = vec![(l + p + 1).to_string()];
        row.extend(truth.paths.iter().map(|g| (g.gamma[l] as u8).to_string()));
        write_row(&mut w, &path, &row)?;
    }
    flush(w, &path)?;

    let path = dir.join("truth_noise.csv");
    let mut w = writer(&path)?;
    write_row(&mut w, &path, ["series", "sd"])?;
    for (i, s) in truth.noise_sd.iter().enumerate() {
        write_row(&mut w, &path, [(i + 1).to_string(), fmt(*s)])?;
    }
    flush(w, &path)
}

fn index(path: &Path, line: usize, x: f64, what: &str) -> Result<usize> {
    if x >= 1.0 && x.fract() == 0.0 {
        Ok(x as usize - 1)
    } else {
        Err(Error::Parse {
            path: path.display().to_string(),
            line,
            detail: format!("{what} must be a positive integer, got {x}"),
        })
    }
}

pub fn read_truth(dir: &Path) -> Result<Truth> {
    let path = dir.join("truth_components.csv");
    let (_, rows) = read_numeric(&path)?;
    let mut margins: Vec<[Vec<(usize, f64)>; 3]> = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let line = i + 2;
        if r.len() != 4 {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line,
                detail: "expected 4 columns".into(),
            });
        }
        let h = index(&path, line, r[0], "component")?;
        let m = index(&path, line, r[1], "margin")?;
        let k = index(&path, line, r[2], "index")?;
        if m > 2 {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line,
                detail: "margin must be 1, 2 or 3".into(),
            });
        }
        while margins.len() <= h {
            margins.push(Default::default());
        }
        margins[h][m].push((k, r[3]));
    }
    let dense = |v: &[(usize, f64)]| -> Result<Vec<f64>> {
        let mut out = vec![f64::NAN; v.len()];
        for &(k, x) in v {
            if k >= out.len() {
                return Err(Error::Data(format!("{}: margin index {} out of range", path.display(), k + 1)));
            }
            out[k] = x;
        }
        Ok(out)
    };
    let components = margins
        .iter()
        .map(|m| TensorComponent::new(dense(&m[0])?, dense(&m[1])?, dense(&m[2])?))
        .collect::<Result<Vec<_>>>()?;
    if components.is_empty() {
        return Err(Error::Data(format!("{}: no components", path.display())));
    }

    let path = dir.join("truth_paths.csv");
    let (header, rows) = read_numeric(&path)?;
    let h = header.len() - 1;
    if h != components.len() {
        return Err(Error::Data(format!(
            "{} has {h} paths for {} components",
            path.display(),
            components.len()
        )));
    }
    let paths = (0..h)
        .map(|k| ActivationPath::new(rows.iter().map(|r| r[k + 1] != 0.0).collect()))
        .collect();

    let path = dir.join("truth_noise.csv");
    let (_, rows) = read_numeric(&path)?;
    let noise_sd = rows.iter().map(|r| r[1]).collect();
    Ok(Truth {
        components,
        paths,
        noise_sd,
    })
}

// ---------------------------------------------------------------------------
// Fit archives

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub tool_version: String,
    pub kind: String,
    pub config_hash: String,
    pub seed: u64,
    pub n: usize,
    pub p: usize,
    pub h: usize,
    pub t_len: usize,
    pub chains: usize,
    pub draws: usize,
    pub series: Vec<String>,
    pub wall_clock_seconds: f64,
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("manifest.toml");
        let text = toml::to_string(self).expect("manifest always serializes");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.toml");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: Manifest =
            toml::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        if m.format_version != FORMAT_VERSION {
            return Err(Error::Data(format!(
                "{}: unsupported archive format {}",
                path.display(),
                m.format_version
            )));
        }
        Ok(m)
    }
}

fn write_matrix_rows(
    w: &mut csv::Writer<fs::File>,
    path: &Path,
    key: usize,
    a: &CoefMatrixSet,
) -> Result<()> {
    let n = a.n();
    for j in 0..a.p() {
        let m = a.matrix_slice(j);
        for i in 0..n {
            let mut row = vec![key.to_string(), (j + 1).to_string(), (i + 1).to_string()];
            row.extend(m[i * n..(i + 1) * n].iter().map(|x| fmt(*x)));
            write_row(w, path, &row)?;
        }
    }
    Ok(())
}

fn write_matrix_file(path: &Path, key: &str, names: &[String], sets: &[CoefMatrixSet], first_key: usize) -> Result<()> {
    let mut w = writer(path)?;
    let mut head = vec![key.to_string(), "lag".into(), "row".into()];
    head.extend(names.iter().cloned());
    write_row(&mut w, path, &head)?;
    for (k, a) in sets.iter().enumerate() {
        write_matrix_rows(&mut w, path, k + first_key, a)?;
    }
    flush(w, path)
}

fn read_matrix_file(path: &Path, n: usize, p: usize, count: usize) -> Result<Vec<CoefMatrixSet>> {
    let (_, rows) = read_numeric(path)?;
    if rows.len() != count * p * n {
        return Err(Error::Data(format!(
            "{}: expected {} rows, found {}",
            path.display(),
            count * p * n,
            rows.len()
        )));
    }
    let mut out = vec![CoefMatrixSet::zeros(n, p); count];
    for (r, row) in rows.iter().enumerate() {
        if row.len() != n + 3 {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: r + 2,
                detail: format!("expected {} columns", n + 3),
            });
        }
        let (k, j, i) = (r / (p * n), (r / n) % p, r % n);
        out[k].matrix_slice_mut(j)[i * n..(i + 1) * n].copy_from_slice(&row[3..]);
    }
    Ok(out)
}

/// Writes a fit archive into `dir` (created if needed).
pub fn write_fit_archive(dir: &Path, fit: &FitResult, manifest: &Manifest) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    manifest.write(dir)?;
    let names = if manifest.series.len() == fit.n {
        manifest.series.clone()
    } else {
        default_names(fit.n)
    };
    let p = fit.p;
    write_matrix_file(&dir.join("posterior_mean_a.csv"), "t", &names, &fit.posterior_mean_a, p + 1)?;
    write_matrix_file(&dir.join("component_mean.csv"), "component", &names, &fit.component_mean, 1)?;

    let path = dir.join("gamma_prob.csv");
    let mut w = writer(&path)?;
    let mut head = vec!["t".to_string()];
    head.extend((1..=fit.h).map(|h| format!("h{h}")));
    write_row(&mut w, &path, &head)?;
    for l in 0..fit.path_len() {
        let mut row = vec![(l + p + 1).to_string()];
        row.extend(fit.gamma_prob.iter().map(|g| fmt(g[l])));
        write_row(&mut w, &path, &row)?;
    }
    flush(w, &path)?;

    let chain_of = |d: usize| fit.diagnostics.draw_chain.get(d).copied().unwrap_or(0);

    let path = dir.join("draws_margins.csv");
    let mut w = writer(&path)?;
    let mut head: Vec<String> = ["draw", "chain", "component"].iter().map(|s| s.to_string()).collect();
    head.extend((1..=fit.n).map(|i| format!("a1_{i}")));
    head.extend((1..=fit.n).map(|i| format!("a2_{i}")));
    head.extend((1..=p).map(|i| format!("a3_{i}")));
    write_row(&mut w, &path, &head)?;
    for (d, st) in fit.draws.iter().enumerate() {
        for (h, c) in st.components.iter().enumerate() {
            let mut row = vec![(d + 1).to_string(), (chain_of(d) + 1).to_string(), (h + 1).to_string()];
            row.extend(c.alpha1.iter().chain(&c.alpha2).chain(&c.alpha3).map(|x| fmt(*x)));
            write_row(&mut w, &path, &row)?;
        }
    }
    flush(w, &path)?;

    let path = dir.join("draws_paths.csv");
    let mut w = writer(&path)?;
    let mut head = vec!["draw".to_string(), "component".to_string()];
    head.extend((p + 1..=fit.t_len).map(|t| format!("t{t}")));
    write_row(&mut w, &path, &head)?;
    for (d, st) in fit.draws.iter().enumerate() {
        for (h, g) in st.paths.iter().enumerate() {
            let mut row = vec![(d + 1).to_string(), (h + 1).to_string()];
            row.extend(g.gamma.iter().map(|b| if *b { "1" } else { "0" }.to_string()));
            write_row(&mut w, &path, &row)?;
        }
    }
    flush(w, &path)?;

    let path = dir.join("draws_scalars.csv");
    let mut w = writer(&path)?;
    let mut head: Vec<String> = ["draw", "chain", "alpha", "tau", "log_lik"].iter().map(|s| s.to_string()).collect();
    head.extend((1..=fit.h).map(|h| format!("phi_{h}")));
    head.extend((1..=fit.h).map(|h| format!("theta_{h}")));
    head.extend((1..=fit.h).map(|h| format!("kappa_{h}")));
    head.extend((1..=fit.n).map(|i| format!("sigma2_{i}")));
    write_row(&mut w, &path, &head)?;
    for (d, st) in fit.draws.iter().enumerate() {
        let mut row = vec![
            (d + 1).to_string(),
            (chain_of(d) + 1).to_string(),
            fmt(st.alpha_conc),
            fmt(st.shrink.tau),
            fmt(fit.diagnostics.log_lik.get(d).copied().unwrap_or(f64::NAN)),
        ];
        row.extend(st.shrink.phi.iter().map(|x| fmt(*x)));
        row.extend(st.ising.iter().map(|x| fmt(x.theta())));
        row.extend(st.ising.iter().map(|x| fmt(x.kappa())));
        row.extend(st.sigma2.iter().map(|x| fmt(*x)));
        write_row(&mut w, &path, &row)?;
    }
    flush(w, &path)?;

    let path = dir.join("diagnostics.csv");
    let mut w = writer(&path)?;
    write_row(&mut w, &path, ["component", "ising_acceptance"])?;
    for (h, a) in fit.diagnostics.ising_acceptance.iter().enumerate() {
        write_row(&mut w, &path, [(h + 1).to_string(), fmt(*a)])?;
    }
    flush(w, &path)?;

    let path = dir.join("alpha_counts.csv");
    let mut w = writer(&path)?;
    write_row(&mut w, &path, ["index", "count"])?;
    for (i, c) in fit.diagnostics.alpha_counts.iter().enumerate() {
        write_row(&mut w, &path, [(i + 1).to_string(), c.to_string()])?;
    }
    flush(w, &path)
}

/// Reloads the posterior summaries of an archive. Stored draws are not
/// reconstructed (`draws` is empty); they stay available as CSV.
pub fn read_fit_archive(dir: &Path) -> Result<(Manifest, FitResult)> {
    let m = Manifest::read(dir)?;
    let l_len = m.t_len - m.p;
    let posterior_mean_a = read_matrix_file(&dir.join("posterior_mean_a.csv"), m.n, m.p, l_len)?;
    let component_mean = read_matrix_file(&dir.join("component_mean.csv"), m.n, m.p, m.h)?;
    let path = dir.join("gamma_prob.csv");
    let (_, rows) = read_numeric(&path)?;
    if rows.len() != l_len || rows.iter().any(|r| r.len() != m.h + 1) {
        return Err(Error::Data(format!("{}: expected {l_len} rows of {} columns", path.display(), m.h + 1)));
    }
    let gamma_prob = (0..m.h).map(|h| rows.iter().map(|r| r[h + 1]).collect()).collect();
    let path = dir.join("diagnostics.csv");
    let (_, rows) = read_numeric(&path)?;
    let diagnostics = Diagnostics {
        ising_acceptance: rows.iter().map(|r| r[1]).collect(),
        ..Default::default()
    };
    let fit = FitResult {
        n: m.n,
        p: m.p,
        h: m.h,
        t_len: m.t_len,
        draws: Vec::new(),
        posterior_mean_a,
        gamma_prob,
        component_mean,
        diagnostics,
    };
    Ok((m, fit))
}

// ---------------------------------------------------------------------------
// Window summaries

/// Inclusive 1-based time window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    pub start: usize,
    pub end: usize,
}

impl std::str::FromStr for WindowSpec {
    type Err = Error;

    /// Parses `start:end`.
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("window {s:?} must look like start:end")))?;
        let parse = |x: &str| {
            x.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("window bound {x:?} is not an integer")))
        };
        Ok(WindowSpec {
            start: parse(a)?,
            end: parse(b)?,
        })
    }
}

/// `Â_j(W) = Σ_{t∈W} Â_{j,t} / |W|` for each window.
pub fn window_means(fit: &FitResult, windows: &[WindowSpec]) -> Result<Vec<CoefMatrixSet>> {
    windows
        .iter()
        .map(|w| {
            if w.end < w.start {
                return Err(Error::Domain(format!("window {}:{} is empty", w.start, w.end)));
            }
            if w.start < fit.p + 1 || w.end > fit.t_len {
                return Err(Error::Range(format!(
                    "window {}:{} outside {}..={}",
                    w.start,
                    w.end,
                    fit.p + 1,
                    fit.t_len
                )));
            }
            let mut acc = CoefMatrixSet::zeros(fit.n, fit.p);
            for t in w.start..=w.end {
                acc.add_assign(&fit.posterior_mean_a[t - fit.p - 1]);
            }
            acc.scale(1.0 / (w.end - w.start + 1) as f64);
            Ok(acc)
        })
        .collect()
}

/// Writes `window_means.csv` (`window, start, end, lag, row, col, value`) and
/// `window_differences.csv` (`from, to, lag, row, col, value`, later minus
/// earlier) for every ordered pair of windows.
pub fn write_window_summary(
    dir: &Path,
    names: &[String],
    windows: &[WindowSpec],
    means: &[CoefMatrixSet],
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("window_means.csv");
    let mut w = writer(&path)?;
    write_row(&mut w, &path, ["window", "start", "end", "lag", "row", "col", "value"])?;
    for (k, (win, a)) in windows.iter().zip(means).enumerate() {
        let n = a.n();
        for j in 0..a.p() {
            for i in 0..n {
                for c in 0..n {
                    write_row(
                        &mut w,
                        &path,
                        [
                            (k + 1).to_string(),
                            win.start.to_string(),
                            win.end.to_string(),
                            (j + 1).to_string(),
                            names[i].clone(),
                            names[c].clone(),
                            fmt(a.get(j, i, c)),
                        ],
                    )?;
                }
            }
        }
    }
    flush(w, &path)?;

    let path = dir.join("window_differences.csv");
    let mut w = writer(&path)?;
    write_row(&mut w, &path, ["from", "to", "lag", "row", "col", "value"])?;
    for a in 0..means.len() {
        for b in a + 1..means.len() {
            let (x, y) = (&means[a], &means[b]);
            let n = x.n();
            for j in 0..x.p() {
                for i in 0..n {
                    for c in 0..n {
                        write_row(
                            &mut w,
                            &path,
                            [
                                (a + 1).to_string(),
                                (b + 1).to_string(),
                                (j + 1).to_string(),
                                names[i].clone(),
                                names[c].clone(),
                                fmt(y.get(j, i, c) - x.get(j, i, c)),
                            ],
                        )?;
                    }
                }
            }
        }
    }
    flush(w, &path)
}

pub fn series_names(manifest: &Manifest) -> Vec<String> {
    if manifest.series.len() == manifest.n {
        manifest.series.clone()
    } else {
        default_names(manifest.n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_reproduce_study_settings() {
        let c = RunConfig::default();
        let hp = c.hyper_params(10).unwrap();
        assert_eq!(hp, HyperParams::defaults(10, 4, 4));
        let cfg = c.chain_config().unwrap();
        assert_eq!((cfg.n_iter, cfg.burn_in, cfg.thin), (5000, 1666, 3));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            RunConfig::from_toml_str("[chain]\nn_iters = 5\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            RunConfig::from_toml_str("[bogus]\n"),
            Err(Error::Config(_))
        ));
        let c = RunConfig::from_toml_str("[chain]\nn_iter = 50\nseed = 7\n[model]\np = 1\nh = 1\n").unwrap();
        assert_eq!(c.chain.n_iter, 50);
        assert_eq!(c.chain_config().unwrap().burn_in, 16);
    }

    #[test]
    fn hash_ignores_locations_and_threads() {
        let mut a = RunConfig::default();
        let mut b = RunConfig::default();
        a.paths.out = Some("x".into());
        b.chain.threads = Some(8);
        assert_eq!(a.hash(), b.hash());
        b.chain.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn window_parsing() {
        let w: WindowSpec = "10:19".parse().unwrap();
        assert_eq!(w, WindowSpec { start: 10, end: 19 });
        assert!("10-19".parse::<WindowSpec>().is_err());
    }
}
