//! Blocked Gibbs sampler.
//!
//! One sweep visits, in order:
//!
//! 1. the Dirichlet concentration (griddy Gibbs), then `(φ, τ)`;
//! 2. `(λ, W1, W2)`, then `v`, then `(z, W3)`;
//! 3. the three margins of every component;
//! 4. every activation path, then every `(θ, κ)` by the exchange algorithm;
//! 5. the noise variances.

pub mod blocks;
pub mod check;
pub mod data;
pub mod init;
pub mod joint;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use data::Design;
pub use joint::{log_joint, log_likelihood, sample_prior_state};

use crate::error::{Error, Result};
use crate::ising::IsingParams;
use crate::model::{ActivationPath, CoefMatrixSet, TensorComponent, TimeSeries};
use crate::priors::{HyperParams, ShrinkageState};

#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub components: Vec<TensorComponent>,
    pub paths: Vec<ActivationPath>,
    pub shrink: ShrinkageState,
    pub ising: Vec<IsingParams>,
    pub sigma2: Vec<f64>,
    pub alpha_conc: f64,
}

impl ModelState {
    pub fn validate(&self, hp: &HyperParams, path_len: usize) -> Result<()> {
        if self.components.len() != hp.h || self.paths.len() != hp.h || self.ising.len() != hp.h {
            return Err(Error::Shape(format!("state does not hold H={} components", hp.h)));
        }
        for c in &self.components {
            c.validate(hp.n, hp.p)?;
        }
        if self.paths.iter().any(|p| p.len() != path_len) {
            return Err(Error::Shape(format!("paths must have length {path_len}")));
        }
        self.shrink.validate(hp)?;
        for (p, b) in self.ising.iter().zip(&hp.ising_boxes) {
            if !b.contains(p.theta(), p.kappa()) {
                return Err(Error::Domain(format!(
                    "(θ, κ) = ({}, {}) outside its box",
                    p.theta(),
                    p.kappa()
                )));
            }
        }
        if self.sigma2.len() != hp.n || self.sigma2.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::Domain("noise variances must be positive".into()));
        }
        if !hp.alpha_grid.contains(&self.alpha_conc) {
            return Err(Error::Domain("concentration is not a grid point".into()));
        }
        Ok(())
    }

    /// Name of the first non-finite group of variables, if any.
    fn non_finite(&self) -> Option<&'static str> {
        let fin = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        if !self
            .components
            .iter()
            .all(|c| fin(&c.alpha1) && fin(&c.alpha2) && fin(&c.alpha3))
        {
            return Some("margins");
        }
        let s = &self.shrink;
        if !s.tau.is_finite() || !fin(&s.phi) {
            return Some("phi/tau");
        }
        if !fin(&s.lambda1) || !fin(&s.lambda2) || !s.w1.iter().chain(&s.w2).all(|w| fin(w)) {
            return Some("lambda/W");
        }
        if !s.w3.iter().chain(&s.v).all(|w| fin(w)) {
            return Some("lag shrinkage");
        }
        if !fin(&self.sigma2) {
            return Some("sigma2");
        }
        None
    }

    /// Posterior-mean building block: `A*_h` for every component.
    pub fn component_matrices(&self) -> Vec<CoefMatrixSet> {
        self.components.iter().map(|c| c.matricize()).collect()
    }
}

/// Exact sampler used for the auxiliary path in the `(θ, κ)` update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuxSampler {
    Cftp,
    TransferMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub n_chains: usize,
    /// Inner `(φ, τ)` draws per grid point in the griddy step.
    pub griddy_inner_draws: usize,
    pub theta_step: f64,
    pub kappa_step: f64,
    pub aux_sampler: AuxSampler,
    /// Progress line on stderr every this many iterations; 0 disables it.
    pub progress_every: usize,
}

impl Default for ChainConfig {
    /// 5000 iterations, a third discarded, thinned by 3.
    fn default() -> Self {
        ChainConfig {
            n_iter: 5000,
            burn_in: 5000 / 3,
            thin: 3,
            seed: 0,
            n_chains: 1,
            griddy_inner_draws: 10,
            theta_step: 0.5,
            kappa_step: 0.5,
            aux_sampler: AuxSampler::Cftp,
            progress_every: 0,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.n_iter {
            return Err(Error::Config(format!(
                "burn_in ({}) must be below n_iter ({})",
                self.burn_in, self.n_iter
            )));
        }
        if self.thin == 0 || self.n_chains == 0 || self.griddy_inner_draws == 0 {
            return Err(Error::Config("thin, chains and griddy draws must be at least 1".into()));
        }
        if !(self.theta_step >= 0.0 && self.kappa_step >= 0.0) {
            return Err(Error::Config("proposal steps must be nonnegative".into()));
        }
        Ok(())
    }

    /// Number of stored draws per chain.
    pub fn kept_per_chain(&self) -> usize {
        (self.n_iter - self.burn_in).div_ceil(self.thin)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// Exchange-move acceptance rate per component, pooled over chains.
    pub ising_acceptance: Vec<f64>,
    /// How often each concentration grid point was selected after burn-in.
    pub alpha_counts: Vec<usize>,
    /// Per stored draw: chain index, log likelihood and `τ`.
    pub draw_chain: Vec<usize>,
    pub log_lik: Vec<f64>,
    pub tau: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub n: usize,
    pub p: usize,
    pub h: usize,
    pub t_len: usize,
    pub draws: Vec<ModelState>,
    /// Posterior mean of `A_{j,t}` per path index `t - P`.
    pub posterior_mean_a: Vec<CoefMatrixSet>,
    /// `P(γ_{h,t} = 1 | y)`, `H × (T - P)`.
    pub gamma_prob: Vec<Vec<f64>>,
    /// Posterior mean of each base `A*_h`.
    pub component_mean: Vec<CoefMatrixSet>,
    pub diagnostics: Diagnostics,
}

impl FitResult {
    pub fn path_len(&self) -> usize {
        self.t_len - self.p
    }
}

/// `γ̃_{h,t} = 1` iff `P(γ_{h,t} = 1 | y) > threshold`.
pub fn summarize_gamma(result: &FitResult, threshold: f64) -> Result<Vec<ActivationPath>> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Domain(format!("threshold {threshold} must lie in (0, 1)")));
    }
    Ok(result
        .gamma_prob
        .iter()
        .map(|row| ActivationPath::new(row.iter().map(|&p| p > threshold).collect()))
        .collect())
}

/// Running sums for the posterior means.
struct Accumulator {
    count: usize,
    mean_a: Vec<CoefMatrixSet>,
    gamma: Vec<Vec<f64>>,
    comp: Vec<CoefMatrixSet>,
}

impl Accumulator {
    fn new(n: usize, p: usize, h: usize, l_len: usize) -> Self {
        Accumulator {
            count: 0,
            mean_a: vec![CoefMatrixSet::zeros(n, p); l_len],
            gamma: vec![vec![0.0; l_len]; h],
            comp: vec![CoefMatrixSet::zeros(n, p); h],
        }
    }

    fn push(&mut self, st: &ModelState) {
        self.count += 1;
        let w = 1.0 / self.count as f64;
        let bases = st.component_matrices();
        let (n, p) = (bases[0].n(), bases[0].p());
        // Times sharing an activation pattern share A_t; build each pattern once.
        let mut patterns: std::collections::HashMap<Vec<bool>, CoefMatrixSet> =
            std::collections::HashMap::new();
        for (l, mean) in self.mean_a.iter_mut().enumerate() {
            let key: Vec<bool> = st.paths.iter().map(|g| g.gamma[l]).collect();
            let a = patterns.entry(key).or_insert_with_key(|key| {
                let mut a = CoefMatrixSet::zeros(n, p);
                for (b, on) in bases.iter().zip(key) {
                    if *on {
                        a.add_assign(b);
                    }
                }
                a
            });
            for (m, x) in mean.as_mut_slice().iter_mut().zip(a.as_slice()) {
                *m += (x - *m) * w;
            }
        }
        for (row, path) in self.gamma.iter_mut().zip(&st.paths) {
            for (m, &g) in row.iter_mut().zip(&path.gamma) {
                *m += ((g as u8 as f64) - *m) * w;
            }
        }
        for (mean, b) in self.comp.iter_mut().zip(&bases) {
            for (m, x) in mean.as_mut_slice().iter_mut().zip(b.as_slice()) {
                *m += (x - *m) * w;
            }
        }
    }
}

struct ChainOutput {
    draws: Vec<ModelState>,
    acc: Accumulator,
    accepted: Vec<usize>,
    proposals: usize,
    alpha_counts: Vec<usize>,
    log_lik: Vec<f64>,
}

/// Per-sweep bookkeeping returned by [`sweep`].
#[derive(Debug, Clone, Default)]
pub struct SweepInfo {
    pub alpha_index: usize,
    pub ising_accepted: Vec<bool>,
}

fn check(st: &ModelState, iteration: usize, block: &'static str, r: Result<()>) -> Result<()> {
    r.map_err(|e| Error::SamplerAbort {
        iteration,
        block,
        detail: e.to_string(),
    })?;
    if let Some(what) = st.non_finite() {
        return Err(Error::SamplerAbort {
            iteration,
            block,
            detail: format!("non-finite {what}"),
        });
    }
    Ok(())
}

/// One full Gibbs sweep in place.
pub fn sweep(
    st: &mut ModelState,
    hp: &HyperParams,
    design: &Design<'_>,
    cfg: &ChainConfig,
    rng: &mut ChaCha8Rng,
    iteration: usize,
) -> Result<SweepInfo> {
    let mut info = SweepInfo::default();
    let r = blocks::update_concentration_griddy(st, hp, cfg.griddy_inner_draws, rng).map(|i| {
        info.alpha_index = i;
    });
    check(st, iteration, "concentration", r)?;
    let r = blocks::update_phi_tau(st, hp, rng);
    check(st, iteration, "phi/tau", r)?;
    let r = blocks::update_lambda_w12(st, hp, rng);
    check(st, iteration, "lambda/W", r)?;
    let r = blocks::update_lag_shrinkage(st, hp, rng);
    check(st, iteration, "lag shrinkage", r)?;

    let mut resid = design.residuals(&st.components, &st.paths);
    let r = blocks::update_margins(st, design, &mut resid, rng);
    check(st, iteration, "margins", r)?;
    let r = blocks::update_paths(st, design, &mut resid, rng);
    check(st, iteration, "paths", r)?;
    let r = blocks::update_ising_params(st, hp, cfg, rng).map(|a| info.ising_accepted = a);
    check(st, iteration, "ising", r)?;
    let r = blocks::update_sigma2(st, hp, &resid, rng);
    check(st, iteration, "sigma2", r)?;
    Ok(info)
}

/// RNG of chain `index`: the seed picks the key, the chain picks the stream.
pub fn chain_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn run_one(
    data: &TimeSeries,
    hp: &HyperParams,
    cfg: &ChainConfig,
    chain: usize,
) -> Result<ChainOutput> {
    let design = Design::new(data, hp.p);
    let mut rng = chain_rng(cfg.seed, chain);
    let mut st = init::initial_state(&design, hp, &mut rng)?;
    let mut out = ChainOutput {
        draws: Vec::with_capacity(cfg.kept_per_chain()),
        acc: Accumulator::new(hp.n, hp.p, hp.h, design.len()),
        accepted: vec![0; hp.h],
        proposals: 0,
        alpha_counts: vec![0; hp.alpha_grid.len()],
        log_lik: Vec::with_capacity(cfg.kept_per_chain()),
    };
    for it in 0..cfg.n_iter {
        let info = sweep(&mut st, hp, &design, cfg, &mut rng, it)?;
        if cfg.progress_every > 0 && (it + 1) % cfg.progress_every == 0 {
            eprintln!("chain {chain}: iteration {}/{}", it + 1, cfg.n_iter);
        }
        if it < cfg.burn_in {
            continue;
        }
        out.proposals += 1;
        for (a, ok) in out.accepted.iter_mut().zip(&info.ising_accepted) {
            *a += *ok as usize;
        }
        out.alpha_counts[info.alpha_index] += 1;
        if (it - cfg.burn_in) % cfg.thin == 0 {
            out.acc.push(&st);
            out.log_lik.push(log_likelihood(&st, &design));
            out.draws.push(st.clone());
        }
    }
    Ok(out)
}

/// Runs `cfg.n_chains` chains in parallel and pools them in chain order.
pub fn run_chain(data: &TimeSeries, hp: &HyperParams, cfg: &ChainConfig) -> Result<FitResult> {
    hp.validate()?;
    cfg.validate()?;
    if data.n() != hp.n {
        return Err(Error::Shape(format!(
            "data has N={} but the model expects N={}",
            data.n(),
            hp.n
        )));
    }
    data.require_order(hp.p)?;
    let outputs: Vec<Result<ChainOutput>> = (0..cfg.n_chains)
        .into_par_iter()
        .map(|c| run_one(data, hp, cfg, c))
        .collect();
    let outputs = outputs.into_iter().collect::<Result<Vec<_>>>()?;

    let l_len = data.len() - hp.p;
    let mut mean_a = vec![CoefMatrixSet::zeros(hp.n, hp.p); l_len];
    let mut gamma = vec![vec![0.0; l_len]; hp.h];
    let mut comp = vec![CoefMatrixSet::zeros(hp.n, hp.p); hp.h];
    let total: usize = outputs.iter().map(|o| o.acc.count).sum();
    let mut diag = Diagnostics {
        ising_acceptance: vec![0.0; hp.h],
        alpha_counts: vec![0; hp.alpha_grid.len()],
        ..Default::default()
    };
    let mut draws = Vec::with_capacity(total);
    let mut proposals = 0usize;
    for (c, o) in outputs.into_iter().enumerate() {
        let w = o.acc.count as f64 / total as f64;
        for (m, x) in mean_a.iter_mut().zip(&o.acc.mean_a) {
            for (a, b) in m.as_mut_slice().iter_mut().zip(x.as_slice()) {
                *a += w * b;
            }
        }
        for (m, x) in gamma.iter_mut().zip(&o.acc.gamma) {
            for (a, b) in m.iter_mut().zip(x) {
                *a += w * b;
            }
        }
        for (m, x) in comp.iter_mut().zip(&o.acc.comp) {
            for (a, b) in m.as_mut_slice().iter_mut().zip(x.as_slice()) {
                *a += w * b;
            }
        }
        for (a, k) in diag.ising_acceptance.iter_mut().zip(&o.accepted) {
            *a += *k as f64;
        }
        proposals += o.proposals;
        for (a, k) in diag.alpha_counts.iter_mut().zip(&o.alpha_counts) {
            *a += k;
        }
        diag.draw_chain.extend(std::iter::repeat_n(c, o.draws.len()));
        diag.log_lik.extend(&o.log_lik);
        diag.tau.extend(o.draws.iter().map(|d| d.shrink.tau));
        draws.extend(o.draws);
    }
    for a in &mut diag.ising_acceptance {
        *a /= proposals.max(1) as f64;
    }
    for row in &mut gamma {
        for g in row.iter_mut() {
            *g = g.clamp(0.0, 1.0);
        }
    }
    Ok(FitResult {
        n: hp.n,
        p: hp.p,
        h: hp.h,
        t_len: data.len(),
        draws,
        posterior_mean_a: mean_a,
        gamma_prob: gamma,
        component_mean: comp,
        diagnostics: diag,
    })
}
