//! Self-checks of the sampler against the joint density.
//!
//! The conditional-ratio check compares, for pairs of states that differ in
//! one block only, the change in the block's log conditional with the change
//! in the log joint. The Geweke check runs the successive-conditional
//! simulator and returns it next to independent prior draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::blocks::{self, Margin};
use super::data::Design;
use super::joint::{log_joint, sample_prior_state};
use super::{init, sweep, ChainConfig, ModelState};
use crate::dist::{sample_inv_gamma, sample_normal};
use crate::error::{Error, Result};
use crate::ising::IsingParams;
use crate::model::{simulate_var, TimeSeries};
use crate::priors::HyperParams;

/// Worst disagreement seen for one block.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioCheck {
    pub block: String,
    pub pairs: usize,
    pub max_abs_error: f64,
}

type Perturb = fn(&mut ModelState, &HyperParams, usize, &mut ChaCha8Rng) -> Result<()>;
type LogCond = fn(&ModelState, &HyperParams, &Design<'_>, usize) -> f64;

fn perturb_margin(st: &mut ModelState, m: Margin, h: usize, rng: &mut ChaCha8Rng) {
    let c = &mut st.components[h];
    let v = match m {
        Margin::Row => &mut c.alpha1,
        Margin::Col => &mut c.alpha2,
        Margin::Lag => &mut c.alpha3,
    };
    v.iter_mut().for_each(|x| *x = sample_normal(rng, *x, 0.3));
}

fn positive<R: Rng + ?Sized>(rng: &mut R, x: f64) -> f64 {
    x * sample_normal(rng, 0.0, 0.7).exp()
}

fn blocks_table() -> Vec<(&'static str, Perturb, LogCond)> {
    vec![
        (
            "alpha1",
            |st, _, h, rng| {
                perturb_margin(st, Margin::Row, h, rng);
                Ok(())
            },
            |st, _, d, h| blocks::log_cond_margin(st, d, h, Margin::Row),
        ),
        (
            "alpha2",
            |st, _, h, rng| {
                perturb_margin(st, Margin::Col, h, rng);
                Ok(())
            },
            |st, _, d, h| blocks::log_cond_margin(st, d, h, Margin::Col),
        ),
        (
            "alpha3",
            |st, _, h, rng| {
                perturb_margin(st, Margin::Lag, h, rng);
                Ok(())
            },
            |st, _, d, h| blocks::log_cond_margin(st, d, h, Margin::Lag),
        ),
        (
            "gamma",
            |st, _, h, rng| {
                st.paths[h].gamma.iter_mut().for_each(|g| *g = rng.random());
                Ok(())
            },
            |st, _, d, h| blocks::log_cond_path(st, d, h),
        ),
        (
            "theta/kappa",
            |st, hp, h, rng| {
                let b = hp.ising_boxes[h];
                let theta = b.theta_min + (b.theta_max - b.theta_min) * rng.random::<f64>();
                let kappa = b.kappa_max * rng.random::<f64>();
                st.ising[h] = IsingParams::new(theta, kappa)?;
                Ok(())
            },
            |st, hp, _, h| blocks::log_cond_ising(st, hp, h),
        ),
        (
            "sigma2",
            |st, _, _, rng| {
                for s in st.sigma2.iter_mut() {
                    *s = positive(rng, *s);
                }
                Ok(())
            },
            |st, hp, d, _| blocks::log_cond_sigma2(st, hp, d),
        ),
        (
            "phi/tau",
            |st, _, _, rng| {
                let s = &mut st.shrink;
                let mut psi: Vec<f64> = s.phi.iter().map(|f| positive(rng, f * s.tau)).collect();
                let tau: f64 = psi.iter().sum();
                psi.iter_mut().for_each(|x| *x /= tau);
                crate::priors::renormalize(&mut psi);
                s.phi = psi;
                s.tau = tau;
                Ok(())
            },
            |st, hp, _, _| blocks::log_cond_phi_tau(st, hp),
        ),
        (
            "tau",
            |st, _, _, rng| {
                st.shrink.tau = positive(rng, st.shrink.tau);
                Ok(())
            },
            |st, hp, _, _| blocks::log_cond_tau(st, hp),
        ),
        (
            "lambda1/W1",
            |st, _, h, rng| {
                let s = &mut st.shrink;
                s.lambda1[h] = positive(rng, s.lambda1[h]);
                for w in s.w1[h].iter_mut() {
                    *w = positive(rng, *w);
                }
                Ok(())
            },
            |st, hp, _, h| blocks::log_cond_lambda_w(st, hp, h, Margin::Row),
        ),
        (
            "lambda2/W2",
            |st, _, h, rng| {
                let s = &mut st.shrink;
                s.lambda2[h] = positive(rng, s.lambda2[h]);
                for w in s.w2[h].iter_mut() {
                    *w = positive(rng, *w);
                }
                Ok(())
            },
            |st, hp, _, h| blocks::log_cond_lambda_w(st, hp, h, Margin::Col),
        ),
        (
            "v",
            |st, _, h, rng| {
                for v in st.shrink.v[h].iter_mut() {
                    *v = crate::priors::clamp_open_unit(rng.random());
                }
                Ok(())
            },
            |st, hp, _, h| blocks::log_cond_v(st, hp, h),
        ),
        (
            "z/W3",
            |st, hp, h, rng| {
                for j in 0..hp.p {
                    let z = rng.random_range(0..hp.p);
                    st.shrink.z[h][j] = z;
                    st.shrink.w3[h][j] = if z <= j {
                        hp.w_inf
                    } else {
                        sample_inv_gamma(rng, 2.0, 1.0)?
                    };
                }
                Ok(())
            },
            |st, hp, _, h| blocks::log_cond_z_w3(st, hp, h),
        ),
        (
            "concentration",
            |st, hp, _, rng| {
                st.alpha_conc = hp.alpha_grid[rng.random_range(0..hp.alpha_grid.len())];
                Ok(())
            },
            |st, hp, _, _| blocks::log_cond_concentration(st, hp),
        ),
    ]
}

/// Base states for the ratio check: the chain's starting point advanced by a
/// few sweeps, so that every block holds a typical posterior value.
fn base_state(data: &TimeSeries, hp: &HyperParams, seed: u64) -> Result<ModelState> {
    let design = Design::new(data, hp.p);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut st = init::initial_state(&design, hp, &mut rng)?;
    let cfg = ChainConfig::default();
    let sweeps = rng.random_range(1..6);
    for it in 0..sweeps {
        sweep(&mut st, hp, &design, &cfg, &mut rng, it)?;
    }
    Ok(st)
}

/// Runs the conditional-ratio check on `pairs` state pairs per block.
pub fn conditional_ratio_suite(
    data: &TimeSeries,
    hp: &HyperParams,
    pairs: usize,
    seed: u64,
) -> Result<Vec<RatioCheck>> {
    let design = Design::new(data, hp.p);
    let table = blocks_table();
    let mut out: Vec<RatioCheck> = table
        .iter()
        .map(|(name, _, _)| RatioCheck {
            block: name.to_string(),
            pairs: 0,
            max_abs_error: 0.0,
        })
        .collect();
    for i in 0..pairs {
        let base = base_state(data, hp, seed.wrapping_add(i as u64))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9e37_79b9 + i as u64));
        for (k, (_, perturb, cond)) in table.iter().enumerate() {
            let h = rng.random_range(0..hp.h);
            let mut moved = base.clone();
            perturb(&mut moved, hp, h, &mut rng)?;
            let dj = log_joint(&moved, hp, &design)? - log_joint(&base, hp, &design)?;
            let dc = cond(&moved, hp, &design, h) - cond(&base, hp, &design, h);
            let err = (dj - dc).abs();
            let rec = &mut out[k];
            rec.pairs += 1;
            rec.max_abs_error = if err.is_nan() { f64::INFINITY } else { rec.max_abs_error.max(err) };
        }
    }
    Ok(out)
}

/// Scalar summaries tracked by the Geweke check: `τ`, `θ_0`, `κ_0` and the
/// active fraction of `γ_0`.
pub fn geweke_summary(st: &ModelState) -> Vec<f64> {
    vec![
        st.shrink.tau,
        st.ising[0].theta(),
        st.ising[0].kappa(),
        st.paths[0].active_fraction(),
    ]
}

/// Series drawn from the likelihood given a state, with the conditioning
/// block `y_1..y_P` drawn from a fixed standard normal law.
pub fn simulate_from_state<R: Rng + ?Sized>(
    st: &ModelState,
    hp: &HyperParams,
    t_len: usize,
    rng: &mut R,
) -> Result<TimeSeries> {
    let init: Vec<Vec<f64>> = (0..hp.p)
        .map(|_| (0..hp.n).map(|_| sample_normal(rng, 0.0, 1.0)).collect())
        .collect();
    let sd: Vec<f64> = st.sigma2.iter().map(|s| s.sqrt()).collect();
    let y = simulate_var(&st.components, &st.paths, &sd, Some(&init), t_len, rng.random())?;
    if y.as_slice().iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("simulated series overflowed".into()));
    }
    Ok(y)
}

/// Output of [`geweke`]: independent prior draws and the successive
/// conditional chain, both as summary rows.
pub struct GewekeDraws {
    pub prior: Vec<Vec<f64>>,
    pub chain: Vec<Vec<f64>>,
}

impl GewekeDraws {
    /// Column `k` of the prior and chain rows.
    pub fn column(&self, k: usize) -> (Vec<f64>, Vec<f64>) {
        (
            self.prior.iter().map(|r| r[k]).collect(),
            self.chain.iter().map(|r| r[k]).collect(),
        )
    }
}

/// Successive-conditional simulator: alternate `thin` Gibbs sweeps given
/// `y` with a fresh `y` given the state, recording after each round.
pub fn geweke<F: Fn(&ModelState) -> Vec<f64>>(
    hp: &HyperParams,
    t_len: usize,
    rounds: usize,
    thin: usize,
    cfg: &ChainConfig,
    seed: u64,
    summary: F,
) -> Result<GewekeDraws> {
    let path_len = t_len - hp.p;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prior = (0..rounds)
        .map(|_| sample_prior_state(hp, path_len, &mut rng).map(|s| summary(&s)))
        .collect::<Result<Vec<_>>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut st = sample_prior_state(hp, path_len, &mut rng)?;
    let mut y = simulate_from_state(&st, hp, t_len, &mut rng)?;
    let mut chain = Vec::with_capacity(rounds);
    let mut it = 0;
    for _ in 0..rounds {
        for _ in 0..thin {
            let design = Design::new(&y, hp.p);
            sweep(&mut st, hp, &design, cfg, &mut rng, it)?;
            it += 1;
            y = simulate_from_state(&st, hp, t_len, &mut rng)?;
        }
        chain.push(summary(&st));
    }
    Ok(GewekeDraws { prior, chain })
}

/// Hyperparameters of the tiny Geweke model (`N=2`, `P=1`, `H=1`): a single
/// concentration point, a unit-rate `τ` prior, a light-tailed noise prior
/// and a moderate Ising box keep simulated series well scaled.
pub fn geweke_tiny_hyper() -> HyperParams {
    let mut hp = HyperParams::defaults(2, 1, 1);
    hp.alpha_grid = vec![1.0];
    hp.b_tau = 1.0;
    hp.a_sigma = 3.0;
    hp.b_sigma = 2.0;
    hp.ising_boxes = vec![crate::priors::IsingBox {
        theta_min: -2.0,
        theta_max: 2.0,
        kappa_max: 2.0,
    }];
    hp
}
