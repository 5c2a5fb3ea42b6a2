//! Unnormalized joint posterior and direct prior simulation.

use rand::Rng;

use super::blocks::ising_log_pmf;
use super::data::{residual_loglik, Design};
use super::ModelState;
use crate::dist::{ln_inv_gamma_pdf, sample_inv_gamma};
use crate::error::Result;
use crate::ising::{exact_chain_sample, ChainField, IsingParams};
use crate::model::ActivationPath;
use crate::priors::{log_prior_density, sample_prior_component, sample_prior_shrinkage, HyperParams};

/// `log p(y_{P+1..T} | state)`.
pub fn log_likelihood(st: &ModelState, design: &Design<'_>) -> f64 {
    let r = design.residuals(&st.components, &st.paths);
    residual_loglik(&r, &st.sigma2)
}

/// Log of the joint density of data and every latent variable, including the
/// exact Ising normalizers. The uniform priors on the concentration grid and
/// on the `(θ, κ)` boxes contribute constants (or `-∞` outside a box).
pub fn log_joint(st: &ModelState, hp: &HyperParams, design: &Design<'_>) -> Result<f64> {
    let mut lp = log_likelihood(st, design);
    lp += log_prior_density(&st.shrink, &st.components, hp, st.alpha_conc)?;
    for (h, (path, p)) in st.paths.iter().zip(&st.ising).enumerate() {
        if !hp.ising_boxes[h].contains(p.theta(), p.kappa()) {
            return Ok(f64::NEG_INFINITY);
        }
        lp += ising_log_pmf(&path.gamma, p);
    }
    lp += st
        .sigma2
        .iter()
        .map(|s| ln_inv_gamma_pdf(*s, hp.a_sigma, hp.b_sigma))
        .sum::<f64>();
    Ok(lp)
}

/// Draws every latent variable from the prior. Paths have length `path_len`.
pub fn sample_prior_state<R: Rng + ?Sized>(
    hp: &HyperParams,
    path_len: usize,
    rng: &mut R,
) -> Result<ModelState> {
    let alpha = hp.alpha_grid[rng.random_range(0..hp.alpha_grid.len())];
    let shrink = sample_prior_shrinkage(hp, alpha, rng)?;
    let components = (0..hp.h)
        .map(|h| sample_prior_component(hp, &shrink, h, rng))
        .collect();
    let mut ising = Vec::with_capacity(hp.h);
    let mut paths = Vec::with_capacity(hp.h);
    for b in &hp.ising_boxes {
        let theta = if b.theta_max > b.theta_min {
            rng.random_range(b.theta_min..=b.theta_max)
        } else {
            b.theta_min
        };
        let kappa = if b.kappa_max > 0.0 {
            rng.random_range(0.0..=b.kappa_max)
        } else {
            0.0
        };
        let p = IsingParams::new(theta, kappa)?;
        paths.push(ActivationPath::new(exact_chain_sample(
            &ChainField::prior(&p, path_len),
            rng,
        )));
        ising.push(p);
    }
    let sigma2 = (0..hp.n)
        .map(|_| sample_inv_gamma(rng, hp.a_sigma, hp.b_sigma))
        .collect::<Result<_>>()?;
    Ok(ModelState {
        components,
        paths,
        shrink,
        ising,
        sigma2,
        alpha_conc: alpha,
    })
}
