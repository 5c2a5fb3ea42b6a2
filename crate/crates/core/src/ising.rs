//! Temporal prior on activation paths.
//!
//! A binary chain `γ_1..γ_L` with law
//!
//! ```text
//! P(γ) ∝ exp( θ γ_1 + Σ_{1<t<L} θ* γ_t + θ γ_L + κ Σ_t γ_t γ_{t+1} )
//! ```
//!
//! is the same process as the binary NDARMA(1) chain
//! `γ_t = a_t γ_{t-1} + (1 - a_t) ε_t`, `a_t ~ Bern(p1)`, `ε_t ~ Bern(p2)`,
//! under the bijection implemented by [`theta_kappa_to_p`] / [`p_to_theta_kappa`].
//!
//! Exact draws come either from a transfer-matrix forward pass with backward
//! sampling, or from monotone coupling from the past (Propp–Wilson) with
//! heat-bath updates. The latter relies on `κ >= 0`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dist::{log_add_exp, sigmoid};
use crate::error::{Error, Result};

/// Default cap on the CFTP backward horizon, in sweeps.
pub const CFTP_MAX_SWEEPS: usize = 1 << 20;

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `θ* = log(e^θ(e^θ + 1) / (e^{θ+κ} + 1))`.
pub fn interior_field(theta: f64, kappa: f64) -> f64 {
    theta + softplus(theta) - softplus(theta + kappa)
}

/// Ising chain parameters; `theta_star` is always derived from `(θ, κ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsingParams {
    theta: f64,
    theta_star: f64,
    kappa: f64,
}

impl IsingParams {
    pub fn new(theta: f64, kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0) || !kappa.is_finite() || !theta.is_finite() {
            return Err(Error::Domain(format!(
                "Ising parameters need finite θ and κ >= 0, got θ={theta}, κ={kappa}"
            )));
        }
        Ok(IsingParams {
            theta,
            theta_star: interior_field(theta, kappa),
            kappa,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn theta_star(&self) -> f64 {
        self.theta_star
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }
}

/// NDARMA(1) copy probability `p1` and innovation mean `p2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NdarmaParams {
    p1: f64,
    p2: f64,
}

impl NdarmaParams {
    /// `p1 = 1` is accepted here (pure copying) for path simulation, but the
    /// parameter map to `(θ, κ)` requires `p1 < 1`.
    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p1) || !(p2 > 0.0 && p2 < 1.0) {
            return Err(Error::Domain(format!(
                "NDARMA parameters need 0 <= p1 <= 1 and 0 < p2 < 1, got ({p1}, {p2})"
            )));
        }
        Ok(NdarmaParams { p1, p2 })
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn p2(&self) -> f64 {
        self.p2
    }
}

/// Per-site linear fields plus a homogeneous nearest-neighbour coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainField {
    pub site_fields: Vec<f64>,
    pub coupling: f64,
}

impl ChainField {
    pub fn new(site_fields: Vec<f64>, coupling: f64) -> Result<Self> {
        if site_fields.is_empty() {
            return Err(Error::Domain("chain must have at least one site".into()));
        }
        if !site_fields.iter().all(|f| f.is_finite()) || !coupling.is_finite() || coupling < 0.0 {
            return Err(Error::Domain(
                "chain fields must be finite with coupling >= 0".into(),
            ));
        }
        Ok(ChainField {
            site_fields,
            coupling,
        })
    }

    /// The prior field: θ at both ends, θ* inside.
    pub fn prior(params: &IsingParams, len: usize) -> Self {
        let mut f = vec![params.theta_star; len];
        if let Some(first) = f.first_mut() {
            *first = params.theta;
        }
        if let Some(last) = f.last_mut() {
            *last = params.theta;
        }
        ChainField {
            site_fields: f,
            coupling: params.kappa,
        }
    }

    pub fn len(&self) -> usize {
        self.site_fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.site_fields.is_empty()
    }
}

/// `Σ_t f_t γ_t + κ Σ_t γ_t γ_{t+1}`.
pub fn ising_log_pmf_unnorm(gamma: &[bool], field: &ChainField) -> f64 {
    debug_assert_eq!(gamma.len(), field.len());
    let mut s = 0.0;
    for (g, f) in gamma.iter().zip(&field.site_fields) {
        if *g {
            s += f;
        }
    }
    let pairs = gamma.windows(2).filter(|w| w[0] && w[1]).count();
    s + field.coupling * pairs as f64
}

/// Log partition function over `{0,1}^L`, by a log-space 2×2 transfer product.
pub fn transfer_matrix_normalizer(field: &ChainField) -> f64 {
    let msgs = forward_messages(field);
    let last = msgs[msgs.len() - 1];
    log_add_exp(last[0], last[1])
}

/// `m_t(s)`: log of the summed weight of all prefixes ending with `γ_t = s`.
fn forward_messages(field: &ChainField) -> Vec<[f64; 2]> {
    let k = field.coupling;
    let mut msgs = Vec::with_capacity(field.len());
    let mut prev = [0.0, field.site_fields[0]];
    msgs.push(prev);
    for &f in &field.site_fields[1..] {
        let m0 = log_add_exp(prev[0], prev[1]);
        let m1 = f + log_add_exp(prev[0], prev[1] + k);
        prev = [m0, m1];
        msgs.push(prev);
    }
    msgs
}

/// Exact draw from `P(γ) ∝ exp(ising_log_pmf_unnorm(γ))`.
pub fn exact_chain_sample<R: Rng + ?Sized>(field: &ChainField, rng: &mut R) -> Vec<bool> {
    let msgs = forward_messages(field);
    let l = msgs.len();
    let mut out = vec![false; l];
    let last = msgs[l - 1];
    out[l - 1] = rng.random::<f64>() < sigmoid(last[1] - last[0]);
    for t in (0..l - 1).rev() {
        let bonus = if out[t + 1] { field.coupling } else { 0.0 };
        let m = msgs[t];
        out[t] = rng.random::<f64>() < sigmoid(m[1] + bonus - m[0]);
    }
    out
}

/// Coupling from the past on a chain field with heat-bath sweeps.
pub fn cftp_chain_sample<R: Rng + ?Sized>(
    field: &ChainField,
    rng: &mut R,
    max_sweeps: usize,
) -> Result<Vec<bool>> {
    let l = field.len();
    let k = field.coupling;
    if k < 0.0 {
        return Err(Error::Domain("CFTP needs an attractive coupling".into()));
    }
    // seeds[s] drives the sweep at time -(s+1); reused across restarts.
    let mut seeds: Vec<u64> = Vec::new();
    let mut horizon = 1usize;
    let mut upper = vec![true; l];
    let mut lower = vec![false; l];
    loop {
        while seeds.len() < horizon {
            seeds.push(rng.random());
        }
        upper.iter_mut().for_each(|g| *g = true);
        lower.iter_mut().for_each(|g| *g = false);
        for s in (0..horizon).rev() {
            let mut sweep_rng = ChaCha8Rng::seed_from_u64(seeds[s]);
            for t in 0..l {
                let u: f64 = sweep_rng.random();
                let f = field.site_fields[t];
                let nb = |c: &[bool]| {
                    let left = t > 0 && c[t - 1];
                    let right = t + 1 < l && c[t + 1];
                    (left as u8 + right as u8) as f64
                };
                let pu = sigmoid(f + k * nb(&upper));
                let pl = sigmoid(f + k * nb(&lower));
                upper[t] = u < pu;
                lower[t] = u < pl;
            }
        }
        if upper == lower {
            return Ok(upper);
        }
        if horizon >= max_sweeps {
            return Err(Error::Numerical(format!(
                "CFTP did not coalesce within {max_sweeps} sweeps"
            )));
        }
        horizon *= 2;
    }
}

/// Exact draw from the Ising prior by coupling from the past.
pub fn cftp_ising_sample<R: Rng + ?Sized>(
    params: &IsingParams,
    len: usize,
    rng: &mut R,
) -> Result<Vec<bool>> {
    cftp_chain_sample(&ChainField::prior(params, len), rng, CFTP_MAX_SWEEPS)
}

/// `(θ, κ) → (p1, p2)`.
pub fn theta_kappa_to_p(params: &IsingParams) -> NdarmaParams {
    let et = params.theta.exp();
    let etk = (params.theta + params.kappa).exp();
    let p1 = et * params.kappa.exp_m1() / ((etk + 1.0) * (et + 1.0));
    let p2 = et * (etk + 1.0) / (et * etk + 2.0 * et + 1.0);
    NdarmaParams { p1, p2 }
}

/// `(p1, p2) → (θ, θ*, κ)`.
pub fn p_to_theta_kappa(params: &NdarmaParams) -> Result<IsingParams> {
    let (p1, p2) = (params.p1, params.p2);
    if !(0.0..1.0).contains(&p1) || !(p2 > 0.0 && p2 < 1.0) {
        return Err(Error::Domain(format!(
            "parameter map needs 0 <= p1 < 1 and 0 < p2 < 1, got ({p1}, {p2})"
        )));
    }
    let q1 = 1.0 - p1;
    let theta = (p2 * q1).ln() - (p1 + (1.0 - p2) * q1).ln();
    let kappa = (p1 / (p2 * (1.0 - p2) * q1 * q1)).ln_1p();
    if !theta.is_finite() || !kappa.is_finite() {
        return Err(Error::Domain(format!(
            "parameter map is singular at ({p1}, {p2})"
        )));
    }
    IsingParams::new(theta, kappa)
}

/// Log joint pmf of an NDARMA(1) path.
pub fn ndarma_log_pmf(gamma: &[bool], params: &NdarmaParams) -> f64 {
    let (p1, p2) = (params.p1, params.p2);
    let marg = |g: bool| if g { p2 } else { 1.0 - p2 };
    let mut lp = match gamma.first() {
        Some(&g) => marg(g).ln(),
        None => return 0.0,
    };
    for w in gamma.windows(2) {
        let stay = if w[0] == w[1] { p1 } else { 0.0 };
        lp += (stay + (1.0 - p1) * marg(w[1])).ln();
    }
    lp
}

pub fn ndarma_joint_pmf(gamma: &[bool], params: &NdarmaParams) -> f64 {
    ndarma_log_pmf(gamma, params).exp()
}

/// Simulates an NDARMA(1) path of length `len`.
pub fn ndarma_sample_path<R: Rng + ?Sized>(params: &NdarmaParams, len: usize, rng: &mut R) -> Vec<bool> {
    let mut out = Vec::with_capacity(len);
    let mut prev = false;
    for t in 0..len {
        let copy = t > 0 && rng.random::<f64>() < params.p1;
        let g = if copy { prev } else { rng.random::<f64>() < params.p2 };
        out.push(g);
        prev = g;
    }
    out
}

/// Enumerates `{0,1}^len` in binary-counting order (site 0 is the lowest bit).
pub fn all_configurations(len: usize) -> impl Iterator<Item = Vec<bool>> {
    (0u64..1u64 << len).map(move |code| (0..len).map(|t| code >> t & 1 == 1).collect())
}

/// Binary code of a configuration, matching [`all_configurations`].
pub fn configuration_code(gamma: &[bool]) -> usize {
    gamma
        .iter()
        .enumerate()
        .fold(0, |acc, (t, &g)| acc | ((g as usize) << t))
}
