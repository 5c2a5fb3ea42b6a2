//! Full-conditional updates.
//!
//! Each block exposes the sampler and a log density of its own conditional,
//! evaluated at the current state up to terms that depend only on the
//! variables held fixed. The log densities exist for the conditional-ratio
//! tests and share parameter construction with the samplers.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::data::{dot, subtract_component, Design};
use super::{AuxSampler, ChainConfig, ModelState};
use crate::dist::{
    ln_beta_pdf, ln_dirichlet_sym, ln_gamma_pdf, ln_gig_unnorm, ln_inv_gamma_pdf, ln_normal,
    ln_student_t, log_sum_exp, sample_beta, sample_gamma, sample_gig, sample_inv_gamma,
    sample_log_categorical, sample_normal,
};
use crate::error::{Error, Result};
use crate::ising::{
    cftp_ising_sample, exact_chain_sample, ising_log_pmf_unnorm, transfer_matrix_normalizer,
    ChainField, IsingParams,
};
use crate::model::TensorComponent;
use crate::priors::{clamp_open_unit, renormalize, truncated_stick_weights, HyperParams, ShrinkageState};

/// Floor on `C_h` so that an annihilated component keeps a proper conditional.
pub const QUADRATIC_FLOOR: f64 = 1e-300;
/// Floor on `ψ_h = φ_h τ` draws.
pub const SCALE_FLOOR: f64 = 1e-300;

// ---------------------------------------------------------------------------
// Gaussian blocks

/// Gaussian with a diagonal prior `N(0, diag(v))` times a likelihood term
/// `exp(-½ ‖X x‖² + bᵀ x)`. Draws use the whitened variable `β = x / √v`,
/// whose precision `I + (X√v)ᵀ(X√v)` is factored by QR of the stacked rows
/// `[X√v; I]`; this never squares the data and stays stable when prior
/// variances underflow or the data rows are huge.
#[derive(Debug, Clone)]
pub struct GaussianCond {
    pub prior_var: DVector<f64>,
    pub rows: DMatrix<f64>,
    pub linear: DVector<f64>,
}

impl GaussianCond {
    /// Precision `diag(1/v) + XᵀX`.
    pub fn precision(&self) -> DMatrix<f64> {
        let mut q = self.rows.tr_mul(&self.rows);
        for (k, v) in self.prior_var.iter().enumerate() {
            q[(k, k)] += 1.0 / v;
        }
        q
    }

    pub fn log_density_unnorm(&self, x: &[f64]) -> f64 {
        let x = DVector::from_column_slice(x);
        let prior: f64 = x
            .iter()
            .zip(self.prior_var.iter())
            .map(|(xi, v)| if *xi == 0.0 { 0.0 } else { xi * xi / v })
            .sum();
        -0.5 * ((&self.rows * &x).norm_squared() + prior) + self.linear.dot(&x)
    }

    /// Upper factor `R` with `RᵀR` the whitened precision, and `√v`.
    fn whitened(&self) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let d = self.prior_var.map(|v| v.max(0.0).sqrt());
        let (m, k) = self.rows.shape();
        let mut stacked = DMatrix::zeros(m + k, k);
        for j in 0..k {
            for i in 0..m {
                stacked[(i, j)] = self.rows[(i, j)] * d[j];
            }
            stacked[(m + j, j)] = 1.0;
        }
        if stacked.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite conditional precision (prior variances {:?}, largest row entry {:e})",
                self.prior_var.as_slice(),
                self.rows.amax()
            )));
        }
        let r = stacked.qr().r();
        if (0..k).any(|i| !(r[(i, i)].abs() > 0.0)) {
            return Err(Error::Numerical("conditional precision is not positive definite".into()));
        }
        Ok((r, d))
    }

    fn whitened_mean(&self, r: &DMatrix<f64>, d: &DVector<f64>) -> Result<DVector<f64>> {
        let bw = self.linear.component_mul(d);
        r.tr_solve_upper_triangular(&bw)
            .and_then(|w| r.solve_upper_triangular(&w))
            .ok_or_else(|| Error::Numerical("singular precision factor".into()))
    }

    pub fn mean(&self) -> Result<Vec<f64>> {
        let (r, d) = self.whitened()?;
        Ok(self.whitened_mean(&r, &d)?.component_mul(&d).as_slice().to_vec())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let (r, d) = self.whitened()?;
        let mean = self.whitened_mean(&r, &d)?;
        let z = DVector::from_fn(self.linear.len(), |_, _| sample_normal(rng, 0.0, 1.0));
        let dev = r
            .solve_upper_triangular(&z)
            .ok_or_else(|| Error::Numerical("singular precision factor".into()))?;
        let x = (mean + dev).component_mul(&d);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite margin draw".into()));
        }
        Ok(x.as_slice().to_vec())
    }
}

/// `d_l = α1ᵀ Σ⁻¹ r_l` and `c = α1ᵀ Σ⁻¹ α1`.
fn projected_residuals(alpha1: &[f64], sigma2: &[f64], rminus: &[f64]) -> (Vec<f64>, f64) {
    let n = sigma2.len();
    let w: Vec<f64> = alpha1.iter().zip(sigma2).map(|(a, s)| a / s).collect();
    let d = rminus.chunks_exact(n).map(|r| dot(&w, r)).collect();
    let c = dot(&w, alpha1);
    (d, c)
}

/// Likelihood rows `√c · u_l` and linear term `Σ d_l u_l` over active `l`.
fn active_rows(gamma: &[bool], u: &[f64], d: &[f64], c: f64, k: usize) -> (DMatrix<f64>, DVector<f64>) {
    let active: Vec<usize> = (0..gamma.len()).filter(|&l| gamma[l]).collect();
    let sc = c.sqrt();
    let rows = DMatrix::from_fn(active.len(), k, |i, j| sc * u[active[i] * k + j]);
    let mut b = DVector::zeros(k);
    for &l in &active {
        for j in 0..k {
            b[j] += d[l] * u[l * k + j];
        }
    }
    (rows, b)
}

pub fn alpha1_conditional(
    st: &ModelState,
    design: &Design<'_>,
    h: usize,
    rminus: &[f64],
) -> GaussianCond {
    let n = design.n();
    let comp = &st.components[h];
    let gamma = &st.paths[h].gamma;
    let psi = st.shrink.phi[h] * st.shrink.tau;
    let s = design.scores(comp);
    let mut ss = 0.0;
    let mut b = DVector::zeros(n);
    for (l, (&g, sl)) in gamma.iter().zip(&s).enumerate() {
        if !g {
            continue;
        }
        ss += sl * sl;
        for (k, r) in rminus[l * n..(l + 1) * n].iter().enumerate() {
            b[k] += sl * r;
        }
    }
    let mut x = DMatrix::zeros(n, n);
    for k in 0..n {
        x[(k, k)] = (ss / st.sigma2[k]).sqrt();
        b[k] /= st.sigma2[k];
    }
    GaussianCond {
        prior_var: DVector::from_iterator(n, st.shrink.w1[h].iter().map(|w| psi * w)),
        rows: x,
        linear: b,
    }
}

pub fn alpha2_conditional(
    st: &ModelState,
    design: &Design<'_>,
    h: usize,
    rminus: &[f64],
) -> GaussianCond {
    let n = design.n();
    let comp = &st.components[h];
    let gamma = &st.paths[h].gamma;
    let psi = st.shrink.phi[h] * st.shrink.tau;
    let u = design.lag_mixtures(&comp.alpha3);
    let (d, c) = projected_residuals(&comp.alpha1, &st.sigma2, rminus);
    let (rows, b) = active_rows(gamma, &u, &d, c, n);
    GaussianCond {
        prior_var: DVector::from_iterator(n, st.shrink.w2[h].iter().map(|w| psi * w)),
        rows,
        linear: b,
    }
}

pub fn alpha3_conditional(
    st: &ModelState,
    design: &Design<'_>,
    h: usize,
    rminus: &[f64],
) -> GaussianCond {
    let p = design.p;
    let comp = &st.components[h];
    let gamma = &st.paths[h].gamma;
    let psi = st.shrink.phi[h] * st.shrink.tau;
    let qp = design.lag_projections(&comp.alpha2);
    let (d, c) = projected_residuals(&comp.alpha1, &st.sigma2, rminus);
    let (rows, b) = active_rows(gamma, &qp, &d, c, p);
    GaussianCond {
        prior_var: DVector::from_iterator(p, st.shrink.w3[h].iter().map(|w| psi * w)),
        rows,
        linear: b,
    }
}

/// Which tensor margin a block refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Margin {
    Row,
    Col,
    Lag,
}

pub fn margin_conditional(
    st: &ModelState,
    design: &Design<'_>,
    h: usize,
    margin: Margin,
    rminus: &[f64],
) -> GaussianCond {
    match margin {
        Margin::Row => alpha1_conditional(st, design, h, rminus),
        Margin::Col => alpha2_conditional(st, design, h, rminus),
        Margin::Lag => alpha3_conditional(st, design, h, rminus),
    }
}

fn margin_mut(c: &mut TensorComponent, m: Margin) -> &mut Vec<f64> {
    match m {
        Margin::Row => &mut c.alpha1,
        Margin::Col => &mut c.alpha2,
        Margin::Lag => &mut c.alpha3,
    }
}

pub fn margin_values(c: &TensorComponent, m: Margin) -> &[f64] {
    match m {
        Margin::Row => &c.alpha1,
        Margin::Col => &c.alpha2,
        Margin::Lag => &c.alpha3,
    }
}

/// Log conditional density of one margin of component `h`.
pub fn log_cond_margin(st: &ModelState, design: &Design<'_>, h: usize, margin: Margin) -> f64 {
    let rminus = design.residuals_without(&st.components, &st.paths, Some(h));
    margin_conditional(st, design, h, margin, &rminus)
        .log_density_unnorm(margin_values(&st.components[h], margin))
}

/// Redraws all three margins of every component. `r` holds the full
/// residuals on entry and on exit.
pub fn update_margins<R: Rng + ?Sized>(
    st: &mut ModelState,
    design: &Design<'_>,
    r: &mut [f64],
    rng: &mut R,
) -> Result<()> {
    for h in 0..st.components.len() {
        subtract_component(r, design, &st.components[h], &st.paths[h], -1.0);
        for m in [Margin::Row, Margin::Col, Margin::Lag] {
            let draw = margin_conditional(st, design, h, m, r).sample(rng)?;
            *margin_mut(&mut st.components[h], m) = draw;
        }
        subtract_component(r, design, &st.components[h], &st.paths[h], 1.0);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Activation paths and Ising parameters

/// Chain field of `γ_h` given everything else: prior fields plus
/// `s_l d_l - ½ s_l² c` from the likelihood.
pub fn path_field(st: &ModelState, design: &Design<'_>, h: usize, rminus: &[f64]) -> ChainField {
    let comp = &st.components[h];
    let s = design.scores(comp);
    let (d, c) = projected_residuals(&comp.alpha1, &st.sigma2, rminus);
    let mut f = ChainField::prior(&st.ising[h], design.len());
    for (l, fl) in f.site_fields.iter_mut().enumerate() {
        *fl += s[l] * d[l] - 0.5 * s[l] * s[l] * c;
    }
    f
}

pub fn log_cond_path(st: &ModelState, design: &Design<'_>, h: usize) -> f64 {
    let rminus = design.residuals_without(&st.components, &st.paths, Some(h));
    let f = path_field(st, design, h, &rminus);
    ising_log_pmf_unnorm(&st.paths[h].gamma, &f) - transfer_matrix_normalizer(&f)
}

pub fn update_paths<R: Rng + ?Sized>(
    st: &mut ModelState,
    design: &Design<'_>,
    r: &mut [f64],
    rng: &mut R,
) -> Result<()> {
    for h in 0..st.components.len() {
        subtract_component(r, design, &st.components[h], &st.paths[h], -1.0);
        let f = path_field(st, design, h, r);
        if f.site_fields.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!("non-finite path field for component {h}")));
        }
        st.paths[h].gamma = exact_chain_sample(&f, rng);
        subtract_component(r, design, &st.components[h], &st.paths[h], 1.0);
    }
    Ok(())
}

/// Normalized log prior pmf of a path.
pub fn ising_log_pmf(gamma: &[bool], params: &IsingParams) -> f64 {
    let f = ChainField::prior(params, gamma.len());
    ising_log_pmf_unnorm(gamma, &f) - transfer_matrix_normalizer(&f)
}

/// Target of the `(θ_h, κ_h)` block: uniform box prior times the path pmf.
pub fn log_cond_ising(st: &ModelState, hp: &HyperParams, h: usize) -> f64 {
    let b = hp.ising_boxes[h];
    let p = st.ising[h];
    if !b.contains(p.theta(), p.kappa()) {
        return f64::NEG_INFINITY;
    }
    ising_log_pmf(&st.paths[h].gamma, &p)
}

/// Reflects `x` into `[lo, hi]`.
pub fn reflect(mut x: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return lo;
    }
    for _ in 0..64 {
        if x < lo {
            x = 2.0 * lo - x;
        } else if x > hi {
            x = 2.0 * hi - x;
        } else {
            return x;
        }
    }
    x.clamp(lo, hi)
}

/// Exchange-algorithm update of `(θ_h, κ_h)` for every component. The
/// auxiliary path is an exact draw at the proposed parameters, so the
/// partition functions cancel. Returns the number of accepted moves.
pub fn update_ising_params<R: Rng + ?Sized>(
    st: &mut ModelState,
    hp: &HyperParams,
    cfg: &ChainConfig,
    rng: &mut R,
) -> Result<Vec<bool>> {
    let mut accepted = Vec::with_capacity(st.ising.len());
    for h in 0..st.ising.len() {
        let b = hp.ising_boxes[h];
        let cur = st.ising[h];
        let theta = reflect(
            cur.theta() + cfg.theta_step * (2.0 * rng.random::<f64>() - 1.0),
            b.theta_min,
            b.theta_max,
        );
        let kappa = reflect(
            cur.kappa() + cfg.kappa_step * (2.0 * rng.random::<f64>() - 1.0),
            0.0,
            b.kappa_max,
        );
        let prop = IsingParams::new(theta, kappa)?;
        let len = st.paths[h].len();
        let aux = match cfg.aux_sampler {
            AuxSampler::Cftp => cftp_ising_sample(&prop, len, rng)?,
            AuxSampler::TransferMatrix => exact_chain_sample(&ChainField::prior(&prop, len), rng),
        };
        let gamma = &st.paths[h].gamma;
        let lq = |g: &[bool], p: &IsingParams| ising_log_pmf_unnorm(g, &ChainField::prior(p, len));
        let log_a = lq(gamma, &prop) - lq(gamma, &cur) + lq(&aux, &cur) - lq(&aux, &prop);
        let ok = log_a >= 0.0 || rng.random::<f64>().ln() < log_a;
        if ok {
            st.ising[h] = prop;
        }
        accepted.push(ok);
    }
    Ok(accepted)
}

// ---------------------------------------------------------------------------
// Noise variances

/// Inverse-Gamma `(shape, scale)` of each `σ_n²` given the residuals.
pub fn sigma2_conditional(hp: &HyperParams, r: &[f64], n: usize) -> Vec<(f64, f64)> {
    let l_len = r.len() / n;
    let mut ss = vec![0.0; n];
    for row in r.chunks_exact(n) {
        for (acc, e) in ss.iter_mut().zip(row) {
            *acc += e * e;
        }
    }
    ss.iter()
        .map(|s| (hp.a_sigma + l_len as f64 / 2.0, hp.b_sigma + s / 2.0))
        .collect()
}

pub fn log_cond_sigma2(st: &ModelState, hp: &HyperParams, design: &Design<'_>) -> f64 {
    let r = design.residuals(&st.components, &st.paths);
    sigma2_conditional(hp, &r, design.n())
        .iter()
        .zip(&st.sigma2)
        .map(|((a, b), s)| ln_inv_gamma_pdf(*s, *a, *b))
        .sum()
}

pub fn update_sigma2<R: Rng + ?Sized>(
    st: &mut ModelState,
    hp: &HyperParams,
    r: &[f64],
    rng: &mut R,
) -> Result<()> {
    let n = st.sigma2.len();
    for (k, (a, b)) in sigma2_conditional(hp, r, n).into_iter().enumerate() {
        st.sigma2[k] = sample_inv_gamma(rng, a, b)?.max(f64::MIN_POSITIVE);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Global and local scales

/// `C_h = Σ α²/W` over the three margins, floored.
pub fn margin_quadratic(c: &TensorComponent, s: &ShrinkageState, h: usize) -> f64 {
    let q = |a: &[f64], w: &[f64]| a.iter().zip(w).map(|(x, v)| x * x / v).sum::<f64>();
    (q(&c.alpha1, &s.w1[h]) + q(&c.alpha2, &s.w2[h]) + q(&c.alpha3, &s.w3[h])).max(QUADRATIC_FLOOR)
}

/// Half the number of Gaussian coordinates per component, `N + P/2`.
fn half_dim(hp: &HyperParams) -> f64 {
    hp.n as f64 + hp.p as f64 / 2.0
}

/// giG parameters `(p, a, b)` of `ψ_h = φ_h τ` at concentration `alpha`.
pub fn psi_params(hp: &HyperParams, alpha: f64, c_h: f64) -> (f64, f64, f64) {
    (alpha - half_dim(hp), 2.0 * hp.b_tau, c_h)
}

/// giG parameters `(p, a, b)` of `τ` given `φ`.
pub fn tau_params(st: &ModelState, hp: &HyperParams) -> (f64, f64, f64) {
    let hf = hp.h as f64;
    let b: f64 = st
        .components
        .iter()
        .enumerate()
        .map(|(h, c)| margin_quadratic(c, &st.shrink, h) / st.shrink.phi[h])
        .sum();
    (
        hp.a_tau(st.alpha_conc) - hf * half_dim(hp),
        2.0 * hp.b_tau,
        b,
    )
}

/// Joint draw of `(φ, τ)` via independent `ψ_h`.
fn draw_phi_tau<R: Rng + ?Sized>(
    quad: &[f64],
    hp: &HyperParams,
    alpha: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, f64)> {
    let mut psi = Vec::with_capacity(quad.len());
    for &c in quad {
        let (p, a, b) = psi_params(hp, alpha, c);
        psi.push(sample_gig(rng, p, a, b)?.max(SCALE_FLOOR));
    }
    let tau: f64 = psi.iter().sum();
    let mut phi: Vec<f64> = psi.iter().map(|x| x / tau).collect();
    renormalize(&mut phi);
    Ok((phi, tau))
}

/// Draws `(φ, τ)` jointly, then refreshes `τ | φ`.
pub fn update_phi_tau<R: Rng + ?Sized>(
    st: &mut ModelState,
    hp: &HyperParams,
    rng: &mut R,
) -> Result<()> {
    let quad: Vec<f64> = st
        .components
        .iter()
        .enumerate()
        .map(|(h, c)| margin_quadratic(c, &st.shrink, h))
        .collect();
    let (phi, tau) = draw_phi_tau(&quad, hp, st.alpha_conc, rng)?;
    st.shrink.phi = phi;
    st.shrink.tau = tau;
    let (p, a, b) = tau_params(st, hp);
    st.shrink.tau = sample_gig(rng, p, a, b)?.max(SCALE_FLOOR);
    Ok(())
}

/// Log density of the joint `(φ_1..φ_{H-1}, τ)` conditional: the product of
/// the `ψ_h` giG densities times the Jacobian `τ^{H-1}`.
pub fn log_cond_phi_tau(st: &ModelState, hp: &HyperParams) -> f64 {
    let s = &st.shrink;
    let mut lp = (hp.h as f64 - 1.0) * s.tau.ln();
    for (h, c) in st.components.iter().enumerate() {
        let (p, a, b) = psi_params(hp, st.alpha_conc, margin_quadratic(c, s, h));
        lp += ln_gig_unnorm(s.phi[h] * s.tau, p, a, b);
    }
    lp
}

pub fn log_cond_tau(st: &ModelState, hp: &HyperParams) -> f64 {
    let (p, a, b) = tau_params(st, hp);
    ln_gig_unnorm(st.shrink.tau, p, a, b)
}

/// Log density of `N(α | 0, φ τ W)` written through `C_h` and `Σ log W`.
fn margin_loglik(quad: &[f64], log_w: &[f64], phi: &[f64], tau: f64, dims: f64) -> f64 {
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    quad.iter()
        .zip(log_w)
        .zip(phi)
        .map(|((c, lw), f)| {
            let psi = f * tau;
            -0.5 * dims * (ln2pi + psi.ln()) - 0.5 * lw - c / (2.0 * psi)
        })
        .sum()
}

/// Griddy-Gibbs log weights: for each grid point, log of the average over
/// `M` fresh conditional draws of `(φ, τ)` of `p(A | φ, τ, W) p(φ, τ | α)`.
pub fn griddy_log_weights<R: Rng + ?Sized>(
    st: &ModelState,
    hp: &HyperParams,
    inner: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let s = &st.shrink;
    let quad: Vec<f64> = st
        .components
        .iter()
        .enumerate()
        .map(|(h, c)| margin_quadratic(c, s, h))
        .collect();
    let log_w: Vec<f64> = (0..hp.h)
        .map(|h| {
            s.w1[h].iter().chain(&s.w2[h]).chain(&s.w3[h]).map(|w| w.ln()).sum()
        })
        .collect();
    let dims = 2.0 * half_dim(hp);
    let m = inner.max(1);
    let mut out = Vec::with_capacity(hp.alpha_grid.len());
    for &alpha in &hp.alpha_grid {
        let mut scores = Vec::with_capacity(m);
        for _ in 0..m {
            let (phi, tau) = draw_phi_tau(&quad, hp, alpha, rng)?;
            scores.push(
                margin_loglik(&quad, &log_w, &phi, tau, dims)
                    + ln_dirichlet_sym(&phi, alpha)
                    + ln_gamma_pdf(tau, hp.a_tau(alpha), hp.b_tau),
            );
        }
        out.push(log_sum_exp(&scores) - (m as f64).ln());
    }
    Ok(out)
}

/// Normalized log conditional of the concentration given `(φ, τ)` on the
/// grid. The sampler draws it with `(φ, τ)` averaged out instead; this form
/// serves as a check on the joint density.
pub fn log_cond_concentration(st: &ModelState, hp: &HyperParams) -> f64 {
    let s = &st.shrink;
    let score = |a: f64| ln_dirichlet_sym(&s.phi, a) + ln_gamma_pdf(s.tau, hp.a_tau(a), hp.b_tau);
    let all: Vec<f64> = hp.alpha_grid.iter().map(|&a| score(a)).collect();
    score(st.alpha_conc) - log_sum_exp(&all)
}

/// Selects the Dirichlet concentration from the grid; returns its index.
pub fn update_concentration_griddy<R: Rng + ?Sized>(
    st: &mut ModelState,
    hp: &HyperParams,
    inner: usize,
    rng: &mut R,
) -> Result<usize> {
    let idx = if hp.alpha_grid.len() == 1 {
        0
    } else {
        let lw = griddy_log_weights(st, hp, inner, rng)?;
        sample_log_categorical(rng, &lw)?
    };
    st.alpha_conc = hp.alpha_grid[idx];
    Ok(idx)
}

// ---------------------------------------------------------------------------
// Row and column shrinkage

/// Gamma `(shape, rate)` of `λ` with the local variances integrated out.
pub fn lambda_params(hp: &HyperParams, alpha: &[f64], psi: f64) -> (f64, f64) {
    let l1: f64 = alpha.iter().map(|a| a.abs()).sum();
    (hp.a_lambda + alpha.len() as f64, hp.b_lambda + l1 / psi.sqrt())
}

/// Normalized log density of `Gig(1/2, a, b)`.
fn ln_gig_half(x: f64, a: f64, b: f64) -> f64 {
    ln_gig_unnorm(x, 0.5, a, b) + (a * b).sqrt() - 0.5 * (2.0 * std::f64::consts::PI / a).ln()
}

fn lambda_w_parts(st: &ModelState, h: usize, margin: Margin) -> (f64, &[f64], &[f64]) {
    let s = &st.shrink;
    match margin {
        Margin::Row => (s.lambda1[h], &s.w1[h], &st.components[h].alpha1),
        Margin::Col => (s.lambda2[h], &s.w2[h], &st.components[h].alpha2),
        Margin::Lag => panic!("the lag margin has no double-Pareto rate"),
    }
}

/// Log density of the composed `(λ, W)` block: `λ` from its collapsed
/// conditional, then `W_k | λ ~ Gig(1/2, λ², α_k²/(φτ))`.
pub fn log_cond_lambda_w(st: &ModelState, hp: &HyperParams, h: usize, margin: Margin) -> f64 {
    let psi = st.shrink.phi[h] * st.shrink.tau;
    let (lam, w, alpha) = lambda_w_parts(st, h, margin);
    let (shape, rate) = lambda_params(hp, alpha, psi);
    let mut lp = ln_gamma_pdf(lam, shape, rate);
    for (wk, a) in w.iter().zip(alpha) {
        lp += ln_gig_half(*wk, lam * lam, a * a / psi);
    }
    lp
}

pub fn update_lambda_w12<R: Rng + ?Sized>(
    st: &mut ModelState,
    hp: &HyperParams,
    rng: &mut R,
) -> Result<()> {
    for h in 0..st.components.len() {
        let psi = st.shrink.phi[h] * st.shrink.tau;
        for m in [Margin::Row, Margin::Col] {
            let alpha = margin_values(&st.components[h], m).to_vec();
            let (shape, rate) = lambda_params(hp, &alpha, psi);
            let lam = sample_gamma(rng, shape, rate)?.max(f64::MIN_POSITIVE);
            let mut w = Vec::with_capacity(alpha.len());
            for a in &alpha {
                w.push(sample_gig(rng, 0.5, lam * lam, a * a / psi)?.max(f64::MIN_POSITIVE));
            }
            match m {
                Margin::Row => {
                    st.shrink.lambda1[h] = lam;
                    st.shrink.w1[h] = w;
                }
                _ => {
                    st.shrink.lambda2[h] = lam;
                    st.shrink.w2[h] = w;
                }
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Lag shrinkage

/// Beta parameters of `v_{h,k}`: `(β1 + #{z = k}, β2 + #{z > k})`. The last
/// fraction is inert under truncation and keeps its prior.
pub fn v_params(hp: &HyperParams, z: &[usize], k: usize) -> (f64, f64) {
    if k + 1 >= z.len() {
        return (hp.beta1, hp.beta2);
    }
    let eq = z.iter().filter(|&&zj| zj == k).count() as f64;
    let gt = z.iter().filter(|&&zj| zj > k).count() as f64;
    (hp.beta1 + eq, hp.beta2 + gt)
}

pub fn log_cond_v(st: &ModelState, hp: &HyperParams, h: usize) -> f64 {
    let z = &st.shrink.z[h];
    st.shrink.v[h]
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let (a, b) = v_params(hp, z, k);
            ln_beta_pdf(*v, a, b)
        })
        .sum()
}

/// Log weights of `z_{h,j} = l` for `l ∈ 0..P`, with `W3` integrated out:
/// a Gaussian at variance `φτW∞` for the spike (`l <= j`), a Student-t with
/// `2a_w` degrees of freedom and squared scale `b_w φτ / a_w` for the slab.
pub fn z_log_weights(hp: &HyperParams, v: &[f64], alpha: f64, psi: f64, j: usize) -> Vec<f64> {
    let weights = truncated_stick_weights(v);
    let spike = ln_normal(alpha, 0.0, psi * hp.w_inf);
    let slab = ln_student_t(alpha, 2.0 * hp.a_w, hp.b_w * psi / hp.a_w);
    weights
        .iter()
        .enumerate()
        .map(|(l, w)| w.ln() + if l <= j { spike } else { slab })
        .collect()
}

/// Inverse-Gamma `(shape, scale)` of a slab `W3_{h,j}`.
pub fn w3_slab_params(hp: &HyperParams, alpha: f64, psi: f64) -> (f64, f64) {
    (hp.a_w + 0.5, hp.b_w + alpha * alpha / (2.0 * psi))
}

/// Log density of the composed `(z_h, W3_h)` block.
pub fn log_cond_z_w3(st: &ModelState, hp: &HyperParams, h: usize) -> f64 {
    let s = &st.shrink;
    let psi = s.phi[h] * s.tau;
    let mut lp = 0.0;
    for j in 0..hp.p {
        let a = st.components[h].alpha3[j];
        let lw = z_log_weights(hp, &s.v[h], a, psi, j);
        let z = s.z[h][j];
        lp += lw[z] - log_sum_exp(&lw);
        if z > j {
            let (sh, sc) = w3_slab_params(hp, a, psi);
            lp += ln_inv_gamma_pdf(s.w3[h][j], sh, sc);
        }
    }
    lp
}

/// `v | z`, then `(z, W3) | v, α3`, for every component.
pub fn update_lag_shrinkage<R: Rng + ?Sized>(
    st: &mut ModelState,
    hp: &HyperParams,
    rng: &mut R,
) -> Result<()> {
    for h in 0..st.components.len() {
        for k in 0..hp.p {
            let (a, b) = v_params(hp, &st.shrink.z[h], k);
            st.shrink.v[h][k] = clamp_open_unit(sample_beta(rng, a, b)?);
        }
        let psi = st.shrink.phi[h] * st.shrink.tau;
        for j in 0..hp.p {
            let a = st.components[h].alpha3[j];
            let z = sample_log_categorical(rng, &z_log_weights(hp, &st.shrink.v[h], a, psi, j))?;
            st.shrink.z[h][j] = z;
            st.shrink.w3[h][j] = if z <= j {
                hp.w_inf
            } else {
                let (sh, sc) = w3_slab_params(hp, a, psi);
                sample_inv_gamma(rng, sh, sc)?.max(f64::MIN_POSITIVE)
            };
        }
    }
    Ok(())
}
