//! Shrinkage hierarchy on the tensor margins.
//!
//! Row and column margins get a multiway Dirichlet generalized double Pareto
//! prior; the lag margin gets a cumulative spike-and-slab whose spike
//! probability grows with the lag:
//!
//! ```text
//! α1_h ~ N(0, φ_h τ diag(W1_h))      W1_hk ~ Exp(λ1_h² / 2)    λ1_h ~ Ga(a_λ, b_λ)
//! α2_h ~ N(0, φ_h τ diag(W2_h))      W2_hk ~ Exp(λ2_h² / 2)    λ2_h ~ Ga(a_λ, b_λ)
//! α3_h ~ N(0, φ_h τ diag(W3_h))
//! W3_hj = W∞ if z_hj <= j, else W3_hj ~ InvGa(a_w, b_w)
//! P(z_hj = l) = w_hl = v_hl Π_{m<l} (1 - v_hm),   v_hl ~ Beta(β1, β2)
//! φ ~ Dirichlet(α, …, α),  τ ~ Ga(Hα, b_τ)
//! ```
//!
//! Lag indices are 0-based. `z_hj` takes values `0..=P`, where `P` is the
//! residual stick `Π_l (1 - v_hl)` (slab at every lag).

use rand::Rng;

use crate::dist::{
    ln_beta_pdf, ln_dirichlet_sym, ln_exponential_pdf, ln_gamma_pdf, ln_inv_gamma_pdf, ln_normal,
    sample_beta, sample_gamma, sample_inv_gamma, sample_normal,
};
use crate::error::{Error, Result};
use crate::model::TensorComponent;

/// Admissible box for one component's `(θ, κ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsingBox {
    pub theta_min: f64,
    pub theta_max: f64,
    pub kappa_max: f64,
}

impl IsingBox {
    pub fn contains(&self, theta: f64, kappa: f64) -> bool {
        (self.theta_min..=self.theta_max).contains(&theta) && (0.0..=self.kappa_max).contains(&kappa)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    /// Observation dimension.
    pub n: usize,
    /// Fitted VAR order.
    pub p: usize,
    /// Fitted number of tensor components.
    pub h: usize,
    pub a_lambda: f64,
    pub b_lambda: f64,
    pub b_tau: f64,
    /// Candidate Dirichlet concentrations; `a_τ = H·α` for the selected point.
    pub alpha_grid: Vec<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub a_w: f64,
    pub b_w: f64,
    pub w_inf: f64,
    pub a_sigma: f64,
    pub b_sigma: f64,
    /// One box per component.
    pub ising_boxes: Vec<IsingBox>,
}

impl HyperParams {
    /// Defaults used in the simulation studies: `a_λ = 3`, `b_λ = 3^{1/6}`,
    /// `b_τ = H⁴`, `β = (1, 5)`, `a_w = b_w = 2`, `W∞ = 0.01`, `a_σ = b_σ = 1`,
    /// `θ ∈ [-4, 4]`, `κ ∈ [0, 4]`, and ten grid points evenly spaced on
    /// `[H⁻³, H^{-0.1}]`.
    pub fn defaults(n: usize, p: usize, h: usize) -> Self {
        let hf = h as f64;
        HyperParams {
            n,
            p,
            h,
            a_lambda: 3.0,
            b_lambda: 3f64.powf(1.0 / 6.0),
            b_tau: hf.powi(4),
            alpha_grid: even_grid(hf.powf(-3.0), hf.powf(-0.1), 10),
            beta1: 1.0,
            beta2: 5.0,
            a_w: 2.0,
            b_w: 2.0,
            w_inf: 0.01,
            a_sigma: 1.0,
            b_sigma: 1.0,
            ising_boxes: vec![
                IsingBox {
                    theta_min: -4.0,
                    theta_max: 4.0,
                    kappa_max: 4.0,
                };
                h
            ],
        }
    }

    /// Gamma shape of τ for concentration `alpha`.
    pub fn a_tau(&self, alpha: f64) -> f64 {
        self.h as f64 * alpha
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("a_lambda", self.a_lambda),
            ("b_lambda", self.b_lambda),
            ("b_tau", self.b_tau),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("a_w", self.a_w),
            ("b_w", self.b_w),
            ("w_inf", self.w_inf),
            ("a_sigma", self.a_sigma),
            ("b_sigma", self.b_sigma),
        ];
        for (name, v) in pos {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.n == 0 || self.p == 0 || self.h == 0 {
            return Err(Error::Config("N, P and H must be positive".into()));
        }
        if self.alpha_grid.is_empty() || self.alpha_grid.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::Config("alpha grid must be non-empty and positive".into()));
        }
        if self.ising_boxes.len() != self.h {
            return Err(Error::Config(format!(
                "{} Ising boxes for H={}",
                self.ising_boxes.len(),
                self.h
            )));
        }
        for b in &self.ising_boxes {
            if !(b.theta_min <= b.theta_max && b.kappa_max >= 0.0) {
                return Err(Error::Config(format!("invalid Ising box {b:?}")));
            }
        }
        Ok(())
    }
}

/// `count` evenly spaced points on `[lo, hi]`; a single point when `lo == hi`.
pub fn even_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 || lo == hi {
        return vec![lo];
    }
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkageState {
    pub tau: f64,
    /// Local scales on the simplex.
    pub phi: Vec<f64>,
    /// Double-Pareto rates, one per component and margin.
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub w1: Vec<Vec<f64>>,
    pub w2: Vec<Vec<f64>>,
    pub w3: Vec<Vec<f64>>,
    /// Spike assignments in `0..P`; lag `j` is in the spike iff `z <= j`.
    pub z: Vec<Vec<usize>>,
    pub v: Vec<Vec<f64>>,
}

impl ShrinkageState {
    pub fn validate(&self, hp: &HyperParams) -> Result<()> {
        let (n, p, h) = (hp.n, hp.p, hp.h);
        let shapes_ok = self.phi.len() == h
            && self.lambda1.len() == h
            && self.lambda2.len() == h
            && [&self.w1, &self.w2].iter().all(|w| w.len() == h && w.iter().all(|r| r.len() == n))
            && [&self.w3, &self.v].iter().all(|w| w.len() == h && w.iter().all(|r| r.len() == p))
            && self.z.len() == h
            && self.z.iter().all(|r| r.len() == p);
        if !shapes_ok {
            return Err(Error::Shape("shrinkage state does not match (N, P, H)".into()));
        }
        let sum: f64 = self.phi.iter().sum();
        if (sum - 1.0).abs() > 1e-12 || self.phi.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::Domain(format!("φ is off the simplex (sum {sum})")));
        }
        let positive = |xs: &[f64]| xs.iter().all(|x| *x > 0.0 && x.is_finite());
        if !(self.tau > 0.0 && self.tau.is_finite())
            || !positive(&self.lambda1)
            || !positive(&self.lambda2)
            || !self.w1.iter().chain(&self.w2).chain(&self.w3).all(|r| positive(r))
        {
            return Err(Error::Domain("scale parameters must be positive and finite".into()));
        }
        if !self.v.iter().flatten().all(|v| *v > 0.0 && *v < 1.0) {
            return Err(Error::Domain("stick-breaking fractions must lie in (0, 1)".into()));
        }
        for (zh, w3h) in self.z.iter().zip(&self.w3) {
            for (j, (&z, &w)) in zh.iter().zip(w3h).enumerate() {
                if z >= p {
                    return Err(Error::Domain(format!("spike assignment {z} is not below P={p}")));
                }
                if z <= j && w != hp.w_inf {
                    return Err(Error::Domain(format!(
                        "lag {j} is assigned to the spike but W3={w} differs from W∞"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Stick-breaking weights `w_j = v_j Π_{l<j} (1 - v_l)`.
pub fn stick_break_weights(v: &[f64]) -> Vec<f64> {
    let mut rest = 1.0;
    v.iter()
        .map(|&vj| {
            let w = vj * rest;
            rest *= 1.0 - vj;
            w
        })
        .collect()
}

/// Truncated stick weights: the last stick takes the remaining mass, so the
/// weights sum to one and the final fraction `v_P` does not enter. The last
/// lag is therefore always in the spike.
pub fn truncated_stick_weights(v: &[f64]) -> Vec<f64> {
    let mut w = stick_break_weights(v);
    if let Some(last) = w.len().checked_sub(1) {
        w[last] = v[..last].iter().map(|vj| 1.0 - vj).product();
    }
    w
}

/// Draws `(z, W3)` for one component with `z` proportional to the weights
/// over `0..P`.
pub fn sample_w3_prior<R: Rng + ?Sized>(
    hp: &HyperParams,
    w: &[f64],
    rng: &mut R,
) -> Result<(Vec<usize>, Vec<f64>)> {
    let p = w.len();
    let total: f64 = w.iter().sum();
    if !(total > 0.0) || w.iter().any(|x| !(*x >= 0.0)) {
        return Err(Error::Domain("stick weights must be nonnegative with positive mass".into()));
    }
    let mut z = Vec::with_capacity(p);
    let mut w3 = Vec::with_capacity(p);
    for j in 0..p {
        let mut u = rng.random::<f64>() * total;
        let mut zj = p - 1;
        for (l, wl) in w.iter().enumerate() {
            if u < *wl {
                zj = l;
                break;
            }
            u -= wl;
        }
        z.push(zj);
        w3.push(if zj <= j {
            hp.w_inf
        } else {
            sample_inv_gamma(rng, hp.a_w, hp.b_w)?
        });
    }
    Ok((z, w3))
}

/// Draws component `h`'s margins from `N(0, φ_h τ W)`.
pub fn sample_prior_component<R: Rng + ?Sized>(
    hp: &HyperParams,
    s: &ShrinkageState,
    h: usize,
    rng: &mut R,
) -> TensorComponent {
    let scale = s.phi[h] * s.tau;
    let mut draw = |w: &[f64]| -> Vec<f64> {
        w.iter()
            .map(|wk| sample_normal(rng, 0.0, (scale * wk).sqrt()))
            .collect()
    };
    let a1 = draw(&s.w1[h]);
    let a2 = draw(&s.w2[h]);
    let a3 = draw(&s.w3[h]);
    debug_assert_eq!(a1.len(), hp.n);
    TensorComponent {
        alpha1: a1,
        alpha2: a2,
        alpha3: a3,
    }
}

/// Draws the whole shrinkage state from its prior at concentration `alpha`.
pub fn sample_prior_shrinkage<R: Rng + ?Sized>(
    hp: &HyperParams,
    alpha: f64,
    rng: &mut R,
) -> Result<ShrinkageState> {
    let (n, p, h) = (hp.n, hp.p, hp.h);
    // ψ_h ~ Ga(α, b_τ) i.i.d. gives φ ~ Dir(α) and τ ~ Ga(Hα, b_τ) independently.
    let mut psi = Vec::with_capacity(h);
    for _ in 0..h {
        psi.push(sample_gamma(rng, alpha, hp.b_tau)?.max(f64::MIN_POSITIVE));
    }
    let tau: f64 = psi.iter().sum();
    let mut phi: Vec<f64> = psi.iter().map(|x| x / tau).collect();
    renormalize(&mut phi);

    let mut lambda1 = Vec::with_capacity(h);
    let mut lambda2 = Vec::with_capacity(h);
    let mut w1 = Vec::with_capacity(h);
    let mut w2 = Vec::with_capacity(h);
    let mut w3 = Vec::with_capacity(h);
    let mut z = Vec::with_capacity(h);
    let mut v = Vec::with_capacity(h);
    for _ in 0..h {
        let l1 = sample_gamma(rng, hp.a_lambda, hp.b_lambda)?;
        let l2 = sample_gamma(rng, hp.a_lambda, hp.b_lambda)?;
        let mut exp_row = |lam: f64| -> Result<Vec<f64>> {
            (0..n)
                .map(|_| sample_gamma(rng, 1.0, lam * lam / 2.0).map(|x| x.max(f64::MIN_POSITIVE)))
                .collect()
        };
        w1.push(exp_row(l1)?);
        w2.push(exp_row(l2)?);
        lambda1.push(l1);
        lambda2.push(l2);
        let vh: Vec<f64> = (0..p)
            .map(|_| sample_beta(rng, hp.beta1, hp.beta2).map(clamp_open_unit))
            .collect::<Result<_>>()?;
        let (zh, w3h) = sample_w3_prior(hp, &truncated_stick_weights(&vh), rng)?;
        v.push(vh);
        z.push(zh);
        w3.push(w3h);
    }
    Ok(ShrinkageState {
        tau,
        phi,
        lambda1,
        lambda2,
        w1,
        w2,
        w3,
        z,
        v,
    })
}

/// Rescales onto the simplex, correcting the last entry for rounding.
pub fn renormalize(phi: &mut [f64]) {
    let s: f64 = phi.iter().sum();
    phi.iter_mut().for_each(|x| *x /= s);
    let h = phi.len();
    if h > 1 {
        let head: f64 = phi[..h - 1].iter().sum();
        let last = 1.0 - head;
        if last > 0.0 {
            phi[h - 1] = last;
        }
    }
}

pub(crate) fn clamp_open_unit(x: f64) -> f64 {
    x.clamp(f64::EPSILON, 1.0 - f64::EPSILON)
}

/// Log density of the Gaussian margins given the scales, `log p(A | φ, τ, W)`.
pub fn log_margin_density(state: &ShrinkageState, components: &[TensorComponent]) -> f64 {
    let mut lp = 0.0;
    for (h, c) in components.iter().enumerate() {
        let scale = state.phi[h] * state.tau;
        for (a, w) in c.alpha1.iter().zip(&state.w1[h]) {
            lp += ln_normal(*a, 0.0, scale * w);
        }
        for (a, w) in c.alpha2.iter().zip(&state.w2[h]) {
            lp += ln_normal(*a, 0.0, scale * w);
        }
        for (a, w) in c.alpha3.iter().zip(&state.w3[h]) {
            lp += ln_normal(*a, 0.0, scale * w);
        }
    }
    lp
}

/// Joint log density of `(τ, φ, λ, W, z, v, α-margins)` at concentration
/// `alpha`. The spike `W3 = W∞` is a point mass and contributes zero.
pub fn log_prior_density(
    state: &ShrinkageState,
    components: &[TensorComponent],
    hp: &HyperParams,
    alpha: f64,
) -> Result<f64> {
    state.validate(hp)?;
    if components.len() != hp.h {
        return Err(Error::Shape(format!(
            "{} components for H={}",
            components.len(),
            hp.h
        )));
    }
    for c in components {
        c.validate(hp.n, hp.p)?;
    }
    let mut lp = ln_gamma_pdf(state.tau, hp.a_tau(alpha), hp.b_tau);
    lp += ln_dirichlet_sym(&state.phi, alpha);
    for h in 0..hp.h {
        for (lam, w) in [
            (state.lambda1[h], &state.w1[h]),
            (state.lambda2[h], &state.w2[h]),
        ] {
            lp += ln_gamma_pdf(lam, hp.a_lambda, hp.b_lambda);
            lp += w.iter().map(|x| ln_exponential_pdf(*x, lam * lam / 2.0)).sum::<f64>();
        }
        let weights = truncated_stick_weights(&state.v[h]);
        for j in 0..hp.p {
            lp += ln_beta_pdf(state.v[h][j], hp.beta1, hp.beta2);
            let z = state.z[h][j];
            lp += weights[z].ln();
            if z > j {
                lp += ln_inv_gamma_pdf(state.w3[h][j], hp.a_w, hp.b_w);
            }
        }
    }
    lp += log_margin_density(state, components);
    if !lp.is_finite() {
        return Err(Error::Numerical("prior density is not finite".into()));
    }
    Ok(lp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn state_for(hp: &HyperParams, rng: &mut ChaCha8Rng) -> ShrinkageState {
        sample_prior_shrinkage(hp, 0.5, rng).unwrap()
    }

    #[test]
    fn defaults_match_study_settings() {
        let hp = HyperParams::defaults(10, 4, 4);
        assert_eq!(hp.b_tau, 256.0);
        assert_eq!(hp.alpha_grid.len(), 10);
        assert!((hp.alpha_grid[0] - 4f64.powi(-3)).abs() < 1e-15);
        assert!((hp.alpha_grid[9] - 4f64.powf(-0.1)).abs() < 1e-15);
        assert!((hp.b_lambda.powi(6) - 3.0).abs() < 1e-12);
        hp.validate().unwrap();
    }

    #[test]
    fn stick_breaking_examples() {
        assert_eq!(stick_break_weights(&[1.0, 0.3, 0.6]), vec![1.0, 0.0, 0.0]);
        assert_eq!(stick_break_weights(&[0.5, 0.5, 0.5]), vec![0.5, 0.25, 0.125]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let v: Vec<f64> = (0..6).map(|_| rng.random_range(0.001..0.999)).collect();
            let w = stick_break_weights(&v);
            assert!(w.iter().all(|x| *x >= 0.0));
            assert!(w.iter().sum::<f64>() <= 1.0 + 1e-15);
            let mut cum = 0.0;
            let mut prev = 0.0;
            for x in &w {
                cum += x;
                assert!(cum >= prev);
                prev = cum;
            }
        }
    }

    #[test]
    fn all_spike_when_first_stick_is_full() {
        let hp = HyperParams::defaults(3, 4, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let (z, w3) = sample_w3_prior(&hp, &[1.0, 0.0, 0.0, 0.0], &mut rng).unwrap();
            assert!(z.iter().all(|&zj| zj == 0));
            assert!(w3.iter().all(|&w| w == hp.w_inf));
        }
    }

    #[test]
    fn late_stick_leaves_early_lags_in_slab() {
        let hp = HyperParams::defaults(3, 4, 1);
        let eps = 1e-6;
        let w = stick_break_weights(&[eps, eps, eps, 1.0 - eps]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut slab_early = 0;
        for _ in 0..1000 {
            let (z, _) = sample_w3_prior(&hp, &w, &mut rng).unwrap();
            slab_early += (0..3).filter(|&j| z[j] > j).count();
        }
        assert!(slab_early as f64 / 3000.0 > 0.99);
    }

    #[test]
    fn spike_frequency_matches_cumulative_weights() {
        let hp = HyperParams::defaults(3, 5, 1);
        let v = [0.2, 0.3, 0.1, 0.4, 0.25];
        let w = truncated_stick_weights(&v);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 100_000;
        let mut hits = [0usize; 5];
        for _ in 0..n {
            let (z, _) = sample_w3_prior(&hp, &w, &mut rng).unwrap();
            for j in 0..5 {
                hits[j] += (z[j] <= j) as usize;
            }
        }
        let mut prev = 0.0;
        for j in 0..5 {
            let p: f64 = w[..=j].iter().sum();
            let freq = hits[j] as f64 / n as f64;
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((freq - p).abs() <= 3.0 * sd + 1e-12, "lag {j}: {freq} vs {p}");
            assert!(freq >= prev - 3.0 * sd);
            prev = freq;
        }
    }

    #[test]
    fn component_prior_moments_and_limits() {
        let hp = HyperParams::defaults(3, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut s = state_for(&hp, &mut rng);
        s.tau = 2.0;
        s.phi = vec![0.3, 0.7];
        s.w1[0] = vec![0.5, 1.5, 3.0];
        let n = 100_000;
        let mut sq = [0.0; 3];
        for _ in 0..n {
            let c = sample_prior_component(&hp, &s, 0, &mut rng);
            for k in 0..3 {
                sq[k] += c.alpha1[k] * c.alpha1[k];
            }
        }
        for k in 0..3 {
            let expect = 0.3 * 2.0 * s.w1[0][k];
            assert!((sq[k] / n as f64 - expect).abs() / expect < 0.05);
        }

        s.tau = 1e-16;
        s.phi = vec![0.5, 0.5];
        let c = sample_prior_component(&hp, &s, 1, &mut rng);
        assert!(c.alpha1.iter().chain(&c.alpha2).chain(&c.alpha3).all(|x| x.abs() < 1e-6));

        let a = sample_prior_component(&hp, &s, 1, &mut ChaCha8Rng::seed_from_u64(9));
        let b = sample_prior_component(&hp, &s, 1, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn prior_density_errors_and_factorization() {
        let hp = HyperParams::defaults(3, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = state_for(&hp, &mut rng);
        let comps: Vec<_> = (0..2).map(|h| sample_prior_component(&hp, &s, h, &mut rng)).collect();
        let base = log_prior_density(&s, &comps, &hp, 0.5).unwrap();

        let mut off = s.clone();
        off.phi[0] += 0.01;
        assert!(matches!(
            log_prior_density(&off, &comps, &hp, 0.5),
            Err(Error::Domain(_))
        ));

        // only α1[1][2] changes: the difference is the Gaussian ratio
        let mut comps2 = comps.clone();
        comps2[1].alpha1[2] += 0.37;
        let var = s.phi[1] * s.tau * s.w1[1][2];
        let expect = ln_normal(comps2[1].alpha1[2], 0.0, var) - ln_normal(comps[1].alpha1[2], 0.0, var);
        let got = log_prior_density(&s, &comps2, &hp, 0.5).unwrap() - base;
        assert!((got - expect).abs() < 1e-10);
    }

    #[test]
    fn prior_density_tau_doubling() {
        let hp = HyperParams::defaults(3, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = state_for(&hp, &mut rng);
        let comps: Vec<_> = (0..2).map(|h| sample_prior_component(&hp, &s, h, &mut rng)).collect();
        let alpha = 0.5;
        let mut s2 = s.clone();
        s2.tau *= 2.0;
        let got = log_prior_density(&s2, &comps, &hp, alpha).unwrap()
            - log_prior_density(&s, &comps, &hp, alpha).unwrap();
        // Gamma term plus Gaussian terms, written out from the closed forms
        let a_tau = 2.0 * alpha;
        let mut expect = (a_tau - 1.0) * 2f64.ln() - hp.b_tau * s.tau;
        let dims = (2 * hp.n + hp.p) as f64;
        for h in 0..2 {
            let c = &comps[h];
            let quad: f64 = c.alpha1.iter().zip(&s.w1[h]).map(|(a, w)| a * a / w).sum::<f64>()
                + c.alpha2.iter().zip(&s.w2[h]).map(|(a, w)| a * a / w).sum::<f64>()
                + c.alpha3.iter().zip(&s.w3[h]).map(|(a, w)| a * a / w).sum::<f64>();
            let sc = s.phi[h] * s.tau;
            expect += -0.5 * dims * 2f64.ln() - quad / (2.0 * sc) * (0.5 - 1.0);
        }
        assert!((got - expect).abs() < 1e-9, "{got} vs {expect}");
    }
}
