//! Likelihood bookkeeping shared by the conditional updates.

use crate::model::{TensorComponent, TimeSeries};
use crate::ActivationPath;

/// Read-only view of a series as a VAR(P) regression over `t = P..T`.
#[derive(Debug, Clone, Copy)]
pub struct Design<'a> {
    pub y: &'a TimeSeries,
    pub p: usize,
}

impl<'a> Design<'a> {
    pub fn new(y: &'a TimeSeries, p: usize) -> Self {
        Design { y, p }
    }

    pub fn n(&self) -> usize {
        self.y.n()
    }

    /// Number of modelled time points, `T - P`.
    pub fn len(&self) -> usize {
        self.y.len() - self.p
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Response at path index `l`.
    #[inline]
    pub fn target(&self, l: usize) -> &'a [f64] {
        self.y.row(l + self.p)
    }

    /// Regressor at path index `l` and 0-based lag `j` (that is, `y_{t-j-1}`).
    #[inline]
    pub fn lagged(&self, l: usize, j: usize) -> &'a [f64] {
        self.y.row(l + self.p - 1 - j)
    }

    /// `q_{l,j} = α2ᵀ y_{t-j-1}` stored row-major `L × P`.
    pub fn lag_projections(&self, alpha2: &[f64]) -> Vec<f64> {
        let (l_len, p) = (self.len(), self.p);
        let mut q = vec![0.0; l_len * p];
        for l in 0..l_len {
            for j in 0..p {
                q[l * p + j] = dot(alpha2, self.lagged(l, j));
            }
        }
        q
    }

    /// `u_l = Σ_j α3_j y_{t-j-1}` stored row-major `L × N`.
    pub fn lag_mixtures(&self, alpha3: &[f64]) -> Vec<f64> {
        let (l_len, n) = (self.len(), self.n());
        let mut u = vec![0.0; l_len * n];
        for l in 0..l_len {
            let row = &mut u[l * n..(l + 1) * n];
            for (j, a) in alpha3.iter().enumerate() {
                if *a == 0.0 {
                    continue;
                }
                for (r, y) in row.iter_mut().zip(self.lagged(l, j)) {
                    *r += a * y;
                }
            }
        }
        u
    }

    /// `s_l = α2ᵀ (Σ_j α3_j y_{t-j-1})`, the scalar loading of component `c` at `l`.
    pub fn scores(&self, c: &TensorComponent) -> Vec<f64> {
        let q = self.lag_projections(&c.alpha2);
        let p = self.p;
        (0..self.len())
            .map(|l| dot(&c.alpha3, &q[l * p..(l + 1) * p]))
            .collect()
    }

    /// Residuals `y_t - Σ_h γ_{h,t} s_{h,t} α1_h`, row-major `L × N`.
    pub fn residuals(&self, components: &[TensorComponent], paths: &[ActivationPath]) -> Vec<f64> {
        self.residuals_without(components, paths, None)
    }

    /// Residuals with component `skip` left out of the mean.
    pub fn residuals_without(
        &self,
        components: &[TensorComponent],
        paths: &[ActivationPath],
        skip: Option<usize>,
    ) -> Vec<f64> {
        let (l_len, n) = (self.len(), self.n());
        let mut r = Vec::with_capacity(l_len * n);
        for l in 0..l_len {
            r.extend_from_slice(self.target(l));
        }
        for (h, (c, path)) in components.iter().zip(paths).enumerate() {
            if Some(h) != skip {
                subtract_component(&mut r, self, c, path, 1.0);
            }
        }
        r
    }
}

/// `r_l -= sign · γ_l s_l α1` for every `l`.
pub fn subtract_component(
    r: &mut [f64],
    d: &Design<'_>,
    c: &TensorComponent,
    path: &ActivationPath,
    sign: f64,
) {
    let n = d.n();
    let s = d.scores(c);
    for (l, (&g, sl)) in path.gamma.iter().zip(&s).enumerate() {
        if !g || *sl == 0.0 {
            continue;
        }
        let k = sign * sl;
        for (ri, a) in r[l * n..(l + 1) * n].iter_mut().zip(&c.alpha1) {
            *ri -= k * a;
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gaussian log likelihood of the residual matrix under `diag(σ²)`.
pub fn residual_loglik(r: &[f64], sigma2: &[f64]) -> f64 {
    let n = sigma2.len();
    let l_len = r.len() / n;
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    let mut ll = -0.5 * l_len as f64 * sigma2.iter().map(|s| ln2pi + s.ln()).sum::<f64>();
    for row in r.chunks_exact(n) {
        for (e, s) in row.iter().zip(sigma2) {
            ll -= e * e / (2.0 * s);
        }
    }
    ll
}
