//! Time-varying tensor VAR structure.
//!
//! The coefficient matrices at time `t` are a binary mixture of rank-1 bases:
//!
//! ```text
//! y_t = Σ_j A_{j,t} y_{t-j} + ε_t,        ε_t ~ N(0, diag(σ²))
//! A_{j,t} = Σ_h γ_{h,t} A*_{j,h}
//! A*_{j,h} = α3_h[j] · α1_h α2_hᵀ
//! ```
//!
//! Time indices are 0-based throughout the crate: series row `t` is valid for
//! prediction when `t >= P`, and activation paths are indexed by `t - P`.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Margin on the unit circle used by [`is_stationary`].
pub const STATIONARITY_EPS: f64 = 1e-8;

/// One rank-1 PARAFAC base `α1 ∘ α2 ∘ α3`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorComponent {
    /// Row margin (length N).
    pub alpha1: Vec<f64>,
    /// Column margin (length N).
    pub alpha2: Vec<f64>,
    /// Lag margin (length P).
    pub alpha3: Vec<f64>,
}

impl TensorComponent {
    pub fn new(alpha1: Vec<f64>, alpha2: Vec<f64>, alpha3: Vec<f64>) -> Result<Self> {
        let c = TensorComponent {
            alpha1,
            alpha2,
            alpha3,
        };
        c.validate(c.alpha1.len(), c.alpha3.len())?;
        Ok(c)
    }

    pub fn zeros(n: usize, p: usize) -> Self {
        TensorComponent {
            alpha1: vec![0.0; n],
            alpha2: vec![0.0; n],
            alpha3: vec![0.0; p],
        }
    }

    pub fn n(&self) -> usize {
        self.alpha1.len()
    }

    pub fn p(&self) -> usize {
        self.alpha3.len()
    }

    pub fn validate(&self, n: usize, p: usize) -> Result<()> {
        if self.alpha1.len() != n || self.alpha2.len() != n || self.alpha3.len() != p {
            return Err(Error::Shape(format!(
                "component margins have lengths ({}, {}, {}), expected ({n}, {n}, {p})",
                self.alpha1.len(),
                self.alpha2.len(),
                self.alpha3.len()
            )));
        }
        let finite = self
            .alpha1
            .iter()
            .chain(&self.alpha2)
            .chain(&self.alpha3)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Domain("component has non-finite entries".into()));
        }
        Ok(())
    }

    /// The P coefficient matrices `A*_j = α3[j] · α1 α2ᵀ`.
    pub fn matricize(&self) -> CoefMatrixSet {
        let n = self.n();
        let p = self.p();
        let mut out = CoefMatrixSet::zeros(n, p);
        self.accumulate_into(&mut out, 1.0);
        out
    }

    /// Adds `weight · A*_j` to every matrix of `target`.
    pub fn accumulate_into(&self, target: &mut CoefMatrixSet, weight: f64) {
        let n = self.n();
        for (j, &a3) in self.alpha3.iter().enumerate() {
            let s = weight * a3;
            if s == 0.0 {
                continue;
            }
            let m = target.matrix_slice_mut(j);
            for (i, &a1) in self.alpha1.iter().enumerate() {
                let row = &mut m[i * n..(i + 1) * n];
                let si = s * a1;
                for (dst, &a2) in row.iter_mut().zip(&self.alpha2) {
                    *dst += si * a2;
                }
            }
        }
    }
}

/// P dense N×N matrices `[A_1, …, A_P]`, stored row-major one after another.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefMatrixSet {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl CoefMatrixSet {
    pub fn zeros(n: usize, p: usize) -> Self {
        CoefMatrixSet {
            n,
            p,
            data: vec![0.0; n * n * p],
        }
    }

    pub fn from_matrices(matrices: &[DMatrix<f64>]) -> Result<Self> {
        let p = matrices.len();
        let n = matrices.first().map_or(0, |m| m.nrows());
        let mut out = CoefMatrixSet::zeros(n, p);
        for (j, m) in matrices.iter().enumerate() {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::Shape(format!(
                    "lag {} matrix is {}x{}, expected {n}x{n}",
                    j + 1,
                    m.nrows(),
                    m.ncols()
                )));
            }
            for i in 0..n {
                for k in 0..n {
                    out.set(j, i, k, m[(i, k)]);
                }
            }
        }
        if !out.data.iter().all(|v| v.is_finite()) {
            return Err(Error::Domain("coefficient matrices contain non-finite entries".into()));
        }
        Ok(out)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, lag: usize, i: usize, k: usize) -> f64 {
        self.data[(lag * self.n + i) * self.n + k]
    }

    #[inline]
    pub fn set(&mut self, lag: usize, i: usize, k: usize, v: f64) {
        self.data[(lag * self.n + i) * self.n + k] = v;
    }

    /// Row-major entries of lag matrix `lag` (0-based).
    pub fn matrix_slice(&self, lag: usize) -> &[f64] {
        let nn = self.n * self.n;
        &self.data[lag * nn..(lag + 1) * nn]
    }

    pub fn matrix_slice_mut(&mut self, lag: usize) -> &mut [f64] {
        let nn = self.n * self.n;
        &mut self.data[lag * nn..(lag + 1) * nn]
    }

    pub fn matrix(&self, lag: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, self.matrix_slice(lag))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn add_assign(&mut self, other: &CoefMatrixSet) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    /// Frobenius norm of lag matrix `lag`.
    pub fn frobenius(&self, lag: usize) -> f64 {
        self.matrix_slice(lag).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest absolute entry over every lag.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Copy with `p_new` lags, truncating or zero-padding the lag mode.
    pub fn with_lags(&self, p_new: usize) -> CoefMatrixSet {
        let mut out = CoefMatrixSet::zeros(self.n, p_new);
        let nn = self.n * self.n;
        let keep = self.p.min(p_new) * nn;
        out.data[..keep].copy_from_slice(&self.data[..keep]);
        out
    }
}

/// Binary activation series for one component, indexed `0..T-P`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationPath {
    pub gamma: Vec<bool>,
}

impl ActivationPath {
    pub fn new(gamma: Vec<bool>) -> Self {
        ActivationPath { gamma }
    }

    pub fn constant(len: usize, value: bool) -> Self {
        ActivationPath {
            gamma: vec![value; len],
        }
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    pub fn active_fraction(&self) -> f64 {
        if self.gamma.is_empty() {
            return 0.0;
        }
        self.gamma.iter().filter(|&&g| g).count() as f64 / self.gamma.len() as f64
    }
}

/// T×N observations, rows are time points.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    n: usize,
    t_len: usize,
    values: Vec<f64>,
    names: Vec<String>,
}

impl TimeSeries {
    /// Builds a series from row-major values; names default to `y1..yN`.
    pub fn from_rows(n: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || values.len() % n != 0 {
            return Err(Error::Shape(format!(
                "{} values cannot form rows of width {n}",
                values.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::Domain("time series contains non-finite values".into()));
        }
        let t_len = values.len() / n;
        let names = (1..=n).map(|i| format!("y{i}")).collect();
        Ok(TimeSeries {
            n,
            t_len,
            values,
            names,
        })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n {
            return Err(Error::Shape(format!(
                "{} names for {} series",
                names.len(),
                self.n
            )));
        }
        self.names = names;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.t_len
    }

    pub fn is_empty(&self) -> bool {
        self.t_len == 0
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    #[inline]
    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.n..(t + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Checks the series is long enough for a VAR of order `p`.
    pub fn require_order(&self, p: usize) -> Result<()> {
        if self.t_len <= p {
            return Err(Error::Data(format!(
                "series has T={} rows, needs more than P={p}",
                self.t_len
            )));
        }
        Ok(())
    }
}

/// `A_{j,t} = Σ_h γ_{h,t} A*_{j,h}` for series row `t` (0-based, `t >= P`).
pub fn compose_time_coefficients(
    components: &[TensorComponent],
    paths: &[ActivationPath],
    t: usize,
) -> Result<CoefMatrixSet> {
    let (n, p) = shared_dims(components)?;
    if paths.len() != components.len() {
        return Err(Error::Shape(format!(
            "{} paths for {} components",
            paths.len(),
            components.len()
        )));
    }
    let mut out = CoefMatrixSet::zeros(n, p);
    for (c, path) in components.iter().zip(paths) {
        let idx = t
            .checked_sub(p)
            .filter(|&i| i < path.len())
            .ok_or_else(|| {
                Error::Range(format!(
                    "time index {t} outside [{p}, {})",
                    p + path.len()
                ))
            })?;
        if path.gamma[idx] {
            c.accumulate_into(&mut out, 1.0);
        }
    }
    Ok(out)
}

fn shared_dims(components: &[TensorComponent]) -> Result<(usize, usize)> {
    let first = components
        .first()
        .ok_or_else(|| Error::Shape("no components supplied".into()))?;
    let (n, p) = (first.n(), first.p());
    for c in components {
        c.validate(n, p)?;
    }
    Ok((n, p))
}

/// `Σ_j A_j y_{t-j}` where `history[0]` is `y_{t-1}`, `history[1]` is `y_{t-2}`, ….
pub fn var_predict(history: &[&[f64]], coefs: &CoefMatrixSet) -> Result<Vec<f64>> {
    let n = coefs.n();
    if history.len() != coefs.p() {
        return Err(Error::Shape(format!(
            "history has {} rows, coefficients have P={}",
            history.len(),
            coefs.p()
        )));
    }
    let mut out = vec![0.0; n];
    for (j, y) in history.iter().enumerate() {
        if y.len() != n {
            return Err(Error::Shape(format!(
                "history row {j} has length {}, expected {n}",
                y.len()
            )));
        }
        let m = coefs.matrix_slice(j);
        for (i, o) in out.iter_mut().enumerate() {
            *o += m[i * n..(i + 1) * n]
                .iter()
                .zip(y.iter())
                .map(|(a, b)| a * b)
                .sum::<f64>();
        }
    }
    Ok(out)
}

/// Simulates `t_len` rows of the TV-VAR.
///
/// Rows `0..P` are `y_init` when given, otherwise i.i.d. `N(0, σ_i²)`. All
/// randomness comes from a generator seeded with `seed`.
pub fn simulate_var(
    components: &[TensorComponent],
    paths: &[ActivationPath],
    sigma: &[f64],
    y_init: Option<&[Vec<f64>]>,
    t_len: usize,
    seed: u64,
) -> Result<TimeSeries> {
    let (n, p) = shared_dims(components)?;
    if sigma.len() != n {
        return Err(Error::Shape(format!(
            "sigma has length {}, expected {n}",
            sigma.len()
        )));
    }
    if let Some(bad) = sigma.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
        return Err(Error::Domain(format!("noise std-dev must be positive, got {bad}")));
    }
    if t_len <= p {
        return Err(Error::Domain(format!("T={t_len} must exceed P={p}")));
    }
    for path in paths {
        if path.len() != t_len - p {
            return Err(Error::Shape(format!(
                "activation path has length {}, expected T-P={}",
                path.len(),
                t_len - p
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![0.0; t_len * n];
    match y_init {
        Some(init) => {
            if init.len() != p || init.iter().any(|r| r.len() != n) {
                return Err(Error::Shape(format!("initial block must be {p}x{n}")));
            }
            for (t, row) in init.iter().enumerate() {
                values[t * n..(t + 1) * n].copy_from_slice(row);
            }
        }
        None => {
            for t in 0..p {
                for (i, s) in sigma.iter().enumerate() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    values[t * n + i] = s * z;
                }
            }
        }
    }

    for t in p..t_len {
        let coefs = compose_time_coefficients(components, paths, t)?;
        let pred = {
            let history: Vec<&[f64]> = (1..=p)
                .map(|j| &values[(t - j) * n..(t - j + 1) * n])
                .collect();
            var_predict(&history, &coefs)?
        };
        for (i, (mu, s)) in pred.iter().zip(sigma).enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            values[t * n + i] = mu + s * z;
        }
    }
    TimeSeries::from_rows(n, values)
}

/// NP×NP companion matrix of a VAR(P).
pub fn companion_matrix(coefs: &CoefMatrixSet) -> DMatrix<f64> {
    let n = coefs.n();
    let p = coefs.p();
    let np = n * p;
    let mut c = DMatrix::zeros(np, np);
    for j in 0..p {
        for i in 0..n {
            for k in 0..n {
                c[(i, j * n + k)] = coefs.get(j, i, k);
            }
        }
    }
    for r in n..np {
        c[(r, r - n)] = 1.0;
    }
    c
}

pub fn spectral_radius(coefs: &CoefMatrixSet) -> f64 {
    if coefs.n() == 0 || coefs.p() == 0 {
        return 0.0;
    }
    let c = companion_matrix(coefs);
    match c.clone().try_schur(f64::EPSILON, 100_000) {
        Some(schur) => schur
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max),
        None => gelfand_radius(c),
    }
}

/// `lim ‖C^k‖^{1/k}` by repeated squaring with renormalization; used when
/// the Schur iteration does not converge.
fn gelfand_radius(mut m: DMatrix<f64>) -> f64 {
    let mut log_scale = 0.0;
    let mut k = 1.0;
    for _ in 0..40 {
        let norm = m.norm();
        if norm == 0.0 {
            return 0.0;
        }
        m /= norm;
        log_scale += norm.ln();
        m = &m * &m;
        log_scale *= 2.0;
        k *= 2.0;
    }
    let norm = m.norm();
    if norm == 0.0 {
        return 0.0;
    }
    ((log_scale + norm.ln()) / k).exp()
}

/// True iff the companion spectral radius is below `1 - STATIONARITY_EPS`.
pub fn is_stationary(coefs: &CoefMatrixSet) -> bool {
    spectral_radius(coefs) < 1.0 - STATIONARITY_EPS
}
