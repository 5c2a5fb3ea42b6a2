//! Simulation designs and error metrics for the two simulation studies.

use rand::Rng;

use crate::dist::sample_normal;
use crate::error::{Error, Result};
use crate::gibbs::{summarize_gamma, FitResult};
use crate::ising::{ndarma_sample_path, NdarmaParams};
use crate::model::{
    compose_time_coefficients, is_stationary, simulate_var, ActivationPath, CoefMatrixSet,
    TensorComponent, TimeSeries,
};

/// Consecutive stationarity rejections tolerated by the generators.
pub const MAX_REJECTIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SimDesign {
    pub n: usize,
    pub t_len: usize,
    pub p: usize,
    pub h: usize,
    pub noise_sd: Vec<f64>,
    /// Probability that a margin entry is drawn from the N(0, 1) slab.
    pub inclusion: f64,
}

impl SimDesign {
    /// N = 10, T = 100, P = 3, H = 3, noise standard deviations 1/5, …, 10/5.
    pub fn study1() -> Self {
        SimDesign {
            n: 10,
            t_len: 100,
            p: 3,
            h: 3,
            noise_sd: (1..=10).map(|i| i as f64 / 5.0).collect(),
            inclusion: 0.5,
        }
    }

    /// N = 40, T = 300, P = 3, H = 3; noise variances i/5 for i ≤ 25 and
    /// (51 - i)/5 above.
    pub fn study2() -> Self {
        SimDesign {
            n: 40,
            t_len: 300,
            p: 3,
            h: 3,
            noise_sd: study2_noise_variances().iter().map(|v| v.sqrt()).collect(),
            inclusion: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.noise_sd.len() != self.n || self.noise_sd.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Config("noise_sd needs N positive entries".into()));
        }
        if !(0.0..=1.0).contains(&self.inclusion) {
            return Err(Error::Config("inclusion probability must lie in [0, 1]".into()));
        }
        if self.t_len <= self.p || self.h == 0 || self.n == 0 || self.p == 0 {
            return Err(Error::Config("need T > P and positive N, P, H".into()));
        }
        Ok(())
    }
}

pub fn study2_noise_variances() -> Vec<f64> {
    (1..=40)
        .map(|i| if i <= 25 { i as f64 / 5.0 } else { (51 - i) as f64 / 5.0 })
        .collect()
}

/// Generating truth for one simulated series.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub components: Vec<TensorComponent>,
    pub paths: Vec<ActivationPath>,
    pub noise_sd: Vec<f64>,
}

impl Truth {
    pub fn p(&self) -> usize {
        self.components[0].p()
    }

    /// `A_{j,t}` for every path index `t - P`.
    pub fn coefficients(&self) -> Result<Vec<CoefMatrixSet>> {
        let p = self.p();
        (0..self.paths[0].len())
            .map(|l| compose_time_coefficients(&self.components, &self.paths, l + p))
            .collect()
    }
}

fn spike_slab_vector<R: Rng + ?Sized>(len: usize, inclusion: f64, rng: &mut R) -> Vec<f64> {
    (0..len)
        .map(|_| {
            if rng.random::<f64>() < inclusion {
                sample_normal(rng, 0.0, 1.0)
            } else {
                0.0
            }
        })
        .collect()
}

/// Every sub-sum of the bases is stationary (checked over all `2^H` subsets).
pub fn all_subsets_stationary(bases: &[CoefMatrixSet]) -> bool {
    let h = bases.len();
    let (n, p) = (bases[0].n(), bases[0].p());
    // singletons first: they fail most often and are cheapest to reject on
    let mut masks: Vec<usize> = (1..(1usize << h)).collect();
    masks.sort_by_key(|m| m.count_ones());
    masks.into_iter().all(|mask| {
        let mut a = CoefMatrixSet::zeros(n, p);
        for (k, b) in bases.iter().enumerate() {
            if mask >> k & 1 == 1 {
                a.add_assign(b);
            }
        }
        is_stationary(&a)
    })
}

/// Draws `H` spike-and-slab components whose every subset composition is
/// stationary. When the slab can be hit, all-zero components are redrawn too.
pub fn draw_stationary_components<R: Rng + ?Sized>(
    design: &SimDesign,
    rng: &mut R,
) -> Result<Vec<TensorComponent>> {
    for _ in 0..MAX_REJECTIONS {
        let comps: Vec<TensorComponent> = (0..design.h)
            .map(|_| TensorComponent {
                alpha1: spike_slab_vector(design.n, design.inclusion, rng),
                alpha2: spike_slab_vector(design.n, design.inclusion, rng),
                alpha3: spike_slab_vector(design.p, design.inclusion, rng),
            })
            .collect();
        let bases: Vec<CoefMatrixSet> = comps.iter().map(|c| c.matricize()).collect();
        if design.inclusion > 0.0 && bases.iter().any(|b| b.max_abs() == 0.0) {
            continue;
        }
        if all_subsets_stationary(&bases) {
            return Ok(comps);
        }
    }
    Err(Error::Config(format!(
        "no stationary draw after {MAX_REJECTIONS} attempts"
    )))
}

/// Study-1 generator: stationary spike-and-slab bases, NDARMA(1) paths with
/// `(p1, p2) ~ U(0, 1)²`, Gaussian noise.
pub fn generate_study1_dataset<R: Rng + ?Sized>(
    design: &SimDesign,
    rng: &mut R,
) -> Result<(TimeSeries, Truth)> {
    design.validate()?;
    let components = draw_stationary_components(design, rng)?;
    let len = design.t_len - design.p;
    let mut paths = Vec::with_capacity(design.h);
    for _ in 0..design.h {
        let p1 = rng.random::<f64>() * (1.0 - f64::EPSILON);
        let p2 = rng.random::<f64>().max(f64::EPSILON);
        let params = NdarmaParams::new(p1, p2)?;
        paths.push(ActivationPath::new(ndarma_sample_path(&params, len, rng)));
    }
    let seed: u64 = rng.random();
    let y = simulate_var(&components, &paths, &design.noise_sd, None, design.t_len, seed)?;
    Ok((
        y,
        Truth {
            components,
            paths,
            noise_sd: design.noise_sd.clone(),
        },
    ))
}

/// Study-2 activation layout for 1-based time `t = P+1..T`: components
/// {1, 2} for `t ≤ 100`, {1, 3} for `100 < t ≤ 200`, {2} afterwards.
pub fn study2_layout(t_len: usize, p: usize) -> Vec<ActivationPath> {
    let active = |t: usize| -> [bool; 3] {
        if t <= 100 {
            [true, true, false]
        } else if t <= 200 {
            [true, false, true]
        } else {
            [false, true, false]
        }
    };
    (0..3)
        .map(|h| ActivationPath::new((p + 1..=t_len).map(|t| active(t)[h]).collect()))
        .collect()
}

pub fn generate_study2_dataset<R: Rng + ?Sized>(rng: &mut R) -> Result<(TimeSeries, Truth)> {
    let design = SimDesign::study2();
    let components = draw_stationary_components(&design, rng)?;
    let paths = study2_layout(design.t_len, design.p);
    let seed: u64 = rng.random();
    let y = simulate_var(&components, &paths, &design.noise_sd, None, design.t_len, seed)?;
    Ok((
        y,
        Truth {
            components,
            paths,
            noise_sd: design.noise_sd,
        },
    ))
}

// ---------------------------------------------------------------------------
// Metrics

fn check_same(a: &CoefMatrixSet, b: &CoefMatrixSet) -> Result<()> {
    if a.n() != b.n() || a.p() != b.p() {
        return Err(Error::Shape(format!(
            "coefficient sets differ: (N={}, P={}) vs (N={}, P={})",
            a.n(),
            a.p(),
            b.n(),
            b.p()
        )));
    }
    Ok(())
}

fn frob_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn coefficient_error(est: &[CoefMatrixSet], truth: &[CoefMatrixSet], squared: bool) -> Result<f64> {
    if est.len() != truth.len() || est.is_empty() {
        return Err(Error::Shape(format!(
            "{} estimated vs {} true time points",
            est.len(),
            truth.len()
        )));
    }
    let (n, p) = (truth[0].n(), truth[0].p());
    let mut total = 0.0;
    for (e, t) in est.iter().zip(truth) {
        check_same(e, t)?;
        for j in 0..p {
            let d = frob_diff(e.matrix_slice(j), t.matrix_slice(j));
            total += if squared { d * d } else { d };
        }
    }
    Ok((total / (est.len() * n * n * p) as f64).sqrt())
}

/// Coefficient error: `sqrt(Σ_t Σ_j ‖Ã_{j,t} - A_{j,t}‖_F / ((T-P) N² P))`,
/// with unsquared Frobenius norms under the root.
pub fn err_coefficients(est: &[CoefMatrixSet], truth: &[CoefMatrixSet]) -> Result<f64> {
    coefficient_error(est, truth, false)
}

/// Root-mean-square variant with squared Frobenius norms.
pub fn err_coefficients_squared(est: &[CoefMatrixSet], truth: &[CoefMatrixSet]) -> Result<f64> {
    coefficient_error(est, truth, true)
}

/// Component errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentError {
    /// Mean over true components of `sqrt(Σ_j ‖Ã*_{jh} - A*_{jh}‖_F / (N² P))`.
    pub all: f64,
    /// The same quantity for each true component.
    pub per_component: Vec<f64>,
    /// Mean absolute error over truly non-zero entries; `None` if there are none.
    pub nonzero_entries: Option<f64>,
    /// Mean absolute error over truly zero entries; `None` if there are none.
    pub zero_entries: Option<f64>,
}

/// Scores each true base against its matched estimate; unmatched truths are
/// scored against zero. `matching` holds `(estimate, truth)` pairs.
pub fn err_components(
    est: &[CoefMatrixSet],
    truth: &[CoefMatrixSet],
    matching: &[(usize, usize)],
) -> Result<ComponentError> {
    let mut per = Vec::with_capacity(truth.len());
    let (mut nz_sum, mut nz_cnt, mut z_sum, mut z_cnt) = (0.0, 0usize, 0.0, 0usize);
    for (ti, t) in truth.iter().enumerate() {
        let zero;
        let e = match matching.iter().find(|(_, m)| *m == ti) {
            Some((ei, _)) => {
                check_same(&est[*ei], t)?;
                &est[*ei]
            }
            None => {
                zero = CoefMatrixSet::zeros(t.n(), t.p());
                &zero
            }
        };
        let (n, p) = (t.n(), t.p());
        let s: f64 = (0..p)
            .map(|j| frob_diff(e.matrix_slice(j), t.matrix_slice(j)))
            .sum();
        per.push((s / (n * n * p) as f64).sqrt());
        for (x, y) in e.as_slice().iter().zip(t.as_slice()) {
            if *y != 0.0 {
                nz_sum += (x - y).abs();
                nz_cnt += 1;
            } else {
                z_sum += x.abs();
                z_cnt += 1;
            }
        }
    }
    let all = per.iter().sum::<f64>() / per.len().max(1) as f64;
    Ok(ComponentError {
        all,
        per_component: per,
        nonzero_entries: (nz_cnt > 0).then(|| nz_sum / nz_cnt as f64),
        zero_entries: (z_cnt > 0).then(|| z_sum / z_cnt as f64),
    })
}

/// Components whose largest entry over all lags is below `threshold`.
pub fn detect_empty_components(est: &[CoefMatrixSet], threshold: f64) -> Vec<usize> {
    est.iter()
        .enumerate()
        .filter(|(_, c)| !(c.max_abs() >= threshold))
        .map(|(h, _)| h)
        .collect()
}

fn distance(a: &CoefMatrixSet, b: &CoefMatrixSet) -> f64 {
    frob_diff(a.as_slice(), b.as_slice())
}

/// Greedy matching: repeatedly pairs the globally closest unassigned
/// (estimate, truth) couple. `candidates` are estimate indices to consider.
pub fn match_components(
    est: &[CoefMatrixSet],
    candidates: &[usize],
    truth: &[CoefMatrixSet],
) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(f64, usize, usize)> = candidates
        .iter()
        .flat_map(|&e| truth.iter().enumerate().map(move |(t, tb)| (e, t, tb)))
        .map(|(e, t, tb)| (distance(&est[e], tb), e, t))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_e = vec![false; est.len()];
    let mut used_t = vec![false; truth.len()];
    let mut out = Vec::new();
    for (_, e, t) in pairs {
        if !used_e[e] && !used_t[t] {
            used_e[e] = true;
            used_t[t] = true;
            out.push((e, t));
        }
    }
    out.sort();
    out
}

/// Minimum total-distance matching by exhaustive search.
pub fn match_components_optimal(
    est: &[CoefMatrixSet],
    candidates: &[usize],
    truth: &[CoefMatrixSet],
) -> Vec<(usize, usize)> {
    fn search(
        k: usize,
        cost: &[Vec<f64>],
        used: &mut Vec<bool>,
        cur: &mut Vec<Option<usize>>,
        acc: f64,
        best: &mut (f64, Vec<Option<usize>>),
    ) {
        if acc >= best.0 {
            return;
        }
        if k == cost.len() {
            *best = (acc, cur.clone());
            return;
        }
        let assignable = used.iter().filter(|u| !**u).count();
        let remaining = cost.len() - k;
        for t in 0..used.len() {
            if !used[t] {
                used[t] = true;
                cur[k] = Some(t);
                search(k + 1, cost, used, cur, acc + cost[k][t], best);
                cur[k] = None;
                used[t] = false;
            }
        }
        // leave this estimate unmatched only if there are more estimates than truths
        if remaining > assignable {
            search(k + 1, cost, used, cur, acc, best);
        }
    }
    let cost: Vec<Vec<f64>> = candidates
        .iter()
        .map(|&e| truth.iter().map(|t| distance(&est[e], t)).collect())
        .collect();
    let mut best = (f64::INFINITY, vec![None; candidates.len()]);
    search(
        0,
        &cost,
        &mut vec![false; truth.len()],
        &mut vec![None; candidates.len()],
        0.0,
        &mut best,
    );
    let mut out: Vec<(usize, usize)> = best
        .1
        .iter()
        .zip(candidates)
        .filter_map(|(t, &e)| t.map(|t| (e, t)))
        .collect();
    out.sort();
    out
}

/// Total distance of a matching.
pub fn matching_cost(est: &[CoefMatrixSet], truth: &[CoefMatrixSet], m: &[(usize, usize)]) -> f64 {
    m.iter().map(|&(e, t)| distance(&est[e], &truth[t])).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GammaMetrics {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
    pub accuracy: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub precision: Option<f64>,
}

fn ratio(a: usize, b: usize) -> Option<f64> {
    (b > 0).then(|| a as f64 / b as f64)
}

/// Pooled confusion-matrix metrics over matched components.
pub fn gamma_classification(
    est: &[ActivationPath],
    truth: &[ActivationPath],
    matching: &[(usize, usize)],
) -> Result<GammaMetrics> {
    let mut m = GammaMetrics::default();
    for &(e, t) in matching {
        let (ge, gt) = (&est[e].gamma, &truth[t].gamma);
        if ge.len() != gt.len() {
            return Err(Error::Shape(format!(
                "path lengths differ: {} vs {}",
                ge.len(),
                gt.len()
            )));
        }
        for (a, b) in ge.iter().zip(gt) {
            match (a, b) {
                (true, true) => m.tp += 1,
                (false, false) => m.tn += 1,
                (true, false) => m.fp += 1,
                (false, true) => m.fn_ += 1,
            }
        }
    }
    m.accuracy = ratio(m.tp + m.tn, m.tp + m.tn + m.fp + m.fn_);
    m.sensitivity = ratio(m.tp, m.tp + m.fn_);
    m.specificity = ratio(m.tn, m.tn + m.fp);
    m.precision = ratio(m.tp, m.tp + m.fp);
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Matching {
    Greedy,
    Optimal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub err_a: f64,
    pub err_a_squared: f64,
    pub err_components: ComponentError,
    pub gamma: GammaMetrics,
    /// `(estimate, truth)` pairs.
    pub matching: Vec<(usize, usize)>,
    pub empty_components: Vec<usize>,
    /// Mean over `t` of `‖Ã_{P,t}‖_F` for the highest fitted lag.
    pub last_lag_frobenius: f64,
}

/// Scores a fit against the generating truth. Truth is padded with zero
/// matrices up to the fitted order and compared on the common time range.
pub fn evaluate(
    fit: &FitResult,
    truth: &Truth,
    empty_threshold: f64,
    gamma_threshold: f64,
    matching: Matching,
) -> Result<EvalReport> {
    let p_fit = fit.p;
    let p_true = truth.p();
    let n = truth.components[0].n();
    if n != fit.n {
        return Err(Error::Shape(format!("truth has N={n}, fit has N={}", fit.n)));
    }
    if truth.paths[0].len() + p_true != fit.t_len {
        return Err(Error::Shape("truth and fit cover different series lengths".into()));
    }
    let p_max = p_fit.max(p_true);
    let t0 = p_max;
    let true_a = truth.coefficients()?;
    let est_a: Vec<CoefMatrixSet> = (t0..fit.t_len)
        .map(|t| fit.posterior_mean_a[t - p_fit].with_lags(p_max))
        .collect();
    let tru_a: Vec<CoefMatrixSet> = (t0..fit.t_len)
        .map(|t| true_a[t - p_true].with_lags(p_max))
        .collect();
    let err_a = err_coefficients(&est_a, &tru_a)?;
    let err_a_squared = err_coefficients_squared(&est_a, &tru_a)?;

    let est_b: Vec<CoefMatrixSet> = fit.component_mean.iter().map(|c| c.with_lags(p_max)).collect();
    let tru_b: Vec<CoefMatrixSet> = truth
        .components
        .iter()
        .map(|c| c.matricize().with_lags(p_max))
        .collect();
    let empty = detect_empty_components(&est_b, empty_threshold);
    let candidates: Vec<usize> = (0..est_b.len()).filter(|h| !empty.contains(h)).collect();
    let m = match matching {
        Matching::Greedy => match_components(&est_b, &candidates, &tru_b),
        Matching::Optimal => match_components_optimal(&est_b, &candidates, &tru_b),
    };
    let err_components = err_components(&est_b, &tru_b, &m)?;

    // paths live on t = P+1..T of their own model; compare on the common range
    let est_paths: Vec<ActivationPath> = summarize_gamma(fit, gamma_threshold)?
        .into_iter()
        .map(|g| ActivationPath::new(g.gamma[t0 - p_fit..].to_vec()))
        .collect();
    let tru_paths: Vec<ActivationPath> = truth
        .paths
        .iter()
        .map(|g| ActivationPath::new(g.gamma[t0 - p_true..].to_vec()))
        .collect();
    let gamma = gamma_classification(&est_paths, &tru_paths, &m)?;

    let last = p_fit - 1;
    let last_lag_frobenius = fit
        .posterior_mean_a
        .iter()
        .map(|a| a.frobenius(last))
        .sum::<f64>()
        / fit.posterior_mean_a.len() as f64;

    Ok(EvalReport {
        err_a,
        err_a_squared,
        err_components,
        gamma,
        matching: m,
        empty_components: empty,
        last_lag_frobenius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_set(rng: &mut ChaCha8Rng, n: usize, p: usize) -> CoefMatrixSet {
        let mut c = CoefMatrixSet::zeros(n, p);
        c.as_mut_slice()
            .iter_mut()
            .for_each(|x| *x = sample_normal(rng, 0.0, 1.0));
        c
    }

    #[test]
    fn study_designs() {
        let d = SimDesign::study1();
        assert_eq!((d.n, d.t_len, d.p, d.h), (10, 100, 3, 3));
        assert_eq!(d.noise_sd[0], 0.2);
        assert_eq!(d.noise_sd[9], 2.0);
        let v = study2_noise_variances();
        assert_eq!(v[0], 0.2);
        assert_eq!(v[24], 5.0);
        assert_eq!(v[25], 5.0);
        assert_eq!(v[39], 2.2);
    }

    #[test]
    fn study1_truth_is_stationary_in_every_subset() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (y, truth) = generate_study1_dataset(&SimDesign::study1(), &mut rng).unwrap();
        assert_eq!((y.len(), y.n()), (100, 10));
        let bases: Vec<_> = truth.components.iter().map(|c| c.matricize()).collect();
        assert!(all_subsets_stationary(&bases));
        assert!(bases.iter().all(|b| b.max_abs() > 0.0));
        assert!(truth.paths.iter().all(|p| p.len() == 97));
    }

    #[test]
    fn zero_inclusion_gives_zero_dynamics() {
        let mut d = SimDesign::study1();
        d.inclusion = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (_, truth) = generate_study1_dataset(&d, &mut rng).unwrap();
        assert!(truth.components.iter().all(|c| c.matricize().max_abs() == 0.0));
    }

    #[test]
    fn study2_layout_blocks() {
        let paths = study2_layout(300, 3);
        assert!(paths.iter().all(|p| p.len() == 297));
        let at = |t: usize| -> Vec<bool> { paths.iter().map(|p| p.gamma[t - 4]).collect() };
        assert_eq!(at(4), vec![true, true, false]);
        assert_eq!(at(100), vec![true, true, false]);
        assert_eq!(at(101), vec![true, false, true]);
        assert_eq!(at(200), vec![true, false, true]);
        assert_eq!(at(201), vec![false, true, false]);
        assert_eq!(at(300), vec![false, true, false]);
        for t in 4..=300 {
            let k = at(t).iter().filter(|g| **g).count();
            assert_eq!(k, if t <= 200 { 2 } else { 1 });
        }
    }

    #[test]
    fn coefficient_error_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: Vec<_> = (0..5).map(|_| random_set(&mut rng, 3, 2)).collect();
        assert_eq!(err_coefficients(&a, &a).unwrap(), 0.0);

        // N = 1, one differing (t, j) entry of size d
        let mut e = vec![CoefMatrixSet::zeros(1, 2); 4];
        let t = vec![CoefMatrixSet::zeros(1, 2); 4];
        e[2].set(1, 0, 0, -0.3);
        let got = err_coefficients(&e, &t).unwrap();
        assert!((got - (0.3f64 / (4.0 * 2.0)).sqrt()).abs() < 1e-15);

        // literal transcription with explicit loops
        let b: Vec<_> = (0..5).map(|_| random_set(&mut rng, 3, 2)).collect();
        let mut total = 0.0;
        for t in 0..5 {
            for j in 0..2 {
                let mut s = 0.0;
                for i in 0..3 {
                    for k in 0..3 {
                        s += (a[t].get(j, i, k) - b[t].get(j, i, k)).powi(2);
                    }
                }
                total += s.sqrt();
            }
        }
        let oracle = (total / (5.0 * 9.0 * 2.0)).sqrt();
        assert!((err_coefficients(&a, &b).unwrap() - oracle).abs() < 1e-14);
        assert!(matches!(
            err_coefficients(&a[..2], &b[..3]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn component_error_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t: Vec<_> = (0..2).map(|_| random_set(&mut rng, 2, 2)).collect();
        let e = err_components(&t, &t, &[(0, 0), (1, 1)]).unwrap();
        assert_eq!((e.all, e.nonzero_entries, e.zero_entries), (0.0, Some(0.0), None));

        let zero = vec![CoefMatrixSet::zeros(2, 2)];
        let mut eps = CoefMatrixSet::zeros(2, 2);
        eps.as_mut_slice().iter_mut().for_each(|x| *x = 0.01);
        let e = err_components(&[eps], &zero, &[(0, 0)]).unwrap();
        assert!((e.zero_entries.unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(e.nonzero_entries, None);

        let est: Vec<_> = (0..2).map(|_| random_set(&mut rng, 2, 2)).collect();
        let e = err_components(&est, &t, &[(0, 1), (1, 0)]).unwrap();
        let oracle = |a: &CoefMatrixSet, b: &CoefMatrixSet| {
            let s: f64 = (0..2)
                .map(|j| {
                    let mut q = 0.0;
                    for i in 0..2 {
                        for k in 0..2 {
                            q += (a.get(j, i, k) - b.get(j, i, k)).powi(2);
                        }
                    }
                    q.sqrt()
                })
                .sum();
            (s / 8.0).sqrt()
        };
        assert!((e.per_component[0] - oracle(&est[1], &t[0])).abs() < 1e-14);
        assert!((e.per_component[1] - oracle(&est[0], &t[1])).abs() < 1e-14);
    }

    #[test]
    fn empty_component_rule() {
        let zero = vec![CoefMatrixSet::zeros(2, 2); 3];
        assert_eq!(detect_empty_components(&zero, 0.01), vec![0, 1, 2]);
        let mut one = zero.clone();
        one[1].set(1, 0, 1, 0.011);
        assert_eq!(detect_empty_components(&one, 0.01), vec![0, 2]);
        assert_eq!(detect_empty_components(&one, f64::INFINITY), vec![0, 1, 2]);
    }

    #[test]
    fn matching_recovers_permutations() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t: Vec<_> = (0..3).map(|_| random_set(&mut rng, 3, 2)).collect();
        let est = vec![t[2].clone(), t[0].clone(), t[1].clone()];
        let m = match_components(&est, &[0, 1, 2], &t);
        assert_eq!(m, vec![(0, 2), (1, 0), (2, 1)]);
        assert_eq!(match_components(&t[..1], &[0], &t[..1]), vec![(0, 0)]);
        assert_eq!(match_components_optimal(&est, &[0, 1, 2], &t), m);
        // surplus estimates stay unmatched
        let m = match_components(&t, &[0, 1, 2], &t[..2]);
        assert_eq!(m, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn greedy_is_near_optimal_on_random_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let t: Vec<_> = (0..3).map(|_| random_set(&mut rng, 2, 2)).collect();
            let e: Vec<_> = (0..3).map(|_| random_set(&mut rng, 2, 2)).collect();
            let g = matching_cost(&e, &t, &match_components(&e, &[0, 1, 2], &t));
            let o = matching_cost(&e, &t, &match_components_optimal(&e, &[0, 1, 2], &t));
            assert!(o <= g + 1e-12);
            assert!(g <= 1.5 * o + 1e-12, "greedy {g} vs optimal {o}");
        }
    }

    #[test]
    fn gamma_metric_examples() {
        let truth = vec![ActivationPath::new(vec![true, false, true, true, false])];
        let m = gamma_classification(&truth, &truth, &[(0, 0)]).unwrap();
        assert_eq!(
            (m.accuracy, m.sensitivity, m.specificity, m.precision),
            (Some(1.0), Some(1.0), Some(1.0), Some(1.0))
        );
        let comp = vec![ActivationPath::new(truth[0].gamma.iter().map(|g| !g).collect())];
        let m = gamma_classification(&comp, &truth, &[(0, 0)]).unwrap();
        assert_eq!((m.accuracy, m.sensitivity, m.specificity), (Some(0.0), Some(0.0), Some(0.0)));
        let all_off = vec![ActivationPath::constant(5, false)];
        let m = gamma_classification(&all_off, &all_off, &[(0, 0)]).unwrap();
        assert_eq!((m.sensitivity, m.precision), (None, None));
    }
}
