//! Chain initialization: a ridge fit of the static VAR split into rank-1
//! components by greedy deflation with higher-order power iterations.

use nalgebra::DMatrix;
use rand::Rng;

use super::data::Design;
use super::ModelState;
use crate::dist::sample_normal;
use crate::error::{Error, Result};
use crate::ising::IsingParams;
use crate::model::{ActivationPath, TensorComponent};
use crate::priors::{HyperParams, ShrinkageState};

const HOPM_ITERS: usize = 100;

/// Ridge estimate of the static VAR, returned as `P` row-major `N×N` blocks
/// together with the per-coordinate residual variances.
pub fn ridge_var(design: &Design<'_>, penalty: f64) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let (n, p, l_len) = (design.n(), design.p, design.len());
    let np = n * p;
    let x = DMatrix::from_fn(l_len, np, |l, c| design.lagged(l, c / n)[c % n]);
    let y = DMatrix::from_fn(l_len, n, |l, i| design.target(l)[i]);
    let mut xtx = x.transpose() * &x;
    let scale = (0..np).map(|i| xtx[(i, i)]).sum::<f64>() / np as f64;
    for i in 0..np {
        xtx[(i, i)] += penalty * scale.max(1e-12);
    }
    let chol = xtx
        .cholesky()
        .ok_or_else(|| Error::Numerical("ridge normal equations are singular".into()))?;
    let b = chol.solve(&(x.transpose() * &y));
    let resid = &y - &x * &b;
    let var = (0..n)
        .map(|i| {
            let c = resid.column(i);
            (c.dot(&c) / l_len as f64).max(1e-6)
        })
        .collect();
    let blocks = (0..p)
        .map(|j| {
            let mut a = vec![0.0; n * n];
            for i in 0..n {
                for k in 0..n {
                    a[i * n + k] = b[(j * n + k, i)];
                }
            }
            a
        })
        .collect();
    Ok((blocks, var))
}

fn normalize(v: &mut [f64]) -> f64 {
    let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
    s
}

/// Best rank-1 approximation of `t[j][i*n+k]` by power iterations, started
/// from `a2`, `a3`. Returns `(σ, a1, a2, a3)` with unit margins.
fn hopm(t: &[Vec<f64>], n: usize, mut a2: Vec<f64>, mut a3: Vec<f64>) -> (f64, Vec<f64>, Vec<f64>, Vec<f64>) {
    let p = t.len();
    let mut a1 = vec![0.0; n];
    let mut sigma = 0.0;
    normalize(&mut a2);
    normalize(&mut a3);
    for _ in 0..HOPM_ITERS {
        a1.iter_mut().for_each(|x| *x = 0.0);
        for j in 0..p {
            for i in 0..n {
                a1[i] += a3[j] * (0..n).map(|k| t[j][i * n + k] * a2[k]).sum::<f64>();
            }
        }
        normalize(&mut a1);
        a2.iter_mut().for_each(|x| *x = 0.0);
        for j in 0..p {
            for i in 0..n {
                for k in 0..n {
                    a2[k] += a3[j] * a1[i] * t[j][i * n + k];
                }
            }
        }
        normalize(&mut a2);
        for j in 0..p {
            let mut s = 0.0;
            for i in 0..n {
                for k in 0..n {
                    s += a1[i] * a2[k] * t[j][i * n + k];
                }
            }
            a3[j] = s;
        }
        sigma = normalize(&mut a3);
    }
    (sigma, a1, a2, a3)
}

/// Greedy rank-1 deflation of `P` coefficient blocks into `h` components with
/// balanced margin norms.
pub fn deflate_components<R: Rng + ?Sized>(
    blocks: &[Vec<f64>],
    n: usize,
    h: usize,
    rng: &mut R,
) -> Vec<TensorComponent> {
    let p = blocks.len();
    let mut t = blocks.to_vec();
    let mut out = Vec::with_capacity(h);
    for _ in 0..h {
        let a2: Vec<f64> = (0..n).map(|_| sample_normal(rng, 0.0, 1.0)).collect();
        let mut a3: Vec<f64> = (0..p).map(|_| sample_normal(rng, 0.0, 0.1)).collect();
        a3[0] += 1.0;
        let (sigma, a1, a2, a3) = hopm(&t, n, a2, a3);
        for j in 0..p {
            for i in 0..n {
                for k in 0..n {
                    t[j][i * n + k] -= sigma * a1[i] * a2[k] * a3[j];
                }
            }
        }
        let c = sigma.cbrt();
        out.push(TensorComponent {
            alpha1: a1.iter().map(|x| x * c).collect(),
            alpha2: a2.iter().map(|x| x * c).collect(),
            alpha3: a3.iter().map(|x| x * c).collect(),
        });
    }
    out
}

/// Starting state for one chain.
pub fn initial_state<R: Rng + ?Sized>(
    design: &Design<'_>,
    hp: &HyperParams,
    rng: &mut R,
) -> Result<ModelState> {
    let (n, p, h) = (hp.n, hp.p, hp.h);
    let (blocks, sigma2) = ridge_var(design, 1e-2)?;
    let components = deflate_components(&blocks, n, h, rng);
    let l_len = design.len();
    let shrink = ShrinkageState {
        tau: 1.0,
        phi: vec![1.0 / h as f64; h],
        lambda1: vec![hp.a_lambda / hp.b_lambda; h],
        lambda2: vec![hp.a_lambda / hp.b_lambda; h],
        w1: vec![vec![1.0; n]; h],
        w2: vec![vec![1.0; n]; h],
        w3: vec![(0..p).map(|j| if j + 1 == p { hp.w_inf } else { 1.0 }).collect(); h],
        z: vec![vec![p - 1; p]; h],
        v: vec![vec![hp.beta1 / (hp.beta1 + hp.beta2); p]; h],
    };
    let mut shrink = shrink;
    crate::priors::renormalize(&mut shrink.phi);
    let ising = hp
        .ising_boxes
        .iter()
        .map(|b| IsingParams::new(0.0f64.clamp(b.theta_min, b.theta_max), 1.0f64.min(b.kappa_max)))
        .collect::<Result<_>>()?;
    Ok(ModelState {
        components,
        paths: vec![ActivationPath::constant(l_len, true); h],
        shrink,
        ising,
        sigma2,
        alpha_conc: hp.alpha_grid[hp.alpha_grid.len() / 2],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{simulate_var, TimeSeries};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ridge_recovers_static_var() {
        let c = TensorComponent::new(vec![0.8, 0.2], vec![0.6, -0.5], vec![1.0]).unwrap();
        let path = ActivationPath::constant(19_999, true);
        let y = simulate_var(&[c.clone()], &[path], &[1.0, 1.0], None, 20_000, 3).unwrap();
        let d = Design::new(&y, 1);
        let (blocks, var) = ridge_var(&d, 1e-6).unwrap();
        let truth = c.matricize();
        for i in 0..2 {
            for k in 0..2 {
                assert!((blocks[0][i * 2 + k] - truth.get(0, i, k)).abs() < 0.03);
            }
        }
        assert!(var.iter().all(|v| (v - 1.0).abs() < 0.05));
    }

    #[test]
    fn deflation_recovers_rank_one_tensor() {
        let c = TensorComponent::new(vec![1.0, -2.0, 0.5], vec![0.3, 0.1, -1.0], vec![0.9, -0.4]).unwrap();
        let m = c.matricize();
        let blocks: Vec<Vec<f64>> = (0..2).map(|j| m.matrix_slice(j).to_vec()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let comps = deflate_components(&blocks, 3, 2, &mut rng);
        let got = comps[0].matricize();
        for (a, b) in got.as_slice().iter().zip(m.as_slice()) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(comps[1].matricize().max_abs() < 1e-9);
    }

    #[test]
    fn initial_state_is_valid() {
        let y = TimeSeries::from_rows(2, (0..40).map(|i| ((i * 7) % 11) as f64 / 5.0).collect()).unwrap();
        let hp = HyperParams::defaults(2, 2, 3);
        let d = Design::new(&y, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let st = initial_state(&d, &hp, &mut rng).unwrap();
        st.validate(&hp, d.len()).unwrap();
    }
}
