//! Scalar distributions used by the prior hierarchy and the Gibbs conditionals.
//!
//! Parametrizations used everywhere in the crate:
//!
//! * `Gamma(shape, rate)`: density ∝ x^{shape-1} e^{-rate·x}
//! * `InvGamma(shape, scale)`: density ∝ x^{-shape-1} e^{-scale/x}
//! * `Gig(p, a, b)`: density ∝ x^{p-1} exp(-(a·x + b/x)/2)
//!
//! The generalized inverse Gaussian sampler follows Hörmann & Leydold (2014):
//! ratio-of-uniforms with or without mode shift, and a three-piece rejection
//! hat for the log-concavity-lacking region with small `ω`.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub fn ln_normal(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln() + d * d / var)
}

pub fn ln_gamma_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

pub fn ln_inv_gamma_pdf(x: f64, shape: f64, scale: f64) -> f64 {
    shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x
}

pub fn ln_beta_pdf(x: f64, a: f64, b: f64) -> f64 {
    ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln()
}

pub fn ln_exponential_pdf(x: f64, rate: f64) -> f64 {
    rate.ln() - rate * x
}

/// Symmetric Dirichlet density with respect to Lebesgue measure on the first
/// `H-1` coordinates. A one-point simplex has log density zero.
pub fn ln_dirichlet_sym(phi: &[f64], conc: f64) -> f64 {
    let h = phi.len();
    if h <= 1 {
        return 0.0;
    }
    ln_gamma(conc * h as f64) - h as f64 * ln_gamma(conc)
        + (conc - 1.0) * phi.iter().map(|p| p.ln()).sum::<f64>()
}

/// Student-t with `nu` degrees of freedom, location zero, squared scale `scale2`.
pub fn ln_student_t(x: f64, nu: f64, scale2: f64) -> f64 {
    ln_gamma((nu + 1.0) / 2.0)
        - ln_gamma(nu / 2.0)
        - 0.5 * (nu * std::f64::consts::PI * scale2).ln()
        - (nu + 1.0) / 2.0 * (1.0 + x * x / (nu * scale2)).ln()
}

/// Unnormalized log density of `Gig(p, a, b)`.
pub fn ln_gig_unnorm(x: f64, p: f64, a: f64, b: f64) -> f64 {
    (p - 1.0) * x.ln() - 0.5 * (a * x + b / x)
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sample_normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    mean + sd * z
}

pub fn sample_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> Result<f64> {
    let g = Gamma::new(shape, 1.0 / rate)
        .map_err(|e| Error::Numerical(format!("Gamma({shape}, rate {rate}): {e}")))?;
    Ok(g.sample(rng))
}

pub fn sample_inv_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, scale: f64) -> Result<f64> {
    Ok(1.0 / sample_gamma(rng, shape, scale)?)
}

pub fn sample_beta<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> Result<f64> {
    let d = Beta::new(a, b).map_err(|e| Error::Numerical(format!("Beta({a}, {b}): {e}")))?;
    Ok(d.sample(rng))
}

/// Draws an index with probabilities proportional to `exp(log_weights)`.
pub fn sample_log_categorical<R: Rng + ?Sized>(rng: &mut R, log_weights: &[f64]) -> Result<usize> {
    let m = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Err(Error::Numerical("all categorical weights underflow".into()));
    }
    let w: Vec<f64> = log_weights.iter().map(|l| (l - m).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, wi) in w.iter().enumerate() {
        if u < *wi {
            return Ok(i);
        }
        u -= wi;
    }
    Ok(w.iter().rposition(|&x| x > 0.0).unwrap_or(0))
}

/// Draws from `Gig(p, a, b)`, density ∝ x^{p-1} exp(-(a·x + b/x)/2).
///
/// `a = 0` (with `p < 0`) and `b = 0` (with `p > 0`) are the inverse-Gamma and
/// Gamma limits.
pub fn sample_gig<R: Rng + ?Sized>(rng: &mut R, p: f64, a: f64, b: f64) -> Result<f64> {
    if !(a >= 0.0 && b >= 0.0 && p.is_finite() && a.is_finite() && b.is_finite()) {
        return Err(Error::Numerical(format!("invalid giG({p}, {a}, {b})")));
    }
    if b == 0.0 {
        if p > 0.0 && a > 0.0 {
            return sample_gamma(rng, p, a / 2.0);
        }
        return Err(Error::Numerical(format!("improper giG({p}, {a}, 0)")));
    }
    if a == 0.0 {
        if p < 0.0 {
            return sample_inv_gamma(rng, -p, b / 2.0);
        }
        return Err(Error::Numerical(format!("improper giG({p}, 0, {b})")));
    }

    let lambda = p.abs();
    let alpha = (b / a).sqrt();
    let omega = (a * b).sqrt();

    // Far in the Gamma / inverse-Gamma limit the standardized variate is
    // 2G/ω with G ~ Gamma(λ); the 1/x term contributes O(ω²/λ).
    if omega < 1e-7 && lambda >= 0.25 {
        let g = sample_gamma(rng, lambda, 1.0)?;
        let x = if p > 0.0 { 2.0 * g / a } else { b / (2.0 * g) };
        return Ok(x);
    }

    let x = if lambda > 2.0 || omega > 3.0 {
        gig_rou_shift(rng, lambda, omega)
    } else if lambda >= 1.0 - 2.25 * omega * omega || omega > 0.2 {
        gig_rou_noshift(rng, lambda, omega)
    } else {
        gig_small_omega(rng, lambda, omega)
    };
    let out = if p < 0.0 { alpha / x } else { alpha * x };
    if !(out.is_finite() && out > 0.0) {
        return Err(Error::Numerical(format!(
            "giG({p}, {a}, {b}) produced {out}"
        )));
    }
    Ok(out)
}

fn gig_mode(lambda: f64, omega: f64) -> f64 {
    if lambda >= 1.0 {
        (((lambda - 1.0) * (lambda - 1.0) + omega * omega).sqrt() + (lambda - 1.0)) / omega
    } else {
        omega / (((1.0 - lambda) * (1.0 - lambda) + omega * omega).sqrt() + (1.0 - lambda))
    }
}

fn gig_rou_noshift<R: Rng + ?Sized>(rng: &mut R, lambda: f64, omega: f64) -> f64 {
    let t = 0.5 * (lambda - 1.0);
    let s = 0.25 * omega;
    let xm = gig_mode(lambda, omega);
    let nc = t * xm.ln() - s * (xm + 1.0 / xm);
    let ym = ((lambda + 1.0) + ((lambda + 1.0) * (lambda + 1.0) + omega * omega).sqrt()) / omega;
    let um = (0.5 * (lambda + 1.0) * ym.ln() - s * (ym + 1.0 / ym) - nc).exp();
    loop {
        let u = um * rng.random::<f64>();
        let v: f64 = rng.random();
        let x = u / v;
        if v.ln() <= t * x.ln() - s * (x + 1.0 / x) - nc {
            return x;
        }
    }
}

fn gig_rou_shift<R: Rng + ?Sized>(rng: &mut R, lambda: f64, omega: f64) -> f64 {
    let t = 0.5 * (lambda - 1.0);
    let s = 0.25 * omega;
    let xm = gig_mode(lambda, omega);
    let nc = t * xm.ln() - s * (xm + 1.0 / xm);

    // Roots of the cubic giving the bounding rectangle.
    let a = -(2.0 * (lambda + 1.0) / omega + xm);
    let b = 2.0 * (lambda - 1.0) * xm / omega - 1.0;
    let c = xm;
    let p = b - a * a / 3.0;
    let q = (2.0 * a * a * a) / 27.0 - (a * b) / 3.0 + c;
    let fi = (-q / (2.0 * (-(p * p * p) / 27.0).sqrt())).acos();
    let fak = 2.0 * (-p / 3.0).sqrt();
    let y1 = fak * (fi / 3.0).cos() - a / 3.0;
    let y2 = fak * (fi / 3.0 + 4.0 / 3.0 * std::f64::consts::PI).cos() - a / 3.0;
    let uplus = (y1 - xm) * (t * y1.ln() - s * (y1 + 1.0 / y1) - nc).exp();
    let uminus = (y2 - xm) * (t * y2.ln() - s * (y2 + 1.0 / y2) - nc).exp();
    loop {
        let u = uminus + rng.random::<f64>() * (uplus - uminus);
        let v: f64 = rng.random();
        let x = u / v + xm;
        if x > 0.0 && v.ln() <= t * x.ln() - s * (x + 1.0 / x) - nc {
            return x;
        }
    }
}

fn gig_small_omega<R: Rng + ?Sized>(rng: &mut R, lambda: f64, omega: f64) -> f64 {
    let xm = gig_mode(lambda, omega);
    let x0 = omega / (1.0 - lambda);
    let k0 = ((lambda - 1.0) * xm.ln() - 0.5 * omega * (xm + 1.0 / xm)).exp();
    let a0 = k0 * x0;
    let (k1, a1, k2, a2);
    if x0 >= 2.0 / omega {
        k1 = 0.0;
        a1 = 0.0;
        k2 = x0.powf(lambda - 1.0);
        a2 = k2 * 2.0 * (-omega * x0 / 2.0).exp() / omega;
    } else {
        k1 = (-omega).exp();
        a1 = if lambda == 0.0 {
            k1 * (2.0 / (omega * omega)).ln()
        } else {
            k1 / lambda * ((2.0 / omega).powf(lambda) - x0.powf(lambda))
        };
        k2 = (2.0 / omega).powf(lambda - 1.0);
        a2 = k2 * 2.0 * (-1.0f64).exp() / omega;
    }
    let total = a0 + a1 + a2;
    loop {
        let mut v = total * rng.random::<f64>();
        let (x, hx);
        if v <= a0 {
            x = x0 * v / a0;
            hx = k0;
        } else {
            v -= a0;
            if v <= a1 {
                if lambda == 0.0 {
                    x = omega * (omega.exp() * v).exp();
                    hx = k1 / x;
                } else {
                    x = (x0.powf(lambda) + lambda / k1 * v).powf(1.0 / lambda);
                    hx = k1 * x.powf(lambda - 1.0);
                }
            } else {
                v -= a1;
                let edge = if x0 > 2.0 / omega { x0 } else { 2.0 / omega };
                x = -2.0 / omega * ((-omega / 2.0 * edge).exp() - omega / (2.0 * k2) * v).ln();
                hx = k2 * (-omega / 2.0 * x).exp();
            }
        }
        let u = rng.random::<f64>() * hx;
        if u.ln() <= (lambda - 1.0) * x.ln() - omega / 2.0 * (x + 1.0 / x) {
            return x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// E[X^k] under an unnormalized log density, by trapezoidal quadrature in
    /// log-space (x = e^u). Independent of the sampler.
    fn quad_moment(log_f: impl Fn(f64) -> f64, k: f64, lo: f64, hi: f64) -> f64 {
        let n = 200_000;
        let (ulo, uhi) = (lo.ln(), hi.ln());
        let du = (uhi - ulo) / n as f64;
        let vals: Vec<f64> = (0..=n)
            .map(|i| {
                let u = ulo + i as f64 * du;
                log_f(u.exp()) + u
            })
            .collect();
        let m = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        let mut mk = 0.0;
        for (i, lv) in vals.iter().enumerate() {
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            let x = (ulo + i as f64 * du).exp();
            let f = (lv - m).exp() * w;
            z += f;
            mk += f * x.powf(k);
        }
        mk / z
    }

    fn check_gig(p: f64, a: f64, b: f64, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_gig(&mut rng, p, a, b).unwrap()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let f = |x: f64| ln_gig_unnorm(x, p, a, b);
        // Bracket the support generously around the sample range.
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min) * 1e-3;
        let hi = xs.iter().cloned().fold(0.0, f64::max) * 1e3;
        let m1 = quad_moment(f, 1.0, lo, hi);
        let m2 = quad_moment(f, 2.0, lo, hi);
        let qvar = m2 - m1 * m1;
        let se = (qvar / n as f64).sqrt();
        assert!(
            (mean - m1).abs() < 5.0 * se,
            "giG({p},{a},{b}) mean {mean} vs {m1} (se {se})"
        );
        let rel = (var - qvar).abs() / qvar;
        assert!(rel < 0.06, "giG({p},{a},{b}) var {var} vs {qvar}");
    }

    #[test]
    fn gig_moments_across_regimes() {
        // ROU with shift (λ > 2 or ω > 3)
        check_gig(3.5, 1.0, 2.0, 1);
        check_gig(0.5, 10.0, 4.0, 2);
        check_gig(-12.4, 2.0 * 256.0, 3.0, 3);
        // ROU without shift
        check_gig(1.5, 0.5, 0.5, 4);
        check_gig(-0.5, 1.0, 0.3, 5);
        // small ω, λ < 1
        check_gig(0.5, 0.01, 0.01, 6);
        check_gig(0.2, 0.05, 0.002, 7);
        check_gig(0.0, 0.03, 0.03, 8);
    }

    #[test]
    fn gig_gamma_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 100_000;
        // b = 0: Gamma(1/2, rate λ²/2), mean = 1/λ² for λ = 2
        let m = (0..n).map(|_| sample_gig(&mut rng, 0.5, 4.0, 0.0).unwrap()).sum::<f64>() / n as f64;
        let sd = (0.5f64 / 4.0).sqrt() / (n as f64).sqrt();
        assert!((m - 0.25).abs() < 4.0 * sd, "{m}");
        // tiny b with large |p|: inverse-Gamma regime
        let x = sample_gig(&mut rng, -12.0, 512.0, 1e-300).unwrap();
        assert!(x > 0.0 && x < 1e-290);
        assert!(sample_gig(&mut rng, -1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn densities_match_closed_forms() {
        // exponentials of log densities integrate to one (spot check by quadrature)
        let integ = |f: &dyn Fn(f64) -> f64, lo: f64, hi: f64| {
            let n = 200_000;
            let h = (hi - lo) / n as f64;
            (0..=n)
                .map(|i| {
                    let x = lo + i as f64 * h;
                    let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                    w * f(x).exp()
                })
                .sum::<f64>()
                * h
        };
        assert!((integ(&|x| ln_gamma_pdf(x, 2.5, 1.7), 1e-12, 60.0) - 1.0).abs() < 1e-6);
        assert!((integ(&|x| ln_inv_gamma_pdf(x, 3.0, 2.0), 1e-6, 400.0) - 1.0).abs() < 1e-4);
        assert!((integ(&|x| ln_beta_pdf(x, 2.0, 5.0), 1e-12, 1.0 - 1e-12) - 1.0).abs() < 1e-6);
        assert!((integ(&|x| ln_student_t(x, 4.0, 0.3), -400.0, 400.0) - 1.0).abs() < 1e-4);
        assert!((integ(&|x| ln_normal(x, 0.3, 2.0), -30.0, 30.0) - 1.0).abs() < 1e-8);
        assert!((ln_dirichlet_sym(&[0.5, 0.5], 1.0) - 0.0).abs() < 1e-12);
    }

    #[test]
    fn categorical_and_helpers() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert_eq!(sample_log_categorical(&mut rng, &[0.0]).unwrap(), 0);
        assert_eq!(
            sample_log_categorical(&mut rng, &[f64::NEG_INFINITY, 0.0]).unwrap(),
            1
        );
        assert!(sample_log_categorical(&mut rng, &[f64::NEG_INFINITY]).is_err());
        assert!((log_sum_exp(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        assert!(sigmoid(-1000.0) >= 0.0 && sigmoid(1000.0) <= 1.0);
    }
}
