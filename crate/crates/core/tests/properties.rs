//! Property tests for model, prior, metric and file-format invariants.

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma as GammaDist};
use statrs::distribution::{Beta, Continuous, Dirichlet, Gamma, InverseGamma, Normal};

use tvvar::dist::{ln_beta_pdf, ln_dirichlet_sym, ln_gamma_pdf, ln_inv_gamma_pdf, ln_normal};
use tvvar::io::{load_timeseries_csv, read_truth, save_timeseries_csv, write_truth};
use tvvar::ising::{
    all_configurations, cftp_ising_sample, exact_chain_sample, interior_field,
    ising_log_pmf_unnorm, ndarma_joint_pmf, p_to_theta_kappa, theta_kappa_to_p,
    transfer_matrix_normalizer,
};
use tvvar::model::{companion_matrix, compose_time_coefficients, is_stationary, simulate_var};
use tvvar::priors::{sample_prior_shrinkage, HyperParams};
use tvvar::sim::{
    detect_empty_components, gamma_classification, generate_study1_dataset, match_components_optimal,
    matching_cost, all_subsets_stationary, SimDesign, Truth,
};
use tvvar::stats::ks_two_sample;
use tvvar::{ActivationPath, ChainField, CoefMatrixSet, IsingParams, NdarmaParams, TensorComponent, TimeSeries};

fn vec_in(len: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, len)
}

/// Component of size `n × n × p` with entries in (-1, 1).
fn component(n: usize, p: usize) -> impl Strategy<Value = TensorComponent> {
    (vec_in(n, -1.0, 1.0), vec_in(n, -1.0, 1.0), vec_in(p, -1.0, 1.0))
        .prop_map(|(a, b, c)| TensorComponent::new(a, b, c).unwrap())
}

fn coef_set(n: usize, p: usize) -> impl Strategy<Value = CoefMatrixSet> {
    vec_in(n * n * p, -1.0, 1.0).prop_map(move |v| {
        let mut c = CoefMatrixSet::zeros(n, p);
        c.as_mut_slice().copy_from_slice(&v);
        c
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

// ---------------------------------------------------------------------------
// Tensor bases and coefficients

proptest! {
    #[test]
    fn matricize_is_linear_in_the_lag_margin(c in component(3, 2), s in -5.0f64..5.0) {
        let mut scaled = c.clone();
        scaled.alpha3.iter_mut().for_each(|x| *x *= s);
        let mut expect = c.matricize();
        expect.scale(s);
        for (a, b) in scaled.matricize().as_slice().iter().zip(expect.as_slice()) {
            prop_assert!(close(*a, *b, 1e-12));
        }
    }

    #[test]
    fn matricize_ignores_balanced_rescaling(c in component(3, 3), l1 in -3.0f64..3.0, l2 in -3.0f64..3.0) {
        let (n1, n2) = (l1.exp(), l2.exp());
        let n3 = 1.0 / (n1 * n2);
        let r = TensorComponent::new(
            c.alpha1.iter().map(|x| x * n1).collect(),
            c.alpha2.iter().map(|x| x * n2).collect(),
            c.alpha3.iter().map(|x| x * n3).collect(),
        ).unwrap();
        for (a, b) in r.matricize().as_slice().iter().zip(c.matricize().as_slice()) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300) || (a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn composition_is_additive_over_disjoint_paths(
        cs in prop::collection::vec(component(2, 2), 2),
        split in prop::collection::vec(0u8..3, 6),
    ) {
        // 0: inactive, 1: active in path a, 2: active in path b
        let a: Vec<ActivationPath> = (0..2).map(|h| ActivationPath::new(split.iter().map(|s| *s == 1 && h == 0 || *s == 2 && h == 1).collect())).collect();
        let b: Vec<ActivationPath> = (0..2).map(|h| ActivationPath::new(split.iter().map(|s| *s == 2 && h == 0 || *s == 1 && h == 1).collect())).collect();
        let sum: Vec<ActivationPath> = (0..2).map(|h| ActivationPath::new(a[h].gamma.iter().zip(&b[h].gamma).map(|(x, y)| *x || *y).collect())).collect();
        for t in 2..8 {
            let mut lhs = compose_time_coefficients(&cs, &a, t).unwrap();
            lhs.add_assign(&compose_time_coefficients(&cs, &b, t).unwrap());
            let rhs = compose_time_coefficients(&cs, &sum, t).unwrap();
            for (x, y) in lhs.as_slice().iter().zip(rhs.as_slice()) {
                prop_assert!(close(*x, *y, 1e-14));
            }
        }
    }

    #[test]
    fn vanishing_noise_and_zero_start_give_zero_series(c in component(3, 2), seed in any::<u64>()) {
        // shrink the base so that the recursion cannot amplify the noise floor
        let mut c = c;
        c.alpha3.iter_mut().for_each(|x| *x *= 0.1);
        let paths = vec![ActivationPath::constant(18, true)];
        let init = vec![vec![0.0; 3]; 2];
        let y = simulate_var(&[c], &paths, &[1e-300; 3], Some(&init), 20, seed).unwrap();
        prop_assert!(y.as_slice().iter().all(|v| v.abs() < 1e-290));
    }

    #[test]
    fn stationarity_agrees_with_companion_eigenvalues(
        n in 1usize..=4, p in 1usize..=3, scale in 0.05f64..1.0, seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = CoefMatrixSet::zeros(n, p);
        let d = rand_distr::Uniform::new(-scale, scale).unwrap();
        a.as_mut_slice().iter_mut().for_each(|x| *x = d.sample(&mut rng));
        let comp = companion_matrix(&a);
        let rho = comp
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0f64, f64::max);
        prop_assume!((rho - 1.0).abs() > 1e-6);
        prop_assert_eq!(is_stationary(&a), rho < 1.0);
    }
}

#[test]
fn companion_matrix_layout() {
    let mut a = CoefMatrixSet::zeros(2, 2);
    a.as_mut_slice().iter_mut().enumerate().for_each(|(k, x)| *x = k as f64 + 1.0);
    let c = companion_matrix(&a);
    let expect = DMatrix::from_row_slice(
        4,
        4,
        &[1.0, 2.0, 5.0, 6.0, 3.0, 4.0, 7.0, 8.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
    );
    assert_eq!(c, expect);
}

// ---------------------------------------------------------------------------
// Chain prior

proptest! {
    #[test]
    fn ising_and_ndarma_laws_coincide(p1 in 0.0f64..0.98, p2 in 0.02f64..0.98, len in 2usize..=10) {
        let nd = NdarmaParams::new(p1, p2).unwrap();
        let field = ChainField::prior(&p_to_theta_kappa(&nd).unwrap(), len);
        let log_z = transfer_matrix_normalizer(&field);
        for g in all_configurations(len) {
            let ising = (ising_log_pmf_unnorm(&g, &field) - log_z).exp();
            prop_assert!((ising - ndarma_joint_pmf(&g, &nd)).abs() < 1e-10);
        }
    }

    #[test]
    fn interior_field_never_exceeds_edge_field(theta in -10.0f64..10.0, kappa in 0.0f64..10.0) {
        prop_assert!(interior_field(theta, kappa) <= theta);
    }

    #[test]
    fn parameter_maps_are_mutual_inverses(theta in -4.0f64..4.0, kappa in 0.0f64..4.0) {
        let back = p_to_theta_kappa(&theta_kappa_to_p(&IsingParams::new(theta, kappa).unwrap())).unwrap();
        prop_assert!((back.theta() - theta).abs() < 1e-10);
        prop_assert!((back.kappa() - kappa).abs() < 1e-10);
    }
}

fn lag1_autocorrelation(paths: &[Vec<bool>]) -> f64 {
    let xs: Vec<f64> = paths.iter().flatten().map(|g| *g as u8 as f64).collect();
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for p in paths {
        for w in p.windows(2) {
            num += (w[0] as u8 as f64 - m) * (w[1] as u8 as f64 - m);
        }
        den += p.iter().map(|g| (*g as u8 as f64 - m).powi(2)).sum::<f64>();
    }
    num / den
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn attractive_chains_have_positive_lag_one_autocorrelation(
        theta in -1.5f64..0.0, kappa in 0.5f64..2.0, seed in any::<u64>(),
    ) {
        // here the marginal stays away from 0 and 1 and p1 >= 0.08, many
        // standard errors above zero
        let params = IsingParams::new(theta, kappa).unwrap();
        let field = ChainField::prior(&params, 50);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let exact: Vec<Vec<bool>> = (0..400).map(|_| exact_chain_sample(&field, &mut rng)).collect();
        prop_assert!(lag1_autocorrelation(&exact) > 0.0);
        let cftp: Vec<Vec<bool>> = (0..400).map(|_| cftp_ising_sample(&params, 50, &mut rng).unwrap()).collect();
        prop_assert!(lag1_autocorrelation(&cftp) > 0.0);
    }
}

// ---------------------------------------------------------------------------
// Shrinkage prior

proptest! {
    #[test]
    fn densities_match_reference_implementations(
        x in 0.01f64..20.0, a in 0.1f64..10.0, b in 0.1f64..10.0, u in 0.001f64..0.999, m in -5.0f64..5.0,
    ) {
        prop_assert!(close(ln_gamma_pdf(x, a, b), Gamma::new(a, b).unwrap().ln_pdf(x), 1e-10));
        prop_assert!(close(ln_inv_gamma_pdf(x, a, b), InverseGamma::new(a, b).unwrap().ln_pdf(x), 1e-10));
        prop_assert!(close(ln_beta_pdf(u, a, b), Beta::new(a, b).unwrap().ln_pdf(u), 1e-10));
        prop_assert!(close(ln_normal(x, m, b), Normal::new(m, b.sqrt()).unwrap().ln_pdf(x), 1e-10));
    }

    #[test]
    fn dirichlet_density_matches_reference(raw in vec_in(4, 0.05, 1.0), conc in 0.1f64..5.0) {
        let s: f64 = raw.iter().sum();
        let phi: Vec<f64> = raw.iter().map(|r| r / s).collect();
        let reference = Dirichlet::new(vec![conc; 4]).unwrap().ln_pdf(&nalgebra::DVector::from_vec(phi.clone()));
        prop_assert!(close(ln_dirichlet_sym(&phi, conc), reference, 1e-10));
    }

    #[test]
    fn spike_assignment_is_cumulative_over_lags(
        beta1 in 0.2f64..5.0, beta2 in 0.2f64..5.0, p in 2usize..6, seed in any::<u64>(),
    ) {
        let mut hp = HyperParams::defaults(2, p, 3);
        hp.beta1 = beta1;
        hp.beta2 = beta2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut spike = vec![0usize; p];
        for _ in 0..500 {
            let s = sample_prior_shrinkage(&hp, 0.5, &mut rng).unwrap();
            for zh in &s.z {
                for (j, &z) in zh.iter().enumerate() {
                    spike[j] += (z <= j) as usize;
                }
            }
        }
        // each lag has its own assignment, so only the spike probability rises with the lag
        let slack = |c: usize| 4.0 * (c as f64 * (1500 - c) as f64 / 1500.0).sqrt() + 1.0;
        prop_assert!(spike.windows(2).all(|w| w[0] as f64 <= w[1] as f64 + slack(w[0])), "{:?}", spike);
        prop_assert_eq!(spike[p - 1], 1500);
    }
}

#[test]
fn global_local_products_follow_the_direct_hierarchy() {
    const H: usize = 4;
    let (h, alpha) = (H, 0.3);
    let hp = HyperParams::defaults(2, 2, h);
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let n = 100_000 / h;
    let mut ours = Vec::with_capacity(n * h);
    for _ in 0..n {
        let s = sample_prior_shrinkage(&hp, alpha, &mut rng).unwrap();
        ours.extend(s.phi.iter().map(|f| f * s.tau));
    }
    // φ ~ Dir(α), τ ~ Ga(Hα, b_τ) drawn separately
    let dir = rand_distr::Dirichlet::<f64, H>::new([alpha; H]).unwrap();
    let tau = GammaDist::new(h as f64 * alpha, 1.0 / hp.b_tau).unwrap();
    let mut direct = Vec::with_capacity(n * h);
    for _ in 0..n {
        let phi: [f64; H] = dir.sample(&mut rng);
        let t = tau.sample(&mut rng);
        direct.extend(phi.iter().map(|f| f * t));
    }
    let (d, pval) = ks_two_sample(&ours, &direct);
    assert!(pval > 0.001, "KS D={d}, p={pval}");
}

// ---------------------------------------------------------------------------
// Metrics

proptest! {
    #[test]
    fn optimal_matching_never_loses_to_identity(
        est in prop::collection::vec(coef_set(2, 2), 3),
        truth in prop::collection::vec(coef_set(2, 2), 3),
    ) {
        let m = match_components_optimal(&est, &[0, 1, 2], &truth);
        let identity = [(0, 0), (1, 1), (2, 2)];
        prop_assert!(matching_cost(&est, &truth, &m) <= matching_cost(&est, &truth, &identity) + 1e-12);
    }

    #[test]
    fn empty_detection_is_monotone_in_threshold(
        est in prop::collection::vec(coef_set(2, 1), 4), lo in 0.0f64..1.0, gap in 0.0f64..1.0,
    ) {
        let small = detect_empty_components(&est, lo);
        let large = detect_empty_components(&est, lo + gap);
        prop_assert!(small.iter().all(|h| large.contains(h)));
    }

    #[test]
    fn accuracy_is_the_weighted_mean_of_sensitivity_and_specificity(
        e in prop::collection::vec(any::<bool>(), 1..40), seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t: Vec<bool> = e.iter().map(|_| rand::Rng::random::<bool>(&mut rng)).collect();
        let g = gamma_classification(&[ActivationPath::new(e)], &[ActivationPath::new(t)], &[(0, 0)]).unwrap();
        let (pos, neg) = ((g.tp + g.fn_) as f64, (g.tn + g.fp) as f64);
        let expect = (g.sensitivity.unwrap_or(0.0) * pos + g.specificity.unwrap_or(0.0) * neg) / (pos + neg);
        prop_assert!((g.accuracy.unwrap() - expect).abs() < 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn study_one_truths_are_stationary_in_every_subset(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (_, truth) = generate_study1_dataset(&SimDesign::study1(), &mut rng).unwrap();
        let bases: Vec<CoefMatrixSet> = truth.components.iter().map(|c| c.matricize()).collect();
        prop_assert!(all_subsets_stationary(&bases));
    }
}

// ---------------------------------------------------------------------------
// Files

fn float() -> impl Strategy<Value = f64> {
    prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn series_csv_round_trip_is_bit_exact(n in 1usize..4, rows in 2usize..6, seed in prop::collection::vec(float(), 24)) {
        let values: Vec<f64> = seed.into_iter().take(n * rows).collect();
        prop_assume!(values.len() == n * rows);
        let y = TimeSeries::from_rows(n, values).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("y.csv");
        save_timeseries_csv(&path, &y).unwrap();
        let back = load_timeseries_csv(&path).unwrap();
        prop_assert_eq!(back.names(), y.names());
        let same = back.as_slice().iter().zip(y.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits());
        prop_assert!(same);
    }

    #[test]
    fn truth_files_round_trip(c in prop::collection::vec(component(2, 2), 2), g in prop::collection::vec(any::<bool>(), 5), sd in vec_in(2, 0.1, 3.0)) {
        let truth = Truth {
            components: c,
            paths: vec![ActivationPath::new(g.clone()), ActivationPath::new(g.iter().map(|x| !x).collect())],
            noise_sd: sd,
        };
        let dir = tempfile::tempdir().unwrap();
        write_truth(dir.path(), &truth).unwrap();
        prop_assert_eq!(read_truth(dir.path()).unwrap(), truth);
    }
}
