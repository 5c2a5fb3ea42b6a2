//! Joint-distribution tests: the successive-conditional simulator must
//! reproduce the prior marginals.

use tvvar::gibbs::check::{geweke, geweke_summary, geweke_tiny_hyper};
use tvvar::gibbs::{AuxSampler, ChainConfig, ModelState};
use tvvar::priors::{HyperParams, IsingBox};
use tvvar::stats::ks_two_sample;

const P_MIN: f64 = 0.001;

fn assert_marginals(names: &[&str], g: &tvvar::gibbs::check::GewekeDraws) {
    for (k, name) in names.iter().enumerate() {
        let (a, b) = g.column(k);
        let (d, p) = ks_two_sample(&a, &b);
        assert!(p > P_MIN, "{name}: KS D={d:.4}, p={p:.2e}");
    }
}

#[test]
fn tiny_model_recovers_prior_marginals() {
    let hp = geweke_tiny_hyper();
    let g = geweke(&hp, 12, 10_000, 50, &ChainConfig::default(), 2024, geweke_summary).unwrap();
    assert_marginals(&["tau", "theta", "kappa", "mean gamma"], &g);
}

#[test]
fn tiny_model_with_transfer_matrix_auxiliary_draws() {
    let hp = geweke_tiny_hyper();
    let cfg = ChainConfig {
        aux_sampler: AuxSampler::TransferMatrix,
        ..ChainConfig::default()
    };
    let g = geweke(&hp, 12, 5_000, 50, &cfg, 77, geweke_summary).unwrap();
    assert_marginals(&["tau", "theta", "kappa", "mean gamma"], &g);
}

fn two_component_summary(st: &ModelState) -> Vec<f64> {
    let s = &st.shrink;
    let c = &st.components[1];
    vec![
        s.tau,
        s.phi[0],
        s.lambda1[1],
        s.w2[0][1].ln(),
        s.w3[1][0].ln(),
        (s.z[1][0] == 0) as u8 as f64,
        s.v[1][0],
        c.alpha3[0],
        c.alpha1[0] * c.alpha2[1] * c.alpha3[1],
        st.ising[1].kappa(),
        st.paths[0].active_fraction(),
        st.sigma2[1].ln(),
    ]
}

#[test]
fn two_components_two_lags_recover_prior_marginals() {
    let mut hp = HyperParams::defaults(2, 2, 2);
    hp.alpha_grid = vec![1.0];
    hp.b_tau = 8.0;
    hp.a_sigma = 3.0;
    hp.b_sigma = 2.0;
    hp.ising_boxes = vec![
        IsingBox {
            theta_min: -2.0,
            theta_max: 2.0,
            kappa_max: 2.0,
        };
        2
    ];
    let g = geweke(&hp, 12, 10_000, 30, &ChainConfig::default(), 5, two_component_summary).unwrap();
    assert_marginals(
        &[
            "tau", "phi_0", "lambda1_1", "log W2", "log W3", "spike lag 1", "v", "alpha3",
            "lag-2 entry", "kappa_1", "mean gamma_0", "log sigma2",
        ],
        &g,
    );
}
