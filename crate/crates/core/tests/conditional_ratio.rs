use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tvvar::gibbs::blocks::log_cond_sigma2;
use tvvar::gibbs::check::conditional_ratio_suite;
use tvvar::gibbs::init::initial_state;
use tvvar::gibbs::{log_joint, Design};
use tvvar::priors::HyperParams;
use tvvar::sim::{generate_study1_dataset, SimDesign};

const TOL: f64 = 1e-8;

fn small_problem() -> (tvvar::TimeSeries, HyperParams) {
    let design = SimDesign {
        n: 3,
        t_len: 30,
        p: 2,
        h: 2,
        noise_sd: vec![0.5, 1.0, 1.5],
        inclusion: 0.5,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (y, _) = generate_study1_dataset(&design, &mut rng).unwrap();
    (y, HyperParams::defaults(3, 2, 2))
}

#[test]
fn every_block_matches_the_joint_density() {
    let (y, hp) = small_problem();
    let report = conditional_ratio_suite(&y, &hp, 100, 5).unwrap();
    assert_eq!(report.len(), 13);
    for r in &report {
        assert_eq!(r.pairs, 100);
        assert!(r.max_abs_error < TOL, "{}: {:e}", r.block, r.max_abs_error);
    }
}

#[test]
fn ratio_check_detects_a_wrong_conditional() {
    let (y, hp) = small_problem();
    let design = Design::new(&y, hp.p);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let base = initial_state(&design, &hp, &mut rng).unwrap();
    let mut moved = base.clone();
    moved.sigma2.iter_mut().for_each(|s| *s *= 1.7);
    let dj = log_joint(&moved, &hp, &design).unwrap() - log_joint(&base, &hp, &design).unwrap();
    let mut wrong = hp.clone();
    wrong.a_sigma += 1.0;
    let dc = log_cond_sigma2(&moved, &wrong, &design) - log_cond_sigma2(&base, &wrong, &design);
    assert!((dj - dc).abs() > 1e-3);
    let dc = log_cond_sigma2(&moved, &hp, &design) - log_cond_sigma2(&base, &hp, &design);
    assert!((dj - dc).abs() < TOL);
}
