//! Shared fixtures for the benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tvvar::gibbs::init::initial_state;
use tvvar::gibbs::Design;
use tvvar::sim::{generate_study1_dataset, SimDesign};
use tvvar::{HyperParams, ModelState, TimeSeries};

/// A simulation-study-1 dataset with the default fitted order and rank.
pub fn study1_problem(seed: u64) -> (TimeSeries, HyperParams) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (y, _) = generate_study1_dataset(&SimDesign::study1(), &mut rng).expect("study design is valid");
    let hp = HyperParams::defaults(y.n(), 4, 4);
    (y, hp)
}

/// The sampler's starting state for `y`.
pub fn start_state(y: &TimeSeries, hp: &HyperParams, seed: u64) -> ModelState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    initial_state(&Design::new(y, hp.p), hp, &mut rng).expect("initialization succeeds")
}
