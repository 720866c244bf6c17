//! Fixtures shared by the criterion benches.

use nalgebra::DVector;
use satsbl::datagen::{
    generate_instance, trial_rng, DictionarySource, GeneratedInstance, ScenarioSpec, Snr,
};
use satsbl::solver::PosteriorState;
use satsbl::{PriorKnowledgeSet, SolverConfig};

/// Problem sizes exercised by the benches, named after the study they mimic.
pub const SHAPES: [(&str, usize, usize, usize, usize); 3] = [
    // (name, M, N, K, L)
    ("m8_n40_l3", 8, 40, 6, 3),
    ("m12_n33_l5", 12, 33, 3, 5),
    ("m10_n90_l3", 10, 90, 4, 3),
];

pub fn instance(m: usize, n: usize, k: usize, l: usize) -> GeneratedInstance {
    let spec = ScenarioSpec {
        m,
        n,
        k,
        l,
        beta: 0.9,
        snr: Snr::Db(25.0),
        trials: 1,
        seed: 17,
        dictionary: DictionarySource::RandomHypersphere,
    };
    generate_instance(&spec, &mut trial_rng(17, 0, 0)).expect("bench instance")
}

/// A state with a nontrivial `B` and spread-out `α`, as seen mid-solve.
pub fn mid_solve_state(inst: &GeneratedInstance, config: &SolverConfig) -> PosteriorState {
    let problem = &inst.problem;
    let mut state = PosteriorState::initial(problem, &PriorKnowledgeSet::empty(), config);
    let n = problem.num_errors();
    let l = problem.num_samples();
    state.alpha_mean = DVector::from_fn(n, |i, _| 0.5 + (i % 7) as f64);
    state.b_matrix =
        nalgebra::DMatrix::from_fn(l, l, |i, j| 0.8f64.powi((i as i32 - j as i32).abs()));
    state.lambda = 0.05;
    state
}

pub fn random_vector(len: usize) -> DVector<f64> {
    DVector::from_fn(len, |i, _| ((i * 7919) % 101) as f64 / 50.0 - 1.0)
}
