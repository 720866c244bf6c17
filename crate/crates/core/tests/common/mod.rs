//! Dense reference computations shared by the integration tests. Everything
//! here materializes `D = Φ ⊗ I_L` and the block-diagonal prior precision
//! explicitly, independent of the structured code paths under test.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use satsbl::solver::{Covariance, PosteriorState};
use satsbl::{BlockSparseProblem, PriorKnowledgeSet, SolverConfig};

pub fn gaussian<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_vec<R: Rng>(rng: &mut R, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample(StandardNormal))
}

/// `Φ ⊗ I_L` written out entry by entry.
pub fn kron_identity(phi: &DMatrix<f64>, l: usize) -> DMatrix<f64> {
    let (m, n) = phi.shape();
    let mut d = DMatrix::zeros(m * l, n * l);
    for i in 0..m {
        for j in 0..n {
            for t in 0..l {
                d[(i * l + t, j * l + t)] = phi[(i, j)];
            }
        }
    }
    d
}

pub fn random_spd<R: Rng>(rng: &mut R, l: usize) -> DMatrix<f64> {
    let a = gaussian(rng, l, l);
    &a * a.transpose() / l as f64 + DMatrix::identity(l, l) * 0.5
}

pub fn random_problem<R: Rng>(rng: &mut R, m: usize, n: usize, l: usize) -> BlockSparseProblem {
    let phi = gaussian(rng, m, n);
    let y = gaussian_vec(rng, m * l);
    BlockSparseProblem::new(phi, y, l).unwrap()
}

/// A state with random hyperparameters; the moments are left at zero.
pub fn random_state<R: Rng>(rng: &mut R, problem: &BlockSparseProblem) -> PosteriorState {
    let n = problem.num_errors();
    let l = problem.num_samples();
    let mut state = PosteriorState::initial(
        problem,
        &PriorKnowledgeSet::empty(),
        &SolverConfig::default(),
    );
    state.alpha_mean = DVector::from_fn(n, |_, _| rng.random_range(0.2..5.0));
    state.b_mean = DVector::from_fn(n, |_, _| rng.random_range(1e-4..1.0));
    state.b_matrix = random_spd(rng, l);
    state.lambda = rng.random_range(0.1..2.0);
    state
}

/// [`random_state`] with the posterior moments filled in from a dense solve.
pub fn filled_state<R: Rng>(rng: &mut R, problem: &BlockSparseProblem) -> PosteriorState {
    let mut state = random_state(rng, problem);
    let (mu, sigma) = dense_posterior(
        problem,
        &state.alpha_mean,
        &state.b_matrix,
        state.lambda,
        0.0,
    );
    state.mu_x = mu;
    state.sigma_x = Covariance::Full(sigma);
    state
}

/// `blockdiag(α_i B)`.
pub fn prior_precision(alpha: &DVector<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let l = b.nrows();
    let n = alpha.len();
    let mut p = DMatrix::zeros(n * l, n * l);
    for i in 0..n {
        p.view_mut((i * l, i * l), (l, l))
            .copy_from(&(b * alpha[i]));
    }
    p
}

/// Posterior mean and covariance of `x` by explicit inversion.
pub fn dense_posterior(
    problem: &BlockSparseProblem,
    alpha: &DVector<f64>,
    b: &DMatrix<f64>,
    lambda: f64,
    jitter: f64,
) -> (DVector<f64>, DMatrix<f64>) {
    let d = kron_identity(problem.phi(), problem.num_samples());
    let nl = d.ncols();
    let precision = d.transpose() * &d / lambda
        + prior_precision(alpha, b)
        + DMatrix::identity(nl, nl) * jitter;
    let sigma = precision
        .try_inverse()
        .expect("posterior precision is invertible");
    let sigma = (&sigma + sigma.transpose()) * 0.5;
    let mu = &sigma * d.transpose() * problem.y_stacked() / lambda;
    (mu, sigma)
}

pub fn full_covariance(cov: &Covariance, n: usize, l: usize) -> DMatrix<f64> {
    match cov {
        Covariance::Full(m) => m.clone(),
        Covariance::Blocks(_) => {
            let mut out = DMatrix::zeros(n * l, n * l);
            for i in 0..n {
                out.view_mut((i * l, i * l), (l, l))
                    .copy_from(&cov.block(i, l));
            }
            out
        }
    }
}

/// Keeps only the diagonal `L × L` blocks.
pub fn block_diagonal_part(full: &DMatrix<f64>, l: usize) -> DMatrix<f64> {
    let n = full.nrows() / l;
    let mut out = DMatrix::zeros(full.nrows(), full.ncols());
    for i in 0..n {
        out.view_mut((i * l, i * l), (l, l))
            .copy_from(&full.view((i * l, i * l), (l, l)));
    }
    out
}

pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

pub fn rel_err_vec(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Expected complete-data log likelihood in `B`, up to constants.
pub fn q_b(state: &PosteriorState, n: usize, l: usize, b: &DMatrix<f64>) -> f64 {
    let sigma = full_covariance(&state.sigma_x, n, l);
    let mut fit = 0.0;
    for i in 0..n {
        let mu_i = state.mu_x.rows(i * l, l).into_owned();
        let second = sigma.view((i * l, i * l), (l, l)) + &mu_i * mu_i.transpose();
        fit += state.alpha_mean[i] * (second * b).trace();
    }
    0.5 * n as f64 * b.determinant().ln() - 0.5 * fit
}

/// `⟨ln p(y | x; λ)⟩` up to constants, with the trace term computed directly.
pub fn q_lambda(problem: &BlockSparseProblem, state: &PosteriorState, lambda: f64) -> f64 {
    let d = kron_identity(problem.phi(), problem.num_samples());
    let sigma = full_covariance(&state.sigma_x, problem.num_errors(), problem.num_samples());
    let residual = (problem.y_stacked() - &d * &state.mu_x).norm_squared();
    let spread = (d.transpose() * &d * sigma).trace();
    let ml = (problem.num_sensors() * problem.num_samples()) as f64;
    -0.5 * ml * lambda.ln() - (residual + spread) / (2.0 * lambda)
}
