//! Variational Bayes EM for block-sparse recovery with temporally correlated
//! blocks and partially erroneous support knowledge.
//!
//! One iteration updates, in order, the posterior of `x` (mean and
//! covariance), the sparsity precisions `⟨α⟩`, the knowledge rates `⟨b⟩`,
//! the shared temporal correlation matrix `B` and the noise variance `λ`.
//! The loop stops once the posterior mean moves by less than `gamma_tol`
//! in the infinity norm.

mod estep;
pub(crate) mod linalg;
mod mstep;

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

pub use estep::{estep_alpha, estep_b, estep_x, estep_x_spectral};
pub use linalg::is_positive_definite;
pub use mstep::{correlation_scatter, mstep_b, mstep_lambda, prior_precision_trace};

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::model::{row_means, unstack, BlockSparseProblem, PriorKnowledgeSet};

/// Cap on `⟨α_i⟩`; blocks at the cap are effectively pruned.
pub const ALPHA_MAX: f64 = 1e12;
/// Floor on the noise variance `λ`.
pub const LAMBDA_MIN: f64 = 1e-12;

/// Posterior covariance of `x`, either in full or as its diagonal `L × L` blocks.
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Full(DMatrix<f64>),
    Blocks(Vec<DMatrix<f64>>),
}

impl Covariance {
    /// Diagonal block `Σ_{x_i}` for zero-based block `i` of length `l`.
    pub fn block(&self, i: usize, l: usize) -> DMatrix<f64> {
        match self {
            Covariance::Full(full) => full.view((i * l, i * l), (l, l)).into_owned(),
            Covariance::Blocks(blocks) => blocks[i].clone(),
        }
    }

    /// Cholesky succeeds on the full matrix, or on every block.
    pub fn is_positive_definite(&self) -> bool {
        match self {
            Covariance::Full(full) => is_positive_definite(full),
            Covariance::Blocks(blocks) => blocks.iter().all(is_positive_definite),
        }
    }

    /// Largest `|Σ_ij − Σ_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        let asym = |m: &DMatrix<f64>| (m - m.transpose()).abs().max();
        match self {
            Covariance::Full(full) => asym(full),
            Covariance::Blocks(blocks) => blocks.iter().map(asym).fold(0.0, f64::max),
        }
    }
}

/// All variational moments and hyperparameters at one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorState {
    pub mu_x: DVector<f64>,
    pub sigma_x: Covariance,
    pub alpha_mean: DVector<f64>,
    pub b_mean: DVector<f64>,
    /// Temporal correlation matrix `B`.
    pub b_matrix: DMatrix<f64>,
    pub lambda: f64,
    pub iteration: usize,
}

impl PosteriorState {
    /// Starting point of the iteration: `B = I`, `λ = 1`, `⟨α⟩ = 1`,
    /// `⟨b_i⟩ = b_init_known` on the knowledge set and `b_small` elsewhere.
    pub fn initial(
        problem: &BlockSparseProblem,
        prior_set: &PriorKnowledgeSet,
        config: &SolverConfig,
    ) -> Self {
        let n = problem.num_errors();
        let l = problem.num_samples();
        let mut b_mean = DVector::from_element(n, config.b_small);
        if config.use_prior_knowledge {
            for i in prior_set.iter_zero_based() {
                b_mean[i] = config.b_init_known;
            }
        }
        Self {
            mu_x: DVector::zeros(n * l),
            sigma_x: Covariance::Blocks(vec![DMatrix::zeros(l, l); n]),
            alpha_mean: DVector::from_element(n, 1.0),
            b_mean,
            b_matrix: DMatrix::identity(l, l),
            lambda: 1.0,
            iteration: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Row-wise mean of the block estimates, one entry per process error.
    pub mean_deviations: DVector<f64>,
    /// N × L matrix whose row `i` is the estimate of block `i`.
    pub block_means: DMatrix<f64>,
    /// One-based block indices by descending `|mean_deviations|`, ties to the lower index.
    pub ranking: Vec<usize>,
    pub converged: bool,
    pub iterations_run: usize,
    pub final_state: PosteriorState,
}

impl SolveResult {
    /// The `k` highest-ranked blocks (one-based).
    pub fn ranking_for_k(&self, k: usize) -> Result<BTreeSet<usize>> {
        ranking_for_k(self, k)
    }
}

/// Zero-based indices ordered by descending `|values|`, ties broken by lower index.
pub fn rank_by_magnitude(values: &DVector<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].abs().total_cmp(&values[i].abs()).then(i.cmp(&j)));
    order
}

/// Zero-based indices of the `k` largest-magnitude entries.
pub fn top_k(values: &DVector<f64>, k: usize) -> Result<BTreeSet<usize>> {
    if k == 0 || k > values.len() {
        return Err(Error::InvalidProblem(format!(
            "k = {k} outside 1..={}",
            values.len()
        )));
    }
    Ok(rank_by_magnitude(values).into_iter().take(k).collect())
}

/// One-based indices of the `k` largest-magnitude mean deviations.
pub fn ranking_for_k(result: &SolveResult, k: usize) -> Result<BTreeSet<usize>> {
    Ok(top_k(&result.mean_deviations, k)?
        .into_iter()
        .map(|i| i + 1)
        .collect())
}

/// Runs the VBEM iteration to convergence or `max_iters`.
pub fn solve(
    problem: &BlockSparseProblem,
    prior_set: &PriorKnowledgeSet,
    config: &SolverConfig,
) -> Result<SolveResult> {
    solve_with_observer(problem, prior_set, config, |_| {})
}

/// [`solve`], calling `observer` with the state after every completed iteration.
pub fn solve_with_observer<F>(
    problem: &BlockSparseProblem,
    prior_set: &PriorKnowledgeSet,
    config: &SolverConfig,
    mut observer: F,
) -> Result<SolveResult>
where
    F: FnMut(&PosteriorState),
{
    config.validate()?;
    prior_set.check_range(problem.num_errors())?;
    let active_prior = if config.use_prior_knowledge {
        prior_set.clone()
    } else {
        PriorKnowledgeSet::empty()
    };
    let layout = problem.layout();
    let mut state = PosteriorState::initial(problem, &active_prior, config);
    let mut converged = false;

    for t in 1..=config.max_iters {
        let (mu, sigma) = estep::estep_x_with_engine(problem, &state, config)?;
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite posterior mean at iteration {t}"
            )));
        }
        let change = (&mu - &state.mu_x).amax();
        state.mu_x = mu;
        state.sigma_x = sigma;
        // The noise update needs the prior precision that produced Σ_x, so
        // it is evaluated before ⟨α⟩ and B move on.
        let lambda = mstep_lambda(problem, &state, config)?;
        state.alpha_mean = estep_alpha(&state, &layout, config)?;
        state.b_mean = estep_b(&state, &active_prior, config);
        state.b_matrix = mstep_b(&state, &layout, config)?;
        state.lambda = lambda;
        state.iteration = t;
        observer(&state);
        if change < config.gamma_tol {
            converged = true;
            break;
        }
    }

    let block_means = unstack(&state.mu_x, layout.num_blocks(), layout.block_len())?;
    let mean_deviations = row_means(&state.mu_x, &layout)?;
    let ranking = rank_by_magnitude(&mean_deviations)
        .into_iter()
        .map(|i| i + 1)
        .collect();
    Ok(SolveResult {
        mean_deviations,
        block_means,
        ranking,
        converged,
        iterations_run: state.iteration,
        final_state: state,
    })
}
