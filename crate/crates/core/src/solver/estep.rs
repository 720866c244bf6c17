//! E-step: moments of the approximate posteriors q(x), q(α) and q(b).

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::linalg::{add_to_diagonal, cholesky_with_jitter, symmetrize, trace_of_product};
use super::{Covariance, PosteriorState, ALPHA_MAX};
use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::model::{apply_design_transpose, BlockLayout, BlockSparseProblem, PriorKnowledgeSet};

fn check_state(problem: &BlockSparseProblem, state: &PosteriorState) -> Result<()> {
    let n = problem.num_errors();
    let l = problem.num_samples();
    if state.alpha_mean.len() != n {
        return Err(Error::Dimension {
            context: "alpha_mean length (N)",
            expected: n,
            actual: state.alpha_mean.len(),
        });
    }
    if state.b_matrix.shape() != (l, l) {
        return Err(Error::Dimension {
            context: "B size (L)",
            expected: l,
            actual: state.b_matrix.nrows(),
        });
    }
    if !positive(state.lambda) || state.alpha_mean.iter().any(|&a| !positive(a)) {
        return Err(Error::Numerical(
            "λ and ⟨α⟩ must be strictly positive".into(),
        ));
    }
    Ok(())
}

/// False for NaN as well as for nonpositive values.
fn positive(x: f64) -> bool {
    x > 0.0
}

/// Posterior mean and full covariance of `x` from the precision form
///
/// `Σ_x = (λ⁻¹ DᵀD + ⟨AB⟩ + jitter·I)⁻¹`, `μ_x = λ⁻¹ Σ_x Dᵀ y`,
///
/// with `DᵀD = (ΦᵀΦ) ⊗ I_L` and `⟨AB⟩ = blockdiag(⟨α_i⟩ B)`.
pub fn estep_x(
    problem: &BlockSparseProblem,
    state: &PosteriorState,
    config: &SolverConfig,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_state(problem, state)?;
    let layout = problem.layout();
    let n = layout.num_blocks();
    let l = layout.block_len();
    let gram = problem.phi().tr_mul(problem.phi());
    let inv_lambda = 1.0 / state.lambda;

    let mut precision = DMatrix::<f64>::zeros(n * l, n * l);
    for i in 0..n {
        for j in 0..n {
            let g = gram[(i, j)] * inv_lambda;
            if g != 0.0 {
                for t in 0..l {
                    precision[(i * l + t, j * l + t)] += g;
                }
            }
        }
        let mut block = precision.view_mut((i * l, i * l), (l, l));
        block += &state.b_matrix * state.alpha_mean[i];
    }

    let chol = cholesky_with_jitter(&precision, config.spd_jitter, "posterior precision of x")?;
    let sigma = symmetrize(&chol.inverse());
    let dty = apply_design_transpose(problem.phi(), problem.y_stacked(), &layout)?;
    let mu = &sigma * dty * inv_lambda;
    Ok((mu, sigma))
}

/// Same moments as [`estep_x`], computed in the eigenbasis of `B`.
///
/// With `B = V diag(β_l) Vᵀ`, the prior precision of every block is
/// `V diag(⟨α_i⟩β_l + jitter) Vᵀ` and `D` commutes with `I ⊗ V`, so the
/// posterior splits into `L` independent single-vector problems
/// `ỹ_l = Φ x̃_l + v` with diagonal prior covariance
/// `c_il = 1 / (⟨α_i⟩β_l + jitter)`. Each one is solved through its
/// `M × M` marginal covariance `λI + Φ diag(c_l) Φᵀ`.
///
/// Returns `μ_x` and the diagonal blocks `Σ_{x_i}`.
pub fn estep_x_spectral(
    problem: &BlockSparseProblem,
    state: &PosteriorState,
    config: &SolverConfig,
) -> Result<(DVector<f64>, Vec<DMatrix<f64>>)> {
    check_state(problem, state)?;
    let phi = problem.phi();
    let m = problem.num_sensors();
    let n = problem.num_errors();
    let l = problem.num_samples();

    let eig = SymmetricEigen::new(symmetrize(&state.b_matrix));
    if eig.eigenvalues.iter().any(|&v| !positive(v)) {
        return Err(Error::Numerical("B is not positive definite".into()));
    }
    let v = &eig.eigenvectors;
    let rotated_y = problem.measurements() * v;

    let mut mu_rot = DMatrix::<f64>::zeros(n, l);
    let mut var_rot = DMatrix::<f64>::zeros(n, l);
    let mut scaled = DMatrix::<f64>::zeros(m, n);
    for t in 0..l {
        let c = DVector::from_iterator(
            n,
            state
                .alpha_mean
                .iter()
                .map(|&a| 1.0 / (a * eig.eigenvalues[t] + config.spd_jitter)),
        );
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col.copy_from(&(phi.column(j) * c[j]));
        }
        let mut marginal = &scaled * phi.transpose();
        add_to_diagonal(&mut marginal, state.lambda);
        let marginal = symmetrize(&marginal);
        let chol = cholesky_with_jitter(&marginal, 0.0, "marginal covariance of y")?;

        let z = chol.solve(&rotated_y.column(t).into_owned());
        let mean = phi.tr_mul(&z).component_mul(&c);
        mu_rot.set_column(t, &mean);

        let mut whitened = phi.clone();
        chol.l_dirty()
            .solve_lower_triangular_mut(&mut whitened)
            .then_some(())
            .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
        for i in 0..n {
            let quad = whitened.column(i).norm_squared();
            let var = c[i] - c[i] * c[i] * quad;
            // Cancellation can push tiny variances through zero.
            var_rot[(i, t)] = var.max(c[i] * f64::EPSILON);
        }
    }

    let mu_mat = &mu_rot * v.transpose();
    let mu = crate::model::stack_measurements(&mu_mat);
    let blocks = (0..n)
        .map(|i| {
            let weighted = v * DMatrix::from_diagonal(&var_rot.row(i).transpose());
            symmetrize(&(weighted * v.transpose()))
        })
        .collect();
    Ok((mu, blocks))
}

/// `⟨α_i⟩ = (a + L/2) / (tr[(Σ_{x_i} + μ_{x_i}μ_{x_i}ᵀ) B]/2 + ⟨b_i⟩)`,
/// capped at [`ALPHA_MAX`].
///
/// `state.b_mean` already holds the fixed small rate for blocks outside the
/// prior-knowledge set.
pub fn estep_alpha(
    state: &PosteriorState,
    layout: &BlockLayout,
    config: &SolverConfig,
) -> Result<DVector<f64>> {
    let l = layout.block_len();
    let shape = config.a + l as f64 / 2.0;
    let mut alpha = DVector::zeros(layout.num_blocks());
    for i in 0..layout.num_blocks() {
        let mu_i = state.mu_x.rows_range(layout.range(i));
        let sigma_i = state.sigma_x.block(i, l);
        let quad = (mu_i.transpose() * &state.b_matrix * mu_i)[(0, 0)];
        let rate = (trace_of_product(&sigma_i, &state.b_matrix) + quad) / 2.0 + state.b_mean[i];
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::Numerical(format!(
                "posterior rate of α_{} is {rate}, expected positive",
                i + 1
            )));
        }
        alpha[i] = (shape / rate).min(ALPHA_MAX);
    }
    Ok(alpha)
}

/// `⟨b_i⟩ = (p + a)/(q + ⟨α_i⟩)` for `i ∈ P`; the fixed small rate elsewhere.
pub fn estep_b(
    state: &PosteriorState,
    prior_set: &PriorKnowledgeSet,
    config: &SolverConfig,
) -> DVector<f64> {
    let mut b = DVector::from_element(state.alpha_mean.len(), config.b_small);
    if config.use_prior_knowledge {
        for i in prior_set.iter_zero_based() {
            b[i] = (config.p_shape + config.a) / (config.q_rate + state.alpha_mean[i]);
        }
    }
    b
}

/// Wraps [`estep_x`] or [`estep_x_spectral`] according to `config.engine`.
pub(crate) fn estep_x_with_engine(
    problem: &BlockSparseProblem,
    state: &PosteriorState,
    config: &SolverConfig,
) -> Result<(DVector<f64>, Covariance)> {
    match config.engine {
        crate::config::CovarianceEngine::Dense => {
            estep_x(problem, state, config).map(|(mu, s)| (mu, Covariance::Full(s)))
        }
        crate::config::CovarianceEngine::Spectral => {
            estep_x_spectral(problem, state, config).map(|(mu, b)| (mu, Covariance::Blocks(b)))
        }
    }
}
