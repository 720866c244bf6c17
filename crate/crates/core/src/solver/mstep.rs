//! M-step: temporal correlation matrix `B` and noise variance `λ`.

use nalgebra::DMatrix;

use super::linalg::{spd_inverse, symmetrize, trace_of_product};
use super::{PosteriorState, LAMBDA_MIN};
use crate::config::SolverConfig;
use crate::error::Result;
use crate::model::{apply_design, BlockLayout, BlockSparseProblem};

/// `(1/N) Σ_i ⟨α_i⟩ (Σ_{x_i} + μ_{x_i} μ_{x_i}ᵀ)`, whose inverse is the new `B`.
pub fn correlation_scatter(state: &PosteriorState, layout: &BlockLayout) -> DMatrix<f64> {
    let l = layout.block_len();
    let mut scatter = DMatrix::<f64>::zeros(l, l);
    for i in 0..layout.num_blocks() {
        let mu_i = state.mu_x.rows_range(layout.range(i));
        let second_moment = state.sigma_x.block(i, l) + mu_i * mu_i.transpose();
        scatter += second_moment * state.alpha_mean[i];
    }
    symmetrize(&(scatter / layout.num_blocks() as f64))
}

/// New temporal correlation matrix: the inverse of [`correlation_scatter`],
/// symmetrized, and rescaled to trace `L` when `config.normalize_b` is set.
/// Returns the identity when `config.learn_b` is off.
pub fn mstep_b(
    state: &PosteriorState,
    layout: &BlockLayout,
    config: &SolverConfig,
) -> Result<DMatrix<f64>> {
    let l = layout.block_len();
    if !config.learn_b {
        return Ok(DMatrix::identity(l, l));
    }
    let b = spd_inverse(
        &correlation_scatter(state, layout),
        config.spd_jitter,
        "temporal correlation B",
    )?;
    if config.normalize_b {
        return Ok(&b * (l as f64 / b.trace()));
    }
    Ok(b)
}

/// `Tr(Σ_x E[Σ_0⁻¹]) = Σ_i ⟨α_i⟩ tr(Σ_{x_i} B)`.
pub fn prior_precision_trace(state: &PosteriorState, layout: &BlockLayout) -> f64 {
    (0..layout.num_blocks())
        .map(|i| {
            state.alpha_mean[i]
                * trace_of_product(&state.sigma_x.block(i, layout.block_len()), &state.b_matrix)
        })
        .sum()
}

/// Noise variance update
///
/// `λ = [‖y − Dμ_x‖² + λ̂ (N·L − Tr(Σ_x E[Σ_0⁻¹]))] / (M·L)`,
///
/// where `λ̂ = state.lambda` is the previous estimate. Floored at [`LAMBDA_MIN`].
pub fn mstep_lambda(
    problem: &BlockSparseProblem,
    state: &PosteriorState,
    _config: &SolverConfig,
) -> Result<f64> {
    let layout = problem.layout();
    let fitted = apply_design(problem.phi(), &state.mu_x, &layout)?;
    let residual = (problem.y_stacked() - fitted).norm_squared();
    let effective = layout.total_len() as f64 - prior_precision_trace(state, &layout);
    let lambda = (residual + state.lambda * effective)
        / (problem.num_sensors() * problem.num_samples()) as f64;
    if lambda.is_nan() || lambda < LAMBDA_MIN {
        log::debug!("noise variance {lambda:e} floored at {LAMBDA_MIN:e}");
        return Ok(LAMBDA_MIN);
    }
    Ok(lambda)
}
