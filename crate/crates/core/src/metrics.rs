//! Failure rate and NMSE of the mean-deviation estimates, aggregated over
//! trials and knowledge cases.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DVector;
use serde::Serialize;

use crate::datagen::KnowledgeCase;
use crate::error::{Error, Result};
use crate::solver::top_k;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialScore {
    pub failed: bool,
    pub nmse: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseSummary {
    pub case: KnowledgeCase,
    pub failure_rate: f64,
    pub mean_nmse: f64,
    pub trials: usize,
    pub nonconverged: usize,
}

/// Method-level summary: unweighted mean over cases of the per-case means.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub failure_rate: f64,
    pub mean_nmse: f64,
    pub cases: Vec<CaseSummary>,
    /// The `(0, 0)` case, when present.
    pub no_knowledge: Option<CaseSummary>,
}

/// True (failed) when the top-`k` magnitudes of `mean_deviations` are not
/// exactly the one-based `support_true`.
pub fn score_failure(
    mean_deviations: &DVector<f64>,
    support_true: &BTreeSet<usize>,
    k: usize,
) -> Result<bool> {
    if support_true.len() != k {
        return Err(Error::InvalidProblem(format!(
            "support has {} indices but k = {k}",
            support_true.len()
        )));
    }
    let picked: BTreeSet<usize> = top_k(mean_deviations, k)?
        .into_iter()
        .map(|i| i + 1)
        .collect();
    Ok(&picked != support_true)
}

/// `‖estimate − truth‖² / ‖truth‖²`.
pub fn score_nmse(mean_deviations: &DVector<f64>, x_bar_true: &DVector<f64>) -> Result<f64> {
    if mean_deviations.len() != x_bar_true.len() {
        return Err(Error::Dimension {
            context: "score_nmse",
            expected: x_bar_true.len(),
            actual: mean_deviations.len(),
        });
    }
    let truth = x_bar_true.norm_squared();
    if truth == 0.0 {
        return Err(Error::InvalidProblem(
            "NMSE undefined for an all-zero truth".into(),
        ));
    }
    Ok((mean_deviations - x_bar_true).norm_squared() / truth)
}

/// Score of one trial keyed by its case and trial number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyedScore {
    pub case: KnowledgeCase,
    pub trial: usize,
    pub score: TrialScore,
}

/// Per-case and method-level means. Scores may arrive in any order; they
/// are sorted by `(case, trial)` before summation, so the result does not
/// depend on it.
pub fn aggregate(scores: &[KeyedScore]) -> Result<MethodSummary> {
    if scores.is_empty() {
        return Err(Error::Empty("no trial scores to aggregate"));
    }
    let mut by_case: BTreeMap<KnowledgeCase, BTreeMap<usize, TrialScore>> = BTreeMap::new();
    for s in scores {
        if by_case
            .entry(s.case)
            .or_default()
            .insert(s.trial, s.score)
            .is_some()
        {
            return Err(Error::InvalidProblem(format!(
                "duplicate score for case {} trial {}",
                s.case, s.trial
            )));
        }
    }
    let trials = by_case.values().next().map(BTreeMap::len).unwrap_or(0);
    if by_case.values().any(|t| t.len() != trials) {
        return Err(Error::InvalidProblem(
            "cases have different trial counts".into(),
        ));
    }

    let cases: Vec<CaseSummary> = by_case
        .into_iter()
        .map(|(case, trials)| {
            let count = trials.len();
            let failed = trials.values().filter(|s| s.failed).count();
            let nmse_sum: f64 = trials.values().map(|s| s.nmse).sum();
            CaseSummary {
                case,
                failure_rate: failed as f64 / count as f64,
                mean_nmse: nmse_sum / count as f64,
                trials: count,
                nonconverged: trials.values().filter(|s| !s.converged).count(),
            }
        })
        .collect();
    let n_cases = cases.len() as f64;
    Ok(MethodSummary {
        failure_rate: cases.iter().map(|c| c.failure_rate).sum::<f64>() / n_cases,
        mean_nmse: cases.iter().map(|c| c.mean_nmse).sum::<f64>() / n_cases,
        no_knowledge: cases.iter().find(|c| c.case.is_empty()).cloned(),
        cases,
    })
}

/// Five-number boxplot summary with 1.5×IQR whiskers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxplotStats {
    /// Smallest value not below `Q1 − 1.5·IQR`.
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    /// Largest value not above `Q3 + 1.5·IQR`.
    pub max: f64,
    pub mean: f64,
}

/// Linearly interpolated quantile of sorted data (the "type 7" definition).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn boxplot(values: &[f64]) -> Result<BoxplotStats> {
    if values.is_empty() {
        return Err(Error::Empty("boxplot of no values"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let lo_fence = q1 - 1.5 * iqr;
    let hi_fence = q3 + 1.5 * iqr;
    Ok(BoxplotStats {
        min: sorted
            .iter()
            .copied()
            .find(|&v| v >= lo_fence)
            .unwrap_or(q1),
        q1,
        median: quantile_sorted(&sorted, 0.5),
        q3,
        max: sorted
            .iter()
            .rev()
            .copied()
            .find(|&v| v <= hi_fence)
            .unwrap_or(q3),
        mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
    })
}
