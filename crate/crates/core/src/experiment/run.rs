use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;

use crate::config::SolverConfig;
use crate::datagen::{
    enumerate_cases, generate_instance, sample_knowledge, trial_rng, DictionarySource,
    GeneratedInstance, KnowledgeCase,
};
use crate::error::{Error, Result};
use crate::experiment::config::{StudyConfig, SweepParameter, SweepPoint, Variant};
use crate::metrics::{aggregate, score_failure, score_nmse, KeyedScore, MethodSummary, TrialScore};
use crate::model::{mutual_coherence, PriorKnowledgeSet};
use crate::solver::solve;

/// Mutual coherence at or above which a fixed dictionary is flagged.
pub const HIGH_COHERENCE: f64 = 0.99;

/// Aggregated scores of one variant at one sweep value.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep_value: f64,
    pub variant: Variant,
    pub summary: MethodSummary,
    /// Trials whose solve aborted on a factorization failure. They are
    /// scored as failed with NMSE 1 (the zero estimate).
    pub numerical_failures: usize,
}

/// One row per (sweep value, variant), sweep values in config order and
/// variants in [`StudyConfig::variants`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub parameter: SweepParameter,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn get(&self, sweep_value: f64, variant: Variant) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.sweep_value == sweep_value && r.variant == variant)
    }
}

/// Wall-clock measurements. Kept apart from the scores because they vary
/// between runs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Timing {
    pub total_seconds: f64,
    /// Wall time per sweep value, in sweep order.
    pub per_sweep_value: Vec<(f64, f64)>,
    /// Summed solve time per (sweep value, variant).
    pub solve_seconds: BTreeMap<(usize, Variant), f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub table: ResultTable,
    pub cases: Vec<KnowledgeCase>,
    /// Coherence of the fixed dictionary, when the study uses one.
    pub dictionary_coherence: Option<f64>,
    pub timing: Timing,
}

impl StudyReport {
    pub fn high_coherence(&self) -> bool {
        self.dictionary_coherence
            .is_some_and(|c| c >= HIGH_COHERENCE)
    }
}

/// Instance and knowledge set of one trial, drawn from the substream of
/// `(case_index, trial)`. The same draw serves every variant.
pub fn trial_instance(
    point: &SweepPoint,
    case_index: usize,
    case: KnowledgeCase,
    trial: usize,
) -> Result<(GeneratedInstance, PriorKnowledgeSet)> {
    let mut rng = trial_rng(point.spec.seed, case_index, trial);
    let instance = generate_instance(&point.spec, &mut rng)?;
    let prior = sample_knowledge(&instance, case, &mut rng)?;
    Ok((instance, prior))
}

struct Outcome {
    variant_index: usize,
    score: KeyedScore,
    numerical_failure: bool,
    seconds: f64,
}

fn score_variant(
    instance: &GeneratedInstance,
    prior: &PriorKnowledgeSet,
    cfg: &SolverConfig,
    k: usize,
) -> Result<(TrialScore, bool)> {
    match solve(&instance.problem, prior, cfg) {
        Ok(result) => Ok((
            TrialScore {
                failed: score_failure(&result.mean_deviations, &instance.support_true, k)?,
                nmse: score_nmse(&result.mean_deviations, &instance.x_bar_true)?,
                converged: result.converged,
                iterations: result.iterations_run,
            },
            false,
        )),
        Err(Error::Numerical(msg)) => {
            log::warn!("solve aborted: {msg}");
            Ok((
                TrialScore {
                    failed: true,
                    nmse: 1.0,
                    converged: false,
                    iterations: 0,
                },
                true,
            ))
        }
        Err(e) => Err(e),
    }
}

fn run_point(
    point: &SweepPoint,
    cases: &[KnowledgeCase],
    configs: &[SolverConfig],
) -> Result<Vec<Outcome>> {
    let units: Vec<(usize, usize)> = (0..cases.len())
        .flat_map(|c| (0..point.spec.trials).map(move |t| (c, t)))
        .collect();
    let per_unit: Vec<Vec<Outcome>> = units
        .par_iter()
        .map(|&(case_index, trial)| {
            let case = cases[case_index];
            let (instance, prior) = trial_instance(point, case_index, case, trial)?;
            configs
                .iter()
                .enumerate()
                .map(|(variant_index, cfg)| {
                    let start = Instant::now();
                    let (score, numerical_failure) =
                        score_variant(&instance, &prior, cfg, point.spec.k)?;
                    Ok(Outcome {
                        variant_index,
                        score: KeyedScore { case, trial, score },
                        numerical_failure,
                        seconds: start.elapsed().as_secs_f64(),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_unit.into_iter().flatten().collect())
}

/// Runs every (sweep value, case, trial) of the study with every variant.
/// `jobs = 0` uses all available cores. The scores do not depend on `jobs`.
pub fn run_study(config: &StudyConfig, jobs: usize) -> Result<StudyReport> {
    let points = config.sweep_points()?;
    let variants = config.variants();
    let configs: Vec<SolverConfig> = variants
        .iter()
        .map(|v| v.configure(&config.solver))
        .collect();
    let cases = enumerate_cases(config.scenario.k);

    let dictionary_coherence = match &points[0].spec.dictionary {
        DictionarySource::Fixed(phi) => Some(mutual_coherence(phi)),
        DictionarySource::RandomHypersphere => None,
    };
    if let Some(mu) = dictionary_coherence {
        if mu >= HIGH_COHERENCE {
            log::warn!("dictionary mutual coherence is {mu:.4}; support recovery is ill-posed for coherent columns");
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidConfig {
            field: "jobs".into(),
            reason: e.to_string(),
        })?;

    let started = Instant::now();
    let mut timing = Timing::default();
    let mut rows = Vec::new();
    for (point_index, point) in points.iter().enumerate() {
        let point_start = Instant::now();
        let outcomes = pool.install(|| run_point(point, &cases, &configs))?;
        for (variant_index, &variant) in variants.iter().enumerate() {
            let mine: Vec<&Outcome> = outcomes
                .iter()
                .filter(|o| o.variant_index == variant_index)
                .collect();
            let scores: Vec<KeyedScore> = mine.iter().map(|o| o.score).collect();
            timing
                .solve_seconds
                .insert((point_index, variant), mine.iter().map(|o| o.seconds).sum());
            rows.push(ResultRow {
                sweep_value: point.value,
                variant,
                summary: aggregate(&scores)?,
                numerical_failures: mine.iter().filter(|o| o.numerical_failure).count(),
            });
        }
        let secs = point_start.elapsed().as_secs_f64();
        timing.per_sweep_value.push((point.value, secs));
        log::info!(
            "{} = {}: {} cases x {} trials x {} variants in {secs:.1}s",
            config.sweep.parameter,
            point.value,
            cases.len(),
            point.spec.trials,
            variants.len()
        );
    }
    timing.total_seconds = started.elapsed().as_secs_f64();

    Ok(StudyReport {
        table: ResultTable {
            parameter: config.sweep.parameter,
            rows,
        },
        cases,
        dictionary_coherence,
        timing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn tiny() -> StudyConfig {
        let text = r#"
[scenario]
m = 6
n = 12
k = 2
l = 2
snr_db = 30
trials = 3
seed = 5

[sweep]
parameter = "beta"
values = [0.5, 0.9]

[baselines]
variants = ["msbl-like"]
"#;
        StudyConfig::from_toml_str(text, Path::new("t.toml"), Path::new(".")).unwrap()
    }

    #[test]
    fn table_has_one_row_per_value_and_variant() {
        let report = run_study(&tiny(), 1).unwrap();
        assert_eq!(report.table.rows.len(), 4);
        assert_eq!(report.cases.len(), 3);
        for row in &report.table.rows {
            assert_eq!(row.summary.cases.len(), 3);
            assert!(row.summary.cases.iter().all(|c| c.trials == 3));
        }
        assert!(report.table.get(0.9, Variant::MsblLike).is_some());
        assert!(report.table.get(0.9, Variant::Tsbl).is_none());
        assert!(report.dictionary_coherence.is_none());
    }

    #[test]
    fn thread_count_does_not_change_scores() {
        let a = run_study(&tiny(), 1).unwrap();
        let b = run_study(&tiny(), 3).unwrap();
        assert_eq!(a.table, b.table);
    }

    #[test]
    fn trial_draws_ignore_the_swept_value() {
        let points = tiny().sweep_points().unwrap();
        let case = KnowledgeCase {
            n_correct: 1,
            n_erroneous: 0,
        };
        let (a, pa) = trial_instance(&points[0], 1, case, 2).unwrap();
        let (b, pb) = trial_instance(&points[1], 1, case, 2).unwrap();
        assert_eq!(a.problem.phi(), b.problem.phi());
        assert_eq!(a.support_true, b.support_true);
        assert_eq!(pa, pb);
    }
}
