//! Synthetic problem instances: sparse AR(1) solution rows, unit-norm random
//! dictionaries, exactly calibrated noise and prior-knowledge scenarios.
//!
//! Every generator takes an explicit RNG. [`trial_rng`] derives the
//! independent substream used for one (case, trial) pair of a study.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BlockSparseProblem, PriorKnowledgeSet};

/// Target signal-to-noise ratio `20·log10(‖ΦX‖_F / ‖V‖_F)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SnrRepr", into = "SnrRepr")]
pub enum Snr {
    Noiseless,
    Db(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SnrRepr {
    Db(f64),
    Word(String),
}

impl TryFrom<SnrRepr> for Snr {
    type Error = String;

    fn try_from(value: SnrRepr) -> std::result::Result<Self, Self::Error> {
        match value {
            SnrRepr::Db(db) if db.is_finite() => Ok(Snr::Db(db)),
            SnrRepr::Db(db) => Err(format!("SNR must be finite, got {db}")),
            SnrRepr::Word(w) if w == "noiseless" => Ok(Snr::Noiseless),
            SnrRepr::Word(w) => Err(format!(
                "expected a number of dB or \"noiseless\", got {w:?}"
            )),
        }
    }
}

impl From<Snr> for SnrRepr {
    fn from(value: Snr) -> Self {
        match value {
            Snr::Noiseless => SnrRepr::Word("noiseless".into()),
            Snr::Db(db) => SnrRepr::Db(db),
        }
    }
}

impl fmt::Display for Snr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Snr::Noiseless => write!(f, "noiseless"),
            Snr::Db(db) => write!(f, "{db} dB"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DictionarySource {
    /// Fresh unit-norm Gaussian columns every trial.
    RandomHypersphere,
    /// A fixed matrix shared by all trials (e.g. loaded from CSV).
    Fixed(Arc<DMatrix<f64>>),
}

/// Generative parameters of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub beta: f64,
    pub snr: Snr,
    pub trials: usize,
    pub seed: u64,
    pub dictionary: DictionarySource,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("m", self.m),
            ("n", self.n),
            ("k", self.k),
            ("l", self.l),
            ("trials", self.trials),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::config(format!("scenario.{name}"), "must be >= 1"));
            }
        }
        if self.k > self.n {
            return Err(Error::config(
                "scenario.k",
                format!("K = {} exceeds N = {}", self.k, self.n),
            ));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::config(
                "scenario.beta",
                format!("must lie in [0, 1), got {}", self.beta),
            ));
        }
        if let DictionarySource::Fixed(phi) = &self.dictionary {
            if phi.shape() != (self.m, self.n) {
                return Err(Error::config(
                    "scenario.dictionary_path",
                    format!(
                        "matrix is {}x{}, scenario declares M = {}, N = {}",
                        phi.nrows(),
                        phi.ncols(),
                        self.m,
                        self.n
                    ),
                ));
            }
        }
        Ok(())
    }
}

/// Cardinalities of the correct (`P_C`) and erroneous (`P_E`) parts of the knowledge set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct KnowledgeCase {
    pub n_correct: usize,
    pub n_erroneous: usize,
}

impl KnowledgeCase {
    pub const NONE: KnowledgeCase = KnowledgeCase {
        n_correct: 0,
        n_erroneous: 0,
    };

    pub fn is_empty(&self) -> bool {
        self.n_correct == 0 && self.n_erroneous == 0
    }
}

impl fmt::Display for KnowledgeCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(|P_C|={}, |P_E|={})", self.n_correct, self.n_erroneous)
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedInstance {
    pub problem: BlockSparseProblem,
    /// Planted N × L solution.
    pub x_true: DMatrix<f64>,
    /// One-based indices of the nonzero rows of `x_true`.
    pub support_true: BTreeSet<usize>,
    /// Row-wise mean of `x_true`.
    pub x_bar_true: DVector<f64>,
    /// The M × L noise matrix that was added.
    pub noise: DMatrix<f64>,
}

/// Independent substream for one (case, trial) pair of a study seeded with `seed`.
pub fn trial_rng(seed: u64, case: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((case as u64) << 32) | trial as u64);
    rng
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// M × N matrix with columns drawn uniformly from the unit sphere.
pub fn sample_dictionary<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> DMatrix<f64> {
    let mut phi = DMatrix::zeros(m, n);
    for mut col in phi.column_iter_mut() {
        loop {
            for v in col.iter_mut() {
                *v = normal(rng);
            }
            let norm = col.norm();
            if norm > 0.0 {
                col /= norm;
                break;
            }
        }
    }
    phi
}

/// K × L matrix whose rows are stationary AR(1) sequences with unit
/// marginal variance: `z₁ ~ N(0,1)`, `z_{t+1} = β z_t + √(1−β²) e_t`.
pub fn ar1_rows<R: Rng + ?Sized>(
    k: usize,
    l: usize,
    beta: f64,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::config(
            "beta",
            format!("AR(1) coefficient must lie in [0, 1), got {beta}"),
        ));
    }
    let innovation = (1.0 - beta * beta).sqrt();
    let mut rows = DMatrix::zeros(k, l);
    for r in 0..k {
        let mut z = normal(rng);
        for t in 0..l {
            if t > 0 {
                z = beta * z + innovation * normal(rng);
            }
            rows[(r, t)] = z;
        }
    }
    Ok(rows)
}

/// Adds Gaussian noise rescaled so the SNR hits `snr` exactly. Returns `(noisy, noise)`.
pub fn apply_snr_noise<R: Rng + ?Sized>(
    clean: &DMatrix<f64>,
    snr: Snr,
    rng: &mut R,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let db = match snr {
        Snr::Noiseless => return Ok((clean.clone(), DMatrix::zeros(clean.nrows(), clean.ncols()))),
        Snr::Db(db) => db,
    };
    let signal = clean.norm();
    if signal == 0.0 {
        return Err(Error::InvalidProblem(
            "cannot calibrate a finite SNR against an all-zero signal".into(),
        ));
    }
    let mut noise = DMatrix::from_fn(clean.nrows(), clean.ncols(), |_, _| normal(rng));
    let raw = noise.norm();
    noise *= signal / (raw * 10f64.powf(db / 20.0));
    Ok((clean + &noise, noise))
}

/// Draws one planted instance: dictionary, support, AR(1) rows, noise.
pub fn generate_instance<R: Rng + ?Sized>(
    spec: &ScenarioSpec,
    rng: &mut R,
) -> Result<GeneratedInstance> {
    spec.validate()?;
    let phi = match &spec.dictionary {
        DictionarySource::RandomHypersphere => sample_dictionary(spec.m, spec.n, rng),
        DictionarySource::Fixed(phi) => phi.as_ref().clone(),
    };
    let mut support: Vec<usize> = index::sample(rng, spec.n, spec.k).into_vec();
    support.sort_unstable();
    let rows = ar1_rows(spec.k, spec.l, spec.beta, rng)?;
    let mut x_true = DMatrix::zeros(spec.n, spec.l);
    for (r, &i) in support.iter().enumerate() {
        x_true.set_row(i, &rows.row(r));
    }
    let clean = &phi * &x_true;
    let (noisy, noise) = apply_snr_noise(&clean, spec.snr, rng)?;
    let x_bar_true = x_true.column_mean();
    Ok(GeneratedInstance {
        problem: BlockSparseProblem::from_measurements(phi, &noisy)?,
        x_true,
        support_true: support.into_iter().map(|i| i + 1).collect(),
        x_bar_true,
        noise,
    })
}

/// All knowledge cases for `k` faults: `|P_C| ≤ ⌊0.75k⌋`, `|P_E| ≤ ⌊0.5k⌋`,
/// `|P_C| ≥ |P_E|`, in lexicographic order.
pub fn enumerate_cases(k: usize) -> Vec<KnowledgeCase> {
    let max_correct = 3 * k / 4;
    let max_erroneous = k / 2;
    (0..=max_correct)
        .flat_map(|c| {
            (0..=max_erroneous.min(c)).map(move |e| KnowledgeCase {
                n_correct: c,
                n_erroneous: e,
            })
        })
        .collect()
}

/// Draws `P = P_C ∪ P_E` with `P_C` from the true support and `P_E` from its complement.
pub fn sample_knowledge<R: Rng + ?Sized>(
    instance: &GeneratedInstance,
    case: KnowledgeCase,
    rng: &mut R,
) -> Result<PriorKnowledgeSet> {
    let n = instance.problem.num_errors();
    let support: Vec<usize> = instance.support_true.iter().map(|i| i - 1).collect();
    let complement: Vec<usize> = (0..n)
        .filter(|i| !instance.support_true.contains(&(i + 1)))
        .collect();
    if case.n_correct > support.len() {
        return Err(Error::InvalidProblem(format!(
            "case {case} needs {} correct indices but K = {}",
            case.n_correct,
            support.len()
        )));
    }
    if case.n_erroneous > complement.len() {
        return Err(Error::InvalidProblem(format!(
            "case {case} needs {} erroneous indices but N − K = {}",
            case.n_erroneous,
            complement.len()
        )));
    }
    let correct = index::sample(rng, support.len(), case.n_correct)
        .into_iter()
        .map(|j| support[j]);
    let wrong = index::sample(rng, complement.len(), case.n_erroneous)
        .into_iter()
        .map(|j| complement[j]);
    Ok(PriorKnowledgeSet::from_zero_based(correct.chain(wrong)))
}
