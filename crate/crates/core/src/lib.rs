//! Sparse Bayesian learning for block-sparse fault diagnosis with temporally
//! correlated samples and partially erroneous support knowledge.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: block single-measurement-vector representation and the
//!   structured operators for `D = Φ ⊗ I_L`.
//! * [`solver`]: the variational Bayes EM iteration.
//! * [`datagen`]: synthetic instances and prior-knowledge scenarios.
//! * [`metrics`]: failure rate, NMSE and their aggregation.
//! * [`experiment`]: seeded Monte-Carlo studies driven by TOML configs.

pub mod config;
pub mod datagen;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod solver;

pub use config::{CovarianceEngine, SolverConfig};
pub use datagen::{DictionarySource, GeneratedInstance, KnowledgeCase, ScenarioSpec, Snr};
pub use error::{Error, Result};
pub use experiment::{run_study, StudyConfig, StudyReport, Variant};
pub use metrics::{CaseSummary, MethodSummary, TrialScore};
pub use model::{BlockLayout, BlockSparseProblem, PriorKnowledgeSet};
pub use solver::{solve, PosteriorState, SolveResult};
