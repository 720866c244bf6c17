//! Seeded Monte-Carlo studies: TOML study configs, the trial loop over sweep
//! values, knowledge cases and solver variants, and the CSV/JSON outputs.

mod config;
mod matrix;
mod output;
mod run;
mod templates;

pub use config::{
    BaselinesSection, DictionaryKind, OutputSection, ScenarioSection, StudyConfig, SweepParameter,
    SweepPoint, SweepSection, Variant,
};
pub use matrix::load_matrix_csv;
pub use output::{
    cases_file_name, emit_outputs, MANIFEST_FILE, RESULTS_FILE, SUBSTREAM_SCHEME, TIMING_FILE,
};
pub use run::{
    run_study, trial_instance, ResultRow, ResultTable, StudyReport, Timing, HIGH_COHERENCE,
};
pub use templates::{
    load_template, template_names, template_needs_matrix, template_text, write_template,
    PLACEHOLDER_MATRIX_CSV, PLACEHOLDER_MATRIX_FILE,
};
