use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::SolverConfig;
use crate::datagen::{enumerate_cases, DictionarySource, ScenarioSpec, Snr};
use crate::error::{Error, Result};
use crate::experiment::matrix::load_matrix_csv;

fn default_trials() -> usize {
    100
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DictionaryKind {
    #[default]
    RandomHypersphere,
    File,
}

/// The `[scenario]` table. The swept parameter must be left out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub snr_db: Snr,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub dictionary_source: DictionaryKind,
    /// Relative paths are resolved against the config file's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dictionary_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Beta,
    L,
    NOverM,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Beta => "beta",
            SweepParameter::L => "l",
            SweepParameter::NOverM => "n_over_m",
        }
    }
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

/// A solver configuration run on every trial. The primary variant uses the
/// `[solver]` table as written; the others override `learn_B` and
/// `use_prior_knowledge`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "sa-tsbl")]
    SaTsbl,
    /// Learns B, ignores knowledge.
    #[serde(rename = "tsbl")]
    Tsbl,
    /// B fixed to the identity, ignores knowledge.
    #[serde(rename = "msbl-like")]
    MsblLike,
    /// B fixed to the identity, uses knowledge.
    #[serde(rename = "sa-only")]
    SaOnly,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::SaTsbl,
        Variant::Tsbl,
        Variant::MsblLike,
        Variant::SaOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::SaTsbl => "sa-tsbl",
            Variant::Tsbl => "tsbl",
            Variant::MsblLike => "msbl-like",
            Variant::SaOnly => "sa-only",
        }
    }

    pub fn configure(self, base: &SolverConfig) -> SolverConfig {
        let mut cfg = base.clone();
        match self {
            Variant::SaTsbl => {}
            Variant::Tsbl => {
                cfg.learn_b = true;
                cfg.use_prior_knowledge = false;
            }
            Variant::MsblLike => {
                cfg.learn_b = false;
                cfg.use_prior_knowledge = false;
            }
            Variant::SaOnly => {
                cfg.learn_b = false;
                cfg.use_prior_knowledge = true;
            }
        }
        cfg
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselinesSection {
    pub variants: Vec<Variant>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub output_dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            output_dir: default_output_dir(),
        }
    }
}

/// A whole study as read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub scenario: ScenarioSection,
    pub sweep: SweepSection,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub baselines: BaselinesSection,
    #[serde(default)]
    pub output: OutputSection,
    /// Directory that relative input paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// One value of the swept parameter with the scenario it produces.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub spec: ScenarioSpec,
}

fn whole_number(value: f64, field: &str) -> Result<usize> {
    if value.is_finite() && value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
        Ok(value as usize)
    } else {
        Err(Error::config(
            field,
            format!("expected a positive whole number, got {value}"),
        ))
    }
}

impl StudyConfig {
    /// Parses without validating. `origin` is used in error messages.
    pub fn from_toml_str(text: &str, origin: &Path, base_dir: &Path) -> Result<Self> {
        let mut cfg: StudyConfig = toml::from_str(text).map_err(|e| Error::ConfigParse {
            path: origin.to_path_buf(),
            message: e.to_string().trim_end().to_string(),
        })?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_str(&text, path, &base)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("study config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.sweep_points().map(|_| ())
    }

    /// Resolved dictionary path, if the scenario reads one from disk.
    pub fn dictionary_path(&self) -> Option<PathBuf> {
        self.scenario.dictionary_path.as_ref().map(|p| {
            if p.is_absolute() {
                p.clone()
            } else {
                self.base_dir.join(p)
            }
        })
    }

    /// The primary variant followed by the requested baselines.
    pub fn variants(&self) -> Vec<Variant> {
        let mut out = vec![Variant::SaTsbl];
        for v in &self.baselines.variants {
            if !out.contains(v) {
                out.push(*v);
            }
        }
        out
    }

    fn check_sweep_slot<T>(&self, field: &str, value: &Option<T>, swept: bool) -> Result<()> {
        match (value.is_some(), swept) {
            (true, true) => Err(Error::config(
                format!("scenario.{field}"),
                "is also the swept parameter; remove it from [scenario]",
            )),
            (false, false) => Err(Error::config(format!("scenario.{field}"), "missing")),
            _ => Ok(()),
        }
    }

    /// Validates everything and builds one scenario per sweep value. Loads
    /// the dictionary file when there is one.
    pub fn sweep_points(&self) -> Result<Vec<SweepPoint>> {
        let sc = &self.scenario;
        let param = self.sweep.parameter;
        self.solver.validate()?;

        if self.sweep.values.is_empty() {
            return Err(Error::config("sweep.values", "must not be empty"));
        }
        let mut seen = BTreeSet::new();
        for v in &self.sweep.values {
            if !v.is_finite() {
                return Err(Error::config(
                    "sweep.values",
                    format!("non-finite value {v}"),
                ));
            }
            if !seen.insert(v.to_bits()) {
                return Err(Error::config(
                    "sweep.values",
                    format!("duplicate value {v}"),
                ));
            }
        }
        let mut listed = BTreeSet::new();
        for v in &self.baselines.variants {
            if !listed.insert(*v) {
                return Err(Error::config(
                    "baselines.variants",
                    format!("{v} listed twice"),
                ));
            }
        }

        self.check_sweep_slot("beta", &sc.beta, param == SweepParameter::Beta)?;
        self.check_sweep_slot("l", &sc.l, param == SweepParameter::L)?;
        self.check_sweep_slot("n", &sc.n, param == SweepParameter::NOverM)?;

        let dictionary = match (sc.dictionary_source, self.dictionary_path()) {
            (DictionaryKind::RandomHypersphere, None) => DictionarySource::RandomHypersphere,
            (DictionaryKind::RandomHypersphere, Some(_)) => {
                return Err(Error::config(
                    "scenario.dictionary_path",
                    "only allowed with dictionary_source = \"file\"",
                ))
            }
            (DictionaryKind::File, None) => {
                return Err(Error::config(
                    "scenario.dictionary_path",
                    "required when dictionary_source = \"file\"",
                ))
            }
            (DictionaryKind::File, Some(path)) => {
                if param == SweepParameter::NOverM {
                    return Err(Error::config(
                        "sweep.parameter",
                        "n_over_m cannot be swept with a dictionary loaded from file",
                    ));
                }
                let n = sc.n.unwrap_or(0);
                DictionarySource::Fixed(Arc::new(load_matrix_csv(&path, Some((sc.m, n)))?))
            }
        };

        let mut points = Vec::with_capacity(self.sweep.values.len());
        for &value in &self.sweep.values {
            let mut spec = ScenarioSpec {
                m: sc.m,
                n: sc.n.unwrap_or(0),
                k: sc.k,
                l: sc.l.unwrap_or(0),
                beta: sc.beta.unwrap_or(0.0),
                snr: sc.snr_db,
                trials: sc.trials,
                seed: sc.seed,
                dictionary: dictionary.clone(),
            };
            match param {
                SweepParameter::Beta => spec.beta = value,
                SweepParameter::L => spec.l = whole_number(value, "sweep.values")?,
                SweepParameter::NOverM => spec.n = whole_number(value, "sweep.values")? * sc.m,
            }
            if param == SweepParameter::Beta && !(0.0..1.0).contains(&value) {
                return Err(Error::config(
                    "sweep.values",
                    format!("beta must lie in [0, 1), got {value}"),
                ));
            }
            spec.validate()?;
            let worst = enumerate_cases(spec.k)
                .iter()
                .map(|c| c.n_erroneous)
                .max()
                .unwrap_or(0);
            if spec.n - spec.k < worst {
                return Err(Error::config(
                    "scenario.k",
                    format!(
                        "N − K = {} leaves no room for {worst} erroneous knowledge indices",
                        spec.n - spec.k
                    ),
                ));
            }
            points.push(SweepPoint { value, spec });
        }
        Ok(points)
    }
}
