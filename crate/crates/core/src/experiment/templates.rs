use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experiment::config::StudyConfig;

/// File name the assembly templates expect next to the config.
pub const PLACEHOLDER_MATRIX_FILE: &str = "assembly_12x33_placeholder.csv";

/// Synthetic 12 × 33 stand-in for the assembly fault-pattern matrix.
pub const PLACEHOLDER_MATRIX_CSV: &str = include_str!("../../data/assembly_12x33_placeholder.csv");

const TEMPLATES: [(&str, &str); 5] = [
    ("sec4_1", include_str!("../../templates/sec4_1.toml")),
    ("sec4_2", include_str!("../../templates/sec4_2.toml")),
    ("sec4_3", include_str!("../../templates/sec4_3.toml")),
    ("sec5_1", include_str!("../../templates/sec5_1.toml")),
    ("sec5_2", include_str!("../../templates/sec5_2.toml")),
];

pub fn template_names() -> impl Iterator<Item = &'static str> {
    TEMPLATES.iter().map(|(name, _)| *name)
}

pub fn template_text(name: &str) -> Option<&'static str> {
    TEMPLATES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
}

/// True when the template reads [`PLACEHOLDER_MATRIX_FILE`].
pub fn template_needs_matrix(name: &str) -> bool {
    template_text(name).is_some_and(|t| t.contains(PLACEHOLDER_MATRIX_FILE))
}

fn unknown(name: &str) -> Error {
    Error::config(
        "template",
        format!(
            "unknown template {name:?}; expected one of {}",
            template_names().collect::<Vec<_>>().join(", ")
        ),
    )
}

/// Parses a template as if it lived in `base_dir`.
pub fn load_template(name: &str, base_dir: &Path) -> Result<StudyConfig> {
    let text = template_text(name).ok_or_else(|| unknown(name))?;
    StudyConfig::from_toml_str(text, Path::new(name), base_dir)
}

/// Writes the template to `path`, plus the placeholder matrix beside it
/// when the template needs one and none exists yet. Returns the files written.
pub fn write_template(name: &str, path: &Path) -> Result<Vec<PathBuf>> {
    let text = template_text(name).ok_or_else(|| unknown(name))?;
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    let mut written = vec![path.to_path_buf()];
    if template_needs_matrix(name) {
        let matrix = dir.join(PLACEHOLDER_MATRIX_FILE);
        if !matrix.exists() {
            std::fs::write(&matrix, PLACEHOLDER_MATRIX_CSV).map_err(|e| Error::io(&matrix, e))?;
            written.push(matrix);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::SweepParameter;
    use crate::model::mutual_coherence;

    #[test]
    fn all_templates_validate() {
        let dir = tempfile::tempdir().unwrap();
        for name in template_names() {
            let path = dir.path().join(format!("{name}.toml"));
            write_template(name, &path).unwrap();
            let cfg = StudyConfig::load(&path).unwrap();
            cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(cfg.scenario.trials, 100);
        }
        assert!(load_template("sec9_9", dir.path()).is_err());
    }

    #[test]
    fn template_shapes() {
        let dir = tempfile::tempdir().unwrap();
        write_template("sec5_1", &dir.path().join("a.toml")).unwrap();
        let first = load_template("sec4_1", dir.path()).unwrap();
        assert_eq!(first.sweep.values, vec![0.1, 0.3, 0.6, 0.9, 0.99]);
        let ratio = load_template("sec4_3", dir.path())
            .unwrap()
            .sweep_points()
            .unwrap();
        assert_eq!(
            ratio.iter().map(|p| p.spec.n).collect::<Vec<_>>(),
            vec![30, 50, 70, 90]
        );
        let assembly = load_template("sec5_2", dir.path()).unwrap();
        assert_eq!(assembly.sweep.parameter, SweepParameter::Beta);
        let points = assembly.sweep_points().unwrap();
        match &points[0].spec.dictionary {
            crate::datagen::DictionarySource::Fixed(phi) => {
                assert_eq!(phi.shape(), (12, 33));
                assert!(mutual_coherence(phi) >= 0.99);
            }
            other => panic!("expected a fixed dictionary, got {other:?}"),
        }
    }
}
