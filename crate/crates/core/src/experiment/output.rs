use std::path::{Path, PathBuf};

use serde_json::json;

use crate::error::{Error, Result};
use crate::experiment::config::StudyConfig;
use crate::experiment::run::{ResultRow, StudyReport};
use crate::metrics::{boxplot, BoxplotStats};

pub const RESULTS_FILE: &str = "results.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TIMING_FILE: &str = "timing.json";

/// Describes how trial substreams are derived, for the manifest.
pub const SUBSTREAM_SCHEME: &str =
    "ChaCha8Rng::seed_from_u64(seed) with stream (case_index << 32) | trial; case_index indexes the \
     lexicographic (n_correct, n_erroneous) case list; each trial draws the dictionary, the support, \
     the AR(1) rows, the noise and then the knowledge set, and the same draw serves every sweep value \
     and variant";

/// `cases_<value>.csv` for one sweep value.
pub fn cases_file_name(sweep_value: f64) -> String {
    format!("cases_{sweep_value}.csv")
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| Error::InvalidProblem(format!("CSV encoding: {e}"));
    w.write_record(header).map_err(to_err)?;
    for r in rows {
        w.write_record(&r).map_err(to_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::InvalidProblem(format!("CSV encoding: {e}")))
}

fn results_csv(report: &StudyReport) -> Result<Vec<u8>> {
    let param = report.table.parameter.name();
    let header = [
        param,
        "variant",
        "failure_rate",
        "nmse",
        "no_knowledge_failure_rate",
        "no_knowledge_nmse",
        "cases",
        "trials_per_case",
        "nonconverged",
        "numerical_failures",
    ];
    let rows = report
        .table
        .rows
        .iter()
        .map(|r| {
            let s = &r.summary;
            let (nk_fail, nk_nmse) = s
                .no_knowledge
                .as_ref()
                .map(|c| (fmt(c.failure_rate), fmt(c.mean_nmse)))
                .unwrap_or_default();
            vec![
                r.sweep_value.to_string(),
                r.variant.to_string(),
                fmt(s.failure_rate),
                fmt(s.mean_nmse),
                nk_fail,
                nk_nmse,
                s.cases.len().to_string(),
                s.cases.first().map(|c| c.trials).unwrap_or(0).to_string(),
                s.cases
                    .iter()
                    .map(|c| c.nonconverged)
                    .sum::<usize>()
                    .to_string(),
                r.numerical_failures.to_string(),
            ]
        })
        .collect();
    csv_bytes(&header, rows)
}

fn cases_csv(rows: &[&ResultRow]) -> Result<Vec<u8>> {
    let header = [
        "variant",
        "row",
        "n_correct",
        "n_erroneous",
        "failure_rate",
        "nmse",
        "trials",
        "nonconverged",
    ];
    let mut out = Vec::new();
    for r in rows {
        let s = &r.summary;
        if s.cases.is_empty() {
            return Err(Error::Empty("case list of a result row"));
        }
        let v = r.variant.to_string();
        for c in &s.cases {
            out.push(vec![
                v.clone(),
                "case".into(),
                c.case.n_correct.to_string(),
                c.case.n_erroneous.to_string(),
                fmt(c.failure_rate),
                fmt(c.mean_nmse),
                c.trials.to_string(),
                c.nonconverged.to_string(),
            ]);
        }
        let fail: BoxplotStats =
            boxplot(&s.cases.iter().map(|c| c.failure_rate).collect::<Vec<_>>())?;
        let nmse: BoxplotStats = boxplot(&s.cases.iter().map(|c| c.mean_nmse).collect::<Vec<_>>())?;
        let stats = [
            ("min", fail.min, nmse.min),
            ("q1", fail.q1, nmse.q1),
            ("median", fail.median, nmse.median),
            ("q3", fail.q3, nmse.q3),
            ("max", fail.max, nmse.max),
            ("mean", fail.mean, nmse.mean),
        ];
        for (name, f, n) in stats {
            out.push(vec![
                v.clone(),
                name.into(),
                String::new(),
                String::new(),
                fmt(f),
                fmt(n),
                String::new(),
                String::new(),
            ]);
        }
        if let Some(nk) = &s.no_knowledge {
            out.push(vec![
                v.clone(),
                "no_knowledge".into(),
                "0".into(),
                "0".into(),
                fmt(nk.failure_rate),
                fmt(nk.mean_nmse),
                nk.trials.to_string(),
                nk.nonconverged.to_string(),
            ]);
        }
    }
    csv_bytes(&header, out)
}

fn manifest_json(report: &StudyReport, config: &StudyConfig) -> Result<Vec<u8>> {
    let mut echo =
        serde_json::to_value(config).map_err(|e| Error::InvalidProblem(e.to_string()))?;
    if let Some(obj) = echo.as_object_mut() {
        // The output location may be overridden per run and must not change the bytes.
        obj.remove("output");
    }
    let manifest = json!({
        "software": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": config.scenario.seed,
        "substreams": SUBSTREAM_SCHEME,
        "sweep": {
            "parameter": report.table.parameter.name(),
            "values": config.sweep.values,
        },
        "variants": config.variants().iter().map(|v| v.name()).collect::<Vec<_>>(),
        "cases": report.cases.iter().map(|c| [c.n_correct, c.n_erroneous]).collect::<Vec<_>>(),
        "dictionary": {
            "mutual_coherence": report.dictionary_coherence,
            "high_coherence_warning": report.high_coherence(),
        },
        "config": echo,
        "timing_file": TIMING_FILE,
    });
    let mut bytes =
        serde_json::to_vec_pretty(&manifest).map_err(|e| Error::InvalidProblem(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn timing_json(report: &StudyReport) -> Result<Vec<u8>> {
    let t = &report.timing;
    let per_value: Vec<_> = t
        .per_sweep_value
        .iter()
        .enumerate()
        .map(|(i, (value, secs))| {
            let solves: serde_json::Map<String, serde_json::Value> = t
                .solve_seconds
                .iter()
                .filter(|((p, _), _)| *p == i)
                .map(|((_, v), s)| (v.name().to_string(), json!(s)))
                .collect();
            json!({ "value": value, "wall_seconds": secs, "solve_seconds": solves })
        })
        .collect();
    let mut bytes = serde_json::to_vec_pretty(&json!({
        "total_wall_seconds": t.total_seconds,
        "sweep": per_value,
    }))
    .map_err(|e| Error::InvalidProblem(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes `results.csv`, one `cases_<value>.csv` per sweep value,
/// `manifest.json` and `timing.json` into `dir`. Everything except
/// `timing.json` is a pure function of the config. Nothing is written if
/// the report is incomplete.
pub fn emit_outputs(
    report: &StudyReport,
    config: &StudyConfig,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    if report.table.rows.is_empty() {
        return Err(Error::Empty("result table"));
    }
    if report.cases.is_empty() {
        return Err(Error::Empty("case list"));
    }
    let mut files: Vec<(String, Vec<u8>)> = vec![(RESULTS_FILE.into(), results_csv(report)?)];
    let mut values: Vec<f64> = Vec::new();
    for r in &report.table.rows {
        if !values.contains(&r.sweep_value) {
            values.push(r.sweep_value);
        }
    }
    for v in values {
        let rows: Vec<&ResultRow> = report
            .table
            .rows
            .iter()
            .filter(|r| r.sweep_value == v)
            .collect();
        files.push((cases_file_name(v), cases_csv(&rows)?));
    }
    files.push((MANIFEST_FILE.into(), manifest_json(report, config)?));
    files.push((TIMING_FILE.into(), timing_json(report)?));

    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::KnowledgeCase;
    use crate::experiment::config::{SweepParameter, Variant};
    use crate::experiment::run::{ResultTable, Timing};
    use crate::metrics::{CaseSummary, MethodSummary};

    fn config() -> StudyConfig {
        let text = "[scenario]\nm = 4\nn = 8\nk = 2\nl = 2\nsnr_db = 20\n[sweep]\nparameter = \"beta\"\nvalues = [0.5]\n";
        StudyConfig::from_toml_str(text, Path::new("t.toml"), Path::new(".")).unwrap()
    }

    fn row(rates: &[f64]) -> ResultRow {
        let cases: Vec<CaseSummary> = rates
            .iter()
            .enumerate()
            .map(|(i, &r)| CaseSummary {
                case: KnowledgeCase {
                    n_correct: i,
                    n_erroneous: 0,
                },
                failure_rate: r,
                mean_nmse: 2.0 * r,
                trials: 10,
                nonconverged: 0,
            })
            .collect();
        ResultRow {
            sweep_value: 0.5,
            variant: Variant::SaTsbl,
            summary: MethodSummary {
                failure_rate: rates.iter().sum::<f64>() / rates.len() as f64,
                mean_nmse: 0.0,
                no_knowledge: cases.first().cloned(),
                cases,
            },
            numerical_failures: 0,
        }
    }

    fn report(rows: Vec<ResultRow>, cases: Vec<KnowledgeCase>) -> StudyReport {
        StudyReport {
            table: ResultTable {
                parameter: SweepParameter::Beta,
                rows,
            },
            cases,
            dictionary_coherence: None,
            timing: Timing::default(),
        }
    }

    #[test]
    fn empty_inputs_write_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        assert!(emit_outputs(&report(vec![], vec![KnowledgeCase::NONE]), &config(), &out).is_err());
        assert!(emit_outputs(&report(vec![row(&[0.1])], vec![]), &config(), &out).is_err());
        let mut hollow = row(&[0.1]);
        hollow.summary.cases.clear();
        assert!(emit_outputs(
            &report(vec![hollow], vec![KnowledgeCase::NONE]),
            &config(),
            &out
        )
        .is_err());
        assert!(!out.exists());
    }

    #[test]
    fn cases_file_layout() {
        let bytes = cases_csv(&[&row(&[0.0, 0.1, 0.2, 0.3, 1.0])]).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "variant,row,n_correct,n_erroneous,failure_rate,nmse,trials,nonconverged"
        );
        assert_eq!(lines.len(), 1 + 5 + 6 + 1);
        assert!(lines.contains(&"sa-tsbl,median,,,0.200000,0.400000,,"));
        assert!(lines.contains(&"sa-tsbl,max,,,0.300000,0.600000,,"));
        assert_eq!(
            *lines.last().unwrap(),
            "sa-tsbl,no_knowledge,0,0,0.000000,0.000000,10,0"
        );
    }

    #[test]
    fn writes_all_files() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_outputs(
            &report(vec![row(&[0.2, 0.4])], vec![KnowledgeCase::NONE]),
            &config(),
            dir.path(),
        )
        .unwrap();
        let names: Vec<String> = files
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(
            names,
            vec![
                "results.csv",
                "cases_0.5.csv",
                "manifest.json",
                "timing.json"
            ]
        );
        let results = std::fs::read_to_string(dir.path().join(RESULTS_FILE)).unwrap();
        assert!(results.starts_with("beta,variant,failure_rate,nmse,"));
        assert!(results.contains("0.5,sa-tsbl,0.300000,"));
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap())
                .unwrap();
        assert_eq!(manifest["config"]["scenario"]["m"], 4);
        assert!(manifest["config"].get("output").is_none());
    }
}
