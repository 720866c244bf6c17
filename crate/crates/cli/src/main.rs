use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use satsbl::experiment::{self, StudyConfig, StudyReport};
use satsbl::Error;

#[derive(Parser)]
#[command(
    name = "satsbl",
    version,
    about = "Seeded Monte-Carlo studies of block-sparse fault diagnosis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a study and write results.csv, cases_<value>.csv, manifest.json and timing.json.
    Run {
        config: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Override the trials per knowledge case.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Write a ready-made study config. The assembly templates also get the
    /// placeholder matrix next to them.
    GenConfig {
        /// One of sec4_1, sec4_2, sec4_3, sec5_1, sec5_2.
        template: String,
        /// Destination file; defaults to <template>.toml.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn fail(err: &Error, stage_is_config: bool) -> ExitCode {
    eprintln!("error: {err}");
    if stage_is_config || err.is_config_error() {
        ExitCode::from(EXIT_CONFIG)
    } else {
        ExitCode::from(EXIT_RUNTIME)
    }
}

fn print_table(report: &StudyReport) {
    println!(
        "{:>10}  {:<10} {:>8} {:>8} {:>10} {:>8}",
        report.table.parameter.name(),
        "variant",
        "failure",
        "nmse",
        "nonconv",
        "numfail"
    );
    for row in &report.table.rows {
        let nonconverged: usize = row.summary.cases.iter().map(|c| c.nonconverged).sum();
        println!(
            "{:>10}  {:<10} {:>8.3} {:>8.3} {:>10} {:>8}",
            row.sweep_value,
            row.variant.name(),
            row.summary.failure_rate,
            row.summary.mean_nmse,
            nonconverged,
            row.numerical_failures
        );
    }
}

fn load(path: &Path) -> Result<StudyConfig, Error> {
    let cfg = StudyConfig::load(path)?;
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();

    match cli.command {
        Command::Validate { config } => match load(&config) {
            Ok(cfg) => {
                println!(
                    "{}: ok ({} values of {}, {} trials per case)",
                    config.display(),
                    cfg.sweep.values.len(),
                    cfg.sweep.parameter,
                    cfg.scenario.trials
                );
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e, true),
        },
        Command::GenConfig { template, out } => {
            let path = out.unwrap_or_else(|| PathBuf::from(format!("{template}.toml")));
            match experiment::write_template(&template, &path) {
                Ok(files) => {
                    for f in files {
                        println!("wrote {}", f.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e, false),
            }
        }
        Command::Run {
            config,
            seed,
            out,
            jobs,
            trials,
        } => {
            let mut cfg = match StudyConfig::load(&config) {
                Ok(cfg) => cfg,
                Err(e) => return fail(&e, true),
            };
            if let Some(seed) = seed {
                cfg.scenario.seed = seed;
            }
            if let Some(trials) = trials {
                cfg.scenario.trials = trials;
            }
            if let Some(out) = out {
                cfg.output.output_dir = out;
            }
            if let Err(e) = cfg.validate() {
                return fail(&e, true);
            }
            let report = match experiment::run_study(&cfg, jobs) {
                Ok(r) => r,
                Err(e) => return fail(&e, false),
            };
            match experiment::emit_outputs(&report, &cfg, &cfg.output.output_dir) {
                Ok(files) => {
                    print_table(&report);
                    if report.high_coherence() {
                        println!(
                            "warning: dictionary mutual coherence {:.4} >= {}",
                            report.dictionary_coherence.unwrap_or(f64::NAN),
                            experiment::HIGH_COHERENCE
                        );
                    }
                    log::info!(
                        "wrote {} files to {}",
                        files.len(),
                        cfg.output.output_dir.display()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e, false),
            }
        }
    }
}
