//! Experiment runner over `passn-core`: JSON configs in, CSV tables and a
//! JSON summary out. Every recipe is a pure function of its config and seed.

pub mod config;
pub mod error;
pub mod recipes;
pub mod report;
pub mod schema;

use std::path::{Path, PathBuf};

use serde_json::Value;

pub use config::ExperimentConfig;
pub use error::{LabError, LabResult, EXIT_CONFIG, EXIT_RUNTIME};
pub use recipes::{list as list_recipes, Ctx, RecipeInfo, THREADS_ENV};
pub use report::{Report, ReportRow, Table};

/// Run a recipe and validate its report without touching the filesystem.
pub fn run_report(recipe: &str, params: &Value, seed: u64, threads: Option<usize>) -> LabResult<(Report, Value)> {
    let ctx = Ctx::new(seed, threads)?;
    let (report, resolved) = recipes::execute(recipe, params, &ctx)?;
    schema::validate(&schema::load()?, &report)?;
    Ok((report, resolved))
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: Report,
    pub output_dir: PathBuf,
    pub files: Vec<String>,
}

/// `--out` beats the config's `output_dir`, which beats `out/<recipe>`.
pub fn output_dir(config: &ExperimentConfig, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&config.recipe))
}

/// Run a config end to end and write its report files.
pub fn run_experiment(
    config: &ExperimentConfig,
    out: Option<&Path>,
    seed: Option<u64>,
    threads: Option<usize>,
) -> LabResult<RunOutcome> {
    let seed = seed.unwrap_or(config.seed);
    let (report, resolved) = run_report(&config.recipe, &config.params, seed, threads)?;
    let dir = output_dir(config, out);
    let files = report.write(&dir, seed, &resolved)?;
    Ok(RunOutcome {
        report,
        output_dir: dir,
        files,
    })
}
