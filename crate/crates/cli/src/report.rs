use std::path::{Path, PathBuf};

use anyhow::Result;
use metakb::kb::{write_atomic, ENGINE_VERSION};
use serde::Serialize;
use serde_json::Value;

/// Every flag after defaults and environment overrides have been applied.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub seed: u64,
    pub jobs: usize,
    pub options: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(command: &'static str, seed: u64, jobs: usize, options: &impl Serialize, output: Option<&Path>) -> Self {
        Self {
            command,
            seed,
            jobs,
            options: serde_json::to_value(options).expect("flags serialize"),
            output: output.map(Path::to_path_buf),
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    engine_version: &'static str,
    run_config: &'a RunConfig,
    #[serde(flatten)]
    body: &'a T,
}

/// One JSON line carrying the report and its provenance.
pub fn render(run: &RunConfig, body: &impl Serialize) -> String {
    let mut line = serde_json::to_string(&Envelope {
        engine_version: ENGINE_VERSION,
        run_config: run,
        body,
    })
    .expect("report serializes");
    line.push('\n');
    line
}

/// Writes the structured report to `--out` (atomically) and the human
/// summary to stdout. Without `--out`, `json` picks which one stdout gets.
pub fn emit(run: &RunConfig, body: &impl Serialize, human: impl FnOnce() -> String, json: bool) -> Result<()> {
    let line = render(run, body);
    match &run.output {
        Some(path) => {
            write_atomic(path, line.as_bytes())?;
            print!("{}", human());
        }
        None if json => print!("{line}"),
        None => print!("{}", human()),
    }
    Ok(())
}
