//! One run from config to output files; the CLI's `run` is a wrapper.

use std::fs::{self, File};
use std::path::{Path, PathBuf};

use crate::config::Config;
use crate::engine::{Engine, EngineError, EventLog, RunSummary};
use crate::ledger::dump::EpochDump;

pub const EVENTS_FILE: &str = "events.log";
pub const METRICS_FILE: &str = "metrics.csv";
pub const LEDGER_FILE: &str = "ledger.csv";

#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub horizon_s: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut Config) {
        if let Some(s) = self.seed {
            cfg.sim.seed = s;
        }
        if let Some(h) = self.horizon_s {
            cfg.sim.horizon_s = h;
        }
    }
}

#[derive(Debug)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub files: Vec<PathBuf>,
}

/// Runs `cfg` with in-process agents and writes the event log, metrics and
/// ledger convergence CSVs into `out_dir` (plus an epoch dump if asked).
pub fn run_to_dir(cfg: Config, out_dir: &Path, epoch_dump: Option<&Path>) -> Result<RunOutput, EngineError> {
    fs::create_dir_all(out_dir)?;
    let events = out_dir.join(EVENTS_FILE);
    let log = EventLog::to_writer(Box::new(File::create(&events)?));
    let mut engine = Engine::new(cfg, log)?;
    let summary = engine.run()?;
    let mut files = vec![events];
    files.extend(write_reports(&summary, out_dir)?);
    if let Some(p) = epoch_dump {
        fs::write(p, EpochDump::from_ledger(engine.ledger()).to_text())?;
        files.push(p.to_path_buf());
    }
    Ok(RunOutput { summary, files })
}

/// Writes the two CSV reports of a finished run.
pub fn write_reports(summary: &RunSummary, out_dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let metrics = out_dir.join(METRICS_FILE);
    let ledger = out_dir.join(LEDGER_FILE);
    fs::write(&metrics, &summary.metrics_csv)?;
    fs::write(&ledger, &summary.ledger_csv)?;
    Ok(vec![metrics, ledger])
}
