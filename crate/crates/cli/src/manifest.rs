use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use ramanquant::io::save_json;
use ramanquant::Result;
use serde::Serialize;

/// Wall-clock facts; the only part of a manifest that differs between
/// otherwise identical runs.
#[derive(Debug, Serialize)]
pub struct Timing {
    pub started_unix_s: f64,
    pub wall_time_s: f64,
}

/// Provenance record written next to every output.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub config_hash: Option<String>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub timing: Timing,
}

pub struct Clock {
    started: SystemTime,
    t0: Instant,
}

impl Clock {
    pub fn start() -> Self {
        Self { started: SystemTime::now(), t0: Instant::now() }
    }

    pub fn timing(&self) -> Timing {
        Timing {
            started_unix_s: self.started.duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64()),
            wall_time_s: self.t0.elapsed().as_secs_f64(),
        }
    }
}

impl RunManifest {
    pub fn new(command: &str, argv: &[String], clock: &Clock) -> Self {
        Self {
            command: command.into(),
            argv: argv.to_vec(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            seed: None,
            config_hash: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timing: clock.timing(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        save_json(path, self)
    }
}

pub fn display(p: &Path) -> String {
    p.display().to_string()
}
