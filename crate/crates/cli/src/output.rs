//! CSV tables and the JSON metadata sidecar.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::Result;

/// Writes `rows` with a header row to `path`, or to stdout.
pub fn write_csv<T: Serialize>(path: Option<&Path>, rows: &[T]) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = csv::Writer::from_path(p)?;
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        None => {
            let mut w = csv::Writer::from_writer(io::stdout().lock());
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

pub fn write_svg(path: &Path, svg: &str) -> Result<()> {
    fs::write(path, svg)?;
    Ok(())
}

#[derive(Serialize)]
pub struct Sidecar<'a> {
    pub command: &'a str,
    pub versions: Value,
    pub argv: Vec<String>,
    pub threads: usize,
    pub config: &'a RunConfig,
    pub seeds: Value,
    pub results: Value,
}

impl<'a> Sidecar<'a> {
    pub fn new(command: &'a str, config: &'a RunConfig, results: Value) -> Self {
        let seeds = match config.moments.seed {
            Some(s) => json!({ "moments": s, "lsm": s }),
            None => json!({}),
        };
        Self {
            command,
            versions: json!({
                "dcheb": env!("CARGO_PKG_VERSION"),
                "cache_format": 1,
                "target": format!("{}-{}", std::env::consts::ARCH, std::env::consts::OS),
            }),
            argv: std::env::args().collect(),
            threads: rayon::current_num_threads(),
            config,
            seeds,
            results,
        }
    }

    /// Writes to `path`, or pretty-prints to stderr when there is no file to sit next to.
    pub fn emit(&self, path: Option<PathBuf>) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        match path {
            Some(p) => fs::write(p, text + "\n")?,
            None => eprintln!("{text}"),
        }
        Ok(())
    }
}

/// `experiment.sidecar`, else the output path with a `.json` extension.
pub fn sidecar_path(config: &RunConfig, output: Option<&Path>) -> Option<PathBuf> {
    config
        .experiment
        .sidecar
        .clone()
        .or_else(|| output.map(|p| p.with_extension("json")))
}
