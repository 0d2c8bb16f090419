//! Run configuration: a JSON file, overridden key by key from the command line.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use dcheb::engine::PutFlags;
use dcheb::experiments::MomentBackend;
use dcheb::models::{CevScheme, ModelSpec};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub moments: MomentConfig,
    pub experiment: ExperimentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: preset("bs").expect("known preset"),
            grid: GridConfig::default(),
            time: TimeConfig::default(),
            moments: MomentConfig::default(),
            experiment: ExperimentConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Polynomial degree N; 300 for deterministic backends, ⌈√(2M)⌉ for Monte Carlo.
    pub degree: Option<usize>,
    /// Log-price domain `[lower, upper]`; the default rule when absent.
    pub domain: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    pub maturity: Option<f64>,
    pub maturities: Option<Vec<f64>>,
    pub steps_per_year: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    ClosedForm,
    Quadrature,
    Fourier,
    MonteCarlo,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MomentConfig {
    pub backend: BackendKind,
    pub quad_nodes: Option<usize>,
    pub xi_max: f64,
    pub n_cc: usize,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub antithetic: bool,
    pub cev: CevScheme,
    pub cache: Option<PathBuf>,
}

impl Default for MomentConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::ClosedForm,
            quad_nodes: None,
            xi_max: 250.0,
            n_cc: 500,
            samples: None,
            seed: None,
            antithetic: true,
            cev: CevScheme::default(),
            cache: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub spots: Option<Vec<f64>>,
    pub strikes: Option<Vec<f64>>,
    /// Node degrees of a convergence study.
    pub degrees: Option<Vec<usize>>,
    /// Path counts of a benchmark.
    pub paths: Option<Vec<usize>>,
    pub option_counts: Option<Vec<usize>>,
    /// Time steps per year of a benchmark, one block of rows each.
    pub steps_per_year: Option<Vec<usize>>,
    /// Compare against a tree (or high-resolution quadrature) reference.
    pub reference: bool,
    pub tree_steps: Option<usize>,
    pub reference_degree: usize,
    pub repetitions: usize,
    pub lsm_degree: usize,
    pub tail_correction: Option<bool>,
    pub first_step_smoothing: Option<bool>,
    pub output: Option<PathBuf>,
    pub sidecar: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            spots: None,
            strikes: None,
            degrees: None,
            paths: None,
            option_counts: None,
            steps_per_year: None,
            reference: true,
            tree_steps: None,
            reference_degree: 750,
            repetitions: 3,
            lsm_degree: 3,
            tail_correction: None,
            first_step_smoothing: None,
            output: None,
            sidecar: None,
            svg: None,
        }
    }
}

/// Named parameter sets for `--model`.
pub fn preset(name: &str) -> Option<ModelSpec> {
    match name {
        "bs" | "black_scholes" => Some(ModelSpec::BlackScholes { r: 0.03, sigma: 0.25 }),
        "merton" => Some(ModelSpec::Merton {
            r: 0.03,
            sigma: 0.25,
            lambda: 0.4,
            alpha: -0.5,
            beta: 0.4,
        }),
        "cev" => Some(ModelSpec::Cev {
            r: 0.03,
            sigma: 0.25,
            beta: 1.5,
        }),
        _ => None,
    }
}

impl RunConfig {
    /// Layers the file at `path` (if any) over the defaults, applies `overrides`
    /// in order and deserializes.
    pub fn load(path: Option<&Path>, overrides: &[(String, Value)]) -> Result<Self> {
        let mut root = serde_json::to_value(Self::default())?;
        if let Some(p) = path {
            let text =
                fs::read_to_string(p).map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            let file: Value =
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            let Value::Object(file) = file else {
                return Err(CliError::Config("config root must be a JSON object".into()));
            };
            for (key, value) in file {
                match (root.get_mut(&key), value) {
                    // a model block replaces the default model, whatever its variant
                    (Some(slot), v) if key == "model" => *slot = v,
                    (Some(Value::Object(section)), Value::Object(v)) => section.extend(v),
                    (_, v) => {
                        set_path(&mut root, &key, v)?;
                    }
                }
            }
        }
        for (key, value) in overrides {
            set_path(&mut root, key, value.clone())?;
        }
        serde_json::from_value(root).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn flags(&self) -> PutFlags {
        let base = PutFlags::for_model(&self.model);
        PutFlags {
            tail_correction: self.experiment.tail_correction.unwrap_or(base.tail_correction),
            first_step_smoothing: self.experiment.first_step_smoothing.unwrap_or(base.first_step_smoothing),
        }
    }

    pub fn strikes_or(&self, default: Vec<f64>) -> Vec<f64> {
        self.experiment.strikes.clone().unwrap_or(default)
    }

    pub fn spots_or(&self, default: Vec<f64>) -> Vec<f64> {
        self.experiment.spots.clone().unwrap_or(default)
    }

    pub fn maturities_or(&self, default: Vec<f64>) -> Vec<f64> {
        match (&self.time.maturities, self.time.maturity) {
            (Some(m), _) => m.clone(),
            (None, Some(t)) => vec![t],
            (None, None) => default,
        }
    }

    pub fn maturity(&self) -> Result<f64> {
        match self.maturities_or(vec![1.0]).as_slice() {
            [t] => Ok(*t),
            _ => Err(CliError::Config("this command takes a single maturity".into())),
        }
    }

    /// Moment backend; `samples` overrides `moments.samples` (benchmarks sweep it).
    pub fn backend(&self, samples: Option<usize>) -> Result<MomentBackend> {
        let m = &self.moments;
        Ok(match m.backend {
            BackendKind::ClosedForm => MomentBackend::ClosedForm,
            BackendKind::Quadrature => MomentBackend::Quadrature {
                quad_nodes: m.quad_nodes,
            },
            BackendKind::Fourier => MomentBackend::Fourier {
                xi_max: m.xi_max,
                n_cc: m.n_cc,
            },
            BackendKind::MonteCarlo => MomentBackend::MonteCarlo {
                samples: samples
                    .or(m.samples)
                    .ok_or_else(|| CliError::Config("monte_carlo backend requires moments.samples".into()))?,
                seed: self.seed()?,
                cev: m.cev,
                antithetic: m.antithetic,
            },
        })
    }

    pub fn seed(&self) -> Result<u64> {
        self.moments
            .seed
            .ok_or_else(|| CliError::Config("Monte Carlo runs require moments.seed".into()))
    }

    /// Explicit degree, else ⌈√(2M)⌉ for Monte Carlo and 300 otherwise.
    pub fn degree(&self, backend: &MomentBackend) -> usize {
        self.grid.degree.unwrap_or(match backend {
            MomentBackend::MonteCarlo { samples, .. } => dcheb::experiments::mc_degree(*samples),
            _ => 300,
        })
    }

    pub fn domain(&self) -> Option<(f64, f64)> {
        self.grid.domain.map(|[a, b]| (a, b))
    }
}

/// Number of steps of length `1 / steps_per_year` in `maturity`, which must be a whole number.
pub fn whole_steps(maturity: f64, steps_per_year: usize) -> Result<usize> {
    let x = maturity * steps_per_year as f64;
    let n = x.round();
    if !(maturity > 0.0) || n < 1.0 || (x - n).abs() > 1e-9 * x.max(1.0) {
        return Err(CliError::Config(format!(
            "maturity {maturity} is not a whole number of steps at {steps_per_year} per year"
        )));
    }
    Ok(n as usize)
}

/// Parses `key=value`; the value is JSON when it parses as JSON, a string otherwise.
pub fn parse_assignment(s: &str) -> Result<(String, Value)> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("expected KEY=VALUE, got `{s}`")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(CliError::Config(format!("empty key in `{s}`")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

/// Sets a dotted key, creating intermediate objects.
pub fn set_path(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    let mut node = root;
    for (i, part) in parts.iter().enumerate() {
        let map = node
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("`{}` is not an object", parts[..i].join("."))))?;
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}
