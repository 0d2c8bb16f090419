mod commands;
mod config;
mod error;
mod output;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use config::{parse_assignment, preset, RunConfig};
use error::{CliError, Result};
use output::{sidecar_path, Sidecar};

#[derive(Parser)]
#[command(name = "dcheb", version, about = "Dynamic Chebyshev pricing of American options")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a moment matrix and save it to a cache file
    Moments(Args),
    /// Price American puts with Greeks at one or more spots
    Price(Args),
    /// Price a strike × maturity surface, optionally against a tree
    Surface(Args),
    /// Error against a reference as the node count grows
    Converge(Args),
    /// Runtime and accuracy of Dynamic Chebyshev against Longstaff–Schwartz
    BenchLsm(Args),
}

/// Every flag below overrides the matching config key.
#[derive(clap::Args)]
struct Args {
    /// JSON config file
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `--set moments.n_cc=2000`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Model preset: bs, merton or cev  [model]
    #[arg(long)]
    model: Option<String>,
    /// closed_form, quadrature, fourier or monte_carlo  [moments.backend]
    #[arg(long)]
    backend: Option<String>,
    /// Polynomial degree N  [grid.degree]
    #[arg(long)]
    degree: Option<usize>,
    /// Monte Carlo samples per node  [moments.samples]
    #[arg(long)]
    samples: Option<usize>,
    /// [moments.seed]
    #[arg(long)]
    seed: Option<u64>,
    /// Moment cache file  [moments.cache]
    #[arg(long)]
    cache: Option<PathBuf>,
    /// [experiment.spots]
    #[arg(long, value_delimiter = ',')]
    spot: Vec<f64>,
    /// [experiment.strikes]
    #[arg(long, value_delimiter = ',')]
    strike: Vec<f64>,
    /// [time.maturities]
    #[arg(long, value_delimiter = ',')]
    maturity: Vec<f64>,
    /// [time.steps_per_year]
    #[arg(long)]
    steps_per_year: Option<usize>,
    /// [experiment.degrees]
    #[arg(long, value_delimiter = ',')]
    degrees: Vec<usize>,
    /// [experiment.paths]
    #[arg(long, value_delimiter = ',')]
    paths: Vec<usize>,
    /// [experiment.option_counts]
    #[arg(long, value_delimiter = ',')]
    options: Vec<usize>,
    /// [experiment.tree_steps]
    #[arg(long)]
    tree_steps: Option<usize>,
    /// [experiment.repetitions]
    #[arg(long)]
    repetitions: Option<usize>,
    /// Skip the tree reference  [experiment.reference = false]
    #[arg(long)]
    no_reference: bool,
    /// CSV output file (stdout when absent)  [experiment.output]
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Metadata JSON file  [experiment.sidecar]
    #[arg(long)]
    sidecar: Option<PathBuf>,
    /// SVG chart file  [experiment.svg]
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Worker thread cap; results do not depend on it
    #[arg(long)]
    threads: Option<usize>,
}

fn path_value(p: &Path) -> Value {
    Value::String(p.display().to_string())
}

impl Args {
    fn overrides(&self) -> Result<Vec<(String, Value)>> {
        let mut o: Vec<(String, Value)> = Vec::new();
        let mut put = |k: &str, v: Value| o.push((k.to_string(), v));
        if let Some(name) = &self.model {
            let m = preset(name).ok_or_else(|| CliError::Config(format!("unknown model preset `{name}`")))?;
            put("model", serde_json::to_value(m)?);
        }
        if let Some(b) = &self.backend {
            put("moments.backend", json!(b));
        }
        if let Some(v) = self.degree {
            put("grid.degree", json!(v));
        }
        if let Some(v) = self.samples {
            put("moments.samples", json!(v));
        }
        if let Some(v) = self.seed {
            put("moments.seed", json!(v));
        }
        if let Some(p) = &self.cache {
            put("moments.cache", path_value(p));
        }
        if !self.spot.is_empty() {
            put("experiment.spots", json!(self.spot));
        }
        if !self.strike.is_empty() {
            put("experiment.strikes", json!(self.strike));
        }
        if !self.maturity.is_empty() {
            put("time.maturities", json!(self.maturity));
        }
        if let Some(v) = self.steps_per_year {
            put("time.steps_per_year", json!(v));
        }
        if !self.degrees.is_empty() {
            put("experiment.degrees", json!(self.degrees));
        }
        if !self.paths.is_empty() {
            put("experiment.paths", json!(self.paths));
        }
        if !self.options.is_empty() {
            put("experiment.option_counts", json!(self.options));
        }
        if let Some(v) = self.tree_steps {
            put("experiment.tree_steps", json!(v));
        }
        if let Some(v) = self.repetitions {
            put("experiment.repetitions", json!(v));
        }
        if self.no_reference {
            put("experiment.reference", json!(false));
        }
        if let Some(p) = &self.output {
            put("experiment.output", path_value(p));
        }
        if let Some(p) = &self.sidecar {
            put("experiment.sidecar", path_value(p));
        }
        if let Some(p) = &self.svg {
            put("experiment.svg", path_value(p));
        }
        for s in &self.set {
            o.push(parse_assignment(s)?);
        }
        Ok(o)
    }
}

fn run(cli: Cli) -> Result<()> {
    let (name, args, command): (&str, &Args, fn(&RunConfig) -> Result<commands::Report>) = match &cli.command {
        Command::Moments(a) => ("moments", a, commands::moments),
        Command::Price(a) => ("price", a, commands::price),
        Command::Surface(a) => ("surface", a, commands::surface),
        Command::Converge(a) => ("converge", a, commands::converge),
        Command::BenchLsm(a) => ("bench-lsm", a, commands::bench_lsm),
    };
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let config = RunConfig::load(args.config.as_deref(), &args.overrides()?)?;
    config.model.validate()?;
    let report = command(&config)?;
    let sidecar = match name {
        // the cache is binary; its sidecar appends `.json` rather than replacing the extension
        "moments" => config.experiment.sidecar.clone().or_else(|| {
            report.primary_output.as_ref().map(|p| {
                let mut s = p.clone().into_os_string();
                s.push(".json");
                PathBuf::from(s)
            })
        }),
        _ => sidecar_path(&config, report.primary_output.as_deref()),
    };
    Sidecar::new(name, &config, report.results).emit(sidecar)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
