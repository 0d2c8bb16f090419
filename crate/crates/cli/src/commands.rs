use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use dcheb::cheb::ChebGrid;
use dcheb::engine::{american_put, domain_rule, price_surface};
use dcheb::experiments::*;
use dcheb::models::{Greeks, ModelSpec};
use dcheb::moments::{fingerprint, load_cache, save_cache, Backend, MomentMatrix};
use dcheb::numerics::ols_slope;
use dcheb::Error;

use crate::config::{whole_steps, RunConfig};
use crate::error::{CliError, Result};
use crate::output::{write_csv, write_svg};
use crate::svg::{line_chart, Chart, Series};

/// What a command hands back for the sidecar.
pub struct Report {
    pub results: Value,
    /// The file the sidecar sits next to.
    pub primary_output: Option<PathBuf>,
}

fn single<T: Copy>(values: &[T], what: &str) -> Result<T> {
    match values {
        [v] => Ok(*v),
        _ => Err(CliError::Config(format!("this command takes exactly one {what}"))),
    }
}

fn require_nonempty<T>(values: &[T], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(CliError::Config(format!("{what} must not be empty")));
    }
    Ok(())
}

fn check_finite(greeks: &[Greeks]) -> Result<()> {
    if greeks.iter().any(|g| !g.price.is_finite()) {
        return Err(Error::Numerical("non-finite price".into()).into());
    }
    Ok(())
}

fn has_tree(model: &ModelSpec) -> bool {
    !matches!(model, ModelSpec::Merton { .. })
}

fn default_tree_steps(model: &ModelSpec) -> usize {
    match model {
        ModelSpec::Cev { .. } => 10000,
        _ => 20000,
    }
}

fn matches_backend(gamma: &MomentMatrix, wanted: &MomentBackend) -> bool {
    match (gamma.backend(), wanted) {
        (Backend::ClosedForm | Backend::ClosedFormHybrid, MomentBackend::ClosedForm) => true,
        (Backend::Quadrature, MomentBackend::Quadrature { .. }) => true,
        (Backend::Fourier, MomentBackend::Fourier { .. }) => true,
        (
            Backend::MonteCarlo,
            MomentBackend::MonteCarlo {
                samples,
                seed,
                antithetic,
                ..
            },
        ) => gamma
            .mc_meta()
            .is_some_and(|m| m.samples == *samples && m.seed == *seed && m.antithetic == *antithetic),
        _ => false,
    }
}

/// Builds the moment matrix, or loads it from `moments.cache` when that file exists.
fn moment_matrix(
    cfg: &RunConfig,
    backend: &MomentBackend,
    degree: usize,
    spots: &[f64],
    strikes: &[f64],
    t_max: f64,
    steps_per_year: usize,
) -> Result<(MomentMatrix, Value)> {
    let (lo, hi) = match cfg.domain() {
        Some(d) => d,
        None => domain_rule(&cfg.model, spots, strikes, t_max)?,
    };
    let grid = Arc::new(ChebGrid::interval(lo, hi, degree)?);
    let dt = 1.0 / steps_per_year as f64;
    let cache = cfg.moments.cache.as_ref();
    if let Some(path) = cache.filter(|p| p.exists()) {
        let gamma = load_cache(path, &fingerprint(&cfg.model, &grid, dt))?;
        if !matches_backend(&gamma, backend) {
            return Err(CliError::Config(format!(
                "cache {} was built with the {} backend and different settings",
                path.display(),
                gamma.backend()
            )));
        }
        let info = json!({ "source": "cache", "path": path, "fingerprint": gamma.fingerprint() });
        return Ok((gamma, info));
    }
    let mut gamma = backend.build(&cfg.model, &grid, dt)?;
    if cfg.flags().tail_correction {
        gamma.precompute_tails(strikes)?;
    }
    if let Some(path) = cache {
        save_cache(&gamma, path)?;
    }
    let info = json!({ "source": "built", "path": cache, "fingerprint": gamma.fingerprint() });
    Ok((gamma, info))
}

fn gamma_summary(gamma: &MomentMatrix, info: Value) -> Value {
    let d = gamma.grid().domain();
    json!({
        "backend": gamma.backend().to_string(),
        "degree": gamma.size() - 1,
        "domain": [d.lower()[0], d.upper()[0]],
        "dt": gamma.dt(),
        "mc": gamma.mc_meta(),
        "offline_seconds": gamma.build_seconds(),
        "moments": info,
    })
}

pub fn moments(cfg: &RunConfig) -> Result<Report> {
    let path = cfg
        .moments
        .cache
        .clone()
        .or_else(|| cfg.experiment.output.clone())
        .ok_or_else(|| CliError::Config("moments needs moments.cache (or --cache / --output)".into()))?;
    let steps_per_year = cfg.time.steps_per_year.unwrap_or(32);
    let maturities = cfg.maturities_or(vec![1.0]);
    require_nonempty(&maturities, "maturities")?;
    for &t in &maturities {
        whole_steps(t, steps_per_year)?;
    }
    let strikes = cfg.strikes_or(vec![100.0]);
    let spots = cfg.spots_or(vec![100.0]);
    let backend = cfg.backend(None)?;
    let degree = cfg.degree(&backend);
    let t_max = maturities.iter().cloned().fold(0.0, f64::max);
    let (lo, hi) = match cfg.domain() {
        Some(d) => d,
        None => domain_rule(&cfg.model, &spots, &strikes, t_max)?,
    };
    let grid = Arc::new(ChebGrid::interval(lo, hi, degree)?);
    let mut gamma = backend.build(&cfg.model, &grid, 1.0 / steps_per_year as f64)?;
    if cfg.flags().tail_correction {
        gamma.precompute_tails(&strikes)?;
    }
    save_cache(&gamma, &path)?;
    println!("fingerprint {}", gamma.fingerprint());
    println!("offline {:.3} s ({} backend, N = {degree})", gamma.build_seconds(), gamma.backend());
    let info = json!({ "source": "built", "path": path, "fingerprint": gamma.fingerprint() });
    Ok(Report {
        results: gamma_summary(&gamma, info),
        primary_output: Some(path),
    })
}

#[derive(Serialize)]
struct PriceRow {
    spot: f64,
    strike: f64,
    maturity: f64,
    price: f64,
    delta: f64,
    gamma: f64,
}

pub fn price(cfg: &RunConfig) -> Result<Report> {
    let steps_per_year = cfg.time.steps_per_year.unwrap_or(32);
    let spots = cfg.spots_or(vec![100.0]);
    let strikes = cfg.strikes_or(vec![100.0]);
    let maturities = cfg.maturities_or(vec![1.0]);
    require_nonempty(&spots, "spots")?;
    require_nonempty(&strikes, "strikes")?;
    require_nonempty(&maturities, "maturities")?;
    let steps = maturities
        .iter()
        .map(|&t| whole_steps(t, steps_per_year))
        .collect::<Result<Vec<_>>>()?;
    let backend = cfg.backend(None)?;
    let degree = cfg.degree(&backend);
    let t_max = maturities.iter().cloned().fold(0.0, f64::max);
    let (gamma, info) = moment_matrix(cfg, &backend, degree, &spots, &strikes, t_max, steps_per_year)?;

    let start = Instant::now();
    let mut rows = Vec::new();
    for &k in &strikes {
        for (&t, &n) in maturities.iter().zip(&steps) {
            let v = american_put(&gamma, &cfg.model, k, t, n, &spots, cfg.flags())?;
            check_finite(&v.greeks)?;
            rows.extend(spots.iter().zip(&v.greeks).map(|(&s, g)| PriceRow {
                spot: s,
                strike: k,
                maturity: t,
                price: g.price,
                delta: g.delta,
                gamma: g.gamma,
            }));
        }
    }
    let online = start.elapsed().as_secs_f64();
    let out = cfg.experiment.output.as_deref();
    write_csv(out, &rows)?;
    eprintln!(
        "offline {:.3} s, online {online:.3} s ({} options, N = {degree})",
        gamma.build_seconds(),
        strikes.len() * maturities.len()
    );
    let mut results = gamma_summary(&gamma, info);
    results["online_seconds"] = json!(online);
    Ok(Report {
        results,
        primary_output: out.map(Into::into),
    })
}

#[derive(Serialize)]
struct SurfaceRow {
    strike: f64,
    maturity: f64,
    price: f64,
    delta: f64,
    gamma: f64,
    reference: Option<f64>,
    error: Option<f64>,
}

pub fn surface(cfg: &RunConfig) -> Result<Report> {
    let steps_per_year = cfg.time.steps_per_year.unwrap_or(504);
    let spot = single(&cfg.spots_or(vec![100.0]), "spot")?;
    let strikes = cfg.strikes_or(surface_strikes(spot));
    let maturities = cfg.maturities_or(SURFACE_MATURITIES.to_vec());
    require_nonempty(&strikes, "strikes")?;
    require_nonempty(&maturities, "maturities")?;
    for &t in &maturities {
        whole_steps(t, steps_per_year)?;
    }
    let backend = cfg.backend(None)?;
    let degree = cfg.degree(&backend);
    let t_max = maturities.iter().cloned().fold(0.0, f64::max);
    let (gamma, info) = moment_matrix(cfg, &backend, degree, &[spot], &strikes, t_max, steps_per_year)?;
    let s = price_surface(&gamma, &cfg.model, &strikes, &maturities, spot, cfg.flags())?;
    for row in &s.entries {
        check_finite(row)?;
    }

    let reference = if cfg.experiment.reference && has_tree(&cfg.model) {
        let fixed = cfg.experiment.tree_steps;
        let cev = matches!(cfg.model, ModelSpec::Cev { .. });
        Some(surface_reference(&cfg.model, spot, &strikes, &maturities, |t| {
            fixed.unwrap_or(if cev { 10000 } else { surface_tree_steps(t) })
        })?)
    } else {
        None
    };
    let mut rows = Vec::new();
    for (i, &k) in strikes.iter().enumerate() {
        for (m, &t) in maturities.iter().enumerate() {
            let g = s.entries[i][m];
            let r = reference.as_ref().map(|r| r[i][m]);
            rows.push(SurfaceRow {
                strike: k,
                maturity: t,
                price: g.price,
                delta: g.delta,
                gamma: g.gamma,
                reference: r,
                error: r.map(|r| (g.price - r).abs()),
            });
        }
    }
    let out = cfg.experiment.output.as_deref();
    write_csv(out, &rows)?;
    if let Some(path) = &cfg.experiment.svg {
        let series: Vec<Series> = strikes
            .iter()
            .enumerate()
            .map(|(i, &k)| Series {
                label: format!("K = {k}"),
                points: maturities.iter().zip(&s.entries[i]).map(|(&t, g)| (t, g.price)).collect(),
            })
            .collect();
        let chart = Chart {
            title: "American put surface",
            x_label: "maturity (years)",
            y_label: "price",
            log_x: false,
            log_y: false,
        };
        write_svg(path, &line_chart(&chart, &series))?;
    }
    let max_error = reference.as_ref().map(|r| surface_max_error(&s, r));
    eprintln!(
        "offline {:.3} s, online {:.3} s, max error vs tree {}",
        s.metadata.offline_seconds,
        s.metadata.online_seconds,
        max_error.map_or("n/a".into(), |e| format!("{e:.3e}"))
    );
    let mut results = gamma_summary(&gamma, info);
    results["online_seconds"] = json!(s.metadata.online_seconds);
    results["max_tail_correction"] = json!(s.metadata.max_tail_correction);
    results["max_error"] = json!(max_error);
    results["reference"] = json!(reference.as_ref().map(|_| "American tree"));
    Ok(Report {
        results,
        primary_output: out.map(Into::into),
    })
}

pub fn converge(cfg: &RunConfig) -> Result<Report> {
    let steps_per_year = cfg.time.steps_per_year.unwrap_or(32);
    let maturity = cfg.maturity()?;
    let steps = whole_steps(maturity, steps_per_year)?;
    let strike = single(&cfg.strikes_or(vec![100.0]), "strike")?;
    let spots = cfg.spots_or(spot_grid(strike, 41));
    let degrees = cfg
        .experiment
        .degrees
        .clone()
        .unwrap_or_else(|| vec![50, 100, 150, 200, 250, 300]);
    require_nonempty(&spots, "spots")?;
    require_nonempty(&degrees, "degrees")?;
    if !cfg.experiment.reference {
        return Err(CliError::Config("converge needs a reference (experiment.reference = true)".into()));
    }
    let setup = ConvergenceSetup {
        model: cfg.model,
        strike,
        maturity,
        steps,
        spots: spots.clone(),
        backend: cfg.backend(None)?,
        domain: cfg.domain(),
        flags: cfg.flags(),
    };
    let start = Instant::now();
    let (reference, described) = if has_tree(&cfg.model) {
        let wanted = cfg.experiment.tree_steps.unwrap_or(default_tree_steps(&cfg.model));
        let tree_steps = wanted.div_ceil(steps) * steps;
        let exercise = bermudan_exercise(tree_steps, steps)?;
        let oracle = TreeOracle {
            tree_steps,
            ..TreeOracle::default()
        };
        let r = tree_reference(&cfg.model, strike, maturity, &spots, exercise, oracle)?;
        (r, json!({ "kind": "bermudan_tree", "tree_steps": tree_steps, "bump": oracle.bump }))
    } else {
        let quad = ConvergenceSetup {
            backend: MomentBackend::Quadrature { quad_nodes: None },
            ..setup.clone()
        };
        let n = cfg.experiment.reference_degree;
        (quad.run(n)?.greeks, json!({ "kind": "quadrature", "degree": n }))
    };
    let reference_seconds = start.elapsed().as_secs_f64();
    let rows = convergence_study(&setup, &degrees, &reference)?;
    if rows.iter().any(|r| !r.err_price.is_finite()) {
        return Err(Error::Numerical("non-finite error in convergence study".into()).into());
    }
    let out = cfg.experiment.output.as_deref();
    write_csv(out, &rows)?;
    if let Some(path) = &cfg.experiment.svg {
        let pick = |f: fn(&ConvergenceRow) -> f64| rows.iter().map(|r| (r.degree as f64, f(r))).collect();
        let series = vec![
            Series {
                label: "price".into(),
                points: pick(|r| r.err_price),
            },
            Series {
                label: "delta".into(),
                points: pick(|r| r.err_delta),
            },
            Series {
                label: "gamma".into(),
                points: pick(|r| r.err_gamma),
            },
        ];
        let chart = Chart {
            title: "Maximal error over S0",
            x_label: "N",
            y_label: "max abs error",
            log_x: false,
            log_y: true,
        };
        write_svg(path, &line_chart(&chart, &series))?;
    }
    Ok(Report {
        results: json!({ "reference": described, "reference_seconds": reference_seconds, "rows": rows }),
        primary_output: out.map(Into::into),
    })
}

pub fn bench_lsm(cfg: &RunConfig) -> Result<Report> {
    let spot = single(&cfg.spots_or(vec![100.0]), "spot")?;
    let strikes = cfg.strikes_or(surface_strikes(spot));
    let maturities = cfg.maturities_or(SURFACE_MATURITIES.to_vec());
    let counts = cfg.experiment.option_counts.clone().unwrap_or_else(|| vec![1, 9, 27, 108]);
    let paths = cfg.experiment.paths.clone().unwrap_or_else(|| vec![20000]);
    let steps_list = cfg
        .experiment
        .steps_per_year
        .clone()
        .unwrap_or_else(|| vec![cfg.time.steps_per_year.unwrap_or(504)]);
    for (v, what) in [(&counts, "option_counts"), (&paths, "paths"), (&steps_list, "steps_per_year")] {
        require_nonempty(v, what)?;
        if v.contains(&0) {
            return Err(CliError::Config(format!("{what} must be positive")));
        }
    }
    let largest = option_subset(&strikes, &maturities, counts.iter().copied().max().unwrap_or(1));
    let reference = if cfg.experiment.reference && has_tree(&cfg.model) {
        let fixed = cfg.experiment.tree_steps;
        let cev = matches!(cfg.model, ModelSpec::Cev { .. });
        Some(
            largest
                .iter()
                .map(|&(k, t)| {
                    let n = fixed.unwrap_or(if cev { 10000 } else { surface_tree_steps(t) });
                    tree_put(&cfg.model, spot, k, t, n, dcheb::baselines::Exercise::American)
                })
                .collect::<dcheb::Result<Vec<f64>>>()?,
        )
    } else {
        None
    };

    let mut rows = Vec::new();
    for &steps_per_year in &steps_list {
        for &(_, t) in &largest {
            whole_steps(t, steps_per_year)?;
        }
        let setup = BenchSetup {
            model: cfg.model,
            spot,
            steps_per_year,
            seed: cfg.seed()?,
            lsm_degree: cfg.experiment.lsm_degree,
            cev: cfg.moments.cev,
            antithetic: cfg.moments.antithetic,
            repetitions: cfg.experiment.repetitions,
        };
        for &count in &counts {
            let options = option_subset(&strikes, &maturities, count);
            let r = reference.as_ref().map(|r| &r[..options.len()]);
            for &m in &paths {
                rows.push(bench_dc(&setup, &options, m, r)?);
                rows.push(dcheb::experiments::bench_lsm(&setup, &options, m, r)?);
                eprintln!("{steps_per_year}/yr, {} options, M = {m}: done", options.len());
            }
        }
    }
    let out = cfg.experiment.output.as_deref();
    write_csv(out, &rows)?;

    // runtime-vs-options slopes per (method, steps per year, paths)
    let mut slopes = Vec::new();
    let mut series = Vec::new();
    for &spy in &steps_list {
        for &m in &paths {
            for method in [Method::Dc, Method::Lsm] {
                let pts: Vec<(f64, f64)> = rows
                    .iter()
                    .filter(|r| r.method == method && r.steps_per_year == spy && r.paths == m)
                    .map(|r| (r.options as f64, r.t_total_s))
                    .collect();
                if pts.len() >= 2 {
                    let x: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
                    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
                    slopes.push(json!({
                        "method": method, "steps_per_year": spy, "paths": m, "slope": ols_slope(&x, &y)
                    }));
                }
                series.push(Series {
                    label: format!("{method} M={m} n={spy}"),
                    points: pts,
                });
            }
        }
    }
    if let Some(path) = &cfg.experiment.svg {
        let chart = Chart {
            title: "Total runtime vs number of options",
            x_label: "options",
            y_label: "seconds",
            log_x: true,
            log_y: true,
        };
        write_svg(path, &line_chart(&chart, &series))?;
    }
    Ok(Report {
        results: json!({ "runtime_slopes": slopes, "reference": reference.is_some() }),
        primary_output: out.map(Into::into),
    })
}
