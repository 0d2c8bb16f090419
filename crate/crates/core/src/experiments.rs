//! Experiment drivers: convergence studies against tree oracles, option
//! surfaces, and Dynamic Chebyshev versus Longstaff–Schwartz benchmarks.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{cev_tree_put, crr_put, lsm_price_horizon, simulate_paths, Exercise};
use crate::cheb::ChebGrid;
use crate::engine::{american_put, domain_rule, price_surface, PriceSurface, PutFlags};
use crate::error::{Error, Result};
use crate::models::{CevScheme, Greeks, ModelSpec};
use crate::moments::{
    default_quad_nodes, gamma_closed_form, gamma_fourier, gamma_mc, gamma_quadrature, FourierSettings, McSettings,
    MomentMatrix,
};

/// Maturities of the reference option surface, in years.
pub const SURFACE_MATURITIES: [f64; 12] = [
    1.0 / 12.0,
    2.0 / 12.0,
    3.0 / 12.0,
    6.0 / 12.0,
    9.0 / 12.0,
    1.0,
    15.0 / 12.0,
    18.0 / 12.0,
    2.0,
    30.0 / 12.0,
    3.0,
    4.0,
];

/// Path counts of the Monte Carlo studies.
pub const MC_PATH_COUNTS: [usize; 6] = [2500, 5000, 10000, 20000, 40000, 80000];

/// Strikes from 80% to 120% of `spot` in steps of 5%.
pub fn surface_strikes(spot: f64) -> Vec<f64> {
    (0..9).map(|i| spot * (0.8 + 0.05 * i as f64)).collect()
}

/// `count` spots spread evenly over 60%..140% of `strike`.
pub fn spot_grid(strike: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![strike];
    }
    (0..count)
        .map(|i| strike * (0.6 + 0.8 * i as f64 / (count - 1) as f64))
        .collect()
}

/// Node count coupled to the path count, `⌈√(2M)⌉`.
pub fn mc_degree(samples: usize) -> usize {
    (2.0 * samples as f64).sqrt().ceil() as usize
}

/// How the moment matrix is computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MomentBackend {
    ClosedForm,
    Quadrature {
        #[serde(default)]
        quad_nodes: Option<usize>,
    },
    Fourier {
        #[serde(default = "default_xi_max")]
        xi_max: f64,
        #[serde(default = "default_n_cc")]
        n_cc: usize,
    },
    MonteCarlo {
        samples: usize,
        seed: u64,
        #[serde(default)]
        cev: CevScheme,
        #[serde(default)]
        antithetic: bool,
    },
}

fn default_xi_max() -> f64 {
    FourierSettings::default().xi_max
}

fn default_n_cc() -> usize {
    FourierSettings::default().n_cc
}

impl MomentBackend {
    pub fn fourier_default() -> Self {
        let f = FourierSettings::default();
        MomentBackend::Fourier {
            xi_max: f.xi_max,
            n_cc: f.n_cc,
        }
    }

    pub fn build(&self, model: &ModelSpec, grid: &Arc<ChebGrid>, dt: f64) -> Result<MomentMatrix> {
        match *self {
            MomentBackend::ClosedForm => gamma_closed_form(model, grid, dt),
            MomentBackend::Quadrature { quad_nodes } => {
                let q = quad_nodes.unwrap_or_else(|| default_quad_nodes(grid.degree(0)));
                gamma_quadrature(model, grid, dt, q)
            }
            MomentBackend::Fourier { xi_max, n_cc } => gamma_fourier(model, grid, dt, FourierSettings { xi_max, n_cc }),
            MomentBackend::MonteCarlo {
                samples,
                seed,
                cev,
                antithetic,
            } => gamma_mc(
                model,
                grid,
                dt,
                McSettings {
                    samples,
                    seed,
                    cev,
                    antithetic,
                },
            ),
        }
    }

    pub fn is_deterministic(&self) -> bool {
        !matches!(self, MomentBackend::MonteCarlo { .. })
    }
}

/// Binomial-tree put: CRR for Black–Scholes, Nelson–Ramaswamy for CEV.
pub fn tree_put(
    model: &ModelSpec,
    s0: f64,
    strike: f64,
    maturity: f64,
    tree_steps: usize,
    exercise: Exercise,
) -> Result<f64> {
    match *model {
        ModelSpec::BlackScholes { r, sigma } => crr_put(s0, strike, r, sigma, maturity, tree_steps, exercise),
        ModelSpec::Cev { r, sigma, beta } => cev_tree_put(s0, strike, r, sigma, beta, maturity, tree_steps, exercise),
        ModelSpec::Merton { .. } => Err(Error::Unsupported {
            operation: "tree oracle",
            model: model.name(),
        }),
    }
}

/// Tree exercise schedule matching `dc_steps` equidistant exercise dates.
pub fn bermudan_exercise(tree_steps: usize, dc_steps: usize) -> Result<Exercise> {
    if dc_steps == 0 || tree_steps % dc_steps != 0 {
        return Err(Error::InvalidArgument(format!(
            "tree steps {tree_steps} are not a multiple of {dc_steps} exercise dates"
        )));
    }
    Ok(Exercise::Bermudan {
        every: tree_steps / dc_steps,
    })
}

/// Tree settings for bump-and-reprice Greeks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeOracle {
    pub tree_steps: usize,
    /// Absolute spot bump.
    pub bump: f64,
}

impl Default for TreeOracle {
    fn default() -> Self {
        Self {
            tree_steps: 20000,
            bump: 0.5,
        }
    }
}

/// Tree price with bump-and-reprice delta and gamma.
///
/// Inside the exercise region the put is `K - S` exactly. When the central
/// stencil would straddle the exercise boundary, one-sided differences on the
/// continuation side are used instead.
pub fn tree_greeks(
    model: &ModelSpec,
    s0: f64,
    strike: f64,
    maturity: f64,
    exercise: Exercise,
    oracle: TreeOracle,
) -> Result<Greeks> {
    let h = oracle.bump;
    let price = |s: f64| tree_put(model, s, strike, maturity, oracle.tree_steps, exercise);
    let exercised = |s: f64, p: f64| exercise != Exercise::European && p <= strike - s + 1e-12;
    let p0 = price(s0)?;
    if exercised(s0, p0) {
        return Ok(Greeks {
            price: p0,
            delta: -1.0,
            gamma: 0.0,
        });
    }
    let pm = price(s0 - h)?;
    let pp = price(s0 + h)?;
    if exercised(s0 - h, pm) {
        let pp2 = price(s0 + 2.0 * h)?;
        return Ok(Greeks {
            price: p0,
            delta: (-3.0 * p0 + 4.0 * pp - pp2) / (2.0 * h),
            gamma: (p0 - 2.0 * pp + pp2) / (h * h),
        });
    }
    Ok(Greeks {
        price: p0,
        delta: (pp - pm) / (2.0 * h),
        gamma: (pp - 2.0 * p0 + pm) / (h * h),
    })
}

/// [`tree_greeks`] for every spot.
pub fn tree_reference(
    model: &ModelSpec,
    strike: f64,
    maturity: f64,
    spots: &[f64],
    exercise: Exercise,
    oracle: TreeOracle,
) -> Result<Vec<Greeks>> {
    spots
        .par_iter()
        .map(|&s| tree_greeks(model, s, strike, maturity, exercise, oracle))
        .collect()
}

/// Largest absolute price, delta and gamma deviations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GreekErrors {
    pub price: f64,
    pub delta: f64,
    pub gamma: f64,
}

pub fn max_errors(values: &[Greeks], reference: &[Greeks]) -> GreekErrors {
    values.iter().zip(reference).fold(GreekErrors::default(), |e, (a, b)| GreekErrors {
        price: e.price.max((a.price - b.price).abs()),
        delta: e.delta.max((a.delta - b.delta).abs()),
        gamma: e.gamma.max((a.gamma - b.gamma).abs()),
    })
}

/// One American put priced at several spots by the Dynamic Chebyshev method.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceSetup {
    pub model: ModelSpec,
    pub strike: f64,
    pub maturity: f64,
    pub steps: usize,
    pub spots: Vec<f64>,
    pub backend: MomentBackend,
    /// Log-price domain; the default rule when absent.
    pub domain: Option<(f64, f64)>,
    pub flags: PutFlags,
}

/// Result of one Dynamic Chebyshev run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DcRun {
    pub degree: usize,
    pub greeks: Vec<Greeks>,
    pub max_tail_correction: f64,
    pub offline_seconds: f64,
    pub online_seconds: f64,
}

impl ConvergenceSetup {
    pub fn domain(&self) -> Result<(f64, f64)> {
        match self.domain {
            Some(d) => Ok(d),
            None => domain_rule(&self.model, &self.spots, &[self.strike], self.maturity),
        }
    }

    pub fn run(&self, degree: usize) -> Result<DcRun> {
        let (lo, hi) = self.domain()?;
        let grid = Arc::new(ChebGrid::interval(lo, hi, degree)?);
        let start = Instant::now();
        let gamma = self.backend.build(&self.model, &grid, self.maturity / self.steps as f64)?;
        let offline_seconds = start.elapsed().as_secs_f64();
        let start = Instant::now();
        let v = american_put(&gamma, &self.model, self.strike, self.maturity, self.steps, &self.spots, self.flags)?;
        Ok(DcRun {
            degree,
            greeks: v.greeks,
            max_tail_correction: v.max_tail_correction,
            offline_seconds,
            online_seconds: start.elapsed().as_secs_f64(),
        })
    }
}

/// One row of a convergence study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    #[serde(rename = "N")]
    pub degree: usize,
    pub err_price: f64,
    pub err_delta: f64,
    pub err_gamma: f64,
    pub t_offline_s: f64,
    pub t_online_s: f64,
}

pub const CONVERGENCE_HEADER: [&str; 6] = ["N", "err_price", "err_delta", "err_gamma", "t_offline_s", "t_online_s"];

pub fn convergence_study(setup: &ConvergenceSetup, degrees: &[usize], reference: &[Greeks]) -> Result<Vec<ConvergenceRow>> {
    if reference.len() != setup.spots.len() {
        return Err(Error::ShapeMismatch {
            expected: setup.spots.len(),
            actual: reference.len(),
        });
    }
    degrees
        .iter()
        .map(|&n| {
            let run = setup.run(n)?;
            let e = max_errors(&run.greeks, reference);
            Ok(ConvergenceRow {
                degree: n,
                err_price: e.price,
                err_delta: e.delta,
                err_gamma: e.gamma,
                t_offline_s: run.offline_seconds,
                t_online_s: run.online_seconds,
            })
        })
        .collect()
}

/// Option surface for one spot, priced from a single moment matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceSetup {
    pub model: ModelSpec,
    pub spot: f64,
    pub strikes: Vec<f64>,
    pub maturities: Vec<f64>,
    pub steps_per_year: usize,
    pub degree: usize,
    pub backend: MomentBackend,
    pub domain: Option<(f64, f64)>,
    pub flags: PutFlags,
}

impl SurfaceSetup {
    /// The reference surface: 9 strikes × 12 maturities at 504 steps per year.
    pub fn reference(model: ModelSpec, degree: usize, backend: MomentBackend) -> Self {
        Self {
            model,
            spot: 100.0,
            strikes: surface_strikes(100.0),
            maturities: SURFACE_MATURITIES.to_vec(),
            steps_per_year: 504,
            degree,
            backend,
            domain: None,
            flags: PutFlags::for_model(&model),
        }
    }

    pub fn domain(&self) -> Result<(f64, f64)> {
        match self.domain {
            Some(d) => Ok(d),
            None => {
                let t_max = self.maturities.iter().cloned().fold(0.0, f64::max);
                domain_rule(&self.model, &[self.spot], &self.strikes, t_max)
            }
        }
    }

    pub fn moments(&self) -> Result<MomentMatrix> {
        let (lo, hi) = self.domain()?;
        let grid = Arc::new(ChebGrid::interval(lo, hi, self.degree)?);
        self.backend.build(&self.model, &grid, 1.0 / self.steps_per_year as f64)
    }

    pub fn run(&self) -> Result<PriceSurface> {
        let gamma = self.moments()?;
        price_surface(&gamma, &self.model, &self.strikes, &self.maturities, self.spot, self.flags)
    }
}

/// Default tree size for surface oracles: 2000 steps per year, at least 2000.
pub fn surface_tree_steps(maturity: f64) -> usize {
    ((2000.0 * maturity).ceil() as usize).max(2000)
}

/// American tree prices `[strike][maturity]`.
pub fn surface_reference<F>(
    model: &ModelSpec,
    spot: f64,
    strikes: &[f64],
    maturities: &[f64],
    tree_steps: F,
) -> Result<Vec<Vec<f64>>>
where
    F: Fn(f64) -> usize + Sync,
{
    strikes
        .par_iter()
        .map(|&k| {
            maturities
                .iter()
                .map(|&t| tree_put(model, spot, k, t, tree_steps(t), Exercise::American))
                .collect()
        })
        .collect()
}

pub fn surface_max_error(surface: &PriceSurface, reference: &[Vec<f64>]) -> f64 {
    surface
        .entries
        .iter()
        .zip(reference)
        .flat_map(|(row, r)| row.iter().zip(r).map(|(g, p)| (g.price - p).abs()))
        .fold(0.0, f64::max)
}

/// The first `count` options of a fixed interleaving of the strike × maturity
/// grid. Prefixes mix strikes and maturities, starting at the middle strike
/// and a mid maturity, so short prefixes are representative of the surface.
pub fn option_subset(strikes: &[f64], maturities: &[f64], count: usize) -> Vec<(f64, f64)> {
    let (ns, nm) = (strikes.len(), maturities.len());
    let mut out = Vec::with_capacity(count.min(ns * nm));
    let mut seen = vec![false; ns * nm];
    let mut p = 0usize;
    while out.len() < count.min(ns * nm) {
        let i = (ns / 2 + p) % ns;
        let m = ((nm - 1) / 2 + p / ns + 5 * (p % ns)) % nm;
        if !seen[i * nm + m] {
            seen[i * nm + m] = true;
            out.push((strikes[i], maturities[m]));
        }
        p += 1;
    }
    out
}

/// DC prices for arbitrary `(strike, maturity)` pairs from one moment matrix.
pub fn price_options(
    gamma: &MomentMatrix,
    model: &ModelSpec,
    options: &[(f64, f64)],
    spot: f64,
    flags: PutFlags,
) -> Result<Vec<Greeks>> {
    let mut by_strike: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for &(k, t) in options {
        by_strike.entry(k.to_bits()).or_default().push(t);
    }
    let mut found: BTreeMap<(u64, u64), Greeks> = BTreeMap::new();
    for (k, ts) in &by_strike {
        let s = price_surface(gamma, model, &[f64::from_bits(*k)], ts, spot, flags)?;
        for (t, g) in ts.iter().zip(&s.entries[0]) {
            found.insert((*k, t.to_bits()), *g);
        }
    }
    Ok(options.iter().map(|(k, t)| found[&(k.to_bits(), t.to_bits())]).collect())
}

/// Method tag of a benchmark row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dc,
    Lsm,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Dc => "dc",
            Method::Lsm => "lsm",
        })
    }
}

/// One benchmark measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: Method,
    pub options: usize,
    pub paths: usize,
    pub steps_per_year: usize,
    #[serde(rename = "N")]
    pub degree: usize,
    pub max_error: f64,
    pub t_offline_s: f64,
    pub t_online_s: f64,
    pub t_total_s: f64,
}

pub const BENCH_HEADER: [&str; 9] = [
    "method",
    "options",
    "paths",
    "steps_per_year",
    "N",
    "max_error",
    "t_offline_s",
    "t_online_s",
    "t_total_s",
];

/// Shared benchmark settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchSetup {
    pub model: ModelSpec,
    pub spot: f64,
    pub steps_per_year: usize,
    pub seed: u64,
    pub lsm_degree: usize,
    pub cev: CevScheme,
    /// Antithetic pairs in the DC moment simulation.
    pub antithetic: bool,
    /// Wall-clock repetitions; the median is reported.
    pub repetitions: usize,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn max_option_error(prices: &[f64], reference: Option<&[f64]>) -> f64 {
    reference.map_or(f64::NAN, |r| {
        prices.iter().zip(r).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    })
}

fn check_bench(setup: &BenchSetup, options: &[(f64, f64)], reference: Option<&[f64]>) -> Result<()> {
    if options.is_empty() || setup.repetitions == 0 || setup.steps_per_year == 0 {
        return Err(Error::InvalidArgument(
            "benchmark needs options, repetitions and steps per year".into(),
        ));
    }
    if let Some(r) = reference {
        if r.len() != options.len() {
            return Err(Error::ShapeMismatch {
                expected: options.len(),
                actual: r.len(),
            });
        }
    }
    Ok(())
}

/// Dynamic Chebyshev with Monte Carlo moments, `N = ⌈√(2M)⌉`.
pub fn bench_dc(setup: &BenchSetup, options: &[(f64, f64)], paths: usize, reference: Option<&[f64]>) -> Result<BenchRow> {
    check_bench(setup, options, reference)?;
    let degree = mc_degree(paths);
    let strikes: Vec<f64> = options.iter().map(|o| o.0).collect();
    let t_max = options.iter().map(|o| o.1).fold(0.0, f64::max);
    let (lo, hi) = domain_rule(&setup.model, &[setup.spot], &strikes, t_max)?;
    let grid = Arc::new(ChebGrid::interval(lo, hi, degree)?);
    let backend = MomentBackend::MonteCarlo {
        samples: paths,
        seed: setup.seed,
        cev: setup.cev,
        antithetic: setup.antithetic,
    };
    let flags = PutFlags::for_model(&setup.model);
    let (mut off, mut on) = (Vec::new(), Vec::new());
    let mut prices = Vec::new();
    for _ in 0..setup.repetitions {
        let start = Instant::now();
        let gamma = backend.build(&setup.model, &grid, 1.0 / setup.steps_per_year as f64)?;
        off.push(start.elapsed().as_secs_f64());
        let start = Instant::now();
        let g = price_options(&gamma, &setup.model, options, setup.spot, flags)?;
        on.push(start.elapsed().as_secs_f64());
        prices = g.iter().map(|g| g.price).collect();
    }
    let (t_off, t_on) = (median(off), median(on));
    Ok(BenchRow {
        method: Method::Dc,
        options: options.len(),
        paths,
        steps_per_year: setup.steps_per_year,
        degree,
        max_error: max_option_error(&prices, reference),
        t_offline_s: t_off,
        t_online_s: t_on,
        t_total_s: t_off + t_on,
    })
}

/// Longstaff–Schwartz on one path set simulated to the longest maturity.
pub fn bench_lsm(setup: &BenchSetup, options: &[(f64, f64)], paths: usize, reference: Option<&[f64]>) -> Result<BenchRow> {
    check_bench(setup, options, reference)?;
    let dt = 1.0 / setup.steps_per_year as f64;
    let horizon = |t: f64| (t / dt).round() as usize;
    let steps = options.iter().map(|o| horizon(o.1)).max().unwrap_or(1);
    let (mut off, mut on) = (Vec::new(), Vec::new());
    let mut prices = Vec::new();
    for _ in 0..setup.repetitions {
        let start = Instant::now();
        let pm = simulate_paths(&setup.model, setup.spot, steps as f64 * dt, steps, paths, setup.seed, &setup.cev)?;
        off.push(start.elapsed().as_secs_f64());
        let start = Instant::now();
        prices = options
            .iter()
            .map(|&(k, t)| lsm_price_horizon(&pm, k, setup.model.rate(), setup.lsm_degree, horizon(t)).map(|r| r.price))
            .collect::<Result<_>>()?;
        on.push(start.elapsed().as_secs_f64());
    }
    let (t_off, t_on) = (median(off), median(on));
    Ok(BenchRow {
        method: Method::Lsm,
        options: options.len(),
        paths,
        steps_per_year: setup.steps_per_year,
        degree: setup.lsm_degree,
        max_error: max_option_error(&prices, reference),
        t_offline_s: t_off,
        t_online_s: t_on,
        t_total_s: t_off + t_on,
    })
}
