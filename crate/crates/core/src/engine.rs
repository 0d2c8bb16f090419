//! Online phase: backward induction over Chebyshev interpolants, the American
//! put specialization and option-surface pricing.

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cheb::{ChebGrid, Interpolant};
use crate::error::{Error, Result};
use crate::models::{european_put, Greeks, ModelSpec};
use crate::moments::{Backend, McMeta, MomentMatrix};

/// Relative tolerance for "is a multiple of Δt" checks.
const STEP_TOLERANCE: f64 = 1e-9;

/// Combiner `f(payoff, continuation)` of the dynamic programming principle.
#[derive(Clone, Copy)]
pub enum Combiner {
    /// American / Bermudan exercise: `max(a, b)`.
    Max,
    /// No early exercise: `b`.
    Hold,
    Custom {
        f: fn(f64, f64) -> f64,
        lipschitz: f64,
    },
}

impl Combiner {
    #[inline]
    pub fn apply(&self, payoff: f64, continuation: f64) -> f64 {
        match self {
            Combiner::Max => payoff.max(continuation),
            Combiner::Hold => continuation,
            Combiner::Custom { f, .. } => f(payoff, continuation),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            Combiner::Max | Combiner::Hold => 1.0,
            Combiner::Custom { lipschitz, .. } => *lipschitz,
        }
    }
}

impl fmt::Debug for Combiner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Combiner::Max => f.write_str("Max"),
            Combiner::Hold => f.write_str("Hold"),
            Combiner::Custom { lipschitz, .. } => write!(f, "Custom(L={lipschitz})"),
        }
    }
}

pub type Payoff = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A dynamic programming problem on an equidistant time grid.
#[derive(Clone)]
pub struct ExerciseProblem {
    /// `g(t, x)` in log-price.
    pub payoff: Payoff,
    pub combiner: Combiner,
    pub rate: f64,
    pub maturity: f64,
    pub steps: usize,
    /// Strike of the tail-correction vector added to every continuation value.
    pub tail_strike: Option<f64>,
    /// Node values of the continuation at `t_{n-1}`, replacing the first
    /// interpolated step (already discounted).
    pub first_step: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl fmt::Debug for ExerciseProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExerciseProblem")
            .field("combiner", &self.combiner)
            .field("rate", &self.rate)
            .field("maturity", &self.maturity)
            .field("steps", &self.steps)
            .field("tail_strike", &self.tail_strike)
            .field("first_step", &self.first_step.is_some())
            .finish()
    }
}

impl ExerciseProblem {
    pub fn new(payoff: Payoff, combiner: Combiner, rate: f64, maturity: f64, steps: usize) -> Result<Self> {
        let p = Self {
            payoff,
            combiner,
            rate,
            maturity,
            steps,
            tail_strike: None,
            first_step: None,
        };
        p.validate()?;
        Ok(p)
    }

    /// American put payoff `(K - e^x)^+` with `max` combiner.
    pub fn american_put(strike: f64, rate: f64, maturity: f64, steps: usize) -> Result<Self> {
        if !(strike > 0.0) {
            return Err(Error::InvalidArgument(format!("strike must be positive, got {strike}")));
        }
        Self::new(put_payoff(strike), Combiner::Max, rate, maturity, steps)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidArgument("at least one time step is required".into()));
        }
        if !(self.maturity > 0.0 && self.maturity.is_finite()) {
            return Err(Error::InvalidArgument(format!("maturity must be positive, got {}", self.maturity)));
        }
        if !(self.combiner.lipschitz() > 0.0) {
            return Err(Error::InvalidArgument("combiner Lipschitz constant must be positive".into()));
        }
        if !self.rate.is_finite() {
            return Err(Error::InvalidArgument("rate must be finite".into()));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.maturity / self.steps as f64
    }

    pub fn discount(&self) -> f64 {
        (-self.rate * self.dt()).exp()
    }

    pub fn time(&self, u: usize) -> f64 {
        self.maturity * u as f64 / self.steps as f64
    }
}

pub fn put_payoff(strike: f64) -> Payoff {
    Arc::new(move |_t, x: f64| (strike - x.exp()).max(0.0))
}

/// Γ for every step: one matrix for time-homogeneous models, or one per step.
#[derive(Debug, Clone, Copy)]
pub enum MomentSchedule<'a> {
    Constant(&'a MomentMatrix),
    /// `matrices[u]` propagates from `t_{u+1}` to `t_u`.
    PerStep(&'a [MomentMatrix]),
}

impl<'a> MomentSchedule<'a> {
    fn at(&self, u: usize) -> &'a MomentMatrix {
        match self {
            MomentSchedule::Constant(m) => m,
            MomentSchedule::PerStep(ms) => &ms[u],
        }
    }

    fn check(&self, steps: usize) -> Result<()> {
        if let MomentSchedule::PerStep(ms) = self {
            if ms.len() != steps {
                return Err(Error::ShapeMismatch {
                    expected: steps,
                    actual: ms.len(),
                });
            }
        }
        Ok(())
    }
}

/// Continuation operator `v ↦ Γᵀ F v` fused into one matrix (row `k`, column `i`).
#[derive(Debug, Clone)]
pub struct Propagator {
    n: usize,
    op: Vec<f64>,
}

impl Propagator {
    pub fn new(gamma: &MomentMatrix) -> Self {
        let n = gamma.size();
        let fit = gamma.grid().fit_matrix(0);
        let mut op = vec![0.0; n * n];
        op.par_chunks_mut(n).enumerate().for_each(|(k, row)| {
            for j in 0..n {
                let g = gamma.entry(j, k);
                if g == 0.0 {
                    continue;
                }
                let f = &fit[j * n..(j + 1) * n];
                for (o, w) in row.iter_mut().zip(f) {
                    *o += g * w;
                }
            }
        });
        Self { n, op }
    }

    /// `out[k] = Σ_i op[k][i] v[i]`.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.op.chunks_exact(self.n)) {
            *o = dot(row, v);
        }
    }
}

/// Dot product with eight independent partial sums, so the loop vectorizes.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[4]) + (acc[1] + acc[5]) + (acc[2] + acc[6]) + (acc[3] + acc[7]) + tail
}

/// Node values of `V̂_{t_u}` for `u = 0..=n` and of the discounted
/// continuation value for `u = 0..n`.
#[derive(Debug, Clone)]
pub struct ValueFunctionSeries {
    grid: Arc<ChebGrid>,
    times: Vec<f64>,
    node_values: Vec<Vec<f64>>,
    continuation: Vec<Vec<f64>>,
}

impl ValueFunctionSeries {
    pub fn grid(&self) -> &Arc<ChebGrid> {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn node_values(&self, u: usize) -> &[f64] {
        &self.node_values[u]
    }

    pub fn interpolant(&self, u: usize) -> Interpolant {
        Interpolant::fit(self.grid.clone(), &self.node_values[u]).expect("node count matches grid")
    }

    /// Continuation node values at `t_u`, `u < n`.
    pub fn continuation_values(&self, u: usize) -> &[f64] {
        &self.continuation[u]
    }

    /// Interpolant of the continuation value at `t_u`, `u < n`.
    pub fn continuation(&self, u: usize) -> Interpolant {
        Interpolant::fit(self.grid.clone(), &self.continuation[u]).expect("node count matches grid")
    }
}

fn check_grid(gamma: &MomentMatrix, grid: &ChebGrid, dt: f64) -> Result<()> {
    if !gamma.grid().same_nodes(grid) {
        return Err(Error::InvalidArgument("moment matrices must share one grid".into()));
    }
    if ((gamma.dt() - dt) / dt).abs() > STEP_TOLERANCE {
        return Err(Error::InvalidArgument(format!(
            "moment matrix step {} does not match problem step {dt}",
            gamma.dt()
        )));
    }
    Ok(())
}

/// Backward induction `V̂_{t_u}(x_k) = f(g(t_u, x_k), e^{-rΔt}(Σ_j c_j(t_{u+1}) Γ[j][k] + e_k))`.
pub fn backward_induction(schedule: MomentSchedule<'_>, problem: &ExerciseProblem) -> Result<ValueFunctionSeries> {
    problem.validate()?;
    schedule.check(problem.steps)?;
    let grid = schedule.at(0).grid().clone();
    let dt = problem.dt();
    for u in 0..problem.steps {
        check_grid(schedule.at(u), &grid, dt)?;
    }
    let nodes = grid.axis_nodes(0).to_vec();
    let n = problem.steps;
    let disc = problem.discount();

    let mut values = vec![Vec::new(); n + 1];
    let mut continuation = vec![Vec::new(); n];
    values[n] = nodes.iter().map(|&x| (problem.payoff)(problem.maturity, x)).collect();
    let mut cont = vec![0.0; nodes.len()];
    let mut cached: Option<(usize, Propagator, Option<Vec<f64>>)> = None;
    for u in (0..n).rev() {
        let gamma = schedule.at(u);
        let key = gamma as *const MomentMatrix as usize;
        if cached.as_ref().map(|c| c.0) != Some(key) {
            let tail = match problem.tail_strike {
                Some(k) => Some(gamma.tail_vector(k)?.into_owned()),
                None => None,
            };
            cached = Some((key, Propagator::new(gamma), tail));
        }
        let (_, prop, tail) = cached.as_ref().expect("propagator cached");
        let t = problem.time(u);
        match (&problem.first_step, u + 1 == n) {
            (Some(f), true) => {
                for (c, &x) in cont.iter_mut().zip(&nodes) {
                    *c = f(x);
                }
            }
            _ => {
                prop.apply(&values[u + 1], &mut cont);
                if let Some(e) = tail {
                    for (c, ek) in cont.iter_mut().zip(e) {
                        *c += ek;
                    }
                }
                for c in cont.iter_mut() {
                    *c *= disc;
                }
            }
        }
        values[u] = nodes
            .iter()
            .zip(&cont)
            .map(|(&x, &c)| problem.combiner.apply((problem.payoff)(t, x), c))
            .collect();
        continuation[u] = cont.clone();
    }
    Ok(ValueFunctionSeries {
        grid,
        times: (0..=n).map(|u| problem.time(u)).collect(),
        node_values: values,
        continuation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PutFlags {
    pub tail_correction: bool,
    pub first_step_smoothing: bool,
}

impl PutFlags {
    /// Tail correction always; smoothing where a European price is available.
    pub fn for_model(model: &ModelSpec) -> Self {
        Self {
            tail_correction: true,
            first_step_smoothing: model.has_mixture_law(),
        }
    }
}

/// Price, delta and gamma per requested spot, plus the largest tail correction applied.
#[derive(Debug, Clone, PartialEq)]
pub struct PutValuation {
    pub greeks: Vec<Greeks>,
    pub max_tail_correction: f64,
}

/// Recovers price and S-Greeks from a log-price interpolant.
pub fn greeks_at(v: &Interpolant, spots: &[f64]) -> Result<Vec<Greeks>> {
    let d1 = v.differentiate(1)?;
    let d2 = v.differentiate(2)?;
    let lo = v.grid().domain().lower()[0];
    let hi = v.grid().domain().upper()[0];
    spots
        .iter()
        .map(|&s| {
            let x = s.ln();
            if !(s > 0.0) || x < lo || x > hi {
                return Err(Error::InvalidArgument(format!(
                    "spot {s} lies outside the interpolation domain [{:.4}, {:.4}]; widen the domain",
                    lo.exp(),
                    hi.exp()
                )));
            }
            let vx = d1.evaluate_1d(x);
            let vxx = d2.evaluate_1d(x);
            Ok(Greeks {
                price: v.evaluate_1d(x),
                delta: vx / s,
                gamma: (vxx - vx) / (s * s),
            })
        })
        .collect()
}

/// Put price and Greeks at `t_0` as `max(K - S, Ĉ(S))`, with `Ĉ` the
/// continuation interpolant. This avoids interpolating the exercise kink of
/// `V̂_{t_0}` itself.
pub fn put_greeks_at(continuation: &Interpolant, strike: f64, spots: &[f64]) -> Result<Vec<Greeks>> {
    Ok(greeks_at(continuation, spots)?
        .into_iter()
        .zip(spots)
        .map(|(g, &s)| {
            let exercise = strike - s;
            if exercise > g.price {
                Greeks {
                    price: exercise,
                    delta: -1.0,
                    gamma: 0.0,
                }
            } else {
                g
            }
        })
        .collect())
}

fn put_problem(model: &ModelSpec, strike: f64, maturity: f64, steps: usize, flags: PutFlags) -> Result<ExerciseProblem> {
    let mut p = ExerciseProblem::american_put(strike, model.rate(), maturity, steps)?;
    if flags.tail_correction {
        p.tail_strike = Some(strike);
    }
    if flags.first_step_smoothing {
        if !model.has_mixture_law() {
            return Err(Error::Unsupported {
                operation: "first-step smoothing",
                model: model.name(),
            });
        }
        let m = *model;
        let dt = p.dt();
        // validate once so the closure cannot fail
        european_put(&m, strike, strike, dt)?;
        p.first_step = Some(Arc::new(move |x: f64| {
            european_put(&m, x.exp(), strike, dt).map(|g| g.price).unwrap_or(f64::NAN)
        }));
    }
    Ok(p)
}

fn check_steps(maturity: f64, dt: f64) -> Result<usize> {
    let ratio = maturity / dt;
    let steps = ratio.round();
    if steps < 1.0 || (ratio - steps).abs() > STEP_TOLERANCE * ratio.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "maturity {maturity} is not a positive multiple of the step {dt}"
        )));
    }
    Ok(steps as usize)
}

/// American put by Algorithm 2 on one moment matrix.
pub fn american_put(
    gamma: &MomentMatrix,
    model: &ModelSpec,
    strike: f64,
    maturity: f64,
    steps: usize,
    spots: &[f64],
    flags: PutFlags,
) -> Result<PutValuation> {
    let problem = put_problem(model, strike, maturity, steps, flags)?;
    let series = backward_induction(MomentSchedule::Constant(gamma), &problem)?;
    let greeks = put_greeks_at(&series.continuation(0), strike, spots)?;
    let max_tail_correction = if flags.tail_correction {
        gamma.tail_vector(strike)?.iter().fold(0.0, |a: f64, &b| a.max(b))
    } else {
        0.0
    };
    Ok(PutValuation {
        greeks,
        max_tail_correction,
    })
}

/// Runs the put recursion once to the longest maturity and reads every shorter
/// maturity off the intermediate steps (the recursion is time-homogeneous).
fn put_values_by_horizon(
    gamma: &MomentMatrix,
    model: &ModelSpec,
    strike: f64,
    horizons: &[usize],
    flags: PutFlags,
) -> Result<Vec<Interpolant>> {
    let dt = gamma.dt();
    let n_max = *horizons.iter().max().expect("non-empty horizons");
    let problem = put_problem(model, strike, dt * n_max as f64, n_max, flags)?;
    let series = backward_induction(MomentSchedule::Constant(gamma), &problem)?;
    Ok(horizons.iter().map(|&h| series.continuation(n_max - h)).collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceMetadata {
    pub model: ModelSpec,
    pub degree: usize,
    pub backend: Backend,
    pub mc: Option<McMeta>,
    pub steps_per_year: f64,
    pub flags: PutFlags,
    pub offline_seconds: f64,
    pub online_seconds: f64,
    pub max_tail_correction: f64,
}

/// Prices on a strike × maturity grid for one spot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PriceSurface {
    pub spot: f64,
    pub strikes: Vec<f64>,
    pub maturities: Vec<f64>,
    /// `entries[i][m]` for strike `i` and maturity `m`.
    pub entries: Vec<Vec<Greeks>>,
    pub metadata: SurfaceMetadata,
}

impl PriceSurface {
    pub fn price(&self, strike_idx: usize, maturity_idx: usize) -> f64 {
        self.entries[strike_idx][maturity_idx].price
    }
}

/// Whole option surface from a single moment matrix.
pub fn price_surface(
    gamma: &MomentMatrix,
    model: &ModelSpec,
    strikes: &[f64],
    maturities: &[f64],
    spot: f64,
    flags: PutFlags,
) -> Result<PriceSurface> {
    if strikes.is_empty() || maturities.is_empty() {
        return Err(Error::InvalidArgument("surface needs at least one strike and maturity".into()));
    }
    let start = Instant::now();
    let dt = gamma.dt();
    let horizons = maturities
        .iter()
        .map(|&t| check_steps(t, dt))
        .collect::<Result<Vec<_>>>()?;
    let per_strike: Vec<(Vec<Greeks>, f64)> = strikes
        .par_iter()
        .map(|&k| {
            let vs = put_values_by_horizon(gamma, model, k, &horizons, flags)?;
            let greeks = vs
                .iter()
                .map(|v| put_greeks_at(v, k, &[spot]).map(|g| g[0]))
                .collect::<Result<Vec<_>>>()?;
            let tail = if flags.tail_correction {
                gamma.tail_vector(k)?.iter().fold(0.0, |a: f64, &b| a.max(b))
            } else {
                0.0
            };
            Ok((greeks, tail))
        })
        .collect::<Result<_>>()?;
    let online_seconds = start.elapsed().as_secs_f64();
    let max_tail_correction = per_strike.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(PriceSurface {
        spot,
        strikes: strikes.to_vec(),
        maturities: maturities.to_vec(),
        entries: per_strike.into_iter().map(|p| p.0).collect(),
        metadata: SurfaceMetadata {
            model: *model,
            degree: gamma.size() - 1,
            backend: gamma.backend(),
            mc: gamma.mc_meta(),
            steps_per_year: 1.0 / dt,
            flags,
            offline_seconds: gamma.build_seconds(),
            online_seconds,
            max_tail_correction,
        },
    })
}

/// Default log-price domain covering all spots, strikes and the longest horizon.
pub fn domain_rule(model: &ModelSpec, spots: &[f64], strikes: &[f64], t_max: f64) -> Result<(f64, f64)> {
    model.validate()?;
    let pos = |v: &[f64]| !v.is_empty() && v.iter().all(|&x| x > 0.0 && x.is_finite());
    if !pos(spots) || !pos(strikes) || !(t_max > 0.0) {
        return Err(Error::InvalidArgument(
            "domain rule needs positive spots, strikes and horizon".into(),
        ));
    }
    let min = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let r = model.rate();
    let sigma = model.sigma();
    let vol = spots.iter().map(|&s| model.effective_vol(s)).fold(0.0, f64::max);
    let drift = (r - 0.5 * sigma * sigma) * t_max;
    let spread = 5.0 * vol * t_max.sqrt();
    let lower = (0.5 * min(strikes)).ln().min(min(spots).ln() + drift - spread);
    let upper = (2.0 * max(strikes) * (r * t_max).exp())
        .ln()
        .max(max(spots).ln() + drift + spread);
    Ok((lower, upper))
}
