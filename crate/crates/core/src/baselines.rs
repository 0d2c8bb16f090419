//! Reference pricers: binomial trees and Longstaff–Schwartz Monte Carlo.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::models::{sample_step, CevScheme, ModelSpec};

/// Paths per independent random stream.
const PATH_BLOCK: usize = 1024;

const TINY: f64 = 1e-250;

/// When early exercise is allowed on a tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Exercise {
    European,
    American,
    /// Exercise at every `every`-th tree step (including `t = 0` and expiry).
    Bermudan { every: usize },
}

impl Exercise {
    #[inline]
    fn allowed(&self, step: usize) -> bool {
        match *self {
            Exercise::European => false,
            Exercise::American => true,
            Exercise::Bermudan { every } => step % every == 0,
        }
    }
}

fn check_tree_inputs(s0: f64, strike: f64, maturity: f64, steps: usize) -> Result<()> {
    if !(s0 > 0.0 && strike > 0.0 && maturity > 0.0) || steps == 0 {
        return Err(Error::InvalidArgument(
            "tree needs positive spot, strike, maturity and at least one step".into(),
        ));
    }
    Ok(())
}

/// Backward induction on a recombining lattice whose node prices depend only on
/// `m = 2j - i` (`spot[m + n]`), with per-node up-probability `prob[m + n]`.
fn lattice_put(spot: &[f64], prob: &[f64], strike: f64, disc: f64, steps: usize, exercise: Exercise) -> f64 {
    let n = steps;
    // values[j] at step i corresponds to m = 2j - i, i.e. spot index n - i + 2j
    let mut values: Vec<f64> = (0..=n).map(|j| (strike - spot[2 * j]).max(0.0)).collect();
    for i in (0..n).rev() {
        let lo = n - i;
        let probs = &prob[lo..=n + i];
        let (head, tail) = values.split_at_mut(i + 1);
        let mut up = tail[0];
        // walk downward so values[j + 1] is still the step-(i+1) value
        for j in (0..=i).rev() {
            let p = probs[2 * j];
            let down = head[j];
            let v = disc * (p * up + (1.0 - p) * down);
            // flush values that would turn subnormal; they cost far more than they contribute
            head[j] = if v < TINY { 0.0 } else { v };
            up = down;
        }
        if exercise.allowed(i) {
            let spots = &spot[lo..=n + i];
            for (j, v) in head.iter_mut().enumerate() {
                let ex = strike - spots[2 * j];
                if ex > *v {
                    *v = ex;
                }
            }
        }
    }
    values[0]
}

/// Cox–Ross–Rubinstein put with the given exercise style.
pub fn crr_put(
    s0: f64,
    strike: f64,
    rate: f64,
    sigma: f64,
    maturity: f64,
    steps: usize,
    exercise: Exercise,
) -> Result<f64> {
    check_tree_inputs(s0, strike, maturity, steps)?;
    if let Exercise::Bermudan { every } = exercise {
        if every == 0 || steps % every != 0 {
            return Err(Error::InvalidArgument(format!(
                "Bermudan exercise every {every} steps does not divide {steps} tree steps"
            )));
        }
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("volatility must be positive, got {sigma}")));
    }
    let dt = maturity / steps as f64;
    let u = (sigma * dt.sqrt()).exp();
    let d = 1.0 / u;
    let p = ((rate * dt).exp() - d) / (u - d);
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "risk-neutral probability {p} outside [0, 1]; use more tree steps"
        )));
    }
    let n = steps as isize;
    let log_u = sigma * dt.sqrt();
    let spot: Vec<f64> = (-n..=n).map(|m| s0 * (m as f64 * log_u).exp()).collect();
    let prob = vec![p; spot.len()];
    Ok(lattice_put(&spot, &prob, strike, (-rate * dt).exp(), steps, exercise))
}

/// American put on a CRR tree.
pub fn binomial_american_put(s0: f64, strike: f64, rate: f64, sigma: f64, maturity: f64, steps: usize) -> Result<f64> {
    crr_put(s0, strike, rate, sigma, maturity, steps, Exercise::American)
}

/// American put under CEV on a Nelson–Ramaswamy lattice.
///
/// The lattice lives in `Y = S^{1-β/2} / (σ(1-β/2))` (or `ln S / σ` at β = 2),
/// which has unit diffusion; branch probabilities match the drift and are
/// clamped to `[0, 1]`, and `S = 0` is absorbing.
pub fn binomial_american_put_cev(
    s0: f64,
    strike: f64,
    rate: f64,
    sigma: f64,
    beta: f64,
    maturity: f64,
    steps: usize,
) -> Result<f64> {
    cev_tree_put(s0, strike, rate, sigma, beta, maturity, steps, Exercise::American)
}

#[allow(clippy::too_many_arguments)]
pub fn cev_tree_put(
    s0: f64,
    strike: f64,
    rate: f64,
    sigma: f64,
    beta: f64,
    maturity: f64,
    steps: usize,
    exercise: Exercise,
) -> Result<f64> {
    check_tree_inputs(s0, strike, maturity, steps)?;
    if !(beta > 0.0 && beta <= 2.0) {
        return Err(Error::InvalidArgument(format!("CEV exponent must lie in (0, 2], got {beta}")));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("volatility must be positive, got {sigma}")));
    }
    let dt = maturity / steps as f64;
    let h = dt.sqrt();
    let a = 1.0 - 0.5 * beta;
    let (to_y, from_y): (Box<dyn Fn(f64) -> f64>, Box<dyn Fn(f64) -> f64>) = if a == 0.0 {
        (Box::new(move |s: f64| s.ln() / sigma), Box::new(move |y: f64| (sigma * y).exp()))
    } else {
        (
            Box::new(move |s: f64| s.powf(a) / (sigma * a)),
            Box::new(move |y: f64| if y <= 0.0 { 0.0 } else { (sigma * a * y).powf(1.0 / a) }),
        )
    };
    let y0 = to_y(s0);
    let n = steps as isize;
    let spot: Vec<f64> = (-n - 1..=n + 1).map(|m| from_y(y0 + m as f64 * h)).collect();
    // spot has one extra node on each side for the up/down neighbours
    let at = |m: isize| spot[(m + n + 1) as usize];
    let prob: Vec<f64> = (-n..=n)
        .map(|m| {
            let s = at(m);
            if s <= 0.0 {
                return 0.0;
            }
            let (su, sd) = (at(m + 1), at(m - 1));
            ((rate * s * dt + s - sd) / (su - sd)).clamp(0.0, 1.0)
        })
        .collect();
    let inner: Vec<f64> = (-n..=n).map(at).collect();
    Ok(lattice_put(&inner, &prob, strike, (-rate * dt).exp(), steps, exercise))
}

/// Simulated stock prices, stored time-major: `value(t, p)`.
#[derive(Debug, Clone)]
pub struct PathMatrix {
    paths: usize,
    steps: usize,
    dt: f64,
    seed: u64,
    fingerprint: String,
    data: Vec<f64>,
    /// Wall-clock seconds spent simulating.
    pub simulation_seconds: f64,
}

impl PathMatrix {
    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Prices of all paths at step `t`.
    pub fn at_step(&self, t: usize) -> &[f64] {
        &self.data[t * self.paths..(t + 1) * self.paths]
    }

    #[inline]
    pub fn value(&self, t: usize, p: usize) -> f64 {
        self.data[t * self.paths + p]
    }
}

/// `paths` trajectories of `steps` steps of size `maturity/steps` from `s0`.
///
/// Block `b` of [`PATH_BLOCK`] paths uses ChaCha8 stream `b`, so results do
/// not depend on the number of workers.
pub fn simulate_paths(
    model: &ModelSpec,
    s0: f64,
    maturity: f64,
    steps: usize,
    paths: usize,
    seed: u64,
    cev: &CevScheme,
) -> Result<PathMatrix> {
    let start = Instant::now();
    model.validate()?;
    if !(s0 > 0.0 && maturity > 0.0) || steps == 0 || paths == 0 {
        return Err(Error::InvalidArgument(
            "path simulation needs positive spot and maturity and at least one step and path".into(),
        ));
    }
    let dt = maturity / steps as f64;
    let x0 = s0.ln();
    let blocks: Vec<Vec<f64>> = (0..paths.div_ceil(PATH_BLOCK))
        .into_par_iter()
        .map(|b| {
            let count = PATH_BLOCK.min(paths - b * PATH_BLOCK);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            // path-major inside the block
            let mut out = vec![0.0; count * (steps + 1)];
            for p in 0..count {
                let row = &mut out[p * (steps + 1)..(p + 1) * (steps + 1)];
                let mut x = x0;
                row[0] = s0;
                for v in row.iter_mut().skip(1) {
                    x = sample_step(model, x, dt, cev, &mut rng);
                    *v = x.exp();
                }
            }
            out
        })
        .collect();
    let mut data = vec![0.0; paths * (steps + 1)];
    for (b, block) in blocks.iter().enumerate() {
        let count = block.len() / (steps + 1);
        for p in 0..count {
            for t in 0..=steps {
                data[t * paths + b * PATH_BLOCK + p] = block[p * (steps + 1) + t];
            }
        }
    }
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(model).expect("model serializes"));
    for v in [s0, maturity] {
        h.update(v.to_bits().to_le_bytes());
    }
    for v in [steps as u64, paths as u64, seed] {
        h.update(v.to_le_bytes());
    }
    let fingerprint = hex::encode(h.finalize());
    Ok(PathMatrix {
        paths,
        steps,
        dt,
        seed,
        fingerprint,
        data,
        simulation_seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LsmResult {
    pub price: f64,
    pub std_error: f64,
    /// Exercise dates at which no path was in the money.
    pub dates_without_itm: usize,
}

/// Ridge added to the normal equations.
const LSM_RIDGE: f64 = 1e-10;

/// Longstaff–Schwartz put price using every step of `paths`.
pub fn lsm_price(paths: &PathMatrix, strike: f64, rate: f64, basis_degree: usize) -> Result<LsmResult> {
    lsm_price_horizon(paths, strike, rate, basis_degree, paths.steps())
}

/// Longstaff–Schwartz put price for an option expiring at step `horizon`.
///
/// Regresses discounted realized cashflows on `1, S/K, …, (S/K)^d` over
/// in-the-money paths; the fitted value only drives the exercise decision.
pub fn lsm_price_horizon(
    paths: &PathMatrix,
    strike: f64,
    rate: f64,
    basis_degree: usize,
    horizon: usize,
) -> Result<LsmResult> {
    if basis_degree == 0 {
        return Err(Error::InvalidArgument("LSM basis degree must be at least 1".into()));
    }
    if horizon == 0 || horizon > paths.steps() {
        return Err(Error::InvalidArgument(format!(
            "horizon {horizon} outside 1..={}",
            paths.steps()
        )));
    }
    if !(strike > 0.0) {
        return Err(Error::InvalidArgument(format!("strike must be positive, got {strike}")));
    }
    let m = paths.paths();
    let disc = (-rate * paths.dt()).exp();
    let dim = basis_degree + 1;
    // cashflow discounted to the current date
    let mut cash: Vec<f64> = paths.at_step(horizon).iter().map(|&s| (strike - s).max(0.0)).collect();
    let mut dates_without_itm = 0;
    let mut basis = vec![0.0; dim];
    for t in (1..horizon).rev() {
        cash.iter_mut().for_each(|c| *c *= disc);
        let spots = paths.at_step(t);
        let mut ata = vec![0.0; dim * dim];
        let mut aty = vec![0.0; dim];
        let mut itm = 0usize;
        for (&s, &c) in spots.iter().zip(&cash) {
            if s >= strike {
                continue;
            }
            itm += 1;
            fill_basis(s / strike, &mut basis);
            for a in 0..dim {
                aty[a] += basis[a] * c;
                for b in a..dim {
                    ata[a * dim + b] += basis[a] * basis[b];
                }
            }
        }
        if itm == 0 {
            dates_without_itm += 1;
            continue;
        }
        for a in 0..dim {
            for b in 0..a {
                ata[a * dim + b] = ata[b * dim + a];
            }
            ata[a * dim + a] += LSM_RIDGE;
        }
        let beta = solve_spd(&mut ata, &mut aty, dim)?;
        for (c, &s) in cash.iter_mut().zip(spots) {
            if s >= strike {
                continue;
            }
            fill_basis(s / strike, &mut basis);
            let fitted: f64 = basis.iter().zip(&beta).map(|(b, w)| b * w).sum();
            let immediate = strike - s;
            if immediate >= fitted {
                *c = immediate;
            }
        }
    }
    cash.iter_mut().for_each(|c| *c *= disc);
    let mean = cash.iter().sum::<f64>() / m as f64;
    let var = if m > 1 {
        cash.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (m - 1) as f64
    } else {
        0.0
    };
    let s0 = paths.value(0, 0);
    let immediate = (strike - s0).max(0.0);
    let (price, std_error) = if immediate > mean {
        (immediate, 0.0)
    } else {
        (mean, (var / m as f64).sqrt())
    };
    Ok(LsmResult {
        price,
        std_error,
        dates_without_itm,
    })
}

#[inline]
fn fill_basis(x: f64, out: &mut [f64]) {
    let mut v = 1.0;
    for o in out.iter_mut() {
        *o = v;
        v *= x;
    }
}

/// Solves the symmetric positive definite system in place by Cholesky.
fn solve_spd(a: &mut [f64], b: &mut [f64], n: usize) -> Result<Vec<f64>> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) {
            return Err(Error::Numerical("LSM normal equations are not positive definite".into()));
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * n + k] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= a[k * n + i] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    Ok(b.to_vec())
}
