use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::quadrature::transpose_columns;
use super::{require_one_dimensional, require_positive_dt, Backend, McMeta, McTailStats, MomentMatrix};
use crate::cheb::ChebGrid;
use crate::error::{Error, Result};
use crate::models::{sample_step, sample_step_antithetic, CevScheme, ModelSpec};

const LANES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    pub samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub cev: CevScheme,
    /// Draw samples in antithetic pairs (`samples` must then be even).
    #[serde(default)]
    pub antithetic: bool,
}

impl McSettings {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self {
            samples,
            seed,
            cev: CevScheme::default(),
            antithetic: false,
        }
    }

    pub fn antithetic(samples: usize, seed: u64) -> Self {
        Self {
            antithetic: true,
            ..Self::new(samples, seed)
        }
    }
}

struct Column {
    values: Vec<f64>,
    below_count: u64,
    below_exp_sum: f64,
}

/// Γ̂ as sample averages of `p_j(X_Δt)` over `M` one-step draws per node.
///
/// Node `k` draws from ChaCha8 stream `k` of `seed`, so the matrix does not
/// depend on scheduling or worker count.
pub fn gamma_mc(model: &ModelSpec, grid: &Arc<ChebGrid>, dt: f64, settings: McSettings) -> Result<MomentMatrix> {
    let start = Instant::now();
    require_one_dimensional(grid)?;
    require_positive_dt(dt)?;
    model.validate()?;
    if settings.samples == 0 {
        return Err(Error::InvalidArgument("Monte Carlo needs at least one sample".into()));
    }
    if settings.antithetic && settings.samples % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "antithetic sampling needs an even sample count, got {}",
            settings.samples
        )));
    }
    if settings.cev.substeps == 0 {
        return Err(Error::InvalidArgument("CEV scheme needs at least one substep".into()));
    }
    let n = grid.len();
    let columns: Vec<Column> = grid
        .axis_nodes(0)
        .par_iter()
        .enumerate()
        .map(|(k, &x)| simulate_column(model, grid, x, dt, k as u64, &settings))
        .collect();

    let values: Vec<Vec<f64>> = columns.iter().map(|c| c.values.clone()).collect();
    let mut m = MomentMatrix::new(*model, grid.clone(), dt, transpose_columns(&values, n), Backend::MonteCarlo);
    m.mc = Some(McMeta {
        samples: settings.samples,
        seed: settings.seed,
        antithetic: settings.antithetic,
    });
    m.mc_tail = Some(McTailStats {
        samples: settings.samples,
        below_count: columns.iter().map(|c| c.below_count).collect(),
        below_exp_sum: columns.iter().map(|c| c.below_exp_sum).collect(),
    });
    Ok(m.timed(start))
}

fn simulate_column(
    model: &ModelSpec,
    grid: &ChebGrid,
    x0: f64,
    dt: f64,
    stream: u64,
    settings: &McSettings,
) -> Column {
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    rng.set_stream(stream);
    let lo = grid.domain().lower()[0];
    let hi = grid.domain().upper()[0];
    let n = grid.len();

    let mut below_count = 0u64;
    let mut below_exp_sum = 0.0;
    let mut zs = Vec::with_capacity(settings.samples);
    let mut record = |x: f64| {
        if x < lo {
            below_count += 1;
            below_exp_sum += x.exp();
        } else if x <= hi {
            zs.push(grid.domain().to_unit_axis(0, x).clamp(-1.0, 1.0));
        }
    };
    if settings.antithetic {
        for _ in 0..settings.samples / 2 {
            let (a, b) = sample_step_antithetic(model, x0, dt, &settings.cev, &mut rng);
            record(a);
            record(b);
        }
    } else {
        for _ in 0..settings.samples {
            record(sample_step(model, x0, dt, &settings.cev, &mut rng));
        }
    }

    // Chebyshev recurrence over blocks of samples, summed per lane then across lanes
    let mut acc = vec![[0.0f64; LANES]; n];
    let mut chunks = zs.chunks_exact(LANES);
    for block in &mut chunks {
        let mut z = [0.0; LANES];
        z.copy_from_slice(block);
        let mut prev = [1.0; LANES];
        let mut cur = z;
        for l in 0..LANES {
            acc[0][l] += 1.0;
        }
        if n > 1 {
            for l in 0..LANES {
                acc[1][l] += cur[l];
            }
        }
        for row in acc.iter_mut().skip(2) {
            let mut next = [0.0; LANES];
            for l in 0..LANES {
                next[l] = 2.0 * z[l] * cur[l] - prev[l];
                row[l] += next[l];
            }
            prev = cur;
            cur = next;
        }
    }
    let mut rest = vec![0.0; n];
    let mut t = vec![0.0; n];
    for &z in chunks.remainder() {
        crate::cheb::chebyshev_sweep(z, &mut t);
        for (r, v) in rest.iter_mut().zip(&t) {
            *r += v;
        }
    }
    let m = settings.samples as f64;
    let values = acc
        .iter()
        .zip(&rest)
        .map(|(lanes, r)| (lanes.iter().sum::<f64>() + r) / m)
        .collect();
    Column {
        values,
        below_count,
        below_exp_sum,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sample_outside_domain_gives_zero_column() {
        // zero volatility-like setup: huge drift pushes everything above the domain
        let grid = Arc::new(ChebGrid::<f64>::interval(3.0, 3.5, 6).unwrap());
        let m = ModelSpec::BlackScholes { r: 5.0, sigma: 0.01 };
        let g = gamma_mc(&m, &grid, 1.0, McSettings::new(1, 7)).unwrap();
        assert!(g.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn entries_bounded_and_deterministic() {
        let grid = Arc::new(ChebGrid::<f64>::interval(3.0, 6.0, 20).unwrap());
        let m = ModelSpec::BlackScholes {
            r: 0.03,
            sigma: 0.4,
        };
        let a = gamma_mc(&m, &grid, 0.25, McSettings::new(1001, 42)).unwrap();
        let b = gamma_mc(&m, &grid, 0.25, McSettings::new(1001, 42)).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
        assert!(a.as_slice().iter().all(|v| v.abs() <= 1.0));
        let c = gamma_mc(&m, &grid, 0.25, McSettings::new(1001, 43)).unwrap();
        assert_ne!(a.as_slice(), c.as_slice());
    }

    #[test]
    fn absorbed_cev_paths_feed_tail() {
        let grid = Arc::new(ChebGrid::<f64>::interval(-1.0, 1.0, 4).unwrap());
        let m = ModelSpec::Cev {
            r: 0.0,
            sigma: 3.0,
            beta: 1.0,
        };
        let g = gamma_mc(&m, &grid, 1.0, McSettings::new(2000, 1)).unwrap();
        let stats = g.mc_tail_stats().unwrap();
        assert!(stats.below_count.iter().all(|&c| c > 0));
        let e = g.tail_vector(1.0).unwrap();
        assert!(e.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}
