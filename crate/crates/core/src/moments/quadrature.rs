use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use rayon::prelude::*;

use super::{require_one_dimensional, require_positive_dt, Backend, MomentMatrix};
use crate::cheb::{chebyshev_sweep, ChebGrid};
use crate::error::{Error, Result};
use crate::models::{increment_mixture, ModelSpec, NormalMixture};
use crate::numerics::gauss_legendre;

const PANEL_POINTS: usize = 16;
/// Half-width of a component's integration window in standard deviations.
const WINDOW_SDS: f64 = 12.0;

fn panel_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(PANEL_POINTS))
}

/// Smallest admissible quadrature budget, `4(N+1)` points.
pub fn default_quad_nodes(degree: usize) -> usize {
    4 * (degree + 1)
}

/// `Γ[j][k] = ∫ T_j(τ⁻¹(y)) f(y | x_k) dy` over the domain for mixture-density models.
///
/// The integral is taken in the angle variable `y = τ(cos θ)`, where `T_j`
/// becomes `cos(jθ)`. `quad_nodes` sets the base Gauss–Legendre panel width;
/// panels are refined inside narrow mixture components.
pub fn gamma_quadrature(
    model: &ModelSpec,
    grid: &Arc<ChebGrid>,
    dt: f64,
    quad_nodes: usize,
) -> Result<MomentMatrix> {
    let start = Instant::now();
    require_one_dimensional(grid)?;
    require_positive_dt(dt)?;
    if !model.has_mixture_law() {
        return Err(Error::Unsupported {
            operation: "gamma_quadrature",
            model: model.name(),
        });
    }
    let n = grid.len();
    check_budget(n, quad_nodes)?;
    let columns: Vec<Vec<f64>> = grid
        .axis_nodes(0)
        .par_iter()
        .map(|&x| {
            let mix = increment_mixture(model, x, dt)?;
            let mut col = vec![0.0; n];
            mixture_column(grid, &mix, quad_nodes, &mut col);
            Ok(col)
        })
        .collect::<Result<_>>()?;
    Ok(MomentMatrix::new(
        *model,
        grid.clone(),
        dt,
        transpose_columns(&columns, n),
        Backend::Quadrature,
    )
    .timed(start))
}

/// Row-major moments for an arbitrary transition density `density(k, y)`,
/// integrated over the whole domain with base panels only.
pub fn gamma_quadrature_density<F>(grid: &ChebGrid, density: F, quad_nodes: usize) -> Result<Vec<f64>>
where
    F: Fn(usize, f64) -> f64 + Sync,
{
    require_one_dimensional(grid)?;
    let n = grid.len();
    check_budget(n, quad_nodes)?;
    let panels = theta_panels(quad_nodes, &[]);
    let columns: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut col = vec![0.0; n];
            integrate_panels(grid, &panels, |y| density(k, y), &mut col);
            col
        })
        .collect();
    Ok(transpose_columns(&columns, n))
}

fn check_budget(n: usize, quad_nodes: usize) -> Result<()> {
    if quad_nodes < 4 * n {
        return Err(Error::InvalidArgument(format!(
            "quadrature needs at least {} nodes for {n} grid points, got {quad_nodes}",
            4 * n
        )));
    }
    Ok(())
}

pub(crate) fn transpose_columns(columns: &[Vec<f64>], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for (k, col) in columns.iter().enumerate() {
        for (j, &v) in col.iter().enumerate() {
            out[j * n + k] = v;
        }
    }
    out
}

/// One column of Γ for a normal-mixture transition law.
pub(crate) fn mixture_column(grid: &ChebGrid, mix: &NormalMixture, quad_nodes: usize, out: &mut [f64]) {
    let lo = grid.domain().lower()[0];
    let hi = grid.domain().upper()[0];
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    // θ-windows of each component, with the panel width it needs
    let windows: Vec<(f64, f64, f64)> = mix
        .components
        .iter()
        .filter_map(|comp| {
            let zl = (comp.mean - WINDOW_SDS * comp.std - c) / h;
            let zu = (comp.mean + WINDOW_SDS * comp.std - c) / h;
            if zl >= 1.0 || zu <= -1.0 {
                return None;
            }
            let t0 = zu.min(1.0).acos();
            let t1 = zl.max(-1.0).acos();
            Some((t0, t1, comp.std / h))
        })
        .collect();
    out.iter_mut().for_each(|v| *v = 0.0);
    if windows.is_empty() {
        return;
    }
    let panels = theta_panels(quad_nodes, &windows);
    integrate_panels(grid, &panels, |y| mix.pdf(y), out);
}

/// Partition of `[0, π]` into panels of width at most `π / (quad_nodes / 16)`,
/// refined to the component width inside each window. With windows given,
/// panels outside every window are dropped.
fn theta_panels(quad_nodes: usize, windows: &[(f64, f64, f64)]) -> Vec<(f64, f64)> {
    let base = PI / (quad_nodes / PANEL_POINTS).max(1) as f64;
    let mut panels = Vec::new();
    let mut t = 0.0;
    while t < PI {
        let mut next = (t + base).min(PI);
        for &(a, b, w) in windows {
            if a >= next || b <= t {
                continue;
            }
            if t < a {
                next = next.min(a);
            } else {
                next = next.min(t + w.max(1e-12));
            }
        }
        let covered = windows.is_empty() || windows.iter().any(|&(a, b, _)| a < next && b > t);
        if covered && next > t {
            panels.push((t, next));
        }
        if next <= t {
            break;
        }
        t = next;
    }
    panels
}

fn integrate_panels<F: Fn(f64) -> f64>(grid: &ChebGrid, panels: &[(f64, f64)], density: F, out: &mut [f64]) {
    let lo = grid.domain().lower()[0];
    let hi = grid.domain().upper()[0];
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let (gx, gw) = panel_rule();
    let mut t_vals = vec![0.0; out.len()];
    for &(t0, t1) in panels {
        let mid = 0.5 * (t0 + t1);
        let half = 0.5 * (t1 - t0);
        for (x, w) in gx.iter().zip(gw) {
            let theta = mid + half * x;
            let z = theta.cos();
            let weight = half * w * h * theta.sin() * density(c + h * z);
            if weight == 0.0 {
                continue;
            }
            chebyshev_sweep(z, &mut t_vals);
            for (o, t) in out.iter_mut().zip(&t_vals) {
                *o += weight * t;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_surrogate_density() {
        let grid = ChebGrid::<f64>::interval(1.0, 4.0, 12).unwrap();
        let width = 3.0;
        let g = gamma_quadrature_density(&grid, |_, _| 1.0 / width, default_quad_nodes(12)).unwrap();
        let n = grid.len();
        for k in 0..n {
            assert!((g[k] - 1.0).abs() < 1e-13);
            assert!(g[n + k].abs() < 1e-13);
            assert!((g[2 * n + k] + 1.0 / 3.0).abs() < 1e-13);
            // ∫T_j = -2/(j²-1) for even j
            assert!((g[4 * n + k] + 2.0 / 15.0 / 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn budget_enforced() {
        let grid = Arc::new(ChebGrid::<f64>::interval(1.0, 4.0, 12).unwrap());
        let m = ModelSpec::BlackScholes { r: 0.0, sigma: 0.2 };
        assert!(gamma_quadrature(&m, &grid, 0.1, 10).is_err());
    }

    #[test]
    fn probability_row_matches_cdf() {
        let grid = Arc::new(ChebGrid::<f64>::interval(40f64.ln(), 250f64.ln(), 30).unwrap());
        let dt = 1.0 / 32.0;
        for model in [
            ModelSpec::BlackScholes {
                r: 0.03,
                sigma: 0.25,
            },
            ModelSpec::Merton {
                r: 0.03,
                sigma: 0.25,
                lambda: 0.4,
                alpha: -0.5,
                beta: 0.4,
            },
        ] {
            let g = gamma_quadrature(&model, &grid, dt, default_quad_nodes(30)).unwrap();
            for (k, &x) in grid.axis_nodes(0).iter().enumerate() {
                let mix = increment_mixture(&model, x, dt).unwrap();
                let p = mix.probability(grid.domain().lower()[0], grid.domain().upper()[0]);
                assert!((g.entry(0, k) - p).abs() < 1e-10, "k={k}: {} vs {p}", g.entry(0, k));
            }
        }
    }

    #[test]
    fn near_point_mass() {
        let grid = Arc::new(ChebGrid::<f64>::interval(3.0, 6.0, 16).unwrap());
        let m = ModelSpec::BlackScholes {
            r: 0.03,
            sigma: 1e-6,
        };
        let g = gamma_quadrature(&m, &grid, 1.0, default_quad_nodes(16)).unwrap();
        for (k, &x) in grid.axis_nodes(0).iter().enumerate() {
            let y = x + 0.03;
            if y >= 5.99 {
                continue;
            }
            let z = grid.domain().to_unit_axis(0, y);
            for j in 0..=16 {
                let t = (j as f64 * z.acos()).cos();
                assert!((g.entry(j, k) - t).abs() < 1e-6, "j={j} k={k}");
            }
        }
    }
}
