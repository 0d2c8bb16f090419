use std::sync::{Arc, OnceLock};
use std::time::Instant;

use rayon::prelude::*;

use super::quadrature::{default_quad_nodes, mixture_column, transpose_columns};
use super::truncated::truncated_normal_moments;
use super::{require_one_dimensional, require_positive_dt, Backend, MomentMatrix};
use crate::cheb::{cheb_to_monomial, ChebGrid, MAX_MONOMIAL_DEGREE};
use crate::error::{Error, Result};
use crate::models::{increment_mixture, ModelSpec};

/// Largest estimated rounding error accepted from the monomial route before an
/// entry is delegated to quadrature.
pub const MONOMIAL_ROUTE_TOLERANCE: f64 = 1e-11;

fn monomial_table() -> &'static Vec<Vec<f64>> {
    static TABLE: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        (0..=MAX_MONOMIAL_DEGREE)
            .map(|j| {
                cheb_to_monomial::<i128>(j)
                    .expect("degree within range")
                    .into_iter()
                    .map(|a| a as f64)
                    .collect()
            })
            .collect()
    })
}

/// Γ from truncated normal moments of `τ⁻¹(X_Δt)`, expanded through the monomial
/// coefficients of `T_j`.
///
/// The expansion cancels badly for large `j` and for components near the domain
/// edge, so each column switches to quadrature from the first row whose rounding
/// estimate exceeds [`MONOMIAL_ROUTE_TOLERANCE`] (and always beyond degree 50).
/// The backend tag records whether that happened.
pub fn gamma_closed_form(model: &ModelSpec, grid: &Arc<ChebGrid>, dt: f64) -> Result<MomentMatrix> {
    let start = Instant::now();
    require_one_dimensional(grid)?;
    require_positive_dt(dt)?;
    if !model.has_mixture_law() {
        return Err(Error::Unsupported {
            operation: "gamma_closed_form",
            model: model.name(),
        });
    }
    let n = grid.len();
    let degree = n - 1;
    let lo = grid.domain().lower()[0];
    let hi = grid.domain().upper()[0];
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let coeffs = monomial_table();
    let mono_max = degree.min(MAX_MONOMIAL_DEGREE);

    let columns: Vec<(Vec<f64>, bool)> = grid
        .axis_nodes(0)
        .par_iter()
        .map(|&x| {
            let mix = increment_mixture(model, x, dt)?;
            let tables = mix
                .components
                .iter()
                .map(|comp| {
                    truncated_normal_moments((comp.mean - c) / h, comp.std / h, -1.0, 1.0, mono_max)
                        .map(|t| (comp.weight, t))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut col = vec![0.0; n];
            let mut cutoff = if degree > MAX_MONOMIAL_DEGREE { Some(MAX_MONOMIAL_DEGREE + 1) } else { None };
            for j in 0..=mono_max {
                let a = &coeffs[j];
                let mut value = 0.0;
                let mut err = 0.0;
                for (w, t) in &tables {
                    let mut v = 0.0;
                    let mut e = 0.0;
                    for (l, &al) in a.iter().enumerate() {
                        if al == 0.0 {
                            continue;
                        }
                        let m = t.get(l);
                        v += al * m;
                        e += al.abs() * (t.error_bound(l) + 2.0 * f64::EPSILON * (l as f64 + 1.0) * m.abs());
                    }
                    value += w * v;
                    err += w * e;
                }
                if err > MONOMIAL_ROUTE_TOLERANCE {
                    cutoff = Some(j);
                    break;
                }
                col[j] = value;
            }
            let hybrid = cutoff.is_some();
            if let Some(from) = cutoff {
                let mut q = vec![0.0; n];
                mixture_column(grid, &mix, default_quad_nodes(degree), &mut q);
                col[from..].copy_from_slice(&q[from..]);
            }
            Ok((col, hybrid))
        })
        .collect::<Result<_>>()?;

    let hybrid = columns.iter().any(|(_, h)| *h);
    let cols: Vec<Vec<f64>> = columns.into_iter().map(|(c, _)| c).collect();
    let backend = if hybrid { Backend::ClosedFormHybrid } else { Backend::ClosedForm };
    Ok(MomentMatrix::new(*model, grid.clone(), dt, transpose_columns(&cols, n), backend).timed(start))
}
