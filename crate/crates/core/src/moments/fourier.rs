use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{require_one_dimensional, require_positive_dt, Backend, MomentMatrix};
use crate::cheb::ChebGrid;
use crate::error::{Error, Result};
use crate::models::{characteristic_fn, ModelSpec};
use crate::numerics::{bessel_j_sequence, clenshaw_curtis};

/// Largest tolerated imaginary part of a Fourier-route entry.
const IMAG_TOLERANCE: f64 = 1e-8;
const CLAMP_SLACK: f64 = 1e-6;
/// Largest tolerated excursion of the probability row outside `[0, 1]`. The
/// imaginary residue cancels on the symmetric node set, so this is what flags
/// a frequency rule too coarse for the domain width.
const PROBABILITY_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierSettings {
    /// Truncation `|ξ| ≤ xi_max` of the frequency integral.
    pub xi_max: f64,
    /// Clenshaw–Curtis nodes on `[-xi_max, xi_max]`.
    pub n_cc: usize,
}

impl Default for FourierSettings {
    fn default() -> Self {
        Self {
            xi_max: 250.0,
            n_cc: 500,
        }
    }
}

#[inline]
fn overlap(j: usize, m: usize) -> f64 {
    // ∫_{-1}^{1} T_j T_m, nonzero only for j + m even
    let s = (j + m) as f64;
    let d = j as f64 - m as f64;
    1.0 / (1.0 - s * s) + 1.0 / (1.0 - d * d)
}

fn bessel_cutoff(kappa: f64) -> usize {
    let a = kappa.abs();
    (a + 40.0 + 10.0 * a.cbrt()).ceil() as usize
}

/// `T̂_j(κ) = ∫_{-1}^{1} T_j(u) e^{iκu} du` for `j = 0..=degree`, via the
/// Jacobi–Anger expansion of `e^{iκu}` in Chebyshev polynomials.
fn fourier_table(degree: usize, kappa: f64) -> Vec<Complex64> {
    let m_max = bessel_cutoff(kappa);
    let jm = bessel_j_sequence(kappa, m_max);
    // i^m (2 - δ_{m0}) J_m, split by parity: even m real, odd m imaginary
    let coef: Vec<f64> = jm
        .iter()
        .enumerate()
        .map(|(m, &v)| {
            let scale = if m == 0 { 1.0 } else { 2.0 };
            let sign = if (m / 2) % 2 == 0 { 1.0 } else { -1.0 };
            scale * sign * v
        })
        .collect();
    (0..=degree)
        .map(|j| {
            let mut acc = 0.0;
            let mut m = j % 2;
            while m <= m_max {
                acc += coef[m] * overlap(j, m);
                m += 2;
            }
            if j % 2 == 0 {
                Complex64::new(acc, 0.0)
            } else {
                Complex64::new(0.0, acc)
            }
        })
        .collect()
}

/// Fourier transform of `T_j` restricted to `[-1, 1]`.
pub fn cheb_fourier_transform(j: usize, kappa: f64) -> Complex64 {
    fourier_table(j, kappa)[j]
}

/// Γ by Parseval's identity against the characteristic function of the increment,
/// integrated with Clenshaw–Curtis on `[-ξ_max, ξ_max]`.
pub fn gamma_fourier(
    model: &ModelSpec,
    grid: &Arc<ChebGrid>,
    dt: f64,
    settings: FourierSettings,
) -> Result<MomentMatrix> {
    let start = Instant::now();
    require_one_dimensional(grid)?;
    require_positive_dt(dt)?;
    if !model.has_mixture_law() {
        return Err(Error::Unsupported {
            operation: "gamma_fourier",
            model: model.name(),
        });
    }
    if !(settings.xi_max > 0.0) || settings.n_cc < 2 {
        return Err(Error::InvalidArgument(
            "Fourier route needs xi_max > 0 and at least two nodes".into(),
        ));
    }
    let n = grid.len();
    let degree = n - 1;
    let lo = grid.domain().lower()[0];
    let hi = grid.domain().upper()[0];
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let (nodes, weights) = clenshaw_curtis(settings.n_cc);
    let q = nodes.len();

    // a[q][j] = w_q h T̂_j(hξ_q) φ(-ξ_q) / 2π
    let a: Vec<Vec<Complex64>> = nodes
        .par_iter()
        .zip(weights.par_iter())
        .map(|(&x, &w)| {
            let xi = settings.xi_max * x;
            let phi = characteristic_fn(model, Complex64::new(-xi, 0.0), dt)?;
            let scale = phi * (settings.xi_max * w * h / (2.0 * PI));
            Ok(fourier_table(degree, h * xi).into_iter().map(|t| t * scale).collect())
        })
        .collect::<Result<_>>()?;
    let xis: Vec<f64> = nodes.iter().map(|x| settings.xi_max * x).collect();
    let xk = grid.axis_nodes(0);

    let columns: Vec<Vec<f64>> = xk
        .par_iter()
        .map(|&x| {
            let phase: Vec<Complex64> = xis.iter().map(|&xi| Complex64::from_polar(1.0, xi * (c - x))).collect();
            let mut col = vec![0.0; n];
            for (j, out) in col.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for iq in 0..q {
                    acc += a[iq][j] * phase[iq];
                }
                if acc.im.abs() > IMAG_TOLERANCE {
                    return Err(Error::Numerical(format!(
                        "Fourier moment has imaginary residue {:.3e}; increase xi_max or n_cc",
                        acc.im.abs()
                    )));
                }
                if j == 0 {
                    if !(-PROBABILITY_TOLERANCE..=1.0 + PROBABILITY_TOLERANCE).contains(&acc.re) {
                        return Err(Error::Numerical(format!(
                            "Fourier probability row reaches {:.3e} at x = {x:.4}; increase n_cc",
                            acc.re
                        )));
                    }
                    *out = acc.re.clamp(0.0, 1.0);
                } else {
                    *out = acc.re.clamp(-1.0 - CLAMP_SLACK, 1.0 + CLAMP_SLACK);
                }
            }
            Ok(col)
        })
        .collect::<Result<_>>()?;
    Ok(MomentMatrix::new(
        *model,
        grid.clone(),
        dt,
        super::quadrature::transpose_columns(&columns, n),
        Backend::Fourier,
    )
    .timed(start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gauss_legendre;

    fn direct(j: usize, kappa: f64) -> Complex64 {
        let (x, w) = gauss_legendre(40);
        let panels = 64;
        let mut acc = Complex64::new(0.0, 0.0);
        for p in 0..panels {
            let a = -1.0 + 2.0 * p as f64 / panels as f64;
            let half = 1.0 / panels as f64;
            for (xi, wi) in x.iter().zip(&w) {
                let u: f64 = a + half * (xi + 1.0);
                let t = (j as f64 * u.acos()).cos();
                acc += Complex64::from_polar(half * wi * t, kappa * u);
            }
        }
        acc
    }

    #[test]
    fn coarse_rule_on_wide_domain_is_reported() {
        let bs = ModelSpec::BlackScholes { r: 0.03, sigma: 0.25 };
        let grid = Arc::new(ChebGrid::interval(1.7, 7.3, 40).unwrap());
        let err = gamma_fourier(&bs, &grid, 1.0 / 32.0, FourierSettings::default()).unwrap_err();
        assert!(err.is_numerical(), "{err}");
        let fine = FourierSettings { xi_max: 250.0, n_cc: 2000 };
        let g = gamma_fourier(&bs, &grid, 1.0 / 32.0, fine).unwrap();
        assert!(g.row(0).iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn transform_at_zero() {
        assert!((cheb_fourier_transform(0, 0.0) - Complex64::new(2.0, 0.0)).norm() < 1e-15);
        assert!(cheb_fourier_transform(1, 0.0).norm() < 1e-15);
        assert!((cheb_fourier_transform(2, 0.0) - Complex64::new(-2.0 / 3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn transform_matches_direct_quadrature() {
        for &(j, kappa) in &[(0, 1.5), (1, -3.0), (5, 10.0), (12, 0.3), (30, 75.0), (7, 200.0)] {
            let a = cheb_fourier_transform(j, kappa);
            let b = direct(j, kappa);
            assert!((a - b).norm() < 1e-12, "j={j} κ={kappa}: {a} vs {b}");
        }
    }
}
