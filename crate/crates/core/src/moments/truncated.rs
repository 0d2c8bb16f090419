use crate::error::{Error, Result};
use crate::numerics::{norm_interval, norm_pdf, power_times_pdf};

/// `E[X^l 1{a ≤ X ≤ b}]` for `X ~ N(μ, s²)` and `l = 0..=L`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedMomentTable {
    moments: Vec<f64>,
    /// Scale of the terms that were summed for each moment; `ε` times this
    /// bounds the rounding error.
    magnitudes: Vec<f64>,
}

impl TruncatedMomentTable {
    pub fn moments(&self) -> &[f64] {
        &self.moments
    }

    pub fn get(&self, l: usize) -> f64 {
        self.moments[l]
    }

    pub fn max_order(&self) -> usize {
        self.moments.len() - 1
    }

    /// Rough absolute rounding-error bound for moment `l`.
    pub fn error_bound(&self, l: usize) -> f64 {
        4.0 * f64::EPSILON * (l as f64 + 2.0) * self.magnitudes[l]
    }
}

/// Truncated moments of a normal variable on `[a, b]` (infinite bounds allowed).
///
/// Standardized moments follow `m̃_l = (l-1) m̃_{l-2} + α^{l-1}φ(α) - β^{l-1}φ(β)`
/// and are mapped back by the binomial expansion of `(μ + sZ)^l`.
pub fn truncated_normal_moments(
    mu: f64,
    s: f64,
    a: f64,
    b: f64,
    max_order: usize,
) -> Result<TruncatedMomentTable> {
    if !(s > 0.0 && s.is_finite()) || !mu.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "truncated moments need finite mean and positive std, got mu={mu}, s={s}"
        )));
    }
    if a.is_nan() || b.is_nan() || a > b {
        return Err(Error::InvalidArgument(format!("invalid truncation interval [{a}, {b}]")));
    }
    let alpha = (a - mu) / s;
    let beta = (b - mu) / s;
    let len = max_order + 1;

    let mut std_m = vec![0.0; len];
    let mut std_mag = vec![0.0; len];
    std_m[0] = norm_interval(alpha, beta);
    std_mag[0] = std_m[0];
    if len > 1 {
        std_m[1] = pdf_or_zero(alpha) - pdf_or_zero(beta);
        std_mag[1] = pdf_or_zero(alpha) + pdf_or_zero(beta);
    }
    for l in 2..len {
        let p = (l - 1) as i32;
        let ta = power_times_pdf(alpha, p);
        let tb = power_times_pdf(beta, p);
        std_m[l] = (l - 1) as f64 * std_m[l - 2] + ta - tb;
        std_mag[l] = (l - 1) as f64 * std_mag[l - 2] + ta.abs() + tb.abs();
    }

    let mut moments = vec![0.0; len];
    let mut magnitudes = vec![0.0; len];
    // binomial row, updated in place
    let mut binom = vec![0.0; len];
    for l in 0..len {
        binom[l] = 1.0;
        for i in (1..l).rev() {
            binom[i] += binom[i - 1];
        }
        let mut acc = 0.0;
        let mut mag = 0.0;
        let mut s_pow = 1.0;
        for i in 0..=l {
            let mu_pow = mu.powi((l - i) as i32);
            let term = binom[i] * mu_pow * s_pow;
            acc += term * std_m[i];
            mag += (term * std_mag[i]).abs();
            s_pow *= s;
        }
        moments[l] = acc;
        magnitudes[l] = mag;
    }
    Ok(TruncatedMomentTable {
        moments,
        magnitudes,
    })
}

#[inline]
fn pdf_or_zero(x: f64) -> f64 {
    if x.is_finite() {
        norm_pdf(x)
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gauss_legendre;

    fn quad_moment(mu: f64, s: f64, a: f64, b: f64, l: i32) -> f64 {
        // composite Gauss–Legendre oracle
        let (x, w) = gauss_legendre(20);
        let panels = 200;
        let h = (b - a) / panels as f64;
        let mut sum = 0.0;
        for p in 0..panels {
            let lo = a + p as f64 * h;
            for (xi, wi) in x.iter().zip(&w) {
                let y = lo + 0.5 * h * (xi + 1.0);
                sum += 0.5 * h * wi * y.powi(l) * norm_pdf((y - mu) / s) / s;
            }
        }
        sum
    }

    #[test]
    fn full_line_standard_normal() {
        let t = truncated_normal_moments(0.0, 1.0, f64::NEG_INFINITY, f64::INFINITY, 4).unwrap();
        assert!((t.get(0) - 1.0).abs() < 1e-15);
        assert!(t.get(1).abs() < 1e-15);
        assert!((t.get(2) - 1.0).abs() < 1e-15);
        assert!((t.get(4) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn half_normal_mean() {
        let t = truncated_normal_moments(0.0, 1.0, 0.0, f64::INFINITY, 1).unwrap();
        assert!((t.get(1) - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!((t.get(0) - 0.5).abs() < 1e-16);
    }

    #[test]
    fn finite_interval_matches_quadrature() {
        let t = truncated_normal_moments(0.1, 0.3, -0.5, 0.7, 6).unwrap();
        for l in 0..=6 {
            let q = quad_moment(0.1, 0.3, -0.5, 0.7, l as i32);
            assert!((t.get(l) - q).abs() < 1e-14, "l={l}: {} vs {q}", t.get(l));
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(truncated_normal_moments(0.0, 0.0, -1.0, 1.0, 2).is_err());
        assert!(truncated_normal_moments(0.0, 1.0, 1.0, -1.0, 2).is_err());
    }

    #[test]
    fn error_bound_grows_with_cancellation() {
        let wide = truncated_normal_moments(0.0, 5.0, -1.0, 1.0, 30).unwrap();
        let narrow = truncated_normal_moments(0.0, 0.05, -1.0, 1.0, 30).unwrap();
        assert!(wide.error_bound(30) > narrow.error_bound(30));
    }
}
