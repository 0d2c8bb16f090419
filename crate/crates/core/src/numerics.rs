//! Small numerical building blocks: normal distribution helpers, quadrature
//! rules, integer-order Bessel functions and compensated summation.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use libm::erfc;

use crate::scalar::Scalar;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        1.0
    } else if x == f64::NEG_INFINITY {
        0.0
    } else {
        0.5 * erfc(-x * FRAC_1_SQRT_2)
    }
}

/// `P(a ≤ Z ≤ b)` for standard normal `Z`, computed on the side that avoids cancellation.
pub fn norm_interval(a: f64, b: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    if a > 0.0 {
        norm_cdf(-a) - norm_cdf(-b)
    } else {
        norm_cdf(b) - norm_cdf(a)
    }
}

/// `x^p φ(x)` with the convention that it vanishes at ±∞, computed in log space.
pub fn power_times_pdf(x: f64, p: i32) -> f64 {
    if !x.is_finite() {
        return 0.0;
    }
    if p == 0 {
        return norm_pdf(x);
    }
    if x == 0.0 {
        return 0.0;
    }
    let log_mag = p as f64 * x.abs().ln() - 0.5 * x * x;
    let mag = INV_SQRT_2PI * log_mag.exp();
    if x < 0.0 && p % 2 != 0 {
        -mag
    } else {
        mag
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for k in 0..n {
                let p2 = p1;
                p1 = p0;
                let kf = k as f64;
                p0 = ((2.0 * kf + 1.0) * z * p1 - kf * p2) / (kf + 1.0);
            }
            dp = nf * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if n % 2 == 1 && i == m - 1 {
            z = 0.0;
            // recompute the derivative at the exact midpoint
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for k in 0..n {
                let p2 = p1;
                p1 = p0;
                let kf = k as f64;
                p0 = ((2.0 * kf + 1.0) * z * p1 - kf * p2) / (kf + 1.0);
            }
            dp = nf * (z * p0 - p1) / (z * z - 1.0);
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Clenshaw–Curtis nodes `cos(πk/(n-1))` and weights on `[-1, 1]`, `n ≥ 2` points.
pub fn clenshaw_curtis(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2, "Clenshaw-Curtis rule needs at least two nodes");
    let big_n = n - 1;
    let nf = big_n as f64;
    let nodes: Vec<f64> = (0..n).map(|k| (PI * k as f64 / nf).cos()).collect();
    let mut weights = vec![0.0; n];
    for (k, w) in weights.iter_mut().enumerate() {
        let mut s = 0.0;
        for j in 1..=big_n / 2 {
            let b = if 2 * j == big_n { 1.0 } else { 2.0 };
            let jf = j as f64;
            s += b / (4.0 * jf * jf - 1.0) * (2.0 * jf * k as f64 * PI / nf).cos();
        }
        let c = if k == 0 || k == big_n { 1.0 } else { 2.0 };
        *w = c / nf * (1.0 - s);
    }
    (nodes, weights)
}

/// `J_0(x), …, J_{m_max}(x)` by Miller's backward recurrence normalised with
/// `J_0 + 2 Σ J_{2k} = 1`.
pub fn bessel_j_sequence(x: f64, m_max: usize) -> Vec<f64> {
    let mut out = vec![0.0; m_max + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    let mut start = m_max.max(ax.ceil() as usize) + 30 + (10.0 * ax.cbrt()).ceil() as usize;
    if start % 2 == 1 {
        start += 1;
    }
    let mut j_next = 0.0; // J_{m+1}
    let mut j_cur = 1e-300; // J_m, arbitrary seed
    let mut norm = 0.0;
    let mut buf = vec![0.0; start + 1];
    buf[start] = j_cur;
    for m in (1..=start).rev() {
        let j_prev = 2.0 * m as f64 / ax * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        buf[m - 1] = j_cur;
        if j_cur.abs() > 1e250 {
            for v in buf[m - 1..].iter_mut() {
                *v *= 1e-250;
            }
            j_cur *= 1e-250;
            j_next *= 1e-250;
        }
    }
    for (m, v) in buf.iter().enumerate() {
        if m == 0 {
            norm += v;
        } else if m % 2 == 0 {
            norm += 2.0 * v;
        }
    }
    for m in 0..=m_max {
        let v = buf[m] / norm;
        out[m] = if x < 0.0 && m % 2 == 1 { -v } else { v };
    }
    out
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy)]
pub struct CompensatedSum<T> {
    sum: T,
    carry: T,
}

impl<T: Scalar> Default for CompensatedSum<T> {
    fn default() -> Self {
        Self {
            sum: T::zero(),
            carry: T::zero(),
        }
    }
}

impl<T: Scalar> CompensatedSum<T> {
    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry = self.carry + ((self.sum - t) + x);
        } else {
            self.carry = self.carry + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn value(&self) -> T {
        self.sum + self.carry
    }
}

impl<T: Scalar> FromIterator<T> for CompensatedSum<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut s = Self::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_cdf_values() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((norm_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((norm_cdf(-3.0) - 0.001_349_898_031_630_094_6).abs() < 1e-17);
        assert!((norm_interval(5.0, 6.0) - (norm_cdf(-5.0) - norm_cdf(-6.0))).abs() < 1e-22);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [1, 2, 5, 16, 33] {
            let (x, w) = gauss_legendre(n);
            let sw: f64 = w.iter().sum();
            assert!((sw - 2.0).abs() < 1e-13);
            let deg = 2 * n - 1;
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32 - 1)).sum();
            let want = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((got - want).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn clenshaw_curtis_integrates_exp() {
        let (x, w) = clenshaw_curtis(21);
        let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.exp()).sum();
        assert!((got - (1f64.exp() - (-1f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn bessel_reference_values() {
        let j = bessel_j_sequence(1.0, 3);
        assert!((j[0] - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((j[1] - 0.440_050_585_744_933_5).abs() < 1e-15);
        let j = bessel_j_sequence(100.0, 150);
        assert!((j[0] - 0.019_985_850_304_223_122).abs() < 1e-14);
        assert!((j[1] + 0.077_145_352_014_112_16).abs() < 1e-14);
        let j = bessel_j_sequence(-2.5, 4);
        let jp = bessel_j_sequence(2.5, 4);
        assert_eq!(j[1], -jp[1]);
        assert_eq!(j[2], jp[2]);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let s: CompensatedSum<f64> = [1e16, 1.0, -1e16, 1.0].into_iter().collect();
        assert_eq!(s.value(), 2.0);
    }
}
