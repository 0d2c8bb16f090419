//! Tensor-product Chebyshev interpolation on hyperrectangles.
//!
//! Nodes are the Chebyshev extrema `z_k = cos(πk/N)`, `k = 0..=N`, mapped onto
//! `[lower, upper]` by `x = upper + (lower - upper)(1 - z)/2`. Node `k = 0` sits
//! on the upper bound. Coefficient tensors are stored row-major with the last
//! dimension varying fastest.

use std::sync::Arc;

use num_traits::Num;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest degree accepted by [`cheb_to_monomial`].
pub const MAX_MONOMIAL_DEGREE: usize = 50;

/// Axis-aligned box `[lower_1, upper_1] × … × [lower_D, upper_D]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain<T = f64> {
    lower: Vec<T>,
    upper: Vec<T>,
}

impl<T: Scalar> Domain<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidDomain("dimension must be at least 1".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::InvalidDomain(format!(
                "{} lower bounds but {} upper bounds",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
                return Err(Error::InvalidDomain(format!(
                    "dimension {i}: lower bound {lo:?} must be finite and below upper bound {hi:?}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn interval(lower: T, upper: T) -> Result<Self> {
        Self::new(vec![lower], vec![upper])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    pub fn width(&self, i: usize) -> T {
        self.upper[i] - self.lower[i]
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .enumerate()
                .all(|(i, &xi)| xi >= self.lower[i] && xi <= self.upper[i])
    }

    /// Inverse of [`Domain::from_unit_axis`].
    #[inline]
    pub fn to_unit_axis(&self, i: usize, x: T) -> T {
        let two = T::one() + T::one();
        T::one() - two * (self.upper[i] - x) / (self.upper[i] - self.lower[i])
    }

    #[inline]
    pub fn from_unit_axis(&self, i: usize, z: T) -> T {
        let half = T::from_f64(0.5);
        self.upper[i] + half * (self.lower[i] - self.upper[i]) * (T::one() - z)
    }

    pub fn to_unit(&self, x: &[T]) -> Vec<T> {
        x.iter()
            .enumerate()
            .map(|(i, &xi)| self.to_unit_axis(i, xi))
            .collect()
    }

    pub fn from_unit(&self, z: &[T]) -> Vec<T> {
        z.iter()
            .enumerate()
            .map(|(i, &zi)| self.from_unit_axis(i, zi))
            .collect()
    }
}

/// One axis of a [`ChebGrid`].
#[derive(Debug, Clone)]
struct Axis<T> {
    degree: usize,
    unit_nodes: Vec<T>,
    nodes: Vec<T>,
    /// `fit[j * (N+1) + k]`: weight of the value at node `k` in coefficient `j`.
    fit: Vec<T>,
}

impl<T: Scalar> Axis<T> {
    fn new(domain: &Domain<T>, i: usize, degree: usize) -> Self {
        let n = degree;
        // cos(π m / N) for m in 0..2N, so T_j(z_k) = cos(π (jk mod 2N) / N) is exact
        // up to one rounding.
        let cos_table: Vec<T> = if n == 0 {
            vec![T::one()]
        } else {
            (0..2 * n)
                .map(|m| (T::PI() * T::from_usize(m) / T::from_usize(n)).cos())
                .collect()
        };
        let mut unit_nodes: Vec<T> = (0..=n).map(|k| cos_table[k % cos_table.len()]).collect();
        if n > 0 {
            // Pin the symmetric nodes: cos(π/2) and friends are not exact in floating point.
            unit_nodes[0] = T::one();
            unit_nodes[n] = -T::one();
            for k in 0..=n / 2 {
                let v = (unit_nodes[k] - unit_nodes[n - k]) / (T::one() + T::one());
                unit_nodes[k] = v;
                unit_nodes[n - k] = -v;
            }
        }
        let mut nodes: Vec<T> = unit_nodes
            .iter()
            .map(|&z| domain.from_unit_axis(i, z))
            .collect();
        nodes[0] = domain.upper()[i];
        nodes[n] = domain.lower()[i];

        let mut fit = vec![T::zero(); (n + 1) * (n + 1)];
        if n == 0 {
            fit[0] = T::one();
        } else {
            let nf = T::from_usize(n);
            let half = T::from_f64(0.5);
            for j in 0..=n {
                let scale = if j == 0 || j == n {
                    T::one() / nf
                } else {
                    (T::one() + T::one()) / nf
                };
                for k in 0..=n {
                    let w = if k == 0 || k == n { half } else { T::one() };
                    fit[j * (n + 1) + k] = scale * w * cos_table[(j * k) % (2 * n)];
                }
            }
        }
        Self {
            degree,
            unit_nodes,
            nodes,
            fit,
        }
    }
}

/// Tensor grid of Chebyshev extrema over a [`Domain`].
#[derive(Debug, Clone)]
pub struct ChebGrid<T = f64> {
    domain: Domain<T>,
    axes: Vec<Axis<T>>,
}

impl<T: Scalar> ChebGrid<T> {
    pub fn new(domain: Domain<T>, degrees: &[usize]) -> Result<Self> {
        if degrees.len() != domain.dim() {
            return Err(Error::InvalidArgument(format!(
                "{} degrees given for a {}-dimensional domain",
                degrees.len(),
                domain.dim()
            )));
        }
        let axes = degrees
            .iter()
            .enumerate()
            .map(|(i, &n)| Axis::new(&domain, i, n))
            .collect();
        Ok(Self { domain, axes })
    }

    /// One-dimensional grid of degree `degree` on `[lower, upper]`.
    pub fn interval(lower: T, upper: T, degree: usize) -> Result<Self> {
        Self::new(Domain::interval(lower, upper)?, &[degree])
    }

    pub fn domain(&self) -> &Domain<T> {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.degree).collect()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.axes[i].degree
    }

    /// Total number of nodes, `∏ (N_i + 1)`.
    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.degree + 1).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Unit-interval nodes `z_k = cos(πk/N_i)` of axis `i`.
    pub fn unit_nodes(&self, i: usize) -> &[T] {
        &self.axes[i].unit_nodes
    }

    /// Nodes of axis `i` in domain coordinates, decreasing from the upper bound.
    pub fn axis_nodes(&self, i: usize) -> &[T] {
        &self.axes[i].nodes
    }

    /// Row-major multi-index of a flat node index.
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for i in (0..self.dim()).rev() {
            let m = self.axes[i].degree + 1;
            idx[i] = flat % m;
            flat /= m;
        }
        idx
    }

    pub fn node(&self, flat: usize) -> Vec<T> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(i, &k)| self.axes[i].nodes[k])
            .collect()
    }

    /// All nodes in row-major order.
    pub fn nodes(&self) -> Vec<Vec<T>> {
        (0..self.len()).map(|k| self.node(k)).collect()
    }

    /// Fitting weights of axis `i`: coefficient `j` is `Σ_k w[j][k] f(x_k)`.
    pub fn fit_matrix(&self, i: usize) -> &[T] {
        &self.axes[i].fit
    }

    pub fn same_nodes(&self, other: &ChebGrid<T>) -> bool {
        self.domain == other.domain && self.degrees() == other.degrees()
    }
}

/// Applies the 1-D linear map `mat` ((n+1)×(n+1), row-major) along `axis` of a row-major tensor.
fn apply_along_axis<T: Scalar>(
    data: &[T],
    shape: &[usize],
    axis: usize,
    mat: &[T],
) -> Vec<T> {
    let m = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut out = vec![T::zero(); data.len()];
    for o in 0..outer {
        let base = o * m * inner;
        for j in 0..m {
            let row = &mat[j * m..(j + 1) * m];
            for r in 0..inner {
                let mut acc = T::zero();
                for (k, &w) in row.iter().enumerate() {
                    acc = acc + w * data[base + k * inner + r];
                }
                out[base + j * inner + r] = acc;
            }
        }
    }
    out
}

/// Chebyshev interpolant `Σ_j c_j ∏_i T_{j_i}(z_i)` over a [`ChebGrid`].
#[derive(Debug, Clone)]
pub struct Interpolant<T = f64> {
    grid: Arc<ChebGrid<T>>,
    coeffs: Vec<T>,
}

impl<T: Scalar> Interpolant<T> {
    /// Fits the interpolant through `values` given at the grid nodes (row-major order).
    pub fn fit(grid: Arc<ChebGrid<T>>, values: &[T]) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        let shape: Vec<usize> = grid.degrees().iter().map(|n| n + 1).collect();
        let mut coeffs = values.to_vec();
        for axis in 0..grid.dim() {
            coeffs = apply_along_axis(&coeffs, &shape, axis, grid.fit_matrix(axis));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn from_coefficients(grid: Arc<ChebGrid<T>>, coeffs: Vec<T>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                actual: coeffs.len(),
            });
        }
        Ok(Self { grid, coeffs })
    }

    pub fn grid(&self) -> &Arc<ChebGrid<T>> {
        &self.grid
    }

    pub fn coefficients(&self) -> &[T] {
        &self.coeffs
    }

    /// Evaluates the interpolant; points outside the domain get the polynomial extension.
    pub fn evaluate(&self, x: &[T]) -> T {
        assert_eq!(x.len(), self.grid.dim(), "point dimension mismatch");
        let z = self.grid.domain().to_unit(x);
        let degrees = self.grid.degrees();
        // Contract the last axis first; `buf` shrinks by one axis per pass.
        let mut buf = self.coeffs.clone();
        for axis in (0..degrees.len()).rev() {
            let m = degrees[axis] + 1;
            let rows = buf.len() / m;
            let mut next = Vec::with_capacity(rows);
            for r in 0..rows {
                next.push(clenshaw(&buf[r * m..(r + 1) * m], z[axis]));
            }
            buf = next;
        }
        buf[0]
    }

    /// One-dimensional shorthand for [`Interpolant::evaluate`].
    pub fn evaluate_1d(&self, x: T) -> T {
        self.evaluate(&[x])
    }

    /// Derivative of order 1 or 2 of a one-dimensional interpolant, in domain coordinates.
    pub fn differentiate(&self, order: usize) -> Result<Self> {
        if !(1..=2).contains(&order) {
            return Err(Error::InvalidArgument(format!(
                "derivative order must be 1 or 2, got {order}"
            )));
        }
        if self.grid.dim() != 1 {
            return Err(Error::InvalidArgument(
                "differentiation is only available for one-dimensional interpolants".into(),
            ));
        }
        let two = T::one() + T::one();
        let scale = two / self.grid.domain().width(0);
        let mut c = self.coeffs.clone();
        for _ in 0..order {
            c = derivative_coefficients(&c);
            for v in c.iter_mut() {
                *v = *v * scale;
            }
        }
        Ok(Self {
            grid: Arc::clone(&self.grid),
            coeffs: c,
        })
    }
}

/// Coefficients of the derivative (w.r.t. the unit variable) of `Σ c_j T_j`, padded
/// to the same length.
pub fn derivative_coefficients<T: Scalar>(c: &[T]) -> Vec<T> {
    let len = c.len();
    let mut d = vec![T::zero(); len];
    if len < 2 {
        return d;
    }
    let n = len - 1;
    let two = T::one() + T::one();
    // d_{j-1} = d_{j+1} + 2 j c_j, descending
    for j in (1..=n).rev() {
        let above = if j + 1 <= n { d[j + 1] } else { T::zero() };
        d[j - 1] = above + two * T::from_usize(j) * c[j];
    }
    d[0] = d[0] / two;
    d
}

/// Clenshaw evaluation of `Σ_j c_j T_j(z)`.
#[inline]
pub fn clenshaw<T: Scalar>(c: &[T], z: T) -> T {
    let n = c.len();
    if n == 0 {
        return T::zero();
    }
    if n == 1 {
        return c[0];
    }
    let two_z = z + z;
    let mut b1 = T::zero();
    let mut b2 = T::zero();
    for &cj in c[1..].iter().rev() {
        let b0 = cj + two_z * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    c[0] + z * b1 - b2
}

/// Writes `T_0(z), …, T_{out.len()-1}(z)` into `out` by the three-term recurrence.
#[inline]
pub fn chebyshev_sweep<T: Scalar>(z: T, out: &mut [T]) {
    if out.is_empty() {
        return;
    }
    out[0] = T::one();
    if out.len() == 1 {
        return;
    }
    out[1] = z;
    let two_z = z + z;
    for j in 2..out.len() {
        out[j] = two_z * out[j - 1] - out[j - 2];
    }
}

/// Monomial coefficients `(a_0, …, a_j)` of `T_j(x) = Σ_l a_l x^l`.
///
/// Generic over any numeric ring, so `i128` or a rational type gives exact
/// coefficients. Degrees above [`MAX_MONOMIAL_DEGREE`] are rejected.
pub fn cheb_to_monomial<N: Num + Copy>(j: usize) -> Result<Vec<N>> {
    if j > MAX_MONOMIAL_DEGREE {
        return Err(Error::InvalidArgument(format!(
            "monomial expansion of T_{j} exceeds the supported degree {MAX_MONOMIAL_DEGREE}"
        )));
    }
    let two = N::one() + N::one();
    let mut prev = vec![N::one()];
    if j == 0 {
        return Ok(prev);
    }
    let mut cur = vec![N::zero(), N::one()];
    for _ in 1..j {
        let mut next = vec![N::zero(); cur.len() + 1];
        for (l, &a) in cur.iter().enumerate() {
            next[l + 1] = next[l + 1] + two * a;
        }
        for (l, &a) in prev.iter().enumerate() {
            next[l] = next[l] - a;
        }
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t_acos(j: usize, z: f64) -> f64 {
        (j as f64 * z.acos()).cos()
    }

    #[test]
    fn unit_nodes_degree_four() {
        let g = ChebGrid::<f64>::interval(-1.0, 1.0, 4).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let expected = [1.0, h, 0.0, -h, -1.0];
        for (a, b) in g.axis_nodes(0).iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
        assert_eq!(g.unit_nodes(0)[2], 0.0);
    }

    #[test]
    fn nodes_on_shifted_interval() {
        let g = ChebGrid::<f64>::interval(0.0, 2.0, 1).unwrap();
        assert_eq!(g.axis_nodes(0), &[2.0, 0.0]);
    }

    #[test]
    fn two_dimensional_corner_nodes() {
        let d = Domain::<f64>::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let g = ChebGrid::new(d, &[1, 1]).unwrap();
        assert_eq!(g.len(), 4);
        let nodes = g.nodes();
        assert_eq!(
            nodes,
            vec![
                vec![1.0, 1.0],
                vec![1.0, -1.0],
                vec![-1.0, 1.0],
                vec![-1.0, -1.0]
            ]
        );
    }

    #[test]
    fn invalid_domains_are_rejected() {
        assert!(Domain::<f64>::interval(1.0, 1.0).is_err());
        assert!(Domain::<f64>::interval(2.0, 1.0).is_err());
        assert!(Domain::<f64>::new(vec![], vec![]).is_err());
        assert!(Domain::<f64>::interval(f64::NAN, 1.0).is_err());
        let d = Domain::<f64>::interval(0.0, 1.0).unwrap();
        assert!(ChebGrid::new(d, &[3, 4]).is_err());
    }

    #[test]
    fn unit_transforms() {
        let d = Domain::<f64>::interval(0.0, 2.0).unwrap();
        assert_eq!(d.from_unit(&[-1.0]), vec![0.0]);
        assert_eq!(d.from_unit(&[1.0]), vec![2.0]);
        let id = Domain::<f64>::interval(-1.0, 1.0).unwrap();
        assert_eq!(id.to_unit(&[0.37]), vec![0.37]);
        let d = Domain::<f64>::interval(4.0, 6.0).unwrap();
        assert_eq!(d.to_unit(&[5.0]), vec![0.0]);
    }

    #[test]
    fn node_round_trip_through_unit_interval() {
        let g = ChebGrid::<f64>::interval(3.2, 5.9, 37).unwrap();
        let d = g.domain();
        for &x in g.axis_nodes(0) {
            let back = d.from_unit_axis(0, d.to_unit_axis(0, x));
            assert!((back - x).abs() <= 10.0 * f64::EPSILON * 2.7);
        }
    }

    #[test]
    fn fit_constant_and_polynomials() {
        let g = Arc::new(ChebGrid::<f64>::interval(-3.0, 7.0, 6).unwrap());
        let ones = vec![1.0; 7];
        let p = Interpolant::fit(g, &ones).unwrap();
        assert!((p.coefficients()[0] - 1.0).abs() < 1e-15);
        assert!(p.coefficients()[1..].iter().all(|c| c.abs() < 1e-15));

        let g = Arc::new(ChebGrid::<f64>::interval(-1.0, 1.0, 4).unwrap());
        let vals: Vec<f64> = g.unit_nodes(0).iter().map(|&z| 2.0 * z * z - 1.0).collect();
        let p = Interpolant::fit(g, &vals).unwrap();
        for (j, c) in p.coefficients().iter().enumerate() {
            let want = if j == 2 { 1.0 } else { 0.0 };
            assert!((c - want).abs() < 1e-15, "c_{j} = {c}");
        }

        let g = Arc::new(ChebGrid::<f64>::interval(-1.0, 1.0, 1).unwrap());
        let vals = g.axis_nodes(0).to_vec();
        let p = Interpolant::fit(g, &vals).unwrap();
        assert_eq!(p.coefficients(), &[0.0, 1.0]);
    }

    #[test]
    fn fit_degree_zero_is_the_value() {
        let g = Arc::new(ChebGrid::<f64>::interval(0.0, 1.0, 0).unwrap());
        let p = Interpolant::fit(g, &[4.25]).unwrap();
        assert_eq!(p.coefficients(), &[4.25]);
        assert_eq!(p.evaluate_1d(0.3), 4.25);
    }

    #[test]
    fn fit_rejects_wrong_shape() {
        let g = Arc::new(ChebGrid::<f64>::interval(0.0, 1.0, 3).unwrap());
        assert!(matches!(
            Interpolant::fit(g, &[1.0; 3]),
            Err(Error::ShapeMismatch {
                expected: 4,
                actual: 3
            })
        ));
    }

    #[test]
    fn evaluate_known_coefficients() {
        let g = Arc::new(ChebGrid::<f64>::interval(-1.0, 1.0, 1).unwrap());
        let p = Interpolant::from_coefficients(g, vec![0.0, 1.0]).unwrap();
        assert!((p.evaluate_1d(0.3) - 0.3).abs() < 1e-16);
        let g = Arc::new(ChebGrid::<f64>::interval(-1.0, 1.0, 2).unwrap());
        let p = Interpolant::from_coefficients(g, vec![0.0, 0.0, 1.0]).unwrap();
        assert!((p.evaluate_1d(0.5) + 0.5).abs() < 1e-16);
    }

    #[test]
    fn exp_fit_is_accurate() {
        let g = Arc::new(ChebGrid::<f64>::interval(-1.0, 1.0, 20).unwrap());
        let vals: Vec<f64> = g.axis_nodes(0).iter().map(|x| x.exp()).collect();
        let p = Interpolant::fit(g, &vals).unwrap();
        assert!((p.evaluate_1d(0.1234) - 0.1234f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn clenshaw_matches_trigonometric_form() {
        for j in 0..40 {
            let mut c = vec![0.0; j + 1];
            c[j] = 1.0;
            for &z in &[-1.0, -0.73, -0.2, 0.0, 0.41, 0.99, 1.0] {
                assert!((clenshaw(&c, z) - t_acos(j, z)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn derivatives() {
        let g = Arc::new(ChebGrid::<f64>::interval(-1.0, 1.0, 1).unwrap());
        let p = Interpolant::from_coefficients(g, vec![0.0, 1.0]).unwrap();
        let d = p.differentiate(1).unwrap();
        assert!((d.evaluate_1d(0.77) - 1.0).abs() < 1e-15);

        let g = Arc::new(ChebGrid::<f64>::interval(-1.0, 1.0, 2).unwrap());
        let p = Interpolant::from_coefficients(g, vec![0.0, 0.0, 1.0]).unwrap();
        assert!((p.differentiate(1).unwrap().evaluate_1d(0.25) - 1.0).abs() < 1e-15);
        assert!((p.differentiate(2).unwrap().evaluate_1d(-0.6) - 4.0).abs() < 1e-14);

        let g = Arc::new(ChebGrid::<f64>::interval(-1.0, 1.0, 30).unwrap());
        let vals: Vec<f64> = g.axis_nodes(0).iter().map(|x| x.sin()).collect();
        let p = Interpolant::fit(g, &vals).unwrap();
        let d2 = p.differentiate(2).unwrap();
        assert!((d2.evaluate_1d(0.4) + 0.4f64.sin()).abs() < 1e-9);

        assert!(p.differentiate(0).is_err());
        assert!(p.differentiate(3).is_err());
    }

    #[test]
    fn derivative_chain_rule_on_wide_interval() {
        let g = Arc::new(ChebGrid::<f64>::interval(2.0, 6.0, 40).unwrap());
        let vals: Vec<f64> = g.axis_nodes(0).iter().map(|x| (0.7 * x).cos()).collect();
        let p = Interpolant::fit(g, &vals).unwrap();
        let d1 = p.differentiate(1).unwrap();
        let x = 3.3;
        assert!((d1.evaluate_1d(x) + 0.7 * (0.7 * x).sin()).abs() < 1e-11);
    }

    #[test]
    fn differentiate_requires_one_dimension() {
        let d = Domain::<f64>::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let g = Arc::new(ChebGrid::new(d, &[2, 2]).unwrap());
        let p = Interpolant::fit(g, &[0.0; 9]).unwrap();
        assert!(p.differentiate(1).is_err());
    }

    #[test]
    fn monomial_expansions() {
        assert_eq!(cheb_to_monomial::<i64>(0).unwrap(), vec![1]);
        assert_eq!(cheb_to_monomial::<i64>(2).unwrap(), vec![-1, 0, 2]);
        assert_eq!(cheb_to_monomial::<i64>(5).unwrap(), vec![0, 5, 0, -20, 0, 16]);
        let a = cheb_to_monomial::<f64>(5).unwrap();
        let at_half: f64 = a.iter().enumerate().map(|(l, c)| c * 0.5f64.powi(l as i32)).sum();
        assert!((at_half - t_acos(5, 0.5)).abs() < 1e-14);
        assert!(cheb_to_monomial::<i128>(50).is_ok());
        assert!(cheb_to_monomial::<i128>(51).is_err());
    }

    #[test]
    fn monomial_expansion_is_exact_in_i128() {
        // T_j(1) = 1 and T_j(-1) = (-1)^j, evaluated exactly in integers.
        for j in 0..=50usize {
            let a = cheb_to_monomial::<i128>(j).unwrap();
            let at_one: i128 = a.iter().sum();
            let at_minus_one: i128 = a
                .iter()
                .enumerate()
                .map(|(l, &c)| if l % 2 == 0 { c } else { -c })
                .sum();
            assert_eq!(at_one, 1);
            assert_eq!(at_minus_one, if j % 2 == 0 { 1 } else { -1 });
            assert_eq!(*a.last().unwrap(), if j == 0 { 1 } else { 1i128 << (j - 1) });
        }
    }

    #[test]
    fn single_precision_grid() {
        let g = Arc::new(ChebGrid::<f32>::interval(-1.0, 1.0, 12).unwrap());
        let vals: Vec<f32> = g.axis_nodes(0).iter().map(|x| x * x * x).collect();
        let p = Interpolant::fit(g, &vals).unwrap();
        assert!((p.evaluate_1d(0.3) - 0.027).abs() < 1e-5);
    }
}
