//! Computable a-priori error bounds for Chebyshev interpolation and the
//! dynamic programming recursion.
//!
//! Every bound saturates to `+∞` instead of overflowing: values above
//! `1e308` (or the scalar's own maximum) are reported as infinite.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::CompensatedSum;
use crate::scalar::Scalar;

/// Inputs of the recursive and simplified DPP bounds.
///
/// Per-step quantities (`rho`, `sup_bound`, `value_sup`) are indexed by the
/// time step `j = 0..=steps`; a single entry means "common to all steps".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBoundInputs<T> {
    /// Bernstein radii, one vector of per-dimension radii per step.
    pub rho: Vec<Vec<T>>,
    /// Sup of the analytic extension on the ellipse, per step.
    pub sup_bound: Vec<T>,
    /// Polynomial degree per dimension.
    pub degrees: Vec<usize>,
    pub steps: usize,
    /// Current step index `u`.
    pub step: usize,
    pub lipschitz: T,
    /// Bound on the value mass outside the domain.
    pub eps_tr: T,
    /// Operator-norm bound of the moment approximation.
    pub eps_gm: T,
    /// Sup of the value function on the domain, per step.
    pub value_sup: Vec<T>,
}

impl<T: Scalar> ErrorBoundInputs<T> {
    /// Inputs with step-independent radii, sup bound and value bound.
    pub fn uniform(rho: Vec<T>, sup_bound: T, degrees: Vec<usize>, steps: usize, step: usize) -> Self {
        Self {
            rho: vec![rho],
            sup_bound: vec![sup_bound],
            degrees,
            steps,
            step,
            lipschitz: T::one(),
            eps_tr: T::zero(),
            eps_gm: T::zero(),
            value_sup: vec![T::zero()],
        }
    }

    pub fn dim(&self) -> usize {
        self.degrees.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.degrees.is_empty() {
            return Err(Error::InvalidArgument("bounds need at least one dimension".into()));
        }
        if self.step > self.steps {
            return Err(Error::InvalidArgument(format!(
                "step index {} exceeds step count {}",
                self.step, self.steps
            )));
        }
        check_per_step("rho", self.rho.len(), self.steps)?;
        check_per_step("sup_bound", self.sup_bound.len(), self.steps)?;
        check_per_step("value_sup", self.value_sup.len(), self.steps)?;
        for r in &self.rho {
            if r.len() != self.dim() {
                return Err(Error::ShapeMismatch {
                    expected: self.dim(),
                    actual: r.len(),
                });
            }
            check_radii(r)?;
        }
        if self.sup_bound.iter().any(|&b| !(b > T::zero())) {
            return Err(Error::InvalidArgument("sup bound B must be positive".into()));
        }
        if !(self.lipschitz > T::zero()) {
            return Err(Error::InvalidArgument("Lipschitz constant must be positive".into()));
        }
        if !(self.eps_tr >= T::zero()) || !(self.eps_gm >= T::zero()) {
            return Err(Error::InvalidArgument("eps_tr and eps_gm must be nonnegative".into()));
        }
        if self.value_sup.iter().any(|&v| !(v >= T::zero())) {
            return Err(Error::InvalidArgument("value sup must be nonnegative".into()));
        }
        Ok(())
    }

    fn rho_at(&self, j: usize) -> &[T] {
        pick(&self.rho, j)
    }

    fn sup_at(&self, j: usize) -> T {
        *pick(&self.sup_bound, j)
    }

    fn value_at(&self, j: usize) -> T {
        *pick(&self.value_sup, j)
    }

    /// `C = Λ L_f (1 + ε_gm)`.
    pub fn amplification(&self) -> T {
        lebesgue_bound::<T>(&self.degrees) * self.lipschitz * (T::one() + self.eps_gm)
    }
}

fn pick<V>(v: &[V], j: usize) -> &V {
    if v.len() == 1 {
        &v[0]
    } else {
        &v[j]
    }
}

fn check_per_step(name: &str, len: usize, steps: usize) -> Result<()> {
    if len == 1 || len == steps + 1 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{name} needs 1 or {} entries, got {len}",
            steps + 1
        )))
    }
}

fn check_radii<T: Scalar>(rho: &[T]) -> Result<()> {
    if rho.iter().any(|&r| !(r > T::one())) {
        return Err(Error::InvalidArgument("Bernstein radii must exceed 1".into()));
    }
    Ok(())
}

fn saturate<T: Scalar>(v: T) -> T {
    let limit = T::from_f64(1e308).min(T::max_value());
    if v.is_nan() || v > limit {
        T::infinity()
    } else {
        v
    }
}

/// Chebyshev interpolation error bound for a function analytic on the
/// generalized Bernstein ellipse with radii `rho` and bounded by `b` there.
pub fn eps_int<T: Scalar>(rho: &[T], degrees: &[usize], b: T) -> Result<T> {
    if rho.len() != degrees.len() {
        return Err(Error::ShapeMismatch {
            expected: degrees.len(),
            actual: rho.len(),
        });
    }
    if rho.is_empty() {
        return Err(Error::InvalidArgument("bounds need at least one dimension".into()));
    }
    check_radii(rho)?;
    let two = T::from_f64(2.0);
    let d = T::from_usize(rho.len());
    let prod = rho
        .iter()
        .fold(T::one(), |acc, &r| acc / (T::one() - r.powi(-2)));
    let sum: CompensatedSum<T> = rho
        .iter()
        .zip(degrees)
        .map(|(&r, &n)| (-two * T::from_usize(n) * r.ln()).exp())
        .collect();
    Ok(saturate(two.powf(d / two + T::one()) * b * (sum.value() * prod).sqrt()))
}

/// Upper bound on the Lebesgue constant of tensor Chebyshev points.
pub fn lebesgue_bound<T: Scalar>(degrees: &[usize]) -> T {
    let two_over_pi = T::FRAC_2_PI();
    let v = degrees.iter().fold(T::one(), |acc, &n| {
        acc * (two_over_pi * T::from_usize(n + 1).ln() + T::one())
    });
    saturate(v)
}

/// Interpolation error bound when node values carry distortions of at most `eps_bar`.
pub fn distorted_interpolation_bound<T: Scalar>(rho: &[T], degrees: &[usize], b: T, eps_bar: T) -> Result<T> {
    Ok(saturate(eps_int(rho, degrees, b)? + eps_bar * lebesgue_bound::<T>(degrees)))
}

/// Error bound at step `u` summed term by term over the remaining steps.
pub fn recursive_bound<T: Scalar>(inputs: &ErrorBoundInputs<T>) -> Result<T> {
    inputs.validate()?;
    let (u, n) = (inputs.step, inputs.steps);
    let lam_lf = lebesgue_bound::<T>(&inputs.degrees) * inputs.lipschitz;
    let c = inputs.amplification();

    let mut first = CompensatedSum::default();
    let mut power = T::one();
    for j in u..=n {
        let e = eps_int(inputs.rho_at(j), &inputs.degrees, inputs.sup_at(j))?;
        let term = power * e;
        if term.is_infinite() {
            return Ok(T::infinity());
        }
        first.add(term);
        power = power * c;
    }

    let mut second = CompensatedSum::default();
    let mut power = T::one();
    for j in u + 1..=n {
        let term = power * (inputs.eps_tr + inputs.eps_gm * inputs.value_at(j));
        if term.is_infinite() {
            return Ok(T::infinity());
        }
        second.add(term);
        power = power * c;
    }
    Ok(saturate(first.value() + lam_lf * second.value()))
}

/// Closed-form relaxation of [`recursive_bound`] using the worst radius,
/// sup bound and value bound over the steps.
pub fn simplified_bound<T: Scalar>(inputs: &ErrorBoundInputs<T>) -> Result<T> {
    inputs.validate()?;
    let (u, n) = (inputs.step, inputs.steps);
    let rho_min: Vec<T> = (0..inputs.dim())
        .map(|i| {
            inputs
                .rho
                .iter()
                .map(|r| r[i])
                .fold(T::infinity(), T::min)
        })
        .collect();
    let b_max = inputs.sup_bound.iter().copied().fold(T::zero(), T::max);
    let v_max = (u..=n).map(|j| inputs.value_at(j)).fold(T::zero(), T::max);
    let c_tilde = inputs.amplification().max(T::from_f64(2.0));
    let base = eps_int(&rho_min, &inputs.degrees, b_max)? + inputs.eps_tr + inputs.eps_gm * v_max;
    let exponent = T::from_usize(n + 1 - u);
    Ok(saturate(base * c_tilde.powf(exponent)))
}

/// Largest step count keeping the bound convergent as degrees grow, given an
/// explicit Lebesgue constant.
pub fn max_timesteps_with<T: Scalar>(rho: T, min_degree: usize, lebesgue: T, lipschitz: T, dim: usize, c1: T) -> Result<T> {
    if !(rho > T::one()) {
        return Err(Error::InvalidArgument("Bernstein radius must exceed 1".into()));
    }
    if !(c1 > T::zero()) || !(lipschitz > T::zero()) || dim == 0 {
        return Err(Error::InvalidArgument("C_1, L_f and D must be positive".into()));
    }
    let denom = lebesgue.ln() + lipschitz.ln();
    if !(denom > T::zero()) {
        return Ok(T::infinity());
    }
    Ok(saturate(
        rho.ln() / (c1 * T::from_usize(dim)) * T::from_usize(min_degree) / denom + T::one(),
    ))
}

/// [`max_timesteps_with`] using [`lebesgue_bound`] for the degrees.
pub fn max_timesteps<T: Scalar>(rho: T, degrees: &[usize], lipschitz: T, c1: T) -> Result<T> {
    let min_degree = degrees
        .iter()
        .copied()
        .min()
        .ok_or_else(|| Error::InvalidArgument("bounds need at least one dimension".into()))?;
    max_timesteps_with(rho, min_degree, lebesgue_bound(degrees), lipschitz, degrees.len(), c1)
}
