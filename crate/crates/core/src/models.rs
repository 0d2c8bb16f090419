//! Asset models for the log-price `X = log S`: one-step increment laws,
//! characteristic functions, simulators and European put prices.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{norm_cdf, norm_pdf};

/// Poisson mass discarded when a jump count series is truncated.
pub const POISSON_TAIL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelSpec {
    BlackScholes {
        r: f64,
        sigma: f64,
    },
    /// Black–Scholes diffusion plus Poisson(`lambda`) jumps with `N(alpha, beta²)` log sizes.
    Merton {
        r: f64,
        sigma: f64,
        lambda: f64,
        alpha: f64,
        beta: f64,
    },
    /// `dS = r S dt + σ S^{β/2} dW`.
    Cev {
        r: f64,
        sigma: f64,
        beta: f64,
    },
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        let (r, sigma) = (self.rate(), self.sigma());
        if !r.is_finite() {
            return bad(format!("rate must be finite, got {r}"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return bad(format!("volatility must be positive, got {sigma}"));
        }
        match *self {
            ModelSpec::BlackScholes { .. } => Ok(()),
            ModelSpec::Merton {
                lambda,
                alpha,
                beta,
                ..
            } => {
                if !(lambda >= 0.0 && lambda.is_finite()) {
                    return bad(format!("jump intensity must be non-negative, got {lambda}"));
                }
                if !(beta >= 0.0 && beta.is_finite()) || !alpha.is_finite() {
                    return bad(format!("invalid jump size law N({alpha}, {beta}²)"));
                }
                Ok(())
            }
            ModelSpec::Cev { beta, .. } => {
                if !(beta > 0.0 && beta.is_finite()) {
                    return bad(format!("CEV elasticity must be positive, got {beta}"));
                }
                Ok(())
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::BlackScholes { .. } => "black_scholes",
            ModelSpec::Merton { .. } => "merton",
            ModelSpec::Cev { .. } => "cev",
        }
    }

    pub fn rate(&self) -> f64 {
        match *self {
            ModelSpec::BlackScholes { r, .. }
            | ModelSpec::Merton { r, .. }
            | ModelSpec::Cev { r, .. } => r,
        }
    }

    pub fn sigma(&self) -> f64 {
        match *self {
            ModelSpec::BlackScholes { sigma, .. }
            | ModelSpec::Merton { sigma, .. }
            | ModelSpec::Cev { sigma, .. } => sigma,
        }
    }

    /// Same model with a different interest rate.
    pub fn with_rate(&self, rate: f64) -> Self {
        let mut m = *self;
        match &mut m {
            ModelSpec::BlackScholes { r, .. }
            | ModelSpec::Merton { r, .. }
            | ModelSpec::Cev { r, .. } => *r = rate,
        }
        m
    }

    /// Whether the one-step law is a normal mixture (closed-form moments, density, cf).
    pub fn has_mixture_law(&self) -> bool {
        !matches!(self, ModelSpec::Cev { .. })
    }

    /// Volatility of log-returns used to size the interpolation domain.
    pub fn effective_vol(&self, s0: f64) -> f64 {
        match *self {
            ModelSpec::BlackScholes { sigma, .. } => sigma,
            ModelSpec::Merton {
                sigma,
                lambda,
                alpha,
                beta,
                ..
            } => (sigma * sigma + lambda * (alpha * alpha + beta * beta)).sqrt(),
            ModelSpec::Cev { sigma, beta, .. } => sigma * s0.powf((beta - 2.0) / 2.0),
        }
    }

    /// Risk-neutral drift `b` of the log-price (Black–Scholes when `λ = 0`).
    fn log_drift(&self) -> f64 {
        match *self {
            ModelSpec::BlackScholes { r, sigma } => r - 0.5 * sigma * sigma,
            ModelSpec::Merton {
                r,
                sigma,
                lambda,
                alpha,
                beta,
            } => r - 0.5 * sigma * sigma - lambda * ((alpha + 0.5 * beta * beta).exp() - 1.0),
            ModelSpec::Cev { r, sigma, .. } => r - 0.5 * sigma * sigma,
        }
    }

    fn unsupported(&self, operation: &'static str) -> Error {
        Error::Unsupported {
            operation,
            model: self.name(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
    pub std: f64,
}

/// Finite normal mixture; `deficit` is the truncated probability mass.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMixture {
    pub components: Vec<MixtureComponent>,
    pub deficit: f64,
}

impl NormalMixture {
    pub fn total_weight(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * norm_pdf((x - c.mean) / c.std) / c.std)
            .sum()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * norm_cdf((x - c.mean) / c.std))
            .sum()
    }

    /// `P(a ≤ X ≤ b)`.
    pub fn probability(&self, a: f64, b: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * crate::numerics::norm_interval((a - c.mean) / c.std, (b - c.mean) / c.std))
            .sum()
    }

    /// `E[e^{X}]`.
    pub fn expected_exp(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * (c.mean + 0.5 * c.std * c.std).exp())
            .sum()
    }

    /// `E[e^{izX}]`.
    pub fn characteristic(&self, z: Complex64) -> Complex64 {
        self.components
            .iter()
            .map(|c| {
                let i = Complex64::i();
                c.weight * (i * z * c.mean - 0.5 * c.std * c.std * z * z).exp()
            })
            .sum()
    }
}

/// Poisson(`mean`) probabilities `p_0, p_1, …` truncated once the remaining mass is below `tail`.
pub fn poisson_weights(mean: f64, tail: f64) -> (Vec<f64>, f64) {
    if mean <= 0.0 {
        return (vec![1.0], 0.0);
    }
    let mut weights = Vec::new();
    let mut w = (-mean).exp();
    let mut cumulative = 0.0;
    let mut m = 0usize;
    loop {
        weights.push(w);
        cumulative += w;
        let next = m as f64 + 1.0;
        // remaining mass ≤ p_{m+1} / (1 - mean/(m+2)) once m + 2 > mean
        let p_next = w * mean / next;
        let remaining = if next + 1.0 > mean {
            p_next / (1.0 - mean / (next + 1.0))
        } else {
            f64::INFINITY
        };
        if remaining < tail || (1.0 - cumulative) < tail && next > mean {
            return (weights, (1.0 - cumulative).max(0.0).min(remaining));
        }
        w = p_next;
        m += 1;
        if m > 10_000 {
            return (weights, (1.0 - cumulative).max(0.0));
        }
    }
}

/// Law of `X_{Δt}` given `X_0 = x0`.
pub fn increment_mixture(model: &ModelSpec, x0: f64, dt: f64) -> Result<NormalMixture> {
    model.validate()?;
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let drift = x0 + model.log_drift() * dt;
    match *model {
        ModelSpec::BlackScholes { sigma, .. } => Ok(NormalMixture {
            components: vec![MixtureComponent {
                weight: 1.0,
                mean: drift,
                std: sigma * dt.sqrt(),
            }],
            deficit: 0.0,
        }),
        ModelSpec::Merton {
            sigma,
            lambda,
            alpha,
            beta,
            ..
        } => {
            let (weights, deficit) = poisson_weights(lambda * dt, POISSON_TAIL);
            let components = weights
                .iter()
                .enumerate()
                .map(|(m, &w)| MixtureComponent {
                    weight: w,
                    mean: drift + m as f64 * alpha,
                    std: (sigma * sigma * dt + m as f64 * beta * beta).sqrt(),
                })
                .collect();
            Ok(NormalMixture {
                components,
                deficit,
            })
        }
        ModelSpec::Cev { .. } => Err(model.unsupported("increment_mixture")),
    }
}

/// Characteristic function of the increment `X_{Δt} - X_0`.
pub fn characteristic_fn(model: &ModelSpec, z: Complex64, dt: f64) -> Result<Complex64> {
    let i = Complex64::i();
    match *model {
        ModelSpec::BlackScholes { sigma, .. } => {
            let b = model.log_drift();
            Ok((dt * (i * b * z - 0.5 * sigma * sigma * z * z)).exp())
        }
        ModelSpec::Merton {
            sigma,
            lambda,
            alpha,
            beta,
            ..
        } => {
            let b = model.log_drift();
            let jump = (i * z * alpha - 0.5 * beta * beta * z * z).exp() - 1.0;
            Ok((dt * (i * b * z - 0.5 * sigma * sigma * z * z + lambda * jump)).exp())
        }
        ModelSpec::Cev { .. } => Err(model.unsupported("characteristic_fn")),
    }
}

/// Euler scheme settings for the CEV model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CevScheme {
    /// Euler substeps per simulated step.
    pub substeps: usize,
    /// Prices at or below this level are treated as absorbed at zero.
    pub floor: f64,
}

impl Default for CevScheme {
    fn default() -> Self {
        Self {
            substeps: 16,
            floor: 1e-8,
        }
    }
}

/// Draws one sample of `X_{Δt}` given `X_0 = x0`; absorbed CEV paths return `-∞`.
#[inline]
pub fn sample_step<R: Rng + ?Sized>(
    model: &ModelSpec,
    x0: f64,
    dt: f64,
    cev: &CevScheme,
    rng: &mut R,
) -> f64 {
    step_with_sign(model, x0, dt, cev, rng, false).0
}

/// Antithetic pair of `X_{Δt}` samples: the Gaussian draws of the second are
/// the negated draws of the first (jump counts are shared).
#[inline]
pub fn sample_step_antithetic<R: Rng + ?Sized>(
    model: &ModelSpec,
    x0: f64,
    dt: f64,
    cev: &CevScheme,
    rng: &mut R,
) -> (f64, f64) {
    let (a, b) = step_with_sign(model, x0, dt, cev, rng, true);
    (a, b.expect("antithetic partner requested"))
}

#[inline]
fn step_with_sign<R: Rng + ?Sized>(
    model: &ModelSpec,
    x0: f64,
    dt: f64,
    cev: &CevScheme,
    rng: &mut R,
    pair: bool,
) -> (f64, Option<f64>) {
    match *model {
        ModelSpec::BlackScholes { sigma, .. } => {
            let z: f64 = StandardNormal.sample(rng);
            let mean = x0 + model.log_drift() * dt;
            let d = sigma * dt.sqrt() * z;
            (mean + d, pair.then_some(mean - d))
        }
        ModelSpec::Merton {
            sigma,
            lambda,
            alpha,
            beta,
            ..
        } => {
            let jumps = if lambda > 0.0 {
                let p = Poisson::new(lambda * dt).expect("positive Poisson mean");
                p.sample(rng) as f64
            } else {
                0.0
            };
            let z: f64 = StandardNormal.sample(rng);
            let std = (sigma * sigma * dt + jumps * beta * beta).sqrt();
            let mean = x0 + model.log_drift() * dt + jumps * alpha;
            (mean + std * z, pair.then_some(mean - std * z))
        }
        ModelSpec::Cev { r, sigma, beta } => {
            let h = dt / cev.substeps as f64;
            let sqrt_h = h.sqrt();
            let half_beta = 0.5 * beta;
            let euler = |s: &mut f64, z: f64| {
                let sp = s.max(0.0);
                *s += r * sp * h + sigma * sp.powf(half_beta) * sqrt_h * z;
            };
            let (mut s, mut t) = (x0.exp(), x0.exp());
            let (mut s_dead, mut t_dead) = (false, !pair);
            for _ in 0..cev.substeps {
                if s_dead && t_dead {
                    break;
                }
                let z: f64 = StandardNormal.sample(rng);
                if !s_dead {
                    euler(&mut s, z);
                    s_dead = s <= cev.floor;
                }
                if !t_dead {
                    euler(&mut t, -z);
                    t_dead = t <= cev.floor;
                }
            }
            let out = |v: f64, dead: bool| if dead { f64::NEG_INFINITY } else { v.ln() };
            (out(s, s_dead), pair.then(|| out(t, t_dead)))
        }
    }
}

/// `count` independent samples of `X_{Δt}` from `x0`, reproducible from `seed`.
pub fn simulate_one_step(
    model: &ModelSpec,
    x0: f64,
    dt: f64,
    count: usize,
    seed: u64,
    cev: &CevScheme,
) -> Result<Vec<f64>> {
    model.validate()?;
    if !(dt > 0.0) || count == 0 {
        return Err(Error::InvalidArgument(
            "one-step simulation needs dt > 0 and at least one sample".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| sample_step(model, x0, dt, cev, &mut rng))
        .collect())
}

/// Price, delta and gamma of a European put.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Greeks {
    pub price: f64,
    pub delta: f64,
    pub gamma: f64,
}

pub fn black_scholes_put(s: f64, k: f64, r: f64, sigma: f64, t: f64) -> Greeks {
    let df = (-r * t).exp();
    if s <= 0.0 {
        return Greeks {
            price: k * df,
            delta: -1.0,
            gamma: 0.0,
        };
    }
    if t <= 0.0 {
        let itm = s < k;
        return Greeks {
            price: (k - s).max(0.0),
            delta: if itm { -1.0 } else { 0.0 },
            gamma: 0.0,
        };
    }
    let vol = sigma * t.sqrt();
    let d1 = ((s / k).ln() + (r + 0.5 * sigma * sigma) * t) / vol;
    let d2 = d1 - vol;
    Greeks {
        price: k * df * norm_cdf(-d2) - s * norm_cdf(-d1),
        delta: -norm_cdf(-d1),
        gamma: norm_pdf(d1) / (s * vol),
    }
}

/// European put under the model's own rate.
pub fn european_put(model: &ModelSpec, s0: f64, k: f64, t: f64) -> Result<Greeks> {
    model.validate()?;
    match *model {
        ModelSpec::BlackScholes { r, sigma } => Ok(black_scholes_put(s0, k, r, sigma, t)),
        ModelSpec::Merton {
            r,
            sigma,
            lambda,
            alpha,
            beta,
        } => {
            if lambda == 0.0 {
                return Ok(black_scholes_put(s0, k, r, sigma, t));
            }
            let kappa = (alpha + 0.5 * beta * beta).exp() - 1.0;
            let lambda_adj = lambda * (1.0 + kappa);
            let (weights, _) = poisson_weights(lambda_adj * t, POISSON_TAIL);
            let mut out = Greeks {
                price: 0.0,
                delta: 0.0,
                gamma: 0.0,
            };
            for (n, w) in weights.iter().enumerate() {
                let nf = n as f64;
                let sigma_n = (sigma * sigma + nf * beta * beta / t).sqrt();
                let r_n = r - lambda * kappa + nf * (alpha + 0.5 * beta * beta) / t;
                let g = black_scholes_put(s0, k, r_n, sigma_n, t);
                out.price += w * g.price;
                out.delta += w * g.delta;
                out.gamma += w * g.gamma;
            }
            Ok(out)
        }
        ModelSpec::Cev { .. } => Err(model.unsupported("european_put")),
    }
}
