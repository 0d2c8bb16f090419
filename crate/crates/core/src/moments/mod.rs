//! Offline phase: generalized conditional moments
//! `Γ[j][k] = E[p_j(X_Δt) | X_0 = x_k]`, where `p_j = T_j ∘ τ⁻¹` on the domain
//! and zero outside, plus the put tail-correction vectors.
//!
//! Four interchangeable backends fill the same [`MomentMatrix`]:
//! closed-form truncated moments, density quadrature, Fourier inversion and
//! Monte Carlo.

mod cache;
mod closed_form;
mod fourier;
mod mc;
mod quadrature;
mod truncated;

use std::borrow::Cow;
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cheb::ChebGrid;
use crate::error::{Error, Result};
use crate::models::{increment_mixture, ModelSpec};
use crate::numerics::norm_cdf;

pub use cache::{load_cache, save_cache};
pub use closed_form::{gamma_closed_form, MONOMIAL_ROUTE_TOLERANCE};
pub use fourier::{cheb_fourier_transform, gamma_fourier, FourierSettings};
pub use mc::{gamma_mc, McSettings};
pub use quadrature::{default_quad_nodes, gamma_quadrature, gamma_quadrature_density};
pub use truncated::{truncated_normal_moments, TruncatedMomentTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    ClosedForm,
    /// Closed form where the monomial route is accurate, quadrature elsewhere.
    ClosedFormHybrid,
    Quadrature,
    Fourier,
    MonteCarlo,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Backend::ClosedForm => "closed_form",
            Backend::ClosedFormHybrid => "closed_form_hybrid",
            Backend::Quadrature => "quadrature",
            Backend::Fourier => "fourier",
            Backend::MonteCarlo => "monte_carlo",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McMeta {
    pub samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub antithetic: bool,
}

/// Per-node sufficient statistics of Monte Carlo samples that fell below the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct McTailStats {
    pub samples: usize,
    pub below_count: Vec<u64>,
    /// `Σ e^{X}` over the below-domain samples (absorbed paths contribute 0).
    pub below_exp_sum: Vec<f64>,
}

/// The offline-phase product for one step size on a one-dimensional grid.
#[derive(Debug, Clone)]
pub struct MomentMatrix {
    pub(crate) model: ModelSpec,
    pub(crate) grid: Arc<ChebGrid>,
    pub(crate) dt: f64,
    /// Row-major `[j][k]`.
    pub(crate) gamma: Vec<f64>,
    pub(crate) backend: Backend,
    pub(crate) fingerprint: String,
    pub(crate) mc: Option<McMeta>,
    pub(crate) mc_tail: Option<McTailStats>,
    /// Precomputed tail vectors keyed by strike.
    pub(crate) tails: Vec<(f64, Vec<f64>)>,
    /// Wall-clock seconds spent building the matrix (0 when loaded from a cache).
    pub(crate) build_seconds: f64,
}

/// Hex SHA-256 of the model parameters, step size and grid.
pub fn fingerprint(model: &ModelSpec, grid: &ChebGrid, dt: f64) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(model).expect("model serializes"));
    h.update(dt.to_bits().to_le_bytes());
    for i in 0..grid.dim() {
        h.update(grid.domain().lower()[i].to_bits().to_le_bytes());
        h.update(grid.domain().upper()[i].to_bits().to_le_bytes());
        h.update((grid.degree(i) as u64).to_le_bytes());
    }
    hex::encode(h.finalize())
}

impl MomentMatrix {
    pub(crate) fn new(
        model: ModelSpec,
        grid: Arc<ChebGrid>,
        dt: f64,
        gamma: Vec<f64>,
        backend: Backend,
    ) -> Self {
        let fingerprint = fingerprint(&model, &grid, dt);
        Self {
            model,
            grid,
            dt,
            gamma,
            backend,
            fingerprint,
            mc: None,
            mc_tail: None,
            tails: Vec::new(),
            build_seconds: 0.0,
        }
    }

    pub(crate) fn timed(mut self, start: Instant) -> Self {
        self.build_seconds = start.elapsed().as_secs_f64();
        self
    }

    pub fn build_seconds(&self) -> f64 {
        self.build_seconds
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn grid(&self) -> &Arc<ChebGrid> {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of nodes `N + 1`.
    pub fn size(&self) -> usize {
        self.grid.len()
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn mc_meta(&self) -> Option<McMeta> {
        self.mc
    }

    pub fn mc_tail_stats(&self) -> Option<&McTailStats> {
        self.mc_tail.as_ref()
    }

    #[inline]
    pub fn entry(&self, j: usize, k: usize) -> f64 {
        self.gamma[j * self.size() + k]
    }

    /// `Γ[j][·]`.
    pub fn row(&self, j: usize) -> &[f64] {
        let n = self.size();
        &self.gamma[j * n..(j + 1) * n]
    }

    /// Row-major `[j][k]` entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.gamma
    }

    /// Strikes with a stored tail vector.
    pub fn cached_strikes(&self) -> Vec<f64> {
        self.tails.iter().map(|(k, _)| *k).collect()
    }

    /// `e_k = E[(K - e^{X_Δt}) 1{X_Δt < x̲} | x_k]`, from the cache when present.
    pub fn tail_vector(&self, strike: f64) -> Result<Cow<'_, [f64]>> {
        if let Some((_, v)) = self.tails.iter().find(|(k, _)| *k == strike) {
            return Ok(Cow::Borrowed(v));
        }
        Ok(Cow::Owned(self.compute_tail(strike)?))
    }

    /// Computes and stores tail vectors for `strikes` so they travel with the cache file.
    pub fn precompute_tails(&mut self, strikes: &[f64]) -> Result<()> {
        for &k in strikes {
            if self.tails.iter().any(|(s, _)| *s == k) {
                continue;
            }
            let v = self.compute_tail(k)?;
            self.tails.push((k, v));
        }
        self.tails.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(())
    }

    fn compute_tail(&self, strike: f64) -> Result<Vec<f64>> {
        if !(strike > 0.0) {
            return Err(Error::InvalidArgument(format!("strike must be positive, got {strike}")));
        }
        if let Some(stats) = &self.mc_tail {
            let m = stats.samples as f64;
            return Ok(stats
                .below_count
                .iter()
                .zip(&stats.below_exp_sum)
                .map(|(&c, &s)| (c as f64 * strike - s) / m)
                .collect());
        }
        let lower = self.grid.domain().lower()[0];
        tail_correction(&self.model, &self.grid, self.dt, strike, lower)
    }
}

/// Closed-form tail correction for mixture models, one entry per node.
pub fn tail_correction(
    model: &ModelSpec,
    grid: &ChebGrid,
    dt: f64,
    strike: f64,
    lower: f64,
) -> Result<Vec<f64>> {
    if !(strike > 0.0) {
        return Err(Error::InvalidArgument(format!("strike must be positive, got {strike}")));
    }
    grid.axis_nodes(0)
        .iter()
        .map(|&x| {
            let mix = increment_mixture(model, x, dt)?;
            let mut e = 0.0;
            for c in &mix.components {
                let d = (lower - c.mean) / c.std;
                e += c.weight
                    * (strike * norm_cdf(d)
                        - (c.mean + 0.5 * c.std * c.std).exp() * norm_cdf(d - c.std));
            }
            Ok(e.max(0.0))
        })
        .collect()
}

pub(crate) fn require_one_dimensional(grid: &ChebGrid) -> Result<()> {
    if grid.dim() != 1 {
        return Err(Error::InvalidArgument(
            "moment matrices are built on one-dimensional grids".into(),
        ));
    }
    Ok(())
}

pub(crate) fn require_positive_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bs() -> ModelSpec {
        ModelSpec::BlackScholes {
            r: 0.03,
            sigma: 0.25,
        }
    }

    #[test]
    fn fingerprint_tracks_parameters() {
        let g = ChebGrid::interval(3.0, 6.0, 10).unwrap();
        let a = fingerprint(&bs(), &g, 1.0 / 32.0);
        assert_eq!(a, fingerprint(&bs(), &g, 1.0 / 32.0));
        assert_eq!(a.len(), 64);
        let other = ModelSpec::BlackScholes {
            r: 0.03,
            sigma: 0.26,
        };
        assert_ne!(a, fingerprint(&other, &g, 1.0 / 32.0));
        assert_ne!(a, fingerprint(&bs(), &g, 1.0 / 16.0));
        let g2 = ChebGrid::interval(3.0, 6.0, 11).unwrap();
        assert_ne!(a, fingerprint(&bs(), &g2, 1.0 / 32.0));
    }

    #[test]
    fn tail_vanishes_far_below_domain() {
        let g = ChebGrid::interval(3.0, 6.0, 8).unwrap();
        let e = tail_correction(&bs(), &g, 0.01, 100.0, -50.0).unwrap();
        assert!(e.iter().all(|&v| v.abs() < 1e-300));
        let tiny = ModelSpec::BlackScholes {
            r: 0.03,
            sigma: 1e-4,
        };
        let e = tail_correction(&tiny, &g, 0.01, 100.0, 3.0).unwrap();
        assert!(e[..8].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tail_matches_quadrature_oracle() {
        // (K - e^y) φ density integrated on (-∞, x̲) with a fine midpoint rule
        let lower = 30f64.ln();
        let g = ChebGrid::interval(lower, 250f64.ln(), 6).unwrap();
        let dt = 1.0 / 32.0;
        let e = tail_correction(&bs(), &g, dt, 100.0, lower).unwrap();
        for (k, &x) in g.axis_nodes(0).iter().enumerate() {
            let mix = increment_mixture(&bs(), x, dt).unwrap();
            let c = mix.components[0];
            let a = c.mean - 12.0 * c.std;
            let n = 200_000;
            let h = (lower - a) / n as f64;
            let mut s = 0.0;
            for i in 0..n {
                let y = a + (i as f64 + 0.5) * h;
                s += (100.0 - y.exp()) * mix.pdf(y) * h;
            }
            let s = s.max(0.0);
            assert!((e[k] - s).abs() < 1e-9 + 1e-6 * s, "k={k}: {} vs {s}", e[k]);
            assert!(e[k] >= 0.0 && e[k] <= 100.0);
        }
    }
}
