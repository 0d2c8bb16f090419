//! Dynamic Chebyshev pricing of Bermudan and American options.

pub mod baselines;
pub mod bounds;
pub mod cheb;
pub mod engine;
pub mod experiments;
pub mod error;
pub mod models;
pub mod moments;
pub mod numerics;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Domain64 = cheb::Domain<f64>;
pub type Domain32 = cheb::Domain<f32>;
pub type ChebGrid64 = cheb::ChebGrid<f64>;
pub type ChebGrid32 = cheb::ChebGrid<f32>;
pub type Interpolant64 = cheb::Interpolant<f64>;
pub type Interpolant32 = cheb::Interpolant<f32>;
