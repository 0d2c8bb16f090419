use std::sync::Arc;

use dcheb::cheb::ChebGrid;
use dcheb::models::{increment_mixture, ModelSpec};
use dcheb::moments::{
    default_quad_nodes, gamma_closed_form, gamma_fourier, gamma_mc, gamma_quadrature, Backend,
    FourierSettings, McSettings, MomentMatrix,
};

fn bs() -> ModelSpec {
    ModelSpec::BlackScholes {
        r: 0.03,
        sigma: 0.25,
    }
}

fn merton() -> ModelSpec {
    ModelSpec::Merton {
        r: 0.03,
        sigma: 0.25,
        lambda: 0.4,
        alpha: -0.5,
        beta: 0.4,
    }
}

fn grid(n: usize) -> Arc<ChebGrid> {
    // domain from the default rule for S0 = K = 100, T = 1
    Arc::new(ChebGrid::interval(3.36, 5.86, n).unwrap())
}

fn max_diff(a: &MomentMatrix, b: &MomentMatrix) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn backend_triangle_black_scholes() {
    let g = grid(50);
    let dt = 1.0 / 32.0;
    let cf = gamma_closed_form(&bs(), &g, dt).unwrap();
    let q = gamma_quadrature(&bs(), &g, dt, default_quad_nodes(50)).unwrap();
    let f = gamma_fourier(&bs(), &g, dt, FourierSettings::default()).unwrap();
    let (a, b, c) = (max_diff(&cf, &q), max_diff(&cf, &f), max_diff(&q, &f));
    println!("BS N=50: cf-quad {a:.2e} cf-fourier {b:.2e} quad-fourier {c:.2e}");
    assert!(a < 1e-6 && b < 1e-6 && c < 1e-6);
}

#[test]
fn backend_triangle_merton() {
    let g = grid(50);
    let dt = 1.0 / 32.0;
    let cf = gamma_closed_form(&merton(), &g, dt).unwrap();
    let q = gamma_quadrature(&merton(), &g, dt, default_quad_nodes(50)).unwrap();
    // the jump components need a finer frequency rule than the default 500 nodes
    let fine = FourierSettings {
        xi_max: 250.0,
        n_cc: 2000,
    };
    let f = gamma_fourier(&merton(), &g, dt, fine).unwrap();
    let (a, b, c) = (max_diff(&cf, &q), max_diff(&cf, &f), max_diff(&q, &f));
    println!("Merton N=50: cf-quad {a:.2e} cf-fourier {b:.2e} quad-fourier {c:.2e}");
    assert!(a < 1e-6 && b < 1e-6 && c < 1e-6);
}

#[test]
fn fourier_probability_row() {
    let g = grid(30);
    let dt = 1.0 / 32.0;
    let f = gamma_fourier(&bs(), &g, dt, FourierSettings::default()).unwrap();
    for (k, &x) in g.axis_nodes(0).iter().enumerate() {
        let p = increment_mixture(&bs(), x, dt).unwrap().probability(3.36, 5.86);
        assert!((f.entry(0, k) - p).abs() < 1e-6);
    }
}

#[test]
fn probability_row_in_unit_interval() {
    let g = grid(40);
    let dt = 1.0 / 32.0;
    for m in [
        gamma_closed_form(&merton(), &g, dt).unwrap(),
        gamma_quadrature(&merton(), &g, dt, default_quad_nodes(40)).unwrap(),
        gamma_fourier(&merton(), &g, dt, FourierSettings::default()).unwrap(),
    ] {
        for &v in m.row(0) {
            assert!((-1e-6..=1.0 + 1e-6).contains(&v), "{}: {v}", m.backend());
        }
        assert!(m.as_slice().iter().all(|v| v.abs() <= 1.0 + 1e-6));
    }
}

#[test]
fn mc_matches_closed_form_within_clt_bound() {
    let g = grid(40);
    let dt = 1.0 / 32.0;
    let m = 80_000;
    let exact = gamma_closed_form(&bs(), &g, dt).unwrap();
    let est = gamma_mc(&bs(), &g, dt, McSettings::new(m, 2024)).unwrap();
    assert_eq!(est.backend(), Backend::MonteCarlo);
    let bound = 5.0 / (m as f64).sqrt();
    let total = exact.as_slice().len();
    let within = exact
        .as_slice()
        .iter()
        .zip(est.as_slice())
        .filter(|(a, b)| (*a - *b).abs() <= bound)
        .count();
    assert!(within as f64 >= 0.99 * total as f64, "{within}/{total}");
}

#[test]
fn mc_error_decays_at_root_m_rate() {
    let g = grid(20);
    let dt = 1.0 / 32.0;
    let exact = gamma_closed_form(&bs(), &g, dt).unwrap();
    let sizes = [2_500usize, 10_000, 40_000, 80_000];
    let mut logs_m = Vec::new();
    let mut logs_e = Vec::new();
    for &m in &sizes {
        // average over a few seeds to stabilise the error estimate
        let mut err = 0.0;
        for seed in 0..4 {
            let est = gamma_mc(&bs(), &g, dt, McSettings::new(m, seed)).unwrap();
            let rms = (exact
                .as_slice()
                .iter()
                .zip(est.as_slice())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                / exact.as_slice().len() as f64)
                .sqrt();
            err += rms / 4.0;
        }
        logs_m.push((m as f64).ln());
        logs_e.push(err.ln());
    }
    let slope = dcheb::numerics::ols_slope(&logs_m, &logs_e);
    assert!((slope + 0.5).abs() <= 0.15, "slope {slope}");
}

