use cryptosent::simulate::{normals, rng, simulate_dcc, simulate_garch};
use cryptosent::volatility::{dcc_nll, fit_dcc, fit_garch11, garch_nll, sample_correlation};
use nalgebra::DMatrix;
use rand::Rng;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-8)
}

#[test]
fn garch_recovers_known_parameters() {
    let (x, _) = simulate_garch(0.1, 0.1, 0.8, 5000, 42);
    let g = fit_garch11(&x).unwrap();
    assert!((g.omega - 0.1).abs() < 0.05, "{g:?}");
    assert!((g.alpha - 0.1).abs() < 0.05);
    assert!((g.beta - 0.8).abs() < 0.05);
    assert!(g.variances.iter().all(|h| *h > 0.0));
    assert!(g.alpha + g.beta < 1.0);
    assert!(g.trace.loglik_path.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn garch_on_white_noise_has_no_arch_effect() {
    let x = normals(&mut rng(7), 5000);
    let g = fit_garch11(&x).unwrap();
    assert!(g.alpha < 0.03, "{g:?}");
    assert!((g.unconditional_variance() - 1.0).abs() < 0.1);
}

#[test]
fn garch_scale_equivariance() {
    let (x, _) = simulate_garch(0.1, 0.1, 0.8, 2000, 9);
    let c = 3.0;
    let xs: Vec<f64> = x.iter().map(|v| v * c).collect();
    let g = fit_garch11(&x).unwrap();
    let gs = fit_garch11(&xs).unwrap();
    assert!((gs.omega / (c * c) - g.omega).abs() < 1e-3);
    assert!((gs.alpha - g.alpha).abs() < 1e-3);
    assert!((gs.beta - g.beta).abs() < 1e-3);
}

#[test]
fn garch_gradient_matches_central_differences() {
    let (x, _) = simulate_garch(0.1, 0.1, 0.8, 800, 3);
    let mut r = rng(99);
    let h = 1e-5;
    for _ in 0..5 {
        let omega = r.random_range(0.05..0.3);
        let alpha = r.random_range(0.01..0.3);
        let beta = r.random_range(0.2..(0.98 - alpha));
        let (_, g) = garch_nll(&x, omega, alpha, beta);
        let fd = [
            (garch_nll(&x, omega + h, alpha, beta).0 - garch_nll(&x, omega - h, alpha, beta).0) / (2.0 * h),
            (garch_nll(&x, omega, alpha + h, beta).0 - garch_nll(&x, omega, alpha - h, beta).0) / (2.0 * h),
            (garch_nll(&x, omega, alpha, beta + h).0 - garch_nll(&x, omega, alpha, beta - h).0) / (2.0 * h),
        ];
        for k in 0..3 {
            assert!(rel_err(g[k], fd[k]) < 1e-4, "k={k}: {} vs {}", g[k], fd[k]);
        }
    }
}

fn qbar3() -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.2, 0.5, 1.0, 0.3, 0.2, 0.3, 1.0])
}

#[test]
fn dcc_gradient_matches_central_differences() {
    let z = simulate_dcc(&qbar3(), 0.05, 0.9, 400, 5);
    let qbar = sample_correlation(&z).unwrap();
    let mut r = rng(17);
    let h = 1e-5;
    for _ in 0..5 {
        let a = r.random_range(0.01..0.2);
        let b = r.random_range(0.3..(0.97 - a));
        let (_, g) = dcc_nll(&z, &qbar, a, b);
        let fa = (dcc_nll(&z, &qbar, a + h, b).0 - dcc_nll(&z, &qbar, a - h, b).0) / (2.0 * h);
        let fb = (dcc_nll(&z, &qbar, a, b + h).0 - dcc_nll(&z, &qbar, a, b - h).0) / (2.0 * h);
        assert!(rel_err(g[0], fa) < 1e-4, "{} vs {fa}", g[0]);
        assert!(rel_err(g[1], fb) < 1e-4, "{} vs {fb}", g[1]);
    }
}

#[test]
fn dcc_recovers_known_parameters() {
    let z = simulate_dcc(&qbar3(), 0.05, 0.90, 4000, 21);
    let fit = fit_dcc(&z).unwrap();
    assert!((fit.a - 0.05).abs() < 0.05, "a = {}", fit.a);
    assert!((fit.b - 0.90).abs() < 0.05, "b = {}", fit.b);
    for r in &fit.r_path {
        for i in 0..3 {
            assert_eq!(r[(i, i)], 1.0);
        }
        assert!(r.iter().all(|v| (-1.0..=1.0).contains(v)));
        assert!(cryptosent::linalg::min_eigenvalue(r) > -1e-10);
    }
    assert!(fit.trace.loglik_path.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn degenerate_inputs_rejected() {
    let mut z = simulate_dcc(&qbar3(), 0.05, 0.9, 200, 2);
    let c0: Vec<f64> = z.column(0).iter().copied().collect();
    z.set_column(2, &nalgebra::DVector::from_vec(c0));
    assert!(fit_dcc(&z).is_err());
}
