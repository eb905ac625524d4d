use chrono::{Duration, NaiveDate};
use cryptosent::ingest::SeriesPanel;
use cryptosent::simulate::simulate_var;
use cryptosent::var::{fit_var, fit_var_matrix, ma_coefficients, select_order, VarError};
use nalgebra::DMatrix;

fn panel(cols: Vec<(&str, Vec<f64>)>) -> SeriesPanel {
    let n = cols[0].1.len();
    let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    let dates = (0..n).map(|i| start + Duration::days(i as i64)).collect();
    SeriesPanel::from_columns(dates, cols.into_iter().map(|(k, v)| (k.to_string(), v)).collect()).unwrap()
}

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Solves the 3×3 normal equations by Cramer's rule.
fn cramer(xtx: [[f64; 3]; 3], xty: [f64; 3]) -> [f64; 3] {
    let d = det3(xtx);
    let mut out = [0.0; 3];
    for k in 0..3 {
        let mut m = xtx;
        for i in 0..3 {
            m[i][k] = xty[i];
        }
        out[k] = det3(m) / d;
    }
    out
}

#[test]
fn tiny_system_matches_hand_normal_equations() {
    let y1 = vec![1.0, 2.0, 0.0, 3.0, 1.0, 2.0];
    let y2 = vec![0.0, 1.0, 1.0, 2.0, 0.0, 1.0];
    let model = fit_var(&panel(vec![("a", y1.clone()), ("b", y2.clone())]), 1).unwrap();

    // Regressors [1, a_{t-1}, b_{t-1}] for t = 1..5.
    let xs: Vec<[f64; 3]> = (1..6).map(|t| [1.0, y1[t - 1], y2[t - 1]]).collect();
    let mut xtx = [[0.0; 3]; 3];
    for x in &xs {
        for i in 0..3 {
            for j in 0..3 {
                xtx[i][j] += x[i] * x[j];
            }
        }
    }
    for (eq, y) in [&y1, &y2].iter().enumerate() {
        let mut xty = [0.0; 3];
        for (r, x) in xs.iter().enumerate() {
            for i in 0..3 {
                xty[i] += x[i] * y[r + 1];
            }
        }
        let b = cramer(xtx, xty);
        assert!((model.intercept[eq] - b[0]).abs() < 1e-12);
        assert!((model.coefs[0][(eq, 0)] - b[1]).abs() < 1e-12);
        assert!((model.coefs[0][(eq, 1)] - b[2]).abs() < 1e-12);
    }
}

#[test]
fn duplicated_column_is_rank_deficient() {
    let a: Vec<f64> = (0..40).map(|i| ((i * 7 % 13) as f64).sin()).collect();
    let b: Vec<f64> = (0..40).map(|i| ((i * 3 % 11) as f64).cos()).collect();
    let p = panel(vec![("a", a.clone()), ("b", b), ("a2", a)]);
    match fit_var(&p, 1).unwrap_err() {
        VarError::RankDeficient { column, with } => {
            assert_eq!(column, "a2.l1");
            assert_eq!(with, vec!["a.l1".to_string()]);
        }
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn insufficient_data() {
    let p = panel(vec![("a", vec![1.0, 2.0, 0.5, 3.0]), ("b", vec![0.0, 1.0, 3.0, 2.0])]);
    assert!(matches!(fit_var(&p, 1), Err(VarError::InsufficientData { .. })));
}

#[test]
fn white_noise_gives_insignificant_lags() {
    let sigma = DMatrix::identity(3, 3);
    let data = simulate_var(&[0.0; 3], &[DMatrix::zeros(3, 3)], &sigma, 3000, 0, 11);
    let m = fit_var_matrix(&data, vec!["a".into(), "b".into(), "c".into()], 1).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            assert!(m.coefs[0][(i, j)].abs() < 3.0 * m.std_errors[0][(i, j)]);
        }
    }
}

#[test]
fn large_sample_recovers_var1() {
    let phi = DMatrix::from_row_slice(2, 2, &[0.5, 0.2, -0.1, 0.3]);
    let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]);
    let data = simulate_var(&[0.1, -0.2], &[phi.clone()], &sigma, 20_000, 200, 3);
    let m = fit_var_matrix(&data, vec!["a".into(), "b".into()], 1).unwrap();
    assert!((&m.coefs[0] - &phi).amax() < 0.02);

    // Σ̂ symmetric PSD and residuals centred.
    assert_eq!(m.sigma, m.sigma.transpose());
    assert!(cryptosent::linalg::min_eigenvalue(&m.sigma) > -1e-10);
    for j in 0..2 {
        assert!(m.residuals.column(j).mean().abs() < 1e-8);
    }

    // Residuals orthogonal to the lagged regressors.
    let e = &m.residuals;
    let lagged = data.rows(0, data.nrows() - 1);
    let xe = lagged.transpose() * e / e.nrows() as f64;
    assert!(xe.amax() < 1e-6);
}

#[test]
fn ma_of_var1_is_matrix_power() {
    let phi = DMatrix::from_row_slice(3, 3, &[0.4, 0.1, 0.0, -0.2, 0.3, 0.1, 0.05, 0.0, 0.6]);
    let m = cryptosent::var::VarModel::from_parts(
        vec!["a".into(), "b".into(), "c".into()],
        vec![0.0; 3],
        vec![phi.clone()],
        DMatrix::identity(3, 3),
    )
    .unwrap();
    let a = ma_coefficients(&m, 12);
    let mut power = DMatrix::identity(3, 3);
    for ah in &a {
        assert!((ah - &power).amax() < 1e-12);
        power = &power * &phi;
    }
}

#[test]
fn bic_picks_true_order() {
    let phi1 = DMatrix::from_row_slice(2, 2, &[0.3, 0.0, 0.0, 0.2]);
    let phi2 = DMatrix::from_row_slice(2, 2, &[0.4, 0.0, 0.0, -0.3]);
    let data = simulate_var(&[0.0; 2], &[phi1, phi2], &DMatrix::identity(2, 2), 3000, 100, 5);
    let cols = (0..2).map(|j| (["a", "b"][j], data.column(j).iter().copied().collect())).collect();
    assert_eq!(select_order(&panel(cols), 8).unwrap(), 2);
}
