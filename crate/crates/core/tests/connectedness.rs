use chrono::NaiveDate;
use cryptosent::connectedness::{
    directional_measures, dynamic_connectedness, gfevd, static_connectedness, ConnectednessTable, NonPdPolicy,
    TciVariant,
};
use cryptosent::simulate::rng;
use cryptosent::var::{companion, ma_from_coefs, VarModel};
use nalgebra::DMatrix;
use rand::Rng;

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("v{i}")).collect()
}

fn model(coefs: Vec<DMatrix<f64>>, sigma: DMatrix<f64>) -> VarModel {
    let n = sigma.nrows();
    VarModel::from_parts(names(n), vec![0.0; n], coefs, sigma).unwrap()
}

/// MA coefficients as the top-left block of companion-matrix powers, and
/// the decomposition with explicit index loops.
fn brute_force(coefs: &[DMatrix<f64>], sigma: &DMatrix<f64>, horizon: usize) -> DMatrix<f64> {
    let n = sigma.nrows();
    let c = companion(coefs, n);
    let mut power = DMatrix::<f64>::identity(c.nrows(), c.ncols());
    let mut ma = Vec::new();
    for _ in 0..horizon {
        ma.push(power.view((0, 0), (n, n)).into_owned());
        power = &c * &power;
    }
    let mut theta = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut den = 0.0;
        for a in &ma {
            for k in 0..n {
                for l in 0..n {
                    den += a[(i, k)] * sigma[(k, l)] * a[(i, l)];
                }
            }
        }
        for j in 0..n {
            let mut num = 0.0;
            for a in &ma {
                let mut s = 0.0;
                for k in 0..n {
                    s += a[(i, k)] * sigma[(k, j)];
                }
                num += s * s;
            }
            theta[(i, j)] = num / sigma[(j, j)] / den;
        }
        let row: f64 = theta.row(i).sum();
        for j in 0..n {
            theta[(i, j)] /= row;
        }
    }
    theta
}

fn random_stable(r: &mut impl Rng, n: usize, p: usize) -> (Vec<DMatrix<f64>>, DMatrix<f64>) {
    loop {
        let coefs: Vec<DMatrix<f64>> = (0..p)
            .map(|_| DMatrix::from_fn(n, n, |_, _| r.random_range(-0.4..0.4) / p as f64))
            .collect();
        let c = companion(&coefs, n);
        let radius = c.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
        if radius < 0.95 {
            let l = DMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    r.random_range(0.5..1.5)
                } else if i > j {
                    r.random_range(-0.5..0.5)
                } else {
                    0.0
                }
            });
            return (coefs, &l * l.transpose());
        }
    }
}

fn assert_close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) {
    assert_eq!(a.shape(), b.shape());
    for (x, y) in a.iter().zip(b.iter()) {
        assert!((x - y).abs() <= tol, "{a}\nvs\n{b}");
    }
}

fn check_table(t: &ConnectednessTable) {
    for i in 0..t.names.len() {
        assert!((t.theta.row(i).sum() - 1.0).abs() < 1e-10);
    }
    assert!(t.net.iter().sum::<f64>().abs() < 1e-10);
    assert!((t.to.iter().sum::<f64>() - t.from.iter().sum::<f64>()).abs() < 1e-10);
    assert!(t.tci >= 0.0 && t.tci <= 100.0);
    assert!(t.theta.iter().all(|&v| v >= 0.0));
}

#[test]
fn bivariate_reference() {
    let phi = DMatrix::from_row_slice(2, 2, &[0.5, 0.3, 0.0, 0.5]);
    let m = model(vec![phi], DMatrix::identity(2, 2));
    let t = static_connectedness(&m, 10, TciVariant::Standard).unwrap();
    let expected = DMatrix::from_row_slice(2, 2, &[0.833358765448818, 0.16664123455118202, 0.0, 1.0]);
    assert_close(&t.theta, &expected, 1e-10);
    assert!((t.tci - 8.3320617275591).abs() < 1e-9);
    // v1 transmits to v0, never the reverse.
    assert!(t.net[1] > 0.0 && t.net[0] < 0.0);
    assert!(t.npdc[(1, 0)] > 0.0);
    check_table(&t);
}

#[test]
fn trivariate_var2_reference() {
    let coefs = vec![
        DMatrix::from_row_slice(3, 3, &[0.3, 0.1, 0.0, 0.05, 0.2, 0.1, 0.0, -0.1, 0.4]),
        DMatrix::from_row_slice(3, 3, &[0.1, 0.0, 0.05, 0.0, 0.1, 0.0, 0.02, 0.0, -0.1]),
    ];
    let sigma = DMatrix::from_row_slice(3, 3, &[1.0, 0.4, 0.1, 0.4, 2.0, -0.3, 0.1, -0.3, 0.5]);
    let expected = DMatrix::from_row_slice(
        3,
        3,
        &[
            0.8721078318722557,
            0.11042233577983557,
            0.0174698323479087,
            0.07615305028027844,
            0.8513193733359816,
            0.07252757638373974,
            0.01382632953035533,
            0.14524083297245385,
            0.8409328374971907,
        ],
    );
    let t = static_connectedness(&model(coefs, sigma), 12, TciVariant::Standard).unwrap();
    assert_close(&t.theta, &expected, 1e-10);
}

#[test]
fn fuzzed_vars_match_brute_force() {
    let mut r = rng(2024);
    for case in 0..50 {
        let n = 2 + case % 4;
        let p = 1 + case % 3;
        let horizon = 1 + (case * 7) % 20;
        let (coefs, sigma) = random_stable(&mut r, n, p);
        let oracle = brute_force(&coefs, &sigma, horizon);
        let ma = ma_from_coefs(&coefs, n, horizon);
        let theta = gfevd(&ma, &sigma).unwrap();
        assert_close(&theta, &oracle, 1e-10);
        check_table(&directional_measures(&theta, &names(n), TciVariant::Standard).unwrap());
    }
}

#[test]
fn relabeling_permutes_measures() {
    let mut r = rng(7);
    let (coefs, sigma) = random_stable(&mut r, 4, 2);
    let perm = [2usize, 0, 3, 1];
    let pm = DMatrix::from_fn(4, 4, |i, j| if perm[i] == j { 1.0 } else { 0.0 });
    let coefs_p: Vec<DMatrix<f64>> = coefs.iter().map(|c| &pm * c * pm.transpose()).collect();
    let sigma_p = &pm * &sigma * pm.transpose();
    let a = static_connectedness(&model(coefs, sigma), 10, TciVariant::Standard).unwrap();
    let b = static_connectedness(&model(coefs_p, sigma_p), 10, TciVariant::Standard).unwrap();
    for i in 0..4 {
        assert!((b.net[i] - a.net[perm[i]]).abs() < 1e-12);
        assert!((b.to[i] - a.to[perm[i]]).abs() < 1e-12);
        for j in 0..4 {
            assert!((b.theta[(i, j)] - a.theta[(perm[i], perm[j])]).abs() < 1e-12);
        }
    }
    assert!((a.tci - b.tci).abs() < 1e-10);
}

#[test]
fn long_horizon_converges() {
    let mut r = rng(11);
    let (coefs, sigma) = random_stable(&mut r, 3, 1);
    let m = model(coefs, sigma);
    let t100 = static_connectedness(&m, 100, TciVariant::Standard).unwrap();
    let t200 = static_connectedness(&m, 200, TciVariant::Standard).unwrap();
    assert_close(&t100.theta, &t200.theta, 1e-10);
}

#[test]
fn corrected_index_rescales() {
    let mut r = rng(3);
    let (coefs, sigma) = random_stable(&mut r, 5, 1);
    let m = model(coefs, sigma);
    let s = static_connectedness(&m, 10, TciVariant::Standard).unwrap();
    let c = static_connectedness(&m, 10, TciVariant::Corrected).unwrap();
    assert!((c.tci - s.tci * 5.0 / 4.0).abs() < 1e-10);
}

fn dates(n: usize) -> Vec<NaiveDate> {
    let d0 = NaiveDate::from_ymd_opt(2022, 3, 1).unwrap();
    (0..n).map(|i| d0 + chrono::Duration::days(i as i64)).collect()
}

#[test]
fn constant_covariance_reproduces_static() {
    let mut r = rng(5);
    let (coefs, sigma) = random_stable(&mut r, 3, 2);
    let m = model(coefs, sigma.clone());
    let stat = static_connectedness(&m, 10, TciVariant::Standard).unwrap();
    let covs = vec![sigma; 6];
    let dynm = dynamic_connectedness(&m, &covs, &dates(6), 10, TciVariant::Standard, NonPdPolicy::Skip).unwrap();
    assert_eq!(dynm.tables.len(), 6);
    for t in &dynm.tables {
        assert_close(&t.theta, &stat.theta, 1e-12);
        assert!((t.tci - stat.tci).abs() < 1e-10);
    }
}

#[test]
fn alternating_covariances_match_per_day_static() {
    let mut r = rng(9);
    let (coefs, s1) = random_stable(&mut r, 3, 1);
    let (_, s2) = random_stable(&mut r, 3, 1);
    let m1 = model(coefs.clone(), s1.clone());
    let m2 = model(coefs.clone(), s2.clone());
    let a = static_connectedness(&m1, 8, TciVariant::Standard).unwrap();
    let b = static_connectedness(&m2, 8, TciVariant::Standard).unwrap();
    let covs: Vec<DMatrix<f64>> = (0..10).map(|t| if t % 2 == 0 { s1.clone() } else { s2.clone() }).collect();
    let d = dates(10);
    let dynm = dynamic_connectedness(&m1, &covs, &d, 8, TciVariant::Standard, NonPdPolicy::Abort).unwrap();
    for (t, table) in dynm.tables.iter().enumerate() {
        assert_eq!(table.date, Some(d[t]));
        let reference = if t % 2 == 0 { &a } else { &b };
        assert_close(&table.theta, &reference.theta, 1e-12);
    }
}

#[test]
fn non_pd_days_follow_policy() {
    let m = model(vec![DMatrix::from_element(2, 2, 0.1)], DMatrix::identity(2, 2));
    let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
    let covs = vec![DMatrix::identity(2, 2), bad, DMatrix::identity(2, 2)];
    let d = dates(3);
    let skip = dynamic_connectedness(&m, &covs, &d, 5, TciVariant::Standard, NonPdPolicy::Skip).unwrap();
    assert_eq!(skip.tables.len(), 2);
    assert_eq!(skip.skipped, vec![d[1]]);
    assert!(dynamic_connectedness(&m, &covs, &d, 5, TciVariant::Standard, NonPdPolicy::Abort).is_err());
}

#[test]
fn single_variable_has_zero_index() {
    let m = model(vec![DMatrix::from_element(1, 1, 0.4)], DMatrix::from_element(1, 1, 2.0));
    let t = static_connectedness(&m, 10, TciVariant::Standard).unwrap();
    assert_eq!(t.tci, 0.0);
    assert_eq!(t.net, vec![0.0]);
    assert!((t.theta[(0, 0)] - 1.0).abs() < 1e-15);
}
