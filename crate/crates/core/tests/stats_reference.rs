//! ADF and Jarque–Bera statistics checked against values produced by a
//! reference econometrics implementation on identical deterministic series.

use cryptosent::stats::{adf_test, jarque_bera, AdfOptions, CriticalValueMode, Deterministic, LagSelection};

/// Integer LCG so the series is reproducible bit-for-bit in any language.
fn lcg(seed: u64, n: usize) -> Vec<f64> {
    let mut s = seed;
    (0..n)
        .map(|_| {
            s = (1_103_515_245 * s + 12_345) % (1 << 31);
            s as f64 / (1u64 << 31) as f64 - 0.5
        })
        .collect()
}

fn ar1(u: &[f64], phi: f64, trend: f64) -> Vec<f64> {
    let mut y = vec![0.0; u.len()];
    for t in 1..u.len() {
        y[t] = phi * y[t - 1] + u[t];
    }
    y.iter().enumerate().map(|(t, v)| v + trend * t as f64).collect()
}

fn cumsum(u: &[f64]) -> Vec<f64> {
    u.iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect()
}

struct Case {
    name: &'static str,
    series: Vec<f64>,
    det: Deterministic,
    max_lag: usize,
    selection: LagSelection,
    statistic: f64,
    lag: usize,
    nobs: usize,
    five_pct: f64,
}

fn cases() -> Vec<Case> {
    vec![
        Case {
            name: "ar1_c_lag2",
            series: ar1(&lcg(1, 200), 0.5, 0.0),
            det: Deterministic::Constant,
            max_lag: 2,
            selection: LagSelection::Fixed,
            statistic: -5.811949050132738,
            lag: 2,
            nobs: 197,
            five_pct: -2.8763259091636213,
        },
        Case {
            name: "rw_c_lag1",
            series: cumsum(&lcg(2, 250)),
            det: Deterministic::Constant,
            max_lag: 1,
            selection: LagSelection::Fixed,
            statistic: -2.0666775347375013,
            lag: 1,
            nobs: 248,
            five_pct: -2.8732659015936024,
        },
        Case {
            name: "ar09_ct_lag3",
            series: ar1(&lcg(3, 300), 0.9, 0.01),
            det: Deterministic::ConstantTrend,
            max_lag: 3,
            selection: LagSelection::Fixed,
            statistic: -4.526028449241989,
            lag: 3,
            nobs: 296,
            five_pct: -3.425427313852955,
        },
        Case {
            name: "wn_n_lag0",
            series: lcg(4, 150),
            det: Deterministic::None,
            max_lag: 0,
            selection: LagSelection::Fixed,
            statistic: -13.944842787885198,
            lag: 0,
            nobs: 149,
            five_pct: -1.942944815533734,
        },
        Case {
            name: "rw_c_aic6",
            series: cumsum(&lcg(5, 400)),
            det: Deterministic::Constant,
            max_lag: 6,
            selection: LagSelection::Aic,
            statistic: 0.510919967329858,
            lag: 0,
            nobs: 399,
            five_pct: -2.8688110853002007,
        },
        Case {
            name: "ar1_c_bic8",
            series: ar1(&lcg(6, 500), 0.5, 0.0),
            det: Deterministic::Constant,
            max_lag: 8,
            selection: LagSelection::Bic,
            statistic: -14.4783714467131,
            lag: 0,
            nobs: 499,
            five_pct: -2.867349510566146,
        },
    ]
}

#[test]
fn adf_matches_reference_statistics() {
    for c in cases() {
        let r = adf_test(
            &c.series,
            AdfOptions {
                deterministic: c.det,
                max_lag: c.max_lag,
                lag_selection: c.selection,
                critical: CriticalValueMode::FiniteSample,
            },
        )
        .unwrap();
        assert!(
            (r.statistic - c.statistic).abs() < 1e-6,
            "{}: {} vs {}",
            c.name,
            r.statistic,
            c.statistic
        );
        assert_eq!(r.lag, c.lag, "{}", c.name);
        assert_eq!(r.nobs, c.nobs, "{}", c.name);
        assert!((r.critical.five - c.five_pct).abs() < 1e-9, "{}", c.name);
    }
}

#[test]
fn jb_matches_reference() {
    let r = jarque_bera(&lcg(7, 300)).unwrap();
    assert!((r.statistic - 16.679812432236808).abs() < 1e-9);
    assert!((r.skewness - 0.052109418071857795).abs() < 1e-12);
    assert!((r.kurtosis - 1.8495551170213351).abs() < 1e-12);

    let r = jarque_bera(&ar1(&lcg(8, 200), 0.3, 0.0)).unwrap();
    assert!((r.statistic - 10.938775563924482).abs() < 1e-9);
}
