//! Unit-root and normality diagnostics.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{least_squares, LinalgError};

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("series too short: {len} observations, need at least {needed}")]
    TooShort { len: usize, needed: usize },
    #[error("degenerate regressor")]
    DegenerateRegressor,
    #[error("zero variance")]
    ZeroVariance,
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
}

pub type Result<T> = std::result::Result<T, StatsError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Deterministic {
    None,
    #[default]
    Constant,
    ConstantTrend,
}

impl Deterministic {
    fn n_terms(self) -> usize {
        match self {
            Deterministic::None => 0,
            Deterministic::Constant => 1,
            Deterministic::ConstantTrend => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    Aic,
    Bic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LagSelection {
    Fixed,
    Aic,
    Bic,
}

/// Where the critical values come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriticalValueMode {
    #[default]
    Asymptotic,
    /// MacKinnon (2010) response surface evaluated at the regression's sample size.
    FiniteSample,
}

/// Critical values at 1%, 5% and 10%.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValues {
    pub one: f64,
    pub five: f64,
    pub ten: f64,
}

/// MacKinnon (2010) response-surface coefficients for a single series
/// (`β∞, β1, β2, β3` at 1/5/10%).
const SURFACE_NONE: [[f64; 4]; 3] = [
    [-2.56574, -2.2358, -3.627, 0.0],
    [-1.94100, -0.2686, -3.365, 31.223],
    [-1.61682, 0.2656, -2.714, 25.364],
];
const SURFACE_CONST: [[f64; 4]; 3] = [
    [-3.43035, -6.5393, -16.786, -79.433],
    [-2.86154, -2.8903, -4.234, -40.040],
    [-2.56677, -1.5384, -2.809, 0.0],
];
const SURFACE_TREND: [[f64; 4]; 3] = [
    [-3.95877, -9.0531, -28.428, -134.155],
    [-3.41049, -4.3904, -9.036, -45.374],
    [-3.12705, -2.5856, -3.925, -22.380],
];

pub fn mackinnon_critical_values(det: Deterministic, nobs: Option<usize>) -> CriticalValues {
    let table = match det {
        Deterministic::None => &SURFACE_NONE,
        Deterministic::Constant => &SURFACE_CONST,
        Deterministic::ConstantTrend => &SURFACE_TREND,
    };
    let eval = |c: &[f64; 4]| match nobs {
        None => c[0],
        Some(n) => {
            let inv = 1.0 / n as f64;
            c[0] + c[1] * inv + c[2] * inv * inv + c[3] * inv * inv * inv
        }
    };
    CriticalValues {
        one: eval(&table[0]),
        five: eval(&table[1]),
        ten: eval(&table[2]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decisions {
    pub one: bool,
    pub five: bool,
    pub ten: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdfResult {
    pub statistic: f64,
    pub lag: usize,
    pub nobs: usize,
    pub deterministic: Deterministic,
    pub critical: CriticalValues,
    /// `true` where the unit-root null is rejected.
    pub reject: Decisions,
}

impl AdfResult {
    /// Number of significance stars: 3 at 1%, 2 at 5%, 1 at 10%.
    pub fn stars(&self) -> usize {
        if self.reject.one {
            3
        } else if self.reject.five {
            2
        } else if self.reject.ten {
            1
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AdfOptions {
    pub deterministic: Deterministic,
    pub max_lag: usize,
    pub lag_selection: LagSelection,
    pub critical: CriticalValueMode,
}

impl Default for AdfOptions {
    fn default() -> Self {
        Self {
            deterministic: Deterministic::Constant,
            max_lag: 4,
            lag_selection: LagSelection::Aic,
            critical: CriticalValueMode::Asymptotic,
        }
    }
}

fn validate(series: &[f64]) -> Result<()> {
    if let Some(i) = series.iter().position(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite(i));
    }
    Ok(())
}

struct AdfRegression {
    statistic: f64,
    nobs: usize,
    llf: f64,
    k: usize,
}

/// OLS of Δy_t on deterministic terms, y_{t−1} and `lag` lagged differences,
/// using observations `t` whose first usable index is `start` (in Δy terms).
fn adf_regression(y: &[f64], lag: usize, det: Deterministic, start: usize) -> Result<AdfRegression> {
    let dy: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    // Row for Δy[t] needs Δy[t-1..t-lag] and y[t] (the level before the change).
    let rows: Vec<usize> = (start.max(lag)..dy.len()).collect();
    let n = rows.len();
    let k = det.n_terms() + 1 + lag;
    if n <= k {
        return Err(StatsError::TooShort {
            len: y.len(),
            needed: y.len() + k + 1 - n,
        });
    }
    let x = DMatrix::from_fn(n, k, |r, c| {
        let t = rows[r];
        match c {
            0 => y[t],
            c if c <= lag => dy[t - c],
            c => match c - lag - 1 {
                0 => 1.0,
                _ => (t + 1) as f64,
            },
        }
    });
    let resp = DMatrix::from_fn(n, 1, |r, _| dy[rows[r]]);
    let fit = least_squares(&x, &resp).map_err(|e| match e {
        LinalgError::Collinear { .. } => StatsError::DegenerateRegressor,
        _ => StatsError::DegenerateRegressor,
    })?;
    let ssr = fit.resid.norm_squared();
    if ssr <= 0.0 {
        return Err(StatsError::DegenerateRegressor);
    }
    let s2 = ssr / (n - k) as f64;
    let se = (s2 * fit.xtx_inv[(0, 0)]).sqrt();
    let nf = n as f64;
    let llf = -nf / 2.0 * ((2.0 * std::f64::consts::PI).ln() + (ssr / nf).ln() + 1.0);
    Ok(AdfRegression {
        statistic: fit.coef[(0, 0)] / se,
        nobs: n,
        llf,
        k,
    })
}

fn check_not_flat(series: &[f64]) -> Result<()> {
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let scale = series.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if var <= (1e-12 * scale.max(1e-300)).powi(2) {
        return Err(StatsError::DegenerateRegressor);
    }
    Ok(())
}

/// Lag in `0..=max_lag` minimizing the information criterion; all
/// candidates share the estimation sample of the largest lag. Ties go to
/// the smaller lag.
pub fn select_lag(series: &[f64], det: Deterministic, max_lag: usize, criterion: Criterion) -> Result<usize> {
    validate(series)?;
    if max_lag == 0 {
        return Ok(0);
    }
    check_not_flat(series)?;
    let mut best = (f64::INFINITY, 0usize);
    for lag in 0..=max_lag {
        let reg = adf_regression(series, lag, det, max_lag)?;
        let k = reg.k as f64;
        let ic = match criterion {
            Criterion::Aic => -2.0 * reg.llf + 2.0 * k,
            Criterion::Bic => -2.0 * reg.llf + k * (reg.nobs as f64).ln(),
        };
        if ic < best.0 {
            best = (ic, lag);
        }
    }
    Ok(best.1)
}

/// Augmented Dickey–Fuller test. With `Fixed` selection the regression uses
/// exactly `max_lag` lagged differences.
pub fn adf_test(series: &[f64], opts: AdfOptions) -> Result<AdfResult> {
    validate(series)?;
    let needed = opts.max_lag + 20;
    if series.len() < needed {
        return Err(StatsError::TooShort {
            len: series.len(),
            needed,
        });
    }
    check_not_flat(series)?;
    let lag = match opts.lag_selection {
        LagSelection::Fixed => opts.max_lag,
        LagSelection::Aic => select_lag(series, opts.deterministic, opts.max_lag, Criterion::Aic)?,
        LagSelection::Bic => select_lag(series, opts.deterministic, opts.max_lag, Criterion::Bic)?,
    };
    let reg = adf_regression(series, lag, opts.deterministic, 0)?;
    let critical = match opts.critical {
        CriticalValueMode::Asymptotic => mackinnon_critical_values(opts.deterministic, None),
        CriticalValueMode::FiniteSample => mackinnon_critical_values(opts.deterministic, Some(reg.nobs)),
    };
    let reject = Decisions {
        one: reg.statistic < critical.one,
        five: reg.statistic < critical.five,
        ten: reg.statistic < critical.ten,
    };
    Ok(AdfResult {
        statistic: reg.statistic,
        lag,
        nobs: reg.nobs,
        deterministic: opts.deterministic,
        critical,
        reject,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JbResult {
    pub statistic: f64,
    pub skewness: f64,
    /// Raw (non-excess) kurtosis.
    pub kurtosis: f64,
    pub n: usize,
    /// Chi-square(2) upper tail probability.
    pub p_value: f64,
}

impl JbResult {
    pub fn stars(&self) -> usize {
        match self.p_value {
            p if p < 0.01 => 3,
            p if p < 0.05 => 2,
            p if p < 0.10 => 1,
            _ => 0,
        }
    }
}

/// Neumaier-compensated summation.
pub(crate) fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Jarque–Bera normality test with population (denominator `n`) moments.
pub fn jarque_bera(series: &[f64]) -> Result<JbResult> {
    validate(series)?;
    if series.len() < 8 {
        return Err(StatsError::TooShort {
            len: series.len(),
            needed: 8,
        });
    }
    let n = series.len() as f64;
    let mean = compensated_sum(series.iter().copied()) / n;
    let dev: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let m2 = compensated_sum(dev.iter().map(|d| d * d)) / n;
    let m3 = compensated_sum(dev.iter().map(|d| d * d * d)) / n;
    let m4 = compensated_sum(dev.iter().map(|d| (d * d) * (d * d))) / n;
    if m2 <= f64::EPSILON * mean.abs().max(1.0) * 1e-4 {
        return Err(StatsError::ZeroVariance);
    }
    let skewness = m3 / m2.powf(1.5);
    let kurtosis = m4 / (m2 * m2);
    let statistic = n / 6.0 * (skewness * skewness + (kurtosis - 3.0).powi(2) / 4.0);
    Ok(JbResult {
        statistic,
        skewness,
        kurtosis,
        n: series.len(),
        p_value: (-statistic / 2.0).exp(),
    })
}

/// One variable's row in the unit-root table.
#[derive(Debug, Clone)]
pub struct DiagnosticRow {
    pub variable: String,
    pub adf: AdfResult,
    pub jb: JbResult,
}

fn starred(v: f64, stars: usize) -> String {
    format!("{v:.2}{}", "*".repeat(stars))
}

/// Unit-root table as CSV: a `Test` header over the variables, then one
/// `ADF Statistics` row and one `Jarque--Bera` row. Stars mark 1/5/10%.
pub fn unit_root_table_csv(rows: &[DiagnosticRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["Test".to_string()];
    header.extend(rows.iter().map(|r| r.variable.clone()));
    let mut adf = vec!["ADF Statistics".to_string()];
    adf.extend(rows.iter().map(|r| starred(r.adf.statistic, r.adf.stars())));
    let mut jb = vec!["Jarque--Bera".to_string()];
    jb.extend(rows.iter().map(|r| starred(r.jb.statistic, r.jb.stars())));
    for rec in [header, adf, jb] {
        w.write_record(&rec).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn asymptotic_constant_critical_values() {
        let cv = mackinnon_critical_values(Deterministic::Constant, None);
        assert!((cv.one - -3.43).abs() < 0.005);
        assert!((cv.five - -2.86).abs() < 0.005);
        assert!((cv.ten - -2.57).abs() < 0.005);
        for det in [Deterministic::None, Deterministic::Constant, Deterministic::ConstantTrend] {
            for n in [None, Some(50), Some(500)] {
                let cv = mackinnon_critical_values(det, n);
                assert!(cv.one < cv.five && cv.five < cv.ten);
            }
        }
    }

    #[test]
    fn jb_alternating_hand_value() {
        let x: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { -1.0 } else { 1.0 }).collect();
        let r = jarque_bera(&x).unwrap();
        assert_eq!(r.skewness, 0.0);
        assert!((r.kurtosis - 1.0).abs() < 1e-15);
        assert!((r.statistic - 100.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn jb_symmetric_two_point_has_zero_skew() {
        for c in [0.3, 2.0, 17.5] {
            let x: Vec<f64> = (0..40).map(|i| if i < 20 { -c } else { c }).collect();
            assert_eq!(jarque_bera(&x).unwrap().skewness, 0.0);
        }
    }

    #[test]
    fn jb_errors() {
        assert_eq!(jarque_bera(&[1.0; 10]).unwrap_err(), StatsError::ZeroVariance);
        assert!(matches!(jarque_bera(&[1.0, 2.0]), Err(StatsError::TooShort { .. })));
    }

    #[test]
    fn adf_rejects_flat_and_short() {
        let flat = vec![3.0; 100];
        assert_eq!(
            adf_test(&flat, AdfOptions::default()).unwrap_err(),
            StatsError::DegenerateRegressor
        );
        let short: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!(matches!(
            adf_test(&short, AdfOptions::default()),
            Err(StatsError::TooShort { .. })
        ));
    }

    #[test]
    fn select_lag_zero_max() {
        let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.7).sin()).collect();
        assert_eq!(select_lag(&x, Deterministic::Constant, 0, Criterion::Aic).unwrap(), 0);
    }

    #[test]
    fn decisions_match_comparison() {
        let x: Vec<f64> = (0..200).map(|i| ((i * 37 % 101) as f64).sin()).collect();
        let r = adf_test(&x, AdfOptions::default()).unwrap();
        assert_eq!(r.reject.one, r.statistic < r.critical.one);
        assert_eq!(r.reject.five, r.statistic < r.critical.five);
        assert_eq!(r.reject.ten, r.statistic < r.critical.ten);
    }

    #[test]
    fn table_layout() {
        let x: Vec<f64> = (0..200).map(|i| ((i * 37 % 101) as f64).sin()).collect();
        let row = DiagnosticRow {
            variable: "BTCPRC".into(),
            adf: adf_test(&x, AdfOptions::default()).unwrap(),
            jb: jarque_bera(&x).unwrap(),
        };
        let csv = unit_root_table_csv(&[row]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "Test,BTCPRC");
        assert!(lines[1].starts_with("ADF Statistics,"));
        assert!(lines[2].starts_with("Jarque--Bera,"));
    }
}
