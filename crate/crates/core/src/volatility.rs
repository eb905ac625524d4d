//! Univariate GARCH(1,1) and two-stage DCC(1,1) estimation by Gaussian
//! quasi-maximum likelihood.
//!
//! GARCH recursion: `h_t = ω + α·ε²_{t−1} + β·h_{t−1}`, `h_1` = sample variance.
//!
//! DCC recursion on standardized residuals `z_t`:
//! `Q_t = (1 − a − b)·Q̄ + a·z_{t−1}z'_{t−1} + b·Q_{t−1}`, `Q_1 = Q̄`,
//! `R_t = diag(Q_t)^{−1/2} Q_t diag(Q_t)^{−1/2}`, and `H_t = D_t R_t D_t`
//! with `D_t = diag(√h_{i,t})`.
//!
//! Both stages optimize in an unconstrained space: `ω = exp(u₀)` and the
//! persistence pair through [`crate::optim::persistence_pair`].

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optim::{bfgs, persistence_pair, persistence_pair_inv, BfgsOptions, Minimum};

/// Upper bound on `α + β` and `a + b`.
pub const PERSISTENCE_CAP: f64 = 1.0 - 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum VolatilityError {
    #[error("series too short: {len} observations, need at least {needed}")]
    TooShort { len: usize, needed: usize },
    #[error("zero variance input")]
    ZeroVariance,
    #[error("non-finite input at index {0}")]
    NonFinite(usize),
    #[error("no convergence after {iterations} iterations: last iterate {last:?}, gradient norm {grad_norm:e}")]
    NonConvergence {
        iterations: usize,
        last: Vec<f64>,
        grad_norm: f64,
    },
    #[error("unconditional correlation matrix is not positive definite")]
    NotPsd,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

pub type Result<T> = std::result::Result<T, VolatilityError>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimTrace {
    pub iterations: usize,
    pub grad_norm: f64,
    /// Log-likelihood after each accepted iteration.
    pub loglik_path: Vec<f64>,
}

impl OptimTrace {
    fn from_min(m: &Minimum, scale: f64) -> Self {
        Self {
            iterations: m.iterations,
            grad_norm: m.grad_norm,
            loglik_path: m.history.iter().map(|v| -v * scale).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GarchParams {
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    pub loglik: f64,
    /// Conditional variances `h_1..h_n`.
    pub variances: Vec<f64>,
    pub trace: OptimTrace,
}

impl GarchParams {
    pub fn persistence(&self) -> f64 {
        self.alpha + self.beta
    }

    pub fn unconditional_variance(&self) -> f64 {
        self.omega / (1.0 - self.alpha - self.beta)
    }

    pub fn standardized(&self, series: &[f64]) -> Vec<f64> {
        series
            .iter()
            .zip(&self.variances)
            .map(|(e, h)| e / h.sqrt())
            .collect()
    }
}

fn check_series(series: &[f64], min_len: usize) -> Result<f64> {
    if let Some(i) = series.iter().position(|v| !v.is_finite()) {
        return Err(VolatilityError::NonFinite(i));
    }
    if series.len() < min_len {
        return Err(VolatilityError::TooShort {
            len: series.len(),
            needed: min_len,
        });
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if !(var > 0.0) {
        return Err(VolatilityError::ZeroVariance);
    }
    Ok(var)
}

/// Conditional variance path for fixed parameters.
pub fn garch_variances(series: &[f64], omega: f64, alpha: f64, beta: f64, h1: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(series.len());
    if series.is_empty() {
        return h;
    }
    h.push(h1);
    for t in 1..series.len() {
        let prev = h[t - 1];
        h.push(omega + alpha * series[t - 1] * series[t - 1] + beta * prev);
    }
    h
}

/// Gaussian negative log-likelihood (full, including `ln 2π`) and its
/// gradient in `(ω, α, β)`. `h_1` is the sample second moment about zero
/// (the input is taken as demeaned).
pub fn garch_nll(series: &[f64], omega: f64, alpha: f64, beta: f64) -> (f64, [f64; 3]) {
    let n = series.len() as f64;
    let h1 = series.iter().map(|e| e * e).sum::<f64>() / n;
    garch_nll_with_h1(series, omega, alpha, beta, h1)
}

fn garch_nll_with_h1(series: &[f64], omega: f64, alpha: f64, beta: f64, h1: f64) -> (f64, [f64; 3]) {
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    let mut h = h1;
    let mut dh = [0.0f64; 3];
    let mut nll = 0.0;
    let mut grad = [0.0f64; 3];
    for (t, &e) in series.iter().enumerate() {
        if t > 0 {
            let ep = series[t - 1];
            let hp = h;
            h = omega + alpha * ep * ep + beta * hp;
            dh = [1.0 + beta * dh[0], ep * ep + beta * dh[1], hp + beta * dh[2]];
        }
        if !(h > 0.0) {
            return (f64::INFINITY, [f64::NAN; 3]);
        }
        let e2 = e * e;
        nll += 0.5 * (ln2pi + h.ln() + e2 / h);
        let w = 0.5 * (1.0 / h - e2 / (h * h));
        for k in 0..3 {
            grad[k] += w * dh[k];
        }
    }
    (nll, grad)
}

/// Fits GARCH(1,1) to a demeaned series by quasi-Newton QMLE.
pub fn fit_garch11(series: &[f64]) -> Result<GarchParams> {
    fit_garch11_with(series, BfgsOptions::default())
}

pub fn fit_garch11_with(series: &[f64], opts: BfgsOptions) -> Result<GarchParams> {
    check_series(series, 100)?;
    let n = series.len() as f64;
    let h1 = series.iter().map(|e| e * e).sum::<f64>() / n;

    let objective = |u: &DVector<f64>| -> (f64, DVector<f64>) {
        let omega = u[0].exp();
        let ((alpha, beta), jac) = persistence_pair(u[1], u[2], PERSISTENCE_CAP);
        let (v, g) = garch_nll_with_h1(series, omega, alpha, beta, h1);
        if !v.is_finite() {
            return (f64::INFINITY, DVector::zeros(3));
        }
        let gu = DVector::from_vec(vec![
            g[0] * omega,
            g[1] * jac[0][0] + g[2] * jac[1][0],
            g[1] * jac[0][1] + g[2] * jac[1][1],
        ]);
        (v / n, gu / n)
    };

    // A few starting persistences; the best by likelihood seeds BFGS.
    let starts = [(0.05, 0.90), (0.10, 0.80), (0.03, 0.95), (0.15, 0.60)];
    let x0 = starts
        .iter()
        .map(|&(a, b)| {
            let (u1, u2) = persistence_pair_inv(a, b, PERSISTENCE_CAP);
            DVector::from_vec(vec![(h1 * (1.0 - a - b)).ln(), u1, u2])
        })
        .min_by(|x, y| objective(x).0.total_cmp(&objective(y).0))
        .expect("nonempty starts");

    let m = bfgs(objective, x0, opts);
    let omega = m.x[0].exp();
    let ((alpha, beta), _) = persistence_pair(m.x[1], m.x[2], PERSISTENCE_CAP);
    if !m.converged {
        return Err(VolatilityError::NonConvergence {
            iterations: m.iterations,
            last: vec![omega, alpha, beta],
            grad_norm: m.grad_norm,
        });
    }
    Ok(GarchParams {
        omega,
        alpha,
        beta,
        loglik: -m.value * n,
        variances: garch_variances(series, omega, alpha, beta, h1),
        trace: OptimTrace::from_min(&m, n),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DccFit {
    pub a: f64,
    pub b: f64,
    #[serde(with = "matrix_rows")]
    pub qbar: DMatrix<f64>,
    #[serde(skip)]
    pub q_path: Vec<DMatrix<f64>>,
    #[serde(skip)]
    pub r_path: Vec<DMatrix<f64>>,
    /// Stage-two quasi log-likelihood `−½ Σ (ln|R_t| + z'R_t⁻¹z − z'z)`.
    pub loglik: f64,
    pub trace: OptimTrace,
}

mod matrix_rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        crate::linalg::to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        Ok(crate::linalg::from_rows(&rows))
    }
}

/// Sample correlation of the columns of `z`.
pub fn sample_correlation(z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (t_len, n) = z.shape();
    let means: Vec<f64> = (0..n).map(|j| z.column(j).mean()).collect();
    let mut cov = DMatrix::<f64>::zeros(n, n);
    for t in 0..t_len {
        for i in 0..n {
            let di = z[(t, i)] - means[i];
            for j in 0..=i {
                cov[(i, j)] += di * (z[(t, j)] - means[j]);
            }
        }
    }
    let sd: Vec<f64> = (0..n).map(|i| cov[(i, i)].sqrt()).collect();
    if sd.iter().any(|s| !(*s > 0.0)) {
        return Err(VolatilityError::ZeroVariance);
    }
    let mut c = DMatrix::identity(n, n);
    for i in 0..n {
        for j in 0..i {
            let v = (cov[(i, j)] / (sd[i] * sd[j])).clamp(-1.0, 1.0);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    Ok(c)
}

fn normalize_q(q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = q.nrows();
    let d: Vec<f64> = (0..n).map(|i| 1.0 / q[(i, i)].sqrt()).collect();
    let mut r = DMatrix::from_fn(n, n, |i, j| q[(i, j)] * d[i] * d[j]);
    for i in 0..n {
        r[(i, i)] = 1.0;
        for j in 0..i {
            let v = 0.5 * (r[(i, j)] + r[(j, i)]);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    r
}

/// `Q_t` and `R_t` paths for fixed `(a, b)`.
pub fn dcc_filter(z: &DMatrix<f64>, qbar: &DMatrix<f64>, a: f64, b: f64) -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
    let t_len = z.nrows();
    let mut qs = Vec::with_capacity(t_len);
    let mut rs = Vec::with_capacity(t_len);
    let mut q = qbar.clone();
    for t in 0..t_len {
        if t > 0 {
            let zp = z.row(t - 1).transpose();
            q = qbar * (1.0 - a - b) + &zp * zp.transpose() * a + &q * b;
        }
        rs.push(normalize_q(&q));
        qs.push(q.clone());
    }
    (qs, rs)
}

/// Stage-two negative quasi log-likelihood `½ Σ_t (ln|R_t| + z'R_t⁻¹z − z'z)`
/// and its gradient in `(a, b)`.
pub fn dcc_nll(z: &DMatrix<f64>, qbar: &DMatrix<f64>, a: f64, b: f64) -> (f64, [f64; 2]) {
    let (t_len, n) = z.shape();
    let mut q = qbar.clone();
    let mut dqa = DMatrix::<f64>::zeros(n, n);
    let mut dqb = DMatrix::<f64>::zeros(n, n);
    let mut nll = 0.0;
    let mut grad = [0.0f64; 2];
    for t in 0..t_len {
        if t > 0 {
            let zp = z.row(t - 1).transpose();
            let outer = &zp * zp.transpose();
            let q_prev = q.clone();
            q = qbar * (1.0 - a - b) + &outer * a + &q_prev * b;
            dqa = -qbar + &outer + &dqa * b;
            dqb = -qbar + &q_prev + &dqb * b;
        }
        let d: Vec<f64> = (0..n).map(|i| 1.0 / q[(i, i)].sqrt()).collect();
        if d.iter().any(|v| !v.is_finite()) {
            return (f64::INFINITY, [f64::NAN; 2]);
        }
        let r = DMatrix::from_fn(n, n, |i, j| q[(i, j)] * d[i] * d[j]);
        let Some(chol) = r.clone().cholesky() else {
            return (f64::INFINITY, [f64::NAN; 2]);
        };
        let zt = z.row(t).transpose();
        let logdet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let w = chol.solve(&zt);
        let rinv = chol.inverse();
        nll += 0.5 * (logdet + zt.dot(&w) - zt.dot(&zt));

        for (k, dq) in [&dqa, &dqb].into_iter().enumerate() {
            // dR = dD Q D + D dQ D + D Q dD, with dD_ii = −½ q_ii^{−3/2} dq_ii.
            let dd: Vec<f64> = (0..n).map(|i| -0.5 * d[i].powi(3) * dq[(i, i)]).collect();
            let dr = DMatrix::from_fn(n, n, |i, j| {
                dd[i] * q[(i, j)] * d[j] + d[i] * dq[(i, j)] * d[j] + d[i] * q[(i, j)] * dd[j]
            });
            let tr = (&rinv * &dr).trace();
            let quad = w.dot(&(&dr * &w));
            grad[k] += 0.5 * (tr - quad);
        }
    }
    (nll, grad)
}

/// Estimates `(a, b)` from GARCH-standardized residuals (`T × N`).
pub fn fit_dcc(z: &DMatrix<f64>) -> Result<DccFit> {
    let (t_len, n) = z.shape();
    if let Some(i) = z.iter().position(|v| !v.is_finite()) {
        return Err(VolatilityError::NonFinite(i));
    }
    if t_len < 10 || n == 0 {
        return Err(VolatilityError::TooShort {
            len: t_len,
            needed: 10,
        });
    }
    let qbar = sample_correlation(z)?;
    if qbar.clone().cholesky().is_none() {
        return Err(VolatilityError::NotPsd);
    }
    let tf = t_len as f64;

    if n == 1 {
        // A scalar correlation is identically one; the likelihood is flat in (a, b).
        let (q_path, r_path) = dcc_filter(z, &qbar, 0.0, 0.0);
        return Ok(DccFit {
            a: 0.0,
            b: 0.0,
            qbar,
            q_path,
            r_path,
            loglik: 0.0,
            trace: OptimTrace {
                iterations: 0,
                grad_norm: 0.0,
                loglik_path: vec![0.0],
            },
        });
    }

    let objective = |u: &DVector<f64>| -> (f64, DVector<f64>) {
        let ((a, b), jac) = persistence_pair(u[0], u[1], PERSISTENCE_CAP);
        let (v, g) = dcc_nll(z, &qbar, a, b);
        if !v.is_finite() {
            return (f64::INFINITY, DVector::zeros(2));
        }
        let gu = DVector::from_vec(vec![
            g[0] * jac[0][0] + g[1] * jac[1][0],
            g[0] * jac[0][1] + g[1] * jac[1][1],
        ]);
        (v / tf, gu / tf)
    };
    let starts = [(0.02, 0.95), (0.05, 0.90), (0.10, 0.80), (0.02, 0.50)];
    let x0 = starts
        .iter()
        .map(|&(a, b)| {
            let (u, v) = persistence_pair_inv(a, b, PERSISTENCE_CAP);
            DVector::from_vec(vec![u, v])
        })
        .min_by(|x, y| objective(x).0.total_cmp(&objective(y).0))
        .expect("nonempty starts");
    let m = bfgs(objective, x0, BfgsOptions::default());
    let ((a, b), _) = persistence_pair(m.x[0], m.x[1], PERSISTENCE_CAP);
    if !m.converged {
        return Err(VolatilityError::NonConvergence {
            iterations: m.iterations,
            last: vec![a, b],
            grad_norm: m.grad_norm,
        });
    }
    let (q_path, r_path) = dcc_filter(z, &qbar, a, b);
    Ok(DccFit {
        a,
        b,
        qbar,
        q_path,
        r_path,
        loglik: -m.value * tf,
        trace: OptimTrace::from_min(&m, tf),
    })
}

/// `H_t = D_t R_t D_t` for each day.
pub fn conditional_covariances(garch: &[GarchParams], dcc: &DccFit) -> Result<Vec<DMatrix<f64>>> {
    let n = garch.len();
    let t_len = dcc.r_path.len();
    if dcc.qbar.nrows() != n {
        return Err(VolatilityError::Dimension(format!(
            "{n} GARCH fits for a {0}×{0} correlation",
            dcc.qbar.nrows()
        )));
    }
    if let Some(g) = garch.iter().find(|g| g.variances.len() != t_len) {
        return Err(VolatilityError::Dimension(format!(
            "GARCH path of length {} for {t_len} correlation matrices",
            g.variances.len()
        )));
    }
    Ok((0..t_len)
        .map(|t| {
            let sd: Vec<f64> = garch.iter().map(|g| g.variances[t].sqrt()).collect();
            let r = &dcc.r_path[t];
            DMatrix::from_fn(n, n, |i, j| sd[i] * r[(i, j)] * sd[j])
        })
        .collect())
}

/// Both stages on a `T × N` residual matrix.
#[derive(Debug, Clone)]
pub struct DccGarchFit {
    pub garch: Vec<GarchParams>,
    pub dcc: DccFit,
    pub covariances: Vec<DMatrix<f64>>,
}

pub fn fit_dcc_garch(residuals: &DMatrix<f64>) -> Result<DccGarchFit> {
    let (t_len, n) = residuals.shape();
    let columns: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let c: Vec<f64> = residuals.column(j).iter().copied().collect();
            let mean = c.iter().sum::<f64>() / t_len as f64;
            c.into_iter().map(|v| v - mean).collect()
        })
        .collect();
    // Independent per-series fits; results collected in column order.
    let garch = columns
        .par_iter()
        .map(|c| fit_garch11(c))
        .collect::<Result<Vec<_>>>()?;
    let z = DMatrix::from_fn(t_len, n, |t, j| columns[j][t] / garch[j].variances[t].sqrt());
    let dcc = fit_dcc(&z)?;
    let covariances = conditional_covariances(&garch, &dcc)?;
    Ok(DccGarchFit {
        garch,
        dcc,
        covariances,
    })
}

/// JSON export of a fit: parameters, likelihoods and optionally the
/// `H_t` path flattened row-major with a `(T, N)` header.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DccGarchJson {
    pub names: Vec<String>,
    pub garch: Vec<GarchSummary>,
    pub dcc: DccSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub covariance_path: Option<FlatPath>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GarchSummary {
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    pub loglik: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DccSummary {
    pub a: f64,
    pub b: f64,
    pub qbar: Vec<Vec<f64>>,
    pub loglik: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlatPath {
    pub t: usize,
    pub n: usize,
    pub values: Vec<f64>,
}

impl DccGarchFit {
    pub fn to_json(&self, names: &[String], with_path: bool) -> DccGarchJson {
        let n = self.dcc.qbar.nrows();
        DccGarchJson {
            names: names.to_vec(),
            garch: self
                .garch
                .iter()
                .map(|g| GarchSummary {
                    omega: g.omega,
                    alpha: g.alpha,
                    beta: g.beta,
                    loglik: g.loglik,
                })
                .collect(),
            dcc: DccSummary {
                a: self.dcc.a,
                b: self.dcc.b,
                qbar: crate::linalg::to_rows(&self.dcc.qbar),
                loglik: self.dcc.loglik,
            },
            covariance_path: with_path.then(|| FlatPath {
                t: self.covariances.len(),
                n,
                values: self
                    .covariances
                    .iter()
                    .flat_map(|h| (0..n).flat_map(move |i| (0..n).map(move |j| h[(i, j)])))
                    .collect(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nll_matches_hand_recursion() {
        let e = [0.5, -1.0, 2.0, 0.1, -0.3];
        let (omega, alpha, beta) = (0.2, 0.1, 0.7);
        let h1 = e.iter().map(|v| v * v).sum::<f64>() / 5.0; // 1.07
        let h2 = omega + alpha * 0.25 + beta * h1;
        let h3 = omega + alpha * 1.0 + beta * h2;
        let h4 = omega + alpha * 4.0 + beta * h3;
        let h5 = omega + alpha * 0.01 + beta * h4;
        let ln2pi = (2.0 * std::f64::consts::PI).ln();
        let expected: f64 = [(h1, 0.5), (h2, -1.0), (h3, 2.0), (h4, 0.1), (h5, -0.3)]
            .iter()
            .map(|&(h, x): &(f64, f64)| 0.5 * (ln2pi + h.ln() + x * x / h))
            .sum();
        let (nll, _) = garch_nll(&e, omega, alpha, beta);
        assert!((nll - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_rejected() {
        assert_eq!(fit_garch11(&[0.0; 200]).unwrap_err(), VolatilityError::ZeroVariance);
        assert!(matches!(fit_garch11(&[1.0, -1.0]), Err(VolatilityError::TooShort { .. })));
    }

    #[test]
    fn dcc_with_zero_dynamics_is_constant() {
        let z = crate::simulate::simulate_dcc(
            &DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 1.0]),
            0.05,
            0.9,
            300,
            1,
        );
        let qbar = sample_correlation(&z).unwrap();
        let (_, rs) = dcc_filter(&z, &qbar, 0.0, 0.0);
        for r in &rs {
            assert!((r - &qbar).amax() < 1e-15);
        }
    }

    #[test]
    fn scalar_dcc_is_unit() {
        let z = DMatrix::from_fn(50, 1, |t, _| ((t * 7 % 5) as f64) - 2.0);
        let fit = fit_dcc(&z).unwrap();
        assert!(fit.r_path.iter().all(|r| r[(0, 0)] == 1.0));
        let (_, rs) = dcc_filter(&z, &fit.qbar, 0.3, 0.6);
        assert!(rs.iter().all(|r| r[(0, 0)] == 1.0));
    }

    #[test]
    fn hand_covariance() {
        let g = |h: f64| GarchParams {
            omega: 0.0,
            alpha: 0.0,
            beta: 0.0,
            loglik: 0.0,
            variances: vec![h],
            trace: OptimTrace {
                iterations: 0,
                grad_norm: 0.0,
                loglik_path: vec![],
            },
        };
        let r = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let dcc = DccFit {
            a: 0.0,
            b: 0.0,
            qbar: r.clone(),
            q_path: vec![r.clone()],
            r_path: vec![r],
            loglik: 0.0,
            trace: OptimTrace {
                iterations: 0,
                grad_norm: 0.0,
                loglik_path: vec![],
            },
        };
        let h = conditional_covariances(&[g(4.0), g(9.0)], &dcc).unwrap();
        assert_eq!(h[0], DMatrix::from_row_slice(2, 2, &[4.0, 3.0, 3.0, 9.0]));
        assert!(matches!(
            conditional_covariances(&[g(4.0)], &dcc),
            Err(VolatilityError::Dimension(_))
        ));
    }
}
