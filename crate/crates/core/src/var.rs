//! Vector autoregression estimated by equation-wise least squares, and its
//! moving-average representation.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{IngestError, SeriesPanel};
use crate::linalg::{least_squares, LinalgError};

#[derive(Debug, Error)]
pub enum VarError {
    #[error("insufficient observations: T − p = {effective} must exceed N·p + 1 = {needed}")]
    InsufficientData { effective: usize, needed: usize },
    #[error("lag order must be at least 1")]
    ZeroLag,
    #[error("regressor matrix is rank deficient: {column} is collinear with {with:?}")]
    RankDeficient { column: String, with: Vec<String> },
    #[error(transparent)]
    Panel(#[from] IngestError),
    #[error("invalid model: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, VarError>;

#[derive(Debug, Clone, PartialEq)]
pub struct VarModel {
    pub names: Vec<String>,
    pub p: usize,
    pub intercept: DVector<f64>,
    /// `Φ_1..Φ_p`, each `N × N`; row `i` is the equation for variable `i`.
    pub coefs: Vec<DMatrix<f64>>,
    /// `(T − p) × N` residuals.
    pub residuals: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    /// Standard errors of the lag coefficients, laid out like `coefs`.
    pub std_errors: Vec<DMatrix<f64>>,
}

impl VarModel {
    pub fn n_vars(&self) -> usize {
        self.names.len()
    }

    /// Builds a model from known coefficients (no residuals), e.g. for
    /// simulation or decomposition of a hand-specified system.
    pub fn from_parts(names: Vec<String>, intercept: Vec<f64>, coefs: Vec<DMatrix<f64>>, sigma: DMatrix<f64>) -> Result<Self> {
        let n = names.len();
        if intercept.len() != n
            || sigma.shape() != (n, n)
            || coefs.iter().any(|c| c.shape() != (n, n))
        {
            return Err(VarError::Invalid("inconsistent dimensions".into()));
        }
        if coefs.is_empty() {
            return Err(VarError::ZeroLag);
        }
        Ok(Self {
            p: coefs.len(),
            std_errors: vec![DMatrix::zeros(n, n); coefs.len()],
            names,
            intercept: DVector::from_vec(intercept),
            coefs,
            residuals: DMatrix::zeros(0, n),
            sigma,
        })
    }

    pub fn to_json(&self) -> VarModelJson {
        let rows = |m: &DMatrix<f64>| crate::linalg::to_rows(m);
        VarModelJson {
            names: self.names.clone(),
            p: self.p,
            intercept: self.intercept.iter().copied().collect(),
            coefs: self.coefs.iter().map(rows).collect(),
            sigma: rows(&self.sigma),
        }
    }
}

/// JSON form of a fitted model; matrices are row-major nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarModelJson {
    pub names: Vec<String>,
    pub p: usize,
    pub intercept: Vec<f64>,
    pub coefs: Vec<Vec<Vec<f64>>>,
    pub sigma: Vec<Vec<f64>>,
}

impl VarModelJson {
    pub fn into_model(self) -> Result<VarModel> {
        let m = |r: &Vec<Vec<f64>>| crate::linalg::from_rows(r);
        let coefs = self.coefs.iter().map(m).collect();
        VarModel::from_parts(self.names, self.intercept, coefs, m(&self.sigma))
    }
}

fn regressor_names(names: &[String], p: usize) -> Vec<String> {
    let mut out = vec!["const".to_string()];
    for lag in 1..=p {
        out.extend(names.iter().map(|n| format!("{n}.l{lag}")));
    }
    out
}

/// `[1, y_{t−1}, …, y_{t−p}]` rows for `t` in `start..T`.
fn design(data: &DMatrix<f64>, p: usize, start: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let (t_len, n) = data.shape();
    let rows = t_len - start;
    let x = DMatrix::from_fn(rows, 1 + n * p, |r, c| {
        if c == 0 {
            1.0
        } else {
            let lag = (c - 1) / n + 1;
            let var = (c - 1) % n;
            data[(start + r - lag, var)]
        }
    });
    let y = data.rows(start, rows).into_owned();
    (x, y)
}

pub fn panel_matrix(panel: &SeriesPanel) -> Result<DMatrix<f64>> {
    let rows = panel.to_matrix()?;
    Ok(DMatrix::from_fn(panel.n_rows(), panel.n_vars(), |i, j| rows[i][j]))
}

/// Fits a VAR(p) with intercept by least squares on a complete panel.
pub fn fit_var(panel: &SeriesPanel, p: usize) -> Result<VarModel> {
    fit_var_matrix(&panel_matrix(panel)?, panel.variables().to_vec(), p)
}

pub fn fit_var_matrix(data: &DMatrix<f64>, names: Vec<String>, p: usize) -> Result<VarModel> {
    if p == 0 {
        return Err(VarError::ZeroLag);
    }
    let (t_len, n) = data.shape();
    let effective = t_len.saturating_sub(p);
    let needed = n * p + 1;
    if effective <= needed {
        return Err(VarError::InsufficientData { effective, needed });
    }
    let (x, y) = design(data, p, p);
    let fit = least_squares(&x, &y).map_err(|e| rank_error(&x, &names, p, e))?;

    let resid = fit.resid;
    let rows = resid.nrows() as f64;
    let mut sigma = resid.transpose() * &resid / rows;
    // Exact symmetry; the product is symmetric up to rounding.
    sigma = (&sigma + sigma.transpose()) * 0.5;

    let dof = (resid.nrows() - x.ncols()) as f64;
    let mut coefs = vec![DMatrix::zeros(n, n); p];
    let mut std_errors = vec![DMatrix::zeros(n, n); p];
    for eq in 0..n {
        let s2 = resid.column(eq).norm_squared() / dof;
        for lag in 0..p {
            for var in 0..n {
                let c = 1 + lag * n + var;
                coefs[lag][(eq, var)] = fit.coef[(c, eq)];
                std_errors[lag][(eq, var)] = (s2 * fit.xtx_inv[(c, c)]).sqrt();
            }
        }
    }
    let intercept = DVector::from_fn(n, |i, _| fit.coef[(0, i)]);
    Ok(VarModel {
        names,
        p,
        intercept,
        coefs,
        residuals: resid,
        sigma,
        std_errors,
    })
}

fn rank_error(x: &DMatrix<f64>, names: &[String], p: usize, e: LinalgError) -> VarError {
    let reg_names = regressor_names(names, p);
    let LinalgError::Collinear { column } = e else {
        return VarError::Invalid(e.to_string());
    };
    // Express the offending column through the earlier ones to name its partners.
    let mut with = Vec::new();
    if column > 0 {
        let earlier = x.columns(0, column).into_owned();
        let target = x.column(column).into_owned();
        let target = DMatrix::from_column_slice(target.len(), 1, target.as_slice());
        if let Ok(fit) = least_squares(&earlier, &target) {
            for (j, name) in reg_names.iter().enumerate().take(column) {
                if fit.coef[(j, 0)].abs() > 1e-8 {
                    with.push(name.clone());
                }
            }
        }
    }
    VarError::RankDeficient {
        column: reg_names[column].clone(),
        with,
    }
}

/// Lag order in `1..=max_p` minimizing BIC on a common estimation sample.
pub fn select_order(panel: &SeriesPanel, max_p: usize) -> Result<usize> {
    let data = panel_matrix(panel)?;
    let (t_len, n) = data.shape();
    if max_p == 0 {
        return Err(VarError::ZeroLag);
    }
    let mut best = (f64::INFINITY, 1usize);
    for p in 1..=max_p {
        let effective = t_len.saturating_sub(max_p);
        if effective <= n * p + 1 {
            break;
        }
        let (x, y) = {
            let (x, y) = design(&data, max_p, max_p);
            // Keep the constant plus the first p lag blocks.
            (x.columns(0, 1 + n * p).into_owned(), y)
        };
        let fit = least_squares(&x, &y).map_err(|e| rank_error(&x, panel.variables(), p, e))?;
        let te = effective as f64;
        let sigma = fit.resid.transpose() * &fit.resid / te;
        let det = sigma.determinant();
        if det <= 0.0 {
            continue;
        }
        let k = (n * n * p + n) as f64;
        let bic = det.ln() + k * te.ln() / te;
        if bic < best.0 {
            best = (bic, p);
        }
    }
    Ok(best.1)
}

/// `A_0 = I`, `A_h = Σ_{j=1..min(h,p)} Φ_j A_{h−j}` for `h < horizon`.
pub fn ma_coefficients(model: &VarModel, horizon: usize) -> Vec<DMatrix<f64>> {
    ma_from_coefs(&model.coefs, model.n_vars(), horizon)
}

pub fn ma_from_coefs(coefs: &[DMatrix<f64>], n: usize, horizon: usize) -> Vec<DMatrix<f64>> {
    let mut out: Vec<DMatrix<f64>> = Vec::with_capacity(horizon);
    if horizon == 0 {
        return out;
    }
    out.push(DMatrix::identity(n, n));
    for h in 1..horizon {
        let mut a = DMatrix::zeros(n, n);
        for (j, phi) in coefs.iter().enumerate().take(h) {
            a += phi * &out[h - j - 1];
        }
        out.push(a);
    }
    out
}

/// `Np × Np` companion matrix of the lag polynomial.
pub fn companion(coefs: &[DMatrix<f64>], n: usize) -> DMatrix<f64> {
    let p = coefs.len();
    let mut c = DMatrix::zeros(n * p, n * p);
    for (j, phi) in coefs.iter().enumerate() {
        c.view_mut((0, j * n), (n, n)).copy_from(phi);
    }
    for i in n..n * p {
        c[(i, i - n)] = 1.0;
    }
    c
}

/// Largest eigenvalue modulus of the companion matrix; a value ≥ 1 means
/// the fitted system is not stable and is logged as a warning.
pub fn spectral_radius(model: &VarModel) -> f64 {
    let c = companion(&model.coefs, model.n_vars());
    let r = c
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if r >= 1.0 {
        warn!("VAR spectral radius {r:.4} ≥ 1: system is not stable");
    }
    r
}
