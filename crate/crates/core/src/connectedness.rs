//! Generalized variance-decomposition connectedness.
//!
//! `θ_ij` is the share of variable `i`'s `H`-step forecast-error variance
//! attributable to shocks in variable `j`:
//!
//! ```text
//! θ_ij = σ_jj⁻¹ Σ_{h<H} ((A_h Σ)_ij)²  /  Σ_{h<H} (A_h Σ A_h')_ii
//! ```
//!
//! Rows are then normalized to sum to one. Row `i` of `θ̃` is what `i`
//! receives; column `j` is what `j` transmits.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::NaiveDate;
use log::warn;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::var::{ma_coefficients, spectral_radius, VarModel};

#[derive(Debug, Error, PartialEq)]
pub enum ConnectednessError {
    #[error("zero own variance for variable {0}")]
    ZeroVariance(usize),
    #[error("zero forecast-error variance for variable {0}")]
    ZeroDenominator(usize),
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("covariance matrix is not symmetric")]
    NotSymmetric,
    #[error("row {row} sums to {sum}, expected 1")]
    NotRowStochastic { row: usize, sum: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("covariance for {date} is not positive definite")]
    NotPositiveDefinite { date: NaiveDate },
}

pub type Result<T> = std::result::Result<T, ConnectednessError>;

/// Row-normalized generalized FEVD.
pub fn gfevd(ma: &[DMatrix<f64>], sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if ma.is_empty() {
        return Err(ConnectednessError::ZeroHorizon);
    }
    let n = sigma.nrows();
    if !sigma.is_square() || ma.iter().any(|a| a.shape() != (n, n)) {
        return Err(ConnectednessError::Dimension(format!(
            "Σ is {}×{}, MA matrices must match",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    if !crate::linalg::is_symmetric(sigma, 1e-12 * sigma.amax().max(1.0)) {
        return Err(ConnectednessError::NotSymmetric);
    }
    if let Some(j) = (0..n).find(|&j| !(sigma[(j, j)] > 0.0)) {
        return Err(ConnectednessError::ZeroVariance(j));
    }

    let mut num = DMatrix::<f64>::zeros(n, n);
    let mut den = vec![0.0f64; n];
    for a in ma {
        let a_sigma = a * sigma;
        for i in 0..n {
            for j in 0..n {
                num[(i, j)] += a_sigma[(i, j)].powi(2);
            }
            // (A Σ A')_ii = row_i(AΣ) · row_i(A)
            den[i] += (0..n).map(|k| a_sigma[(i, k)] * a[(i, k)]).sum::<f64>();
        }
    }
    let mut theta = DMatrix::zeros(n, n);
    for i in 0..n {
        if !(den[i] > 0.0) {
            return Err(ConnectednessError::ZeroDenominator(i));
        }
        for j in 0..n {
            theta[(i, j)] = num[(i, j)] / sigma[(j, j)] / den[i];
        }
        let row_sum: f64 = theta.row(i).sum();
        for j in 0..n {
            theta[(i, j)] /= row_sum;
        }
    }
    Ok(theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TciVariant {
    /// `100/N · Σ FROM_i`
    #[default]
    Standard,
    /// `100/(N−1) · Σ FROM_i`
    Corrected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectednessTable {
    pub names: Vec<String>,
    /// Row-stochastic, fractions.
    pub theta: DMatrix<f64>,
    pub to: Vec<f64>,
    pub from: Vec<f64>,
    pub net: Vec<f64>,
    /// `NPDC_ij = θ̃_ji − θ̃_ij`; positive means `i` transmits to `j` on net.
    pub npdc: DMatrix<f64>,
    /// Percent.
    pub tci: f64,
    pub date: Option<NaiveDate>,
}

pub const ROW_SUM_TOL: f64 = 1e-8;

pub fn directional_measures(theta: &DMatrix<f64>, names: &[String], variant: TciVariant) -> Result<ConnectednessTable> {
    let n = theta.nrows();
    if !theta.is_square() || names.len() != n {
        return Err(ConnectednessError::Dimension(format!(
            "{}×{} matrix with {} names",
            theta.nrows(),
            theta.ncols(),
            names.len()
        )));
    }
    for i in 0..n {
        let sum: f64 = theta.row(i).sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(ConnectednessError::NotRowStochastic { row: i, sum });
        }
    }
    let from: Vec<f64> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i).map(|j| theta[(i, j)]).sum())
        .collect();
    let to: Vec<f64> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i).map(|j| theta[(j, i)]).sum())
        .collect();
    let net = to.iter().zip(&from).map(|(t, f)| t - f).collect();
    let npdc = DMatrix::from_fn(n, n, |i, j| theta[(j, i)] - theta[(i, j)]);
    let denom = match variant {
        TciVariant::Standard => n as f64,
        TciVariant::Corrected => (n.max(2) - 1) as f64,
    };
    let tci = 100.0 * from.iter().sum::<f64>() / denom;
    Ok(ConnectednessTable {
        names: names.to_vec(),
        theta: theta.clone(),
        to,
        from,
        net,
        npdc,
        tci,
        date: None,
    })
}

/// Full-sample table from a fitted VAR and its residual covariance.
pub fn static_connectedness(model: &VarModel, horizon: usize, variant: TciVariant) -> Result<ConnectednessTable> {
    if horizon == 0 {
        return Err(ConnectednessError::ZeroHorizon);
    }
    let theta = gfevd(&ma_coefficients(model, horizon), &model.sigma)?;
    directional_measures(&theta, &model.names, variant)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NonPdPolicy {
    #[default]
    Skip,
    Abort,
}

#[derive(Debug, Clone)]
pub struct DynamicConnectedness {
    pub tables: Vec<ConnectednessTable>,
    pub skipped: Vec<NaiveDate>,
}

/// One table per day, holding the VAR dynamics fixed and replacing Σ by
/// each day's conditional covariance `H_t`.
pub fn dynamic_connectedness(
    model: &VarModel,
    covariances: &[DMatrix<f64>],
    dates: &[NaiveDate],
    horizon: usize,
    variant: TciVariant,
    policy: NonPdPolicy,
) -> Result<DynamicConnectedness> {
    if horizon == 0 {
        return Err(ConnectednessError::ZeroHorizon);
    }
    if covariances.len() != dates.len() {
        return Err(ConnectednessError::Dimension(format!(
            "{} covariance matrices for {} dates",
            covariances.len(),
            dates.len()
        )));
    }
    let radius = spectral_radius(model);
    if radius >= 1.0 {
        warn!("dynamic connectedness on an unstable VAR (spectral radius {radius:.4})");
    }
    let ma = ma_coefficients(model, horizon);
    let results: Vec<Result<Option<ConnectednessTable>>> = covariances
        .par_iter()
        .zip(dates.par_iter())
        .map(|(h, &date)| {
            if !crate::linalg::is_positive_definite(h) {
                return match policy {
                    NonPdPolicy::Skip => Ok(None),
                    NonPdPolicy::Abort => Err(ConnectednessError::NotPositiveDefinite { date }),
                };
            }
            let theta = gfevd(&ma, h)?;
            let mut t = directional_measures(&theta, &model.names, variant)?;
            t.date = Some(date);
            Ok(Some(t))
        })
        .collect();

    let mut out = DynamicConnectedness {
        tables: Vec::with_capacity(dates.len()),
        skipped: Vec::new(),
    };
    for (r, &date) in results.into_iter().zip(dates) {
        match r? {
            Some(t) => out.tables.push(t),
            None => {
                warn!("covariance for {date} is not positive definite; day skipped");
                out.skipped.push(date);
            }
        }
    }
    Ok(out)
}

impl ConnectednessTable {
    /// Percent table with FROM column, TO/NET rows and a TCI footer.
    pub fn to_csv(&self) -> String {
        let n = self.names.len();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![String::new()];
        header.extend(self.names.iter().cloned());
        header.push("FROM".into());
        w.write_record(&header).expect("in-memory csv");
        let pct = |v: f64| format!("{:.6}", 100.0 * v);
        for i in 0..n {
            let mut row = vec![self.names[i].clone()];
            row.extend((0..n).map(|j| pct(self.theta[(i, j)])));
            row.push(pct(self.from[i]));
            w.write_record(&row).expect("in-memory csv");
        }
        for (label, values) in [("TO", &self.to), ("NET", &self.net)] {
            let mut row = vec![label.to_string()];
            row.extend(values.iter().map(|v| pct(*v)));
            row.push(String::new());
            w.write_record(&row).expect("in-memory csv");
        }
        let mut row = vec!["TCI".to_string(), format!("{:.6}", self.tci)];
        row.extend(std::iter::repeat_n(String::new(), n));
        w.write_record(&row).expect("in-memory csv");
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DailyConnectedness {
    pub date: NaiveDate,
    pub tci: f64,
    pub net: BTreeMap<String, f64>,
}

pub fn dynamic_series(tables: &[ConnectednessTable]) -> Vec<DailyConnectedness> {
    tables
        .iter()
        .filter_map(|t| {
            Some(DailyConnectedness {
                date: t.date?,
                tci: t.tci,
                net: t.names.iter().cloned().zip(t.net.iter().copied()).collect(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NetworkMode {
    NetPairwise,
    Gross,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NetworkNode {
    pub name: String,
    pub net: f64,
    /// `transmitter` when NET > 0, `receiver` when NET < 0, else `neutral`.
    pub role: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NetworkEdge {
    pub from: String,
    pub to: String,
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NetworkGraph {
    pub mode: NetworkMode,
    pub threshold: f64,
    pub nodes: Vec<NetworkNode>,
    pub edges: Vec<NetworkEdge>,
}

/// Linear-interpolated quantile of a nonempty sample.
fn quantile(values: &mut [f64], q: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let pos = q * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    values[lo] + (values[hi] - values[lo]) * (pos - lo as f64)
}

/// Default edge threshold: the 75th percentile of the candidate edge weights.
pub fn default_threshold(table: &ConnectednessTable, mode: NetworkMode) -> f64 {
    let mut w = candidate_weights(table, mode);
    if w.is_empty() {
        0.0
    } else {
        quantile(&mut w, 0.75)
    }
}

fn candidate_weights(table: &ConnectednessTable, mode: NetworkMode) -> Vec<f64> {
    let n = table.names.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            match mode {
                NetworkMode::Gross => out.push(table.theta[(i, j)]),
                NetworkMode::NetPairwise if table.npdc[(i, j)] > 0.0 => out.push(table.npdc[(i, j)]),
                NetworkMode::NetPairwise => {}
            }
        }
    }
    out
}

/// Directed shock-transmission graph. In gross mode an edge `j → i`
/// carries `θ̃_ij`; in net mode an edge `i → j` carries `NPDC_ij > 0`.
/// Only weights strictly above `threshold` are kept.
pub fn export_network(table: &ConnectednessTable, threshold: Option<f64>, mode: NetworkMode) -> NetworkGraph {
    let threshold = threshold.unwrap_or_else(|| default_threshold(table, mode));
    let n = table.names.len();
    let nodes = (0..n)
        .map(|i| NetworkNode {
            name: table.names[i].clone(),
            net: table.net[i],
            role: match table.net[i] {
                v if v > 0.0 => "transmitter",
                v if v < 0.0 => "receiver",
                _ => "neutral",
            }
            .into(),
        })
        .collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (from, to, weight) = match mode {
                NetworkMode::Gross => (j, i, table.theta[(i, j)]),
                NetworkMode::NetPairwise => (i, j, table.npdc[(i, j)]),
            };
            if weight > threshold {
                edges.push(NetworkEdge {
                    from: table.names[from].clone(),
                    to: table.names[to].clone(),
                    weight,
                });
            }
        }
    }
    NetworkGraph {
        mode,
        threshold,
        nodes,
        edges,
    }
}

impl NetworkGraph {
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph connectedness {\n  rankdir=LR;\n");
        for node in &self.nodes {
            let color = match node.role.as_str() {
                "transmitter" => "tomato",
                "receiver" => "lightblue",
                _ => "gray",
            };
            let _ = writeln!(
                s,
                "  \"{}\" [style=filled, fillcolor={color}, net=\"{:.6}\"];",
                node.name, node.net
            );
        }
        for e in &self.edges {
            let _ = writeln!(
                s,
                "  \"{}\" -> \"{}\" [weight=\"{:.6}\", penwidth={:.3}];",
                e.from,
                e.to,
                e.weight,
                1.0 + 10.0 * e.weight
            );
        }
        s.push_str("}\n");
        s
    }
}
