//! Forecasting harness: chronological splits, lagged-feature datasets,
//! reference forecasters and the scenario grid report.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{IngestError, SeriesPanel};
use crate::linalg::{least_squares, LinalgError};
use crate::multiscale::{causal_scale_filter, level_for_window, MultiscaleError, DEFAULT_WINDOWS};
use crate::sentiment::Platform;

#[derive(Debug, Error)]
pub enum ForecastError {
    #[error("invalid split: {0}")]
    BadSplit(String),
    #[error("{segment} segment is empty ({rows} rows available)")]
    EmptySegment { segment: &'static str, rows: usize },
    #[error(transparent)]
    Panel(#[from] IngestError),
    #[error("lags must be at least 1")]
    ZeroLags,
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("scale {0} is not one of 7, 14, 32, 64, 128, 256")]
    BadScale(usize),
    #[error("wavelet filter on {column}: {source}")]
    Filter {
        column: String,
        source: MultiscaleError,
    },
    #[error("scale filtering needs a complete column, {0} has gaps")]
    Gaps(String),
    #[error("singular normal equations ({0}); use the ridge forecaster")]
    Singular(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("nothing to evaluate")]
    Empty,
    #[error("no usable rows after lagging")]
    NoRows,
}

pub type Result<T> = std::result::Result<T, ForecastError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.6,
            validation: 0.1,
            test: 0.3,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let f = [self.train, self.validation, self.test];
        if f.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(ForecastError::BadSplit(format!("fractions must be positive, got {f:?}")));
        }
        if (f.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(ForecastError::BadSplit(format!("fractions must sum to 1, got {f:?}")));
        }
        Ok(())
    }

    /// Row counts: `floor(n·train)`, `floor(n·validation)`, remainder.
    pub fn counts(&self, n: usize) -> Result<(usize, usize, usize)> {
        self.validate()?;
        let train = (n as f64 * self.train).floor() as usize;
        let val = (n as f64 * self.validation).floor() as usize;
        let test = n.saturating_sub(train + val);
        for (segment, len) in [("training", train), ("validation", val), ("test", test)] {
            if len == 0 {
                return Err(ForecastError::EmptySegment { segment, rows: n });
            }
        }
        Ok((train, val, test))
    }
}

/// Chronological train/validation/test panels.
pub fn split(panel: &SeriesPanel, spec: &SplitSpec) -> Result<(SeriesPanel, SeriesPanel, SeriesPanel)> {
    let (a, b, _) = spec.counts(panel.n_rows())?;
    let n = panel.n_rows();
    Ok((panel.slice_rows(0, a), panel.slice_rows(a, a + b), panel.slice_rows(a + b, n)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForecasterKind {
    Persistence,
    Ar,
    Ridge,
}

impl ForecasterKind {
    pub fn label(self) -> &'static str {
        match self {
            ForecasterKind::Persistence => "Persistence",
            ForecasterKind::Ar => "AR",
            ForecasterKind::Ridge => "Ridge",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Scenario {
    pub target: String,
    pub channels: Vec<Platform>,
    /// Analysis window whose wavelet band filters the inputs; `None` uses
    /// the raw series.
    pub scale: Option<usize>,
    pub forecaster: ForecasterKind,
    pub horizon: usize,
}

impl Scenario {
    pub fn new(target: &str, channels: &[Platform], scale: Option<usize>, forecaster: ForecasterKind) -> Self {
        Self {
            target: target.to_string(),
            channels: channels.to_vec(),
            scale,
            forecaster,
            horizon: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(s) = self.scale {
            if !DEFAULT_WINDOWS.contains(&s) {
                return Err(ForecastError::BadScale(s));
            }
        }
        if self.horizon == 0 {
            return Err(ForecastError::ZeroHorizon);
        }
        Ok(())
    }

    /// Row label, e.g. `Ridge_{Twitter,TikTok}`.
    pub fn label(&self) -> String {
        let ch: Vec<&str> = self
            .channels
            .iter()
            .map(|c| match c {
                Platform::Twitter => "Twitter",
                Platform::Tiktok => "TikTok",
            })
            .collect();
        let ch = if ch.is_empty() { "None".to_string() } else { ch.join(",") };
        format!("{}_{{{ch}}}", self.forecaster.label())
    }
}

/// Row label for a window, matching the short/medium/long grouping.
pub fn window_label(scale: Option<usize>) -> String {
    match scale {
        None => "Raw".into(),
        Some(s) if s <= 14 => format!("Short-term ({s})"),
        Some(s) if s <= 64 => format!("Medium-term ({s})"),
        Some(s) => format!("Long-term ({s})"),
    }
}

/// Supervised rows keyed by the date of the response.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub names: Vec<String>,
    pub dates: Vec<NaiveDate>,
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    /// Unfiltered target at the forecast origin.
    pub last: Vec<f64>,
    /// The first `target_lags` columns are lags of the target.
    pub target_lags: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn rows(&self, start: usize, end: usize) -> Dataset {
        Dataset {
            names: self.names.clone(),
            dates: self.dates[start..end].to_vec(),
            x: self.x.rows(start, end - start).into_owned(),
            y: self.y[start..end].to_vec(),
            last: self.last[start..end].to_vec(),
            target_lags: self.target_lags,
        }
    }

    pub fn split(&self, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
        let (a, b, _) = spec.counts(self.len())?;
        Ok((self.rows(0, a), self.rows(a, a + b), self.rows(a + b, self.len())))
    }
}

fn input_series(panel: &SeriesPanel, column: &str, scale: Option<usize>) -> Result<Vec<Option<f64>>> {
    let raw = panel.column(column)?;
    let Some(s) = scale else {
        return Ok(raw);
    };
    let complete: Vec<f64> = raw
        .iter()
        .copied()
        .collect::<Option<_>>()
        .ok_or_else(|| ForecastError::Gaps(column.to_string()))?;
    causal_scale_filter(&complete, level_for_window(s)).map_err(|source| ForecastError::Filter {
        column: column.to_string(),
        source,
    })
}

/// Lagged predictors (target first, then each channel's index) and the
/// response `horizon` days ahead. Rows with any missing value are dropped.
pub fn make_features(panel: &SeriesPanel, scenario: &Scenario, lags: usize) -> Result<Dataset> {
    scenario.validate()?;
    if lags == 0 {
        return Err(ForecastError::ZeroLags);
    }
    let raw_target = panel.column(&scenario.target)?;
    let mut inputs = vec![(scenario.target.clone(), input_series(panel, &scenario.target, scenario.scale)?)];
    for c in &scenario.channels {
        let name = c.column_name();
        inputs.push((name.clone(), input_series(panel, &name, scenario.scale)?));
    }
    let names: Vec<String> = inputs
        .iter()
        .flat_map(|(n, _)| (1..=lags).map(move |l| format!("{n}.l{l}")))
        .collect();

    let n = panel.n_rows();
    let h = scenario.horizon;
    let mut rows = Vec::new();
    let (mut dates, mut y, mut last) = (Vec::new(), Vec::new(), Vec::new());
    for t in lags - 1..n.saturating_sub(h) {
        let (Some(resp), Some(origin)) = (raw_target[t + h], raw_target[t]) else {
            continue;
        };
        let row: Option<Vec<f64>> = inputs
            .iter()
            .flat_map(|(_, s)| (0..lags).map(move |l| s[t - l]))
            .collect();
        if let Some(row) = row {
            rows.push(row);
            dates.push(panel.dates()[t + h]);
            y.push(resp);
            last.push(origin);
        }
    }
    if rows.is_empty() {
        return Err(ForecastError::NoRows);
    }
    let k = names.len();
    let x = DMatrix::from_fn(rows.len(), k, |i, j| rows[i][j]);
    Ok(Dataset {
        names,
        dates,
        x,
        y,
        last,
        target_lags: lags,
    })
}

/// Penalty grid `10^-4, 10^-3.5, ..., 10^2`.
pub fn ridge_grid() -> Vec<f64> {
    (0..13).map(|k| 10f64.powf(-4.0 + 0.5 * k as f64)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    /// One coefficient per input column; dropped constant columns get 0.
    pub coef: Vec<f64>,
}

impl LinearFit {
    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| self.intercept + x.row(i).iter().zip(&self.coef).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }

    fn params(&self) -> Vec<f64> {
        std::iter::once(self.intercept).chain(self.coef.iter().copied()).collect()
    }
}

struct Standardizer {
    keep: Vec<usize>,
    mean: Vec<f64>,
    sd: Vec<f64>,
}

impl Standardizer {
    /// Column moments; columns with zero spread are dropped.
    fn fit(x: &DMatrix<f64>) -> Self {
        let n = x.nrows() as f64;
        let mut s = Standardizer {
            keep: Vec::new(),
            mean: Vec::new(),
            sd: Vec::new(),
        };
        for j in 0..x.ncols() {
            let col = x.column(j);
            let first = col[0];
            if col.iter().all(|v| *v == first) {
                continue;
            }
            let m = col.sum() / n;
            let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
            s.keep.push(j);
            s.mean.push(m);
            s.sd.push(sd);
        }
        s
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), self.keep.len(), |i, c| (x[(i, self.keep[c])] - self.mean[c]) / self.sd[c])
    }
}

/// Least squares with an intercept. Constant columns are dropped first.
pub fn ols_fit(x: &DMatrix<f64>, y: &[f64]) -> Result<LinearFit> {
    if x.nrows() != y.len() {
        return Err(ForecastError::LengthMismatch(format!("{} rows vs {} responses", x.nrows(), y.len())));
    }
    let st = Standardizer::fit(x);
    let n = x.nrows();
    let design = DMatrix::from_fn(n, st.keep.len() + 1, |i, c| if c == 0 { 1.0 } else { x[(i, st.keep[c - 1])] });
    let resp = DMatrix::from_column_slice(n, 1, y);
    let fit = least_squares(&design, &resp).map_err(|e| match e {
        LinalgError::Collinear { column } => ForecastError::Singular(format!("column {column} is collinear")),
        other => ForecastError::Singular(other.to_string()),
    })?;
    let mut coef = vec![0.0; x.ncols()];
    for (c, &j) in st.keep.iter().enumerate() {
        coef[j] = fit.coef[(c + 1, 0)];
    }
    Ok(LinearFit {
        intercept: fit.coef[(0, 0)],
        coef,
    })
}

/// Ridge regression on standardized columns with an unpenalized
/// intercept, mapped back to the original scale.
pub fn ridge_fit(x: &DMatrix<f64>, y: &[f64], lambda: f64) -> Result<LinearFit> {
    if x.nrows() != y.len() || y.is_empty() {
        return Err(ForecastError::LengthMismatch(format!("{} rows vs {} responses", x.nrows(), y.len())));
    }
    let st = Standardizer::fit(x);
    let z = st.apply(x);
    let ybar = y.iter().sum::<f64>() / y.len() as f64;
    let yc = DVector::from_iterator(y.len(), y.iter().map(|v| v - ybar));
    let k = st.keep.len();
    let mut coef = vec![0.0; x.ncols()];
    let mut intercept = ybar;
    if k > 0 {
        let a = z.transpose() * &z + DMatrix::identity(k, k) * lambda;
        let b = z.transpose() * yc;
        let beta = a
            .cholesky()
            .ok_or_else(|| ForecastError::Singular(format!("penalty {lambda:e} too small")))?
            .solve(&b);
        for c in 0..k {
            let j = st.keep[c];
            coef[j] = beta[c] / st.sd[c];
            intercept -= coef[j] * st.mean[c];
        }
    }
    Ok(LinearFit { intercept, coef })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fitted {
    pub predictions: Vec<f64>,
    /// Intercept then coefficients; empty for persistence.
    pub params: Vec<f64>,
    /// Penalty picked on the validation segment (ridge only).
    pub lambda: Option<f64>,
}

/// Fits on the training rows only and predicts every test row.
pub fn fit_predict(kind: ForecasterKind, train: &Dataset, val: &Dataset, test: &Dataset) -> Result<Fitted> {
    if train.is_empty() || test.is_empty() {
        return Err(ForecastError::Empty);
    }
    match kind {
        ForecasterKind::Persistence => Ok(Fitted {
            predictions: test.last.clone(),
            params: Vec::new(),
            lambda: None,
        }),
        ForecasterKind::Ar => {
            let cols = |d: &Dataset| d.x.columns(0, d.target_lags).into_owned();
            let fit = ols_fit(&cols(train), &train.y)?;
            Ok(Fitted {
                predictions: fit.predict(&cols(test)),
                params: fit.params(),
                lambda: None,
            })
        }
        ForecasterKind::Ridge => {
            let mut best: Option<(f64, f64, LinearFit)> = None;
            for lambda in ridge_grid() {
                let fit = ridge_fit(&train.x, &train.y, lambda)?;
                let score = if val.is_empty() {
                    0.0
                } else {
                    evaluate(&fit.predict(&val.x), &val.y)?.mse
                };
                if best.as_ref().is_none_or(|b| score < b.0) {
                    best = Some((score, lambda, fit));
                }
            }
            let (_, lambda, fit) = best.expect("nonempty grid");
            Ok(Fitted {
                predictions: fit.predict(&test.x),
                params: fit.params(),
                lambda: Some(lambda),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub mae: f64,
    pub n: usize,
}

pub fn evaluate(predictions: &[f64], actuals: &[f64]) -> Result<Metrics> {
    if predictions.len() != actuals.len() {
        return Err(ForecastError::LengthMismatch(format!(
            "{} predictions vs {} actuals",
            predictions.len(),
            actuals.len()
        )));
    }
    if predictions.is_empty() {
        return Err(ForecastError::Empty);
    }
    let n = predictions.len() as f64;
    let (mut se, mut ae) = (0.0, 0.0);
    for (p, a) in predictions.iter().zip(actuals) {
        let e = p - a;
        se += e * e;
        ae += e.abs();
    }
    Ok(Metrics {
        mse: se / n,
        mae: ae / n,
        n: predictions.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    pub lags: usize,
    pub split: SplitSpec,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            lags: 3,
            split: SplitSpec::default(),
        }
    }
}

/// Runs one scenario end to end.
pub fn run_scenario(panel: &SeriesPanel, scenario: &Scenario, config: &HarnessConfig) -> Result<(Metrics, Fitted)> {
    let data = make_features(panel, scenario, config.lags)?;
    let (train, val, test) = data.split(&config.split)?;
    let fitted = fit_predict(scenario.forecaster, &train, &val, &test)?;
    let metrics = evaluate(&fitted.predictions, &test.y)?;
    Ok((metrics, fitted))
}

/// Relative reduction `(baseline − candidate)/baseline` per metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub mse: f64,
    pub mae: f64,
}

impl Improvement {
    fn between(baseline: &Metrics, candidate: &Metrics) -> Self {
        Self {
            mse: (baseline.mse - candidate.mse) / baseline.mse,
            mae: (baseline.mae - candidate.mae) / baseline.mae,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub scenario: Scenario,
    pub metrics: Option<Metrics>,
    pub lambda: Option<f64>,
    pub error: Option<String>,
    pub best_mse: bool,
    pub best_mae: bool,
    /// Against the Twitter-only scenario with the same target, scale,
    /// forecaster and horizon.
    pub vs_twitter: Option<Improvement>,
    /// Against the scenario without sentiment channels.
    pub vs_no_sentiment: Option<Improvement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastReport {
    pub config: HarnessConfig,
    pub cells: Vec<ReportCell>,
}

/// Every scenario on identical splits. Failures are recorded in their
/// cell; minima are flagged per (target, scale).
pub fn scenario_matrix(panel: &SeriesPanel, scenarios: &[Scenario], config: &HarnessConfig) -> ForecastReport {
    let results: Vec<Result<(Metrics, Fitted)>> = scenarios
        .par_iter()
        .map(|s| run_scenario(panel, s, config))
        .collect();
    let mut cells: Vec<ReportCell> = scenarios
        .iter()
        .zip(results)
        .map(|(s, r)| {
            let (metrics, lambda, error) = match r {
                Ok((m, f)) => (Some(m), f.lambda, None),
                Err(e) => {
                    log::warn!("scenario {} on {} failed: {e}", s.label(), s.target);
                    (None, None, Some(e.to_string()))
                }
            };
            ReportCell {
                scenario: s.clone(),
                metrics,
                lambda,
                error,
                best_mse: false,
                best_mae: false,
                vs_twitter: None,
                vs_no_sentiment: None,
            }
        })
        .collect();

    let mut groups: BTreeMap<(String, Option<usize>), Vec<usize>> = BTreeMap::new();
    for (i, c) in cells.iter().enumerate() {
        groups
            .entry((c.scenario.target.clone(), c.scenario.scale))
            .or_default()
            .push(i);
    }
    for idx in groups.values() {
        let min_of = |f: fn(&Metrics) -> f64| {
            idx.iter()
                .filter_map(|&i| cells[i].metrics.as_ref().map(f))
                .fold(f64::INFINITY, f64::min)
        };
        let (mse, mae) = (min_of(|m| m.mse), min_of(|m| m.mae));
        for &i in idx {
            if let Some(m) = cells[i].metrics {
                cells[i].best_mse = m.mse == mse;
                cells[i].best_mae = m.mae == mae;
            }
        }
    }

    let lookup = |cells: &[ReportCell], s: &Scenario, channels: &[Platform]| {
        cells
            .iter()
            .find(|c| {
                c.scenario.target == s.target
                    && c.scenario.scale == s.scale
                    && c.scenario.forecaster == s.forecaster
                    && c.scenario.horizon == s.horizon
                    && c.scenario.channels == channels
            })
            .and_then(|c| c.metrics)
    };
    for i in 0..cells.len() {
        let Some(m) = cells[i].metrics else { continue };
        let s = cells[i].scenario.clone();
        cells[i].vs_twitter = lookup(&cells, &s, &[Platform::Twitter]).map(|b| Improvement::between(&b, &m));
        cells[i].vs_no_sentiment = lookup(&cells, &s, &[]).map(|b| Improvement::between(&b, &m));
    }
    ForecastReport { config: *config, cells }
}

impl ForecastReport {
    /// Wide layout: one row per (window, scenario), two columns per target.
    pub fn to_table_csv(&self) -> String {
        let mut targets: Vec<&str> = Vec::new();
        let mut rows: Vec<(Option<usize>, String)> = Vec::new();
        let mut values: BTreeMap<(Option<usize>, String, &str), Option<Metrics>> = BTreeMap::new();
        for c in &self.cells {
            let t = c.scenario.target.as_str();
            if !targets.contains(&t) {
                targets.push(t);
            }
            let key = (c.scenario.scale, c.scenario.label());
            if !rows.contains(&key) {
                rows.push(key.clone());
            }
            values.insert((key.0, key.1, t), c.metrics);
        }
        let mut header = vec!["Window Size".to_string(), "Metric".to_string()];
        for t in &targets {
            header.push(format!("{t} MSE"));
            header.push(format!("{t} MAE"));
        }
        let mut records = vec![header];
        for (scale, label) in rows {
            let mut rec = vec![window_label(scale), label.clone()];
            for t in &targets {
                match values.get(&(scale, label.clone(), *t)).copied().flatten() {
                    Some(m) => rec.extend([format!("{:.3}", m.mse), format!("{:.3}", m.mae)]),
                    None => rec.extend([String::new(), String::new()]),
                }
            }
            records.push(rec);
        }
        write_records(&records)
    }

    /// One row per cell with every field, including the `best` flags.
    pub fn to_long_csv(&self) -> String {
        let header = [
            "window",
            "scenario",
            "target",
            "forecaster",
            "channels",
            "horizon",
            "mse",
            "mae",
            "n_test",
            "lambda",
            "best_mse",
            "best_mae",
            "improvement_mse_vs_twitter",
            "improvement_mae_vs_twitter",
            "improvement_mse_vs_none",
            "improvement_mae_vs_none",
            "error",
        ];
        let mut records = vec![header.iter().map(|h| h.to_string()).collect::<Vec<_>>()];
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.10}")).unwrap_or_default();
        for c in &self.cells {
            let s = &c.scenario;
            let channels: Vec<&str> = s.channels.iter().map(|p| p.as_str()).collect();
            records.push(vec![
                s.scale.map(|v| v.to_string()).unwrap_or_else(|| "raw".into()),
                s.label(),
                s.target.clone(),
                s.forecaster.label().to_string(),
                channels.join("+"),
                s.horizon.to_string(),
                opt(c.metrics.map(|m| m.mse)),
                opt(c.metrics.map(|m| m.mae)),
                c.metrics.map(|m| m.n.to_string()).unwrap_or_default(),
                c.lambda.map(|l| format!("{l:e}")).unwrap_or_default(),
                c.best_mse.to_string(),
                c.best_mae.to_string(),
                opt(c.vs_twitter.map(|i| i.mse)),
                opt(c.vs_twitter.map(|i| i.mae)),
                opt(c.vs_no_sentiment.map(|i| i.mse)),
                opt(c.vs_no_sentiment.map(|i| i.mae)),
                c.error.clone().unwrap_or_default(),
            ]);
        }
        write_records(&records)
    }
}

fn write_records(records: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.write_record(r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel(cols: Vec<(&str, Vec<f64>)>) -> SeriesPanel {
        let n = cols[0].1.len();
        let d0 = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
        let dates = (0..n).map(|i| d0 + chrono::Duration::days(i as i64)).collect();
        SeriesPanel::from_columns(dates, cols.into_iter().map(|(n, v)| (n.to_string(), v)).collect()).unwrap()
    }

    #[test]
    fn split_counts() {
        let s = SplitSpec::default();
        assert_eq!(s.counts(100).unwrap(), (60, 10, 30));
        assert_eq!(s.counts(10).unwrap(), (6, 1, 3));
        let bad = SplitSpec {
            train: 0.5,
            validation: 0.5,
            test: 0.0,
        };
        assert!(matches!(bad.counts(100), Err(ForecastError::BadSplit(_))));
        assert!(matches!(s.counts(3), Err(ForecastError::EmptySegment { .. })));
    }

    #[test]
    fn feature_columns() {
        let v: Vec<f64> = (0..30).map(|i| (i % 7) as f64).collect();
        let p = panel(vec![("y", v.clone()), ("twitter_tsi", v.clone()), ("tiktok_tsi", v)]);
        let d = make_features(&p, &Scenario::new("y", &[], None, ForecasterKind::Ar), 2).unwrap();
        assert_eq!(d.x.ncols(), 2);
        assert_eq!(d.len(), 30 - 1 - 1);
        let both = Scenario::new("y", &[Platform::Twitter, Platform::Tiktok], None, ForecasterKind::Ridge);
        let d = make_features(&p, &both, 3).unwrap();
        assert_eq!(d.x.ncols(), 9);
        assert_eq!(d.names[3], "twitter_tsi.l1");
        let mut far = both.clone();
        far.horizon = 4;
        assert_eq!(make_features(&p, &far, 3).unwrap().len(), d.len() - 3);
        assert!(make_features(&p, &Scenario::new("z", &[], None, ForecasterKind::Ar), 1).is_err());
        assert!(matches!(
            make_features(&p, &Scenario::new("y", &[], Some(10), ForecasterKind::Ar), 1),
            Err(ForecastError::BadScale(10))
        ));
    }

    #[test]
    fn constant_target_is_fixed_point() {
        let p = panel(vec![("y", vec![2.5; 60]), ("twitter_tsi", (0..60).map(|i| (i % 5) as f64).collect())]);
        for kind in [ForecasterKind::Persistence, ForecasterKind::Ar, ForecasterKind::Ridge] {
            let s = Scenario::new("y", &[Platform::Twitter], None, kind);
            let (m, f) = run_scenario(&p, &s, &HarnessConfig::default()).unwrap();
            assert!(f.predictions.iter().all(|v| (v - 2.5).abs() < 1e-12), "{kind:?}");
            assert!(m.mse < 1e-20);
        }
    }

    #[test]
    fn metric_arithmetic() {
        let m = evaluate(&[1.0, 2.0], &[2.0, 4.0]).unwrap();
        assert_eq!((m.mse, m.mae), (2.5, 1.5));
        assert_eq!(evaluate(&[1.0], &[1.0]).unwrap().mse, 0.0);
        assert!(evaluate(&[1.0], &[1.0, 2.0]).is_err());
        assert!(evaluate(&[], &[]).is_err());
    }

    #[test]
    fn grid_endpoints() {
        let g = ridge_grid();
        assert_eq!(g.len(), 13);
        assert!((g[0] - 1e-4).abs() < 1e-18 && (g[12] - 100.0).abs() < 1e-12);
    }

    #[test]
    fn singular_ar_suggests_ridge() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0, 4.0, 8.0]);
        let err = ols_fit(&x, &[1.0, 2.0, 3.0, 4.0]).unwrap_err();
        assert!(err.to_string().contains("ridge"));
    }

    #[test]
    fn table_layout() {
        let cell = |target: &str, ch: &[Platform], mse: f64| ReportCell {
            scenario: Scenario::new(target, ch, Some(7), ForecasterKind::Ridge),
            metrics: Some(Metrics { mse, mae: mse / 2.0, n: 10 }),
            lambda: None,
            error: None,
            best_mse: false,
            best_mae: false,
            vs_twitter: None,
            vs_no_sentiment: None,
        };
        let report = ForecastReport {
            config: HarnessConfig::default(),
            cells: vec![
                cell("BTCPRC", &[Platform::Twitter], 1.373),
                cell("DOGPRC", &[Platform::Twitter], 1.063),
                cell("BTCPRC", &[Platform::Tiktok], 1.28),
                cell("BTCPRC", &[Platform::Twitter, Platform::Tiktok], 1.0),
            ],
        };
        let csv = report.to_table_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "Window Size,Metric,BTCPRC MSE,BTCPRC MAE,DOGPRC MSE,DOGPRC MAE");
        assert_eq!(lines[1], "Short-term (7),Ridge_{Twitter},1.373,0.686,1.063,0.531");
        assert_eq!(lines[2], "Short-term (7),Ridge_{TikTok},1.280,0.640,,");
        assert_eq!(lines[3], "Short-term (7),\"Ridge_{Twitter,TikTok}\",1.000,0.500,,");
    }
}
