//! Rolling correlation sweeps, peak counting and the Haar MODWT.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Analysis horizons in days.
pub const DEFAULT_WINDOWS: [usize; 6] = [7, 14, 32, 64, 128, 256];

#[derive(Debug, Error, PartialEq)]
pub enum MultiscaleError {
    #[error("window {0} is below the minimum of 3")]
    WindowTooSmall(usize),
    #[error("window {window} exceeds series length {len}")]
    WindowTooLong { window: usize, len: usize },
    #[error("step must be at least 1")]
    ZeroStep,
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("empty series")]
    Empty,
    #[error("{levels} levels need at least {needed} observations, got {len}")]
    TooManyLevels { levels: usize, needed: usize, len: usize },
    #[error("at least one level is required")]
    ZeroLevels,
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
}

pub type Result<T> = std::result::Result<T, MultiscaleError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingCorrSeries {
    pub window: usize,
    pub step: usize,
    /// Date of the last observation in each window.
    pub dates: Vec<NaiveDate>,
    pub values: Vec<Option<f64>>,
    /// Windows left missing because one side had zero variance.
    pub zero_variance: usize,
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let flat = |s: &[f64]| s.iter().all(|v| *v == s[0]);
    if flat(x) || flat(y) {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn check_finite(x: &[f64]) -> Result<()> {
    match x.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(MultiscaleError::NonFinite(i)),
        None => Ok(()),
    }
}

/// Pearson correlation over trailing windows ending at `window−1`,
/// `window−1+step`, ...
pub fn rolling_corr(dates: &[NaiveDate], x: &[f64], y: &[f64], window: usize, step: usize) -> Result<RollingCorrSeries> {
    if x.len() != y.len() || dates.len() != x.len() {
        return Err(MultiscaleError::LengthMismatch(format!(
            "{} dates, {} and {} values",
            dates.len(),
            x.len(),
            y.len()
        )));
    }
    if window < 3 {
        return Err(MultiscaleError::WindowTooSmall(window));
    }
    if step == 0 {
        return Err(MultiscaleError::ZeroStep);
    }
    if window > x.len() {
        return Err(MultiscaleError::WindowTooLong { window, len: x.len() });
    }
    check_finite(x)?;
    check_finite(y)?;
    let ends: Vec<usize> = (window - 1..x.len()).step_by(step).collect();
    let values: Vec<Option<f64>> = ends
        .iter()
        .map(|&e| pearson(&x[e + 1 - window..=e], &y[e + 1 - window..=e]))
        .collect();
    let zero_variance = values.iter().filter(|v| v.is_none()).count();
    Ok(RollingCorrSeries {
        window,
        step,
        dates: ends.iter().map(|&e| dates[e]).collect(),
        values,
        zero_variance,
    })
}

impl RollingCorrSeries {
    /// `date,correlation`; missing windows are left blank.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("date,correlation\n");
        for (d, v) in self.dates.iter().zip(&self.values) {
            match v {
                Some(v) => writeln!(out, "{d},{v:.10}"),
                None => writeln!(out, "{d},"),
            }
            .expect("write to string");
        }
        out
    }
}

#[derive(Debug, Clone, Default)]
pub struct Sweep {
    pub series: BTreeMap<usize, RollingCorrSeries>,
    /// Windows that could not be computed, with the reason.
    pub skipped: Vec<(usize, String)>,
}

/// Unit-step rolling correlation for each window; failures are recorded
/// and the remaining windows still run.
pub fn sweep(dates: &[NaiveDate], x: &[f64], y: &[f64], windows: &[usize]) -> Sweep {
    let results: Vec<(usize, Result<RollingCorrSeries>)> = windows
        .par_iter()
        .map(|&w| (w, rolling_corr(dates, x, y, w, 1)))
        .collect();
    let mut out = Sweep::default();
    for (w, r) in results {
        match r {
            Ok(s) => {
                out.series.insert(w, s);
            }
            Err(e) => {
                log::warn!("window {w} skipped: {e}");
                out.skipped.push((w, e.to_string()));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakOptions {
    pub min_prominence: f64,
    pub min_separation: usize,
}

impl PeakOptions {
    pub fn for_window(window: usize) -> Self {
        Self {
            min_prominence: 0.25,
            min_separation: window / 2,
        }
    }
}

/// Indices of retained peaks in ascending order. Non-finite values are
/// never peaks and bound the prominence search.
pub fn find_peaks(x: &[f64], opts: PeakOptions) -> Vec<usize> {
    let n = x.len();
    let mut candidates = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if !x[i].is_finite() || !x[i - 1].is_finite() || !(x[i - 1] < x[i]) {
            i += 1;
            continue;
        }
        let mut k = i;
        while k + 1 < n && x[k + 1] == x[i] {
            k += 1;
        }
        if k + 1 < n && x[k + 1].is_finite() && x[k + 1] < x[i] {
            candidates.push((i, k));
        }
        i = k + 1;
    }

    let bound_min = |range: &mut dyn Iterator<Item = usize>, h: f64| {
        let mut m = h;
        for j in range {
            if !x[j].is_finite() || x[j] > h {
                break;
            }
            m = m.min(x[j]);
        }
        m
    };
    let mut kept: Vec<(usize, f64)> = candidates
        .into_iter()
        .filter_map(|(i, k)| {
            let h = x[i];
            let left = bound_min(&mut (0..i).rev(), h);
            let right = bound_min(&mut (k + 1..n), h);
            (h - left.max(right) >= opts.min_prominence).then_some((i, h))
        })
        .collect();

    kept.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut retained: Vec<usize> = Vec::new();
    for (i, _) in kept {
        if retained.iter().all(|&r| r.abs_diff(i) >= opts.min_separation) {
            retained.push(i);
        }
    }
    retained.sort_unstable();
    retained
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakReport {
    pub window: usize,
    pub count: usize,
    pub dates: Vec<NaiveDate>,
}

/// Peaks of a rolling series; missing windows break the series.
pub fn count_peaks(series: &RollingCorrSeries, opts: PeakOptions) -> PeakReport {
    let x: Vec<f64> = series.values.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
    let idx = find_peaks(&x, opts);
    PeakReport {
        window: series.window,
        count: idx.len(),
        dates: idx.iter().map(|&i| series.dates[i]).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveletFilter {
    Haar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletDecomposition {
    pub filter: WaveletFilter,
    pub levels: usize,
    pub boundary: Boundary,
    /// Wavelet coefficients `W_1..W_J`.
    pub wavelet: Vec<Vec<f64>>,
    /// Scaling coefficients `V_J`.
    pub scaling: Vec<f64>,
    /// Multiresolution details `D_1..D_J`; `D_j` carries scale `2^j`.
    pub details: Vec<Vec<f64>>,
    /// Smooth `S_J`.
    pub smooth: Vec<f64>,
}

fn check_levels(len: usize, levels: usize) -> Result<()> {
    if len == 0 {
        return Err(MultiscaleError::Empty);
    }
    if levels == 0 {
        return Err(MultiscaleError::ZeroLevels);
    }
    let needed = 1usize.checked_shl(levels as u32).unwrap_or(usize::MAX);
    if levels >= usize::BITS as usize || len < needed {
        return Err(MultiscaleError::TooManyLevels { levels, needed, len });
    }
    Ok(())
}

/// One pyramid step at level `j`: `(W_j, V_j)` from `V_{j−1}`.
fn forward_step(v: &[f64], j: usize) -> (Vec<f64>, Vec<f64>) {
    let n = v.len();
    let s = (1usize << (j - 1)) % n;
    let mut w = Vec::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    for t in 0..n {
        let (a, b) = (v[t], v[(t + n - s) % n]);
        w.push(0.5 * (a - b));
        out.push(0.5 * (a + b));
    }
    (w, out)
}

/// `V_{j−1}` from `(W_j, V_j)`.
fn inverse_step(w: &[f64], v: &[f64], j: usize) -> Vec<f64> {
    let n = v.len();
    let s = (1usize << (j - 1)) % n;
    (0..n)
        .map(|t| {
            let u = (t + s) % n;
            0.5 * (w[t] - w[u]) + 0.5 * (v[t] + v[u])
        })
        .collect()
}

/// Rebuilds a series from wavelet coefficients `W_1..W_J` and `V_J`.
pub fn inverse_modwt(wavelet: &[Vec<f64>], scaling: &[f64]) -> Vec<f64> {
    let mut v = scaling.to_vec();
    for j in (1..=wavelet.len()).rev() {
        v = inverse_step(&wavelet[j - 1], &v, j);
    }
    v
}

/// Haar MODWT to `levels` levels with periodic boundary, plus the
/// additive multiresolution analysis.
pub fn modwt(series: &[f64], levels: usize) -> Result<WaveletDecomposition> {
    check_levels(series.len(), levels)?;
    check_finite(series)?;
    let n = series.len();
    let mut v = series.to_vec();
    let mut wavelet = Vec::with_capacity(levels);
    for j in 1..=levels {
        let (w, next) = forward_step(&v, j);
        wavelet.push(w);
        v = next;
    }
    let zeros = vec![0.0; n];
    let details = (1..=levels)
        .map(|j| {
            let mut d = inverse_step(&wavelet[j - 1], &zeros, j);
            for k in (1..j).rev() {
                d = inverse_step(&zeros, &d, k);
            }
            d
        })
        .collect();
    let mut smooth = v.clone();
    for k in (1..=levels).rev() {
        smooth = inverse_step(&zeros, &smooth, k);
    }
    Ok(WaveletDecomposition {
        filter: WaveletFilter::Haar,
        levels,
        boundary: Boundary::Periodic,
        wavelet,
        scaling: v,
        details,
        smooth,
    })
}

impl WaveletDecomposition {
    /// `Σ D_j + S_J`.
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut out = self.smooth.clone();
        for d in &self.details {
            for (o, v) in out.iter_mut().zip(d) {
                *o += v;
            }
        }
        out
    }

    pub fn inverse(&self) -> Vec<f64> {
        inverse_modwt(&self.wavelet, &self.scaling)
    }
}

/// Dyadic level standing in for an analysis window: the smallest `j`
/// with `2^j ≥ window` (7 → 3, 14 → 4, 32 → 5, ..., 256 → 8).
pub fn level_for_window(window: usize) -> usize {
    window.max(2).next_power_of_two().trailing_zeros() as usize
}

/// Detail-plus-smooth at level `J`, `W_J + V_J = V_{J−1}`, computed from
/// the pyramid so each value depends only on the current and earlier
/// observations (a trailing mean over `2^{J−1}` days). The first
/// `2^{J−1} − 1` entries would wrap around the boundary and are `None`.
pub fn causal_scale_filter(series: &[f64], level: usize) -> Result<Vec<Option<f64>>> {
    check_levels(series.len(), level)?;
    check_finite(series)?;
    let mut v = series.to_vec();
    for j in 1..level {
        v = forward_step(&v, j).1;
    }
    let warmup = (1usize << (level - 1)) - 1;
    Ok(v
        .into_iter()
        .enumerate()
        .map(|(t, x)| (t >= warmup).then_some(x))
        .collect())
}
