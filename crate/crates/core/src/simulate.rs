//! Seeded data generators: VAR, GARCH and DCC processes plus a complete
//! synthetic market/sentiment dataset with a planted sentiment signal.

use chrono::{Duration, NaiveDate, TimeZone, Utc};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::ingest::SeriesPanel;
use crate::sentiment::{Platform, SentimentRecord};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normals<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// `T × N` draws from `y_t = c + Σ Φ_j y_{t−j} + L e_t` with `L L' = Σ`,
/// after discarding `burn` warm-up steps.
pub fn simulate_var(
    intercept: &[f64],
    coefs: &[DMatrix<f64>],
    sigma: &DMatrix<f64>,
    t_len: usize,
    burn: usize,
    seed: u64,
) -> DMatrix<f64> {
    let n = intercept.len();
    let p = coefs.len();
    let chol = sigma
        .clone()
        .cholesky()
        .expect("innovation covariance must be positive definite")
        .l();
    let mut r = rng(seed);
    let total = t_len + burn + p;
    let mut y = DMatrix::zeros(total, n);
    let c = DVector::from_column_slice(intercept);
    for t in p..total {
        let e = DVector::from_vec(normals(&mut r, n));
        let mut v = &c + &chol * e;
        for (j, phi) in coefs.iter().enumerate() {
            v += phi * y.row(t - j - 1).transpose();
        }
        y.set_row(t, &v.transpose());
    }
    y.rows(burn + p, t_len).into_owned()
}

/// GARCH(1,1) returns with Gaussian innovations and their variances.
pub fn simulate_garch(omega: f64, alpha: f64, beta: f64, n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut r = rng(seed);
    let burn = 500;
    let mut h = omega / (1.0 - alpha - beta);
    let mut eps = 0.0;
    let mut out = Vec::with_capacity(n);
    let mut var = Vec::with_capacity(n);
    for t in 0..n + burn {
        h = omega + alpha * eps * eps + beta * h;
        let z: f64 = StandardNormal.sample(&mut r);
        eps = h.sqrt() * z;
        if t >= burn {
            out.push(eps);
            var.push(h);
        }
    }
    (out, var)
}

/// Standardized residuals following a DCC(1,1) correlation process with
/// unconditional correlation `qbar`.
pub fn simulate_dcc(qbar: &DMatrix<f64>, a: f64, b: f64, t_len: usize, seed: u64) -> DMatrix<f64> {
    let n = qbar.nrows();
    let mut r = rng(seed);
    let burn = 200;
    let mut q = qbar.clone();
    let mut z_prev = DVector::zeros(n);
    let mut out = DMatrix::zeros(t_len, n);
    for t in 0..t_len + burn {
        if t > 0 {
            q = qbar * (1.0 - a - b) + &z_prev * z_prev.transpose() * a + &q * b;
        }
        let d = DVector::from_fn(n, |i, _| 1.0 / q[(i, i)].sqrt());
        let rt = DMatrix::from_fn(n, n, |i, j| q[(i, j)] * d[i] * d[j]);
        let l = rt.cholesky().expect("correlation is positive definite").l();
        let z = &l * DVector::from_vec(normals(&mut r, n));
        if t >= burn {
            out.set_row(t - burn, &z.transpose());
        }
        z_prev = z;
    }
    out
}

/// Coin tickers and their group tags in the synthetic dataset.
pub const SYNTH_COINS: [(&str, &str); 4] = [
    ("BTC", "gold2.0"),
    ("ETH", "altcoin"),
    ("DOGE", "altcoin"),
    ("USDT", "stablecoin"),
];

/// Everything the pipeline consumes, generated from one seed.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    /// Prices and volumes: columns `<COIN>_price`, `<COIN>_volume`.
    pub market: SeriesPanel,
    pub records: Vec<SentimentRecord>,
    /// `(id, text)` pairs for topic clustering.
    pub texts: Vec<(String, String)>,
}

const TOPIC_WORDS: [&[&str]; 4] = [
    &["bitcoin", "halving", "miners", "hashrate", "satoshi", "block", "wallet", "cold"],
    &["inflation", "rate", "fed", "bank", "hike", "cpi", "dollar", "treasury"],
    &["elon", "doge", "meme", "tweet", "moon", "shiba", "pump", "rocket"],
    &["stock", "market", "nasdaq", "equity", "earnings", "index", "rally", "crash"],
];

/// Builds `days` days of data starting 2021-01-01.
///
/// Returns follow a stable VAR(1) with GARCH(1,1)-scaled shocks; daily
/// sentiment indices are persistent AR(1) processes, and DOGE and BTC
/// returns load on the previous day's TikTok and Twitter indices
/// respectively.
pub fn synthetic_dataset(days: usize, seed: u64) -> SyntheticDataset {
    let mut r = rng(seed);
    let start = NaiveDate::from_ymd_opt(2021, 1, 1).expect("valid date");
    let dates: Vec<NaiveDate> = (0..days).map(|i| start + Duration::days(i as i64)).collect();

    // Sentiment indices (0–10 scale), AR(1) around neutral.
    let mut tw = vec![5.0; days];
    let mut tk = vec![5.0; days];
    for t in 1..days {
        let (e1, e2): (f64, f64) = (StandardNormal.sample(&mut r), StandardNormal.sample(&mut r));
        tw[t] = 5.0 + 0.7 * (tw[t - 1] - 5.0) + 0.6 * e1;
        tk[t] = 5.0 + 0.5 * (tk[t - 1] - 5.0) + 0.9 * e2;
    }
    for s in tw.iter_mut().chain(tk.iter_mut()) {
        *s = s.clamp(0.5, 9.5);
    }

    let phi = DMatrix::from_row_slice(
        4,
        4,
        &[
            0.10, 0.05, 0.00, 0.00, //
            0.15, 0.05, 0.00, 0.00, //
            0.10, 0.10, 0.05, 0.00, //
            0.00, 0.00, 0.00, -0.20,
        ],
    );
    let scale = [0.03, 0.04, 0.06, 0.001];
    let (omega, alpha, beta) = (0.05, 0.08, 0.9);
    let mut h = [1.0f64; 4];
    let mut eps_prev = [0.0f64; 4];
    let mut ret = DMatrix::zeros(days, 4);
    for t in 1..days {
        let common: f64 = StandardNormal.sample(&mut r);
        let prev = ret.row(t - 1).transpose();
        let mean = &phi * prev;
        for i in 0..4 {
            h[i] = omega + alpha * eps_prev[i] * eps_prev[i] + beta * h[i];
            let z: f64 = StandardNormal.sample(&mut r);
            let shock = h[i].sqrt() * (0.8 * z + 0.6 * common * if i == 3 { 0.0 } else { 1.0 });
            eps_prev[i] = shock;
            let mut v = mean[i] + scale[i] * shock;
            // Planted channels: BTC ← Twitter, DOGE ← TikTok (previous day).
            if i == 0 {
                v += 0.008 * (tw[t - 1] - 5.0);
            }
            if i == 2 {
                v += 0.02 * (tk[t - 1] - 5.0);
            }
            ret[(t, i)] = v;
        }
    }

    let base_price = [30000.0, 1500.0, 0.1, 1.0];
    let base_volume = [3.0e10, 1.5e10, 1.0e9, 5.0e10];
    let mut columns = Vec::new();
    for (i, (coin, _)) in SYNTH_COINS.iter().enumerate() {
        let mut p = base_price[i];
        let mut prices = Vec::with_capacity(days);
        let mut vols = Vec::with_capacity(days);
        let mut logv: f64 = 0.0;
        for t in 0..days {
            if t > 0 {
                p *= ret[(t, i)].exp();
            }
            prices.push(p);
            let z: f64 = StandardNormal.sample(&mut r);
            logv = 0.6 * logv + 5.0 * ret[(t, i)].abs() + 0.15 * z;
            vols.push(base_volume[i] * logv.exp());
        }
        columns.push((format!("{coin}_price"), prices));
        columns.push((format!("{coin}_volume"), vols));
    }
    let market = SeriesPanel::from_columns(dates.clone(), columns).expect("consistent columns");

    // Item-level records whose daily means track the indices.
    let mut records = Vec::new();
    let mut texts = Vec::new();
    for (t, date) in dates.iter().enumerate() {
        for (platform, level, per_day) in [(Platform::Twitter, tw[t], 12usize), (Platform::Tiktok, tk[t], 6)] {
            let n = per_day + r.random_range(0..per_day);
            for k in 0..n {
                let noise: f64 = StandardNormal.sample(&mut r);
                let score = (level + 1.5 * noise).clamp(0.0, 10.0);
                let secs = r.random_range(0..86_400i64);
                let ts = Utc.from_utc_datetime(&date.and_hms_opt(0, 0, 0).expect("midnight"))
                    + Duration::seconds(secs);
                let id = format!("{}-{}-{k}", &platform.as_str()[..2], date.format("%Y%m%d"));
                records.push(SentimentRecord {
                    platform,
                    timestamp: ts,
                    score,
                    item_id: id.clone(),
                });
                if k < 2 {
                    let topic = r.random_range(0..TOPIC_WORDS.len());
                    let words = TOPIC_WORDS[topic];
                    let len = 6 + r.random_range(0..6);
                    let mut text: Vec<String> = (0..len)
                        .map(|_| words[r.random_range(0..words.len())].to_string())
                        .collect();
                    text.insert(len / 2, "the".into());
                    if r.random_bool(0.3) {
                        text.push("https://t.co/x".into());
                    }
                    texts.push((id, text.join(" ")));
                }
            }
        }
    }

    SyntheticDataset {
        market,
        records,
        texts,
    }
}
