//! Text preprocessing, TF-IDF, k-means, PCA projection, LDA and silhouette
//! model selection.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simulate::rng;

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

#[derive(Debug, Error, PartialEq)]
pub enum TopicsError {
    #[error("no input documents")]
    EmptyInput,
    #[error("all {0} documents were emptied by preprocessing")]
    AllDropped(usize),
    #[error("k = {k} exceeds the {rows} available rows")]
    TooManyClusters { k: usize, rows: usize },
    #[error("k must be at least 1")]
    ZeroClusters,
    #[error("input has zero variance")]
    ZeroVariance,
    #[error("need at least {needed} rows and columns, got {rows}×{cols}")]
    TooSmall { needed: usize, rows: usize, cols: usize },
    #[error("invalid k range {lo}..={hi} for {rows} rows")]
    InvalidRange { lo: usize, hi: usize, rows: usize },
    #[error("iterations must be at least 1")]
    ZeroIterations,
    #[error("number of topics must be at least 1")]
    ZeroTopics,
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
}

pub type Result<T> = std::result::Result<T, TopicsError>;

pub fn default_stopwords() -> BTreeSet<String> {
    DEFAULT_STOPWORDS
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect()
}

#[derive(Debug, Clone)]
pub struct PreprocessOptions {
    pub stopwords: BTreeSet<String>,
    pub min_token_len: usize,
    /// Tokens appearing in fewer documents are removed.
    pub min_doc_freq: usize,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        Self {
            stopwords: default_stopwords(),
            min_token_len: 2,
            min_doc_freq: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub ids: Vec<String>,
    /// Token indices into `vocabulary`.
    pub docs: Vec<Vec<usize>>,
    /// Sorted; the index of a word is its position.
    pub vocabulary: Vec<String>,
    /// Ids of documents that preprocessing emptied.
    pub dropped: Vec<String>,
}

/// Lowercased tokens with URLs, @-mentions and punctuation removed.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter(|w| {
            let l = w.to_lowercase();
            !(l.starts_with("http://") || l.starts_with("https://") || l.starts_with("www.") || l.starts_with('@'))
        })
        .flat_map(|w| {
            w.to_lowercase()
                .chars()
                .map(|c| if c.is_alphanumeric() { c } else { ' ' })
                .collect::<String>()
                .split_whitespace()
                .map(String::from)
                .collect::<Vec<_>>()
        })
        .collect()
}

impl Corpus {
    /// Builds the vocabulary from already tokenized documents. Empty
    /// documents are dropped.
    pub fn from_tokens(docs: Vec<(String, Vec<String>)>) -> Result<Self> {
        if docs.is_empty() {
            return Err(TopicsError::EmptyInput);
        }
        let total = docs.len();
        let vocabulary: Vec<String> = docs
            .iter()
            .flat_map(|(_, t)| t.iter().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: BTreeMap<&str, usize> = vocabulary.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
        let mut corpus = Corpus {
            ids: Vec::new(),
            docs: Vec::new(),
            vocabulary: Vec::new(),
            dropped: Vec::new(),
        };
        for (id, tokens) in &docs {
            if tokens.is_empty() {
                corpus.dropped.push(id.clone());
            } else {
                corpus.ids.push(id.clone());
                corpus.docs.push(tokens.iter().map(|t| index[t.as_str()]).collect());
            }
        }
        if corpus.docs.is_empty() {
            return Err(TopicsError::AllDropped(total));
        }
        corpus.vocabulary = vocabulary;
        Ok(corpus)
    }

    pub fn n_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn n_words(&self) -> usize {
        self.vocabulary.len()
    }
}

/// Tokenizes, removes stopwords, short tokens and rare tokens, and drops
/// documents left empty.
pub fn preprocess(texts: &[(String, String)], opts: &PreprocessOptions) -> Result<Corpus> {
    if texts.is_empty() {
        return Err(TopicsError::EmptyInput);
    }
    let mut docs: Vec<(String, Vec<String>)> = texts
        .iter()
        .map(|(id, text)| {
            let tokens = tokenize(text)
                .into_iter()
                .filter(|t| t.chars().count() >= opts.min_token_len && !opts.stopwords.contains(t))
                .collect();
            (id.clone(), tokens)
        })
        .collect();
    if opts.min_doc_freq > 1 {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for (_, tokens) in &docs {
            for t in tokens.iter().collect::<BTreeSet<_>>() {
                *df.entry(t.clone()).or_default() += 1;
            }
        }
        for (_, tokens) in &mut docs {
            tokens.retain(|t| df[t] >= opts.min_doc_freq);
        }
    }
    let corpus = Corpus::from_tokens(docs)?;
    if !corpus.dropped.is_empty() {
        log::info!("{} documents emptied by preprocessing", corpus.dropped.len());
    }
    Ok(corpus)
}

/// Document × vocabulary weights: `tf = count/length`,
/// `idf = ln((1 + D)/(1 + df)) + 1`, rows scaled to unit L2 norm.
pub fn tfidf(corpus: &Corpus) -> DMatrix<f64> {
    let (d, v) = (corpus.n_docs(), corpus.n_words());
    let mut df = vec![0usize; v];
    for doc in &corpus.docs {
        for w in doc.iter().collect::<BTreeSet<_>>() {
            df[*w] += 1;
        }
    }
    let idf: Vec<f64> = df
        .iter()
        .map(|&f| ((1.0 + d as f64) / (1.0 + f as f64)).ln() + 1.0)
        .collect();
    let mut m = DMatrix::zeros(d, v);
    for (i, doc) in corpus.docs.iter().enumerate() {
        let len = doc.len() as f64;
        for &w in doc {
            m[(i, w)] += 1.0 / len;
        }
        for w in 0..v {
            m[(i, w)] *= idf[w];
        }
        let norm = m.row(i).norm();
        if norm > 0.0 {
            m.row_mut(i).unscale_mut(norm);
        }
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeans {
    pub assignments: Vec<usize>,
    #[serde(skip)]
    pub centroids: DMatrix<f64>,
    pub inertia: f64,
    /// Inertia after each Lloyd iteration.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn sq_dist(x: &DMatrix<f64>, i: usize, c: &DMatrix<f64>, k: usize) -> f64 {
    x.row(i).iter().zip(c.row(k).iter()).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn plus_plus_init(x: &DMatrix<f64>, k: usize, r: &mut impl Rng) -> DMatrix<f64> {
    let n = x.nrows();
    let mut chosen = vec![r.random_range(0..n)];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(x, i, &x.rows(chosen[0], 1).into_owned(), 0)).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = r.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).expect("positive total"))
        } else {
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[r.random_range(0..free.len())]
        };
        chosen.push(next);
        let row = x.rows(next, 1).into_owned();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(x, i, &row, 0));
        }
    }
    DMatrix::from_fn(k, x.ncols(), |c, j| x[(chosen[c], j)])
}

fn assign(x: &DMatrix<f64>, c: &DMatrix<f64>) -> Vec<(usize, f64)> {
    (0..x.nrows())
        .into_par_iter()
        .map(|i| {
            (0..c.nrows())
                .map(|k| (k, sq_dist(x, i, c, k)))
                .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
        })
        .collect()
}

fn update(x: &DMatrix<f64>, labels: &[usize], k: usize) -> (DMatrix<f64>, Vec<usize>) {
    let mut c = DMatrix::zeros(k, x.ncols());
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        let mut row = c.row_mut(l);
        row += x.row(i);
    }
    for (l, &n) in counts.iter().enumerate() {
        if n > 0 {
            c.row_mut(l).unscale_mut(n as f64);
        }
    }
    (c, counts)
}

fn inertia(x: &DMatrix<f64>, c: &DMatrix<f64>, labels: &[usize]) -> f64 {
    labels.iter().enumerate().map(|(i, &l)| sq_dist(x, i, c, l)).sum()
}

/// k-means++ seeding followed by Lloyd iterations until the assignment
/// stops changing. An empty cluster takes the point farthest from its
/// centroid.
pub fn kmeans(x: &DMatrix<f64>, k: usize, seed: u64, max_iter: usize) -> Result<KMeans> {
    if k == 0 {
        return Err(TopicsError::ZeroClusters);
    }
    if k > x.nrows() {
        return Err(TopicsError::TooManyClusters { k, rows: x.nrows() });
    }
    let mut r = rng(seed);
    let mut centroids = plus_plus_init(x, k, &mut r);
    let mut labels: Vec<usize> = assign(x, &centroids).into_iter().map(|(l, _)| l).collect();
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let (mut c, mut counts) = update(x, &labels, k);
        while let Some(empty) = counts.iter().position(|&n| n == 0) {
            let far = (0..x.nrows())
                .filter(|&i| counts[labels[i]] > 1)
                .map(|i| (i, sq_dist(x, i, &c, labels[i])))
                .fold((usize::MAX, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best })
                .0;
            counts[labels[far]] -= 1;
            labels[far] = empty;
            counts[empty] = 1;
            let row = x.row(far).into_owned();
            c.set_row(empty, &row);
            let (rc, rn) = update(x, &labels, k);
            c = rc;
            counts = rn;
        }
        centroids = c;
        history.push(inertia(x, &centroids, &labels));
        let next: Vec<usize> = assign(x, &centroids).into_iter().map(|(l, _)| l).collect();
        if next == labels {
            converged = true;
            break;
        }
        labels = next;
    }
    let inertia = inertia(x, &centroids, &labels);
    Ok(KMeans {
        assignments: labels,
        centroids,
        inertia,
        history,
        iterations,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pca2 {
    /// Rows × 2 projected coordinates.
    pub coords: DMatrix<f64>,
    /// Fraction of total variance on each component.
    pub explained: [f64; 2],
    /// Columns × 2 loadings.
    pub loadings: DMatrix<f64>,
}

/// Projection of the column-centered data on its top two right singular
/// vectors. Each loading vector is signed so its largest-magnitude entry
/// is positive.
pub fn pca2(x: &DMatrix<f64>) -> Result<Pca2> {
    let (n, p) = x.shape();
    if n < 2 || p < 2 {
        return Err(TopicsError::TooSmall { needed: 2, rows: n, cols: p });
    }
    let means = x.row_mean();
    let centered = DMatrix::from_fn(n, p, |i, j| x[(i, j)] - means[j]);
    let svd = centered.clone().svd(false, true);
    let vt = svd.v_t.expect("requested right singular vectors");
    let s2: Vec<f64> = svd.singular_values.iter().map(|s| s * s).collect();
    let total: f64 = s2.iter().sum();
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(total > (1e-12 * scale).powi(2) * (n * p) as f64) {
        return Err(TopicsError::ZeroVariance);
    }
    let mut order: Vec<usize> = (0..s2.len()).collect();
    order.sort_by(|&a, &b| s2[b].total_cmp(&s2[a]));
    let mut loadings = DMatrix::zeros(p, 2);
    let mut explained = [0.0; 2];
    for (c, &k) in order.iter().take(2).enumerate() {
        let mut v = vt.row(k).transpose();
        let lead = v.iter().fold(0.0f64, |m, &e| if e.abs() > m.abs() { e } else { m });
        if lead < 0.0 {
            v.neg_mut();
        }
        loadings.set_column(c, &v);
        explained[c] = s2[k] / total;
    }
    Ok(Pca2 {
        coords: centered * &loadings,
        explained,
        loadings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdaOptions {
    pub topics: usize,
    /// Defaults to `50/K`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl LdaOptions {
    pub fn new(topics: usize, seed: u64) -> Self {
        Self {
            topics,
            alpha: None,
            beta: 0.01,
            iterations: 1000,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub topics: usize,
    /// Topic-word distributions, one row per topic.
    pub phi: Vec<Vec<f64>>,
    /// Document-topic distributions, one row per document.
    pub theta: Vec<Vec<f64>>,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

fn normalized(v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

/// Collapsed Gibbs sampler; `φ` and `θ` come from the final sample's
/// counts with Dirichlet smoothing.
pub fn lda_gibbs(corpus: &Corpus, opts: LdaOptions) -> Result<TopicModel> {
    let k = opts.topics;
    if k == 0 {
        return Err(TopicsError::ZeroTopics);
    }
    if opts.iterations == 0 {
        return Err(TopicsError::ZeroIterations);
    }
    let alpha = opts.alpha.unwrap_or(50.0 / k as f64);
    let beta = opts.beta;
    let v = corpus.n_words();
    let vbeta = v as f64 * beta;
    let mut r = rng(opts.seed);

    let mut nkw = vec![0usize; k * v];
    let mut nk = vec![0usize; k];
    let mut ndk = vec![vec![0usize; k]; corpus.n_docs()];
    let mut z: Vec<Vec<usize>> = corpus
        .docs
        .iter()
        .enumerate()
        .map(|(d, doc)| {
            doc.iter()
                .map(|&w| {
                    let t = r.random_range(0..k);
                    nkw[t * v + w] += 1;
                    nk[t] += 1;
                    ndk[d][t] += 1;
                    t
                })
                .collect()
        })
        .collect();

    let mut p = vec![0.0f64; k];
    for _ in 0..opts.iterations {
        for (d, doc) in corpus.docs.iter().enumerate() {
            for (i, &w) in doc.iter().enumerate() {
                let old = z[d][i];
                nkw[old * v + w] -= 1;
                nk[old] -= 1;
                ndk[d][old] -= 1;
                let mut acc = 0.0;
                for t in 0..k {
                    acc += (ndk[d][t] as f64 + alpha) * (nkw[t * v + w] as f64 + beta) / (nk[t] as f64 + vbeta);
                    p[t] = acc;
                }
                let u = r.random::<f64>() * acc;
                let new = p.iter().position(|&c| c > u).unwrap_or(k - 1);
                z[d][i] = new;
                nkw[new * v + w] += 1;
                nk[new] += 1;
                ndk[d][new] += 1;
            }
        }
    }

    let phi = (0..k)
        .map(|t| normalized((0..v).map(|w| nkw[t * v + w] as f64 + beta).collect()))
        .collect();
    let theta = ndk
        .iter()
        .map(|row| normalized(row.iter().map(|&c| c as f64 + alpha).collect()))
        .collect();
    Ok(TopicModel {
        topics: k,
        phi,
        theta,
        alpha,
        beta,
        iterations: opts.iterations,
        seed: opts.seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicWords {
    pub topic: usize,
    pub words: Vec<(String, f64)>,
}

/// Highest-probability words per topic, ties broken alphabetically.
pub fn top_words(model: &TopicModel, vocabulary: &[String], n: usize) -> Vec<TopicWords> {
    model
        .phi
        .iter()
        .enumerate()
        .map(|(topic, row)| {
            let mut idx: Vec<usize> = (0..row.len()).collect();
            idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
            TopicWords {
                topic,
                words: idx.into_iter().take(n).map(|w| (vocabulary[w].clone(), row[w])).collect(),
            }
        })
        .collect()
}

/// Mean silhouette with Euclidean distance; singleton clusters score 0.
pub fn silhouette(x: &DMatrix<f64>, labels: &[usize]) -> f64 {
    let n = x.nrows();
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    let scores: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let own = labels[i];
            if sizes[own] <= 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            for j in 0..n {
                if j != i {
                    sums[labels[j]] += (x.row(i) - x.row(j)).norm();
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own && sizes[c] > 0)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            if !b.is_finite() {
                return 0.0;
            }
            let m = a.max(b);
            if m > 0.0 {
                (b - a) / m
            } else {
                0.0
            }
        })
        .collect();
    scores.iter().sum::<f64>() / n as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub best: usize,
    /// `(k, mean silhouette)` for each candidate.
    pub scores: Vec<(usize, f64)>,
}

/// Runs k-means for each `k` in `lo..=hi` and keeps the best mean
/// silhouette; ties go to the smaller `k`.
pub fn select_k(x: &DMatrix<f64>, lo: usize, hi: usize, seed: u64) -> Result<KSelection> {
    let rows = x.nrows();
    if lo < 2 || hi < lo || hi + 1 > rows {
        return Err(TopicsError::InvalidRange { lo, hi, rows });
    }
    let first = x.row(0);
    if (1..rows).all(|i| x.row(i) == first) {
        return Err(TopicsError::ZeroVariance);
    }
    let scores: Vec<(usize, f64)> = (lo..=hi)
        .into_par_iter()
        .map(|k| kmeans(x, k, seed, 300).map(|m| (k, silhouette(x, &m.assignments))))
        .collect::<Result<_>>()?;
    let best = scores
        .iter()
        .fold((0, f64::NEG_INFINITY), |b, &(k, s)| if s > b.1 { (k, s) } else { b })
        .0;
    Ok(KSelection { best, scores })
}

/// `doc_id,cluster,pc1,pc2`.
pub fn cluster_map_csv(ids: &[String], labels: &[usize], coords: &DMatrix<f64>) -> Result<String> {
    if ids.len() != labels.len() || ids.len() != coords.nrows() {
        return Err(TopicsError::LengthMismatch(format!(
            "{} ids, {} labels, {} coordinates",
            ids.len(),
            labels.len(),
            coords.nrows()
        )));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["doc_id", "cluster", "pc1", "pc2"]).expect("in-memory csv");
    for (i, id) in ids.iter().enumerate() {
        let rec = [
            id.clone(),
            labels[i].to_string(),
            format!("{:.8}", coords[(i, 0)]),
            format!("{:.8}", coords[(i, 1)]),
        ];
        w.write_record(&rec).expect("in-memory csv");
    }
    Ok(String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8"))
}
