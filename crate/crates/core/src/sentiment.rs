//! Daily sentiment inclination index (TSI) per platform.
//!
//! Each scored item carries a value on a 0–10 scale (0 = strong confidence
//! in a decline, 5 = neutral, 10 = strong confidence in a rise). The daily
//! index is the arithmetic mean of the item scores falling on that UTC day.

use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;
use std::time::Duration;

use chrono::{DateTime, NaiveDate, Utc};
use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{SeriesPanel, Transformed};

#[derive(Debug, Error)]
pub enum SentimentError {
    #[error("item {item_id:?}: score {score} outside [0, 10]")]
    ScoreOutOfRange { item_id: String, score: f64 },
    #[error("unknown platform {0:?}")]
    UnknownPlatform(String),
    #[error("no records for platform {0}")]
    NoRecords(Platform),
    #[error("line {line}: {detail}")]
    BadLine { line: usize, detail: String },
    #[error("empty item id")]
    EmptyId,
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty index series")]
    EmptySeries,
    #[error(transparent)]
    Panel(#[from] crate::ingest::IngestError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("scoring endpoint failed for {failed} item(s); retry later")]
    Retriable { failed: usize, outcome: ScoringOutcome },
}

pub type Result<T> = std::result::Result<T, SentimentError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Platform {
    Twitter,
    Tiktok,
}

impl Platform {
    pub const ALL: [Platform; 2] = [Platform::Twitter, Platform::Tiktok];

    pub fn as_str(self) -> &'static str {
        match self {
            Platform::Twitter => "twitter",
            Platform::Tiktok => "tiktok",
        }
    }

    /// Name of the panel column holding this platform's index.
    pub fn column_name(self) -> String {
        format!("{}_tsi", self.as_str())
    }
}

impl fmt::Display for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Platform {
    type Err = SentimentError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "twitter" | "x" => Ok(Platform::Twitter),
            "tiktok" => Ok(Platform::Tiktok),
            other => Err(SentimentError::UnknownPlatform(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentRecord {
    pub platform: Platform,
    pub timestamp: DateTime<Utc>,
    pub score: f64,
    #[serde(rename = "id")]
    pub item_id: String,
}

impl SentimentRecord {
    pub fn new(platform: Platform, timestamp: DateTime<Utc>, score: f64, item_id: &str) -> Result<Self> {
        let rec = Self {
            platform,
            timestamp,
            score,
            item_id: item_id.to_string(),
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.item_id.is_empty() {
            return Err(SentimentError::EmptyId);
        }
        check_score(&self.item_id, self.score)
    }

    pub fn day(&self) -> NaiveDate {
        self.timestamp.date_naive()
    }
}

fn check_score(item_id: &str, score: f64) -> Result<()> {
    if (0.0..=10.0).contains(&score) {
        Ok(())
    } else {
        Err(SentimentError::ScoreOutOfRange {
            item_id: item_id.to_string(),
            score,
        })
    }
}

/// JSONL line shape; `score` may be a list when an item was scored several
/// times (e.g. multiple sampled reasoning paths). Those are averaged.
#[derive(Deserialize)]
struct RawRecord {
    platform: String,
    timestamp: String,
    score: RawScore,
    id: String,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawScore {
    One(f64),
    Many(Vec<f64>),
}

fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    if let Ok(t) = chrono::NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S") {
        return Some(t.and_utc());
    }
    if let Ok(t) = chrono::NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S") {
        return Some(t.and_utc());
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|t| t.and_utc())
}

/// Reads pre-scored records, one JSON object per line. Blank lines are skipped.
pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Vec<SentimentRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |detail: String| SentimentError::BadLine { line: i + 1, detail };
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        let platform: Platform = raw.platform.parse()?;
        let timestamp =
            parse_timestamp(&raw.timestamp).ok_or_else(|| bad(format!("bad timestamp {:?}", raw.timestamp)))?;
        let score = match raw.score {
            RawScore::One(s) => s,
            RawScore::Many(v) if v.is_empty() => return Err(bad("empty score list".into())),
            RawScore::Many(v) => {
                for &s in &v {
                    check_score(&raw.id, s)?;
                }
                v.iter().sum::<f64>() / v.len() as f64
            }
        };
        out.push(SentimentRecord::new(platform, timestamp, score, &raw.id)?);
    }
    Ok(out)
}

pub fn write_jsonl<W: std::io::Write>(records: &[SentimentRecord], mut out: W) -> std::io::Result<()> {
    for r in records {
        let line = serde_json::json!({
            "platform": r.platform,
            "timestamp": r.timestamp.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            "score": r.score,
            "id": r.item_id,
        });
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Daily index for one platform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentIndexSeries {
    pub platform: Platform,
    pub dates: Vec<NaiveDate>,
    pub tsi: Vec<f64>,
    pub counts: Vec<usize>,
}

impl SentimentIndexSeries {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }
}

/// Per-day running sums. Accumulators over disjoint shards of the records
/// can be merged and yield the same index as a single pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TsiAccumulator {
    days: BTreeMap<NaiveDate, (f64, usize)>,
}

impl TsiAccumulator {
    pub fn add(&mut self, record: &SentimentRecord) -> Result<()> {
        record.validate()?;
        let e = self.days.entry(record.day()).or_insert((0.0, 0));
        e.0 += record.score;
        e.1 += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &TsiAccumulator) {
        for (day, (sum, n)) in &other.days {
            let e = self.days.entry(*day).or_insert((0.0, 0));
            e.0 += sum;
            e.1 += n;
        }
    }

    pub fn finish(&self, platform: Platform) -> Result<SentimentIndexSeries> {
        if self.days.is_empty() {
            return Err(SentimentError::NoRecords(platform));
        }
        let mut s = SentimentIndexSeries {
            platform,
            dates: Vec::with_capacity(self.days.len()),
            tsi: Vec::with_capacity(self.days.len()),
            counts: Vec::with_capacity(self.days.len()),
        };
        for (day, &(sum, n)) in &self.days {
            s.dates.push(*day);
            // Floating sums can drift a hair outside the score range.
            s.tsi.push((sum / n as f64).clamp(0.0, 10.0));
            s.counts.push(n);
        }
        Ok(s)
    }
}

/// Buckets the platform's records by UTC day and averages their scores.
/// Records of other platforms are ignored; days without records are absent.
pub fn aggregate_tsi(records: &[SentimentRecord], platform: Platform) -> Result<SentimentIndexSeries> {
    let mut acc = TsiAccumulator::default();
    for r in records.iter().filter(|r| r.platform == platform) {
        acc.add(r)?;
    }
    acc.finish(platform)
}

/// Adds `<platform>_tsi` to the panel. Panel dates without an index value
/// become missing cells.
pub fn merge_sentiment(panel: &SeriesPanel, series: &SentimentIndexSeries) -> Result<Transformed> {
    if series.is_empty() {
        return Err(SentimentError::EmptySeries);
    }
    if panel.is_empty() {
        return Err(crate::ingest::IngestError::EmptyPanel.into());
    }
    let by_day: BTreeMap<NaiveDate, f64> = series
        .dates
        .iter()
        .copied()
        .zip(series.tsi.iter().copied())
        .collect();
    let column: Vec<Option<f64>> = panel.dates().iter().map(|d| by_day.get(d).copied()).collect();
    let mut warnings = Vec::new();
    if column.iter().all(Option::is_none) {
        let msg = format!(
            "{}: no sentiment dates overlap the panel; column is entirely missing",
            series.platform
        );
        warn!("{msg}");
        warnings.push(msg);
    }
    let panel = panel.with_column(&series.platform.column_name(), column)?;
    Ok(Transformed { panel, warnings })
}

// ---------------------------------------------------------------------------
// External scorer endpoint
// ---------------------------------------------------------------------------

/// One text to be scored.
#[derive(Debug, Clone)]
pub struct ScoreItem {
    pub id: String,
    pub text: String,
    pub platform: Platform,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScoreRequest {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub url: String,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_batch() -> usize {
    32
}
fn default_concurrency() -> usize {
    4
}
fn default_timeout() -> u64 {
    30
}

impl EndpointConfig {
    pub fn new(url: &str) -> Self {
        Self {
            url: url.into(),
            batch_size: default_batch(),
            concurrency: default_concurrency(),
            timeout_secs: default_timeout(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ItemStatus {
    Scored(f64),
    Rejected(String),
    Retriable(String),
}

#[derive(Debug, Clone, Default)]
pub struct ScoringOutcome {
    /// Accepted records, in input order.
    pub records: Vec<SentimentRecord>,
    /// One status per input item, in input order.
    pub statuses: Vec<(String, ItemStatus)>,
}

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("http status {0}")]
    Status(u16),
    #[error("network: {0}")]
    Network(String),
    #[error("malformed response: {0}")]
    Malformed(String),
}

/// Sends one batch and returns the raw JSON array of `{id, score}` objects.
pub trait ScoreTransport: Sync {
    fn post(&self, batch: &[ScoreRequest]) -> std::result::Result<Vec<serde_json::Value>, TransportError>;
}

pub struct HttpTransport {
    client: reqwest::blocking::Client,
    url: String,
}

impl HttpTransport {
    pub fn new(config: &EndpointConfig) -> std::result::Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        Ok(Self {
            client,
            url: config.url.clone(),
        })
    }
}

impl ScoreTransport for HttpTransport {
    fn post(&self, batch: &[ScoreRequest]) -> std::result::Result<Vec<serde_json::Value>, TransportError> {
        let resp = self
            .client
            .post(&self.url)
            .json(batch)
            .send()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(TransportError::Status(status.as_u16()));
        }
        let body = resp.text().map_err(|e| TransportError::Network(e.to_string()))?;
        serde_json::from_str::<Vec<serde_json::Value>>(&body)
            .map_err(|e| TransportError::Malformed(e.to_string()))
    }
}

/// Scores texts through an HTTP endpoint (`POST [{id, text}]` →
/// `[{id, score}]`).
pub fn score_via_endpoint(items: &[ScoreItem], config: &EndpointConfig) -> Result<ScoringOutcome> {
    if items.is_empty() {
        return Err(SentimentError::EmptyBatch);
    }
    let transport = HttpTransport::new(config).map_err(|e| SentimentError::Retriable {
        failed: items.len(),
        outcome: ScoringOutcome {
            records: Vec::new(),
            statuses: items
                .iter()
                .map(|i| (i.id.clone(), ItemStatus::Retriable(e.to_string())))
                .collect(),
        },
    })?;
    score_with(items, config, &transport)
}

/// Same as [`score_via_endpoint`] with an explicit transport. Batches are
/// sent `concurrency` at a time; results are reassembled in input order.
pub fn score_with<T: ScoreTransport>(
    items: &[ScoreItem],
    config: &EndpointConfig,
    transport: &T,
) -> Result<ScoringOutcome> {
    if items.is_empty() {
        return Err(SentimentError::EmptyBatch);
    }
    let batches: Vec<&[ScoreItem]> = items.chunks(config.batch_size.max(1)).collect();
    let mut results: Vec<Vec<ItemStatus>> = Vec::with_capacity(batches.len());
    for group in batches.chunks(config.concurrency.max(1)) {
        let group_results: Vec<Vec<ItemStatus>> = std::thread::scope(|scope| {
            let handles: Vec<_> = group
                .iter()
                .map(|batch| scope.spawn(move || score_batch(batch, transport)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("scoring thread panicked"))
                .collect()
        });
        results.extend(group_results);
    }

    let mut outcome = ScoringOutcome::default();
    let mut failed = 0;
    for (item, status) in items.iter().zip(results.into_iter().flatten()) {
        match &status {
            ItemStatus::Scored(s) => outcome.records.push(SentimentRecord {
                platform: item.platform,
                timestamp: item.timestamp,
                score: *s,
                item_id: item.id.clone(),
            }),
            ItemStatus::Rejected(why) => warn!("item {:?} rejected: {why}", item.id),
            ItemStatus::Retriable(_) => failed += 1,
        }
        outcome.statuses.push((item.id.clone(), status));
    }
    if failed > 0 {
        return Err(SentimentError::Retriable { failed, outcome });
    }
    Ok(outcome)
}

fn score_batch<T: ScoreTransport>(batch: &[ScoreItem], transport: &T) -> Vec<ItemStatus> {
    let req: Vec<ScoreRequest> = batch
        .iter()
        .map(|i| ScoreRequest {
            id: i.id.clone(),
            text: i.text.clone(),
        })
        .collect();
    let values = match transport.post(&req) {
        Ok(v) => v,
        Err(TransportError::Malformed(e)) => {
            return batch
                .iter()
                .map(|_| ItemStatus::Rejected(format!("malformed response: {e}")))
                .collect()
        }
        Err(e) => return batch.iter().map(|_| ItemStatus::Retriable(e.to_string())).collect(),
    };

    let mut by_id: BTreeMap<String, std::result::Result<f64, String>> = BTreeMap::new();
    for v in values {
        let id = v.get("id").and_then(|x| x.as_str()).map(str::to_string);
        let score = v.get("score").and_then(|x| x.as_f64());
        if let Some(id) = id {
            let entry = match score {
                Some(s) => check_score(&id, s).map(|_| s).map_err(|e| e.to_string()),
                None => Err(format!("missing or non-numeric score in {v}")),
            };
            by_id.insert(id, entry);
        }
    }
    batch
        .iter()
        .map(|item| match by_id.remove(&item.id) {
            Some(Ok(s)) => ItemStatus::Scored(s),
            Some(Err(why)) => ItemStatus::Rejected(why),
            None => ItemStatus::Rejected("no score returned".into()),
        })
        .collect()
}
