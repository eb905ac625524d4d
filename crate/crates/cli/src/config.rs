use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use cryptosent::connectedness::{NetworkMode, NonPdPolicy, TciVariant};
use cryptosent::forecast::{ForecasterKind, SplitSpec};
use cryptosent::multiscale::DEFAULT_WINDOWS;
use cryptosent::sentiment::{EndpointConfig, Platform};
use cryptosent::stats::{CriticalValueMode, Deterministic, LagSelection};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub input: InputConfig,
    pub coins: Vec<CoinConfig>,
    pub transform: TransformConfig,
    pub sentiment: SentimentConfig,
    pub stationarity: StationarityConfig,
    pub connectedness: ConnectednessConfig,
    pub rolling: RollingConfig,
    pub wavelet: WaveletConfig,
    pub topics: TopicsConfig,
    pub forecast: ForecastConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            out: PathBuf::from("out"),
            input: InputConfig::default(),
            coins: Vec::new(),
            transform: TransformConfig::default(),
            sentiment: SentimentConfig::default(),
            stationarity: StationarityConfig::default(),
            connectedness: ConnectednessConfig::default(),
            rolling: RollingConfig::default(),
            wavelet: WaveletConfig::default(),
            topics: TopicsConfig::default(),
            forecast: ForecastConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    /// Daily price/volume CSV files, unioned by date.
    pub market: Vec<PathBuf>,
    pub date_column: String,
    /// Scored item records (JSON lines).
    pub sentiment: Vec<PathBuf>,
    /// Unscored items (JSON lines with id, platform, timestamp, text),
    /// sent to the scoring endpoint when one is configured.
    pub items: Option<PathBuf>,
    /// CSV with `id,text` columns for topic clustering.
    pub texts: Option<PathBuf>,
}

impl Default for InputConfig {
    fn default() -> Self {
        Self {
            market: Vec::new(),
            date_column: "date".into(),
            sentiment: Vec::new(),
            items: None,
            texts: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoinGroup {
    #[serde(rename = "gold2.0")]
    Gold,
    #[serde(rename = "altcoin")]
    Altcoin,
    #[serde(rename = "stablecoin")]
    Stablecoin,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoinConfig {
    pub symbol: String,
    pub group: CoinGroup,
    /// Source price column; defaults to `<symbol>_price`.
    #[serde(default)]
    pub price: Option<String>,
    /// Source volume column; defaults to `<symbol>_volume`.
    #[serde(default)]
    pub volume: Option<String>,
}

impl CoinConfig {
    pub fn price_column(&self) -> String {
        self.price.clone().unwrap_or_else(|| format!("{}_price", self.symbol))
    }

    pub fn volume_column(&self) -> String {
        self.volume.clone().unwrap_or_else(|| format!("{}_volume", self.symbol))
    }

    /// Derived return series, e.g. `BTCPRC`.
    pub fn return_name(&self) -> String {
        format!("{}PRC", self.symbol)
    }

    /// Derived volume-change series, e.g. `BTCVOL`.
    pub fn volume_name(&self) -> String {
        format!("{}VOL", self.symbol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReturnKind {
    Log,
    Simple,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Completion {
    Drop,
    ForwardFill,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformConfig {
    pub returns: ReturnKind,
    pub completion: Completion,
    /// Longest run of missing days bridged by forward fill.
    pub max_gap: usize,
}

impl Default for TransformConfig {
    fn default() -> Self {
        Self {
            returns: ReturnKind::Log,
            completion: Completion::Drop,
            max_gap: 3,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SentimentConfig {
    pub endpoint: Option<EndpointConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StationarityConfig {
    pub deterministic: Deterministic,
    pub max_lag: usize,
    pub lag_selection: LagSelection,
    pub critical_values: CriticalValueMode,
}

impl Default for StationarityConfig {
    fn default() -> Self {
        Self {
            deterministic: Deterministic::Constant,
            max_lag: 4,
            lag_selection: LagSelection::Aic,
            critical_values: CriticalValueMode::Asymptotic,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConnectednessConfig {
    /// Panel variables in the VAR; empty means every coin return plus
    /// both sentiment indices.
    pub variables: Vec<String>,
    /// Fixed VAR order; when absent the order is chosen by BIC.
    pub var_order: Option<usize>,
    pub max_order: usize,
    pub horizon: usize,
    pub tci: TciVariant,
    pub dynamic: bool,
    pub non_pd: NonPdPolicy,
    pub network_mode: NetworkMode,
    /// Edge threshold; defaults to the 75th percentile of edge weights.
    pub threshold: Option<f64>,
}

impl Default for ConnectednessConfig {
    fn default() -> Self {
        Self {
            variables: Vec::new(),
            var_order: None,
            max_order: 5,
            horizon: 10,
            tci: TciVariant::Standard,
            dynamic: true,
            non_pd: NonPdPolicy::Skip,
            network_mode: NetworkMode::NetPairwise,
            threshold: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RollingConfig {
    pub windows: Vec<usize>,
    /// Market series correlated with each sentiment index; empty means
    /// every coin return.
    pub targets: Vec<String>,
    pub min_prominence: f64,
    /// Defaults to half the window.
    pub min_separation: Option<usize>,
}

impl Default for RollingConfig {
    fn default() -> Self {
        Self {
            windows: DEFAULT_WINDOWS.to_vec(),
            targets: Vec::new(),
            min_prominence: 0.25,
            min_separation: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveletConfig {
    /// Upper bound on the decomposition depth; reduced to fit short series.
    pub levels: usize,
    /// Empty means every panel variable.
    pub variables: Vec<String>,
}

impl Default for WaveletConfig {
    fn default() -> Self {
        Self {
            levels: 8,
            variables: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopicsConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub kmeans_max_iter: usize,
    pub lda_topics: usize,
    pub lda_iterations: usize,
    /// Defaults to 50 / lda_topics.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub top_words: usize,
    pub min_token_len: usize,
    pub min_doc_freq: usize,
    /// One word per line; replaces the built-in English list.
    pub stopwords: Option<PathBuf>,
}

impl Default for TopicsConfig {
    fn default() -> Self {
        Self {
            k_min: 2,
            k_max: 8,
            kmeans_max_iter: 300,
            lda_topics: 4,
            lda_iterations: 1000,
            alpha: None,
            beta: 0.01,
            top_words: 20,
            min_token_len: 2,
            min_doc_freq: 2,
            stopwords: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastConfig {
    /// Empty means every coin's return and volume change.
    pub targets: Vec<String>,
    pub channel_sets: Vec<Vec<Platform>>,
    /// Adds a scenario without sentiment channels as a second baseline.
    pub include_baseline: bool,
    pub scales: Vec<usize>,
    pub forecasters: Vec<ForecasterKind>,
    pub lags: usize,
    pub horizon: usize,
    pub split: SplitSpec,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            targets: Vec::new(),
            channel_sets: vec![
                vec![Platform::Twitter],
                vec![Platform::Tiktok],
                vec![Platform::Twitter, Platform::Tiktok],
            ],
            include_baseline: true,
            scales: DEFAULT_WINDOWS.to_vec(),
            forecasters: vec![ForecasterKind::Ridge],
            lags: 3,
            horizon: 1,
            split: SplitSpec::default(),
        }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    /// Parses a TOML file without touching the paths it names.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::InputMissing(format!("config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))
    }

    /// Makes relative input paths relative to `base` (the config's directory).
    pub fn resolve_paths(&mut self, base: &Path) {
        for p in self.input.market.iter_mut().chain(self.input.sentiment.iter_mut()) {
            resolve(base, p);
        }
        for p in [&mut self.input.items, &mut self.input.texts, &mut self.topics.stopwords]
            .into_iter()
            .flatten()
        {
            resolve(base, p);
        }
    }

    /// SHA-256 of the canonical JSON form, excluding the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        let json = serde_json::to_string(&c).expect("config serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let cfg = |m: String| Err(CliError::Config(m));
        if self.coins.is_empty() {
            return cfg("at least one [[coins]] entry is required".into());
        }
        let mut seen = BTreeSet::new();
        for c in &self.coins {
            if c.symbol.is_empty() || !seen.insert(c.symbol.clone()) {
                return cfg(format!("coin symbol {:?} is empty or repeated", c.symbol));
            }
        }
        if self.input.market.is_empty() {
            return cfg("input.market lists no files".into());
        }
        if self.rolling.windows.is_empty() {
            return cfg("rolling.windows is empty".into());
        }
        if self.rolling.windows.iter().any(|&w| w < 3) {
            return cfg("rolling windows must be at least 3 days".into());
        }
        if self.connectedness.horizon == 0 {
            return cfg("connectedness.horizon must be at least 1".into());
        }
        if self.topics.k_min < 2 || self.topics.k_max < self.topics.k_min {
            return cfg(format!("invalid topics k range {}..={}", self.topics.k_min, self.topics.k_max));
        }
        if let Some(s) = self.forecast.scales.iter().find(|s| !DEFAULT_WINDOWS.contains(s)) {
            return cfg(format!("forecast scale {s} is not one of {DEFAULT_WINDOWS:?}"));
        }
        if self.forecast.forecasters.is_empty() {
            return cfg("forecast.forecasters is empty".into());
        }
        self.forecast.split.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let files = self
            .input
            .market
            .iter()
            .chain(&self.input.sentiment)
            .chain(&self.input.items)
            .chain(&self.input.texts)
            .chain(&self.topics.stopwords);
        for f in files {
            if !f.is_file() {
                return Err(CliError::InputMissing(format!("{} does not exist", f.display())));
            }
        }
        Ok(())
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
