use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use chrono::{DateTime, NaiveDate, Utc};
use cryptosent::connectedness::{
    dynamic_connectedness, dynamic_series, export_network, static_connectedness, DailyConnectedness,
};
use cryptosent::forecast::{scenario_matrix, HarnessConfig, Scenario};
use cryptosent::ingest::{
    align_and_complete, compute_return, load_panel, volume_change, ColumnMapping, CompletionPolicy, FillReport,
    SeriesPanel, TransformKind, TransformSpec,
};
use cryptosent::multiscale::{count_peaks, modwt, sweep, PeakOptions, PeakReport};
use cryptosent::sentiment::{
    aggregate_tsi, merge_sentiment, read_jsonl, score_via_endpoint, Platform, ScoreItem, SentimentIndexSeries,
    SentimentRecord,
};
use cryptosent::stats::{adf_test, jarque_bera, unit_root_table_csv, AdfOptions, AdfResult, DiagnosticRow, JbResult};
use cryptosent::topics::{
    cluster_map_csv, kmeans, lda_gibbs, pca2, preprocess, select_k, tfidf, top_words, LdaOptions, PreprocessOptions,
};
use cryptosent::var::{fit_var, select_order};
use serde::{Deserialize, Serialize};

use crate::artifacts::ArtifactStore;
use crate::config::{Completion, CoinGroup, ReturnKind, RunConfig};
use crate::error::CliError;

/// Pipeline steps in workflow order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Ingest,
    Sentiment,
    Stationarity,
    Connectedness,
    Rolling,
    Wavelet,
    Topics,
    Forecast,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Ingest,
        Stage::Sentiment,
        Stage::Stationarity,
        Stage::Connectedness,
        Stage::Rolling,
        Stage::Wavelet,
        Stage::Topics,
        Stage::Forecast,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Sentiment => "sentiment",
            Stage::Stationarity => "stationarity",
            Stage::Connectedness => "connectedness",
            Stage::Rolling => "rolling",
            Stage::Wavelet => "wavelet",
            Stage::Topics => "topics",
            Stage::Forecast => "forecast",
        }
    }
}

/// Shared inputs, computed once per process and reused by later stages.
pub struct Pipeline<'a> {
    cfg: &'a RunConfig,
    market: Option<Market>,
    indices: Option<Vec<SentimentIndexSeries>>,
    panel: Option<SeriesPanel>,
}

struct Market {
    /// Derived series before completion.
    raw: SeriesPanel,
    complete: SeriesPanel,
    fill: FillReport,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct IngestReport<'a> {
    rows: usize,
    first_date: Option<NaiveDate>,
    last_date: Option<NaiveDate>,
    variables: &'a [String],
    coins: Vec<CoinSummary<'a>>,
    fill: &'a FillReport,
    warnings: &'a [String],
}

#[derive(Serialize)]
struct CoinSummary<'a> {
    symbol: &'a str,
    group: CoinGroup,
    price: String,
    volume: String,
    returns: String,
    volume_change: String,
}

/// Unscored item as read from `input.items`.
#[derive(Deserialize)]
struct ItemLine {
    id: String,
    platform: Platform,
    timestamp: DateTime<Utc>,
    text: String,
}

#[derive(Serialize)]
struct ScoringSummary {
    scored: usize,
    rejected: Vec<(String, String)>,
    retriable: Vec<(String, String)>,
}

#[derive(Serialize)]
struct Diagnostic<'a> {
    variable: &'a str,
    adf: &'a AdfResult,
    jarque_bera: &'a JbResult,
}

#[derive(Serialize)]
struct DynamicReport {
    horizon: usize,
    skipped: Vec<NaiveDate>,
    series: Vec<DailyConnectedness>,
}

#[derive(Serialize)]
struct PeakEntry {
    x: String,
    y: String,
    #[serde(flatten)]
    report: PeakReport,
}

#[derive(Serialize)]
struct RollingReport {
    peaks: Vec<PeakEntry>,
    skipped: Vec<SkippedWindow>,
}

#[derive(Serialize)]
struct SkippedWindow {
    x: String,
    y: String,
    window: usize,
    reason: String,
}

#[derive(Serialize)]
struct WaveletSummary {
    variable: String,
    levels: usize,
    /// Variance of each wavelet coefficient vector `W_1..W_J`.
    wavelet_variance: Vec<f64>,
    /// Variance of the scaling coefficients `V_J`.
    scaling_variance: f64,
    series_variance: f64,
}

fn variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n
}

/// Replaces characters that do not belong in a file name.
fn file_stem(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

impl<'a> Pipeline<'a> {
    pub fn new(cfg: &'a RunConfig) -> Self {
        Self {
            cfg,
            market: None,
            indices: None,
            panel: None,
        }
    }

    pub fn run(&mut self, stage: Stage, store: &mut ArtifactStore) -> Result<(), CliError> {
        log::info!("stage {}", stage.name());
        match stage {
            Stage::Ingest => self.ingest(store),
            Stage::Sentiment => self.sentiment(store),
            Stage::Stationarity => self.stationarity(store),
            Stage::Connectedness => self.connectedness(store),
            Stage::Rolling => self.rolling(store),
            Stage::Wavelet => self.wavelet(store),
            Stage::Topics => self.topics(store),
            Stage::Forecast => self.forecast(store),
        }
    }

    fn policy(&self) -> CompletionPolicy {
        match self.cfg.transform.completion {
            Completion::Drop => CompletionPolicy::DropIncompleteRows,
            Completion::ForwardFill => CompletionPolicy::ForwardFill {
                max_gap: self.cfg.transform.max_gap,
            },
        }
    }

    fn market(&mut self) -> Result<&Market, CliError> {
        if self.market.is_none() {
            self.market = Some(self.load_market()?);
        }
        Ok(self.market.as_ref().expect("just set"))
    }

    fn load_market(&self) -> Result<Market, CliError> {
        let cfg = self.cfg;
        let mut keep = Vec::new();
        for c in &cfg.coins {
            keep.push(c.price_column());
            keep.push(c.volume_column());
        }
        let mapping = ColumnMapping {
            date_column: cfg.input.date_column.clone(),
            rename: BTreeMap::new(),
            keep,
        };
        let loaded = load_panel(&cfg.input.market, &mapping).map_err(|e| CliError::Input(e.to_string()))?;
        let kind = match cfg.transform.returns {
            ReturnKind::Log => TransformKind::LogReturn,
            ReturnKind::Simple => TransformKind::SimpleReturn,
        };
        let input = |e: cryptosent::ingest::IngestError| CliError::Input(e.to_string());
        let mut panel = loaded;
        let mut warnings = Vec::new();
        let mut derived = Vec::new();
        for c in &cfg.coins {
            panel = compute_return(&panel, &TransformSpec::new(kind, &c.price_column(), &c.return_name()))
                .map_err(input)?;
            let t = volume_change(
                &panel,
                &TransformSpec::new(TransformKind::PctVolumeChange, &c.volume_column(), &c.volume_name()),
            )
            .map_err(input)?;
            panel = t.panel;
            warnings.extend(t.warnings);
            derived.push(c.return_name());
            derived.push(c.volume_name());
        }
        let names: Vec<&str> = derived.iter().map(String::as_str).collect();
        let raw = panel.select(&names).map_err(input)?;
        let (complete, fill) = align_and_complete(&raw, self.policy()).map_err(input)?;
        Ok(Market {
            raw,
            complete,
            fill,
            warnings,
        })
    }

    fn indices(&mut self) -> Result<&[SentimentIndexSeries], CliError> {
        if self.indices.is_none() {
            let records = self.records()?;
            let mut out = Vec::new();
            for p in Platform::ALL {
                if records.iter().any(|r| r.platform == p) {
                    out.push(aggregate_tsi(&records, p).map_err(|e| CliError::Input(e.to_string()))?);
                }
            }
            self.indices = Some(out);
        }
        Ok(self.indices.as_deref().expect("just set"))
    }

    fn records(&self) -> Result<Vec<SentimentRecord>, CliError> {
        let mut records = Vec::new();
        for path in &self.cfg.input.sentiment {
            let f = open(path)?;
            let recs = read_jsonl(BufReader::new(f)).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            records.extend(recs);
        }
        if let Some(scored) = self.score_items()? {
            records.extend(scored.0);
        }
        Ok(records)
    }

    /// Items sent through the scoring endpoint, when both are configured.
    fn score_items(&self) -> Result<Option<(Vec<SentimentRecord>, ScoringSummary)>, CliError> {
        let (Some(path), Some(endpoint)) = (&self.cfg.input.items, &self.cfg.sentiment.endpoint) else {
            return Ok(None);
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::InputMissing(format!("{}: {e}", path.display())))?;
        let mut items = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let it: ItemLine = serde_json::from_str(line)
                .map_err(|e| CliError::Input(format!("{}: line {}: {e}", path.display(), i + 1)))?;
            items.push(ScoreItem {
                id: it.id,
                text: it.text,
                platform: it.platform,
                timestamp: it.timestamp,
            });
        }
        let outcome = score_via_endpoint(&items, endpoint).map_err(|e| CliError::compute("sentiment", e))?;
        let mut summary = ScoringSummary {
            scored: outcome.records.len(),
            rejected: Vec::new(),
            retriable: Vec::new(),
        };
        for (id, status) in outcome.statuses {
            match status {
                cryptosent::sentiment::ItemStatus::Scored(_) => {}
                cryptosent::sentiment::ItemStatus::Rejected(m) => summary.rejected.push((id, m)),
                cryptosent::sentiment::ItemStatus::Retriable(m) => summary.retriable.push((id, m)),
            }
        }
        Ok(Some((outcome.records, summary)))
    }

    /// Market series plus sentiment indices, completed.
    fn panel(&mut self) -> Result<&SeriesPanel, CliError> {
        if self.panel.is_none() {
            let mut panel = self.market()?.raw.clone();
            let indices = self.indices()?.to_vec();
            for s in &indices {
                panel = merge_sentiment(&panel, s).map_err(|e| CliError::Input(e.to_string()))?.panel;
            }
            let (complete, _) = align_and_complete(&panel, self.policy()).map_err(|e| CliError::Input(e.to_string()))?;
            self.panel = Some(complete);
        }
        Ok(self.panel.as_ref().expect("just set"))
    }

    fn ingest(&mut self, store: &mut ArtifactStore) -> Result<(), CliError> {
        let cfg = self.cfg;
        let m = self.market()?;
        store.csv("ingest", "ingest/market_panel.csv", &m.complete.to_csv_string())?;
        let report = IngestReport {
            rows: m.complete.n_rows(),
            first_date: m.complete.dates().first().copied(),
            last_date: m.complete.dates().last().copied(),
            variables: m.complete.variables(),
            coins: cfg
                .coins
                .iter()
                .map(|c| CoinSummary {
                    symbol: &c.symbol,
                    group: c.group,
                    price: c.price_column(),
                    volume: c.volume_column(),
                    returns: c.return_name(),
                    volume_change: c.volume_name(),
                })
                .collect(),
            fill: &m.fill,
            warnings: &m.warnings,
        };
        store.json("ingest", "ingest/report.json", &report)
    }

    fn sentiment(&mut self, store: &mut ArtifactStore) -> Result<(), CliError> {
        if let Some((records, summary)) = self.score_items()? {
            store.json("sentiment", "sentiment/scored_records.json", &records)?;
            store.json("sentiment", "sentiment/scoring_summary.json", &summary)?;
        }
        let indices = self.indices()?.to_vec();
        if indices.is_empty() {
            return Err(CliError::Input("no sentiment records in input.sentiment".into()));
        }
        let mut body = String::from("date,platform,tsi,count\n");
        for s in &indices {
            for ((d, v), n) in s.dates.iter().zip(&s.tsi).zip(&s.counts) {
                body.push_str(&format!("{},{},{v},{n}\n", d.format("%Y-%m-%d"), s.platform));
            }
        }
        store.csv("sentiment", "sentiment/tsi.csv", &body)?;
        let panel = self.panel()?;
        store.csv("sentiment", "sentiment/panel.csv", &panel.to_csv_string())
    }

    fn stationarity(&mut self, store: &mut ArtifactStore) -> Result<(), CliError> {
        let st = &self.cfg.stationarity;
        let opts = AdfOptions {
            deterministic: st.deterministic,
            max_lag: st.max_lag,
            lag_selection: st.lag_selection,
            critical: st.critical_values,
        };
        let panel = self.panel()?;
        let mut rows = Vec::new();
        for name in panel.variables() {
            let x = panel.complete_column(name).map_err(|e| CliError::compute("stationarity", e))?;
            let adf = adf_test(&x, opts).map_err(|e| CliError::compute("stationarity", format!("{name}: ADF: {e}")))?;
            let jb = jarque_bera(&x).map_err(|e| CliError::compute("stationarity", format!("{name}: JB: {e}")))?;
            rows.push(DiagnosticRow {
                variable: name.clone(),
                adf,
                jb,
            });
        }
        store.csv("stationarity", "stationarity/unit_root_table.csv", &unit_root_table_csv(&rows))?;
        let detail: Vec<Diagnostic> = rows
            .iter()
            .map(|r| Diagnostic {
                variable: &r.variable,
                adf: &r.adf,
                jarque_bera: &r.jb,
            })
            .collect();
        store.json("stationarity", "stationarity/diagnostics.json", &detail)
    }

    fn connectedness_variables(&mut self) -> Result<Vec<String>, CliError> {
        let cc = &self.cfg.connectedness;
        if !cc.variables.is_empty() {
            return Ok(cc.variables.clone());
        }
        let coins: Vec<String> = self.cfg.coins.iter().map(|c| c.return_name()).collect();
        let panel = self.panel()?;
        let mut vars = coins;
        vars.extend(Platform::ALL.iter().map(|p| p.column_name()).filter(|c| panel.index_of(c).is_some()));
        Ok(vars)
    }

    fn connectedness(&mut self, store: &mut ArtifactStore) -> Result<(), CliError> {
        let cc = self.cfg.connectedness.clone();
        let vars = self.connectedness_variables()?;
        let names: Vec<&str> = vars.iter().map(String::as_str).collect();
        let sub = self.panel()?.select(&names).map_err(|e| CliError::Config(format!("connectedness.variables: {e}")))?;
        let c = |e: &dyn std::fmt::Display| CliError::compute("connectedness", e);
        let p = match cc.var_order {
            Some(p) => p,
            None => select_order(&sub, cc.max_order).map_err(|e| c(&e))?,
        };
        let model = fit_var(&sub, p).map_err(|e| c(&e))?;
        store.json("connectedness", "connectedness/var_model.json", &model.to_json())?;
        let table = static_connectedness(&model, cc.horizon, cc.tci).map_err(|e| c(&e))?;
        store.csv("connectedness", "connectedness/static_table.csv", &table.to_csv())?;
        let graph = export_network(&table, cc.threshold, cc.network_mode);
        store.dot("connectedness", "connectedness/network.dot", &graph.to_dot())?;
        if cc.dynamic {
            let fit = cryptosent::volatility::fit_dcc_garch(&model.residuals).map_err(|e| c(&e))?;
            store.json("connectedness", "connectedness/dcc_garch.json", &fit.to_json(&model.names, false))?;
            let dates = &sub.dates()[p..];
            let dynamic =
                dynamic_connectedness(&model, &fit.covariances, dates, cc.horizon, cc.tci, cc.non_pd).map_err(|e| c(&e))?;
            let report = DynamicReport {
                horizon: cc.horizon,
                skipped: dynamic.skipped.clone(),
                series: dynamic_series(&dynamic.tables),
            };
            store.json("connectedness", "connectedness/dynamic.json", &report)?;
        }
        Ok(())
    }

    fn rolling(&mut self, store: &mut ArtifactStore) -> Result<(), CliError> {
        let rc = self.cfg.rolling.clone();
        let targets = if rc.targets.is_empty() {
            self.cfg.coins.iter().map(|c| c.return_name()).collect()
        } else {
            rc.targets.clone()
        };
        let panel = self.panel()?;
        let channels: Vec<String> = Platform::ALL
            .iter()
            .map(|p| p.column_name())
            .filter(|c| panel.index_of(c).is_some())
            .collect();
        let mut report = RollingReport {
            peaks: Vec::new(),
            skipped: Vec::new(),
        };
        for target in &targets {
            let x = panel
                .complete_column(target)
                .map_err(|e| CliError::Config(format!("rolling.targets: {e}")))?;
            for ch in &channels {
                let y = panel.complete_column(ch).map_err(|e| CliError::compute("rolling", e))?;
                let sw = sweep(panel.dates(), &x, &y, &rc.windows);
                for (w, reason) in sw.skipped {
                    log::warn!("rolling {target}/{ch}: window {w} skipped: {reason}");
                    report.skipped.push(SkippedWindow {
                        x: target.clone(),
                        y: ch.clone(),
                        window: w,
                        reason,
                    });
                }
                for (w, series) in &sw.series {
                    let rel = format!("rolling/{}__{}__w{w}.csv", file_stem(target), file_stem(ch));
                    store.csv("rolling", &rel, &series.to_csv())?;
                    let opts = PeakOptions {
                        min_prominence: rc.min_prominence,
                        min_separation: rc.min_separation.unwrap_or(w / 2),
                    };
                    report.peaks.push(PeakEntry {
                        x: target.clone(),
                        y: ch.clone(),
                        report: count_peaks(series, opts),
                    });
                }
            }
        }
        store.json("rolling", "rolling/peaks.json", &report)
    }

    fn wavelet(&mut self, store: &mut ArtifactStore) -> Result<(), CliError> {
        let wc = self.cfg.wavelet.clone();
        let panel = self.panel()?;
        let vars = if wc.variables.is_empty() {
            panel.variables().to_vec()
        } else {
            wc.variables.clone()
        };
        let n = panel.n_rows();
        // Deepest level the series supports: 2^J ≤ n.
        let fit = (usize::BITS - 1 - n.max(1).leading_zeros()) as usize;
        let levels = wc.levels.min(fit);
        if levels < wc.levels {
            log::warn!("wavelet depth reduced from {} to {levels} for {n} observations", wc.levels);
        }
        let mut summary = Vec::new();
        for v in &vars {
            let x = panel
                .complete_column(v)
                .map_err(|e| CliError::Config(format!("wavelet.variables: {e}")))?;
            let d = modwt(&x, levels).map_err(|e| CliError::compute("wavelet", format!("{v}: {e}")))?;
            let mut body = String::from("date");
            for j in 1..=levels {
                body.push_str(&format!(",D{j}"));
            }
            body.push_str(&format!(",S{levels}\n"));
            for (t, date) in panel.dates().iter().enumerate() {
                body.push_str(&date.format("%Y-%m-%d").to_string());
                for dj in &d.details {
                    body.push_str(&format!(",{}", dj[t]));
                }
                body.push_str(&format!(",{}\n", d.smooth[t]));
            }
            store.csv("wavelet", &format!("wavelet/{}.csv", file_stem(v)), &body)?;
            summary.push(WaveletSummary {
                variable: v.clone(),
                levels,
                wavelet_variance: d.wavelet.iter().map(|w| variance(w)).collect(),
                scaling_variance: variance(&d.scaling),
                series_variance: variance(&x),
            });
        }
        store.json("wavelet", "wavelet/summary.json", &summary)
    }

    fn topics(&mut self, store: &mut ArtifactStore) -> Result<(), CliError> {
        let tc = &self.cfg.topics;
        let seed = self.cfg.seed;
        let Some(path) = &self.cfg.input.texts else {
            return Err(CliError::Config("topics needs input.texts".into()));
        };
        let texts = read_texts(path)?;
        let stopwords = match &tc.stopwords {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| CliError::InputMissing(format!("{}: {e}", p.display())))?
                .lines()
                .map(|l| l.trim().to_lowercase())
                .filter(|l| !l.is_empty())
                .collect(),
            None => cryptosent::topics::default_stopwords(),
        };
        let opts = PreprocessOptions {
            stopwords,
            min_token_len: tc.min_token_len,
            min_doc_freq: tc.min_doc_freq,
        };
        let c = |e: cryptosent::topics::TopicsError| CliError::compute("topics", e);
        let corpus = preprocess(&texts, &opts).map_err(c)?;
        let x = tfidf(&corpus);
        let hi = tc.k_max.min(x.nrows().saturating_sub(1));
        let selection = select_k(&x, tc.k_min, hi, seed).map_err(c)?;
        let km = kmeans(&x, selection.best, seed, tc.kmeans_max_iter).map_err(c)?;
        let pca = pca2(&x).map_err(c)?;
        store.csv(
            "topics",
            "topics/cluster_map.csv",
            &cluster_map_csv(&corpus.ids, &km.assignments, &pca.coords).map_err(c)?,
        )?;
        #[derive(Serialize)]
        struct Clustering<'a> {
            documents: usize,
            dropped: usize,
            vocabulary: usize,
            selection: &'a cryptosent::topics::KSelection,
            k: usize,
            inertia: f64,
            iterations: usize,
            converged: bool,
            explained_variance: [f64; 2],
        }
        store.json(
            "topics",
            "topics/clustering.json",
            &Clustering {
                documents: corpus.n_docs(),
                dropped: corpus.dropped.len(),
                vocabulary: corpus.n_words(),
                selection: &selection,
                k: selection.best,
                inertia: km.inertia,
                iterations: km.iterations,
                converged: km.converged,
                explained_variance: pca.explained,
            },
        )?;
        let model = lda_gibbs(
            &corpus,
            LdaOptions {
                topics: tc.lda_topics,
                alpha: tc.alpha,
                beta: tc.beta,
                iterations: tc.lda_iterations,
                seed,
            },
        )
        .map_err(c)?;
        #[derive(Serialize)]
        struct TopicReport {
            topics: usize,
            alpha: f64,
            beta: f64,
            iterations: usize,
            top_words: Vec<cryptosent::topics::TopicWords>,
        }
        store.json(
            "topics",
            "topics/lda_topics.json",
            &TopicReport {
                topics: model.topics,
                alpha: model.alpha,
                beta: model.beta,
                iterations: model.iterations,
                top_words: top_words(&model, &corpus.vocabulary, tc.top_words),
            },
        )
    }

    pub fn forecast_scenarios(&mut self) -> Result<Vec<Scenario>, CliError> {
        let fc = self.cfg.forecast.clone();
        let targets = if fc.targets.is_empty() {
            self.cfg
                .coins
                .iter()
                .flat_map(|c| [c.return_name(), c.volume_name()])
                .collect()
        } else {
            fc.targets.clone()
        };
        let panel = self.panel()?;
        for t in &targets {
            if panel.index_of(t).is_none() {
                return Err(CliError::Config(format!("forecast target {t:?} is not a panel variable")));
            }
        }
        let mut sets: Vec<Vec<Platform>> = Vec::new();
        if fc.include_baseline {
            sets.push(Vec::new());
        }
        sets.extend(fc.channel_sets.iter().cloned());
        let mut out = Vec::new();
        for &scale in &fc.scales {
            for &kind in &fc.forecasters {
                for set in &sets {
                    for t in &targets {
                        let mut s = Scenario::new(t, set, Some(scale), kind);
                        s.horizon = fc.horizon;
                        out.push(s);
                    }
                }
            }
        }
        Ok(out)
    }

    fn forecast(&mut self, store: &mut ArtifactStore) -> Result<(), CliError> {
        let scenarios = self.forecast_scenarios()?;
        let config = HarnessConfig {
            lags: self.cfg.forecast.lags,
            split: self.cfg.forecast.split,
        };
        let panel = self.panel()?;
        let report = scenario_matrix(panel, &scenarios, &config);
        let failed = report.cells.iter().filter(|c| c.error.is_some()).count();
        if failed == report.cells.len() {
            let first = report.cells.first().and_then(|c| c.error.clone()).unwrap_or_default();
            return Err(CliError::compute("forecast", format!("every scenario failed; first: {first}")));
        }
        if failed > 0 {
            log::warn!("{failed} of {} forecast scenarios failed", report.cells.len());
        }
        store.csv("forecast", "forecast/table4.csv", &report.to_table_csv())?;
        store.csv("forecast", "forecast/cells.csv", &report.to_long_csv())?;
        store.json("forecast", "forecast/report.json", &report)
    }
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::InputMissing(format!("{}: {e}", path.display())))
}

/// `id,text` CSV.
fn read_texts(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let mut r = csv::Reader::from_reader(open(path)?);
    let bad = |e: csv::Error| CliError::Input(format!("{}: {e}", path.display()));
    let headers = r.headers().map_err(bad)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Input(format!("{}: missing column {name:?}", path.display())))
    };
    let (id, text) = (col("id")?, col("text")?);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(bad)?;
        out.push((rec[id].to_string(), rec[text].to_string()));
    }
    Ok(out)
}
