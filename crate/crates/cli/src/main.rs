mod artifacts;
mod config;
mod error;
mod pipeline;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use artifacts::{sha256_file, ArtifactStore, InputEntry, Meta};
use config::RunConfig;
use error::CliError;
use pipeline::{Pipeline, Stage};

/// Sentiment and crypto-market analytics pipeline.
#[derive(Parser, Debug)]
#[command(name = "cryptosent", version)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, default_value = "cryptosent.toml")]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load market files, derive returns and volume changes.
    Ingest,
    /// Aggregate (and optionally score) sentiment into daily indices.
    Sentiment,
    /// ADF and Jarque-Bera table.
    Stationarity,
    /// VAR, DCC-GARCH and spillover tables and networks.
    Connectedness,
    /// Rolling correlations and peak counts.
    Rolling,
    /// MODWT multiresolution decompositions.
    Wavelet,
    /// TF-IDF clustering and LDA topics.
    Topics,
    /// Forecast scenario grid.
    Forecast,
    /// Every stage in workflow order.
    ReportAll,
    /// Writes a seeded synthetic dataset (market CSV, sentiment JSONL, texts CSV).
    Synth {
        #[arg(long, default_value_t = 730)]
        days: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let detail = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {detail}", e.class());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let stages: Vec<Stage> = match cli.command {
        Command::Synth { days } => {
            return synth(days, cli.seed.unwrap_or(42), cli.out.as_deref().unwrap_or(Path::new("data")));
        }
        Command::Ingest => vec![Stage::Ingest],
        Command::Sentiment => vec![Stage::Sentiment],
        Command::Stationarity => vec![Stage::Stationarity],
        Command::Connectedness => vec![Stage::Connectedness],
        Command::Rolling => vec![Stage::Rolling],
        Command::Wavelet => vec![Stage::Wavelet],
        Command::Topics => vec![Stage::Topics],
        Command::Forecast => vec![Stage::Forecast],
        Command::ReportAll => Stage::ALL.to_vec(),
    };

    let mut cfg = RunConfig::from_file(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let hash = cfg.hash();
    let base = cli.config.parent().unwrap_or(Path::new("")).to_path_buf();
    let inputs = input_entries(&cfg);
    cfg.resolve_paths(&base);
    cfg.out = match cli.out {
        Some(o) => o,
        None => base.join(&cfg.out),
    };
    cfg.validate()?;

    let mut inputs_hashed = Vec::new();
    for (name, path) in inputs {
        inputs_hashed.push(InputEntry {
            path: name,
            sha256: sha256_file(&base.join(path))?,
        });
    }
    let mut store = ArtifactStore::new(&cfg.out, Meta::new(hash, cfg.seed), inputs_hashed)?;
    let mut pipeline = Pipeline::new(&cfg);
    let result = stages.iter().try_for_each(|&s| {
        if s == Stage::Topics && cfg.input.texts.is_none() && stages.len() > 1 {
            log::warn!("no input.texts configured; topics stage skipped");
            return Ok(());
        }
        pipeline.run(s, &mut store)
    });
    match result.and_then(|()| store.commit()) {
        Ok(m) => {
            log::info!("{} artifacts in {}", m.artifacts.len(), store.root().display());
            Ok(())
        }
        Err(e) => {
            store.rollback();
            Err(e)
        }
    }
}

/// Input files as written in the config, so the manifest does not depend
/// on where the repository lives.
fn input_entries(cfg: &RunConfig) -> Vec<(String, PathBuf)> {
    let i = &cfg.input;
    i.market
        .iter()
        .chain(&i.sentiment)
        .chain(&i.items)
        .chain(&i.texts)
        .chain(&cfg.topics.stopwords)
        .map(|p| (p.to_string_lossy().replace('\\', "/"), p.clone()))
        .collect()
}

fn synth(days: usize, seed: u64, out: &Path) -> Result<(), CliError> {
    if days < 300 {
        return Err(CliError::Config(format!("synth needs at least 300 days, got {days}")));
    }
    let data = cryptosent::simulate::synthetic_dataset(days, seed);
    std::fs::create_dir_all(out).map_err(|e| CliError::Output(format!("{}: {e}", out.display())))?;
    let io = |p: &Path, e: std::io::Error| CliError::Output(format!("{}: {e}", p.display()));
    let p = out.join("market.csv");
    data.market
        .write_csv(std::fs::File::create(&p).map_err(|e| io(&p, e))?)
        .map_err(|e| io(&p, e))?;
    let p = out.join("sentiment.jsonl");
    let f = std::io::BufWriter::new(std::fs::File::create(&p).map_err(|e| io(&p, e))?);
    cryptosent::sentiment::write_jsonl(&data.records, f).map_err(|e| io(&p, e))?;
    let p = out.join("texts.csv");
    let mut w = csv::Writer::from_path(&p).map_err(|e| CliError::Output(format!("{}: {e}", p.display())))?;
    let bad = |e: csv::Error| CliError::Output(e.to_string());
    w.write_record(["id", "text"]).map_err(bad)?;
    for (id, text) in &data.texts {
        w.write_record([id, text]).map_err(bad)?;
    }
    w.flush().map_err(|e| io(&p, e))?;
    eprintln!("wrote {days} days of synthetic data to {}", out.display());
    Ok(())
}
