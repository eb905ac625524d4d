use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").canonicalize().unwrap()
}

fn run(config: &Path, out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cryptosent"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

/// Minimal config over the bundled data; `extra` goes right after the seed.
fn write_config(dir: &Path, market: &Path, extra: &str) -> PathBuf {
    let d = data_dir();
    let text = format!(
        r#"seed = 7
{extra}

[input]
market = [{market:?}]
sentiment = [{sentiment:?}]
texts = {texts:?}

[[coins]]
symbol = "BTC"
group = "gold2.0"

[[coins]]
symbol = "DOGE"
group = "altcoin"

[rolling]
windows = [7, 32]

[topics]
k_max = 4
lda_iterations = 50

[forecast]
scales = [7]
"#,
        market = market.to_str().unwrap(),
        sentiment = d.join("sentiment.jsonl").to_str().unwrap(),
        texts = d.join("texts.csv").to_str().unwrap(),
    );
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn artifact_files(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    if let Ok(entries) = fs::read_dir(root) {
        for e in entries.flatten() {
            let p = e.path();
            if p.is_dir() {
                out.extend(artifact_files(&p));
            } else if p.file_name().unwrap() != "manifest.json" {
                out.push(p);
            }
        }
    }
    out
}

#[test]
fn stationarity_writes_unit_root_table_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &data_dir().join("market.csv"), "");
    let out = dir.path().join("out");
    let o = run(&cfg, &out, &["stationarity"]);
    assert!(o.status.success(), "{}", stderr(&o));

    let table = fs::read_to_string(out.join("stationarity/unit_root_table.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert!(lines[0].starts_with("# config_hash="));
    assert!(lines[0].contains("seed=7"));
    assert_eq!(lines[1], "Test,BTCPRC,BTCVOL,DOGEPRC,DOGEVOL,twitter_tsi,tiktok_tsi");
    assert!(lines[2].starts_with("ADF Statistics,"));
    assert!(lines[3].starts_with("Jarque--Bera,"));
    assert_eq!(lines.len(), 4);

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    let hash = manifest["config_hash"].as_str().unwrap();
    assert!(lines[0].contains(hash));
    let listed: Vec<&str> = manifest["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["path"].as_str().unwrap())
        .collect();
    assert_eq!(listed, ["stationarity/diagnostics.json", "stationarity/unit_root_table.csv"]);
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 3);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("stationarity/diagnostics.json")).unwrap()).unwrap();
    assert_eq!(json["meta"]["config_hash"], hash);
}

#[test]
fn subcommands_compose_to_report_all() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &data_dir().join("market.csv"), "");
    let all = dir.path().join("all");
    let o = run(&cfg, &all, &["report-all"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let steps = dir.path().join("steps");
    for sub in [
        "ingest",
        "sentiment",
        "stationarity",
        "connectedness",
        "rolling",
        "wavelet",
        "topics",
        "forecast",
    ] {
        let o = run(&cfg, &steps, &[sub]);
        assert!(o.status.success(), "{sub}: {}", stderr(&o));
    }
    let a = fs::read_to_string(all.join("manifest.json")).unwrap();
    let b = fs::read_to_string(steps.join("manifest.json")).unwrap();
    assert_eq!(a, b);
    for f in artifact_files(&all) {
        let text = fs::read_to_string(&f).unwrap();
        assert!(text.contains("config_hash"), "{} has no provenance", f.display());
        assert!(a.contains(&format!("\"{}\"", f.strip_prefix(&all).unwrap().to_str().unwrap())));
    }
    let network = fs::read_to_string(all.join("connectedness/network.dot")).unwrap();
    assert!(network.starts_with("// config_hash="));
    assert!(network.contains("digraph"));
}

#[test]
fn seed_flag_overrides_config_and_changes_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &data_dir().join("market.csv"), "");
    let read = |out: &Path| -> serde_json::Value {
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run(&cfg, &a, &["ingest"]).status.success());
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cryptosent"));
    let o = cmd.args(["ingest", "--seed", "99", "--config"]).arg(&cfg).arg("--out").arg(&b).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let (ma, mb) = (read(&a), read(&b));
    assert_eq!(ma["seed"], 7);
    assert_eq!(mb["seed"], 99);
    assert_ne!(ma["config_hash"], mb["config_hash"]);
}

#[test]
fn missing_input_and_computation_failure_have_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = write_config(dir.path(), &dir.path().join("nope.csv"), "");
    let o = run(&missing, &dir.path().join("o1"), &["ingest"]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    let line = err.lines().last().unwrap();
    assert!(line.starts_with("error[input-missing]: "), "{err}");
    assert!(line.contains("nope.csv"));

    let sub = tempfile::tempdir().unwrap();
    // Far more lags than the sample can support.
    let path = write_config(sub.path(), &data_dir().join("market.csv"), "[connectedness]\nvar_order = 200");
    let out = sub.path().join("out");
    let o = run(&path, &out, &["report-all"]);
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
    assert!(stderr(&o).lines().last().unwrap().starts_with("error[computation]: connectedness"));
    // Stages that ran before the failure leave nothing behind.
    assert!(artifact_files(&out).is_empty(), "{:?}", artifact_files(&out));
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &data_dir().join("market.csv"), "bogus = 1");
    let o = run(&cfg, &dir.path().join("o"), &["ingest"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("error[config]"));
}

#[test]
fn forecast_table_mirrors_scenario_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &data_dir().join("market.csv"), "");
    let out = dir.path().join("out");
    let o = run(&cfg, &out, &["forecast"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(out.join("forecast/table4.csv"))
        .unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header.join(","),
        "Window Size,Metric,BTCPRC MSE,BTCPRC MAE,BTCVOL MSE,BTCVOL MAE,DOGEPRC MSE,DOGEPRC MAE,DOGEVOL MSE,DOGEVOL MAE"
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    let labels: Vec<(&str, &str)> = rows.iter().map(|r| (&r[0], &r[1])).collect();
    assert_eq!(
        labels,
        [
            ("Short-term (7)", "Ridge_{None}"),
            ("Short-term (7)", "Ridge_{Twitter}"),
            ("Short-term (7)", "Ridge_{TikTok}"),
            ("Short-term (7)", "Ridge_{Twitter,TikTok}"),
        ]
    );
    assert!(rows.iter().all(|r| r.len() == 10 && r.iter().skip(2).all(|v| v.parse::<f64>().is_ok())));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("forecast/report.json")).unwrap()).unwrap();
    let cells = report["data"]["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 16);
    for target in ["BTCPRC", "BTCVOL", "DOGEPRC", "DOGEVOL"] {
        let best = cells
            .iter()
            .filter(|c| c["scenario"]["target"] == target && c["best_mse"] == true)
            .count();
        assert!(best >= 1, "{target}");
    }
}
