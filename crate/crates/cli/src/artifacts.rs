use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::hex;
use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

/// Provenance stamped on every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meta {
    pub config_hash: String,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
}

impl Meta {
    pub fn new(config_hash: String, seed: u64) -> Self {
        let versions = BTreeMap::from([
            ("cryptosent".to_string(), cryptosent::VERSION.to_string()),
            ("cryptosent-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ]);
        Self {
            config_hash,
            seed,
            versions,
        }
    }

    fn header_line(&self) -> String {
        format!(
            "config_hash={} seed={} cryptosent={}",
            self.config_hash, self.seed, self.versions["cryptosent"]
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub stage: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(flatten)]
    pub meta: Meta,
    pub inputs: Vec<InputEntry>,
    pub artifacts: Vec<ArtifactEntry>,
}

#[derive(Serialize)]
struct Wrapped<'a, T: Serialize> {
    meta: &'a Meta,
    data: &'a T,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::InputMissing(format!("{}: {e}", path.display())))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

/// Writes artifacts under one output directory and keeps the manifest.
///
/// Writes go through a temporary file and a rename. Everything written
/// since construction can be removed again with [`ArtifactStore::rollback`].
pub struct ArtifactStore {
    root: PathBuf,
    meta: Meta,
    inputs: Vec<InputEntry>,
    written: Vec<ArtifactEntry>,
}

impl ArtifactStore {
    pub fn new(root: &Path, meta: Meta, inputs: Vec<InputEntry>) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::Output(format!("{}: {e}", root.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
            meta,
            inputs,
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn put(&mut self, stage: &str, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(rel);
        let io = |e: std::io::Error| CliError::Output(format!("{}: {e}", path.display()));
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(io)?;
        }
        let tmp = path.with_extension("partial");
        fs::write(&tmp, bytes).map_err(io)?;
        fs::rename(&tmp, &path).map_err(io)?;
        self.written.retain(|a| a.path != rel);
        self.written.push(ArtifactEntry {
            path: rel.to_string(),
            stage: stage.to_string(),
            sha256: hex(&Sha256::digest(bytes)),
        });
        log::info!("wrote {}", path.display());
        Ok(())
    }

    /// CSV with a leading `#` provenance line.
    pub fn csv(&mut self, stage: &str, rel: &str, body: &str) -> Result<(), CliError> {
        let text = format!("# {}\n{body}", self.meta.header_line());
        self.put(stage, rel, text.as_bytes())
    }

    /// JSON object `{"meta": …, "data": …}`.
    pub fn json<T: Serialize>(&mut self, stage: &str, rel: &str, data: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(&Wrapped { meta: &self.meta, data })
            .map_err(|e| CliError::Output(format!("{rel}: {e}")))?;
        text.push('\n');
        self.put(stage, rel, text.as_bytes())
    }

    /// Graphviz file with a leading `//` provenance comment.
    pub fn dot(&mut self, stage: &str, rel: &str, body: &str) -> Result<(), CliError> {
        let text = format!("// {}\n{body}", self.meta.header_line());
        self.put(stage, rel, text.as_bytes())
    }

    /// Deletes this run's files and drops them from the manifest on disk.
    pub fn rollback(&mut self) {
        let removed: BTreeSet<String> = self.written.drain(..).map(|a| a.path).collect();
        for rel in &removed {
            let path = self.root.join(rel);
            if let Err(e) = fs::remove_file(&path) {
                log::warn!("could not remove {}: {e}", path.display());
            }
        }
        if let Some(mut m) = self.read_manifest() {
            m.artifacts.retain(|a| !removed.contains(&a.path));
            if let Err(e) = self.write_manifest(&m) {
                log::warn!("could not rewrite manifest: {e}");
            }
        }
    }

    fn read_manifest(&self) -> Option<Manifest> {
        let text = fs::read_to_string(self.root.join(MANIFEST)).ok()?;
        serde_json::from_str(&text).ok()
    }

    fn write_manifest(&self, m: &Manifest) -> Result<(), CliError> {
        let path = self.root.join(MANIFEST);
        let mut text = serde_json::to_string_pretty(m).map_err(|e| CliError::Output(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
    }

    /// Merges this run into `manifest.json`. Entries from earlier runs with
    /// the same config hash and seed are kept; a different config starts a
    /// fresh manifest.
    pub fn commit(&self) -> Result<Manifest, CliError> {
        let mut artifacts: BTreeMap<String, ArtifactEntry> = BTreeMap::new();
        if let Some(old) = self.read_manifest() {
            if old.meta == self.meta {
                for a in old.artifacts {
                    if self.root.join(&a.path).is_file() {
                        artifacts.insert(a.path.clone(), a);
                    }
                }
            } else {
                log::warn!(
                    "{} was written under config {}; starting a new manifest",
                    self.root.join(MANIFEST).display(),
                    old.meta.config_hash
                );
            }
        }
        for a in &self.written {
            artifacts.insert(a.path.clone(), a.clone());
        }
        let m = Manifest {
            meta: self.meta.clone(),
            inputs: self.inputs.clone(),
            artifacts: artifacts.into_values().collect(),
        };
        self.write_manifest(&m)?;
        Ok(m)
    }
}
