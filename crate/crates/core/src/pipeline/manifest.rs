use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::files::{read_json, write_json};
use super::{io_err, PipelineError};
use crate::snippets::KChoice;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageRecord {
    pub completed_unix: u64,
    /// Run-relative path → SHA-256.
    pub artifacts: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    pub model_format_version: u32,
    pub created_unix: u64,
    pub stages: BTreeMap<String, StageRecord>,
    /// Set by the gap analysis.
    pub chosen_k: Option<KChoice>,
}

pub(crate) fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub fn sha256_file(path: &Path) -> Result<String, PipelineError> {
    let mut f = fs::File::open(path).map_err(io_err(path))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(io_err(path))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

impl RunManifest {
    pub fn new(config_hash: String) -> Self {
        Self {
            config_hash,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            model_format_version: crate::lstm::MODEL_FORMAT_VERSION,
            created_unix: now_unix(),
            stages: BTreeMap::new(),
            chosen_k: None,
        }
    }

    pub fn path(run_dir: &Path) -> PathBuf {
        run_dir.join(MANIFEST_FILE)
    }

    /// Load and check that the run belongs to `config_hash`.
    pub fn load(run_dir: &Path, config_hash: &str) -> Result<Self, PipelineError> {
        let path = Self::path(run_dir);
        if !path.exists() {
            return Err(PipelineError::Missing(format!(
                "{} (run `generate` first)",
                path.display()
            )));
        }
        let m: Self = read_json(&path)?;
        if m.config_hash != config_hash {
            return Err(PipelineError::ConfigMismatch {
                found: m.config_hash,
                expected: config_hash.to_string(),
            });
        }
        Ok(m)
    }

    pub fn save(&self, run_dir: &Path) -> Result<(), PipelineError> {
        write_json(&Self::path(run_dir), self)
    }

    pub fn stage(&self, name: &str) -> Result<&StageRecord, PipelineError> {
        self.stages
            .get(name)
            .ok_or_else(|| PipelineError::Missing(format!("stage {name:?} has not completed")))
    }

    /// Re-hash every artifact of `stage` and compare with the record.
    pub fn verify(&self, run_dir: &Path, stage: &str) -> Result<(), PipelineError> {
        self.stage(stage)?
            .artifacts
            .par_iter()
            .try_for_each(|(rel, expected)| {
                let path = run_dir.join(rel);
                if !path.exists() {
                    return Err(PipelineError::Missing(rel.clone()));
                }
                if &sha256_file(&path)? != expected {
                    return Err(PipelineError::HashMismatch { path: rel.clone() });
                }
                Ok(())
            })
    }

    /// Hash `paths` (run-relative) and record them as the outputs of
    /// `stage`. Records of stages listed in `invalidates` are dropped.
    pub fn record(
        &mut self,
        run_dir: &Path,
        stage: &str,
        paths: &[String],
        invalidates: &[&str],
    ) -> Result<(), PipelineError> {
        let artifacts = paths
            .par_iter()
            .map(|rel| Ok((rel.clone(), sha256_file(&run_dir.join(rel))?)))
            .collect::<Result<BTreeMap<_, _>, PipelineError>>()?;
        self.stages.retain(|name, _| !invalidates.iter().any(|p| name.starts_with(p)));
        self.stages.insert(
            stage.to_string(),
            StageRecord {
                completed_unix: now_unix(),
                artifacts,
            },
        );
        Ok(())
    }
}
