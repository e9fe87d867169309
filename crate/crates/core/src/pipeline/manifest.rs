//! Human-readable TOML sidecar recording stage progress and chosen parameters.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::codec::write_atomic;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Pending,
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub status: StageStatus,
    #[serde(default)]
    pub files: Vec<String>,
    #[serde(default)]
    pub detail: String,
}

/// Parameters a surrogate was built with, keyed by QoI label in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateChoice {
    pub screening_tol: f64,
    /// One-based.
    pub reduced_set: Vec<usize>,
    pub n_qoi: usize,
    pub n_ord: usize,
    pub tau: f64,
    pub cv_error: f64,
    #[serde(default)]
    pub validation_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PipelineManifest {
    pub config_hash: String,
    #[serde(default)]
    pub stages: BTreeMap<String, StageRecord>,
    #[serde(default)]
    pub surrogates: BTreeMap<String, SurrogateChoice>,
}

impl PipelineManifest {
    /// `<store>.manifest.toml`.
    pub fn path_for(store: &Path) -> PathBuf {
        let mut s = store.as_os_str().to_owned();
        s.push(".manifest.toml");
        PathBuf::from(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Format(format!("manifest {}: {e}", path.display())))
    }

    /// Existing manifest, or a fresh one when the file is absent.
    pub fn load_or_new(path: &Path, config_hash: &str) -> Result<Self> {
        if path.exists() {
            Self::load(path)
        } else {
            Ok(PipelineManifest {
                config_hash: config_hash.into(),
                ..Default::default()
            })
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Format(format!("{e}")))?;
        write_atomic(path, text.as_bytes())
    }

    pub fn is_complete(&self, stage: &str) -> bool {
        self.stages.get(stage).is_some_and(|s| s.status == StageStatus::Complete)
    }

    /// Runs `check` against the stage outputs; the stage is marked complete only
    /// if it succeeds, otherwise failed with the error text.
    pub fn record_stage(
        &mut self,
        stage: &str,
        files: &[&Path],
        detail: impl Into<String>,
        check: impl FnOnce() -> Result<()>,
    ) -> Result<()> {
        let files: Vec<String> = files.iter().map(|p| p.display().to_string()).collect();
        match check() {
            Ok(()) => {
                self.stages.insert(
                    stage.into(),
                    StageRecord {
                        status: StageStatus::Complete,
                        files,
                        detail: detail.into(),
                    },
                );
                Ok(())
            }
            Err(e) => {
                self.stages.insert(
                    stage.into(),
                    StageRecord {
                        status: StageStatus::Failed,
                        files,
                        detail: e.to_string(),
                    },
                );
                Err(e)
            }
        }
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }
}
