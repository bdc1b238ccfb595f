//! On-disk experiment: generate → analyze-gap → build-snippets → train →
//! evaluate → report.
//!
//! Every stage reads its inputs from the run directory, checks them against
//! the content hashes in `manifest.json`, writes its outputs atomically and
//! records their hashes. All randomness comes from the master seed through
//! [`derive_seed`].
//!
//! Layout of a run directory:
//!
//! ```text
//! config.json  manifest.json  report.json
//! data/<label>/wave_<label>_<idx>.csv
//! data/<label>/motion_{low,high}_<label>_<idx>.csv
//! gap/{gap_report.json, maxima_scatter.csv, coverage.csv, rank_histogram.csv}
//! snippets/snippets_{train,validation}.csv, snippets_test_<label>.csv,
//!          targets_test_<label>.csv, index_<split>.json
//! models/model_{snippet,base}.json, history_{snippet,base}.csv
//! eval/<label>/{metrics.json, maxima_scatter.csv, pdf_<method>.csv, overlay.csv}
//! ```

mod config;
mod files;
mod manifest;
mod stages;

pub use config::{
    derive_seed, EnsembleSplits, ExperimentConfig, KSetting, LabeledSeaState, SnippetSettings, Split,
};
pub use files::{read_motion, read_wave, write_motion, write_wave};
pub use manifest::{sha256_file, RunManifest, StageRecord, MANIFEST_FILE};
pub use stages::{
    analyze_gap, build_snippets, evaluate, generate, report, train, Evaluation, GapSummary,
    PeakEvent, Run, RunReport, TrainMode, TrainingSummary, METHOD_BASE, METHOD_LOW_FIDELITY, METHOD_SNIPPET,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("missing input: {0}")]
    Missing(String),
    #[error("artifact {path} does not match the manifest hash")]
    HashMismatch { path: String },
    #[error("run directory was produced by a different config (hash {found}, expected {expected})")]
    ConfigMismatch { found: String, expected: String },
    #[error("malformed file {path}: {reason}")]
    Format { path: String, reason: String },
    #[error("realization {index} of {label}: {source}")]
    Simulation {
        label: String,
        index: usize,
        source: crate::hydro::HydroError,
    },
    #[error("split overlap: realization {0} assigned twice")]
    SplitOverlap(usize),
    #[error(transparent)]
    Seaway(#[from] crate::seaway::SeawayError),
    #[error(transparent)]
    Hydro(#[from] crate::hydro::HydroError),
    #[error(transparent)]
    Snippet(#[from] crate::snippets::SnippetError),
    #[error(transparent)]
    Lstm(#[from] crate::lstm::LstmError),
    #[error(transparent)]
    Stats(#[from] crate::evalstats::StatsError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl PipelineError {
    /// Stable short name for machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            PipelineError::Config(_) => "config",
            PipelineError::Missing(_) => "missing_input",
            PipelineError::HashMismatch { .. } => "hash_mismatch",
            PipelineError::ConfigMismatch { .. } => "config_mismatch",
            PipelineError::Format { .. } => "format",
            PipelineError::Simulation { .. } | PipelineError::Hydro(_) => "simulation",
            PipelineError::SplitOverlap(_) => "split_overlap",
            PipelineError::Seaway(_) => "seaway",
            PipelineError::Snippet(_) => "snippets",
            PipelineError::Lstm(_) => "lstm",
            PipelineError::Stats(_) => "stats",
            PipelineError::Csv(_) | PipelineError::Json(_) | PipelineError::Io { .. } => "io",
        }
    }
}

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}
