//! End-to-end scoring with the Offline, Online and Hybrid OOV strategies.
//!
//! * Offline resolves every OOV of the corpus once, before scoring, and
//!   never changes the lexicon afterwards.
//! * Online resolves the OOVs of each utterance into a transient lexicon
//!   that is discarded after scoring.
//! * Hybrid resolves like Online but keeps the entries, so a repeated OOV
//!   reuses the cached graph.

mod batch;
mod config;
mod engine;
mod manifest;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use batch::{load_lexicons, run_batch, Summary};
pub use config::{Expansion, Mode, PipelineConfig};
pub use engine::{
    generate_oov_lexicon, Counters, LexiconState, Models, Pipeline, PipelineOptions, Resolved, UtteranceResult,
};
pub use manifest::{parse_manifest, write_manifest, ManifestEntry};

use crate::acoustic::AcousticError;
use crate::align::AlignError;
use crate::gop::GopError;
use crate::lexicon::LexiconError;
use crate::wfst::WfstError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Acoustic(#[from] AcousticError),
    #[error(transparent)]
    Graph(#[from] WfstError),
    #[error("{path}: {message}")]
    Model { path: PathBuf, message: String },
    #[error("acoustic model does not match the lexicon: {0}")]
    ModelMismatch(String),
    #[error("G2P failed for {}", .0.iter().map(|(w, e)| format!("{w} ({e})")).collect::<Vec<_>>().join(", "))]
    G2pFailure(Vec<(String, String)>),
    #[error("{utt}: OOV not seen during preparation: {}", .words.join(" "))]
    OovAtRuntime { utt: String, words: Vec<String> },
    #[error("offline mode needs prepare_offline before scoring")]
    NotPrepared,
    #[error("lexicon would grow to {entries} entries, above the limit of {limit}")]
    LexiconTooLarge { entries: usize, limit: usize },
    #[error("{utt}: {source}")]
    Align {
        utt: String,
        #[source]
        source: AlignError,
    },
    #[error("{utt}: {source}")]
    Gop {
        utt: String,
        #[source]
        source: GopError,
    },
}

impl PipelineError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
