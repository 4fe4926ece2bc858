use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use super::PipelineError;
use crate::lexicon::tokenize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub utt_id: String,
    pub audio: PathBuf,
    pub transcript: Vec<String>,
}

/// `utt-id<TAB>audio-path<TAB>transcript` per line; relative audio paths
/// are resolved against `base_dir`.
pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<Vec<ManifestEntry>, PipelineError> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: &str| PipelineError::Manifest {
            line: i + 1,
            message: message.to_string(),
        };
        let mut cols = line.splitn(3, '\t');
        let (Some(id), Some(audio), Some(transcript)) = (cols.next(), cols.next(), cols.next()) else {
            return Err(err("expected utt-id<TAB>audio<TAB>transcript"));
        };
        let id = id.trim();
        if id.is_empty() || id.contains(char::is_whitespace) || id.contains('/') {
            return Err(err("bad utterance id"));
        }
        if !seen.insert(id.to_string()) {
            return Err(err(&format!("duplicate utterance id {id}")));
        }
        let transcript = tokenize(transcript);
        if transcript.is_empty() {
            return Err(err("empty transcript"));
        }
        out.push(ManifestEntry {
            utt_id: id.to_string(),
            audio: base_dir.join(audio.trim()),
            transcript,
        });
    }
    Ok(out)
}

pub fn write_manifest(entries: &[ManifestEntry]) -> String {
    entries
        .iter()
        .map(|e| format!("{}\t{}\t{}\n", e.utt_id, e.audio.display(), e.transcript.join(" ")))
        .collect()
}
