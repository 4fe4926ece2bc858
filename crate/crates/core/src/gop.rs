//! Goodness of Pronunciation.
//!
//! For a phone segment of `T` frames aligned to senones `s_1..s_T`:
//!
//! ```text
//! GoP = (1/T) * | sum_t [ ln P(s_t | o_t) + ln P(s_t | s_{t-1}) ] + ln N |
//! ```
//!
//! where `N` is the number of senones of the model and the transition into
//! the first frame is the uniform phone entry probability (or omitted, see
//! [`EntryTransition`]). Scores are magnitudes: lower is closer to the
//! model.

use std::fmt::Write as _;

use thiserror::Error;

use crate::acoustic::{AcousticError, AcousticModel, Matrix, PosteriorMatrix};
use crate::align::Alignment;
use crate::lexicon::SIL_PHONE;

/// Posteriors below this are clamped before taking logs.
pub const MIN_POSTERIOR: f64 = 1e-300;

#[derive(Debug, Error)]
pub enum GopError {
    #[error("segment is empty")]
    EmptySegment,
    #[error("senone {0} is out of range")]
    SenoneOutOfRange(usize),
    #[error("alignment has {alignment} frames but posteriors have {posteriors}")]
    LengthMismatch { alignment: usize, posteriors: usize },
}

impl From<AcousticError> for GopError {
    fn from(e: AcousticError) -> Self {
        match e {
            AcousticError::UnknownSenone(s) => GopError::SenoneOutOfRange(s),
            other => unreachable!("transition lookup only fails on senones: {other}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EntryTransition {
    /// `ln(1 / num_phones)` for the first frame.
    #[default]
    Uniform,
    /// No transition term for the first frame.
    Skip,
}

/// Scores frames `start..start + senones.len()` of `posteriors`.
pub fn score_phone(
    senones: &[usize],
    start: usize,
    posteriors: &PosteriorMatrix,
    am: &AcousticModel,
    entry: EntryTransition,
) -> Result<f64, GopError> {
    if senones.is_empty() {
        return Err(GopError::EmptySegment);
    }
    let n = am.num_senones();
    if let Some(&s) = senones.iter().find(|&&s| s >= n || s >= posteriors.data.cols()) {
        return Err(GopError::SenoneOutOfRange(s));
    }
    if start + senones.len() > posteriors.num_frames() {
        return Err(GopError::LengthMismatch {
            alignment: start + senones.len(),
            posteriors: posteriors.num_frames(),
        });
    }
    let mut sum = 0.0;
    for (i, &s) in senones.iter().enumerate() {
        sum += posteriors.get(start + i, s).max(MIN_POSTERIOR).ln();
        sum += if i == 0 {
            match entry {
                EntryTransition::Uniform => am.entry_prob().ln(),
                EntryTransition::Skip => 0.0,
            }
        } else {
            am.transition_logprob(senones[i - 1], s)?
        };
    }
    Ok((sum + (n as f64).ln()).abs() / senones.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GopRecord {
    pub phone: String,
    /// Transcript word, `None` for optional silence.
    pub word: Option<String>,
    pub start_frame: usize,
    pub end_frame: usize,
    pub gop: f64,
    pub silence: bool,
}

impl GopRecord {
    pub fn frames(&self) -> usize {
        self.end_frame - self.start_frame
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordBoundary {
    pub word: String,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GopReport {
    pub utt_id: String,
    pub frame_shift: f64,
    pub records: Vec<GopRecord>,
    pub word_boundaries: Vec<WordBoundary>,
}

impl GopReport {
    pub fn vector(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.gop).collect()
    }

    /// `utt-id phone word start dur gop`; optional silence has word `-`.
    pub fn format_lines(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let _ = writeln!(
                out,
                "{} {} {} {:.2} {:.2} {:.4}",
                self.utt_id,
                r.phone,
                r.word.as_deref().unwrap_or("-"),
                r.start_frame as f64 * self.frame_shift,
                r.frames() as f64 * self.frame_shift,
                r.gop
            );
        }
        out
    }

    /// `utt-id g1 g2 ...`
    pub fn format_vector(&self) -> String {
        let mut out = self.utt_id.clone();
        for g in self.vector() {
            let _ = write!(out, " {g:.4}");
        }
        out.push('\n');
        out
    }
}

pub fn score_utterance(
    alignment: &Alignment,
    posteriors: &PosteriorMatrix,
    am: &AcousticModel,
    frame_shift: f64,
    entry: EntryTransition,
) -> Result<GopReport, GopError> {
    if alignment.num_frames() != posteriors.num_frames() {
        return Err(GopError::LengthMismatch {
            alignment: alignment.num_frames(),
            posteriors: posteriors.num_frames(),
        });
    }
    let words = |i: Option<usize>| i.map(|w| alignment.word_segments[w].word.clone());
    let records = alignment
        .phone_segments
        .iter()
        .map(|seg| {
            let gop = score_phone(alignment.segment_senones(seg), seg.start, posteriors, am, entry)?;
            Ok(GopRecord {
                phone: seg.phone.clone(),
                word: words(seg.word),
                start_frame: seg.start,
                end_frame: seg.end,
                gop,
                silence: seg.phone == SIL_PHONE,
            })
        })
        .collect::<Result<Vec<_>, GopError>>()?;
    let word_boundaries = alignment
        .word_segments
        .iter()
        .map(|w| WordBoundary {
            word: w.word.clone(),
            start: w.start as f64 * frame_shift,
            end: w.end as f64 * frame_shift,
        })
        .collect();
    Ok(GopReport {
        utt_id: alignment.utt_id.clone(),
        frame_shift,
        records,
        word_boundaries,
    })
}

/// Posterior rows of each phone segment keyed `utt#segment#phone`, in
/// segment order.
pub fn export_posterior_map(alignment: &Alignment, posteriors: &PosteriorMatrix) -> Vec<(String, Matrix)> {
    alignment
        .phone_segments
        .iter()
        .enumerate()
        .map(|(i, seg)| {
            let rows = (seg.start..seg.end).map(|t| posteriors.data.row(t).to_vec()).collect();
            (
                format!("{}#{}#{}", alignment.utt_id, i, seg.phone),
                Matrix::from_rows(rows),
            )
        })
        .collect()
}
