//! Joint-sequence grapheme-to-phoneme conversion.
//!
//! A word and its pronunciation are segmented into graphones, pairs of up
//! to `Lg` letters and up to `Lp` phones. An M-gram model over graphone
//! sequences is trained by EM over all segmentations, smoothed with
//! absolute discounting and backoff, and decoded with a beam search
//! followed by best-first n-best extraction.

mod decode;
mod lattice;
mod model;
mod train;

use std::fmt;

use thiserror::Error;

pub use decode::{decode, Hypothesis, UNBOUNDED_BEAM};
pub use model::{GraphoneModel, BOS, EOS};
pub use train::{train, G2pConfig, TrainReport};

#[derive(Debug, Error)]
pub enum G2pError {
    #[error("no training entries")]
    EmptyTrainingSet,
    #[error("{word} cannot be segmented into graphones under the length bounds")]
    NoValidSegmentation { word: String },
    #[error("letter {letter:?} in {word} is not in the model's alphabet")]
    UnknownGrapheme { word: String, letter: char },
    #[error("no hypothesis survived the beam for {word}")]
    NoHypothesis { word: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("model parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// A grapheme string paired with a phone string; at most one side empty.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Graphone {
    pub letters: String,
    pub phones: Vec<String>,
}

impl Graphone {
    pub fn new(letters: &str, phones: &[&str]) -> Self {
        Self {
            letters: letters.to_string(),
            phones: phones.iter().map(|p| p.to_string()).collect(),
        }
    }

    /// Empty grapheme side.
    pub fn is_insertion(&self) -> bool {
        self.letters.is_empty()
    }

    /// Inverse of `Display`: `LETTERS:PH1_PH2`.
    pub fn parse(text: &str) -> Option<Self> {
        let (letters, phones) = text.split_once(':')?;
        let phones: Vec<String> = if phones.is_empty() {
            Vec::new()
        } else {
            phones.split('_').map(str::to_string).collect()
        };
        (!letters.is_empty() || !phones.is_empty()).then(|| Self {
            letters: letters.to_string(),
            phones,
        })
    }
}

impl fmt::Display for Graphone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.letters, self.phones.join("_"))
    }
}

/// Levenshtein distance between phone strings.
pub fn edit_distance(a: &[String], b: &[String]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = (prev[j] + usize::from(x != y)).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

/// Total edit distance over total reference length.
pub fn phone_error_rate<'a>(pairs: impl IntoIterator<Item = (&'a [String], &'a [String])>) -> f64 {
    let (errors, total) = pairs.into_iter().fold((0, 0), |(e, n), (hyp, reference)| {
        (e + edit_distance(hyp, reference), n + reference.len())
    });
    if total == 0 {
        0.0
    } else {
        errors as f64 / total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graphone_text_roundtrip() {
        for g in [
            Graphone::new("AB", &["AH", "B"]),
            Graphone::new("", &["T"]),
            Graphone::new("E", &[]),
        ] {
            assert_eq!(Graphone::parse(&g.to_string()), Some(g));
        }
        assert_eq!(Graphone::parse(":"), None);
    }

    #[test]
    fn per() {
        let s = |x: &str| x.split_whitespace().map(str::to_string).collect::<Vec<_>>();
        assert_eq!(edit_distance(&s("K AE T"), &s("K AE T")), 0);
        assert_eq!(edit_distance(&s("K AE"), &s("K AE T")), 1);
        assert_eq!(edit_distance(&s("B AE T"), &s("K AE T S")), 2);
        let (h, r) = (s("K AE"), s("K AE T S"));
        assert_eq!(phone_error_rate([(h.as_slice(), r.as_slice())]), 0.5);
    }
}
