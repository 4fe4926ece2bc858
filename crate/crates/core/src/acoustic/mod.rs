//! MFCC features and the monophone GMM-HMM acoustic model.

pub mod archive;
pub mod features;
pub mod model;
pub mod train;
pub mod wav;

use thiserror::Error;

pub use features::{extract_features, FeatureConfig, FeatureMatrix};
pub use model::{AcousticModel, Gmm, PosteriorMatrix};
pub use train::{train_am, TrainConfig, TrainReport};

#[derive(Debug, Error)]
pub enum AcousticError {
    #[error("audio is too short: {samples} samples, need at least {needed}")]
    TooShort { samples: usize, needed: usize },
    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),
    #[error("insufficient training data: {0}")]
    InsufficientData(String),
    #[error("feature dimension {found} does not match model dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unknown senone {0}")]
    UnknownSenone(usize),
    #[error("unknown phone {0:?}")]
    UnknownPhone(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self {
            rows: rows.len(),
            cols,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.rows).map(|r| self.row(r))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}
