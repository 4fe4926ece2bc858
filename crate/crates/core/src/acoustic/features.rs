//! MFCC extraction: pre-emphasis, Hamming-windowed frames, mel filterbank,
//! log, DCT, deltas and per-utterance CMVN.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{num_complex::Complex, FftPlanner};

use super::{AcousticError, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub frame_length: f64,
    pub frame_shift: f64,
    pub preemphasis: f64,
    pub num_mel: usize,
    pub num_ceps: usize,
    pub low_freq: f64,
    pub delta_window: usize,
    /// Standard deviation of Gaussian dither on the 16-bit sample scale.
    pub dither: f64,
    pub seed: u64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            frame_length: 0.025,
            frame_shift: 0.010,
            preemphasis: 0.97,
            num_mel: 23,
            num_ceps: 13,
            low_freq: 20.0,
            delta_window: 2,
            dither: 1.0,
            seed: 0,
        }
    }
}

impl FeatureConfig {
    pub fn frame_samples(&self, sample_rate: u32) -> (usize, usize) {
        let len = (self.frame_length * sample_rate as f64).round() as usize;
        let shift = (self.frame_shift * sample_rate as f64).round() as usize;
        (len, shift)
    }

    pub fn dim(&self) -> usize {
        self.num_ceps * 3
    }

    /// `1 + floor((n - len) / shift)`, or 0 when shorter than one frame.
    pub fn num_frames(&self, num_samples: usize, sample_rate: u32) -> usize {
        let (len, shift) = self.frame_samples(sample_rate);
        if num_samples < len {
            0
        } else {
            1 + (num_samples - len) / shift
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub data: Matrix,
    pub frame_shift: f64,
    pub frame_length: f64,
}

impl FeatureMatrix {
    pub fn new(data: Matrix, config: &FeatureConfig) -> Self {
        Self {
            data,
            frame_shift: config.frame_shift,
            frame_length: config.frame_length,
        }
    }

    pub fn num_frames(&self) -> usize {
        self.data.rows()
    }

    pub fn dim(&self) -> usize {
        self.data.cols()
    }
}

fn mel(f: f64) -> f64 {
    1127.0 * (1.0 + f / 700.0).ln()
}

/// Triangular filters equally spaced on the mel scale, as
/// `(first bin, weights)` pairs over the power spectrum.
fn mel_filterbank(num: usize, fft_size: usize, sample_rate: u32, low: f64) -> Vec<(usize, Vec<f64>)> {
    let nyquist = sample_rate as f64 / 2.0;
    let (lo, hi) = (mel(low), mel(nyquist));
    let step = (hi - lo) / (num + 1) as f64;
    let bin_width = sample_rate as f64 / fft_size as f64;
    (0..num)
        .map(|m| {
            let left = lo + m as f64 * step;
            let center = left + step;
            let right = center + step;
            let mut first = None;
            let mut weights = Vec::new();
            for bin in 0..=fft_size / 2 {
                let f = mel(bin as f64 * bin_width);
                let w = if f > left && f < right {
                    if f <= center {
                        (f - left) / (center - left)
                    } else {
                        (right - f) / (right - center)
                    }
                } else {
                    0.0
                };
                if w > 0.0 {
                    first.get_or_insert(bin);
                    weights.push(w);
                } else if first.is_some() {
                    break;
                }
            }
            (first.unwrap_or(0), weights)
        })
        .collect()
}

fn dct_matrix(num_ceps: usize, num_mel: usize) -> Vec<Vec<f64>> {
    (0..num_ceps)
        .map(|k| {
            let scale = if k == 0 {
                (1.0 / num_mel as f64).sqrt()
            } else {
                (2.0 / num_mel as f64).sqrt()
            };
            (0..num_mel)
                .map(|n| scale * (PI * k as f64 * (n as f64 + 0.5) / num_mel as f64).cos())
                .collect()
        })
        .collect()
}

/// Regression deltas `sum_n n (c[t+n] - c[t-n]) / (2 sum_n n^2)`, edges
/// replicated.
pub fn deltas(m: &Matrix, window: usize) -> Matrix {
    let t_max = m.rows() as isize - 1;
    let denom: f64 = 2.0 * (1..=window).map(|n| (n * n) as f64).sum::<f64>();
    let mut out = Matrix::zeros(m.rows(), m.cols());
    for t in 0..m.rows() {
        for n in 1..=window {
            let ahead = m.row((t as isize + n as isize).min(t_max) as usize);
            let behind = m.row((t as isize - n as isize).max(0) as usize);
            for ((o, a), b) in out.row_mut(t).iter_mut().zip(ahead).zip(behind) {
                *o += n as f64 * (a - b) / denom;
            }
        }
    }
    out
}

/// Per-dimension zero mean and unit variance; constant dimensions are only
/// mean-normalized.
pub fn cmvn(m: &mut Matrix) {
    let t = m.rows() as f64;
    for c in 0..m.cols() {
        let mean = (0..m.rows()).map(|r| m.get(r, c)).sum::<f64>() / t;
        let var = (0..m.rows()).map(|r| (m.get(r, c) - mean).powi(2)).sum::<f64>() / t;
        let sd = if var > 1e-20 { var.sqrt() } else { 1.0 };
        for r in 0..m.rows() {
            m.set(r, c, (m.get(r, c) - mean) / sd);
        }
    }
}

/// Samples are on the 16-bit integer scale.
pub fn extract_features(
    samples: &[f64],
    sample_rate: u32,
    config: &FeatureConfig,
) -> Result<FeatureMatrix, AcousticError> {
    if sample_rate < 8000 {
        return Err(AcousticError::UnsupportedFormat(format!(
            "sample rate {sample_rate} Hz is below 8 kHz"
        )));
    }
    let (len, shift) = config.frame_samples(sample_rate);
    if samples.len() < len {
        return Err(AcousticError::TooShort {
            samples: samples.len(),
            needed: len,
        });
    }
    let num_frames = config.num_frames(samples.len(), sample_rate);
    let fft_size = len.next_power_of_two();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(fft_size);
    let window: Vec<f64> = (0..len)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (len - 1) as f64).cos())
        .collect();
    let filters = mel_filterbank(config.num_mel, fft_size, sample_rate, config.low_freq);
    let dct = dct_matrix(config.num_ceps, config.num_mel);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut ceps = Matrix::zeros(num_frames, config.num_ceps);
    let mut frame = vec![0.0; len];
    let mut buf = vec![Complex::new(0.0, 0.0); fft_size];
    for t in 0..num_frames {
        frame.copy_from_slice(&samples[t * shift..t * shift + len]);
        if config.dither > 0.0 {
            for x in frame.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *x += config.dither * z;
            }
        }
        let dc = frame.iter().sum::<f64>() / len as f64;
        frame.iter_mut().for_each(|x| *x -= dc);
        for i in (1..len).rev() {
            frame[i] -= config.preemphasis * frame[i - 1];
        }
        frame[0] -= config.preemphasis * frame[0];
        for (b, (x, w)) in buf.iter_mut().zip(frame.iter().zip(&window)) {
            *b = Complex::new(x * w, 0.0);
        }
        buf[len..].iter_mut().for_each(|b| *b = Complex::new(0.0, 0.0));
        fft.process(&mut buf);
        let power: Vec<f64> = buf[..=fft_size / 2].iter().map(|c| c.norm_sqr()).collect();
        let log_mel: Vec<f64> = filters
            .iter()
            .map(|(first, w)| {
                let e: f64 = w.iter().zip(&power[*first..]).map(|(a, b)| a * b).sum();
                e.max(f64::EPSILON).ln()
            })
            .collect();
        for (k, row) in dct.iter().enumerate() {
            ceps.set(t, k, row.iter().zip(&log_mel).map(|(a, b)| a * b).sum());
        }
    }

    let d1 = deltas(&ceps, config.delta_window);
    let d2 = deltas(&d1, config.delta_window);
    let mut full = Matrix::zeros(num_frames, config.dim());
    for t in 0..num_frames {
        let row = full.row_mut(t);
        let n = config.num_ceps;
        row[..n].copy_from_slice(ceps.row(t));
        row[n..2 * n].copy_from_slice(d1.row(t));
        row[2 * n..].copy_from_slice(d2.row(t));
    }
    cmvn(&mut full);
    Ok(FeatureMatrix::new(full, config))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, seconds: f64, sr: u32) -> Vec<f64> {
        let n = (seconds * sr as f64) as usize;
        (0..n)
            .map(|i| 8000.0 * (2.0 * PI * freq * i as f64 / sr as f64).sin())
            .collect()
    }

    #[test]
    fn one_second_of_silence_gives_98_frames() {
        let cfg = FeatureConfig::default();
        let f = extract_features(&vec![0.0; 16000], 16000, &cfg).unwrap();
        assert_eq!(f.num_frames(), 1 + (16000 - 400) / 160);
        assert_eq!(f.num_frames(), 98);
        assert_eq!(f.dim(), 39);
        assert!(f.data.is_finite());
    }

    #[test]
    fn cmvn_normalizes_every_dimension() {
        let cfg = FeatureConfig::default();
        let f = extract_features(&tone(300.0, 0.5, 16000), 16000, &cfg).unwrap();
        let t = f.num_frames() as f64;
        for c in 0..f.dim() {
            let mean = f.data.iter_rows().map(|r| r[c]).sum::<f64>() / t;
            let var = f.data.iter_rows().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / t;
            assert!(mean.abs() < 1e-6);
            assert!((var - 1.0).abs() < 1e-6 || var < 1e-12, "dim {c} var {var}");
        }
    }

    #[test]
    fn tone_and_noise_differ() {
        let cfg = FeatureConfig {
            dither: 0.0,
            ..Default::default()
        };
        let a = extract_features(&tone(440.0, 0.3, 16000), 16000, &cfg).unwrap();
        let noise = FeatureConfig {
            dither: 3000.0,
            ..Default::default()
        };
        let b = extract_features(&vec![0.0; 4800], 16000, &noise).unwrap();
        let dist: f64 = a
            .data
            .row(10)
            .iter()
            .zip(b.data.row(10))
            .map(|(x, y)| (x - y).powi(2))
            .sum();
        assert!(dist > 0.0);
    }

    #[test]
    fn rejects_short_and_low_rate_audio() {
        let cfg = FeatureConfig::default();
        assert!(matches!(
            extract_features(&[0.0; 100], 16000, &cfg),
            Err(AcousticError::TooShort { .. })
        ));
        assert!(matches!(
            extract_features(&[0.0; 8000], 4000, &cfg),
            Err(AcousticError::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn deltas_of_a_ramp_are_constant() {
        let m = Matrix::from_rows((0..9).map(|t| vec![t as f64]).collect());
        let d = deltas(&m, 2);
        assert!((d.get(4, 0) - 1.0).abs() < 1e-12);
    }
}
