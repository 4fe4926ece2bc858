//! RIFF WAV, PCM-16 mono only.

use std::path::Path;

use super::AcousticError;

fn hound_err(e: hound::Error) -> AcousticError {
    match e {
        hound::Error::IoError(io) => AcousticError::Io(io),
        other => AcousticError::UnsupportedFormat(other.to_string()),
    }
}

/// Samples on the 16-bit integer scale and the sample rate.
pub fn read_wav(path: &Path) -> Result<(Vec<f64>, u32), AcousticError> {
    let mut reader = hound::WavReader::open(path).map_err(hound_err)?;
    let spec = reader.spec();
    if spec.channels != 1 || spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
        return Err(AcousticError::UnsupportedFormat(format!(
            "{}: need PCM-16 mono, found {} channel(s), {} bits, {:?}",
            path.display(),
            spec.channels,
            spec.bits_per_sample,
            spec.sample_format
        )));
    }
    let samples = reader
        .samples::<i16>()
        .map(|s| s.map(f64::from))
        .collect::<Result<Vec<_>, _>>()
        .map_err(hound_err)?;
    Ok((samples, spec.sample_rate))
}

pub fn write_wav(path: &Path, samples: &[f64], sample_rate: u32) -> Result<(), AcousticError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(hound_err)?;
    for &s in samples {
        let v = s.round().clamp(i16::MIN as f64, i16::MAX as f64) as i16;
        w.write_sample(v).map_err(hound_err)?;
    }
    w.finalize().map_err(hound_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        let samples = vec![0.0, 1.0, -2.0, 32767.0, -32768.0, 40000.0];
        write_wav(&p, &samples, 16000).unwrap();
        let (back, sr) = read_wav(&p).unwrap();
        assert_eq!(sr, 16000);
        assert_eq!(back, vec![0.0, 1.0, -2.0, 32767.0, -32768.0, 32767.0]);
    }

    #[test]
    fn stereo_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 16000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&p, spec).unwrap();
        w.write_sample(0i16).unwrap();
        w.write_sample(0i16).unwrap();
        w.finalize().unwrap();
        assert!(matches!(read_wav(&p), Err(AcousticError::UnsupportedFormat(_))));
    }
}
