//! WAV loading and deterministic fixed-length framing.
//!
//! Input is deliberately restricted to 16 kHz mono 16-bit PCM so the DSP
//! surface stays small and auditable; resampling is out of scope.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::sample::Sample;

/// The only sample rate the toolkit accepts.
pub const SUPPORTED_SAMPLE_RATE: u32 = 16_000;

/// Frame durations supported by the VAD framing (in milliseconds).
pub const SUPPORTED_FRAME_MS: [u32; 3] = [10, 20, 30];

const I16_SCALE: f64 = 32768.0;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("{0}: not a RIFF/WAVE file")]
    NotWav(String),
    #[error("unsupported encoding: expected 16-bit integer PCM, found {0}")]
    UnsupportedEncoding(String),
    #[error("unsupported channel count {0}: only mono input is accepted")]
    UnsupportedChannels(u16),
    #[error("unsupported sample rate {0} Hz: expected {SUPPORTED_SAMPLE_RATE} Hz")]
    UnsupportedRate(u32),
    #[error("truncated file: {0}")]
    TruncatedFile(String),
    #[error("bad frame duration {0} ms: must be one of 10, 20, 30")]
    BadFrameDuration(u32),
    #[error("frame index {index} out of range (frame count {count})")]
    IndexOutOfRange { index: usize, count: usize },
    #[error("sample rate must be positive")]
    ZeroSampleRate,
    #[error("sample {0} outside [-1.0, 1.0]")]
    SampleOutOfRange(usize),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Mono PCM signal at a fixed rate; immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer<F> {
    sample_rate: u32,
    samples: Vec<F>,
    source_path: String,
}

impl<F: Sample> AudioBuffer<F> {
    /// Builds a buffer, checking that the rate is positive and every sample
    /// lies in `[-1.0, 1.0]`.
    pub fn new(
        sample_rate: u32,
        samples: Vec<F>,
        source_path: impl Into<String>,
    ) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::ZeroSampleRate);
        }
        let one = F::one();
        if let Some(pos) = samples.iter().position(|s| *s < -one || *s > one) {
            return Err(AudioError::SampleOutOfRange(pos));
        }
        Ok(Self {
            sample_rate,
            samples,
            source_path: source_path.into(),
        })
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn samples(&self) -> &[F] {
        &self.samples
    }

    pub fn source_path(&self) -> &str {
        &self.source_path
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration in seconds. Both operands are integers, so the f64 division
    /// is the correctly rounded value of the exact rational.
    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Samples per frame for the given frame duration.
    pub fn samples_per_frame(&self, frame_ms: u32) -> Result<usize, AudioError> {
        if !SUPPORTED_FRAME_MS.contains(&frame_ms) {
            return Err(AudioError::BadFrameDuration(frame_ms));
        }
        Ok((self.sample_rate as usize * frame_ms as usize) / 1000)
    }

    /// Number of whole frames; the trailing partial frame is dropped,
    /// never zero-padded.
    pub fn frame_count(&self, frame_ms: u32) -> Result<usize, AudioError> {
        Ok(self.samples.len() / self.samples_per_frame(frame_ms)?)
    }

    pub fn frame_view(&self, frame_ms: u32, index: usize) -> Result<FrameView, AudioError> {
        let length = self.samples_per_frame(frame_ms)?;
        let count = self.samples.len() / length;
        if index >= count {
            return Err(AudioError::IndexOutOfRange { index, count });
        }
        Ok(FrameView::at(index, length))
    }

    /// Samples of frame `index`: the slice `[index*L, (index+1)*L)`.
    pub fn frame(&self, frame_ms: u32, index: usize) -> Result<&[F], AudioError> {
        let view = self.frame_view(frame_ms, index)?;
        Ok(&self.samples[view.start_sample..view.start_sample + view.length_samples])
    }

    /// Iterator over all whole frames, in order.
    pub fn frames(&self, frame_ms: u32) -> Result<impl Iterator<Item = &[F]>, AudioError> {
        let length = self.samples_per_frame(frame_ms)?;
        let count = self.samples.len() / length;
        Ok(self.samples[..count * length].chunks_exact(length))
    }
}

/// Position of one fixed-length frame in its buffer.
///
/// Frames tile the signal without overlap: `start_sample` is always
/// `index * length_samples`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameView {
    pub index: usize,
    pub start_sample: usize,
    pub length_samples: usize,
}

impl FrameView {
    fn at(index: usize, length_samples: usize) -> Self {
        Self {
            index,
            start_sample: index * length_samples,
            length_samples,
        }
    }
}

/// Reads a 16 kHz mono 16-bit PCM RIFF/WAVE file.
///
/// Integer samples are scaled by 1/32768, which is exact in both f32 and f64.
pub fn read_wav<F: Sample>(path: impl AsRef<Path>) -> Result<AudioBuffer<F>, AudioError> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let label = path.display().to_string();
    parse_wav(&bytes, &label)
}

fn parse_wav<F: Sample>(bytes: &[u8], label: &str) -> Result<AudioBuffer<F>, AudioError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(AudioError::NotWav(label.to_string()));
    }

    let mut pos = 12usize;
    let mut fmt_seen = false;
    let mut data: Option<&[u8]> = None;

    while pos < bytes.len() {
        if pos + 8 > bytes.len() {
            return Err(AudioError::TruncatedFile(format!(
                "chunk header cut short at byte {pos}"
            )));
        }
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_start = pos + 8;
        if body_start + size > bytes.len() {
            return Err(AudioError::TruncatedFile(format!(
                "chunk {} declares {} bytes but only {} remain",
                String::from_utf8_lossy(id),
                size,
                bytes.len() - body_start
            )));
        }
        let body = &bytes[body_start..body_start + size];
        match id {
            b"fmt " => {
                parse_fmt(body)?;
                fmt_seen = true;
            }
            b"data" => {
                data = Some(body);
                // fmt must describe the data; keep scanning only if unseen.
                if fmt_seen {
                    break;
                }
            }
            _ => {}
        }
        // chunks are word-aligned; odd sizes carry a pad byte
        pos = body_start + size + (size % 2);
    }

    if !fmt_seen {
        return Err(AudioError::NotWav(format!("{label}: missing fmt chunk")));
    }
    let data = data.ok_or_else(|| {
        AudioError::TruncatedFile(format!("{label}: no data chunk before end of file"))
    })?;
    if data.len() % 2 != 0 {
        return Err(AudioError::TruncatedFile(
            "data chunk holds a partial 16-bit sample".to_string(),
        ));
    }

    let samples: Vec<F> = data
        .chunks_exact(2)
        .map(|b| {
            let v = i16::from_le_bytes([b[0], b[1]]);
            F::from(v as f64 / I16_SCALE).unwrap()
        })
        .collect();

    AudioBuffer::new(SUPPORTED_SAMPLE_RATE, samples, label)
}

fn parse_fmt(body: &[u8]) -> Result<(), AudioError> {
    if body.len() < 16 {
        return Err(AudioError::TruncatedFile("fmt chunk shorter than 16 bytes".to_string()));
    }
    let format = u16::from_le_bytes([body[0], body[1]]);
    let channels = u16::from_le_bytes([body[2], body[3]]);
    let rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
    let bits = u16::from_le_bytes([body[14], body[15]]);
    if format != 1 {
        return Err(AudioError::UnsupportedEncoding(format!("format code {format}")));
    }
    if bits != 16 {
        return Err(AudioError::UnsupportedEncoding(format!("{bits}-bit samples")));
    }
    if channels != 1 {
        return Err(AudioError::UnsupportedChannels(channels));
    }
    if rate != SUPPORTED_SAMPLE_RATE {
        return Err(AudioError::UnsupportedRate(rate));
    }
    Ok(())
}

/// Writes a buffer as 16 kHz mono 16-bit PCM WAV.
///
/// Samples already on the 1/32768 grid (e.g. anything `read_wav` produced)
/// round-trip bit-identically.
pub fn write_wav<F: Sample>(buffer: &AudioBuffer<F>, path: impl AsRef<Path>) -> Result<(), AudioError> {
    let mut file = io::BufWriter::new(fs::File::create(path)?);
    write_wav_to(buffer, &mut file)?;
    file.flush()?;
    Ok(())
}

pub fn write_wav_to<F: Sample>(buffer: &AudioBuffer<F>, w: &mut impl Write) -> Result<(), AudioError> {
    let data_len = (buffer.len() * 2) as u32;
    w.write_all(b"RIFF")?;
    w.write_all(&(36 + data_len).to_le_bytes())?;
    w.write_all(b"WAVE")?;

    w.write_all(b"fmt ")?;
    w.write_all(&16u32.to_le_bytes())?;
    w.write_all(&1u16.to_le_bytes())?; // PCM
    w.write_all(&1u16.to_le_bytes())?; // mono
    w.write_all(&buffer.sample_rate().to_le_bytes())?;
    w.write_all(&(buffer.sample_rate() * 2).to_le_bytes())?; // byte rate
    w.write_all(&2u16.to_le_bytes())?; // block align
    w.write_all(&16u16.to_le_bytes())?;

    w.write_all(b"data")?;
    w.write_all(&data_len.to_le_bytes())?;
    for s in buffer.samples() {
        let v = (s.to_f64().unwrap() * I16_SCALE).round().clamp(-32768.0, 32767.0) as i16;
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quantized(values: &[i16]) -> AudioBuffer<f64> {
        let samples: Vec<f64> = values.iter().map(|&v| v as f64 / I16_SCALE).collect();
        AudioBuffer::new(SUPPORTED_SAMPLE_RATE, samples, "test.wav").unwrap()
    }

    fn wav_bytes(buffer: &AudioBuffer<f64>) -> Vec<u8> {
        let mut out = Vec::new();
        write_wav_to(buffer, &mut out).unwrap();
        out
    }

    #[test]
    fn one_second_of_zeros() {
        let buf = quantized(&vec![0i16; 16000]);
        let bytes = wav_bytes(&buf);
        let read: AudioBuffer<f64> = parse_wav(&bytes, "zeros.wav").unwrap();
        assert_eq!(read.len(), 16000);
        assert!(read.samples().iter().all(|&s| s == 0.0));
        assert_eq!(read.sample_rate(), 16000);
    }

    #[test]
    fn full_scale_sample_scaling() {
        let bytes = wav_bytes(&quantized(&[32767]));
        let read: AudioBuffer<f64> = parse_wav(&bytes, "one.wav").unwrap();
        assert_eq!(read.samples(), &[32767.0 / 32768.0]);
    }

    #[test]
    fn rejects_non_16k_rate() {
        let mut bytes = wav_bytes(&quantized(&[0, 0]));
        bytes[24..28].copy_from_slice(&44_100u32.to_le_bytes());
        match parse_wav::<f64>(&bytes, "cd.wav") {
            Err(AudioError::UnsupportedRate(44_100)) => {}
            other => panic!("expected UnsupportedRate, got {other:?}"),
        }
    }

    #[test]
    fn rejects_stereo() {
        let mut bytes = wav_bytes(&quantized(&[0, 0]));
        bytes[22..24].copy_from_slice(&2u16.to_le_bytes());
        assert!(matches!(
            parse_wav::<f64>(&bytes, "stereo.wav"),
            Err(AudioError::UnsupportedChannels(2))
        ));
    }

    #[test]
    fn rejects_non_pcm_and_non_16bit() {
        let mut float_fmt = wav_bytes(&quantized(&[0]));
        float_fmt[20..22].copy_from_slice(&3u16.to_le_bytes());
        assert!(matches!(
            parse_wav::<f64>(&float_fmt, "f.wav"),
            Err(AudioError::UnsupportedEncoding(_))
        ));

        let mut eight_bit = wav_bytes(&quantized(&[0]));
        eight_bit[34..36].copy_from_slice(&8u16.to_le_bytes());
        assert!(matches!(
            parse_wav::<f64>(&eight_bit, "8.wav"),
            Err(AudioError::UnsupportedEncoding(_))
        ));
    }

    #[test]
    fn rejects_garbage_and_truncation() {
        assert!(matches!(
            parse_wav::<f64>(b"not a wav at all", "x.bin"),
            Err(AudioError::NotWav(_))
        ));
        let bytes = wav_bytes(&quantized(&[1, 2, 3, 4]));
        let cut = &bytes[..bytes.len() - 3];
        assert!(matches!(
            parse_wav::<f64>(cut, "cut.wav"),
            Err(AudioError::TruncatedFile(_))
        ));
    }

    #[test]
    fn wav_round_trip_is_bit_identical() {
        let values: Vec<i16> = (-50..50).map(|v| (v * 321) as i16).collect();
        let buf = quantized(&values);
        let read: AudioBuffer<f64> = parse_wav(&wav_bytes(&buf), "rt.wav").unwrap();
        assert_eq!(read.samples(), buf.samples());
    }

    #[test]
    fn frame_count_examples() {
        let buf = quantized(&vec![0; 16000]);
        assert_eq!(buf.frame_count(20).unwrap(), 50);

        let buf = quantized(&vec![0; 16319]);
        assert_eq!(buf.frame_count(20).unwrap(), 50);

        let buf = quantized(&[]);
        assert_eq!(buf.frame_count(20).unwrap(), 0);
    }

    #[test]
    fn frame_count_rejects_bad_duration() {
        let buf = quantized(&vec![0; 16000]);
        assert!(matches!(buf.frame_count(25), Err(AudioError::BadFrameDuration(25))));
    }

    #[test]
    fn frame_access_and_bounds() {
        let values: Vec<i16> = (0..1000).map(|v| v as i16).collect();
        let buf = quantized(&values);
        let first = buf.frame(20, 0).unwrap();
        assert_eq!(first, &buf.samples()[..320]);

        let count = buf.frame_count(20).unwrap();
        assert!(matches!(
            buf.frame(20, count),
            Err(AudioError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn frames_tile_the_prefix_exactly() {
        let values: Vec<i16> = (0..5000).map(|v| (v % 251) as i16).collect();
        let buf = quantized(&values);
        let count = buf.frame_count(20).unwrap();
        let spf = buf.samples_per_frame(20).unwrap();

        let mut concat = Vec::new();
        for frame in buf.frames(20).unwrap() {
            concat.extend_from_slice(frame);
        }
        assert_eq!(concat.len(), count * spf);
        assert_eq!(&concat[..], &buf.samples()[..count * spf]);
        assert!(buf.len() - count * spf < spf);

        for i in 0..count {
            let v = buf.frame_view(20, i).unwrap();
            assert_eq!(v.start_sample, i * v.length_samples);
        }
    }

    #[test]
    fn buffer_validation() {
        assert!(matches!(
            AudioBuffer::new(0, vec![0.0f64], "x"),
            Err(AudioError::ZeroSampleRate)
        ));
        assert!(matches!(
            AudioBuffer::new(16000, vec![0.0f64, 1.5], "x"),
            Err(AudioError::SampleOutOfRange(1))
        ));
    }
}
