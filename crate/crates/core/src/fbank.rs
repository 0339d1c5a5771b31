//! Log-Mel filterbank extraction, utterance-level CMVN, over-length
//! filtering and the binary feature file format.

use std::io::{self, Read, Write};
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftNum, FftPlanner};
use thiserror::Error;

use crate::audio::AudioBuffer;
use crate::sample::Sample;

const FBNK_MAGIC: &[u8; 4] = b"FBNK";

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("signal too short: {samples} samples, window needs {window}")]
    TooShort { samples: usize, window: usize },
    #[error("matrix is already normalized")]
    AlreadyNormalized,
    #[error("matrix has no rows")]
    EmptyMatrix,
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("bad feature file: {0}")]
    BadFeatureFile(String),
    #[error("value count {values} does not match {rows} rows x {cols} cols")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        values: usize,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Filterbank extraction parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FbankConfig {
    pub win_ms: u32,
    pub hop_ms: u32,
    pub n_mels: usize,
    pub preemphasis: f64,
    pub mel_low_hz: f64,
    pub log_floor: f64,
    pub max_frames: usize,
}

impl Default for FbankConfig {
    fn default() -> Self {
        Self {
            win_ms: 25,
            hop_ms: 10,
            n_mels: 80,
            preemphasis: 0.97,
            mel_low_hz: 20.0,
            log_floor: 1e-10,
            max_frames: 3000,
        }
    }
}

impl FbankConfig {
    fn validate(&self) -> Result<(), FeatureError> {
        if self.n_mels < 1 {
            return Err(FeatureError::BadConfig("n_mels must be >= 1".into()));
        }
        if !(self.win_ms > self.hop_ms && self.hop_ms > 0) {
            return Err(FeatureError::BadConfig(format!(
                "need win_ms > hop_ms > 0, got {} and {}",
                self.win_ms, self.hop_ms
            )));
        }
        if !(0.0..1.0).contains(&self.preemphasis) {
            return Err(FeatureError::BadConfig(format!(
                "preemphasis {} outside [0, 1)",
                self.preemphasis
            )));
        }
        Ok(())
    }
}

/// frames x mel-bins matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MelMatrix<F> {
    rows: usize,
    cols: usize,
    values: Vec<F>,
    normalized: bool,
}

impl<F: Sample> MelMatrix<F> {
    pub fn from_values(
        rows: usize,
        cols: usize,
        values: Vec<F>,
        normalized: bool,
    ) -> Result<Self, FeatureError> {
        if values.len() != rows * cols {
            return Err(FeatureError::ShapeMismatch {
                rows,
                cols,
                values: values.len(),
            });
        }
        Ok(Self {
            rows,
            cols,
            values,
            normalized,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn normalized(&self) -> bool {
        self.normalized
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> F {
        self.values[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[F] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }
}

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters spaced uniformly on the mel scale between
/// `mel_low_hz` and Nyquist; returns `n_mels` rows of `n_fft/2 + 1` weights.
pub fn mel_filter_bank(
    sample_rate: u32,
    n_fft: usize,
    n_mels: usize,
    mel_low_hz: f64,
) -> Vec<Vec<f64>> {
    let n_bins = n_fft / 2 + 1;
    let mel_lo = hz_to_mel(mel_low_hz);
    let mel_hi = hz_to_mel(sample_rate as f64 / 2.0);
    let delta = (mel_hi - mel_lo) / (n_mels + 1) as f64;

    let mut filters = Vec::with_capacity(n_mels);
    for j in 0..n_mels {
        let left = mel_lo + j as f64 * delta;
        let center = left + delta;
        let right = center + delta;
        let mut row = Vec::with_capacity(n_bins);
        for k in 0..n_bins {
            let mel = hz_to_mel(k as f64 * sample_rate as f64 / n_fft as f64);
            let rise = (mel - left) / delta;
            let fall = (right - mel) / delta;
            row.push(rise.min(fall).max(0.0));
        }
        filters.push(row);
    }
    filters
}

/// Extracts log-Mel filterbank features.
///
/// Frames are snipped at the edges (`rows = 1 + (N - win) / hop`, no
/// padding). Each frame is mean-removed, pre-emphasized within the frame
/// (the first sample against itself), Hamming-windowed, zero-padded to the
/// next power of two, and pushed through the power spectrum and mel
/// filters; energies are floored before the natural log.
pub fn fbank<F: Sample + FftNum>(
    buffer: &AudioBuffer<F>,
    config: &FbankConfig,
) -> Result<MelMatrix<F>, FeatureError> {
    config.validate()?;
    let sample_rate = buffer.sample_rate();
    let win = (sample_rate as usize * config.win_ms as usize) / 1000;
    let hop = (sample_rate as usize * config.hop_ms as usize) / 1000;
    let samples = buffer.samples();
    if samples.len() < win {
        return Err(FeatureError::TooShort {
            samples: samples.len(),
            window: win,
        });
    }
    let rows = 1 + (samples.len() - win) / hop;
    let n_fft = win.next_power_of_two();

    let hamming: Vec<F> = (0..win)
        .map(|i| {
            let x = 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / (win - 1) as f64).cos();
            F::from(x).unwrap()
        })
        .collect();
    let filters: Vec<Vec<F>> = mel_filter_bank(sample_rate, n_fft, config.n_mels, config.mel_low_hz)
        .into_iter()
        .map(|row| row.into_iter().map(|w| F::from(w).unwrap()).collect())
        .collect();

    let preemph = F::from(config.preemphasis).unwrap();
    let log_floor = F::from(config.log_floor).unwrap();
    let fft: Arc<dyn Fft<F>> = FftPlanner::<F>::new().plan_fft_forward(n_fft);

    let mut values = Vec::with_capacity(rows * config.n_mels);
    let mut frame = vec![F::zero(); win];
    let mut spectrum = vec![Complex::new(F::zero(), F::zero()); n_fft];
    let mut power = vec![F::zero(); n_fft / 2 + 1];

    for r in 0..rows {
        let start = r * hop;
        frame.copy_from_slice(&samples[start..start + win]);

        let mean = frame.iter().fold(F::zero(), |a, &x| a + x) / F::from(win).unwrap();
        for x in frame.iter_mut() {
            *x -= mean;
        }
        for i in (1..win).rev() {
            frame[i] = frame[i] - preemph * frame[i - 1];
        }
        frame[0] = frame[0] - preemph * frame[0];

        for (i, c) in spectrum.iter_mut().enumerate() {
            *c = if i < win {
                Complex::new(frame[i] * hamming[i], F::zero())
            } else {
                Complex::new(F::zero(), F::zero())
            };
        }
        fft.process(&mut spectrum);
        for (p, c) in power.iter_mut().zip(spectrum.iter()) {
            *p = c.re * c.re + c.im * c.im;
        }

        for filter in &filters {
            let energy = filter
                .iter()
                .zip(power.iter())
                .fold(F::zero(), |a, (&w, &p)| a + w * p);
            values.push(energy.max(log_floor).ln());
        }
    }

    MelMatrix::from_values(rows, config.n_mels, values, false)
}

/// Utterance-level CMVN: per column, subtract the mean and divide by
/// `sqrt(population variance + 1e-8)`. Moments are accumulated in f64.
pub fn cmvn<F: Sample>(m: &MelMatrix<F>) -> Result<MelMatrix<F>, FeatureError> {
    if m.normalized() {
        return Err(FeatureError::AlreadyNormalized);
    }
    if m.rows() == 0 {
        return Err(FeatureError::EmptyMatrix);
    }
    let (rows, cols) = (m.rows(), m.cols());
    let mut mean = vec![0.0f64; cols];
    for r in 0..rows {
        for (j, &v) in m.row(r).iter().enumerate() {
            mean[j] += v.to_f64().unwrap();
        }
    }
    for mu in mean.iter_mut() {
        *mu /= rows as f64;
    }
    let mut var = vec![0.0f64; cols];
    for r in 0..rows {
        for (j, &v) in m.row(r).iter().enumerate() {
            let d = v.to_f64().unwrap() - mean[j];
            var[j] += d * d;
        }
    }
    let scale: Vec<f64> = var
        .iter()
        .map(|&v| 1.0 / (v / rows as f64 + 1e-8).sqrt())
        .collect();

    let mut values = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for (j, &v) in m.row(r).iter().enumerate() {
            let y = (v.to_f64().unwrap() - mean[j]) * scale[j];
            values.push(F::from(y).unwrap());
        }
    }
    MelMatrix::from_values(rows, cols, values, true)
}

/// Over-length screening: matrices with more rows than `max_frames` are
/// rejected; the boundary itself is accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LengthVerdict {
    Accept,
    Reject,
}

pub fn length_filter<F: Sample>(m: &MelMatrix<F>, max_frames: usize) -> LengthVerdict {
    if m.rows() > max_frames {
        LengthVerdict::Reject
    } else {
        LengthVerdict::Accept
    }
}

/// Writes the binary feature format: magic `FBNK`, u32 rows, u32 cols,
/// then row-major IEEE-754 f32 little-endian values.
pub fn write_fbnk<F: Sample>(m: &MelMatrix<F>, w: &mut impl Write) -> io::Result<()> {
    w.write_all(FBNK_MAGIC)?;
    w.write_all(&(m.rows() as u32).to_le_bytes())?;
    w.write_all(&(m.cols() as u32).to_le_bytes())?;
    for v in m.values() {
        w.write_all(&v.to_f32().unwrap().to_le_bytes())?;
    }
    Ok(())
}

/// Reads the binary feature format back as an f32 matrix.
pub fn read_fbnk(r: &mut impl Read) -> Result<MelMatrix<f32>, FeatureError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| FeatureError::BadFeatureFile("missing FBNK magic".into()))?;
    if &magic != FBNK_MAGIC {
        return Err(FeatureError::BadFeatureFile(format!(
            "bad magic {:?}",
            String::from_utf8_lossy(&magic)
        )));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)
        .map_err(|_| FeatureError::BadFeatureFile("truncated header".into()))?;
    let rows = u32::from_le_bytes(word) as usize;
    r.read_exact(&mut word)
        .map_err(|_| FeatureError::BadFeatureFile("truncated header".into()))?;
    let cols = u32::from_le_bytes(word) as usize;

    let mut values = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        r.read_exact(&mut word)
            .map_err(|_| FeatureError::BadFeatureFile("truncated values".into()))?;
        values.push(f32::from_le_bytes(word));
    }
    MelMatrix::from_values(rows, cols, values, false)
}
