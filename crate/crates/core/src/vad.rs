//! Frame-level voice activity detection and pause extraction.
//!
//! The detector is a deterministic adaptive-energy stand-in exposing the same
//! interface (frame duration, aggressiveness 0-3) as the usual external VAD
//! tools. Decisions can also be loaded from a text file, so any external
//! detector can be substituted without touching the segmentation policy.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::audio::{AudioBuffer, AudioError};
use crate::sample::Sample;

/// Frames of history feeding the noise-floor percentile.
const NOISE_WINDOW_FRAMES: usize = 100;

#[derive(Debug, Error)]
pub enum VadError {
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error("aggressiveness {0} out of range 0..=3")]
    BadAggressiveness(u8),
    #[error("bad decisions format at line {line}: {reason}")]
    BadDecisionsFormat { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Detector knobs. Higher aggressiveness classifies fewer frames as speech.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VadConfig {
    pub frame_ms: u32,
    pub aggressiveness: u8,
    pub hangover_frames: usize,
}

impl Default for VadConfig {
    fn default() -> Self {
        Self {
            frame_ms: 20,
            aggressiveness: 2,
            hangover_frames: 4,
        }
    }
}

/// Per-frame voice/non-voice labels plus the framing metadata needed to map
/// them back to seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct VadDecisions {
    frame_ms: u32,
    labels: Vec<bool>,
    total_audio_seconds: f64,
}

impl VadDecisions {
    pub fn new(frame_ms: u32, labels: Vec<bool>, total_audio_seconds: f64) -> Self {
        debug_assert!(total_audio_seconds >= labels.len() as f64 * frame_ms as f64 / 1000.0);
        Self {
            frame_ms,
            labels,
            total_audio_seconds,
        }
    }

    pub fn frame_ms(&self) -> u32 {
        self.frame_ms
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn total_audio_seconds(&self) -> f64 {
        self.total_audio_seconds
    }

    /// Seconds per frame.
    pub fn frame_seconds(&self) -> f64 {
        self.frame_ms as f64 / 1000.0
    }
}

/// Maximal run of consecutive non-voiced frames, `[start_frame, end_frame)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pause {
    pub start_frame: usize,
    pub end_frame: usize,
    pub length_frames: usize,
}

/// Labels every frame of `buffer` as voiced or not.
///
/// Decision rule: frame log-energy `e_db = 10*log10(mean(x^2) + 1e-12)`;
/// the noise floor is the 10th percentile of `e_db` over a trailing window
/// of up to 100 frames ending at the current one (so the first frame's floor
/// is its own energy); a frame is voiced iff `e_db` exceeds the floor by the
/// aggressiveness margin (3/6/9/12 dB). Voiced runs are then extended right
/// by `hangover_frames`.
pub fn detect_voice<F: Sample>(
    buffer: &AudioBuffer<F>,
    config: &VadConfig,
) -> Result<VadDecisions, VadError> {
    let margin = margin_db(config.aggressiveness)?;
    let spf = buffer.samples_per_frame(config.frame_ms)?;

    let inv_spf = F::from(spf).unwrap().recip();
    let ten = F::from(10.0).unwrap();
    let eps = F::from(1e-12).unwrap();
    let energies: Vec<F> = buffer
        .frames(config.frame_ms)?
        .map(|frame| {
            let mean_sq = frame.iter().fold(F::zero(), |acc, &x| acc + x * x) * inv_spf;
            ten * (mean_sq + eps).log10()
        })
        .collect();

    let margin = F::from(margin).unwrap();
    let mut labels = Vec::with_capacity(energies.len());
    let mut window: Vec<F> = Vec::with_capacity(NOISE_WINDOW_FRAMES);
    for (t, &e) in energies.iter().enumerate() {
        let lo = t.saturating_sub(NOISE_WINDOW_FRAMES - 1);
        window.clear();
        window.extend_from_slice(&energies[lo..=t]);
        window.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // nearest-rank-below 10th percentile: floor(0.1 * (len - 1))
        let floor = window[(window.len() - 1) / 10];
        labels.push(e > floor + margin);
    }

    apply_hangover(&mut labels, config.hangover_frames);

    Ok(VadDecisions::new(
        config.frame_ms,
        labels,
        buffer.duration_seconds(),
    ))
}

fn margin_db(aggressiveness: u8) -> Result<f64, VadError> {
    match aggressiveness {
        0 => Ok(3.0),
        1 => Ok(6.0),
        2 => Ok(9.0),
        3 => Ok(12.0),
        other => Err(VadError::BadAggressiveness(other)),
    }
}

fn apply_hangover(labels: &mut [bool], hangover_frames: usize) {
    let mut carry = 0usize;
    for label in labels.iter_mut() {
        if *label {
            carry = hangover_frames;
        } else if carry > 0 {
            *label = true;
            carry -= 1;
        }
    }
}

/// All maximal non-voiced runs of at least `min_pause_frames`, in order.
pub fn extract_pauses(decisions: &VadDecisions, min_pause_frames: usize) -> Vec<Pause> {
    let min = min_pause_frames.max(1);
    let labels = decisions.labels();
    let mut pauses = Vec::new();
    let mut start = None;
    for (i, &voiced) in labels.iter().enumerate() {
        match (voiced, start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                if i - s >= min {
                    pauses.push(Pause {
                        start_frame: s,
                        end_frame: i,
                        length_frames: i - s,
                    });
                }
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        let end = labels.len();
        if end - s >= min {
            pauses.push(Pause {
                start_frame: s,
                end_frame: end,
                length_frames: end - s,
            });
        }
    }
    pauses
}

/// Writes decisions in the exchange format:
/// header `#vad frame_ms=<int> frames=<int>`, then one `<index>\t<0|1>`
/// line per frame. Newlines are LF.
pub fn write_decisions(decisions: &VadDecisions, w: &mut impl Write) -> io::Result<()> {
    writeln!(
        w,
        "#vad frame_ms={} frames={}",
        decisions.frame_ms(),
        decisions.len()
    )?;
    for (i, &voiced) in decisions.labels().iter().enumerate() {
        writeln!(w, "{}\t{}", i, voiced as u8)?;
    }
    Ok(())
}

/// Reads the decisions format back; `write_decisions` followed by
/// `read_decisions` is the identity on `(frame_ms, labels)`.
pub fn read_decisions(r: impl BufRead) -> Result<VadDecisions, VadError> {
    let mut lines = r.lines();
    let header = match lines.next() {
        Some(line) => line?,
        None => {
            return Err(VadError::BadDecisionsFormat {
                line: 1,
                reason: "empty file, missing #vad header".to_string(),
            })
        }
    };
    let (frame_ms, frames) = parse_header(&header).map_err(|reason| {
        VadError::BadDecisionsFormat { line: 1, reason }
    })?;

    let mut labels = Vec::with_capacity(frames);
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        let lineno = lineno + 2;
        let bad = |reason: String| VadError::BadDecisionsFormat { line: lineno, reason };
        let (idx, label) = line
            .split_once('\t')
            .ok_or_else(|| bad("expected <index>\\t<0|1>".to_string()))?;
        let idx: usize = idx
            .parse()
            .map_err(|_| bad(format!("bad frame index {idx:?}")))?;
        if idx != labels.len() {
            return Err(bad(format!(
                "non-monotonic index {idx}, expected {}",
                labels.len()
            )));
        }
        match label {
            "0" => labels.push(false),
            "1" => labels.push(true),
            other => return Err(bad(format!("label must be 0 or 1, got {other:?}"))),
        }
    }
    if labels.len() != frames {
        return Err(VadError::BadDecisionsFormat {
            line: labels.len() + 2,
            reason: format!("header declares {} frames, file holds {}", frames, labels.len()),
        });
    }
    let total = frames as f64 * frame_ms as f64 / 1000.0;
    Ok(VadDecisions::new(frame_ms, labels, total))
}

fn parse_header(header: &str) -> Result<(u32, usize), String> {
    let rest = header
        .strip_prefix("#vad ")
        .ok_or_else(|| "missing #vad header".to_string())?;
    let mut frame_ms = None;
    let mut frames = None;
    for field in rest.split_whitespace() {
        match field.split_once('=') {
            Some(("frame_ms", v)) => {
                frame_ms = Some(v.parse::<u32>().map_err(|_| format!("bad frame_ms {v:?}"))?)
            }
            Some(("frames", v)) => {
                frames = Some(v.parse::<usize>().map_err(|_| format!("bad frames {v:?}"))?)
            }
            _ => return Err(format!("unknown header field {field:?}")),
        }
    }
    match (frame_ms, frames) {
        (Some(f), Some(n)) => Ok((f, n)),
        _ => Err("header must carry frame_ms= and frames=".to_string()),
    }
}
