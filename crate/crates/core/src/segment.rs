//! Length-constrained hybrid segmentation and the pure-VAD baseline.
//!
//! The hybrid segmenter walks the audio left to right. Whenever more than
//! `max_len_s` remains it opens the window of admissible cut frames
//! `[c+Fmin, c+Fmax]`, picks the longest pause touching that window (the
//! pause's full length counts, ties go to the earliest), and cuts at the
//! midpoint of the pause's overlap with the window. With no pause in the
//! window the cut lands at exactly `max_len_s`. Every segment except
//! possibly the last therefore honours both bounds, and the segments tile
//! the framed audio with nothing dropped.

use std::io::{self, BufRead, Write};

use serde::Serialize;
use thiserror::Error;

use crate::vad::{extract_pauses, Pause, VadDecisions};

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("invalid length bounds: need 0 < min < max, got min={min} max={max}")]
    BadBounds { min: f64, max: f64 },
    #[error("config too tight: {min_frames} min frames >= {max_frames} max frames at {frame_ms} ms")]
    ConfigTooTight {
        min_frames: usize,
        max_frames: usize,
        frame_ms: u32,
    },
    #[error("empty input")]
    EmptyInput,
    #[error("bad manifest at line {line}: {reason}")]
    BadManifest { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// How a pause competing for a cut is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PauseScoring {
    /// Full run length, including any part outside the candidate window.
    #[default]
    FullLength,
    /// Only the frames overlapping the candidate window.
    WindowOverlapOnly,
}

/// Hard length bounds for hybrid segmentation, in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmenterConfig {
    pub min_len_s: f64,
    pub max_len_s: f64,
    pub pause_scoring: PauseScoring,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        Self {
            min_len_s: 17.0,
            max_len_s: 20.0,
            pause_scoring: PauseScoring::FullLength,
        }
    }
}

/// A span of one source audio file, in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub offset_s: f64,
    pub duration_s: f64,
    pub source: String,
    pub speaker_id: String,
}

fn seconds(frames: usize, frame_ms: u32) -> f64 {
    (frames * frame_ms as usize) as f64 / 1000.0
}

fn frame_segment(
    start: usize,
    end: usize,
    frame_ms: u32,
    source: &str,
    speaker_id: &str,
) -> Segment {
    Segment {
        offset_s: seconds(start, frame_ms),
        duration_s: seconds(end - start, frame_ms),
        source: source.to_string(),
        speaker_id: speaker_id.to_string(),
    }
}

/// Splits the decision timeline under hard min/max length bounds, cutting at
/// the best pause inside each admissible window.
pub fn hybrid_segment(
    decisions: &VadDecisions,
    config: &SegmenterConfig,
    source: &str,
    speaker_id: &str,
) -> Result<Vec<Segment>, SegmentError> {
    if !(config.min_len_s > 0.0 && config.min_len_s < config.max_len_s) {
        return Err(SegmentError::BadBounds {
            min: config.min_len_s,
            max: config.max_len_s,
        });
    }
    let frame_ms = decisions.frame_ms();
    let frame_s = frame_ms as f64 / 1000.0;
    let fmin = (config.min_len_s / frame_s).ceil() as usize;
    let fmax = (config.max_len_s / frame_s).floor() as usize;
    if fmin >= fmax {
        return Err(SegmentError::ConfigTooTight {
            min_frames: fmin,
            max_frames: fmax,
            frame_ms,
        });
    }

    let total = decisions.len();
    if total == 0 {
        return Ok(Vec::new());
    }
    let pauses = extract_pauses(decisions, 1);

    let mut segments = Vec::new();
    let mut cursor = 0usize;
    while total - cursor > fmax {
        let lo = cursor + fmin;
        let hi = cursor + fmax;
        let cut = match best_pause(&pauses, lo, hi, config.pause_scoring) {
            // midpoint of the pause's overlap with the window (half-open)
            Some((a, b)) => (a + b) / 2,
            None => hi,
        };
        segments.push(frame_segment(cursor, cut, frame_ms, source, speaker_id));
        cursor = cut;
    }
    segments.push(frame_segment(cursor, total, frame_ms, source, speaker_id));
    Ok(segments)
}

/// Overlap `[a, b)` of the winning pause with the inclusive cut window
/// `[lo, hi]`: longest scored pause, earliest start on ties.
fn best_pause(
    pauses: &[Pause],
    lo: usize,
    hi: usize,
    scoring: PauseScoring,
) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize, usize)> = None; // (score, a, b)
    for p in pauses {
        let a = p.start_frame.max(lo);
        let b = p.end_frame.min(hi + 1);
        if a >= b {
            continue;
        }
        let score = match scoring {
            PauseScoring::FullLength => p.length_frames,
            PauseScoring::WindowOverlapOnly => b - a,
        };
        // pauses are sorted by start, so strict improvement keeps the earliest
        if best.is_none_or(|(s, _, _)| score > s) {
            best = Some((score, a, b));
        }
    }
    best.map(|(_, a, b)| (a, b))
}

/// Baseline segmentation: voiced runs become segments, pauses shorter than
/// `min_pause_frames` are bridged, longer pauses are dropped from the
/// timeline, and segments shorter than `min_speech_s` are discarded.
pub fn vad_segment(
    decisions: &VadDecisions,
    min_pause_frames: usize,
    min_speech_s: f64,
    source: &str,
    speaker_id: &str,
) -> Vec<Segment> {
    let frame_ms = decisions.frame_ms();
    let labels = decisions.labels();

    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start = None;
    for (i, &voiced) in labels.iter().enumerate() {
        match (voiced, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, labels.len()));
    }

    let mut merged: Vec<(usize, usize)> = Vec::new();
    for (s, e) in runs {
        match merged.last_mut() {
            Some((_, last_end)) if s - *last_end < min_pause_frames => *last_end = e,
            _ => merged.push((s, e)),
        }
    }

    merged
        .into_iter()
        .map(|(s, e)| frame_segment(s, e, frame_ms, source, speaker_id))
        .filter(|seg| seg.duration_s >= min_speech_s)
        .collect()
}

/// Aggregate view of a segmentation run.
#[derive(Debug, Clone, Serialize)]
pub struct SegmentStats {
    pub count: usize,
    pub min_duration_s: f64,
    pub mean_duration_s: f64,
    pub max_duration_s: f64,
    /// `histogram_1s[i]` counts segments with duration in `[i, i+1)` seconds.
    pub histogram_1s: Vec<usize>,
    /// Total segment duration over the timeline `[0, last segment end)`.
    pub coverage: f64,
}

pub fn segment_stats(segments: &[Segment]) -> Result<SegmentStats, SegmentError> {
    if segments.is_empty() {
        return Err(SegmentError::EmptyInput);
    }
    let durations: Vec<f64> = segments.iter().map(|s| s.duration_s).collect();
    let total: f64 = durations.iter().sum();
    let min = durations.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = durations.iter().cloned().fold(0.0f64, f64::max);
    let end = segments
        .iter()
        .map(|s| s.offset_s + s.duration_s)
        .fold(0.0f64, f64::max);

    let mut histogram_1s = vec![0usize; max.floor() as usize + 1];
    for d in &durations {
        histogram_1s[d.floor() as usize] += 1;
    }

    Ok(SegmentStats {
        count: segments.len(),
        min_duration_s: min,
        mean_duration_s: total / segments.len() as f64,
        max_duration_s: max,
        histogram_1s,
        coverage: if end > 0.0 { total / end } else { 0.0 },
    })
}

/// Writes the per-line manifest record format,
/// `- {duration: D, offset: O, speaker_id: ID, wav: NAME}`,
/// with six-decimal fixed-point times, ordered by `(source, offset)`.
pub fn write_manifest(segments: &[Segment], w: &mut impl Write) -> io::Result<()> {
    let mut ordered: Vec<&Segment> = segments.iter().collect();
    ordered.sort_by(|a, b| {
        a.source
            .cmp(&b.source)
            .then(a.offset_s.partial_cmp(&b.offset_s).unwrap())
    });
    for s in ordered {
        writeln!(
            w,
            "- {{duration: {:.6}, offset: {:.6}, speaker_id: {}, wav: {}}}",
            s.duration_s, s.offset_s, s.speaker_id, s.source
        )?;
    }
    Ok(())
}

pub fn read_manifest(r: impl BufRead) -> Result<Vec<Segment>, SegmentError> {
    let mut segments = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        segments.push(parse_manifest_line(&line).map_err(|reason| SegmentError::BadManifest {
            line: lineno,
            reason,
        })?);
    }
    Ok(segments)
}

fn parse_manifest_line(line: &str) -> Result<Segment, String> {
    let inner = line
        .strip_prefix("- {")
        .and_then(|rest| rest.strip_suffix('}'))
        .ok_or_else(|| "expected `- {...}` record".to_string())?;
    let mut duration = None;
    let mut offset = None;
    let mut speaker = None;
    let mut wav = None;
    for field in inner.split(", ") {
        let (key, value) = field
            .split_once(": ")
            .ok_or_else(|| format!("bad field {field:?}"))?;
        match key {
            "duration" => duration = Some(value.parse::<f64>().map_err(|e| e.to_string())?),
            "offset" => offset = Some(value.parse::<f64>().map_err(|e| e.to_string())?),
            "speaker_id" => speaker = Some(value.to_string()),
            "wav" => wav = Some(value.to_string()),
            other => return Err(format!("unknown key {other:?}")),
        }
    }
    match (duration, offset, speaker, wav) {
        (Some(duration_s), Some(offset_s), Some(speaker_id), Some(source)) => Ok(Segment {
            offset_s,
            duration_s,
            source,
            speaker_id,
        }),
        _ => Err("record must carry duration, offset, speaker_id and wav".to_string()),
    }
}
