//! End-to-end library flows: wav -> vad -> segments -> manifest, and
//! fbank -> cmvn -> masking -> feature file, at both scalar widths.

use std::f64::consts::PI;

use segprep_core::audio::{read_wav, write_wav, AudioBuffer};
use segprep_core::fbank::{cmvn, fbank, read_fbnk, write_fbnk, FbankConfig};
use segprep_core::segment::{hybrid_segment, read_manifest, segment_stats, write_manifest, SegmenterConfig};
use segprep_core::specaugment::{spec_augment, SpecAugmentConfig};
use segprep_core::vad::{detect_voice, read_decisions, write_decisions, VadConfig};

/// 90 s: nine 8 s tone bursts with 2 s of near-silence between them.
fn talk_samples() -> Vec<f64> {
    let n = 90 * 16000;
    (0..n)
        .map(|i| {
            let t = i as f64 / 16000.0;
            let in_burst = (t % 10.0) < 8.0;
            let s = if in_burst {
                0.5 * (2.0 * PI * 330.0 * t).sin() + 0.1 * (2.0 * PI * 47.0 * t).sin()
            } else {
                0.0005 * (2.0 * PI * 31.0 * t).sin()
            };
            (s * 32768.0).round() / 32768.0
        })
        .collect()
}

#[test]
fn wav_to_manifest_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("talk.wav");
    let buffer = AudioBuffer::new(16000, talk_samples(), "talk.wav").unwrap();
    write_wav(&buffer, &path).unwrap();

    let loaded = read_wav::<f64>(&path).unwrap();
    assert_eq!(loaded.samples(), buffer.samples());

    let decisions = detect_voice(&loaded, &VadConfig::default()).unwrap();

    // decisions survive the text format
    let mut bytes = Vec::new();
    write_decisions(&decisions, &mut bytes).unwrap();
    let reread = read_decisions(&bytes[..]).unwrap();
    assert_eq!(reread.labels(), decisions.labels());

    // segments from original and re-read decisions are identical
    let config = SegmenterConfig::default();
    let a = hybrid_segment(&decisions, &config, "talk.wav", "spk").unwrap();
    let b = hybrid_segment(&reread, &config, "talk.wav", "spk").unwrap();
    assert_eq!(a, b);

    let mut manifest = Vec::new();
    write_manifest(&a, &mut manifest).unwrap();
    let parsed = read_manifest(&manifest[..]).unwrap();
    assert_eq!(parsed.len(), a.len());

    let stats = segment_stats(&parsed).unwrap();
    assert_eq!(stats.count, a.len());
    assert!((stats.coverage - 1.0).abs() < 1e-9);
    assert!(stats.max_duration_s <= 20.0 + 0.02 + 1e-9);
}

#[test]
fn feature_pipeline_and_file_format() {
    let buffer64 = AudioBuffer::new(16000, talk_samples()[..32000].to_vec(), "x").unwrap();
    let config = FbankConfig::default();
    let features = cmvn(&fbank(&buffer64, &config).unwrap()).unwrap();
    let masked = spec_augment(
        &features,
        &SpecAugmentConfig {
            seed: 11,
            ..SpecAugmentConfig::default()
        },
    );

    let mut bytes = Vec::new();
    write_fbnk(&masked, &mut bytes).unwrap();
    let reread = read_fbnk(&mut &bytes[..]).unwrap();
    assert_eq!(reread.rows(), masked.rows());
    assert_eq!(reread.cols(), 80);
    for (a, b) in reread.values().iter().zip(masked.values()) {
        assert_eq!(*a, *b as f32, "stored f32 values must match exactly");
    }
}

#[test]
fn scalar_widths_agree() {
    let samples64 = talk_samples()[..48000].to_vec();
    let samples32: Vec<f32> = samples64.iter().map(|&s| s as f32).collect();
    let b64 = AudioBuffer::new(16000, samples64, "x").unwrap();
    let b32 = AudioBuffer::new(16000, samples32, "x").unwrap();

    // identical framing and near-identical labels across widths
    let config = VadConfig::default();
    let d64 = detect_voice(&b64, &config).unwrap();
    let d32 = detect_voice(&b32, &config).unwrap();
    assert_eq!(d64.len(), d32.len());
    let disagreements = d64
        .labels()
        .iter()
        .zip(d32.labels())
        .filter(|(a, b)| a != b)
        .count();
    assert!(disagreements <= d64.len() / 100, "{disagreements} label flips");

    let fb = FbankConfig::default();
    let m64 = fbank(&b64, &fb).unwrap();
    let m32 = fbank(&b32, &fb).unwrap();
    assert_eq!(m64.rows(), m32.rows());
    for (a, b) in m64.values().iter().zip(m32.values()) {
        assert!((a - *b as f64).abs() < 1e-2, "fbank widths diverge: {a} vs {b}");
    }
}
