//! Segmentation and data preparation for offline speech translation.
//!
//! The toolkit covers the offline ST front end: loading 16 kHz PCM audio,
//! frame-level voice activity detection, pause-aware segmentation under
//! hard length bounds (plus a pure-VAD baseline), log-Mel filterbank
//! features with utterance-level CMVN and SpecAugment masking, random
//! re-segmentation of aligned training corpora, and parallel-corpus
//! cleaning.
//!
//! The numeric core is generic over the scalar type (`f32` or `f64`) via
//! [`Sample`]; concrete aliases for the common instantiations live at the
//! crate root.

pub mod audio;
pub mod clean;
pub mod fbank;
pub mod resegment;
pub mod sample;
pub mod segment;
pub mod specaugment;
pub mod vad;

pub use sample::Sample;

pub type AudioBuffer32 = audio::AudioBuffer<f32>;
pub type AudioBuffer64 = audio::AudioBuffer<f64>;
pub type MelMatrix32 = fbank::MelMatrix<f32>;
pub type MelMatrix64 = fbank::MelMatrix<f64>;
