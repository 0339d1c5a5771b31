//! SpecAugment-style masking: zero out random contiguous bands of mel
//! columns (frequency) and frame rows (time).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fbank::MelMatrix;
use crate::sample::Sample;

/// Masking parameters. All draws come from a generator seeded by `seed`,
/// so a given `(matrix, config)` pair always produces the same output.
/// Corpus drivers must derive per-utterance seeds from a global seed plus
/// the utterance id, never from processing order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecAugmentConfig {
    pub n_freq_masks: usize,
    /// Maximum width of one frequency mask, in mel bins.
    pub max_freq_width: usize,
    pub n_time_masks: usize,
    /// Maximum width of one time mask, in frames.
    pub max_time_width: usize,
    /// Cap on time-mask width as a fraction of the frame count.
    pub max_time_fraction: f64,
    pub mask_value: f64,
    pub seed: u64,
}

impl Default for SpecAugmentConfig {
    fn default() -> Self {
        Self {
            n_freq_masks: 2,
            max_freq_width: 27,
            n_time_masks: 2,
            max_time_width: 100,
            max_time_fraction: 1.0,
            mask_value: 0.0,
            seed: 0,
        }
    }
}

/// Applies frequency masks then time masks; every cell outside the masked
/// bands is left bit-identical.
pub fn spec_augment<F: Sample>(m: &MelMatrix<F>, config: &SpecAugmentConfig) -> MelMatrix<F> {
    let rows = m.rows();
    let cols = m.cols();
    let mask = F::from(config.mask_value).unwrap();
    let mut values = m.values().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let freq_cap = config.max_freq_width.min(cols);
    for _ in 0..config.n_freq_masks {
        let width = rng.random_range(0..=freq_cap);
        let start = rng.random_range(0..=cols - width);
        for r in 0..rows {
            for v in &mut values[r * cols + start..r * cols + start + width] {
                *v = mask;
            }
        }
    }

    let fraction_cap = (config.max_time_fraction.clamp(0.0, 1.0) * rows as f64).floor() as usize;
    let time_cap = config.max_time_width.min(fraction_cap);
    for _ in 0..config.n_time_masks {
        let width = rng.random_range(0..=time_cap);
        let start = rng.random_range(0..=rows - width);
        for v in &mut values[start * cols..(start + width) * cols] {
            *v = mask;
        }
    }

    MelMatrix::from_values(rows, cols, values, m.normalized()).unwrap()
}
