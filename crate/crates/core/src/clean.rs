//! Parallel-corpus cleaning: drop pairs carrying disallowed code points and
//! pairs whose target side does not look like the expected language.
//!
//! Language identification is the classic ranked character-trigram
//! out-of-place distance: tokens are lowercased and padded with `_`, the
//! top-k trigrams of the text are ranked by frequency, and the score sums
//! the rank displacement against a reference profile (absent trigrams cost
//! the full profile size). Lower means closer.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use serde::Serialize;
use thiserror::Error;

/// Profile size used for the bundled profiles.
pub const DEFAULT_PROFILE_SIZE: usize = 300;

const SEED_DE: &str = include_str!("seed_de.txt");
const SEED_EN: &str = include_str!("seed_en.txt");

#[derive(Debug, Error)]
pub enum CleanError {
    #[error("text has no trigrams")]
    EmptyText,
    #[error("at least one contrast profile is required")]
    NoContrastProfiles,
    #[error("bad corpus line {line}: expected `src\\ttgt`")]
    BadFormat { line: usize },
    #[error("bad profile file: {0}")]
    BadProfileFormat(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One line of the parallel corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentencePair {
    pub src: String,
    pub tgt: String,
    pub line_no: usize,
}

/// True if the text contains code points the corpus must not carry:
/// control characters that are not whitespace, TAB (the corpus container is
/// TSV), U+FFFD (lenient decoding surfaces broken bytes as this), Unicode
/// noncharacters, and private-use code points.
pub fn has_disallowed_chars(text: &str) -> bool {
    text.chars().any(is_disallowed)
}

fn is_disallowed(c: char) -> bool {
    if c == '\t' {
        return true;
    }
    if c.is_control() && !c.is_whitespace() {
        return true;
    }
    if c == '\u{FFFD}' {
        return true;
    }
    let cp = c as u32;
    if (0xFDD0..=0xFDEF).contains(&cp) || (cp & 0xFFFE) == 0xFFFE {
        return true; // noncharacters
    }
    matches!(cp,
        0xE000..=0xF8FF | 0xF0000..=0xFFFFD | 0x100000..=0x10FFFD) // private use
}

/// Ranked character-trigram profile of one language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LangProfile {
    language: String,
    ranked: Vec<String>,
    rank_of: HashMap<String, usize>,
}

impl LangProfile {
    /// Builds a profile from seed text: top `k` trigrams by frequency,
    /// ties broken by code-point order.
    pub fn build(language: &str, seed_text: &str, k: usize) -> Result<Self, CleanError> {
        let ranked = ranked_trigrams(seed_text, k);
        if ranked.is_empty() {
            return Err(CleanError::EmptyText);
        }
        Ok(Self::from_ranked(language, ranked))
    }

    fn from_ranked(language: &str, ranked: Vec<String>) -> Self {
        let rank_of = ranked
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self {
            language: language.to_string(),
            ranked,
            rank_of,
        }
    }

    /// Profile built from the bundled seed text for `"de"` or `"en"`.
    pub fn builtin(code: &str) -> Option<Self> {
        let seed = match code {
            "de" => SEED_DE,
            "en" => SEED_EN,
            _ => return None,
        };
        Some(Self::build(code, seed, DEFAULT_PROFILE_SIZE).expect("bundled seed is non-empty"))
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn len(&self) -> usize {
        self.ranked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked.is_empty()
    }

    pub fn ranked_trigrams(&self) -> &[String] {
        &self.ranked
    }

    /// Writes the profile format: header `#langprofile <code> k=<int>`,
    /// then one trigram per line in rank order.
    pub fn write(&self, w: &mut impl Write) -> io::Result<()> {
        writeln!(w, "#langprofile {} k={}", self.language, self.ranked.len())?;
        for t in &self.ranked {
            writeln!(w, "{t}")?;
        }
        Ok(())
    }

    pub fn read(r: impl BufRead) -> Result<Self, CleanError> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| CleanError::BadProfileFormat("empty file".into()))??;
        let rest = header
            .strip_prefix("#langprofile ")
            .ok_or_else(|| CleanError::BadProfileFormat("missing #langprofile header".into()))?;
        let (code, k_field) = rest
            .split_once(' ')
            .ok_or_else(|| CleanError::BadProfileFormat("header needs `<code> k=<int>`".into()))?;
        let k: usize = k_field
            .strip_prefix("k=")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| CleanError::BadProfileFormat(format!("bad k field {k_field:?}")))?;
        let mut ranked = Vec::with_capacity(k);
        for line in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            ranked.push(line);
        }
        if ranked.len() != k {
            return Err(CleanError::BadProfileFormat(format!(
                "header declares {} trigrams, file holds {}",
                k,
                ranked.len()
            )));
        }
        if ranked.is_empty() {
            return Err(CleanError::BadProfileFormat("profile has no trigrams".into()));
        }
        Ok(Self::from_ranked(code, ranked))
    }
}

/// Character trigrams of the lowercased text, each token padded as
/// `_token_`.
fn char_trigrams(text: &str) -> Vec<String> {
    let mut trigrams = Vec::new();
    for token in text.split_whitespace() {
        let padded: Vec<char> = std::iter::once('_')
            .chain(token.to_lowercase().chars())
            .chain(std::iter::once('_'))
            .collect();
        for window in padded.windows(3) {
            trigrams.push(window.iter().collect());
        }
    }
    trigrams
}

/// Top-k trigrams by descending frequency, ties by code-point order.
fn ranked_trigrams(text: &str, k: usize) -> Vec<String> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for t in char_trigrams(text) {
        *counts.entry(t).or_insert(0) += 1;
    }
    let mut entries: Vec<(String, usize)> = counts.into_iter().collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    entries.truncate(k);
    entries.into_iter().map(|(t, _)| t).collect()
}

/// Out-of-place distance of `text` against `profile`; 0 means the ranked
/// lists coincide, absent trigrams cost the profile size each.
pub fn language_score(text: &str, profile: &LangProfile) -> Result<u64, CleanError> {
    let k = profile.len();
    let text_ranked = ranked_trigrams(text, k);
    if text_ranked.is_empty() {
        return Err(CleanError::EmptyText);
    }
    let mut score = 0u64;
    for (rank, trigram) in text_ranked.iter().enumerate() {
        score += match profile.rank_of.get(trigram) {
            Some(&profile_rank) => rank.abs_diff(profile_rank) as u64,
            None => k as u64,
        };
    }
    Ok(score)
}

/// Why a pair was removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemovalReason {
    DisallowedChars,
    Language,
}

/// Counts for one cleaning run.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CleanReport {
    pub input_count: usize,
    pub kept_count: usize,
    pub removed_chars: usize,
    pub removed_language: usize,
    pub removal_fraction: f64,
}

/// Filters a parallel corpus in order: a pair is removed if either side
/// carries disallowed characters, or if its target scores further from the
/// expected profile than from the closest contrast profile. Targets with no
/// scorable text are removed under the language rule.
pub fn clean_corpus(
    pairs: Vec<SentencePair>,
    expected: &LangProfile,
    contrasts: &[LangProfile],
) -> Result<(Vec<SentencePair>, CleanReport), CleanError> {
    if contrasts.is_empty() {
        return Err(CleanError::NoContrastProfiles);
    }
    let input_count = pairs.len();
    let mut kept = Vec::with_capacity(pairs.len());
    let mut removed_chars = 0usize;
    let mut removed_language = 0usize;

    for pair in pairs {
        match removal_reason(&pair, expected, contrasts) {
            None => kept.push(pair),
            Some(RemovalReason::DisallowedChars) => removed_chars += 1,
            Some(RemovalReason::Language) => removed_language += 1,
        }
    }

    let removed = removed_chars + removed_language;
    let report = CleanReport {
        input_count,
        kept_count: kept.len(),
        removed_chars,
        removed_language,
        removal_fraction: if input_count == 0 {
            0.0
        } else {
            removed as f64 / input_count as f64
        },
    };
    Ok((kept, report))
}

/// Classifies one pair; `None` keeps it.
pub fn removal_reason(
    pair: &SentencePair,
    expected: &LangProfile,
    contrasts: &[LangProfile],
) -> Option<RemovalReason> {
    if has_disallowed_chars(&pair.src) || has_disallowed_chars(&pair.tgt) {
        return Some(RemovalReason::DisallowedChars);
    }
    let expected_score = match language_score(&pair.tgt, expected) {
        Ok(s) => s,
        Err(_) => return Some(RemovalReason::Language),
    };
    let best_contrast = contrasts
        .iter()
        .filter_map(|p| language_score(&pair.tgt, p).ok())
        .min();
    match best_contrast {
        Some(contrast) if expected_score > contrast => Some(RemovalReason::Language),
        _ => None,
    }
}

/// Reads the `src \t tgt` corpus format.
pub fn read_corpus(r: impl BufRead) -> Result<Vec<SentencePair>, CleanError> {
    let mut pairs = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let (src, tgt) = line
            .split_once('\t')
            .ok_or(CleanError::BadFormat { line: line_no })?;
        pairs.push(SentencePair {
            src: src.to_string(),
            tgt: tgt.to_string(),
            line_no,
        });
    }
    Ok(pairs)
}

pub fn write_corpus(pairs: &[SentencePair], w: &mut impl Write) -> io::Result<()> {
    for p in pairs {
        writeln!(w, "{}\t{}", p.src, p.tgt)?;
    }
    Ok(())
}
